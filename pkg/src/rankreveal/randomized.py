"""Randomized low-rank approximation within a spectral threshold.

The main entry points are :func:`blarank` and :func:`sblarank`, which build
an orthonormal basis of the numerical range of ``A`` block by block and stop
as soon as a Ritz value drops below ``threshold**2``. Their randomized-QB
ancestors (:func:`rsvd`, :func:`randqb_blocked`) and the singular value
shrinkage operators built on top of them live here as well.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .linalg import (
    RngStream,
    as_stream,
    eig_desc,
    fro_norm,
    gaussian,
    orth,
    project_out,
    reorth2,
    svd_small,
)
from .validation import check_count, check_matrix, check_positive

__all__ = [
    "RankRevealConfig",
    "BlockRecord",
    "ApproxResult",
    "QBResult",
    "ShrinkResult",
    "ThresholdUnreached",
    "rsvd",
    "randqb_blocked",
    "blarank",
    "sblarank",
    "rank_reveal",
    "deflated_power_sample",
    "ritz_pairs",
    "soft_threshold",
    "svt_shrink",
    "approx_shrink",
    "posterior_spectral_estimate",
]


class ThresholdUnreached(RuntimeError):
    """Raised by callers that insist on a basis meeting the threshold."""


@dataclass(frozen=True)
class RankRevealConfig:
    """Parameters of a blocked rank-revealing run.

    ``max_rank=None`` means ``min(m, n)`` of the input. ``stabilized`` picks
    the twice-orthogonalized variant; ``ei_stop`` only affects
    :func:`randqb_blocked`.
    """

    threshold: float
    block_size: int = 10
    power_iters: int = 1
    max_rank: int | None = None
    stabilized: bool = True
    ei_stop: bool = False

    def __post_init__(self):
        check_positive(self.threshold, "threshold")
        check_count(self.block_size, "block_size", minimum=1)
        check_count(self.power_iters, "power_iters", minimum=0)
        if self.max_rank is not None:
            check_count(self.max_rank, "max_rank", minimum=0)

    def rank_cap(self, shape) -> int:
        full = min(shape)
        if self.max_rank is None:
            return full
        if self.max_rank > full:
            raise ValueError(f"max_rank={self.max_rank} exceeds min(m, n)={full}")
        return self.max_rank

    def replace(self, **changes) -> "RankRevealConfig":
        return replace(self, **changes)


@dataclass
class BlockRecord:
    """What one pass of the block loop drew and produced."""

    omega: np.ndarray
    ritz_basis: np.ndarray
    basis: np.ndarray
    ritz_values: np.ndarray
    kept: int


@dataclass
class ApproxResult:
    Q: np.ndarray
    rank: int
    sing_vals: np.ndarray
    blocks: list
    threshold: float
    threshold_reached: bool = True
    residual_fro: float | None = None
    history: list = field(default_factory=list)

    def approximation(self, A: np.ndarray) -> np.ndarray:
        """The rank-``r`` approximation ``Q Q^T A``."""
        return self.Q @ (self.Q.T @ A)

    def block_bases(self):
        """Split ``Q`` into its per-block column groups."""
        out, start = [], 0
        for size in self.blocks:
            out.append(self.Q[:, start:start + size])
            start += size
        return out


@dataclass
class QBResult:
    Q: np.ndarray
    B: np.ndarray
    blocks: list
    residual_estimate: float
    threshold_reached: bool = True

    @property
    def rank(self) -> int:
        return self.Q.shape[1]


@dataclass
class ShrinkResult:
    """Factored shrinkage ``Q @ L_shrunk @ P.T``."""

    Q: np.ndarray
    L_shrunk: np.ndarray
    P: np.ndarray
    tau: float
    threshold_reached: bool = True

    @property
    def rank(self) -> int:
        return self.Q.shape[1]

    def assemble(self) -> np.ndarray:
        return self.Q @ self.L_shrunk @ self.P.T


def rsvd(A, k: int, p: int = 4, rng=None):
    """Basic randomized SVD with ``k + p`` Gaussian samples.

    Returns ``(U_k, s_k, V_k)`` with ``A ~= U_k diag(s_k) V_k^T``.
    """
    A = check_matrix(A)
    k = check_count(k, "k", minimum=1)
    p = check_count(p, "p", minimum=0)
    m, n = A.shape
    ell = k + p
    if ell > min(m, n):
        raise ValueError(f"k + p = {ell} exceeds min(m, n) = {min(m, n)}")
    rng = as_stream(rng)
    Omega = gaussian(rng, n, ell)
    Q = orth(A @ Omega)
    B = Q.T @ A
    Ub, s, V = svd_small(B)
    U = Q @ Ub
    return U[:, :k], s[:k], V[:, :k]


def randqb_blocked(A, cfg: RankRevealConfig, rng=None) -> QBResult:
    """Blocked randomized QB with a Frobenius-norm stopping rule.

    With ``cfg.ei_stop`` the residual matrix is never formed: new blocks are
    sampled as ``A Omega - Q (B Omega)`` and the squared residual norm is
    tracked as ``||A||_F^2 - sum ||B_i||_F^2``.
    """
    A = check_matrix(A, allow_empty=True)
    rng = as_stream(rng)
    m, n = A.shape
    cap = cfg.rank_cap(A.shape)
    theta = cfg.threshold
    Q = np.zeros((m, 0))
    B = np.zeros((0, n))
    blocks = []
    E = fro_norm(A) ** 2
    R = None if cfg.ei_stop else A.copy()
    while True:
        if math.sqrt(max(E, 0.0)) < theta:
            return QBResult(Q, B, blocks, math.sqrt(max(E, 0.0)), True)
        b = min(cfg.block_size, cap - Q.shape[1])
        if b <= 0:
            return QBResult(Q, B, blocks, math.sqrt(max(E, 0.0)), False)
        Omega = gaussian(rng, n, b)
        if cfg.ei_stop:
            Qi = orth(A @ Omega - Q @ (B @ Omega))
        else:
            Qi = orth(R @ Omega)
        Qi = orth(project_out(Qi, Q))
        Bi = Qi.T @ A
        Q = np.hstack([Q, Qi])
        B = np.vstack([B, Bi])
        blocks.append(b)
        if cfg.ei_stop:
            E -= fro_norm(Bi) ** 2
        else:
            R = R - Qi @ Bi
            E = fro_norm(R) ** 2


def deflated_power_sample(A, Q, Omega, power_iters: int, stabilized: bool = True) -> np.ndarray:
    """Orthonormal sample of the range of ``(I - Q Q^T) A`` after power steps.

    Forms ``orth(A Omega)`` and then, ``power_iters`` times, projects out
    ``Q`` and re-applies ``A^T`` and ``A`` with an orthonormalization after
    each product. The final block is projected against ``Q`` once (or with
    :func:`reorth2` when ``stabilized``). In exact arithmetic its range
    equals that of ``P [A A^T P]^q A Omega`` with ``P = I - Q Q^T``.
    """
    Y = orth(A @ Omega)
    for _ in range(power_iters):
        Y = project_out(Y, Q)
        Z = orth(A.T @ Y)
        Y = orth(A @ Z)
    if stabilized:
        return reorth2(Y, Q)
    return orth(project_out(Y, Q))


def ritz_pairs(A, Qh):
    """Rayleigh-Ritz on ``Qh^T A A^T Qh``.

    Returns the rotated basis and its Ritz values in descending order.
    Round-off negatives are clamped to zero.
    """
    W = A.T @ Qh
    U, lam = eig_desc(W.T @ W)
    return Qh @ U, np.maximum(lam, 0.0)


def rank_reveal(A, cfg: RankRevealConfig, rng=None, record: bool = False,
                compute_residual: bool = False) -> ApproxResult:
    """Adaptive blocked rank-revealing approximation of ``A``.

    Dispatches on ``cfg.stabilized``; see :func:`blarank` and
    :func:`sblarank`. With ``record`` the drawn sketches and full Ritz
    blocks are kept in ``result.history``.
    """
    A = check_matrix(A, allow_empty=True)
    rng = as_stream(rng)
    m, n = A.shape
    cap = cfg.rank_cap(A.shape)
    theta2 = cfg.threshold ** 2
    Q = np.zeros((m, 0))
    sing_vals, blocks, history = [], [], []
    reached = False
    while True:
        b = min(cfg.block_size, cap - Q.shape[1])
        if b <= 0:
            break
        Omega = gaussian(rng, n, b)
        Qh = deflated_power_sample(A, Q, Omega, cfg.power_iters, cfg.stabilized)
        Qt, lam = ritz_pairs(A, Qh)
        # strict: a Ritz value equal to theta^2 keeps its direction
        below = np.flatnonzero(lam < theta2)
        t = int(below[0]) if below.size else b
        Qi = orth(project_out(Qt[:, :t], Q)) if t else np.zeros((m, 0))
        if record:
            history.append(BlockRecord(omega=Omega, ritz_basis=Qt, basis=Qi,
                                       ritz_values=lam, kept=t))
        if t:
            Q = np.hstack([Q, Qi])
            sing_vals.extend(np.sqrt(lam[:t]))
            blocks.append(t)
        if below.size:
            reached = True
            break
    sv = np.sort(np.asarray(sing_vals, dtype=float))[::-1]
    result = ApproxResult(Q=Q, rank=Q.shape[1], sing_vals=sv, blocks=blocks,
                          threshold=cfg.threshold, threshold_reached=reached, history=history)
    if compute_residual:
        result.residual_fro = fro_norm(A - result.approximation(A))
    return result


def blarank(A, cfg: RankRevealConfig, rng=None, **kwargs) -> ApproxResult:
    """Blocked rank-revealing approximation, single orthogonalization."""
    return rank_reveal(A, cfg.replace(stabilized=False), rng, **kwargs)


def sblarank(A, cfg: RankRevealConfig, rng=None, **kwargs) -> ApproxResult:
    """Blocked rank-revealing approximation with twice-orthogonalized blocks."""
    return rank_reveal(A, cfg.replace(stabilized=True), rng, **kwargs)


def soft_threshold(x, tau: float):
    """``sgn(x) * max(|x| - tau, 0)``, element-wise for arrays."""
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)


def svt_shrink(A, tau: float) -> np.ndarray:
    """Singular value thresholding via a full thin SVD."""
    A = check_matrix(A)
    U, s, V = svd_small(A)
    s = soft_threshold(s, tau)
    keep = s > 0
    return (U[:, keep] * s[keep]) @ V[:, keep].T


def approx_shrink(W, tau: float, cfg: RankRevealConfig | None = None, rng=None) -> ShrinkResult:
    """Approximate singular value thresholding from a threshold-``tau`` basis.

    A stabilized run with threshold ``tau`` gives ``W ~= Q Q^T W``; a thin QR
    of ``W^T Q = P L^T`` turns this into ``Q L P^T`` and the soft threshold
    is applied entry-wise to ``L``.

    Before the QR the whole basis is rotated by one Rayleigh-Ritz step on
    ``Q^T W W^T Q``. This keeps ``range(Q)`` and ``Q Q^T W`` unchanged but
    orders the columns of ``Q`` along singular directions of ``W``, so ``L``
    is diagonal, and the entry-wise threshold agrees with exact SVT,
    whenever ``Q`` spans an invariant subspace. The per-block rotations
    alone only achieve this inside each block.
    """
    W = check_matrix(W)
    tau = check_positive(tau, "tau")
    cfg = RankRevealConfig(threshold=tau) if cfg is None else cfg.replace(threshold=tau)
    res = sblarank(W, cfg, rng)
    m, n = W.shape
    r = res.rank
    if r == 0:
        return ShrinkResult(np.zeros((m, 0)), np.zeros((0, 0)), np.zeros((n, 0)), tau,
                            res.threshold_reached)
    Q, _ = ritz_pairs(W, res.Q)
    P, Lt = np.linalg.qr(W.T @ Q, mode="reduced")
    L = soft_threshold(Lt.T, tau)
    return ShrinkResult(Q, L, P, tau, res.threshold_reached)


def posterior_spectral_estimate(A, Q, r: int = 10, rng=None) -> float:
    """High-probability upper estimate of ``||(I - Q Q^T) A||_2``.

    Returns ``10 sqrt(2/pi) max_i ||(I - Q Q^T) A w_i||`` over ``r`` fresh
    standard Gaussian vectors ``w_i``.
    """
    A = check_matrix(A)
    r = check_count(r, "r", minimum=1)
    rng = as_stream(rng)
    Q = np.asarray(Q, dtype=float).reshape(A.shape[0], -1)
    Y = project_out(A @ gaussian(rng, A.shape[1], r), Q)
    return 10.0 * math.sqrt(2.0 / math.pi) * float(np.max(np.linalg.norm(Y, axis=0)))

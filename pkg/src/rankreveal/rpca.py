"""Robust PCA by the inexact augmented Lagrange multiplier method.

Splits ``A`` into a low-rank part ``L`` and a sparse part ``S`` by
alternating a singular value shrinkage step on ``L``, an entry-wise soft
threshold on ``S`` and a dual ascent step on the multiplier ``Y``. The
shrinkage is either an exact SVT or the factored approximation from
:func:`~rankreveal.randomized.approx_shrink`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import as_stream, fro_norm, svd_small
from .randomized import RankRevealConfig, approx_shrink, soft_threshold
from .validation import check_count, check_matrix, check_positive

__all__ = ["RpcaConfig", "RpcaState", "alm_rpca", "TRACE_COLUMNS"]

TRACE_COLUMNS = ("iter", "mu", "rank_L", "nnz_S", "relerror")
BACKENDS = ("exact", "approximate")


@dataclass(frozen=True)
class RpcaConfig:
    """ALM parameters. ``lam=None`` means ``1/sqrt(max(m, n))``.

    ``paper_literal_step2`` soft-thresholds ``A - L - S_prev`` in the sparse
    update instead of the usual ``A - L + Y/mu``.
    """

    lam: float | None = None
    mu0: float = 1e-3
    rho: float = 1.1
    max_iters: int = 100
    tol: float = 9e-5
    backend: str = "exact"
    block_size: int = 10
    power_iters: int = 0
    paper_literal_step2: bool = False

    def __post_init__(self):
        if self.lam is not None:
            check_positive(self.lam, "lam")
        check_positive(self.mu0, "mu0")
        check_positive(self.tol, "tol")
        if not self.rho > 1:
            raise ValueError(f"rho must be > 1, got {self.rho}")
        check_count(self.max_iters, "max_iters", minimum=1)
        check_count(self.block_size, "block_size", minimum=1)
        check_count(self.power_iters, "power_iters", minimum=0)
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}, got {self.backend!r}")

    def weight(self, shape) -> float:
        return self.lam if self.lam is not None else 1.0 / math.sqrt(max(shape))


@dataclass
class RpcaState:
    L: np.ndarray
    S: np.ndarray
    Y: np.ndarray
    mu: float
    iter: int = 0
    relerror_trace: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    converged: bool = False

    def trace_csv(self) -> str:
        lines = [",".join(TRACE_COLUMNS)]
        for it, mu, rank, nnz, rel in self.trace:
            lines.append(f"{it},{mu:.17g},{rank},{nnz},{rel:.17g}")
        return "\n".join(lines) + "\n"


def _shrink_exact(W, tau):
    U, s, V = svd_small(W)
    s = soft_threshold(s, tau)
    r = int(np.count_nonzero(s))
    return (U[:, :r] * s[:r]) @ V[:, :r].T, r


def _shrink_approx(W, tau, cfg, rng):
    res = approx_shrink(W, tau, RankRevealConfig(threshold=tau, block_size=cfg.block_size,
                                                 power_iters=cfg.power_iters), rng)
    if res.rank == 0:
        return np.zeros_like(W), 0
    return res.assemble(), int(np.linalg.matrix_rank(res.L_shrunk))


def alm_rpca(A, cfg: RpcaConfig | None = None, rng=None) -> RpcaState:
    """Decompose ``A ~= L + S`` with ``L`` low rank and ``S`` sparse.

    Starts from ``S = Y = 0`` and stops once
    ``||A - L - S||_F / ||A||_F < cfg.tol`` or after ``cfg.max_iters``
    sweeps; ``state.converged`` tells which.
    """
    cfg = RpcaConfig() if cfg is None else cfg
    A = check_matrix(A)
    norm_a = fro_norm(A)
    if norm_a == 0.0:
        raise ValueError("A must be nonzero")
    rng = as_stream(rng)
    lam = cfg.weight(A.shape)
    S = np.zeros_like(A)
    Y = np.zeros_like(A)
    L = np.zeros_like(A)
    state = RpcaState(L=L, S=S, Y=Y, mu=cfg.mu0)
    for j in range(cfg.max_iters):
        mu = cfg.mu0 * cfg.rho ** j
        W = A - S + Y / mu
        if cfg.backend == "exact":
            L, rank = _shrink_exact(W, 1.0 / mu)
        else:
            L, rank = _shrink_approx(W, 1.0 / mu, cfg, rng)
        arg = A - L - S if cfg.paper_literal_step2 else A - L + Y / mu
        S = soft_threshold(arg, lam / mu)
        R = A - L - S
        Y = Y + mu * R
        rel = fro_norm(R) / norm_a
        state.relerror_trace.append(rel)
        state.trace.append((j + 1, mu, rank, int(np.count_nonzero(S)), rel))
        state.L, state.S, state.Y = L, S, Y
        state.mu = cfg.mu0 * cfg.rho ** (j + 1)
        state.iter = j + 1
        if rel < cfg.tol:
            state.converged = True
            break
    return state

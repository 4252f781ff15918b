"""Diagnostics for rank-revealing runs: subspace distances, rank oracles and
per-instance checks of the error bounds that govern blocked deflation.

Every norm here comes from a dense SVD; the metrics are meant to be more
accurate than the algorithms they judge.

A bound check produces :class:`BoundReport` objects. The inequalities are
exact-arithmetic statements, so each report carries an absolute round-off
allowance ``atol`` alongside the relative slack.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import project_out, spectral_norm, svd_small
from .synthetic import SyntheticMatrix
from .validation import check_count, check_positive

__all__ = [
    "BoundReport",
    "deviation",
    "numerical_rank",
    "range_error",
    "approximation_error",
    "gaussian_constant",
    "sketch_split",
    "check_first_block_bounds",
    "check_deflated_block_bounds",
    "check_deflation_rank",
    "check_deflation_spectrum",
    "explicit_deflated_power",
    "format_reports",
]

EPS = np.finfo(float).eps
REL_SLACK = 1e-10
# round-off allowance multiplier on eps-sized quantities
ROUNDOFF = 32.0
# Omega_1 with a larger condition number is treated as rank deficient
COND_LIMIT = 1e12


@dataclass
class BoundReport:
    """One evaluated inequality ``lhs <= rhs``.

    ``holds`` is ``None`` when the hypotheses of the inequality are not met
    for this instance; such reports are excluded rather than failed.
    """

    name: str
    lhs: float
    rhs: float
    holds: bool | None
    atol: float = 0.0
    context: dict = field(default_factory=dict)

    @classmethod
    def evaluate(cls, name, lhs, rhs, atol=0.0, assumption=True, **context):
        lhs, rhs = float(lhs), float(rhs)
        holds = bool(lhs <= rhs * (1.0 + REL_SLACK) + atol) if assumption else None
        return cls(name, lhs, rhs, holds, float(atol), context)

    @property
    def status(self) -> str:
        if self.holds is None:
            return "assumption violated"
        return "holds" if self.holds else "FAILS"

    def as_row(self) -> dict:
        row = {"name": self.name, "lhs": self.lhs, "rhs": self.rhs,
               "atol": self.atol, "status": self.status}
        row.update(self.context)
        return row

    def __str__(self):
        return f"{self.name}: {self.lhs:.3e} <= {self.rhs:.3e} (+{self.atol:.1e}) {self.status}"


def format_reports(reports) -> str:
    return "\n".join(str(r) for r in reports)


def _check_orthonormal(X, name, tol):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-D")
    if X.shape[1] and spectral_norm(X.T @ X - np.eye(X.shape[1])) > tol:
        raise ValueError(f"{name} does not have orthonormal columns")
    return X


def deviation(W, Z, tol: float = 1e-10) -> float:
    """Deviation degree ``||(I - Z Z^T) W W^T||_2`` of ``range(W)`` from ``range(Z)``.

    Both inputs need orthonormal columns and ``W`` may not have more
    columns than ``Z``. For equal column counts this equals the projector
    distance ``||W W^T - Z Z^T||_2``.
    """
    W = _check_orthonormal(W, "W", tol)
    Z = _check_orthonormal(Z, "Z", tol)
    if W.shape[0] != Z.shape[0]:
        raise ValueError(f"row mismatch: {W.shape} vs {Z.shape}")
    if W.shape[1] > Z.shape[1]:
        raise ValueError(f"W has more columns ({W.shape[1]}) than Z ({Z.shape[1]})")
    if W.shape[1] == 0:
        return 0.0
    # ||X W^T||_2 = ||X||_2 because W^T has orthonormal rows
    return spectral_norm(project_out(W, Z))


def numerical_rank(A, theta: float) -> int:
    """Number of singular values strictly greater than ``theta``."""
    check_positive(theta, "theta")
    s = svd_small(np.asarray(A, dtype=float), compute_uv=False)
    return int(np.count_nonzero(s > theta))


def range_error(Q, U_k) -> float:
    """``||(I - U_k U_k^T) Q||_2``, the part of ``range(Q)`` outside ``range(U_k)``."""
    Q = np.asarray(Q, dtype=float)
    if Q.shape[1] == 0:
        return 0.0
    return spectral_norm(project_out(Q, np.asarray(U_k, dtype=float)))


def approximation_error(Q, A, synm: SyntheticMatrix, k: int) -> float:
    """``||Q Q^T A - A_k||_2`` against the optimal rank-``k`` approximation.

    The difference has rank at most ``r + k``, so it is factored through an
    orthonormal basis of ``[Q, U_k]`` and only a small SVD is needed.
    """
    C = Q.T @ A
    left = np.hstack([Q, synm.U[:, :k]])
    right = np.vstack([C, -(synm.sigma[:k, None] * synm.V[:, :k].T)])
    if left.shape[1] == 0:
        return 0.0
    Ql, Rl = np.linalg.qr(left, mode="reduced")
    return spectral_norm(Rl @ right)


def gaussian_constant(delta: float, r: int, ell: int, n: int) -> float:
    """High-probability bound on ``||Omega_2|| ||Omega_1^+||`` for Gaussian sketches.

    ``r`` is the row count of ``Omega_1``, ``ell`` the sketch width and
    ``n`` the ambient dimension.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    check_count(r, "r", minimum=1)
    if not r <= ell <= n:
        raise ValueError(f"need r <= ell <= n, got r={r}, ell={ell}, n={n}")
    d = ell - r + 1
    head = 2.0 * math.e * math.sqrt(ell) / d * (2.0 / delta) ** (1.0 / d)
    return head * (math.sqrt(n - r) + math.sqrt(r) + math.sqrt(2.0 * math.log(2.0 / delta)))


def sketch_split(V, Omega, rows: int):
    """Rotate a sketch into right-singular coordinates and split it.

    Returns ``(Omega_1, Omega_2)`` with ``Omega_1`` the leading ``rows`` rows
    of ``V^T Omega``.
    """
    Oh = V.T @ Omega
    return Oh[:rows], Oh[rows:]


def _sketch_factors(O1, O2):
    cond = np.linalg.cond(O1)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        return cond, math.inf, math.inf, math.inf
    inv = np.linalg.inv(O1)
    ratio = spectral_norm(O2 @ inv) if O2.size else 0.0
    return cond, ratio, spectral_norm(O2) if O2.size else 0.0, spectral_norm(inv)


def check_first_block_bounds(synm: SyntheticMatrix, Omega, Q1, q: int, t: int | None = None):
    """Evaluate the residual, singular value and subspace bounds for one block.

    ``Q1`` is the (Ritz-rotated) block built from the sketch ``Omega`` with
    ``q`` power steps. ``t`` (default: the block width) picks the dominant
    subspace ``U_(t)`` that ``range(Q1)`` is compared with.
    """
    A, sigma = synm.A, synm.sigma
    b = Omega.shape[1]
    t = b if t is None else t
    if not b <= t < len(sigma):
        raise ValueError(f"need b <= t < n, got b={b}, t={t}")
    O1, O2 = sketch_split(synm.V, Omega, b)
    cond, ratio, _, _ = _sketch_factors(O1, O2)
    ok = math.isfinite(ratio)
    ctx = {"q": q, "b": b, "t": t, "cond_omega1": cond, "omega_ratio": ratio}
    norm_a = sigma[0]
    tail = sigma[b:]
    tau_b = sigma[b] / sigma[b - 1] if sigma[b - 1] > 0 else 0.0
    factor = math.sqrt(1.0 + tau_b ** (4 * q) * ratio ** 2) if ok else math.inf
    R = A - Q1 @ (Q1.T @ A)
    s_res = svd_small(R, compute_uv=False)
    reports = [
        BoundReport.evaluate("first-block residual (spectral)", s_res[0], factor * tail[0],
                             ROUNDOFF * EPS * norm_a, ok, **ctx),
        BoundReport.evaluate("first-block residual (frobenius)", np.linalg.norm(s_res),
                             factor * np.linalg.norm(tail),
                             ROUNDOFF * EPS * np.linalg.norm(sigma), ok, **ctx),
    ]
    s_proj = svd_small(Q1.T @ A, compute_uv=False)
    for j in range(b):
        tau_j = sigma[b] / sigma[j] if sigma[j] > 0 else 0.0
        lower = sigma[j] / math.sqrt(1.0 + tau_j ** (4 * q + 2) * ratio ** 2) if ok else 0.0
        atol = ROUNDOFF * EPS * norm_a
        reports.append(BoundReport.evaluate(f"first-block sv upper j={j + 1}", s_proj[j], sigma[j],
                                            atol, ok, **ctx))
        reports.append(BoundReport.evaluate(f"first-block sv lower j={j + 1}", lower, s_proj[j],
                                            atol, ok, **ctx))
    gap = sigma[b - 1] - sigma[b]
    dist_atol = ROUNDOFF * EPS * norm_a / gap if gap > 0 else math.inf
    rhs = (sigma[t] / sigma[b - 1]) ** (2 * q + 1) * ratio if ok else math.inf
    reports.append(BoundReport.evaluate("first-block subspace distance",
                                        range_error(Q1, synm.U[:, :t]), rhs, dist_atol, ok, **ctx))
    return reports


def check_deflated_block_bounds(synm: SyntheticMatrix, result, q: int):
    """Evaluate the deflated-block bounds for every block of a recorded run.

    For block ``l`` with previous basis ``Q_[l-1]`` this measures
    ``eps = d(R(Q_[l-1]), R(U_[l-1]))``, forms ``B = (I - Q_[l-1] Q_[l-1]^T) A``
    and checks that the spectrum of ``B`` tracks the shifted spectrum of
    ``A`` within ``eps ||A||``, the predicted gap ratio of ``B``, and the
    two-sided bounds on the singular values of ``Q_l^T A``.
    """
    if not result.history:
        raise ValueError("result carries no block history; rerun with record=True")
    A, sigma = synm.A, synm.sigma
    n = len(sigma)
    norm_a = sigma[0]
    atol = ROUNDOFF * EPS * norm_a
    reports = []
    prev = np.zeros((A.shape[0], 0))
    for ell, rec in enumerate(result.history, start=1):
        p = prev.shape[1]
        b = rec.omega.shape[1]
        eps_prev = range_error(prev, synm.U[:, :p]) if p else 0.0
        B = A - prev @ (prev.T @ A) if p else A
        Ub, sb, Vb = svd_small(B)
        ctx = {"block": ell, "q": q, "b": b, "eps_prev": eps_prev}
        shifted = np.concatenate([sigma[p:], np.zeros(p)])
        reports.append(BoundReport.evaluate("deflated spectrum shift", np.max(np.abs(sb - shifted)),
                                            eps_prev * norm_a, atol, True, **ctx))
        if rec.kept:
            gap_ok = p + b < n and sigma[p + b - 1] - sigma[p + b] > 2.0 * eps_prev * norm_a
            if gap_ok:
                pred = (sigma[p + b] + eps_prev * norm_a) / (sigma[p + b - 1] - eps_prev * norm_a)
                ratio_b = sb[b] / sb[b - 1]
            else:
                pred = ratio_b = math.nan
            reports.append(BoundReport.evaluate("deflated gap ratio", ratio_b, pred,
                                                atol / max(sb[b - 1], atol), gap_ok, **ctx))
            O1, O2 = sketch_split(Vb, rec.omega, b)
            cond, ratio, n2, ninv = _sketch_factors(O1, O2)
            ok = math.isfinite(ratio)
            ctx = dict(ctx, cond_omega1=cond, omega_ratio=ratio)
            s_proj = svd_small(rec.ritz_basis.T @ A, compute_uv=False)
            for j in range(rec.kept):
                rel = sb[b] / sb[j] if sb[j] > 0 else 0.0
                lower = sb[j] / math.sqrt(1.0 + (n2 * ninv) ** 2 * rel ** (4 * q + 2)) if ok else 0.0
                reports.append(BoundReport.evaluate(f"block sv upper j={j + 1}", s_proj[j], sb[j],
                                                    atol, ok, **ctx))
                reports.append(BoundReport.evaluate(f"block sv lower j={j + 1}", lower, s_proj[j],
                                                    atol, ok, **ctx))
        if rec.basis.shape[1]:
            prev = np.hstack([prev, rec.basis])
    return reports


def check_deflation_rank(synm: SyntheticMatrix, bases, theta: float):
    """Numerical rank after each deflation step against the predicted drop.

    ``bases`` is the sequence of blocks ``Q_1, Q_2, ...``. The report for
    step ``l`` compares ``rank_theta((I - Q_[l] Q_[l]^T) A)`` with
    ``rank_theta(A) - cols(Q_[l])``; its hypothesis is
    ``sigma_k - eps ||A|| > theta > sigma_{k+1} + eps ||A||`` with
    ``eps = d(R(Q_[l]), R_theta(A))``.
    """
    A, sigma = synm.A, synm.sigma
    k = int(np.count_nonzero(sigma > theta))
    norm_a = sigma[0]
    Uk = synm.U[:, :k]
    reports = []
    Q = np.zeros((A.shape[0], 0))
    for ell, Qi in enumerate(bases, start=1):
        Q = np.hstack([Q, Qi])
        eps = range_error(Q, Uk)
        upper = sigma[k] if k < len(sigma) else 0.0
        assumption = eps < 1 and sigma[k - 1] - eps * norm_a > theta > upper + eps * norm_a
        got = numerical_rank(A - Q @ (Q.T @ A), theta)
        want = k - Q.shape[1]
        reports.append(BoundReport.evaluate("deflation rank drop", abs(got - want), 0.0, 0.0,
                                            assumption, step=ell, eps=eps, rank=got,
                                            predicted=want))
    return reports


def check_deflation_spectrum(synm: SyntheticMatrix, W, theta: float):
    """Interlacing of the spectrum of ``A - W W^T A`` for ``range(W)`` inside ``R_theta(A)``.

    With ``j`` columns in ``W`` and numerical rank ``k`` the deflated
    singular values satisfy ``sigma_1 >= s'_1 >= ... >= s'_{k-j} >= sigma_k``,
    ``s'_{k-j+1..k} = 0`` and ``s'_i = sigma_i`` for ``i > k`` once the
    ``j`` zeros are moved into positions ``k-j+1..k``.
    """
    sigma = synm.sigma
    k = int(np.count_nonzero(sigma > theta))
    j = W.shape[1]
    if j > k:
        raise ValueError(f"W has {j} columns but the numerical rank is {k}")
    s = svd_small(synm.A - W @ (W.T @ synm.A), compute_uv=False)
    atol = ROUNDOFF * EPS * sigma[0]
    head, zeros, tail = s[:k - j], s[len(s) - j:], s[k - j:len(s) - j]
    reports = [
        BoundReport.evaluate("deflated head below sigma_1", head.max(initial=0.0), sigma[0], atol),
        BoundReport.evaluate("deflated head above sigma_k", sigma[k - 1] - head.min(initial=np.inf)
                             if head.size else 0.0, 0.0, atol),
        BoundReport.evaluate("deflated zeros", zeros.max(initial=0.0), 0.0, atol),
        BoundReport.evaluate("deflated tail preserved", np.max(np.abs(tail - sigma[k:]), initial=0.0),
                             0.0, atol),
    ]
    return reports


def explicit_deflated_power(A, Q, Omega, q: int) -> np.ndarray:
    """``P [A A^T P]^q A Omega`` with ``P = I - Q Q^T``, no re-orthonormalization."""
    Y = A @ Omega
    for _ in range(q):
        Y = A @ (A.T @ project_out(Y, Q))
    return project_out(Y, Q)

"""Test matrices with prescribed spectra and known singular factors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import RngStream, as_stream, gaussian, orth

__all__ = [
    "SyntheticSpec",
    "SyntheticMatrix",
    "TYPE_I",
    "TYPE_II",
    "geometric_segment",
    "random_orthonormal",
    "make_synthetic",
    "make_gap_matrix",
    "make_from_spectrum",
]


@dataclass(frozen=True)
class SyntheticSpec:
    """Three-plateau spectrum for a ``2n x n`` test matrix.

    The singular values fall geometrically from ``top[0]`` to ``top[1]`` over
    indices ``1..k1``, from ``mid[0]`` to ``mid[1]`` over ``k1+1..k2``, and
    from ``tail[0]`` to ``tail[1]`` over ``k2+1..n``.
    """

    n: int
    k1: int
    k2: int
    seed: int = 0
    top: tuple = (1.0, 1e-4)
    mid: tuple = (1e-6, 1e-8)
    tail: tuple = (1e-10, 1e-15)

    def __post_init__(self):
        if not 1 <= self.k1 < self.k2 < self.n:
            raise ValueError(f"need 1 <= k1 < k2 < n, got k1={self.k1}, k2={self.k2}, n={self.n}")

    @property
    def shape(self):
        return (2 * self.n, self.n)

    def with_seed(self, seed: int) -> "SyntheticSpec":
        return SyntheticSpec(self.n, self.k1, self.k2, seed, self.top, self.mid, self.tail)

    def spectrum(self) -> np.ndarray:
        return np.concatenate([
            geometric_segment(*self.top, self.k1),
            geometric_segment(*self.mid, self.k2 - self.k1),
            geometric_segment(*self.tail, self.n - self.k2),
        ])


# numerical rank 10 at threshold 1e-5
TYPE_I = SyntheticSpec(n=400, k1=10, k2=20)
# numerical rank 20 at threshold 1e-9
TYPE_II = SyntheticSpec(n=800, k1=5, k2=20)


@dataclass
class SyntheticMatrix:
    A: np.ndarray
    U: np.ndarray
    V: np.ndarray
    sigma: np.ndarray

    @property
    def shape(self):
        return self.A.shape

    def dominant_basis(self, k: int) -> np.ndarray:
        return self.U[:, :k]

    def best_approx(self, k: int) -> np.ndarray:
        """Optimal rank-``k`` approximation ``U_k diag(sigma_k) V_k^T``."""
        return (self.U[:, :k] * self.sigma[:k]) @ self.V[:, :k].T


def geometric_segment(start: float, stop: float, count: int) -> np.ndarray:
    """``count`` geometrically spaced values with both endpoints exact."""
    if count < 1:
        return np.zeros(0)
    if count == 1:
        return np.array([float(start)])
    if stop == 0.0 or start == 0.0:
        seg = np.zeros(count)
        seg[0] = start
        return seg
    seg = np.exp(np.linspace(np.log(start), np.log(stop), count))
    seg[0], seg[-1] = start, stop
    return seg


def random_orthonormal(rng: RngStream, m: int, n: int) -> np.ndarray:
    """``m x n`` matrix with orthonormal columns spanning a random subspace."""
    if m < n:
        raise ValueError(f"random_orthonormal needs m >= n, got ({m}, {n})")
    return orth(gaussian(rng, m, n))


def make_from_spectrum(rng, m: int, n: int, sigma) -> SyntheticMatrix:
    """Realize ``A = U diag(sigma) V^T`` with random orthonormal ``U, V``.

    ``sigma`` holds ``min(m, n)`` values; ``U`` is drawn before ``V``.
    """
    rng = as_stream(rng)
    sigma = np.asarray(sigma, dtype=float)
    p = min(m, n)
    if sigma.shape != (p,):
        raise ValueError(f"expected {p} singular values, got {sigma.shape}")
    if np.any(sigma < 0) or np.any(np.diff(sigma) > 0):
        raise ValueError("singular values must be non-negative and non-increasing")
    U = random_orthonormal(rng, m, p)
    V = random_orthonormal(rng, n, p)
    A = (U * sigma) @ V.T
    return SyntheticMatrix(A=A, U=U, V=V, sigma=sigma)


def make_synthetic(spec: SyntheticSpec) -> SyntheticMatrix:
    m, n = spec.shape
    return make_from_spectrum(RngStream(spec.seed), m, n, spec.spectrum())


def make_gap_matrix(rng, m: int, n: int, k: int, sigma_k: float, sigma_k1: float) -> SyntheticMatrix:
    """Matrix whose spectrum has a gap between indices ``k`` and ``k+1``.

    The leading ``k`` values fall geometrically from 1 to ``sigma_k``; the
    remaining ones fall from ``sigma_k1`` to ``sigma_k1 * 1e-6``.
    """
    if not sigma_k > sigma_k1 >= 0:
        raise ValueError(f"need sigma_k > sigma_k1 >= 0, got {sigma_k}, {sigma_k1}")
    p = min(m, n)
    if not 1 <= k <= p:
        raise ValueError(f"k must lie in [1, {p}], got {k}")
    lead = geometric_segment(1.0, sigma_k, k) if k > 1 else np.array([float(sigma_k)])
    sigma = np.concatenate([
        lead,
        geometric_segment(sigma_k1, sigma_k1 * 1e-6, p - k),
    ])
    return make_from_spectrum(rng, m, n, sigma)

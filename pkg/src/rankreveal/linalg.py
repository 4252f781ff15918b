"""Dense linear-algebra kernel.

Matrices are plain ``numpy.ndarray`` objects of dtype float64. Every routine
here is a pure function of its arguments; randomness flows only through an
explicit :class:`RngStream`.
"""
from __future__ import annotations

import numpy as np

__all__ = [
    "RngStream",
    "as_stream",
    "gaussian",
    "orth",
    "reorth2",
    "project_out",
    "eig_desc",
    "jacobi_eigh",
    "svd_small",
    "spectral_norm",
    "fro_norm",
    "orthogonality_loss",
]


class RngStream:
    """Seeded stream of standard normal scalars.

    Backed by the counter-based Philox generator, so a given seed yields the
    same sequence on every platform. A stream has a single owner; do not
    draw from one stream in several threads.
    """

    def __init__(self, seed: int = 0):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.Philox(self.seed))

    def normal(self, size: int) -> np.ndarray:
        return self._gen.standard_normal(size)

    def spawn(self, key: int) -> "RngStream":
        """Independent child stream keyed by ``key`` (deterministic)."""
        return RngStream(np.random.SeedSequence([self.seed, int(key)]).generate_state(1, np.uint64)[0])

    def __repr__(self):
        return f"RngStream(seed={self.seed})"


def as_stream(rng) -> RngStream:
    """Coerce ``None``, an int seed, or a stream into an :class:`RngStream`."""
    if isinstance(rng, RngStream):
        return rng
    if rng is None:
        return RngStream(0)
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng))
    raise TypeError(f"cannot build an RngStream from {type(rng).__name__}")


def gaussian(rng: RngStream, m: int, n: int) -> np.ndarray:
    """Draw an ``m x n`` standard normal matrix, filled column by column."""
    if m < 1 or n < 1:
        raise ValueError(f"gaussian matrix needs positive shape, got ({m}, {n})")
    return rng.normal(m * n).reshape(n, m).T.copy()


def orth(A: np.ndarray) -> np.ndarray:
    """Orthonormal basis for the columns of ``A`` via Householder QR.

    Column signs are fixed so that ``diag(R) >= 0``. Rank-deficient input
    still returns a matrix with orthonormal columns; the directions filling
    the deficiency are whatever the reflectors produce, which is
    deterministic for a given input.
    """
    A = np.asarray(A, dtype=float)
    m, n = A.shape
    if n == 0:
        return np.zeros((m, 0))
    if m < n:
        raise ValueError(f"orth needs rows >= cols, got {A.shape}")
    Q, R = np.linalg.qr(A, mode="reduced")
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    return Q * signs


def project_out(Y: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """``Y - Q (Q^T Y)``; a no-op when ``Q`` has no columns."""
    if Q.shape[1] == 0:
        return Y
    return Y - Q @ (Q.T @ Y)


def reorth2(Y: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Project, orthonormalize, and project again.

    Runs ``Y := Y - Q(Q^T Y)``, ``Y := orth(Y)``, ``Z = Y - Q(Q^T Y)`` and
    returns ``Z``. The second projection removes the component along
    ``range(Q)`` that round-off reintroduces during the first pass.
    """
    Y = project_out(np.asarray(Y, dtype=float), Q)
    Y = orth(Y)
    return project_out(Y, Q)


def jacobi_eigh(M: np.ndarray, tol: float = 1e-14, max_sweeps: int = 60):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Sweeps until the off-diagonal Frobenius mass falls below
    ``tol * ||M||_F``. Returns ``(V, d)`` unsorted.
    """
    A = np.array(M, dtype=float)
    A = 0.5 * (A + A.T)
    n = A.shape[0]
    V = np.eye(n)
    scale = np.linalg.norm(A)
    if n < 2 or scale == 0.0:
        return V, np.diag(A).copy()
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                diff = A[q, q] - A[p, p]
                if apq == 0.0 or abs(apq) <= 1e-300 * max(abs(diff), 1.0):
                    A[p, q] = A[q, p] = 0.0
                    continue
                theta = diff / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                elif theta != 0:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                else:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rp, rq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                cp, cq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    return V, np.diag(A).copy()


def eig_desc(M: np.ndarray):
    """Eigenpairs of the symmetric part of ``M``, eigenvalues descending.

    Returns ``(V, d)`` with ``M ~= V diag(d) V^T``.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"eig_desc needs a square matrix, got shape {M.shape}")
    if M.shape[0] == 0:
        return np.zeros((0, 0)), np.zeros(0)
    d, V = np.linalg.eigh(0.5 * (M + M.T))
    order = np.argsort(d)[::-1]
    return V[:, order], d[order]


def svd_small(A: np.ndarray, compute_uv: bool = True):
    """Thin SVD ``A = U diag(s) V^T`` with ``s`` non-increasing.

    With ``compute_uv=False`` only the singular values are returned.
    """
    A = np.asarray(A, dtype=float)
    if min(A.shape) == 0:
        k = 0
        if not compute_uv:
            return np.zeros(0)
        return np.zeros((A.shape[0], k)), np.zeros(k), np.zeros((A.shape[1], k))
    if not compute_uv:
        return np.linalg.svd(A, compute_uv=False)
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    return U, s, Vt.T


def spectral_norm(A: np.ndarray) -> float:
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return 0.0
    return float(svd_small(A, compute_uv=False)[0])


def fro_norm(A: np.ndarray) -> float:
    return float(np.linalg.norm(A)) if np.asarray(A).size else 0.0


def orthogonality_loss(Q: np.ndarray) -> float:
    """``||I - Q^T Q||_2``; zero for an empty basis."""
    if Q.shape[1] == 0:
        return 0.0
    return spectral_norm(np.eye(Q.shape[1]) - Q.T @ Q)

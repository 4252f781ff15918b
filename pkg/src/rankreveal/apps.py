"""Applications built on the rank-revealing kernels.

Each function here is a pure computation that the command-line layer wraps
with file I/O and run manifests: synthetic benchmarks, singular value
accuracy profiles, low-rank image compression, latent semantic indexing
and robust PCA on frame sequences.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .io import image_to_matrix, matrix_to_image
from .linalg import RngStream, orthogonality_loss, spectral_norm
from .metrics import (
    approximation_error,
    check_deflated_block_bounds,
    check_first_block_bounds,
    range_error,
)
from .randomized import ApproxResult, RankRevealConfig, rank_reveal
from .rpca import RpcaConfig, RpcaState, alm_rpca
from .synthetic import TYPE_I, TYPE_II, make_synthetic

__all__ = [
    "SYNTHETIC_TYPES",
    "BENCH_COLUMNS",
    "ACCURACY_COLUMNS",
    "BOUND_COLUMNS",
    "LSI_COLUMNS",
    "bench_synthetic",
    "aggregate_bench",
    "singular_accuracy",
    "verify_bounds",
    "CompressedImage",
    "compress_image",
    "decompress_image",
    "lsi_scores",
    "frames_to_matrix",
    "rpca_frames",
]

SYNTHETIC_TYPES = {"I": (TYPE_I, 1e-5), "II": (TYPE_II, 1e-9)}
BENCH_COLUMNS = ("algorithm", "b", "q", "seed", "time", "crank", "orth_loss",
                 "range_error", "approx_error")
ACCURACY_COLUMNS = ("algorithm", "b", "q", "seed", "index", "sigma_est", "sigma_true", "rel_error")
BOUND_COLUMNS = ("seed", "b", "q", "name", "lhs", "rhs", "atol", "status")
LSI_COLUMNS = ("rank", "document", "score")
ALGORITHMS = {"blarank": False, "sblarank": True}


def _instance_streams(seed):
    """Matrix and algorithm streams for one benchmark instance."""
    return seed, RngStream(seed).spawn(1)


def _run(A, cfg, algorithm, rng, record=False):
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    return rank_reveal(A, cfg.replace(stabilized=ALGORITHMS[algorithm]), rng, record=record)


def _as_tuple(value):
    return tuple(value) if np.iterable(value) else (value,)


def bench_synthetic(kind: str, block_size, power_iters, theta: float | None = None,
                    seeds: int = 100, first_seed: int = 0, algorithms=("blarank", "sblarank")):
    """Per-seed rows of crank, orthogonality loss, range error and ``||A_r - A_k||_2``.

    ``block_size`` and ``power_iters`` may be sequences; every combination is
    run on each seeded matrix, which is generated once.
    """
    spec, default_theta = SYNTHETIC_TYPES[kind]
    theta = default_theta if theta is None else theta
    cells = [(b, q) for b in _as_tuple(block_size) for q in _as_tuple(power_iters)]
    rows = []
    for seed in range(first_seed, first_seed + seeds):
        mseed, _ = _instance_streams(seed)
        synm = make_synthetic(spec.with_seed(mseed))
        k = int(np.count_nonzero(synm.sigma > theta))
        for b, q in cells:
            cfg = RankRevealConfig(threshold=theta, block_size=b, power_iters=q)
            for algorithm in algorithms:
                _, rng = _instance_streams(seed)
                start = time.perf_counter()
                res = _run(synm.A, cfg, algorithm, rng)
                elapsed = time.perf_counter() - start
                rows.append({
                    "algorithm": algorithm, "b": b, "q": q, "seed": seed,
                    "time": elapsed, "crank": res.rank,
                    "orth_loss": orthogonality_loss(res.Q),
                    "range_error": range_error(res.Q, synm.dominant_basis(k)),
                    "approx_error": approximation_error(res.Q, synm.A, synm, k),
                })
    return rows


def aggregate_bench(rows):
    """Median and max rows per algorithm and ``(b, q)`` cell, keyed by ``seed`` = ``median``/``max``."""
    out = []
    for algorithm, b, q in dict.fromkeys((r["algorithm"], r["b"], r["q"]) for r in rows):
        group = [r for r in rows if (r["algorithm"], r["b"], r["q"]) == (algorithm, b, q)]
        for label, fn in (("median", np.median), ("max", np.max)):
            agg = {"algorithm": algorithm, "b": b, "q": q, "seed": label}
            for col in BENCH_COLUMNS[4:]:
                agg[col] = float(fn([r[col] for r in group]))
            out.append(agg)
    return out


def singular_accuracy(block_sizes, power_iters_list, seeds: int = 20, first_seed: int = 0,
                      algorithm: str = "sblarank", kind: str = "II"):
    """Relative errors ``|s_i - sigma_i| / sigma_i`` of the estimated singular values."""
    spec, theta = SYNTHETIC_TYPES[kind]
    rows = []
    for seed in range(first_seed, first_seed + seeds):
        synm = make_synthetic(spec.with_seed(seed))
        for b in block_sizes:
            for q in power_iters_list:
                _, rng = _instance_streams(seed)
                cfg = RankRevealConfig(threshold=theta, block_size=b, power_iters=q)
                res = _run(synm.A, cfg, algorithm, rng)
                for i, s in enumerate(res.sing_vals):
                    true = synm.sigma[i]
                    rows.append({"algorithm": algorithm, "b": b, "q": q, "seed": seed,
                                 "index": i + 1, "sigma_est": float(s), "sigma_true": float(true),
                                 "rel_error": abs(float(s) - true) / true})
    return rows


def verify_bounds(kind: str, block_size: int, power_iters: int, seeds: int = 10,
                  first_seed: int = 0, theta: float | None = None):
    """Evaluate every per-instance bound on seeded synthetic runs.

    Returns rows in :data:`BOUND_COLUMNS` order, one per evaluated inequality.
    """
    spec, default_theta = SYNTHETIC_TYPES[kind]
    theta = default_theta if theta is None else theta
    cfg = RankRevealConfig(threshold=theta, block_size=block_size, power_iters=power_iters)
    rows = []
    for seed in range(first_seed, first_seed + seeds):
        synm = make_synthetic(spec.with_seed(seed))
        _, rng = _instance_streams(seed)
        res = _run(synm.A, cfg, "sblarank", rng, record=True)
        first = res.history[0]
        reports = check_first_block_bounds(synm, first.omega, first.ritz_basis, power_iters)
        reports += check_deflated_block_bounds(synm, res, power_iters)
        for rep in reports:
            rows.append({"seed": seed, "b": block_size, "q": power_iters, "name": rep.name,
                         "lhs": rep.lhs, "rhs": rep.rhs, "atol": rep.atol, "status": rep.status})
    return rows


@dataclass
class CompressedImage:
    Q: np.ndarray
    B: np.ndarray
    color: bool
    result: ApproxResult
    crank: int
    cratio: float
    relerror: float

    def reconstruct(self) -> np.ndarray:
        return decompress_image(self.Q, self.B, self.color)


def decompress_image(Q, B, color: bool) -> np.ndarray:
    return matrix_to_image(Q @ B, color=color)


def compress_image(img, theta_fraction: float, block_size: int = 10, power_iters: int = 2,
                   rng=None) -> CompressedImage:
    """Low-rank compression with threshold ``theta_fraction * ||A||_2``.

    Color images are stacked channel by channel into a ``3h x w`` matrix.
    ``relerror`` is ``||Q Q^T A - A||_2 / ||A||_2`` before pixel rounding.
    """
    if not 0 < theta_fraction < 1:
        raise ValueError(f"theta_fraction must lie in (0, 1), got {theta_fraction}")
    img = np.asarray(img)
    color = img.ndim == 3
    A = image_to_matrix(img)
    norm_a = spectral_norm(A)
    if norm_a == 0.0:
        raise ValueError("image is entirely black; nothing to compress")
    cfg = RankRevealConfig(threshold=theta_fraction * norm_a, block_size=block_size,
                           power_iters=power_iters)
    res = rank_reveal(A, cfg, rng)
    Q = res.Q
    B = Q.T @ A
    m, n = A.shape
    r = res.rank
    cratio = m * n / ((m + n) * r) if r else float("inf")
    relerror = spectral_norm(A - Q @ B) / norm_a
    return CompressedImage(Q=Q, B=B, color=color, result=res, crank=r, cratio=cratio,
                           relerror=relerror)


def lsi_scores(A, query_terms, Q):
    """Cosine scores of a binary term query against every document.

    ``A`` is terms x documents and ``Q`` an orthonormal basis of (an
    approximation of) its range. Returns ``(order, scores)`` with documents
    sorted by descending score; ties keep document order. Documents whose
    projection ``Q^T a_j`` vanishes score 0.
    """
    A = np.asarray(A, dtype=float)
    terms = np.unique(np.asarray(list(query_terms), dtype=int))
    if terms.size == 0:
        raise ValueError("query has no terms")
    if terms.min() < 0 or terms.max() >= A.shape[0]:
        raise ValueError(f"query term index out of range [0, {A.shape[0]})")
    q = np.zeros(A.shape[0])
    q[terms] = 1.0
    q_hat = Q.T @ q
    W = Q.T @ A
    w_norm = np.linalg.norm(W, axis=0)
    dots = q_hat @ W
    scores = np.zeros(A.shape[1])
    nz = w_norm > 0
    scores[nz] = dots[nz] / (np.linalg.norm(q) * w_norm[nz])
    order = np.argsort(-scores, kind="stable")
    return order, scores


def frames_to_matrix(frames):
    """Stack equally sized gray frames as the columns of ``A``."""
    frames = [np.asarray(f) for f in frames]
    if not frames:
        raise ValueError("no frames given")
    shape = frames[0].shape
    if len(shape) != 2:
        raise ValueError("frames must be gray images")
    for i, f in enumerate(frames):
        if f.shape != shape:
            raise ValueError(f"frame {i} has shape {f.shape}, expected {shape}")
    return np.column_stack([f.astype(float).ravel() for f in frames]), shape


def rpca_frames(frames, cfg: RpcaConfig | None = None, rng=None):
    """Robust PCA on a frame sequence.

    Returns ``(state, backgrounds, foregrounds)`` where the image lists are
    uint8 frames of ``L`` and ``S`` clamped to [0, 255].
    """
    A, shape = frames_to_matrix(frames)
    state: RpcaState = alm_rpca(A, cfg, rng)
    back = [matrix_to_image(state.L[:, j].reshape(shape)) for j in range(A.shape[1])]
    fore = [matrix_to_image(state.S[:, j].reshape(shape)) for j in range(A.shape[1])]
    return state, back, fore

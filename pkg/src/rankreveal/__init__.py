"""Adaptive blocked randomized rank-revealing low-rank approximation."""
from .estimators import RankRevealingApproximation, RobustPCA
from .linalg import RngStream, eig_desc, gaussian, orth, reorth2, spectral_norm, svd_small
from .metrics import BoundReport, deviation, numerical_rank, range_error
from .randomized import (
    ApproxResult,
    QBResult,
    RankRevealConfig,
    ShrinkResult,
    approx_shrink,
    blarank,
    posterior_spectral_estimate,
    randqb_blocked,
    rank_reveal,
    rsvd,
    sblarank,
    soft_threshold,
    svt_shrink,
)
from .rpca import RpcaConfig, RpcaState, alm_rpca
from .synthetic import TYPE_I, TYPE_II, SyntheticMatrix, SyntheticSpec, make_gap_matrix, make_synthetic

__version__ = "0.1.0"

__all__ = [
    "ApproxResult", "BoundReport", "QBResult", "RankRevealConfig", "RankRevealingApproximation",
    "RngStream", "RobustPCA", "RpcaConfig", "RpcaState", "ShrinkResult",
    "SyntheticMatrix", "SyntheticSpec", "TYPE_I", "TYPE_II", "alm_rpca", "approx_shrink",
    "blarank", "deviation", "eig_desc", "gaussian", "make_gap_matrix", "make_synthetic",
    "numerical_rank", "orth", "posterior_spectral_estimate", "randqb_blocked", "range_error",
    "rank_reveal", "reorth2", "rsvd", "sblarank", "soft_threshold", "spectral_norm",
    "svd_small", "svt_shrink",
]

import numpy as np
import pytest

from rankreveal.linalg import RngStream, gaussian, orth, spectral_norm
from rankreveal.metrics import (
    BoundReport,
    approximation_error,
    check_deflated_block_bounds,
    check_deflation_rank,
    check_deflation_spectrum,
    check_first_block_bounds,
    deviation,
    explicit_deflated_power,
    format_reports,
    gaussian_constant,
    numerical_rank,
    range_error,
)
from rankreveal.randomized import RankRevealConfig, deflated_power_sample, rank_reveal, sblarank
from rankreveal.synthetic import TYPE_I, TYPE_II, make_from_spectrum, make_gap_matrix, make_synthetic


@pytest.fixture(scope="module")
def type_one():
    return make_synthetic(TYPE_I)


def test_bound_report_slack_and_status():
    assert BoundReport.evaluate("x", 1.0 + 1e-11, 1.0).holds
    assert not BoundReport.evaluate("x", 1.0 + 1e-9, 1.0).holds
    assert BoundReport.evaluate("x", 2e-16, 0.0, atol=1e-15).holds
    skipped = BoundReport.evaluate("x", 5.0, 1.0, assumption=False)
    assert skipped.holds is None and skipped.status == "assumption violated"
    rep = BoundReport.evaluate("y", 2.0, 1.0, q=1)
    assert rep.status == "FAILS"
    assert rep.as_row()["q"] == 1
    assert "FAILS" in format_reports([rep])


def test_deviation_examples():
    Q = orth(gaussian(RngStream(0), 10, 3))
    assert deviation(Q, Q) <= 1e-12
    e1, e2 = np.array([[1.0], [0.0]]), np.array([[0.0], [1.0]])
    assert deviation(e1, e2) == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(5))
def test_deviation_equals_projector_distance(seed):
    rng = RngStream(seed)
    W = orth(gaussian(rng, 12, 4))
    Z = orth(gaussian(rng, 12, 4))
    proj = spectral_norm(W @ W.T - Z @ Z.T)
    assert abs(deviation(W, Z) - proj) <= 1e-10
    assert abs(deviation(W, Z) - deviation(Z, W)) <= 1e-10


def test_deviation_validation():
    with pytest.raises(ValueError):
        deviation(np.ones((3, 1)), np.eye(3)[:, :1])
    with pytest.raises(ValueError):
        deviation(np.eye(3)[:, :2], np.eye(3)[:, :1])
    assert deviation(np.zeros((3, 0)), np.eye(3)[:, :1]) == 0.0


def test_numerical_rank():
    assert numerical_rank(np.diag([1.0, 0.5, 1e-6]), 1e-3) == 2
    assert numerical_rank(np.zeros((4, 3)), 1.0) == 0
    A = gaussian(RngStream(1), 10, 8)
    ranks = [numerical_rank(A, t) for t in (0.1, 0.5, 1.0, 2.0, 5.0)]
    assert ranks == sorted(ranks, reverse=True)


def test_numerical_rank_type_one(type_one):
    assert numerical_rank(type_one.A, 1e-5) == 10


def test_range_error(type_one):
    Uk = type_one.dominant_basis(10)
    assert range_error(Uk, Uk) <= 1e-12
    assert range_error(type_one.U[:, 10:13], Uk) == pytest.approx(1.0)


def test_range_error_sblarank_q3(type_one):
    res = sblarank(type_one.A, RankRevealConfig(threshold=1e-5, block_size=5, power_iters=3),
                   RngStream(0))
    assert range_error(res.Q, type_one.dominant_basis(10)) <= 1e-9


def test_approximation_error_matches_dense(type_one):
    res = sblarank(type_one.A, RankRevealConfig(threshold=1e-5, block_size=5, power_iters=1),
                   RngStream(2))
    dense = spectral_norm(res.approximation(type_one.A) - type_one.best_approx(10))
    assert approximation_error(res.Q, type_one.A, type_one, 10) == pytest.approx(dense, rel=1e-6,
                                                                                 abs=1e-16)


def test_gaussian_constant():
    assert gaussian_constant(0.5, 1, 1, 2) == pytest.approx(79.703, abs=1e-3)
    assert gaussian_constant(0.5, 1, 1, 50) > gaussian_constant(0.5, 1, 1, 20)
    # ell - r + 1 = 2 versus 1 at the same ell and n
    assert gaussian_constant(0.5, 1, 2, 3) < gaussian_constant(0.5, 2, 2, 3)
    with pytest.raises(ValueError):
        gaussian_constant(1.0, 1, 1, 2)
    with pytest.raises(ValueError):
        gaussian_constant(0.5, 3, 2, 5)


def _first_block(synm, b, q, seed):
    cfg = RankRevealConfig(threshold=1e-5, block_size=b, power_iters=q)
    res = rank_reveal(synm.A, cfg, RngStream(seed), record=True)
    return res, res.history[0]


@pytest.mark.parametrize("t", [None, 10])
def test_first_block_bounds_type_one(type_one, t):
    _, first = _first_block(type_one, 5, 2, 3)
    reports = check_first_block_bounds(type_one, first.omega, first.ritz_basis, 2, t)
    assert reports and all(r.holds for r in reports), format_reports(r for r in reports if not r.holds)


def test_first_block_bounds_seeded(type_one):
    for seed in range(10):
        synm = make_synthetic(TYPE_I.with_seed(seed))
        _, first = _first_block(synm, 10, 1, seed)
        reports = check_first_block_bounds(synm, first.omega, first.ritz_basis, 1)
        residual = [r for r in reports if r.name == "first-block residual (spectral)"]
        assert residual[0].holds


def test_first_block_exact_rank_case():
    synm = make_from_spectrum(RngStream(4), 30, 20, np.r_[[3.0, 2.0, 1.0], np.zeros(17)])
    Omega = gaussian(RngStream(5), 20, 3)
    Q1 = deflated_power_sample(synm.A, np.zeros((30, 0)), Omega, 0)
    reports = check_first_block_bounds(synm, Omega, Q1, 0)
    spectral = reports[0]
    assert spectral.rhs == 0.0 and spectral.lhs <= 1e-10 and spectral.holds


def test_first_block_flags_singular_sketch(type_one):
    Omega = np.zeros((400, 5))
    Omega[0, :] = 1.0
    Q1 = orth(type_one.A[:, :5])
    reports = check_first_block_bounds(type_one, Omega, Q1, 1)
    assert all(r.holds is None for r in reports)


def test_deflated_block_bounds_type_two():
    synm = make_synthetic(TYPE_II)
    res = rank_reveal(synm.A, RankRevealConfig(threshold=1e-9, block_size=10, power_iters=2),
                      RngStream(1), record=True)
    reports = check_deflated_block_bounds(synm, res, 2)
    lower = [r for r in reports if r.name.startswith("block sv lower")]
    assert lower and all(r.holds for r in lower)
    evaluated = [r for r in reports if r.holds is not None]
    assert all(r.holds for r in evaluated), format_reports(r for r in evaluated if not r.holds)
    first = [r for r in reports if r.context["block"] == 1]
    assert first[0].context["eps_prev"] == 0.0
    assert first[0].lhs <= 1e-10


def test_deflated_block_bounds_need_history(type_one):
    res = sblarank(type_one.A, RankRevealConfig(threshold=1e-5), RngStream(0))
    with pytest.raises(ValueError):
        check_deflated_block_bounds(type_one, res, 1)


def test_stabilized_basis_stays_closer_to_numerical_range():
    # distance of the final basis from R_theta(A) on Type II, q=1
    trials, better = 20, 0
    for seed in range(trials):
        synm = make_synthetic(TYPE_II.with_seed(seed))
        cfg = RankRevealConfig(threshold=1e-9, block_size=10, power_iters=1)
        eps = [range_error(rank_reveal(synm.A, cfg.replace(stabilized=stab), RngStream(seed)).Q,
                           synm.U[:, :20]) for stab in (False, True)]
        better += eps[1] <= eps[0]
    assert better >= 0.9 * trials


def test_deflation_rank_on_gap_matrix():
    synm = make_gap_matrix(RngStream(3), 80, 60, 12, 1e-2, 1e-6)
    res = sblarank(synm.A, RankRevealConfig(threshold=1e-4, block_size=4, power_iters=1),
                   RngStream(4))
    reports = check_deflation_rank(synm, res.block_bases(), 1e-4)
    assert len(reports) == 3 and all(r.holds for r in reports)
    assert [r.context["predicted"] for r in reports] == [8, 4, 0]


def test_deflation_spectrum_exact_subspace():
    synm = make_gap_matrix(RngStream(5), 50, 40, 8, 1e-2, 1e-6)
    for j in (0, 3, 8):
        reports = check_deflation_spectrum(synm, synm.U[:, :j], 1e-4)
        assert all(r.holds for r in reports)
    with pytest.raises(ValueError):
        check_deflation_spectrum(synm, synm.U[:, :9], 1e-4)


@pytest.mark.parametrize("q", [1, 2, 3])
def test_implicit_power_matches_explicit(q):
    synm = make_gap_matrix(RngStream(q), 60, 40, 10, 1e-1, 1e-3)
    A = synm.A
    Q = synm.U[:, :4] + 0.0
    Omega = gaussian(RngStream(10 + q), 40, 4)
    implicit = deflated_power_sample(A, Q, Omega, q)
    explicit = orth(explicit_deflated_power(A, Q, Omega, q))
    assert deviation(implicit, explicit) <= 1e-8

import numpy as np
import pytest
import scipy.sparse as sp

from l1lowrank.errors import InvalidInputError
from l1lowrank.instances import InstanceSpec, gen_instance, heuristic_counterexample, planted_parts, subset_hard
from l1lowrank.linalg import entrywise_norm, rank_constrained_solve, svd_truncate
from l1lowrank.lowrank import (
    FitConfig,
    bicriteria_fit,
    cur_decompose,
    fit_input_sparsity,
    fit_lp,
    fit_polyklogd,
    fit_rank_r_B,
    fit_subset_enum,
    input_sparsity_sketches,
    sketch_sizes,
    solve_sketched_core,
)
from l1lowrank.regression import row_fits
from l1lowrank.sketching import SketchSpec


def rank_k(n, d, k, seed):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, k)) @ rng.standard_normal((k, d))


def planted(n, d, k, seed):
    spec = InstanceSpec("planted", n=n, d=d, k=k, seed=seed)
    return gen_instance(spec), planted_parts(spec)[1]


def test_sketch_sizes_presets():
    z = sketch_sizes(3)
    assert z.s == z.r == z.t1 == z.t2 == 28
    assert sketch_sizes(1, FitConfig(preset="theory")).s == 1
    assert sketch_sizes(2, FitConfig(preset="theory")).s == 32
    assert sketch_sizes(3, FitConfig(t2=50)).t2 == 50
    with pytest.raises(InvalidInputError):
        FitConfig(preset="fast")
    with pytest.raises(InvalidInputError):
        FitConfig(p=2.0)


# bicriteria


def test_bicriteria_exact_rank():
    A = rank_k(40, 30, 3, 0)
    f = bicriteria_fit(A, 3)
    assert f.cost_l1 <= 1e-6 * np.abs(A).sum()
    assert f.k == sketch_sizes(3).dense and np.linalg.matrix_rank(f.product()) <= f.k


def test_bicriteria_zero():
    f = bicriteria_fit(np.zeros((5, 4)), 1, SketchSpec("dense-stable", 3))
    assert f.cost_l1 == 0 and not f.U.any() and not f.V.any()


def test_bicriteria_planted():
    A, noise = planted(80, 80, 3, 0)
    assert bicriteria_fit(A, 3).cost_l1 <= 10 * np.abs(noise).sum()


def test_bicriteria_rejects_short_sketch():
    with pytest.raises(InvalidInputError):
        bicriteria_fit(np.eye(4), 3, SketchSpec("dense-stable", 2))


def test_bicriteria_sparse_spec():
    A = rank_k(30, 20, 2, 1)
    f = bicriteria_fit(A, 2, SketchSpec("sparse-stable", 12, seed=3))
    assert f.cost_l1 <= 1e-6 * np.abs(A).sum()


# sketched core


def test_core_exact_representation():
    rng = np.random.default_rng(0)
    n, d, r, s, k = 20, 18, 6, 7, 2
    A = rank_k(n, d, k, 1)
    Rt = rng.standard_normal((r, d))
    S = rng.standard_normal((s, n))
    T1, T2t = rng.standard_normal((9, n)), rng.standard_normal((10, d))
    X, Y = solve_sketched_core(A @ Rt.T, S @ A, T1, T2t, A, k)
    resid = T1 @ A @ Rt.T @ X @ Y @ S @ A @ T2t.T - T1 @ A @ T2t.T
    assert np.linalg.norm(resid) <= 1e-9 * np.linalg.norm(T1 @ A @ T2t.T)


def test_core_equals_rank_constrained_composition():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((20, 20))
    Rt, S = rng.standard_normal((5, 20)), rng.standard_normal((6, 20))
    T1, T2t = rng.standard_normal((8, 20)), rng.standard_normal((9, 20))
    AR, SA = A @ Rt.T, S @ A
    X, Y = solve_sketched_core(AR, SA, T1, T2t, A, 2)
    direct = rank_constrained_solve(T1 @ A @ T2t.T, T1 @ AR, SA @ T2t.T, 2)
    np.testing.assert_allclose(X @ Y, direct, atol=1e-10 * np.abs(direct).max())


def test_core_full_k_is_unconstrained():
    rng = np.random.default_rng(2)
    A = rng.standard_normal((15, 15))
    Rt, S = rng.standard_normal((3, 15)), rng.standard_normal((4, 15))
    T1, T2t = rng.standard_normal((8, 15)), rng.standard_normal((8, 15))
    AR, SA = A @ Rt.T, S @ A
    X, Y = solve_sketched_core(AR, SA, T1, T2t, A, 3)
    L, N, M = T1 @ AR, SA @ T2t.T, T1 @ A @ T2t.T
    W = np.linalg.pinv(L) @ M @ np.linalg.pinv(N)
    assert np.isclose(np.linalg.norm(L @ X @ Y @ N - M), np.linalg.norm(L @ W @ N - M), rtol=1e-9)


def test_core_rejects_large_k():
    with pytest.raises(InvalidInputError):
        solve_sketched_core(np.ones((4, 2)), np.ones((2, 4)), np.eye(4), np.eye(4), np.ones((4, 4)), 3)


# input sparsity


def test_input_sparsity_exact_and_shapes():
    A = rank_k(60, 60, 3, 3)
    f = fit_input_sparsity(A, 3)
    assert f.cost_l1 <= 1e-6 * np.abs(A).sum()
    assert f.U.shape == (60, 3) and f.V.shape == (3, 60)


def test_input_sparsity_accepts_scipy_sparse():
    A = rank_k(30, 25, 2, 4) * (np.random.default_rng(5).random((30, 25)) < 0.3)
    dense = fit_input_sparsity(A, 2, FitConfig(seed=3))
    sparse = fit_input_sparsity(sp.csr_matrix(A), 2, FitConfig(seed=3))
    np.testing.assert_allclose(sparse.product(), dense.product(), atol=1e-9 * np.abs(A).max())


def test_input_sparsity_counterexample():
    n = 100
    A = heuristic_counterexample(n)
    assert fit_input_sparsity(A, 3).cost_l1 <= 20 * n**1.75
    assert entrywise_norm(A - svd_truncate(A, 3), 1) >= 0.9 * n**2


def test_injected_sketches_are_used():
    A = rank_k(20, 15, 2, 6) + 0.01
    sk = input_sparsity_sketches(20, 15, 2, FitConfig(seed=99))
    a = fit_input_sparsity(A, 2, FitConfig(seed=1), sketches=sk)
    b = fit_input_sparsity(A, 2, FitConfig(seed=99))
    np.testing.assert_array_equal(a.U, b.U)


# rank-r B


def test_rank_r_exact_rank_k():
    rng = np.random.default_rng(7)
    U_B, V_B = rng.standard_normal((30, 6)), rng.standard_normal((6, 25))
    U_B[:, 2:] = U_B[:, :2] @ rng.standard_normal((2, 4))
    f = fit_rank_r_B(U_B, V_B, 2)
    B = U_B @ V_B
    assert f.cost_l1 <= 1e-6 * np.abs(B).sum()


def test_rank_r_equal_k():
    rng = np.random.default_rng(8)
    U_B, V_B = rng.standard_normal((20, 3)), rng.standard_normal((3, 20))
    assert fit_rank_r_B(U_B, V_B, 3).cost_l1 <= 1e-8 * np.abs(U_B @ V_B).sum()
    with pytest.raises(InvalidInputError):
        fit_rank_r_B(U_B, V_B, 4)


def test_rank_r_agrees_with_materialized():
    ratios = []
    for t in range(30):
        rng = np.random.default_rng(t)
        U_B, V_B = rng.standard_normal((30, 8)), rng.standard_normal((8, 30))
        cfg = FitConfig(seed=t)
        a = fit_rank_r_B(U_B, V_B, 2, cfg).cost_l1
        b = fit_input_sparsity(U_B @ V_B, 2, cfg).cost_l1
        ratios.append(a / b)
    assert 0.5 <= np.median(ratios) <= 2.0
    assert max(ratios) <= 4.0 and min(ratios) >= 0.25


# polyklogd


def test_polyklogd_exact():
    A = rank_k(60, 60, 3, 9)
    assert fit_polyklogd(A, 3).cost_l1 <= 1e-6 * np.abs(A).sum()


def test_polyklogd_counterexample():
    n = 100
    assert fit_polyklogd(heuristic_counterexample(n), 3).cost_l1 <= 20 * n**1.75


def test_polyklogd_triangle_audit():
    A, _ = planted(40, 40, 3, 1)
    f = fit_polyklogd(A, 3)
    assert f.cost_l1 <= f.info["stage1_cost"] + f.info["stage2_cost"] + 1e-9
    assert f.info["U_B"].shape[1] == sketch_sizes(3).s


# CUR


def test_cur_structure():
    A, _ = planted(40, 30, 2, 2)
    cur = cur_decompose(A, 2)
    for j, (idx, scale) in enumerate(zip(cur.col_index, cur.col_scale)):
        np.testing.assert_array_equal(cur.C[:, j], scale * A[:, idx])
    for i, (idx, scale) in enumerate(zip(cur.row_index, cur.row_scale)):
        np.testing.assert_array_equal(cur.R[i], scale * A[idx])
    assert np.linalg.matrix_rank(cur.product(), tol=1e-8 * np.abs(A).max()) <= 2
    assert cur.C.shape[1] <= sketch_sizes(2).sample and cur.R.shape[0] <= sketch_sizes(2).sample
    assert np.isclose(cur.cost_l1, np.abs(cur.product() - A).sum())


def test_cur_zero_matrix():
    cur = cur_decompose(np.zeros((6, 5)), 1)
    assert cur.cost_l1 == 0 and not cur.product().any()


# subset enumeration


def test_subset_enum_exact():
    A = rank_k(12, 8, 2, 10)
    assert fit_subset_enum(A, 2, 2).cost_l1 <= 1e-6 * np.abs(A).sum()


def test_subset_enum_argmin_property():
    A = np.random.default_rng(11).standard_normal((10, 6))
    f = fit_subset_enum(A, 1, 2)
    assert f.cost_l1 <= min(f.info["candidate_costs"]) + 1e-12


def test_subset_enum_dominates_input_sparsity():
    for t in range(20):
        A = np.random.default_rng(100 + t).standard_normal((12, 8))
        cfg = FitConfig(seed=t)
        assert fit_subset_enum(A, 1, 2, cfg).cost_l1 <= fit_input_sparsity(A, 1, cfg).cost_l1 + 1e-9


def test_subset_enum_limits():
    with pytest.raises(InvalidInputError):
        fit_subset_enum(np.ones((5, 20)), 1, 7)
    with pytest.raises(InvalidInputError):
        fit_subset_enum(np.ones((5, 30)), 1, 6)
    with pytest.raises(InvalidInputError):
        fit_subset_enum(np.ones((5, 8)), 3, 2)


def test_subset_enum_subset_hard_instance():
    d = 16
    f = fit_subset_enum(subset_hard(d), 1, 1)
    assert f.cost_l1 <= d - 1 + 1e-9


# lp


def test_lp_p1_matches_cauchy_pipeline():
    A, _ = planted(30, 30, 2, 3)
    a = fit_lp(A, 2, 1.0, FitConfig(seed=4))
    b = fit_polyklogd(A, 2, FitConfig(seed=4))
    np.testing.assert_array_equal(a.U, b.U)
    np.testing.assert_array_equal(a.V, b.V)


def test_lp_exact_rank():
    A = rank_k(40, 40, 3, 12)
    f = fit_lp(A, 3, 1.5)
    assert f.cost_l1 <= 1e-6 * entrywise_norm(A, 1.5)
    assert fit_lp(A, 3, 1.5, algo="input-sparsity").cost_l1 <= 1e-6 * entrywise_norm(A, 1.5)


def test_lp_planted():
    spec = InstanceSpec("planted", n=40, d=40, k=3, seed=5)
    A, noise = gen_instance(spec), planted_parts(spec)[1]
    assert fit_lp(A, 3, 1.5).cost_l1 <= 20 * entrywise_norm(noise, 1.5)


def test_lp_rejects_p():
    with pytest.raises(InvalidInputError):
        fit_lp(np.eye(3), 1, 2.0)


# invariants


FITS = {
    "bicriteria": lambda A, k, cfg: bicriteria_fit(A, k, cfg=cfg),
    "input-sparsity": fit_input_sparsity,
    "polyklogd": fit_polyklogd,
    "lp": lambda A, k, cfg: fit_lp(A, k, 1.5, cfg),
}


@pytest.mark.parametrize("name", sorted(FITS))
def test_stored_cost_and_determinism(name):
    A, _ = planted(25, 20, 2, 6)
    cfg = FitConfig(seed=17)
    f = FITS[name](A, 2, cfg)
    g = FITS[name](A, 2, cfg)
    assert np.isclose(f.cost_l1, f.recompute_cost(A), rtol=1e-8)
    np.testing.assert_array_equal(f.U, g.U)
    np.testing.assert_array_equal(f.V, g.V)


@pytest.mark.parametrize("name", sorted(FITS))
def test_zero_matrix_no_sketching(name):
    f = FITS[name](np.zeros((6, 5)), 2, FitConfig())
    assert f.cost_l1 == 0 and not f.U.any() and not f.V.any()


def test_median_cost_monotone_in_k():
    for inst in range(2):
        A, _ = planted(40, 40, 3, inst)
        med = [np.median([fit_polyklogd(A, k, FitConfig(seed=s)).cost_l1 for s in range(10)]) for k in (1, 2, 3)]
        assert med[0] >= med[1] >= med[2]


def test_frobenius_relaxation_sandwich():
    for seed in range(5):
        A, noise = planted(30, 20, 2, seed)
        svd_cost = entrywise_norm(A - svd_truncate(A, 2), 1)
        assert svd_cost <= np.sqrt(A.size) * np.abs(noise).sum()
    B = rank_k(20, 20, 2, 0)
    assert entrywise_norm(B - svd_truncate(B, 2), 1) <= 1e-9 * np.abs(B).sum()


def test_subset_hard_row_restriction():
    d = 16
    A = subset_hard(d)
    opt = d - 1
    for i in range(A.shape[0]):
        V = A[i : i + 1]
        U = row_fits(A, V)
        assert np.abs(U @ V - A).sum() >= 1.5 * opt

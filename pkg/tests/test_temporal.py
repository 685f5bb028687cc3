import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tvkron.covmodel import DataMatrix
from tvkron.harness import Scenario
from tvkron.kernelsmooth import Kernel, make_weights
from tvkron.metrics import support_mcc
from tvkron.temporal import (ProjectionError, StageError, correlation_scale, estimate_a,
                             estimate_trace_b, estimate_trace_b_t, form_a_tilde,
                             maxnorm_lower_bound, project_a, psd_project_maxnorm, tune_trace_a)

from oracles import a_tilde_loop, maxnorm_projection_grid, trace_b_t_loop


def test_trace_b_estimators_match_loops(rng):
    x = rng.standard_normal((4, 30))
    data = DataMatrix(x)
    k = Kernel("epanechnikov", 0.3)
    w = make_weights(k, 0.4, 30).weights
    assert estimate_trace_b_t(data, 0.4, k, 9.0) == pytest.approx(trace_b_t_loop(x, w, 9.0), abs=1e-12)
    flat = np.full(30, 1 / 30)
    assert estimate_trace_b(data, 9.0) == pytest.approx(trace_b_t_loop(x, flat, 9.0), abs=1e-12)


def test_a_tilde_matches_loop(rng):
    x = rng.standard_normal((5, 12))
    k = Kernel("epanechnikov", 0.4)
    weights = [make_weights(k, (i + 1) / 12, 12).weights for i in range(12)]
    np.testing.assert_allclose(form_a_tilde(DataMatrix(x), 7.0, k), a_tilde_loop(x, weights, 7.0),
                               atol=1e-12)
    flat = [np.full(12, 1 / 12)] * 12
    np.testing.assert_allclose(form_a_tilde(DataMatrix(x), 7.0, None), a_tilde_loop(x, flat, 7.0),
                               atol=1e-12)


def test_projection_of_diag_example():
    a_plus, gap = psd_project_maxnorm(np.diag([1.0, -0.5]))
    assert gap == 0.5
    assert np.linalg.eigvalsh(a_plus)[0] >= -1e-12
    assert np.max(np.abs(a_plus - np.diag([1.0, -0.5]))) == 0.5


def test_psd_input_returned_unchanged(rng):
    a = rng.standard_normal((4, 4))
    a = a @ a.T
    out, gap = psd_project_maxnorm(a)
    assert gap == 0.0 and np.array_equal(out, a)


def sym3(vals):
    a = np.zeros((3, 3))
    a[np.triu_indices(3)] = vals
    return a + np.triu(a, 1).T


entries = st.lists(st.floats(-2, 2, allow_nan=False), min_size=6, max_size=6)


@settings(max_examples=8)
@given(entries)
def test_projection_matches_grid_oracle(vals):
    a = sym3(vals)
    scale = np.max(np.abs(a))
    if scale < 1e-3:
        return
    tol = 1e-7 * scale
    a_plus, gap = psd_project_maxnorm(a)
    assert np.linalg.eigvalsh(a_plus)[0] >= -1e-9 * scale
    assert gap == pytest.approx(np.max(np.abs(a_plus - a)), abs=1e-15)
    assert abs(gap - maxnorm_projection_grid(a)) <= 2 * tol


@settings(max_examples=20)
@given(st.integers(0, 10**6))
def test_lower_bound_is_valid(seed):
    r = np.random.default_rng(seed)
    a = r.standard_normal((5, 5))
    a = a + a.T
    g = r.standard_normal((5, 3))
    g = g @ g.T
    _, gap = psd_project_maxnorm(a)
    assert maxnorm_lower_bound(a, g) <= gap + 1e-9


def test_projection_reports_non_convergence(rng):
    a = rng.standard_normal((6, 6))
    with pytest.raises(ProjectionError, match="did not converge"):
        psd_project_maxnorm(a + a.T, max_iter=3)
    with pytest.raises(ValueError, match="symmetric"):
        psd_project_maxnorm(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_correlation_scale():
    m = np.array([[4.0, 2.0], [2.0, 9.0]])
    c = correlation_scale(m)
    assert c[0, 0] == 1.0 and c[0, 1] == pytest.approx(1 / 3)
    with pytest.raises(ValueError, match="diagonal entry 1"):
        correlation_scale(np.diag([1.0, 0.0]))


@pytest.fixture(scope="module")
def ar1_unit():
    real = Scenario(n=100, b_edges=40, b_churn=2, b_change_points=2).build(60, 3)
    return real, real.sample()


def test_estimate_a_end_to_end(ar1_unit):
    real, data = ar1_unit
    tr = real.model.a.trace
    k = Kernel("epanechnikov", 0.3)
    est = estimate_a(data, tr, k, 0.3)
    assert np.trace(est.a_hat) == pytest.approx(tr, rel=1e-6)
    assert np.linalg.eigvalsh(est.a_hat)[0] > 0
    assert est.solver.converged
    truth = np.linalg.inv(real.model.a.matrix)
    truth[np.abs(truth) < 1e-8 * np.abs(truth).max()] = 0
    assert support_mcc(est.precision, truth) > 0.25
    # reusing the projection gives the same answer
    again = estimate_a(data, tr, k, 0.3, projection=project_a(data, tr, k))
    assert np.array_equal(again.a_hat, est.a_hat)


def test_estimate_a_stage_errors(ar1_unit):
    _, data = ar1_unit
    with pytest.raises(StageError) as info:
        estimate_a(data, 1.0, Kernel(), 0.2, admm_max_iter=1)
    assert info.value.stage == "psd_project_maxnorm"
    with pytest.raises(ValueError, match="positive"):
        estimate_a(data, 0.0, Kernel(), 0.2)


def test_tune_trace_a_warns_and_is_nonnegative(ar1_unit):
    _, data = ar1_unit
    with pytest.warns(UserWarning, match="eigenvalue-floor"):
        v = tune_trace_a(data)
    assert v >= 0


def test_tune_trace_a_floor_when_visible():
    # n >> m with B = tau I: the Gram floor is lambda_min(A) + tau, so the
    # heuristic returns tr(A) - m lambda_min(A)
    rng = np.random.default_rng(0)
    m, n, tau = 20, 4000, 0.5
    a = 0.6 ** np.abs(np.subtract.outer(np.arange(m), np.arange(m)))
    x = rng.standard_normal((n, m)) @ np.linalg.cholesky(a).T + np.sqrt(tau) * rng.standard_normal((n, m))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        est = tune_trace_a(DataMatrix(x))
    assert est == pytest.approx(m - m * np.linalg.eigvalsh(a)[0], rel=0.05)


def _ratio(topology, seed):
    real = Scenario(n=100, topology_a=topology, a_block_size=10).build(400, seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return tune_trace_a(real.sample()) / real.model.a.trace, real


def test_tune_trace_a_bias_when_m_exceeds_n():
    # rank n < m: the floor is zero and the estimate is tr(A) + m tau_B, i.e. ratio 1 + tau_B / tau_A
    for seed in range(3):
        ratio, real = _ratio("ar1", seed)
        tau_a = real.model.a.trace / real.model.m
        tau_b = np.mean(np.trace(real.model.b.matrices, axis1=1, axis2=2)) / real.model.n
        assert ratio == pytest.approx(1 + tau_b / tau_a, rel=0.1)


@pytest.mark.xfail(strict=True, reason="eigenvalue floor is zero when m > n; "
                                       "see tune_trace_a docstring")
def test_tune_trace_a_within_30_percent_at_n100_m400():
    for topology in ("ar1", "star_block"):
        ratio, _ = _ratio(topology, 0)
        assert abs(ratio - 1) <= 0.3


def test_worked_examples():
    np.testing.assert_array_equal(correlation_scale(np.array([[4.0, 2.0], [2.0, 1.0]])),
                                  np.ones((2, 2)))
    np.testing.assert_array_equal(correlation_scale(np.diag([2.0, 5.0, 0.5])), np.eye(3))
    out, gap = psd_project_maxnorm(np.eye(4))
    assert gap == 0.0 and np.array_equal(out, np.eye(4))


def test_zero_data_gives_identity():
    # X = 0 and trace_a = m: the diagonal correction makes A_tilde = I exactly
    m = 12
    data = DataMatrix(np.zeros((5, m)))
    k = Kernel("epanechnikov", 0.4)
    np.testing.assert_array_equal(form_a_tilde(data, m, k), np.eye(m))
    est = estimate_a(data, float(m), k, 0.1)
    np.testing.assert_allclose(est.a_hat, np.eye(m), atol=1e-12)
    assert np.all(est.precision[~np.eye(m, dtype=bool)] == 0)


def test_off_diagonal_untouched_by_correction(rng):
    x = rng.standard_normal((4, 9))
    at = form_a_tilde(DataMatrix(x), 3.0, Kernel("epanechnikov", 0.5))
    gram = x.T @ x / 4
    off = ~np.eye(9, dtype=bool)
    np.testing.assert_allclose(at[off], gram[off], atol=1e-15)


def test_tune_trace_a_white_gram_is_zero():
    # orthogonal columns with equal norms: (1/n) X^T X = c I, so floor = mean diagonal
    q, _ = np.linalg.qr(np.random.default_rng(1).standard_normal((30, 6)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert tune_trace_a(DataMatrix(3.0 * q)) == pytest.approx(0.0, abs=1e-12)


def test_pipeline_threshold_gives_diagonal(ar1_unit):
    real, data = ar1_unit
    est = estimate_a(data, real.model.a.trace, Kernel("epanechnikov", 0.3), 1.0)
    assert np.all(est.precision[~np.eye(data.m, dtype=bool)] == 0)


def _best_mcc(n, seeds=3, m=200):
    from tvkron.glasso import lambda_rule_a
    from tvkron.kernelsmooth import bandwidth_rule
    kernel = Kernel("epanechnikov", bandwidth_rule(m))
    scores = {c: [] for c in (0.25, 0.5, 1.0, 2.0, 4.0)}
    for seed in range(seeds):
        real = Scenario(n=n).build(m, seed)
        data = real.sample()
        truth = np.linalg.inv(real.model.a.matrix)
        truth[np.abs(truth) < 1e-8 * np.abs(truth).max()] = 0
        proj = project_a(data, real.model.a.trace, kernel)
        for c in scores:
            est = estimate_a(data, real.model.a.trace, kernel, lambda_rule_a(m, n, c), projection=proj)
            scores[c].append(support_mcc(est.precision, truth))
    return max(np.mean(v) for v in scores.values())


@pytest.mark.slow
def test_more_rows_recover_temporal_graph_better():
    assert _best_mcc(100) > _best_mcc(25)

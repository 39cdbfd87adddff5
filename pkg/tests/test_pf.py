import math

import numpy as np
import pytest

from potsample.bounds import build_linearized
from potsample.model import Interval, make_marginal
from potsample.pf import (
    FilterTrace,
    SVParams,
    _sv_cover,
    _xi_edges,
    _xi_model,
    filter_step,
    prior_propagation,
    run_filter,
    simulate_sv,
    sv_index_model,
    sv_initial_supports,
)

from conftest import grid_cdf, ks_distance

PARAMS = SVParams(0.8, 0.9)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def test_parameter_validation():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError, match="sigma"):
        filter_step(np.array([1.0]), 0.0, SVParams(0.8, 0.0), 10, rng)
    with pytest.raises(ValueError, match="sigma"):
        run_filter(SVParams(0.8, -1.0), [0.0], 10, rng)
    with pytest.raises(ValueError, match="finite"):
        simulate_sv(SVParams(math.nan, 0.9), 5, 1.0, rng)
    with pytest.raises(ValueError, match="beta"):
        run_filter(SVParams(1.0, 0.9), [0.0], 10, rng)
    with pytest.raises(ValueError, match="beta"):
        prior_propagation(SVParams(-1.2, 0.9), 5, 10, rng)


def test_filter_step_input_validation():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError, match="nonempty"):
        filter_step(np.array([]), 0.0, PARAMS, 10, rng)
    with pytest.raises(ValueError, match="positive"):
        filter_step(np.array([1.0, -0.5]), 0.0, PARAMS, 10, rng)
    with pytest.raises(ValueError, match="positive"):
        filter_step(np.array([1.0, math.inf]), 0.0, PARAMS, 10, rng)
    with pytest.raises(ValueError, match="nonempty"):
        filter_step(np.ones((2, 2)), 0.0, PARAMS, 10, rng)
    with pytest.raises(ValueError, match="observation"):
        filter_step(np.array([1.0]), math.inf, PARAMS, 10, rng)
    with pytest.raises(ValueError, match=">= 1"):
        filter_step(np.array([1.0]), 0.0, PARAMS, 0, rng)


def test_simulate_sv_validation():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError, match="steps"):
        simulate_sv(PARAMS, 0, 1.0, rng)
    with pytest.raises(ValueError, match="x0"):
        simulate_sv(PARAMS, 5, 0.0, rng)


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------


def test_simulate_constant_when_noise_free():
    states, _ = simulate_sv(SVParams(1.0, 0.0), 20, 1.5, np.random.default_rng(1))
    assert states == pytest.approx([1.5] * 20, rel=1e-12)


def test_simulate_matches_known_variances():
    # At beta = 0: log(x^2) ~ N(0, sigma^2) and the observation noise
    # log(n^2) has variance pi^2/2.
    states, obs = simulate_sv(SVParams(0.0, 0.9), 100_000, 1.0, np.random.default_rng(43))
    assert np.all(states > 0.0) and np.all(np.isfinite(obs))
    lv = np.log(states**2)
    assert lv.var() == pytest.approx(0.81, rel=0.05)
    assert (obs - lv).var() == pytest.approx(math.pi**2 / 2.0, rel=0.05)


# ---------------------------------------------------------------------------
# Per-ancestor target and covers
# ---------------------------------------------------------------------------


def test_sv_initial_supports_rule():
    m = math.exp(0.5 * 0.3 + 0.25 * 1.2)
    assert sv_initial_supports(1.2, 0.3) == pytest.approx(
        [0.0, m / 4, m / 2, m, 2 * m, 4 * m]
    )


def test_sv_index_model_matches_builtin_step():
    model = sv_index_model(1.3, 0.5, PARAMS)
    alpha = PARAMS.beta * math.log(1.3 * 1.3) - 0.5 * PARAMS.sigma**2
    for x in (0.2, 0.7, 1.1, 2.5, 6.0):
        lv = math.log(x * x)
        want = 0.5 * (math.exp(0.5 - lv) - (0.5 - lv)) + (lv - alpha) ** 2 / (
            2.0 * PARAMS.sigma**2
        )
        assert model.potential(x) == pytest.approx(want, rel=1e-12)


def test_sv_index_model_is_the_transition_times_likelihood():
    # -log of the product likelihood(y|x) * AR(1) density over x, the
    # latter carrying the log(x) change-of-variables term, must match the
    # model up to one additive constant.
    model = sv_index_model(1.3, 0.5, PARAMS)
    center = PARAMS.beta * math.log(1.3 * 1.3)
    xs = np.linspace(0.05, 8.0, 100)
    diffs = []
    for x in xs:
        lv = math.log(x * x)
        direct = (
            0.5 * (math.exp(0.5 - lv) - (0.5 - lv))
            + (lv - center) ** 2 / (2.0 * PARAMS.sigma**2)
            + math.log(x)
        )
        diffs.append(model.potential(float(x)) - direct)
    assert max(diffs) - min(diffs) < 1e-9


def test_xi_model_is_the_rescaled_target():
    # Potential differences are scale invariants: the xi model at xi
    # equals the x-scale model at m*xi up to one additive constant.
    y = 0.5
    alpha = PARAMS.beta * math.log(1.3 * 1.3) - 0.5 * PARAMS.sigma**2
    w = 0.5 * y - alpha
    quad = make_marginal("quadratic", weight=0.5 / PARAMS.sigma**2)
    xi_model = _xi_model(w, 0.5 * y, quad)
    x_model = sv_index_model(1.3, y, PARAMS)
    m = math.exp(0.5 * alpha + 0.25 * y)
    xis = np.linspace(0.05, 6.0, 100)
    diffs = [xi_model.potential(float(t)) - x_model.potential(float(m * t)) for t in xis]
    assert max(diffs) - min(diffs) < 1e-9


def test_vectorized_cover_matches_scalar_bounds():
    y = 0.5
    ws = np.array([-1.7, -0.3, 0.0, 0.9, 2.4])
    edges, g1, g23, L1, L23, *_ = _sv_cover(ws, y, PARAMS.sigma)
    assert np.all(np.isfinite(g1)) and np.all(np.isfinite(g23))
    assert np.allclose(L1, np.exp(-g1)) and np.allclose(L23, np.exp(-g23))
    quad = make_marginal("quadratic", weight=0.5 / PARAMS.sigma**2)
    for r, w in enumerate(ws):
        xm = _xi_model(float(w), 0.5 * y, quad)
        for i in range(len(edges) - 1):
            itv = Interval(float(edges[i]), float(edges[i + 1]))
            s1 = build_linearized(xm, itv, aux=1, rho=1.0).gamma
            s23 = build_linearized(xm, itv, aux=2, rho=1.0).gamma
            assert abs(g1[r, i] - s1) <= 2e-3
            assert abs(g23[r, i] - s23) <= 2e-3


def test_vectorized_cover_gammas_are_sound():
    y = 0.5
    ws = np.array([-1.7, 0.0, 2.4])
    edges, g1, g23, *_ = _sv_cover(ws, y, PARAMS.sigma)
    quad = make_marginal("quadratic", weight=0.5 / PARAMS.sigma**2)
    for r, w in enumerate(ws):
        xm = _xi_model(float(w), 0.5 * y, quad)
        for i in range(len(edges) - 1):
            ts = np.linspace(max(float(edges[i]), 1e-12), float(edges[i + 1]), 300)
            a1 = min(xm.aux_potential(1, 1.0, float(t)) for t in ts)
            a2 = min(xm.aux_potential(2, 1.0, float(t)) for t in ts)
            assert g1[r, i] <= a1 + 1e-9
            assert g23[r, i] <= a2 + 1e-9


def test_xi_edges_cover_the_scaled_support():
    edges = _xi_edges()
    assert edges[0] == 0.0
    assert edges[-1] == pytest.approx(1e8)
    assert np.all(np.diff(edges) > 0.0)


# ---------------------------------------------------------------------------
# Filter steps
# ---------------------------------------------------------------------------


def test_filter_step_output_shape_and_rate():
    rng = np.random.default_rng(40)
    parts = np.exp(0.5 * rng.standard_normal(1000))
    out, stats = filter_step(parts, 0.7, PARAMS, 1000, rng)
    assert out.shape == (1000,)
    assert np.all(out > 0.0) and np.all(np.isfinite(out))
    assert 1 <= stats.distinct_ancestors <= 1000
    assert stats.trials >= 1000
    assert stats.acceptance_rate == pytest.approx(1000 / stats.trials)
    assert 0.45 <= stats.acceptance_rate <= 0.65  # pinned seed


def test_filter_step_single_ancestor_is_exact():
    # With one particle every draw targets the same filtering density,
    # so the pooled output must match its quadrature CDF.
    xs, stats = filter_step(np.array([1.3]), 0.5, PARAMS, 10_000, np.random.default_rng(41))
    assert stats.distinct_ancestors == 1
    model = sv_index_model(1.3, 0.5, PARAMS)
    alpha = PARAMS.beta * math.log(1.3**2) - 0.5 * PARAMS.sigma**2
    m = math.exp(0.5 * alpha + 0.25 * 0.5)
    grid_xs, grid_cum = grid_cdf(model, 1e-9, 12.0 * m, 40_001)
    assert ks_distance(xs, grid_xs, grid_cum) < 0.02


def test_filter_step_single_draw():
    out, stats = filter_step(np.array([0.9, 1.1]), 0.1, PARAMS, 1, np.random.default_rng(4))
    assert out.shape == (1,) and out[0] > 0.0
    assert stats.distinct_ancestors == 1


# ---------------------------------------------------------------------------
# Whole-filter runs
# ---------------------------------------------------------------------------


def test_run_filter_trace_shapes():
    params = SVParams(0.8, 0.9)
    _, obs = simulate_sv(params, 12, 1.0, np.random.default_rng(50))
    trace = run_filter(params, obs, 300, np.random.default_rng(51))
    assert isinstance(trace, FilterTrace)
    assert len(trace) == 12
    assert trace.estimates.shape == trace.stds.shape == trace.acceptance_rates.shape
    assert np.all(trace.estimates > 0.0)
    assert np.all(trace.stds >= 0.0)
    assert np.all((trace.acceptance_rates > 0.0) & (trace.acceptance_rates <= 1.0))
    assert trace.truths is None


def test_run_filter_empty_observations():
    trace = run_filter(PARAMS, [], 50, np.random.default_rng(2))
    assert len(trace) == 0


def test_run_filter_rejects_bad_observations():
    with pytest.raises(ValueError, match="finite"):
        run_filter(PARAMS, [0.0, math.nan], 50, np.random.default_rng(2))
    with pytest.raises(ValueError, match="n_particles"):
        run_filter(PARAMS, [0.0], 0, np.random.default_rng(2))


def test_prior_propagation_baseline():
    out = prior_propagation(PARAMS, 7, 500, np.random.default_rng(3))
    assert out.shape == (7,)
    assert np.all(out > 0.0)

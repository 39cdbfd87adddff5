import math

import numpy as np
import pytest
from scipy.integrate import quad

from potsample.ars_mixture import (
    AcceptanceStats,
    AdaptiveMixtureSampler,
    ExponentialDensity,
    acceptance_curve,
    adaptive_sample,
    build_proposal,
    sample_proposal,
)
from potsample.bounds import SupportSet
from potsample.errors import InfiniteEnvelopeError, InvariantViolationError
from potsample.model import (
    Interval,
    PotentialModel,
    Term,
    make_marginal,
    make_nonlinearity,
)

from conftest import S0, exp_model, grid_cdf, ks_distance


def tail_model(rate: float) -> PotentialModel:
    """Quadratic well plus a linear tail term of the given rate."""
    return PotentialModel(
        (
            Term(make_marginal("quadratic"), make_nonlinearity("affine", slope=1.0)),
            Term(
                make_marginal("linear_ramp", rate=rate),
                make_nonlinearity("affine", slope=1.0),
            ),
        ),
        Interval(0.0, math.inf),
    )


# ---------------------------------------------------------------------------
# ExponentialDensity
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "rate,offset,lo,hi",
    [
        (1.0, 0.0, 0.0, 2.0),
        (0.2, 1.5, 3.0, 40.0),
        (-0.7, 0.3, -5.0, 1.0),
        (0.0, 0.4, 2.0, 6.0),
        (2.5, -1.0, 0.0, math.inf),
        (-1.3, 0.0, -math.inf, 4.0),
    ],
)
def test_exponential_mass_matches_quadrature(rate, offset, lo, hi):
    q = ExponentialDensity(rate, offset)
    a = lo if math.isfinite(lo) else hi - 80.0
    b = hi if math.isfinite(hi) else lo + 80.0
    want, _ = quad(lambda x: math.exp(-(rate * x + offset)), a, b, limit=200)
    assert q.mass(Interval(lo, hi)) == pytest.approx(want, rel=1e-9)


def test_exponential_mass_is_additive():
    q = ExponentialDensity(0.8, 0.1)
    whole = q.mass(Interval(0.0, 7.0))
    parts = q.mass(Interval(0.0, 2.5)) + q.mass(Interval(2.5, 7.0))
    assert parts == pytest.approx(whole, rel=1e-12)


def test_exponential_mass_infinite_cases():
    assert ExponentialDensity(0.0).mass(Interval(0.0, math.inf)) == math.inf
    assert ExponentialDensity(1.0).mass(Interval(-math.inf, 0.0)) == math.inf
    assert ExponentialDensity(-1.0).mass(Interval(0.0, math.inf)) == math.inf
    # Overflow guard: the peak value would exceed exp(700).
    assert ExponentialDensity(1.0, -800.0).mass(Interval(0.0, 1.0)) == math.inf


def test_exponential_validation():
    with pytest.raises(ValueError):
        ExponentialDensity(math.inf)
    with pytest.raises(ValueError):
        ExponentialDensity(1.0, math.nan)
    assert ExponentialDensity(0.5, 1.0).eval_potential(2.0) == 2.0


def test_sample_truncated_matches_analytic_cdf():
    rng = np.random.default_rng(3)
    q = ExponentialDensity(1.0)
    lo, hi = 0.5, 3.0
    xs = np.sort([q.sample_truncated(Interval(lo, hi), rng) for _ in range(100_000)])
    assert lo <= xs[0] and xs[-1] <= hi
    cdf = -np.expm1(-(xs - lo)) / -math.expm1(-(hi - lo))
    n = xs.size
    ks = max(
        (np.arange(1, n + 1) / n - cdf).max(), (cdf - np.arange(0, n) / n).max()
    )
    assert ks < 0.01


def test_sample_truncated_rate_zero_is_uniform():
    rng = np.random.default_rng(4)
    q = ExponentialDensity(0.0, 2.0)
    xs = np.sort([q.sample_truncated(Interval(2.0, 5.0), rng) for _ in range(50_000)])
    cdf = (xs - 2.0) / 3.0
    n = xs.size
    ks = max(
        (np.arange(1, n + 1) / n - cdf).max(), (cdf - np.arange(0, n) / n).max()
    )
    assert ks < 0.01


def test_sample_truncated_negative_rate_rises_toward_hi():
    rng = np.random.default_rng(5)
    q = ExponentialDensity(-1.0)
    xs = np.sort([q.sample_truncated(Interval(0.0, 2.0), rng) for _ in range(50_000)])
    cdf = np.expm1(xs) / math.expm1(2.0)
    n = xs.size
    ks = max(
        (np.arange(1, n + 1) / n - cdf).max(), (cdf - np.arange(0, n) / n).max()
    )
    assert ks < 0.01


def test_sample_truncated_rejects_infinite_mass():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError, match="infinite mass"):
        ExponentialDensity(-1.0).sample_truncated(Interval(0.0, math.inf), rng)
    with pytest.raises(ValueError, match="infinite mass"):
        ExponentialDensity(0.0).sample_truncated(Interval(0.0, math.inf), rng)


def test_sample_truncated_far_tail_stays_in_interval():
    rng = np.random.default_rng(6)
    q = ExponentialDensity(1.0)
    itv = Interval(700.0, 701.0)
    for _ in range(200):
        assert itv.contains(q.sample_truncated(itv, rng))


# ---------------------------------------------------------------------------
# build_proposal
# ---------------------------------------------------------------------------


def test_build_proposal_rejects_bad_j(artificial):
    q = ExponentialDensity(0.2)
    with pytest.raises(ValueError, match="out of range"):
        build_proposal(artificial, 0, q, SupportSet(S0))
    with pytest.raises(ValueError, match="out of range"):
        build_proposal(artificial, 5, q, SupportSet(S0))


def test_build_proposal_rejects_mismatched_q(artificial):
    with pytest.raises(ValueError, match="does not match"):
        build_proposal(artificial, 4, ExponentialDensity(0.3), SupportSet(S0))
    with pytest.raises(ValueError, match="does not match"):
        build_proposal(artificial, 1, ExponentialDensity(0.2), SupportSet(S0))


def test_build_proposal_artificial_frozen(artificial):
    prop = build_proposal(artificial, 4, ExponentialDensity(0.2), SupportSet(S0))
    assert len(prop.pieces) == 4
    assert math.fsum(prop.weights.tolist()) == pytest.approx(1.0, abs=1e-12)
    assert prop.weights == pytest.approx(
        [
            0.08748016562593007,
            0.3930000668362212,
            0.13276873653121665,
            0.3867510310066321,
        ],
        rel=1e-12,
    )
    gammas = [p.gamma for p in prop.pieces]
    assert gammas == pytest.approx(
        [
            9.034724334491028,
            8.216459498428346,
            9.018817776249076,
            9.067757264606204,
        ],
        rel=1e-12,
    )


def test_proposal_envelope_dominates_target(artificial):
    prop = build_proposal(artificial, 4, ExponentialDensity(0.2), SupportSet(S0))
    target_mass, _ = quad(artificial.density_unnorm, 0.0, 60.0, limit=200)
    assert prop.total_mass >= target_mass
    q = ExponentialDensity(0.2)
    for piece in prop.pieces:
        hi = piece.interval.hi if math.isfinite(piece.interval.hi) else 40.0
        for x in np.linspace(piece.interval.lo, hi, 120):
            envelope = piece.scale * math.exp(-q.eval_potential(float(x)))
            assert envelope >= artificial.density_unnorm(float(x)) - 1e-15


def test_proposal_flat_unbounded_piece_raises():
    with pytest.raises(InfiniteEnvelopeError, match="non-finite weight"):
        build_proposal(
            tail_model(0.0), 2, ExponentialDensity(0.0), SupportSet([0.0, 1.0, 2.0])
        )


def test_piece_index_brackets(artificial):
    prop = build_proposal(artificial, 4, ExponentialDensity(0.2), SupportSet(S0))
    cum = np.cumsum(prop.weights)
    assert prop.piece_index(0.0) == 0
    assert prop.piece_index(cum[0] - 1e-12) == 0
    assert prop.piece_index(cum[0] + 1e-12) == 1
    assert prop.piece_index(0.999999) == 3
    assert prop.piece_index(1.0) == 3  # clamped to the last piece


def test_sample_proposal_occupancy(artificial):
    q = ExponentialDensity(0.2)
    prop = build_proposal(artificial, 4, q, SupportSet(S0))
    rng = np.random.default_rng(7)
    n = 20_000
    counts = np.zeros(4)
    for _ in range(n):
        x = sample_proposal(prop, q, rng)
        k = sum(p.interval.hi <= x for p in prop.pieces)
        counts[min(k, 3)] += 1
    for k in range(4):
        w = prop.weights[k]
        sigma = math.sqrt(n * w * (1.0 - w))
        assert abs(counts[k] - n * w) <= 3.5 * sigma


# ---------------------------------------------------------------------------
# Adaptive sampling
# ---------------------------------------------------------------------------


def test_degenerate_single_term_accepts_every_trial():
    em = exp_model(1.0)
    sampler = AdaptiveMixtureSampler(em, 1, ExponentialDensity(1.0), SupportSet([0.0, 1.0]))
    xs, stats = sampler.sample(300, np.random.default_rng(5))
    # With the only term factored out, the envelope is the target.
    assert (stats.trials_per_accept == 1).all()
    assert stats.acceptance_rate == 1.0
    assert (xs >= 0.0).all()


def test_adaptive_samples_match_quadrature_cdf(artificial, artificial_cdf):
    xs, stats, _ = adaptive_sample(
        artificial, 4, ExponentialDensity(0.2), SupportSet(S0), 10_000,
        np.random.default_rng(11),
    )
    grid_xs, grid_cum = artificial_cdf
    assert ks_distance(xs, grid_xs, grid_cum) < 0.02
    assert stats.acceptance_rate > 0.9


def test_adaptive_samples_match_cdf_two_term_tail():
    model = tail_model(0.3)
    xs, _, _ = adaptive_sample(
        model, 2, ExponentialDensity(0.3), SupportSet([0.0, 1.0, 2.0]), 4_000,
        np.random.default_rng(12),
    )
    grid_xs, grid_cum = grid_cdf(model, 0.0, 60.0)
    assert ks_distance(xs, grid_xs, grid_cum) < 0.03


def test_support_growth_tracks_rejections(artificial):
    sampler = AdaptiveMixtureSampler(
        artificial, 4, ExponentialDensity(0.2), SupportSet(S0)
    )
    sampler.sample(2_000, np.random.default_rng(13))
    rejections = sampler.trials - sampler.accepts
    grown = len(sampler.supports) - len(S0)
    assert grown == rejections - sampler.dedupe_skips
    # 0.0 sits on the domain edge and defines no interior cut.
    interior = sum(0.0 < p < math.inf for p in sampler.supports)
    assert len(sampler.proposal().pieces) == interior + 1


def test_adaptive_sample_leaves_input_supports_untouched(artificial):
    sup = SupportSet(S0)
    _, _, refined = adaptive_sample(
        artificial, 4, ExponentialDensity(0.2), sup, 200, np.random.default_rng(14)
    )
    assert sup.points == list(S0)
    assert len(refined) > len(sup)


def test_corrupted_envelope_is_detected():
    em = exp_model(1.0)
    sampler = AdaptiveMixtureSampler(em, 1, ExponentialDensity(1.0), SupportSet([0.0]))
    piece = sampler._pieces[0]
    sampler._pieces[0] = piece._replace(gamma=piece.gamma + 10.0)
    with pytest.raises(InvariantViolationError, match="no longer dominates"):
        for _ in range(50):
            sampler.draw(np.random.default_rng(15))


def test_acceptance_rate_climbs_with_refinement(artificial):
    runs = np.empty((30, 400), dtype=np.int64)
    for r in range(30):
        rng = np.random.default_rng(1000 + r)
        _, stats, _ = adaptive_sample(
            artificial, 4, ExponentialDensity(0.2), SupportSet(S0), 400, rng
        )
        runs[r] = stats.trials_per_accept
    curve = acceptance_curve(runs)
    assert curve[-50:].mean() > 0.9
    assert curve[-50:].mean() > curve[:50].mean()


def test_acceptance_curve_frozen_values():
    got = acceptance_curve(np.array([[1, 2], [1, 1]]))
    assert got.tolist() == [1.0, 0.75]


def test_acceptance_stats_rate():
    stats = AcceptanceStats(np.array([1, 2, 1]))
    assert stats.acceptance_rate == pytest.approx(3.0 / 4.0)


def test_sample_rejects_nonpositive_n(artificial):
    sampler = AdaptiveMixtureSampler(
        artificial, 4, ExponentialDensity(0.2), SupportSet(S0)
    )
    with pytest.raises(ValueError, match=">= 1"):
        sampler.sample(0, np.random.default_rng(0))

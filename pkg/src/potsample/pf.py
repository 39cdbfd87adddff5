"""Accept/reject particle filter for a stochastic volatility model.

State: a positive volatility x_k whose log(x_k^2) follows an AR(1) law;
the observation is y_k = log(x_k^2) + log(n^2) with n standard
Gaussian.  Each filtering step resamples ancestors uniformly, then
draws exact samples from every distinct ancestor's filtering density
with the adaptive transformed-region sampler.

Covers for all distinct ancestors of a step are built in one vectorized
pass.  In units of the support scale m = exp(alpha/2 + y/4) the
per-ancestor target depends on the ancestor only through
w = y/2 - alpha, the support grid is one fixed point set, and the
replacement case ladder plus the tangent-crossing floors become array
expressions over ancestors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .bounds import SEP_TOL, SupportSet
from .model import (
    SV_TAIL_FACTOR,
    Interval,
    PotentialModel,
    Term,
    builtin_model,
    make_marginal,
    make_nonlinearity,
)
from .rou import RouSampler, _geom_cuts, cones_from_arrays

_EXP_LINEAR = make_marginal("exp_linear")

# xi-scale support points shared by every ancestor: the x-scale rule
# {0, m/4, m/2, m, 2m, 4m} divided by its own scale m.
_XI_BASE = (0.0, 0.25, 0.5, 1.0, 2.0, 4.0)

_COVER_ITERS = 10


class SVParams(NamedTuple):
    """AR(1) log-volatility parameters."""

    beta: float
    sigma: float


def _check_params(params: SVParams, zero_sigma_ok: bool = False) -> None:
    if not (math.isfinite(params.beta) and math.isfinite(params.sigma)):
        raise ValueError("beta and sigma must be finite")
    low = 0.0 if zero_sigma_ok else math.nextafter(0.0, 1.0)
    if params.sigma < low:
        raise ValueError(f"sigma must be > 0, got {params.sigma}")


def simulate_sv(
    params: SVParams, steps: int, x0: float, rng
) -> tuple[np.ndarray, np.ndarray]:
    """Simulate volatilities and observations.

    log(x_k^2) = beta*log(x_{k-1}^2) + Gaussian(0, sigma^2), states are
    the positive roots, and each observation adds log of a squared
    standard Gaussian to log(x_k^2).
    """
    _check_params(params, zero_sigma_ok=True)
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if not (math.isfinite(x0) and x0 > 0.0):
        raise ValueError(f"x0 must be positive and finite, got {x0}")
    lv = math.log(x0 * x0)
    states = np.empty(steps)
    obs = np.empty(steps)
    for k in range(steps):
        lv = params.beta * lv + params.sigma * rng.standard_normal()
        states[k] = math.exp(0.5 * lv)
        noise = rng.standard_normal()
        while noise == 0.0:
            noise = rng.standard_normal()
        obs[k] = lv + math.log(noise * noise)
    return states, obs


def sv_initial_supports(y: float, alpha: float) -> list[float]:
    """Initial support rule {0, m/4, m/2, m, 2m, 4m}, m = exp(alpha/2 + y/4)."""
    m = math.exp(0.5 * alpha + 0.25 * y)
    return [0.0, 0.25 * m, 0.5 * m, m, 2.0 * m, 4.0 * m]


def sv_index_model(x_prev: float, y: float, params: SVParams) -> PotentialModel:
    """Filtering potential of one ancestor on the x scale.

    The AR(1) law lives on log(x^2); read as a density over x it picks up
    a log(x) change-of-variables term, which completes the square inside
    the quadratic piece: the center shifts from beta*log(x_prev^2) to
    beta*log(x_prev^2) - sigma^2/2 and the model keeps its two-term form.
    """
    alpha = params.beta * math.log(x_prev * x_prev) - 0.5 * params.sigma**2
    return builtin_model("sv_step", y=y, alpha=alpha, sigma=params.sigma)


def _xi_model(w: float, y_half: float, quad) -> PotentialModel:
    """The per-ancestor target in units of its support scale."""
    t1 = Term(_EXP_LINEAR, make_nonlinearity("log_square", c0=w, c1=-1.0))
    t2 = Term(quad, make_nonlinearity("log_square", c0=y_half, c1=1.0))
    return PotentialModel((t1, t2), Interval(0.0, SV_TAIL_FACTOR), "sv_step_scaled")


def _xi_edges() -> np.ndarray:
    cuts = _geom_cuts(4.0, SV_TAIL_FACTOR)
    return np.array([*_XI_BASE, *cuts, SV_TAIL_FACTOR])


def _sv_cover(ws, y: float, sigma: float):
    """Envelope cones of every ancestor's xi-scale target in one pass.

    Vector twin of the scalar construction: the same replacement case
    ladder as bounds.linearize_term for these two terms, then the same
    tangent-crossing floor as bounds.convex_floor, over arrays indexed
    [ancestor, interval].
    """
    edges = _xi_edges()
    a = edges[:-1][None, :]
    b = edges[1:][None, :]
    w = np.asarray(ws, dtype=float)[:, None]
    y_half = 0.5 * y
    tol = SEP_TOL  # both marginal minimisers sit at 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ln_a = np.log(a)
        ln_b = np.log(b)
        x0 = 0.5 * (a + b)
        ln_m = np.log(x0)

        # Term 1: g = w - 2 ln(xi), convex decreasing, minimiser 0.  On
        # the increasing side a tangent; the midpoint anchor unless its
        # value at b dips below the minimiser, then the b anchor (for
        # this g shape the a anchor can never pass when midpoint fails).
        ga1 = w - 2.0 * ln_a
        gb1 = w - 2.0 * ln_b
        g01 = w - 2.0 * ln_m
        s_mid1 = -2.0 / x0
        use_b1 = g01 + s_mid1 * (b - x0) < -tol
        sA1 = np.where(use_b1, -2.0 / b, s_mid1)
        cA1 = np.where(use_b1, gb1 + 2.0, g01 - s_mid1 * x0)
        # decreasing side: the chord
        sB1 = -2.0 * (ln_b - ln_a) / (b - a)
        cB1 = ga1 - sB1 * a
        caseA1 = gb1 >= -tol
        caseB1 = ~caseA1 & (ga1 <= tol)
        s1 = np.where(caseA1, sA1, np.where(caseB1, sB1, 0.0))
        c1 = np.where(caseA1, cA1, np.where(caseB1, cB1, 0.0))

        # Term 2: g = 2 ln(xi) + y/2, concave increasing, minimiser 0.
        ga2 = 2.0 * ln_a + y_half
        gb2 = 2.0 * ln_b + y_half
        g02 = 2.0 * ln_m + y_half
        s_mid2 = 2.0 / x0
        use_b2 = g02 + s_mid2 * (b - x0) > tol
        sB2 = np.where(use_b2, 2.0 / b, s_mid2)
        cB2 = np.where(use_b2, gb2 - 2.0, g02 - s_mid2 * x0)
        sA2 = 2.0 * (ln_b - ln_a) / (b - a)
        cA2 = ga2 - sA2 * a
        caseA2 = ga2 >= -tol
        caseB2 = ~caseA2 & (gb2 <= tol)
        s2 = np.where(caseA2, sA2, np.where(caseB2, sB2, 0.0))
        c2 = np.where(caseA2, cA2, np.where(caseB2, cB2, 0.0))

        inv_var = 1.0 / (sigma * sigma)
        half_inv_var = 0.5 * inv_var

        def value(x, logterm):
            z1 = s1 * x + c1
            z2 = s2 * x + c2
            tot = 0.5 * (np.exp(np.minimum(z1, 700.0)) - z1)
            tot += half_inv_var * z2 * z2
            tot *= 0.5
            if logterm:
                tot -= np.log(x)
            return tot

        def deriv(x, logterm):
            z1 = s1 * x + c1
            z2 = s2 * x + c2
            tot = 0.5 * s1 * (np.exp(np.minimum(z1, 700.0)) - 1.0)
            tot += inv_var * s2 * z2
            tot *= 0.5
            if logterm:
                tot -= 1.0 / x
            return tot

        def floor(logterm):
            # -log(xi) walls off 0: anchor just inside instead.  Such a
            # substituted anchor must not claim an endpoint minimum (the
            # wall hides the true dip), but its tangent stays a global
            # minorant, so the crossing bound below remains sound.
            wall = np.zeros_like(a, dtype=bool)
            if logterm:
                wall = a == 0.0
            xl = np.where(wall, b * 1e-12, a) + np.zeros_like(s1)
            xr = b + np.zeros_like(s1)
            vl = value(xl, logterm)
            dl = deriv(xl, logterm)
            vr = value(xr, logterm)
            dr = deriv(xr, logterm)
            min_at_l = (dl >= 0.0) & ~wall
            min_at_r = dr <= 0.0
            interior = ~(min_at_l | min_at_r)
            for _ in range(_COVER_ITERS):
                xm = (vl - vr + dr * xr - dl * xl) / (dr - dl)
                bad = ~((xm > xl) & (xm < xr))
                xm = np.where(bad, 0.5 * (xl + xr), xm)
                vm = value(xm, logterm)
                dm = deriv(xm, logterm)
                left = interior & (dm < 0.0)
                right = interior & (dm >= 0.0)
                xl = np.where(left, xm, xl)
                vl = np.where(left, vm, vl)
                dl = np.where(left, dm, dl)
                xr = np.where(right, xm, xr)
                vr = np.where(right, vm, vr)
                dr = np.where(right, dm, dr)
            xm = (vl - vr + dr * xr - dl * xl) / (dr - dl)
            cross = vl + dl * (xm - xl)
            return np.where(min_at_l, vl, np.where(min_at_r, vr, cross))

        g1 = floor(False)
        g23 = floor(True)

        L1 = np.exp(-g1)
        L23 = np.exp(-g23)
        ang = np.arctan(edges)
        ang_lo = ang[:-1][None, :]
        ang_hi = ang[1:][None, :]
        mid = 0.5 * (ang_lo + ang_hi)
        radius = np.hypot(L1, L23)
        t_lo = radius / np.cos(ang_lo - mid)
        t_hi = radius / np.cos(ang_hi - mid)
        v2v = t_lo * np.sin(ang_lo)
        v2u = t_lo * np.cos(ang_lo)
        v3v = t_hi * np.sin(ang_hi)
        v3u = t_hi * np.cos(ang_hi)
        area = 0.5 * np.abs(v2v * v3u - v3v * v2u)
    return edges, g1, g23, L1, L23, v2v, v2u, v3v, v3u, area


class StepStats(NamedTuple):
    """Aggregate statistics of one filtering step."""

    acceptance_rate: float
    trials: int
    distinct_ancestors: int


def filter_step(particles, y: float, params: SVParams, n: int, rng):
    """One accept/reject filtering step drawing n new particles.

    Draws n ancestor indices uniformly with replacement (sorted, then
    run-length encoded so ties group deterministically), builds every
    distinct ancestor's envelope cover in one vectorized pass, and
    draws that ancestor's samples exactly, reusing its adapted cover.
    Returns (pooled particles, StepStats).
    """
    _check_params(params)
    parts = np.asarray(particles, dtype=float)
    if parts.ndim != 1 or parts.size == 0:
        raise ValueError("particle set must be a nonempty 1-D array")
    if not np.all(np.isfinite(parts)) or np.any(parts <= 0.0):
        raise ValueError("particles must be positive and finite")
    if not math.isfinite(y):
        raise ValueError(f"observation must be finite, got {y}")
    n = int(n)
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")

    idx = np.sort(rng.integers(0, parts.size, n))
    anc, counts = np.unique(idx, return_counts=True)
    # center shifted by -sigma^2/2: the x-space change-of-variables term
    # of the AR(1) law, folded into the quadratic (see sv_index_model)
    alphas = params.beta * np.log(parts[anc] ** 2) - 0.5 * params.sigma**2
    y_half = 0.5 * y
    ws = y_half - alphas
    scales = np.exp(0.5 * alphas + 0.25 * y)

    edges, g1, g23, L1, L23, v2v, v2u, v3v, v3u, area = _sv_cover(
        ws, y, params.sigma
    )
    support_pts = edges[:-1].tolist()
    lows, highs = edges[:-1], edges[1:]
    quad = make_marginal("quadratic", weight=0.5 / (params.sigma * params.sigma))

    out = np.empty(n)
    pos = 0
    trials = 0
    for r in range(anc.size):
        model = _xi_model(float(ws[r]), y_half, quad)
        cones = cones_from_arrays(
            lows, highs, L1[r], L23[r], g1[r], g23[r],
            v2v[r], v2u[r], v3v[r], v3u[r], area[r],
        )
        sampler = RouSampler.from_cover(model, 1.0, SupportSet(support_pts), cones)
        k = int(counts[r])
        xs, _ = sampler.sample(k, rng)
        out[pos : pos + k] = scales[r] * xs
        pos += k
        trials += sampler.trials
    return out, StepStats(n / trials, trials, int(anc.size))


@dataclass(frozen=True)
class FilterTrace:
    """Per-step filter outputs; truths are filled when simulating."""

    estimates: np.ndarray
    stds: np.ndarray
    acceptance_rates: np.ndarray
    truths: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.estimates)


def run_filter(params: SVParams, observations, n_particles: int, rng) -> FilterTrace:
    """Accept/reject particle filter over an observation sequence.

    Particles start from the stationary AR(1) law of log(x^2), which
    needs |beta| < 1; each observation advances one filter_step.
    """
    _check_params(params)
    if abs(params.beta) >= 1.0:
        raise ValueError(
            f"stationary initialization needs |beta| < 1, got beta={params.beta}"
        )
    if n_particles < 1:
        raise ValueError(f"n_particles must be >= 1, got {n_particles}")
    obs = [float(v) for v in observations]
    if any(not math.isfinite(v) for v in obs):
        raise ValueError("observations must be finite")
    sd0 = params.sigma / math.sqrt(1.0 - params.beta * params.beta)
    parts = np.exp(0.5 * sd0 * rng.standard_normal(int(n_particles)))
    est = np.empty(len(obs))
    stds = np.empty(len(obs))
    accs = np.empty(len(obs))
    for k, y in enumerate(obs):
        parts, st = filter_step(parts, y, params, parts.size, rng)
        est[k] = parts.mean()
        stds[k] = parts.std()
        accs[k] = st.acceptance_rate
    return FilterTrace(est, stds, accs)


def prior_propagation(params: SVParams, steps: int, n_particles: int, rng) -> np.ndarray:
    """Observation-blind baseline: particle means under pure propagation."""
    _check_params(params)
    if abs(params.beta) >= 1.0:
        raise ValueError(
            f"stationary initialization needs |beta| < 1, got beta={params.beta}"
        )
    if n_particles < 1:
        raise ValueError(f"n_particles must be >= 1, got {n_particles}")
    sd0 = params.sigma / math.sqrt(1.0 - params.beta * params.beta)
    lv = sd0 * rng.standard_normal(int(n_particles))
    out = np.empty(int(steps))
    for k in range(int(steps)):
        lv = params.beta * lv + params.sigma * rng.standard_normal(lv.size)
        out[k] = np.exp(0.5 * lv).mean()
    return out

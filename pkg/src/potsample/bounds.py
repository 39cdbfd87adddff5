"""Lower bounds on potentials over intervals.

Everything the samplers need reduces to one primitive: a finite lower
bound ``gamma`` on a potential over an interval.  Bounds are built in
two steps.  First each term's nonlinearity is replaced by a linear
function chosen so the term can only decrease; the resulting modified
potential is convex in x.  Second, tangent lines to the modified
potential are refined until the value at their crossing pins down the
interval minimum; that crossing value is ``gamma``.  All constructions
stay valid on half-infinite intervals by evaluating IEEE limits at the
infinite endpoint.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple

from .errors import UnboundedRegionError
from .model import Interval, MarginalPotential, Nonlinearity, PotentialModel
from .scalars import line_at, safe_exp

# Relative separation kept between support points.
SEP_TOL = 1e-12

# Stop refining gamma once it sits within this many nats of the minimum;
# the envelope area it controls inflates by at most exp of this.
_FLOOR_TOL = 1e-3
_FLOOR_EVALS = 12

_ESCALATE_STEPS = 130
_WALL_STEPS = 60


class LinearFn(NamedTuple):
    """Line slope*x + intercept with exact endpoint limits."""

    slope: float
    intercept: float

    def at(self, x: float) -> float:
        return line_at(self.slope, self.intercept, x)


class SupportSet:
    """Sorted support points with relative-tolerance deduplication."""

    __slots__ = ("points",)

    def __init__(self, points: Iterable[float] = ()) -> None:
        pts = sorted(float(p) for p in points)
        if any(not math.isfinite(p) for p in pts):
            raise ValueError("support points must be finite")
        self.points: list[float] = []
        for p in pts:
            if self.points and _close(self.points[-1], p):
                continue
            self.points.append(p)

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def insert(self, x: float) -> bool:
        """Add a point; returns False when it deduplicates away."""
        if not math.isfinite(x):
            return False
        i = bisect.bisect_left(self.points, x)
        if i > 0 and _close(self.points[i - 1], x):
            return False
        if i < len(self.points) and _close(self.points[i], x):
            return False
        self.points.insert(i, x)
        return True

    def intervals(self, domain: Interval) -> list[Interval]:
        """Partition of the domain cut at interior support points."""
        cuts = [domain.lo]
        for p in self.points:
            if p <= domain.lo or p >= domain.hi:
                continue
            if _close(p, domain.lo) or _close(p, domain.hi):
                continue
            cuts.append(p)
        cuts.append(domain.hi)
        return [Interval(cuts[i], cuts[i + 1]) for i in range(len(cuts) - 1)]


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= SEP_TOL * (1.0 + min(abs(a), abs(b)))


# ---------------------------------------------------------------------------
# Per-term linear replacements
# ---------------------------------------------------------------------------


def _try_tangents(g, dg, a: float, b: float, mu: float, tol: float, above: bool):
    """Tangent to g at an interior anchor, kept on one side of mu."""
    if math.isfinite(a) and math.isfinite(b):
        cands = (0.5 * (a + b), a, b)
    elif math.isfinite(a):
        cands = (a,)
    elif math.isfinite(b):
        cands = (b,)
    else:
        cands = (0.0,)
    for x0 in cands:
        g0, d0 = g(x0), dg(x0)
        if not (math.isfinite(g0) and math.isfinite(d0)):
            continue
        t = LinearFn(d0, g0 - d0 * x0)
        if above:
            if t.at(a) >= mu - tol and t.at(b) >= mu - tol:
                return t
        else:
            if t.at(a) <= mu + tol and t.at(b) <= mu + tol:
                return t
    return None


def _bounding_secant(g, dg, a: float, b: float, ga: float, gb: float):
    """Chord above a convex g (equally: below a concave g).

    On a half-infinite interval the chord degenerates to the line
    through the finite endpoint with the derivative limit at infinity as
    slope; monotone derivatives make that line dominate every chord.
    """
    if math.isfinite(a) and math.isfinite(b):
        if not (math.isfinite(ga) and math.isfinite(gb)):
            return None
        s = (gb - ga) / (b - a)
        if not math.isfinite(s):
            return None
        return LinearFn(s, ga - s * a)
    if math.isfinite(a):
        s = dg(b)
        if not (math.isfinite(s) and math.isfinite(ga)):
            return None
        return LinearFn(s, ga - s * a)
    if math.isfinite(b):
        s = dg(a)
        if not (math.isfinite(s) and math.isfinite(gb)):
            return None
        return LinearFn(s, gb - s * b)
    return None


def _limit_const(dg, a: float, b: float, ga: float, gb: float, mu: float, above: bool):
    """Constant replacement from a monotone tail with a finite limit."""
    if b == math.inf and math.isfinite(gb):
        d = dg(b)
        if above and d <= 0.0 and gb >= mu:
            return LinearFn(0.0, gb)
        if not above and d >= 0.0 and gb <= mu:
            return LinearFn(0.0, gb)
    if a == -math.inf and math.isfinite(ga):
        d = dg(a)
        if above and d >= 0.0 and ga >= mu:
            return LinearFn(0.0, ga)
        if not above and d <= 0.0 and ga <= mu:
            return LinearFn(0.0, ga)
    return None


def linearize_term(
    marginal: MarginalPotential, nonlinearity: Nonlinearity, interval: Interval
) -> LinearFn:
    """Linear replacement r with Vbar(r(x)) <= Vbar(g(x)) on the interval.

    The replacement sits between the minimiser mu of the marginal and g:
    a tangent (below a convex g, above a concave one) when g stays on
    the increasing side of mu, a chord on the decreasing side, and the
    constant mu when g crosses mu or no certified line exists.
    """
    return _linearize(marginal, nonlinearity, interval.lo, interval.hi)


def _linearize(
    marginal: MarginalPotential, nonlinearity: Nonlinearity, a: float, b: float
) -> LinearFn:
    mu = marginal.argmin
    g, dg = nonlinearity.value, nonlinearity.deriv

    if nonlinearity.curvature == "linear":
        x0 = a if math.isfinite(a) else (b if math.isfinite(b) else 0.0)
        s = dg(x0)
        return LinearFn(s, g(x0) - s * x0)

    # Slack absorbs endpoint roundoff; a replacement may overshoot mu by
    # this much, which moves the bound by O(tol) at worst.
    tol = SEP_TOL * (1.0 + abs(mu))
    ga, gb = g(a), g(b)
    if nonlinearity.curvature == "convex":
        if ga >= mu - tol and gb >= mu - tol:
            # mu <= tangent <= g, so the marginal can only decrease.
            t = _try_tangents(g, dg, a, b, mu, tol, above=True)
            if t is not None:
                return t
            t = _limit_const(dg, a, b, ga, gb, mu, above=True)
            if t is not None:
                return t
        if ga <= mu + tol and gb <= mu + tol:
            # g <= chord <= mu on the decreasing side of the marginal.
            t = _bounding_secant(g, dg, a, b, ga, gb)
            if t is not None and t.at(a) <= mu + tol and t.at(b) <= mu + tol:
                return t
    else:
        if ga >= mu - tol and gb >= mu - tol:
            t = _bounding_secant(g, dg, a, b, ga, gb)
            if t is not None and t.at(a) >= mu - tol and t.at(b) >= mu - tol:
                return t
        if ga <= mu + tol and gb <= mu + tol:
            t = _try_tangents(g, dg, a, b, mu, tol, above=False)
            if t is not None:
                return t
            t = _limit_const(dg, a, b, ga, gb, mu, above=False)
            if t is not None:
                return t
    # g crosses mu (or no line is certified): the marginal minimum is
    # the only safe replacement value.
    return LinearFn(0.0, mu)


# ---------------------------------------------------------------------------
# Tangent-crossing lower bounds on the modified potential
# ---------------------------------------------------------------------------


def tangent_at(value, deriv, x0: float):
    """Tangent line to a convex function at x0, or None if degenerate."""
    v0, d0 = value(x0), deriv(x0)
    if not (math.isfinite(v0) and math.isfinite(d0)):
        return None
    return LinearFn(d0, v0 - d0 * x0)


def lower_bound(value, deriv, interval: Interval, anchor: float) -> float:
    """Single-anchor tangent bound: min of the anchor tangent at the ends.

    The tangent of a convex function minorizes it everywhere, so the
    smaller of its endpoint values (IEEE limits at infinite endpoints)
    bounds the interval minimum.  Returns -inf when the tangent
    descends toward an infinite endpoint, the sentinel for "no finite
    envelope here".  convex_floor sharpens this by crossing two
    tangents; this single-tangent form is kept for its predictability.
    """
    if not interval.contains(anchor):
        raise ValueError(
            f"anchor {anchor} outside [{interval.lo}, {interval.hi}]"
        )
    t = tangent_at(value, deriv, anchor)
    if t is None:
        return -math.inf
    return min(t.at(interval.lo), t.at(interval.hi))


def _geom_mid(lo: float, hi: float) -> float:
    """Interior point; geometric when signs allow, to cope with decades."""
    if lo > 0.0:
        return math.sqrt(lo * hi)
    if hi < 0.0:
        return -math.sqrt(lo * hi)
    return 0.5 * (lo + hi)


def _find_bracket(deriv, a: float, b: float):
    """Bracket the minimiser of a convex function on [a, b].

    Returns ``(lo, hi)`` with ``deriv(lo) < 0 <= deriv(hi)`` when the
    minimum is interior, a degenerate ``(x, x)`` when it sits at a
    finite endpoint, or None when the function keeps descending toward
    an infinite endpoint.
    """
    if math.isfinite(a) and math.isfinite(b):
        if deriv(a) >= 0.0:
            return a, a
        if deriv(b) <= 0.0:
            return b, b
        return a, b
    if math.isfinite(a):
        if deriv(a) >= 0.0:
            return a, a
        lo, step = a, max(1.0, abs(a))
        for _ in range(_ESCALATE_STEPS):
            x = lo + step
            if deriv(x) >= 0.0:
                return lo, x
            lo, step = x, step * 2.0
        return None
    if math.isfinite(b):
        if deriv(b) <= 0.0:
            return b, b
        hi, step = b, max(1.0, abs(b))
        for _ in range(_ESCALATE_STEPS):
            x = hi - step
            if deriv(x) <= 0.0:
                return x, hi
            hi, step = x, step * 2.0
        return None
    d0 = deriv(0.0)
    if d0 == 0.0:
        return 0.0, 0.0
    if d0 < 0.0:
        return _find_bracket(deriv, 0.0, math.inf)
    return _find_bracket(deriv, -math.inf, 0.0)


def convex_floor(value, deriv, lo: float, hi: float):
    """Sound lower bound for a convex function over [lo, hi].

    Tangents at a descending left anchor and an ascending right anchor
    both minorize the function, so the value where they cross bounds the
    interval minimum from below.  Re-anchoring at the crossing a few
    times pins the bound within ``_FLOOR_TOL`` nats of the true minimum.
    Returns ``(gamma, lines)`` where the pointwise max of ``lines``
    minorizes the function and attains gamma; ``gamma = -inf`` (with no
    lines) when the function descends toward an infinite endpoint.
    """
    bracket = _find_bracket(deriv, lo, hi)
    if bracket is None:
        return -math.inf, ()
    xl, xr = bracket
    if xl == xr:
        v = value(xl)
        if not math.isfinite(v):
            return -math.inf, ()
        # Minimum at an endpoint: the constant v minorizes the function.
        return v, (LinearFn(0.0, v),)

    vl, dl = value(xl), deriv(xl)
    vr, dr = value(xr), deriv(xr)
    # Domain walls put +inf at a bracket end; walk inside until the
    # anchor value is finite, keeping the derivative-sign invariant.
    for _ in range(_WALL_STEPS):
        if math.isfinite(vl):
            break
        x = _geom_mid(xl, xr)
        if x <= xl or x >= xr:
            return -math.inf, ()
        v, d = value(x), deriv(x)
        if d < 0.0:
            xl, vl, dl = x, v, d
        else:
            xr, vr, dr = x, v, d
    for _ in range(_WALL_STEPS):
        if math.isfinite(vr):
            break
        x = _geom_mid(xl, xr)
        if x <= xl or x >= xr:
            return -math.inf, ()
        v, d = value(x), deriv(x)
        if d < 0.0:
            xl, vl, dl = x, v, d
        else:
            xr, vr, dr = x, v, d
    if not (math.isfinite(vl) and math.isfinite(vr)):
        return -math.inf, ()
    if dl >= 0.0:
        return vl, (LinearFn(0.0, vl),)
    if dr <= 0.0:
        return vr, (LinearFn(0.0, vr),)

    gamma = min(vl, vr)
    for _ in range(_FLOOR_EVALS):
        if not (math.isfinite(dl) and math.isfinite(dr)):
            break
        xm = (vl - vr + dr * xr - dl * xl) / (dr - dl)
        gamma = vl + dl * (xm - xl)
        if not (xl <= xm <= xr):
            break
        if min(vl, vr) - gamma <= _FLOOR_TOL:
            break
        v, d = value(xm), deriv(xm)
        if not (math.isfinite(v) and math.isfinite(d)):
            break
        if d < 0.0:
            xl, vl, dl = xm, v, d
        else:
            xr, vr, dr = xm, v, d
    if math.isfinite(dl) and math.isfinite(dr):
        left = LinearFn(dl, vl - dl * xl)
        right = LinearFn(dr, vr - dr * xr)
        xm = (vl - vr + dr * xr - dl * xl) / (dr - dl)
        if xl <= xm <= xr:
            return vl + dl * (xm - xl), (left, right)
    # A vertical anchor carries no crossing information; fall back to
    # the opposite tangent evaluated across the bracket.
    if math.isfinite(dr):
        right = LinearFn(dr, vr - dr * xr)
        return right.at(xl), (right,)
    if math.isfinite(dl):
        left = LinearFn(dl, vl - dl * xl)
        return left.at(xr), (left,)
    return -math.inf, ()


@dataclass(frozen=True)
class LinearizedPotential:
    """Convex minorant of a (possibly auxiliary) potential on an interval."""

    interval: Interval
    replacements: tuple[LinearFn, ...]
    lines: tuple[LinearFn, ...]
    gamma: float
    value: Callable[[float], float] = field(repr=False, compare=False)
    deriv: Callable[[float], float] = field(repr=False, compare=False)


def build_linearized(
    model: PotentialModel, interval: Interval, aux: int = 0, rho: float = 1.0
) -> LinearizedPotential:
    """Build the convex modified potential and its tangent lower bound.

    ``aux=0`` bounds the plain potential V; ``aux=1`` bounds
    V/(rho+1); ``aux=2``/``aux=3`` additionally subtract log(|x|) for
    the sign-pure transformed-region axes.
    """
    if aux not in (0, 1, 2, 3):
        raise ValueError(f"aux must be 0..3, got {aux}")
    if rho < 1.0:
        raise ValueError(f"rho must be >= 1, got {rho}")
    if aux == 2 and interval.lo < 0.0:
        raise ValueError("aux=2 needs an interval within x >= 0")
    if aux == 3 and interval.hi > 0.0:
        raise ValueError("aux=3 needs an interval within x <= 0")

    reps = tuple(
        linearize_term(t.marginal, t.nonlinearity, interval) for t in model.terms
    )
    pairs = tuple(
        (t.marginal.value, t.marginal.deriv, r.slope, r.intercept)
        for t, r in zip(model.terms, reps)
    )
    scale = 1.0 if aux == 0 else (1.0 / (rho + 1.0) if aux == 1 else rho / (rho + 1.0))
    logterm = aux in (2, 3)
    # Slope of -log|x| at 0 is the one-sided limit into the interval.
    zero_slope = math.inf if aux == 3 else -math.inf

    def value(x: float) -> float:
        tot = 0.0
        for mv, _, s, c in pairs:
            tot += mv(s * x + c)
        tot *= scale
        if logterm:
            ax = abs(x)
            tot += math.inf if ax == 0.0 else -math.log(ax)
        return tot

    def deriv(x: float) -> float:
        tot = 0.0
        for _, md, s, c in pairs:
            if s != 0.0:
                tot += md(s * x + c) * s
        tot *= scale
        if logterm:
            tot += zero_slope if x == 0.0 else -1.0 / x
        return tot

    gamma, lines = convex_floor(value, deriv, interval.lo, interval.hi)
    return LinearizedPotential(interval, reps, lines, gamma, value, deriv)


class RegionBounds(NamedTuple):
    """Envelope constants of the transformed region over one interval."""

    L1: float
    L23: float
    gamma1: float
    gamma23: float
    aux: int


def region_gammas(model: PotentialModel, lo: float, hi: float, rho: float = 1.0):
    """Envelope exponents (gamma1, gamma23) over a sign-pure interval.

    Produces the gammas of :func:`build_linearized` with aux=1 and
    aux=2 (or 3), sharing the per-term replacements between the two
    auxiliary potentials; this is the refinement hot path.
    """
    if not (lo >= 0.0 or hi <= 0.0):
        raise ValueError(
            f"interval [{lo}, {hi}] straddles 0; split the support at 0 first"
        )
    pairs = tuple(
        (t.marginal.value, t.marginal.deriv, r.slope, r.intercept)
        for t, r in (
            (t, _linearize(t.marginal, t.nonlinearity, lo, hi)) for t in model.terms
        )
    )
    inv1 = 1.0 / (rho + 1.0)
    inv2 = rho / (rho + 1.0)

    def value1(x: float) -> float:
        tot = 0.0
        for mv, _, s, c in pairs:
            tot += mv(s * x + c)
        tot *= inv1
        return tot

    def deriv1(x: float) -> float:
        tot = 0.0
        for _, md, s, c in pairs:
            if s != 0.0:
                tot += md(s * x + c) * s
        tot *= inv1
        return tot

    # Slope of -log|x| at 0 is the one-sided limit into the interval.
    zero_slope = math.inf if hi <= 0.0 else -math.inf

    def value2(x: float) -> float:
        tot = 0.0
        for mv, _, s, c in pairs:
            tot += mv(s * x + c)
        tot *= inv2
        ax = abs(x)
        tot += math.inf if ax == 0.0 else -math.log(ax)
        return tot

    def deriv2(x: float) -> float:
        tot = 0.0
        for _, md, s, c in pairs:
            if s != 0.0:
                tot += md(s * x + c) * s
        tot *= inv2
        tot += zero_slope if x == 0.0 else -1.0 / x
        return tot

    g1, _ = convex_floor(value1, deriv1, lo, hi)
    g23, _ = convex_floor(value2, deriv2, lo, hi)
    return g1, g23


def rou_bounds(model: PotentialModel, interval: Interval, rho: float = 1.0) -> RegionBounds:
    """Per-interval envelope constants for the transformed region.

    ``L1`` caps the u axis, ``L23`` the |v| axis on the interval's side
    of 0.  Raises :class:`UnboundedRegionError` when either bound is
    infinite (target tails too heavy for this rho).
    """
    aux = 2 if interval.lo >= 0.0 else 3
    g1, g23 = region_gammas(model, interval.lo, interval.hi, rho)
    L1 = safe_exp(-g1)
    L23 = safe_exp(-g23)
    if not (math.isfinite(L1) and math.isfinite(L23)):
        raise UnboundedRegionError(
            f"unbounded transformed region on [{interval.lo}, {interval.hi}] "
            f"with rho={rho}; the target's tails are too heavy (try a larger rho)"
        )
    return RegionBounds(L1, L23, g1, g23, aux)

"""Adaptive sampling by covering the ratio-of-uniforms region with triangles.

A draw x from p(x) proportional to exp(-V(x)) is equivalent to a
uniform draw (v, u) from the region 0 <= u <= p(v/u^rho)^(1/(rho+1)),
mapped through x = v/u^rho.  The region sits inside a fan of cones
rooted at the origin, one per support interval; inside each cone the
envelope constants from :func:`potsample.bounds.rou_bounds` give a
circular sector, and the triangle tangent to that sector covers it with
straight edges that are easy to sample.  Every rejected candidate adds
a support point and splits its cone, so the cover tightens toward the
region.
"""

from __future__ import annotations

import bisect
import math
from itertools import accumulate
from typing import NamedTuple

import numpy as np

from .bounds import (
    SEP_TOL,
    Interval,
    SupportSet,
    build_linearized,
    region_gammas,
    rou_bounds,
)
from .errors import InvariantViolationError, UnboundedRegionError
from .model import PotentialModel
from .scalars import safe_exp

# Bounded sign-pure intervals spanning more than this ratio are split
# geometrically when a cover is first built: linear term replacements
# lose too much on intervals covering many decades, which would inflate
# the cone far beyond the region it encloses.  The ratio is the coarsest
# power of two that keeps far-tail cones from dominating the cover.
SPLIT_RATIO = 256.0
_MAX_INITIAL_SPLITS = 24

# Probe resolution for the rho != 1 coverage verification: x positions
# on a log grid, each probed at several heights of the region's slice.
_COVER_PROBE_XS = 256
_COVER_PROBE_FRACS = (1.0, 0.75, 0.5, 0.25, 0.1)


class Triangle(NamedTuple):
    """Triangle with one vertex at the origin."""

    v2v: float
    v2u: float
    v3v: float
    v3u: float
    area: float


class Rectangle(NamedTuple):
    """Axis-aligned box [v_lo, v_hi] x [0, u_max] around the region."""

    v_lo: float
    v_hi: float
    u_max: float


def build_triangle(L1: float, L23: float, angle_lo: float, angle_hi: float) -> Triangle:
    """Triangle covering the circular sector of radius hypot(L1, L23).

    The two free vertices lie on the sector's bounding rays, placed
    where those rays meet the tangent to the arc at the bisector.
    """
    aperture = angle_hi - angle_lo
    if not aperture >= 1e-12:
        raise ValueError(f"degenerate cone: aperture must be >= 1e-12, got {aperture}")
    if not aperture < math.pi - 1e-9:
        raise ValueError(f"cone aperture must stay below pi, got {aperture}")
    radius = math.hypot(L1, L23)
    mid = 0.5 * (angle_lo + angle_hi)
    t_lo = radius / math.cos(angle_lo - mid)
    t_hi = radius / math.cos(angle_hi - mid)
    v2v, v2u = t_lo * math.sin(angle_lo), t_lo * math.cos(angle_lo)
    v3v, v3u = t_hi * math.sin(angle_hi), t_hi * math.cos(angle_hi)
    area = 0.5 * abs(v2v * v3u - v3v * v2u)
    return Triangle(v2v, v2u, v3v, v3u, area)


def sample_uniform_triangle(tri: Triangle, rng) -> tuple[float, float]:
    """Uniform point in a triangle with a vertex at the origin."""
    u1 = rng.random()
    u2 = rng.random()
    if u2 < u1:
        u1, u2 = u2, u1
    w2 = 1.0 - u2
    w3 = u2 - u1
    return tri.v2v * w2 + tri.v3v * w3, tri.v2u * w2 + tri.v3u * w3


def point_in_triangle(tri: Triangle, v: float, u: float, slack: float = 1e-9) -> bool:
    """Barycentric containment test with relative slack on the edges.

    A degenerate (zero-area) triangle contains only the origin, its
    fixed vertex: far-tail cones underflow to exactly that shape, and
    their boundary images underflow to the origin with them.
    """
    det = tri.v2v * tri.v3u - tri.v3v * tri.v2u
    if det == 0.0:
        return v == 0.0 and u == 0.0
    a = (v * tri.v3u - u * tri.v3v) / det
    b = (u * tri.v2v - v * tri.v2u) / det
    return a >= -slack and b >= -slack and a + b <= 1.0 + slack


def _points_in_triangle(tri: Triangle, v: np.ndarray, u: np.ndarray, slack: float = 1e-9) -> np.ndarray:
    """Vectorized barycentric containment test."""
    det = tri.v2v * tri.v3u - tri.v3v * tri.v2u
    if det == 0.0:
        return (np.asarray(v) == 0.0) & (np.asarray(u) == 0.0)
    a = (v * tri.v3u - u * tri.v3v) / det
    b = (u * tri.v2v - v * tri.v2u) / det
    return (a >= -slack) & (b >= -slack) & (a + b <= 1.0 + slack)


def _log_grid(lo: float, hi: float, n: int) -> np.ndarray:
    """Log-spaced probe grid on [lo, hi], split at zero when straddling."""
    if lo > 0.0:
        return np.geomspace(lo, hi, n)
    if hi < 0.0:
        return -np.geomspace(-hi, -lo, n)[::-1]
    if lo == 0.0:
        return np.concatenate(([0.0], np.geomspace(hi * 1e-12, hi, n - 1)))
    if hi == 0.0:
        return -_log_grid(0.0, -lo, n)[::-1]
    n_neg = max(n // 2, 2)
    n_pos = max(n - n_neg - 1, 2)
    neg = -np.geomspace(-lo, -lo * 1e-12, n_neg)
    pos = np.geomspace(hi * 1e-12, hi, n_pos)
    return np.concatenate((neg, [0.0], pos))


def rou_accept(model: PotentialModel, rho: float, v: float, u: float) -> bool:
    """Exact membership test of (v, u) in the transformed region."""
    if u <= 0.0:
        return False
    x = v / u**rho
    if not model.support.contains(x):
        return False
    pot = model.potential(x)
    if pot == math.inf:
        return False
    return (rho + 1.0) * math.log(u) <= -pot


def standard_rou_accept(model: PotentialModel, v: float, u: float) -> bool:
    """Membership test of the untransformed (rho = 1) region."""
    if u <= 0.0:
        return False
    x = v / u
    if not model.support.contains(x):
        return False
    pot = model.potential(x)
    if pot == math.inf:
        return False
    return 2.0 * math.log(u) <= -pot


def boundary_point(model: PotentialModel, rho: float, x: float) -> tuple[float, float]:
    """Point of the region's upper boundary lying over x."""
    pot = model.potential(x)
    u = safe_exp(-pot / (rho + 1.0))
    v = x * safe_exp(-rho * pot / (rho + 1.0))
    return v, u


class _Cone:
    """One support interval with its envelope constants and triangle."""

    __slots__ = ("lo", "hi", "L1", "L23", "g1", "g23", "tri")

    def __init__(self, lo, hi, L1, L23, g1, g23, tri):
        self.lo = lo
        self.hi = hi
        self.L1 = L1
        self.L23 = L23
        self.g1 = g1
        self.g23 = g23
        self.tri = tri


def cones_from_arrays(lo, hi, L1, L23, g1, g23, v2v, v2u, v3v, v3u, area) -> list[_Cone]:
    """Cones from parallel arrays of interval bounds, envelope constants
    and triangle vertices; the scalar twin is :meth:`RouSampler._make_cone`."""
    cols = [np.asarray(c).tolist() for c in (lo, hi, L1, L23, g1, g23)]
    tris = [np.asarray(c).tolist() for c in (v2v, v2u, v3v, v3u, area)]
    return [
        _Cone(*vals, Triangle(*tvals)) for vals, tvals in zip(zip(*cols), zip(*tris))
    ]


def _geom_cuts(lo: float, hi: float) -> list[float]:
    """Geometric subdivision points for a wide bounded interval."""
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return []
    if lo > 0.0:
        mag_lo, mag_hi, sign = lo, hi, 1.0
    elif hi < 0.0:
        mag_lo, mag_hi, sign = -hi, -lo, -1.0
    else:
        return []
    ratio = mag_hi / mag_lo
    if ratio <= SPLIT_RATIO:
        return []
    n = min(
        int(math.ceil(math.log(ratio) / math.log(SPLIT_RATIO))),
        _MAX_INITIAL_SPLITS + 1,
    )
    step = ratio ** (1.0 / n)
    cuts = [sign * (mag_lo * step**k) for k in range(1, n)]
    return sorted(cuts)


class RouStats(NamedTuple):
    trials_per_sample: np.ndarray
    acceptance_rate: float
    outside_rejects: int
    dedupe_skips: int
    support_size: int


class RouSampler:
    """Adaptive exact sampler on the transformed region.

    Parameters
    ----------
    model:
        Target potential; its tails must decay at least as fast as
        1/x^((rho+1)/rho) or the initial cover raises
        :class:`UnboundedRegionError`.
    rho:
        Transform power, >= 1.  The draw map is x = v/u^rho.
    supports:
        Initial support points.  Mutated in place as candidates are
        rejected.  Must contain 0 when the support straddles 0.

    Notes
    -----
    At rho = 1 a point of the region over x has angle atan(x), so the
    cone fan built from the support points covers the region exactly
    and stays covering under refinement.  For rho > 1 the angle of a
    region point depends on its height as well as on x, so points can
    drift across cone edges and the same fan is not covering for every
    target.  Construction therefore verifies the cover against a probe
    grid of region points when rho != 1 and raises
    :class:`InvariantViolationError` if any probe escapes; refinement
    keeps the verified state by refusing splits that would uncover a
    cached probe (counted in ``split_refusals``).  Exactness at
    rho != 1 is thus assured to probe resolution, not proven.
    """

    def __init__(
        self,
        model: PotentialModel,
        rho: float = 1.0,
        supports: SupportSet | None = None,
    ) -> None:
        if rho < 1.0:
            raise ValueError(f"rho must be >= 1, got {rho}")
        self.model = model
        self.rho = float(rho)
        self.supports = SupportSet() if supports is None else supports
        self.trials = 0
        self.accepts = 0
        self.outside_rejects = 0
        self.dedupe_skips = 0
        domain = model.support
        if domain.lo < 0.0 < domain.hi and not any(
            abs(p) <= SEP_TOL for p in self.supports
        ):
            raise ValueError(
                "support set must contain 0 when the domain straddles 0"
            )
        for iv in self.supports.intervals(domain):
            for c in _geom_cuts(iv.lo, iv.hi):
                self.supports.insert(c)
        self.cones: list[_Cone] = [
            self._make_cone(iv.lo, iv.hi) for iv in self.supports.intervals(domain)
        ]
        self._rebuild_weights()
        self.split_refusals = 0
        self._probe_tan: np.ndarray | None = None
        self._probe_v: np.ndarray | None = None
        self._probe_u: np.ndarray | None = None
        if self.rho != 1.0:
            self._build_probe_cache()
            bad = self._uncovered_probes(self.cones)
            if bad:
                raise InvariantViolationError(
                    f"cone fan misses {bad} probe points of the region at "
                    f"rho={self.rho}; the angular cover only suits targets "
                    "whose region stays inside the support fan (use rho=1 "
                    "or add support points near the mode)"
                )

    @classmethod
    def from_cover(
        cls,
        model: PotentialModel,
        rho: float,
        supports: SupportSet,
        cones: list[_Cone],
    ) -> RouSampler:
        """Assemble a sampler from an externally built cover.

        The caller owns cover correctness: each cone must carry sound
        envelope exponents for its interval and a triangle containing
        the region sector.  The particle filter uses this after building
        covers for all ancestors in one vectorized pass.
        """
        sp = cls.__new__(cls)
        sp.model = model
        sp.rho = float(rho)
        sp.supports = supports
        sp.trials = 0
        sp.accepts = 0
        sp.outside_rejects = 0
        sp.dedupe_skips = 0
        sp.cones = list(cones)
        if not sp.cones:
            raise ValueError("cover must contain at least one cone")
        sp._rebuild_weights()
        sp.split_refusals = 0
        sp._probe_tan = sp._probe_v = sp._probe_u = None
        return sp

    # -- cover construction -------------------------------------------------

    def _make_cone(self, lo: float, hi: float, parent: _Cone | None = None) -> _Cone:
        g1, g23 = region_gammas(self.model, lo, hi, self.rho)
        if parent is not None:
            # A sub-interval bound can only be tighter than its parent's.
            g1 = max(g1, parent.g1)
            g23 = max(g23, parent.g23)
        L1, L23 = safe_exp(-g1), safe_exp(-g23)
        if not (math.isfinite(L1) and math.isfinite(L23)):
            raise UnboundedRegionError(
                f"unbounded transformed region on [{lo}, {hi}] with "
                f"rho={self.rho}; the target's tails are too heavy "
                "(try a larger rho)"
            )
        tri = build_triangle(L1, L23, math.atan(lo), math.atan(hi))
        return _Cone(lo, hi, L1, L23, g1, g23, tri)

    def _rebuild_weights(self) -> None:
        self._los = [c.lo for c in self.cones]
        self._cum = list(accumulate(c.tri.area for c in self.cones))
        self.total_area = self._cum[-1]
        if not math.isfinite(self.total_area):
            raise UnboundedRegionError(
                f"triangle cover has non-finite area with rho={self.rho}; "
                "the target's tails are too heavy (try a larger rho)"
            )
        if self.total_area <= 0.0:
            raise ValueError("triangle cover has zero area")

    def _probe_window(self) -> tuple[float, float]:
        """Finite x window standing in for the domain in probe grids."""
        lo, hi = self.model.support.lo, self.model.support.hi
        pts = self.supports.points
        if not math.isfinite(lo):
            lo = (min(pts[0], 0.0) - 10.0) if pts else -10.0
        if not math.isfinite(hi):
            hi = (max(pts[-1], 0.0) + 10.0) if pts else 10.0
        return lo, hi

    def _build_probe_cache(self) -> None:
        lo, hi = self._probe_window()
        vs: list[float] = []
        us: list[float] = []
        for x in _log_grid(lo, hi, _COVER_PROBE_XS):
            vb, ub = boundary_point(self.model, self.rho, float(x))
            if not ub > 0.0:
                continue
            for f in _COVER_PROBE_FRACS:
                u = f * ub
                vs.append(float(x) * u**self.rho)
                us.append(u)
        v = np.asarray(vs)
        u = np.asarray(us)
        with np.errstate(divide="ignore", invalid="ignore"):
            tan = v / u
        order = np.argsort(tan)
        self._probe_tan = tan[order]
        self._probe_v = v[order]
        self._probe_u = u[order]

    def _uncovered_probes(self, cones) -> int:
        """Cached region probes escaping the given cones' triangles.

        A probe whose angle falls in a cone's angular range can only be
        covered by that cone's triangle, so each probe is tested against
        exactly the one triangle owning its angle.
        """
        tan = self._probe_tan
        if tan is None or tan.size == 0:
            return 0
        bad = 0
        for c in cones:
            i0 = int(np.searchsorted(tan, c.lo, side="left"))
            i1 = (
                tan.size
                if not math.isfinite(c.hi)
                else int(np.searchsorted(tan, c.hi, side="right"))
            )
            if i1 <= i0:
                continue
            ok = _points_in_triangle(c.tri, self._probe_v[i0:i1], self._probe_u[i0:i1])
            bad += int(ok.size - np.count_nonzero(ok))
        return bad

    def _insert(self, x: float) -> None:
        k = bisect.bisect_right(self._los, x) - 1
        c = self.cones[k]
        tol = SEP_TOL * (1.0 + abs(x))
        if x - c.lo <= tol or (math.isfinite(c.hi) and c.hi - x <= tol):
            self.dedupe_skips += 1
            return
        children = [
            self._make_cone(c.lo, x, parent=c),
            self._make_cone(x, c.hi, parent=c),
        ]
        if self._probe_tan is not None and self._uncovered_probes(children):
            self.split_refusals += 1
            return
        if not self.supports.insert(x):
            self.dedupe_skips += 1
            return
        self.cones[k : k + 1] = children
        self._rebuild_weights()

    # -- sampling ------------------------------------------------------------

    def draw(self, rng) -> float:
        """One exact draw; rejected candidates refine the cover."""
        model = self.model
        rho = self.rho
        pot = model.potential
        lo_d, hi_d = model.support.lo, model.support.hi
        log = math.log
        while True:
            self.trials += 1
            r = rng.random() * self.total_area
            k = bisect.bisect_right(self._cum, r)
            if k >= len(self.cones):
                k = len(self.cones) - 1
            tri = self.cones[k].tri
            u1 = rng.random()
            u2 = rng.random()
            if u2 < u1:
                u1, u2 = u2, u1
            w2 = 1.0 - u2
            w3 = u2 - u1
            v = tri.v2v * w2 + tri.v3v * w3
            u = tri.v2u * w2 + tri.v3u * w3
            if u <= 0.0:
                self.outside_rejects += 1
                continue
            x = v / u**rho
            if x < lo_d or x > hi_d:
                self.outside_rejects += 1
                continue
            val = pot(x)
            if val != math.inf and (rho + 1.0) * log(u) <= -val:
                self.accepts += 1
                return x
            self._insert(x)

    def sample(self, n: int, rng) -> tuple[np.ndarray, RouStats]:
        """Draw n exact samples and report per-sample trial counts."""
        out = np.empty(n)
        trials = np.empty(n, dtype=np.int64)
        for i in range(n):
            before = self.trials
            out[i] = self.draw(rng)
            trials[i] = self.trials - before
        rate = self.accepts / self.trials if self.trials else 0.0
        return out, RouStats(
            trials, rate, self.outside_rejects, self.dedupe_skips, len(self.supports)
        )

    # -- diagnostics ----------------------------------------------------------

    def cone_index(self, x: float) -> int:
        return bisect.bisect_right(self._los, x) - 1

    def check_coverage(self, xs, slack: float = 1e-9) -> int:
        """Count probe points whose boundary image escapes its triangle."""
        bad = 0
        for x in xs:
            v, u = boundary_point(self.model, self.rho, float(x))
            if not point_in_triangle(self.cones[self.cone_index(float(x))].tri, v, u, slack):
                bad += 1
        return bad

    def export_region(self, n_probes: int = 512) -> dict:
        """Triangle vertex table plus a probe of the region boundary."""
        tris = [
            {
                "lo": c.lo,
                "hi": c.hi,
                "v1v": 0.0,
                "v1u": 0.0,
                "v2v": c.tri.v2v,
                "v2u": c.tri.v2u,
                "v3v": c.tri.v3v,
                "v3u": c.tri.v3u,
                "area": c.tri.area,
            }
            for c in self.cones
        ]
        lo, hi = self._probe_window()
        boundary = []
        for x in _log_grid(lo, hi, n_probes):
            v, u = boundary_point(self.model, self.rho, float(x))
            boundary.append({"x": float(x), "v": v, "u": u})
        return {"rho": self.rho, "triangles": tris, "boundary": boundary}


# ---------------------------------------------------------------------------
# Plain-rectangle baseline
# ---------------------------------------------------------------------------


def bounding_rectangle(model: PotentialModel, rho: float = 1.0) -> Rectangle:
    """Global box around the transformed region (no partitioning)."""
    domain = model.support
    g1 = build_linearized(model, domain, aux=1, rho=rho).gamma
    u_max = safe_exp(-g1)
    v_hi = 0.0
    v_lo = 0.0
    if domain.hi > 0.0:
        pos = Interval(max(domain.lo, 0.0), domain.hi)
        v_hi = safe_exp(-build_linearized(model, pos, aux=2, rho=rho).gamma)
    if domain.lo < 0.0:
        neg = Interval(domain.lo, min(domain.hi, 0.0))
        v_lo = -safe_exp(-build_linearized(model, neg, aux=3, rho=rho).gamma)
    if not all(map(math.isfinite, (u_max, v_lo, v_hi))):
        raise UnboundedRegionError(
            f"bounding rectangle is infinite with rho={rho}; "
            "the target's tails are too heavy (try a larger rho)"
        )
    return Rectangle(v_lo, v_hi, u_max)


def rectangle_sample(
    model: PotentialModel, rho: float, n: int, rng
) -> tuple[np.ndarray, int]:
    """Exact draws by plain rejection from the bounding rectangle."""
    rect = bounding_rectangle(model, rho)
    lo_d, hi_d = model.support.lo, model.support.hi
    pot = model.potential
    span = rect.v_hi - rect.v_lo
    out = np.empty(n)
    trials = 0
    got = 0
    while got < n:
        trials += 1
        v = rect.v_lo + rng.random() * span
        u = rng.random() * rect.u_max
        if u <= 0.0:
            continue
        x = v / u**rho
        if x < lo_d or x > hi_d:
            continue
        val = pot(x)
        if val != math.inf and (rho + 1.0) * math.log(u) <= -val:
            out[got] = x
            got += 1
    return out, trials

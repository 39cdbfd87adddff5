"""Target densities specified through generalized potentials.

A density p(x) proportional to exp(-V(x)) on an interval is described
by its potential

    V(x) = sum_i Vbar_i(g_i(x)),

where each marginal potential ``Vbar_i`` is convex with a known
minimiser and each nonlinearity ``g_i`` is convex, concave or linear on
the support.  That structure is all the bound machinery in
:mod:`potsample.bounds` needs, so models are built from small registries
of marginals and nonlinearities rather than from free-form callables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

from .scalars import line_at, safe_cosh, safe_exp, safe_sinh

# Potentials above this are treated as infinite: exp(-700) is already
# far below the smallest positive double, and the cap keeps downstream
# exponentials out of the overflow range.
POTENTIAL_CAP = 700.0

CURVATURES = ("convex", "concave", "linear")


@dataclass(frozen=True)
class Interval:
    """Closed interval, possibly unbounded on either side."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        lo, hi = float(self.lo), float(self.hi)
        if math.isnan(lo) or math.isnan(hi):
            raise ValueError("interval endpoints must not be NaN")
        if not lo < hi:
            raise ValueError(f"interval needs lo < hi, got [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi


@dataclass(frozen=True)
class MarginalPotential:
    """Convex scalar potential with a known, attained minimum."""

    name: str
    value: Callable[[float], float]
    deriv: Callable[[float], float]
    argmin: float
    min_value: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.argmin):
            raise ValueError(f"marginal {self.name!r}: argmin must be finite")
        if not math.isfinite(self.min_value):
            raise ValueError(f"marginal {self.name!r}: min_value must be finite")


@dataclass(frozen=True)
class Nonlinearity:
    """Scalar map with declared curvature on its interval of use."""

    name: str
    value: Callable[[float], float]
    deriv: Callable[[float], float]
    curvature: str

    def __post_init__(self) -> None:
        if self.curvature not in CURVATURES:
            raise ValueError(
                f"nonlinearity {self.name!r}: curvature must be one of "
                f"{CURVATURES}, got {self.curvature!r}"
            )


class Term(NamedTuple):
    """One additive piece of a potential: Vbar(g(x))."""

    marginal: MarginalPotential
    nonlinearity: Nonlinearity


@dataclass(frozen=True)
class PotentialModel:
    """Potential V(x) = sum of marginal-composed-with-nonlinearity terms.

    An empty term tuple is allowed and gives the zero potential; it
    shows up when every term of a model has been dropped.
    """

    terms: tuple[Term, ...]
    support: Interval
    name: str = ""
    _fns: tuple[tuple[Callable, Callable], ...] = field(
        init=False, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        terms = tuple(self.terms)
        object.__setattr__(self, "terms", terms)
        # Flat (marginal.value, nonlinearity.value) pairs; attribute
        # lookups are too slow for the samplers' accept loops.
        object.__setattr__(
            self,
            "_fns",
            tuple((t.marginal.value, t.nonlinearity.value) for t in terms),
        )

    @property
    def n_terms(self) -> int:
        return len(self.terms)

    def potential(self, x: float) -> float:
        """Evaluate V(x); values above the cap saturate to inf."""
        if not self.support.contains(x):
            raise ValueError(
                f"x={x} outside support [{self.support.lo}, {self.support.hi}]"
            )
        total = 0.0
        for mv, nv in self._fns:
            total += mv(nv(x))
        return total if total <= POTENTIAL_CAP else math.inf

    def density_unnorm(self, x: float) -> float:
        """exp(-V(x)), unnormalised."""
        return safe_exp(-self.potential(x))

    def reduced(self, j: int) -> PotentialModel:
        """Model with 1-based term j removed (the reduced potential)."""
        if not 1 <= j <= len(self.terms):
            raise ValueError(
                f"term index j={j} out of range 1..{len(self.terms)}"
            )
        kept = self.terms[: j - 1] + self.terms[j:]
        label = f"{self.name}-minus-{j}" if self.name else f"minus-{j}"
        return PotentialModel(kept, self.support, label)

    def aux_potential(self, which: int, rho: float, x: float) -> float:
        """Potential of the transformed-region coordinates.

        ``which=1`` is V/(rho+1) (the u axis); ``which=2`` adds the
        -log(x) correction for the positive v axis, ``which=3`` the
        -log(-x) one for the negative v axis.
        """
        if rho < 1.0:
            raise ValueError(f"rho must be >= 1, got {rho}")
        v = self.potential(x)
        if which == 1:
            return v / (rho + 1.0)
        if which == 2:
            if x <= 0.0:
                raise ValueError("auxiliary potential 2 requires x > 0")
            return rho / (rho + 1.0) * v - math.log(x)
        if which == 3:
            if x >= 0.0:
                raise ValueError("auxiliary potential 3 requires x < 0")
            return rho / (rho + 1.0) * v - math.log(-x)
        raise ValueError(f"which must be 1, 2 or 3, got {which}")


# ---------------------------------------------------------------------------
# Marginal potential registry
# ---------------------------------------------------------------------------


def _marg_quadratic(weight: float = 1.0, center: float = 0.0) -> MarginalPotential:
    w, c = float(weight), float(center)
    if w <= 0.0:
        raise ValueError(f"quadratic marginal needs weight > 0, got {w}")

    def value(t: float) -> float:
        d = t - c
        return w * d * d

    def deriv(t: float) -> float:
        return 2.0 * w * (t - c)

    return MarginalPotential("quadratic", value, deriv, argmin=c, min_value=0.0)


def _marg_quartic_log() -> MarginalPotential:
    # t^2 - log(t^4) on t > 0; outside the domain the potential is inf.

    def value(t: float) -> float:
        if t <= 0.0:
            return math.inf
        return t * t - 4.0 * math.log(t)

    def deriv(t: float) -> float:
        if t <= 0.0:
            return -math.inf
        return 2.0 * t - 4.0 / t

    return MarginalPotential(
        "quartic_log",
        value,
        deriv,
        argmin=math.sqrt(2.0),
        min_value=2.0 - math.log(4.0),
    )


def _marg_square_log() -> MarginalPotential:
    # t^2 - log(t^2) on t > 0.

    def value(t: float) -> float:
        if t <= 0.0:
            return math.inf
        return t * t - 2.0 * math.log(t)

    def deriv(t: float) -> float:
        if t <= 0.0:
            return -math.inf
        return 2.0 * t - 2.0 / t

    return MarginalPotential("square_log", value, deriv, argmin=1.0, min_value=1.0)


def _marg_linear_ramp(rate: float) -> MarginalPotential:
    # rate * t on t >= 0, the potential of a (scaled) exponential law.
    r = float(rate)
    if r < 0.0:
        raise ValueError(f"linear_ramp marginal needs rate >= 0, got {r}")

    def value(t: float) -> float:
        if t < 0.0:
            return math.inf
        return r * t

    def deriv(t: float) -> float:
        if t < 0.0:
            return -math.inf
        return r

    return MarginalPotential("linear_ramp", value, deriv, argmin=0.0, min_value=0.0)


def _marg_exp_linear() -> MarginalPotential:
    # (exp(t) - t) / 2, the log-chi-square observation potential.

    def value(t: float) -> float:
        return 0.5 * (safe_exp(t) - t)

    def deriv(t: float) -> float:
        return 0.5 * (safe_exp(t) - 1.0)

    return MarginalPotential("exp_linear", value, deriv, argmin=0.0, min_value=0.5)


def _marg_abs_dev(rate: float = 1.0, center: float = 0.0) -> MarginalPotential:
    r, c = float(rate), float(center)
    if r <= 0.0:
        raise ValueError(f"abs_dev marginal needs rate > 0, got {r}")

    def value(t: float) -> float:
        return r * abs(t - c)

    def deriv(t: float) -> float:
        if t > c:
            return r
        if t < c:
            return -r
        return 0.0

    return MarginalPotential("abs_dev", value, deriv, argmin=c, min_value=0.0)


def _marg_cosh_well(scale: float = 1.0, center: float = 0.0) -> MarginalPotential:
    s, c = float(scale), float(center)
    if s <= 0.0:
        raise ValueError(f"cosh_well marginal needs scale > 0, got {s}")

    def value(t: float) -> float:
        return s * (safe_cosh(t - c) - 1.0)

    def deriv(t: float) -> float:
        return s * safe_sinh(t - c)

    return MarginalPotential("cosh_well", value, deriv, argmin=c, min_value=0.0)


MARGINALS: dict[str, Callable[..., MarginalPotential]] = {
    "quadratic": _marg_quadratic,
    "quartic_log": _marg_quartic_log,
    "square_log": _marg_square_log,
    "linear_ramp": _marg_linear_ramp,
    "exp_linear": _marg_exp_linear,
    "abs_dev": _marg_abs_dev,
    "cosh_well": _marg_cosh_well,
}


def make_marginal(name: str, **params: float) -> MarginalPotential:
    """Build a registry marginal by name."""
    try:
        factory = MARGINALS[name]
    except KeyError:
        raise ValueError(
            f"unknown marginal {name!r}; known: {sorted(MARGINALS)}"
        ) from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise ValueError(f"marginal {name!r}: {exc}") from None


# ---------------------------------------------------------------------------
# Nonlinearity registry
# ---------------------------------------------------------------------------


def _nl_affine(slope: float, intercept: float = 0.0) -> Nonlinearity:
    s, b = float(slope), float(intercept)

    def value(x: float) -> float:
        return line_at(s, b, x)

    def deriv(x: float) -> float:
        return s

    return Nonlinearity("affine", value, deriv, "linear")


def _nl_shifted_exp(c0: float, c1: float, c2: float) -> Nonlinearity:
    # c0 + c1 * exp(c2 * x); curvature is set by the sign of c1.
    a0, a1, a2 = float(c0), float(c1), float(c2)
    if a1 == 0.0 or a2 == 0.0:
        raise ValueError("shifted_exp needs c1 != 0 and c2 != 0; use affine")

    def value(x: float) -> float:
        return a0 + a1 * safe_exp(a2 * x)

    def deriv(x: float) -> float:
        return a1 * a2 * safe_exp(a2 * x)

    return Nonlinearity(
        "shifted_exp", value, deriv, "convex" if a1 > 0.0 else "concave"
    )


def _nl_shifted_log(c0: float, c1: float, c2: float, c3: float = 0.0) -> Nonlinearity:
    # c0 + c1 * log(c2*x + c3), valid where c2*x + c3 > 0; outside that
    # region the boundary limit is returned so endpoint probes stay IEEE.
    a0, a1, a2, a3 = float(c0), float(c1), float(c2), float(c3)
    if a1 == 0.0 or a2 == 0.0:
        raise ValueError("shifted_log needs c1 != 0 and c2 != 0; use affine")
    inner_limit = -math.inf if a1 > 0.0 else math.inf
    dlimit = math.inf if a1 * a2 > 0.0 else -math.inf

    def value(x: float) -> float:
        arg = line_at(a2, a3, x)
        if arg <= 0.0:
            return inner_limit
        return a0 + a1 * math.log(arg)

    def deriv(x: float) -> float:
        arg = line_at(a2, a3, x)
        if arg <= 0.0:
            return dlimit
        return a1 * a2 / arg

    return Nonlinearity(
        "shifted_log", value, deriv, "concave" if a1 > 0.0 else "convex"
    )


def _nl_shifted_square(c0: float, c1: float, c2: float) -> Nonlinearity:
    # c0 + c1 * (x - c2)^2
    a0, a1, a2 = float(c0), float(c1), float(c2)
    if a1 == 0.0:
        raise ValueError("shifted_square needs c1 != 0; use affine")

    def value(x: float) -> float:
        d = x - a2
        return a0 + a1 * d * d

    def deriv(x: float) -> float:
        return 2.0 * a1 * (x - a2)

    return Nonlinearity(
        "shifted_square", value, deriv, "convex" if a1 > 0.0 else "concave"
    )


def _nl_log_square(c0: float, c1: float) -> Nonlinearity:
    # c0 + c1 * log(x^2).  Convex or concave on any interval that does
    # not straddle 0; at x = 0 the one-sided limit is returned.
    a0, a1 = float(c0), float(c1)
    if a1 == 0.0:
        raise ValueError("log_square needs c1 != 0; use affine")
    limit0 = -math.inf if a1 > 0.0 else math.inf

    def value(x: float) -> float:
        ax = abs(x)
        if ax == 0.0:
            return limit0
        return a0 + 2.0 * a1 * math.log(ax)

    def deriv(x: float) -> float:
        if x == 0.0:
            return math.inf if a1 > 0.0 else -math.inf
        return 2.0 * a1 / x

    return Nonlinearity(
        "log_square", value, deriv, "concave" if a1 > 0.0 else "convex"
    )


NONLINEARITIES: dict[str, Callable[..., Nonlinearity]] = {
    "affine": _nl_affine,
    "shifted_exp": _nl_shifted_exp,
    "shifted_log": _nl_shifted_log,
    "shifted_square": _nl_shifted_square,
    "log_square": _nl_log_square,
}


def make_nonlinearity(name: str, **params: float) -> Nonlinearity:
    """Build a registry nonlinearity by name."""
    try:
        factory = NONLINEARITIES[name]
    except KeyError:
        raise ValueError(
            f"unknown nonlinearity {name!r}; known: {sorted(NONLINEARITIES)}"
        ) from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise ValueError(f"nonlinearity {name!r}: {exc}") from None


# ---------------------------------------------------------------------------
# Built-in models and config parsing
# ---------------------------------------------------------------------------

# Truncation factor for the log-volatility step target: the support is
# cut at scale * 1e8, where the posterior mass is far below double
# precision, so every bound stays finite without changing the law.
SV_TAIL_FACTOR = 1e8


def _artificial3obs(
    a: float = -2.0,
    b: float = 1.1,
    c: float = -0.8,
    d: float = 1.5,
    e: float = 2.0,
    lam: float = 0.2,
    y: tuple[float, float, float] = (2.314, 1.6, 2.0),
) -> PotentialModel:
    if not a < 0.0:
        raise ValueError(f"artificial3obs needs a < 0, got {a}")
    if not b > 0.0:
        raise ValueError(f"artificial3obs needs b > 0, got {b}")
    if not c < 0.0:
        raise ValueError(f"artificial3obs needs c < 0, got {c}")
    if not d > 0.0:
        raise ValueError(f"artificial3obs needs d > 0, got {d}")
    if not lam > 0.0:
        raise ValueError(f"artificial3obs needs lam > 0, got {lam}")
    ys = tuple(float(v) for v in y)
    if len(ys) != 3 or not all(math.isfinite(v) for v in ys):
        raise ValueError(f"artificial3obs needs three finite observations, got {y}")
    # Observations are folded into the nonlinearities, g_i = y_i - h_i(x),
    # so each marginal keeps a fixed, known minimiser.
    terms = (
        Term(
            make_marginal("quartic_log"),
            make_nonlinearity("shifted_exp", c0=ys[0], c1=-a, c2=-b),
        ),
        Term(
            make_marginal("square_log"),
            make_nonlinearity("shifted_log", c0=ys[1], c1=-c, c2=d, c3=1.0),
        ),
        Term(
            make_marginal("quadratic"),
            make_nonlinearity("shifted_square", c0=ys[2], c1=-1.0, c2=e),
        ),
        Term(
            make_marginal("linear_ramp", rate=lam),
            make_nonlinearity("affine", slope=1.0),
        ),
    )
    return PotentialModel(terms, Interval(0.0, math.inf), "artificial3obs")


def _sv_step(y: float, alpha: float, sigma: float) -> PotentialModel:
    yv, av, sv = float(y), float(alpha), float(sigma)
    if not sv > 0.0:
        raise ValueError(f"sv_step needs sigma > 0, got {sigma}")
    if not (math.isfinite(yv) and math.isfinite(av)):
        raise ValueError(f"sv_step needs finite y and alpha, got y={y}, alpha={alpha}")
    scale = safe_exp(0.5 * av + 0.25 * yv)
    terms = (
        Term(
            make_marginal("exp_linear"),
            make_nonlinearity("log_square", c0=yv, c1=-1.0),
        ),
        Term(
            make_marginal("quadratic", weight=1.0 / (2.0 * sv * sv)),
            make_nonlinearity("log_square", c0=-av, c1=1.0),
        ),
    )
    return PotentialModel(terms, Interval(0.0, SV_TAIL_FACTOR * scale), "sv_step")


BUILTIN_MODELS: dict[str, Callable[..., PotentialModel]] = {
    "artificial3obs": _artificial3obs,
    "sv_step": _sv_step,
}


def builtin_model(name: str, **params) -> PotentialModel:
    """Build one of the named built-in models."""
    try:
        factory = BUILTIN_MODELS[name]
    except KeyError:
        raise ValueError(
            f"unknown model {name!r}; known: {sorted(BUILTIN_MODELS)}"
        ) from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise ValueError(f"model {name!r}: {exc}") from None


def model_from_dict(cfg: dict) -> PotentialModel:
    """Build a model from a plain-dict description.

    Expected shape::

        {"name": "optional label",
         "support": [0.0, null],          # null means unbounded
         "terms": [{"marginal": {"name": "quadratic", "weight": 1.0},
                    "nonlinearity": {"name": "affine", "slope": 1.0}}]}
    """
    if not isinstance(cfg, dict):
        raise ValueError(f"model config must be a mapping, got {type(cfg).__name__}")
    try:
        raw_support = cfg["support"]
        raw_terms = cfg["terms"]
    except KeyError as exc:
        raise ValueError(f"model config missing key {exc.args[0]!r}") from None
    if not isinstance(raw_support, (list, tuple)) or len(raw_support) != 2:
        raise ValueError(f"support must be a [lo, hi] pair, got {raw_support!r}")
    lo = -math.inf if raw_support[0] is None else float(raw_support[0])
    hi = math.inf if raw_support[1] is None else float(raw_support[1])
    support = Interval(lo, hi)
    if not isinstance(raw_terms, (list, tuple)) or not raw_terms:
        raise ValueError("model config needs a non-empty list of terms")

    def _part(term_idx: int, spec, builder, kind: str):
        if not isinstance(spec, dict) or "name" not in spec:
            raise ValueError(
                f"term {term_idx}: {kind} must be a mapping with a 'name' key"
            )
        params = {k: v for k, v in spec.items() if k != "name"}
        try:
            return builder(spec["name"], **params)
        except ValueError as exc:
            raise ValueError(f"term {term_idx}: {exc}") from None

    terms = []
    for i, raw in enumerate(raw_terms, start=1):
        if not isinstance(raw, dict):
            raise ValueError(f"term {i}: expected a mapping, got {type(raw).__name__}")
        marg = _part(i, raw.get("marginal"), make_marginal, "marginal")
        nl = _part(i, raw.get("nonlinearity"), make_nonlinearity, "nonlinearity")
        terms.append(Term(marg, nl))
    return PotentialModel(tuple(terms), support, str(cfg.get("name", "")))

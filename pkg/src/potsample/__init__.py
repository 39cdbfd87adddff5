"""Exact i.i.d. sampling from densities given by generalized potentials.

A target p(x) proportional to exp(-V(x)) is described through
V(x) = sum_i Vbar_i(g_i(x)) with convex marginals Vbar_i and
convex/concave/linear nonlinearities g_i.  Two adaptive rejection
samplers run on that structure: a mixture-of-truncated-pieces envelope
built around one analytically tractable term, and a ratio-of-uniforms
sampler covering the transformed acceptance region with triangles.
Both tighten their envelopes at every rejection and return exact
draws.  A particle filter for a stochastic volatility model applies
the second sampler to draw from per-ancestor filtering densities.
"""

from .ars_mixture import (
    AcceptanceStats,
    AdaptiveMixtureSampler,
    ExponentialDensity,
    MixtureProposal,
    TruncatableDensity,
    acceptance_curve,
    adaptive_sample,
    build_proposal,
    sample_proposal,
)
from .bounds import (
    LinearFn,
    LinearizedPotential,
    SupportSet,
    build_linearized,
    convex_floor,
    linearize_term,
    lower_bound,
    rou_bounds,
)
from .errors import (
    InfiniteEnvelopeError,
    InvariantViolationError,
    PotsampleError,
    UnboundedRegionError,
)
from .model import (
    Interval,
    MarginalPotential,
    Nonlinearity,
    PotentialModel,
    Term,
    builtin_model,
    make_marginal,
    make_nonlinearity,
    model_from_dict,
)
from .pf import (
    FilterTrace,
    StepStats,
    SVParams,
    filter_step,
    prior_propagation,
    run_filter,
    simulate_sv,
    sv_index_model,
    sv_initial_supports,
)
from .rou import (
    RouSampler,
    RouStats,
    Triangle,
    boundary_point,
    bounding_rectangle,
    build_triangle,
    rectangle_sample,
    rou_accept,
    sample_uniform_triangle,
)

__version__ = "0.1.0"

__all__ = [
    "AcceptanceStats",
    "AdaptiveMixtureSampler",
    "ExponentialDensity",
    "FilterTrace",
    "InfiniteEnvelopeError",
    "Interval",
    "InvariantViolationError",
    "LinearFn",
    "LinearizedPotential",
    "MarginalPotential",
    "MixtureProposal",
    "Nonlinearity",
    "PotentialModel",
    "PotsampleError",
    "RouSampler",
    "RouStats",
    "StepStats",
    "SupportSet",
    "SVParams",
    "Term",
    "Triangle",
    "TruncatableDensity",
    "UnboundedRegionError",
    "acceptance_curve",
    "adaptive_sample",
    "boundary_point",
    "bounding_rectangle",
    "build_linearized",
    "build_proposal",
    "build_triangle",
    "builtin_model",
    "convex_floor",
    "filter_step",
    "linearize_term",
    "lower_bound",
    "make_marginal",
    "make_nonlinearity",
    "model_from_dict",
    "prior_propagation",
    "rectangle_sample",
    "rou_accept",
    "rou_bounds",
    "run_filter",
    "sample_proposal",
    "sample_uniform_triangle",
    "simulate_sv",
    "sv_index_model",
    "sv_initial_supports",
]

"""Shared oracles and fixtures.

The distributional oracles here are deliberately independent of the
package's own machinery: cumulative trapezoid quadrature of the
unnormalised density gives reference CDFs, and closed-form CDFs are
used where they exist.
"""

import math

import numpy as np
import pytest
from scipy.integrate import cumulative_trapezoid

from potsample.bounds import SupportSet
from potsample.model import (
    Interval,
    PotentialModel,
    Term,
    builtin_model,
    make_marginal,
    make_nonlinearity,
)

S0 = (0.0, 2.0 - math.sqrt(2.0), 2.0, 2.0 + math.sqrt(2.0))


def exp_model(rate: float = 1.0) -> PotentialModel:
    """p(x) proportional to exp(-rate*x) on [0, inf)."""
    return PotentialModel(
        (
            Term(
                make_marginal("linear_ramp", rate=rate),
                make_nonlinearity("affine", slope=1.0),
            ),
        ),
        Interval(0.0, math.inf),
        f"exp{rate}",
    )


def pareto_model() -> PotentialModel:
    """p(x) proportional to (1+x)^{-1.5} on [0, inf): a log-grown tail."""
    return PotentialModel(
        (
            Term(
                make_marginal("linear_ramp", rate=1.0),
                make_nonlinearity("shifted_log", c0=0.0, c1=1.5, c2=1.0, c3=1.0),
            ),
        ),
        Interval(0.0, math.inf),
        "pareto_tail",
    )


def grid_cdf(model: PotentialModel, lo: float, hi: float, n: int = 20001):
    """Quadrature CDF of the model on a dense grid."""
    xs = np.linspace(lo, hi, n)
    dens = np.array([model.density_unnorm(float(x)) for x in xs])
    cum = cumulative_trapezoid(dens, xs, initial=0.0)
    return xs, cum / cum[-1]


def ks_distance(samples, grid_xs, grid_cum) -> float:
    """One-sample KS distance against a tabulated CDF."""
    xs = np.sort(np.asarray(samples, dtype=float))
    cdf = np.interp(xs, grid_xs, grid_cum)
    n = xs.size
    up = np.arange(1, n + 1) / n - cdf
    down = cdf - np.arange(0, n) / n
    return float(max(up.max(), down.max()))


class QueueRng:
    """Deterministic stand-in for a Generator: .random() pops a queue."""

    def __init__(self, values):
        self._values = list(values)

    def random(self):
        return self._values.pop(0)


# One line per acceptance criterion, echoed after the run summary so the
# verdicts stay visible under pytest's output capture.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def artificial():
    return builtin_model("artificial3obs")


@pytest.fixture(scope="session")
def artificial_cdf(artificial):
    # Tail mass beyond 50 is under 1e-12 by the 0.2x ramp term.
    return grid_cdf(artificial, 0.0, 50.0)


@pytest.fixture()
def s0_supports():
    return SupportSet(S0)

"""Adaptive rejection sampling with a mixture-of-truncated-pieces proposal.

One term j of the potential is singled out: its density
q(x) = exp(-Vbar_j(g_j(x))) must admit closed-form interval masses and
truncated sampling.  The remaining reduced potential V_{-j} is bounded
below on every support interval by a constant gamma_k, giving the
envelope L_k q(x) >= p(x) with L_k = exp(-gamma_k).  Proposals come
from the normalized mixture of the scaled truncated pieces; each
rejected point becomes a new support point and only the piece it split
is rebuilt.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import NamedTuple, Protocol

import numpy as np

from .bounds import SupportSet, build_linearized
from .errors import InfiniteEnvelopeError, InvariantViolationError
from .model import Interval, PotentialModel

# Probe count and tolerance for checking that q matches term j.
_PROBE_POINTS = 32
_PROBE_TOL = 1e-9

# Acceptance ratios may exceed 1 by at most this much (roundoff);
# anything larger means the envelope construction is broken.
_RATIO_SLACK = 1e-6


class TruncatableDensity(Protocol):
    """Density exp(-potential) with closed-form truncated pieces."""

    def mass(self, interval: Interval) -> float:
        """Unnormalized integral of the density over the interval."""

    def sample_truncated(self, interval: Interval, rng) -> float:
        """One draw from the density restricted to the interval."""

    def eval_potential(self, x: float) -> float:
        """The potential -log q(x), up to no additive constant."""


@dataclass(frozen=True)
class ExponentialDensity:
    """q(x) = exp(-(rate*x + offset)), the built-in exponential piece.

    rate = 0 degenerates to a flat density, usable on finite intervals
    only.  The offset matters because q must match the model term it
    stands in for exactly, constant included.
    """

    rate: float
    offset: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.rate) and math.isfinite(self.offset)):
            raise ValueError("rate and offset must be finite")

    def eval_potential(self, x: float) -> float:
        return self.rate * x + self.offset

    def mass(self, interval: Interval) -> float:
        lo, hi, r = interval.lo, interval.hi, self.rate
        # Infinite masses are returned, not raised: build_proposal turns
        # them into its infinite-envelope diagnostic with piece context.
        if r == 0.0:
            if not interval.bounded:
                return math.inf
            return (hi - lo) * math.exp(-self.offset)
        if r > 0.0:
            if not math.isfinite(lo):
                return math.inf
            peak = -(r * lo + self.offset)
            if peak > 700.0:
                return math.inf
            return math.exp(peak) * -math.expm1(-r * (hi - lo)) / r
        if not math.isfinite(hi):
            return math.inf
        peak = -(r * hi + self.offset)
        if peak > 700.0:
            return math.inf
        return math.exp(peak) * -math.expm1(r * (hi - lo)) / -r

    def sample_truncated(self, interval: Interval, rng) -> float:
        lo, hi, r = interval.lo, interval.hi, self.rate
        heavy_end = lo if r >= 0.0 else hi
        if not math.isfinite(heavy_end) or (r == 0.0 and not interval.bounded):
            raise ValueError(
                f"cannot sample: infinite mass on [{lo}, {hi}] at rate {r}"
            )
        u = rng.random()
        if r == 0.0:
            return lo + u * (hi - lo)
        # Inverse CDF from the heavy end; log1p/expm1 keep narrow
        # intervals and far tails exact.
        if r > 0.0:
            x = lo - math.log1p(u * math.expm1(-r * (hi - lo))) / r
        else:
            x = hi + math.log1p(u * math.expm1(r * (hi - lo))) / -r
        return min(max(x, lo), hi)


class ProposalPiece(NamedTuple):
    """One truncated piece L_k * q(x) of the mixture."""

    interval: Interval
    scale: float
    weight: float
    gamma: float


@dataclass(frozen=True)
class MixtureProposal:
    """Normalized mixture of scaled truncated pieces of q."""

    pieces: tuple[ProposalPiece, ...]
    weights: np.ndarray
    total_mass: float

    def piece_index(self, u: float) -> int:
        """Piece whose cumulative weight bracket contains u in [0, 1)."""
        cum = np.cumsum(self.weights)
        return min(bisect.bisect_right(cum.tolist(), u), len(self.pieces) - 1)


def _check_q_matches_term(model: PotentialModel, j: int, q) -> None:
    term = model.terms[j - 1]
    lo, hi = model.support.lo, model.support.hi
    a = lo if math.isfinite(lo) else (hi - 2.0 if math.isfinite(hi) else -1.0)
    b = hi if math.isfinite(hi) else a + 2.0
    span = b - a
    for i in range(_PROBE_POINTS):
        x = a + span * (i + 0.5) / _PROBE_POINTS
        want = term.marginal.value(term.nonlinearity.value(x))
        got = q.eval_potential(x)
        if not math.isfinite(want) and not math.isfinite(got):
            continue
        if abs(want - got) > _PROBE_TOL * (1.0 + abs(want)):
            raise ValueError(
                f"q does not match term {j}: potential {got!r} vs {want!r} at x={x}"
            )


def _make_piece(reduced: PotentialModel, q, interval: Interval) -> ProposalPiece:
    gamma = build_linearized(reduced, interval).gamma
    if gamma == -math.inf:
        raise InfiniteEnvelopeError(
            f"reduced potential unbounded below on [{interval.lo}, {interval.hi}]; "
            "the chosen term j cannot carry this tail (pick another j)"
        )
    scale = math.inf if gamma < -700.0 else math.exp(-gamma)
    mass = q.mass(interval)
    weight = scale * mass
    if not math.isfinite(weight):
        raise InfiniteEnvelopeError(
            f"piece on [{interval.lo}, {interval.hi}] has non-finite weight "
            f"L={scale!r}, mass={mass!r}; the envelope is flat or rising over "
            "an unbounded piece (pick a j whose density decays there)"
        )
    return ProposalPiece(interval, scale, weight, gamma)


def build_proposal(
    model: PotentialModel, j: int, q, supports: SupportSet
) -> MixtureProposal:
    """Envelope mixture for the model with term j factored out as q.

    Pieces follow the support-point partition of the domain; each piece
    k carries L_k = exp(-gamma_k) with gamma_k a lower bound on the
    reduced potential over the piece.
    """
    if not 1 <= j <= model.n_terms:
        raise ValueError(f"term index j={j} out of range 1..{model.n_terms}")
    _check_q_matches_term(model, j, q)
    reduced = model.reduced(j)
    pieces = tuple(
        _make_piece(reduced, q, itv) for itv in supports.intervals(model.support)
    )
    total = math.fsum(p.weight for p in pieces)
    if not (math.isfinite(total) and total > 0.0):
        raise InfiniteEnvelopeError(f"proposal mass {total!r} is not usable")
    weights = np.array([p.weight for p in pieces]) / total
    return MixtureProposal(pieces, weights, total)


def sample_proposal(proposal: MixtureProposal, q, rng) -> float:
    """One draw from the mixture: pick a piece, then sample q within it."""
    k = proposal.piece_index(rng.random())
    return q.sample_truncated(proposal.pieces[k].interval, rng)


@dataclass(frozen=True)
class AcceptanceStats:
    """Trial bookkeeping of an adaptive run."""

    trials_per_accept: np.ndarray
    dedupe_skips: int = 0

    @property
    def acceptance_rate(self) -> float:
        return len(self.trials_per_accept) / float(self.trials_per_accept.sum())


def acceptance_curve(trials: np.ndarray) -> np.ndarray:
    """Mean reciprocal trial count per sample index across runs (rows)."""
    t = np.asarray(trials, dtype=float)
    return (1.0 / t).mean(axis=0)


class AdaptiveMixtureSampler:
    """Rejection sampler whose mixture envelope tightens on rejection.

    Mutable adaptive state (supports, pieces); single-writer.  The
    model is immutable and may be shared between instances.
    """

    def __init__(self, model: PotentialModel, j: int, q, supports) -> None:
        self.model = model
        self.j = int(j)
        self.q = q
        self.reduced = model.reduced(self.j)
        self.supports = SupportSet(supports)
        proposal = build_proposal(model, self.j, q, self.supports)
        self._pieces: list[ProposalPiece] = list(proposal.pieces)
        self._rebuild_weights()
        self.trials = 0
        self.accepts = 0
        self.dedupe_skips = 0

    def _rebuild_weights(self) -> None:
        cum = np.cumsum([p.weight for p in self._pieces])
        total = float(cum[-1])
        if not (math.isfinite(total) and total > 0.0):
            raise InfiniteEnvelopeError(f"proposal mass {total!r} is not usable")
        self._cum: list[float] = (cum / total).tolist()

    def proposal(self) -> MixtureProposal:
        """Snapshot of the current mixture."""
        pieces = tuple(self._pieces)
        total = math.fsum(p.weight for p in pieces)
        return MixtureProposal(
            pieces, np.array([p.weight for p in pieces]) / total, total
        )

    def _insert(self, x: float) -> None:
        i = bisect.bisect_right([p.interval.lo for p in self._pieces], x) - 1
        old = self._pieces[max(i, 0)]
        # Insert into the supports only when the piece actually splits,
        # so support growth stays exactly rejections minus skips.
        if not (old.interval.lo < x < old.interval.hi) or not self.supports.insert(x):
            self.dedupe_skips += 1
            return
        left = _make_piece(self.reduced, self.q, Interval(old.interval.lo, x))
        right = _make_piece(self.reduced, self.q, Interval(x, old.interval.hi))
        # A child bound may never be looser than its parent's: the
        # parent constant already minorizes the reduced potential there.
        if left.gamma < old.gamma:
            left = left._replace(
                gamma=old.gamma,
                scale=math.exp(-old.gamma),
                weight=math.exp(-old.gamma) * self.q.mass(left.interval),
            )
        if right.gamma < old.gamma:
            right = right._replace(
                gamma=old.gamma,
                scale=math.exp(-old.gamma),
                weight=math.exp(-old.gamma) * self.q.mass(right.interval),
            )
        self._pieces[i : i + 1] = [left, right]
        self._rebuild_weights()

    def draw(self, rng) -> float:
        """One exact sample; rejections refine the envelope."""
        while True:
            self.trials += 1
            u = rng.random()
            k = min(bisect.bisect_right(self._cum, u), len(self._pieces) - 1)
            piece = self._pieces[k]
            x = self.q.sample_truncated(piece.interval, rng)
            log_ratio = piece.gamma - self.reduced.potential(x)
            if log_ratio > _RATIO_SLACK:
                raise InvariantViolationError(
                    f"acceptance ratio exp({log_ratio:.3e}) above 1 at x={x}: "
                    "the envelope no longer dominates the target"
                )
            if rng.random() <= math.exp(min(log_ratio, 0.0)):
                self.accepts += 1
                return x
            self._insert(x)

    def sample(self, n: int, rng) -> tuple[np.ndarray, AcceptanceStats]:
        if n < 1:
            raise ValueError(f"sample count must be >= 1, got {n}")
        out = np.empty(n)
        trials = np.empty(n, dtype=np.int64)
        for i in range(n):
            before = self.trials
            out[i] = self.draw(rng)
            trials[i] = self.trials - before
        return out, AcceptanceStats(trials, self.dedupe_skips)


def adaptive_sample(
    model: PotentialModel, j: int, q, supports, n: int, rng
) -> tuple[np.ndarray, AcceptanceStats, SupportSet]:
    """Draw n exact i.i.d. samples, adapting the envelope as it runs.

    Returns the samples, per-sample trial counts, and the refined
    support set (the input set is not modified).
    """
    sampler = AdaptiveMixtureSampler(model, j, q, supports)
    out, stats = sampler.sample(n, rng)
    return out, stats, sampler.supports

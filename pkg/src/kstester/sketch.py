"""One-pass polylog-space identity tester under the Kolmogorov distance.

For every level ``j = 1 .. J`` with ``J = ceil(lg 1/eps) + 2`` the reference
line is cut into ``2**j`` buckets of probability ``2**-j`` each, bucket ``i``
being ``(q[(i-1)/2**j], q[i/2**j]]`` for the reference quantile function
``q``.  A level walks through its buckets in batches of ``ceil(L**3)``
consecutive buckets (``L = lg 1/eps + 3``), counting ``t_j`` fresh samples per
batch, and flags a bucket whose observed frequency is further than ``Delta_j``
from ``2**-j``.  All levels read the same stream side by side; a round accepts
when no level flags a bucket, and ``rounds(delta)`` independent rounds are
combined by majority vote.
"""

from __future__ import annotations

import bisect
import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .reference import DomainError
from .streams import as_stream

__all__ = [
    "THEORY_C",
    "PRACTICAL_C",
    "BOOKKEEPING_WORDS",
    "StateError",
    "InsufficientSamples",
    "TesterConfig",
    "LevelParams",
    "Decision",
    "Witness",
    "Verdict",
    "RequiredSamples",
    "RunReport",
    "amplification_rounds",
    "rejection_halfwidth",
    "level_params",
    "bucket_of",
    "Subroutine",
    "required_samples",
    "StreamingTester",
    "amplified_test",
]

THEORY_C = 2.4e5
PRACTICAL_C = 4.0

# total_samples, round_samples, rounds_done, reject_votes,
# witness_i, witness_j, witness_count, finished_mask
BOOKKEEPING_WORDS = 8


class StateError(RuntimeError):
    """A streaming state was driven after it finished or was finalized."""


class InsufficientSamples(RuntimeError):
    """The stream ended before every level completed its last batch."""

    def __init__(self, needed: int, got: int):
        self.needed = needed
        self.got = got
        super().__init__(f"InsufficientSamples: needed {needed}, got {got}")


def _lg(x: float) -> float:
    return math.log2(x)


@dataclass(frozen=True)
class TesterConfig:
    """Accuracy ``eps``, failure probability ``delta`` and Chernoff constant ``c``.

    ``c`` defaults per ``mode``: 2.4e5 for ``"theory"`` and 4 for
    ``"practical"``.  ``early_exit`` stops a round at its first flagged bucket;
    it is only honoured in practical mode because exact sample accounting
    assumes complete rounds.
    """

    __test__ = False  # keep pytest from collecting this as a test class

    eps: float
    delta: float = 0.1
    c: Optional[float] = None
    mode: str = "practical"
    early_exit: bool = False

    def __post_init__(self):
        if self.mode not in ("theory", "practical"):
            raise DomainError(f"mode must be 'theory' or 'practical', got {self.mode!r}")
        if not 0.0 < self.eps <= 0.5:
            raise DomainError("eps must lie in (0, 1/2]")
        if not 0.0 < self.delta < 1.0:
            raise DomainError("delta must lie in (0, 1)")
        if self.c is None:
            object.__setattr__(self, "c", THEORY_C if self.mode == "theory" else PRACTICAL_C)
        if not self.c > 0:
            raise DomainError("c must be positive")
        if self.early_exit and self.mode == "theory":
            raise DomainError("early exit is a practical-mode option")

    @property
    def levels(self) -> int:
        """``J = ceil(lg 1/eps) + 2``."""
        return math.ceil(_lg(1.0 / self.eps)) + 2

    @property
    def log_term(self) -> float:
        """``L = lg 1/eps + 3``."""
        return _lg(1.0 / self.eps) + 3.0

    @property
    def batch_size(self) -> int:
        return math.ceil(self.log_term**3)

    @property
    def rounds(self) -> int:
        return amplification_rounds(self.delta)


def amplification_rounds(delta: float) -> int:
    """Odd number of majority-vote rounds reaching failure probability ``delta``.

    One round fails with probability at most 1/10; by Hoeffding a majority of
    ``r`` rounds fails with probability at most ``exp(-2 r 0.4**2)``.
    """
    if not 0.0 < delta < 1.0:
        raise DomainError("delta must lie in (0, 1)")
    if delta >= 0.1:
        return 1
    return 2 * math.ceil(1.6 * math.log(1.0 / delta)) + 1


def rejection_halfwidth(eps: float, j: int) -> float:
    """``Delta_j = max(eps/j**2, eps/(lg 1/eps + 3)) / 20``."""
    return max(eps / j**2, eps / (_lg(1.0 / eps) + 3.0)) / 20.0


@dataclass(frozen=True)
class LevelParams:
    j: int
    delta_j: float
    t_j: int
    batch_size: int
    bucket_count: int

    @property
    def n_batches(self) -> int:
        return -(-self.bucket_count // self.batch_size)

    @property
    def samples_needed(self) -> int:
        return self.n_batches * self.t_j

    @property
    def reject_limit(self) -> int:
        """Largest tolerated ``|Z * 2**j - t_j|`` for a bucket count ``Z``.

        ``|Z/t - 2**-j| > Delta`` is equivalent to ``|Z 2**j - t| > Delta t 2**j``,
        and for integers that is ``> floor(Delta t 2**j)``; computing the floor
        in exact rationals keeps boundary equality on the accepting side.
        """
        return math.floor(Fraction(self.delta_j) * self.t_j * self.bucket_count)


def level_params(config: TesterConfig, j: int) -> LevelParams:
    if not 1 <= j <= config.levels:
        raise DomainError(f"level {j} outside [1, {config.levels}]")
    eps = config.eps
    L = config.log_term
    t = math.ceil(config.c * min(1.0 / eps**2, L**3 / (2**j * eps**2)))
    return LevelParams(
        j=j,
        delta_j=rejection_halfwidth(eps, j),
        t_j=max(t, 1),
        batch_size=config.batch_size,
        bucket_count=2**j,
    )


class Decision(enum.Enum):
    ACCEPT = "accept"
    REJECT = "reject"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Witness:
    """Bucket ``(i, j)`` whose frequency missed ``2**-j`` by more than ``threshold``."""

    i: int
    j: int
    observed_frequency: float
    threshold: float
    count: int = 0
    at_sample: int = 0

    def as_tuple(self) -> tuple[int, int, float, float]:
        return (self.i, self.j, self.observed_frequency, self.threshold)


@dataclass(frozen=True)
class Verdict:
    decision: Decision
    witness: Optional[Witness] = None

    def __post_init__(self):
        if (self.witness is not None) != (self.decision is Decision.REJECT):
            raise ValueError("a witness accompanies exactly the Reject decision")

    @property
    def rejected(self) -> bool:
        return self.decision is Decision.REJECT


def bucket_of(model, j: int, x) -> int:
    """Index ``i`` in ``[1, 2**j]`` of the level-``j`` bucket containing ``x``.

    Binary search over the dyadic reference quantiles, using the same
    ``(a, b]`` convention as the tester.  The ``-inf`` sentinel belongs to no
    bucket and is clamped to 1.
    """
    lo, hi = 1, 2**j
    scale = float(2**j)
    while lo < hi:
        mid = (lo + hi) // 2
        if x <= model.quantile(mid / scale):
            hi = mid
        else:
            lo = mid + 1
    return lo


class Subroutine:
    """Streaming state for one level.

    Holds ``batch_size`` counters and ``batch_size + 1`` cached quantile
    boundaries, both allocated at full size for the whole run so the live
    footprint does not depend on the data.  ``trace``, when given, is called
    with ``(batch_start, counts)`` each time a batch is evaluated, ``counts``
    being a copy of the batch's live counters.
    """

    def __init__(
        self,
        params: LevelParams,
        model,
        *,
        early_exit: bool = False,
        trace: Callable[[int, np.ndarray], None] | None = None,
    ):
        self.params = params
        self.model = model
        self.early_exit = early_exit
        self.trace = trace
        self.batch_start = 0
        self.seen_in_batch = 0
        self.finished = False
        self.witness: Witness | None = None
        self.batches_done = 0
        self.samples_used = 0
        self._limit = params.reject_limit
        self.counters = np.zeros(params.batch_size, dtype=np.int64)
        if model.lifted:
            self.boundaries: list | np.ndarray = [None] * (params.batch_size + 1)
        else:
            self.boundaries = np.full(params.batch_size + 1, np.inf)
        self._load_batch()

    @property
    def window(self) -> int:
        """Number of buckets in the active batch (the last one may be short)."""
        return min(self.params.batch_size, self.params.bucket_count - self.batch_start)

    def live_words(self) -> int:
        if self.finished:
            return 0
        return len(self.counters) + len(self.boundaries)

    def _load_batch(self) -> None:
        m = self.window
        scale = float(self.params.bucket_count)
        probs = np.arange(self.batch_start, self.batch_start + m + 1) / scale
        q = self.model.quantiles(probs)
        self.boundaries[: m + 1] = q
        self.counters[:] = 0

    def _count(self, xs) -> None:
        m = self.window
        if self.model.lifted:
            bnd = self.boundaries
            for x in xs:
                k = bisect.bisect_left(bnd, x, 0, m + 1)
                if 1 <= k <= m:
                    self.counters[k - 1] += 1
            return
        idx = np.searchsorted(self.boundaries[: m + 1], xs, side="left")
        idx = idx[(idx >= 1) & (idx <= m)]
        if idx.size:
            self.counters[:m] += np.bincount(idx - 1, minlength=m)

    def _close_batch(self) -> None:
        p = self.params
        m = self.window
        z = self.counters[:m]
        dev = np.abs(z * p.bucket_count - p.t_j)
        bad = np.flatnonzero(dev > self._limit)
        if self.trace is not None:
            self.trace(self.batch_start, z.copy())
        if bad.size and self.witness is None:
            k = int(bad[0])
            self.witness = Witness(
                i=self.batch_start + k + 1,
                j=p.j,
                observed_frequency=int(z[k]) / p.t_j,
                threshold=p.delta_j,
                count=int(z[k]),
                at_sample=self.samples_used,
            )
        self.batches_done += 1
        self.batch_start += m
        self.seen_in_batch = 0
        if self.batch_start >= p.bucket_count or (self.early_exit and self.witness is not None):
            self._release()
        else:
            self._load_batch()

    def _release(self) -> None:
        self.finished = True
        self.counters = np.zeros(0, dtype=np.int64)
        self.boundaries = [] if self.model.lifted else np.zeros(0)

    def until_evaluation(self) -> int:
        return self.params.t_j - self.seen_in_batch

    def feed(self, xs) -> None:
        """Consume a chunk of consecutive samples, in order."""
        if self.finished:
            raise StateError(f"level {self.params.j} subroutine already finished")
        n = len(xs)
        pos = 0
        while pos < n and not self.finished:
            take = min(n - pos, self.params.t_j - self.seen_in_batch)
            self._count(xs[pos : pos + take])
            pos += take
            self.seen_in_batch += take
            self.samples_used += take
            if self.seen_in_batch == self.params.t_j:
                self._close_batch()

    def step(self, x) -> "Subroutine":
        """Consume one sample."""
        if self.finished:
            raise StateError(f"level {self.params.j} subroutine already finished")
        self.feed([x] if self.model.lifted else np.array([x], dtype=float))
        return self


@dataclass(frozen=True)
class RequiredSamples:
    per_level: tuple[int, ...]
    per_round: int
    rounds: int

    @property
    def total(self) -> int:
        return self.rounds * self.per_round


def required_samples(config: TesterConfig) -> RequiredSamples:
    """Samples per level, per round (slowest level), and across all rounds."""
    per_level = tuple(
        level_params(config, j).samples_needed for j in range(1, config.levels + 1)
    )
    return RequiredSamples(per_level=per_level, per_round=max(per_level), rounds=config.rounds)


class StreamingTester:
    """A single (unamplified) round: every level reads every sample."""

    def __init__(self, config: TesterConfig, model, *, trace=None):
        self.config = config
        self.model = model
        self.levels = [
            Subroutine(
                level_params(config, j),
                model,
                early_exit=config.early_exit,
                trace=(lambda start, counts, j=j: trace(j, start, counts)) if trace else None,
            )
            for j in range(1, config.levels + 1)
        ]
        self.samples_seen = 0
        self.finalized = False
        self.needed = max(s.params.samples_needed for s in self.levels)
        self.peak_live_words = self.live_words()

    def live_words(self) -> int:
        return sum(s.live_words() for s in self.levels) + BOOKKEEPING_WORDS

    @property
    def first_witness(self) -> Witness | None:
        found = [s.witness for s in self.levels if s.witness is not None]
        if not found:
            return None
        return min(found, key=lambda w: (w.at_sample, w.j))

    @property
    def done(self) -> bool:
        if self.config.early_exit and self.first_witness is not None:
            return True
        return all(s.finished for s in self.levels)

    def until_evaluation(self) -> int:
        """Samples until the next batch of some live level closes."""
        live = [s.until_evaluation() for s in self.levels if not s.finished]
        return min(live) if live else 0

    def ingest_many(self, xs) -> None:
        if self.finalized:
            raise StateError("tester already finalized")
        for s in self.levels:
            if not s.finished:
                s.feed(xs)
        self.samples_seen += len(xs)
        self.peak_live_words = max(self.peak_live_words, self.live_words())

    def ingest(self, x) -> "StreamingTester":
        if self.model.lifted:
            self.ingest_many([x])
        else:
            self.ingest_many(np.array([x], dtype=float))
        return self

    def finalize(self) -> Verdict:
        if not self.done:
            raise InsufficientSamples(needed=self.needed, got=self.samples_seen)
        self.finalized = True
        w = self.first_witness
        if w is None:
            return Verdict(Decision.ACCEPT)
        return Verdict(Decision.REJECT, w)


@dataclass
class RunReport:
    verdict: Verdict
    rounds: int
    reject_votes: int
    samples_consumed: int
    peak_live_words: int
    round_verdicts: list[Verdict] = field(default_factory=list)


def amplified_test(
    config: TesterConfig, model, stream, *, chunk_size: int = 1 << 16
) -> RunReport:
    """Run ``config.rounds`` fresh rounds sequentially and take the majority.

    Each round reads exactly as many samples as its slowest level needs (fewer
    with ``early_exit``), so a full run consumes ``rounds * per_round``
    samples and never reads past that.
    """
    stream = as_stream(stream)
    plan = required_samples(config)
    consumed = 0
    reject_votes = 0
    peak = 0
    verdicts: list[Verdict] = []
    for _ in range(plan.rounds):
        tester = StreamingTester(config, model)
        while not tester.done:
            want = min(chunk_size, tester.until_evaluation())
            batch = stream.read(want)
            if len(batch) == 0:
                raise InsufficientSamples(needed=plan.total, got=consumed)
            tester.ingest_many(batch)
            consumed += len(batch)
        peak = max(peak, tester.peak_live_words)
        verdict = tester.finalize()
        verdicts.append(verdict)
        reject_votes += verdict.rejected
    if 2 * reject_votes > plan.rounds:
        witness = next(v.witness for v in verdicts if v.rejected)
        final = Verdict(Decision.REJECT, witness)
    else:
        final = Verdict(Decision.ACCEPT)
    return RunReport(
        verdict=final,
        rounds=plan.rounds,
        reject_votes=reject_votes,
        samples_consumed=consumed,
        peak_live_words=peak,
        round_verdicts=verdicts,
    )

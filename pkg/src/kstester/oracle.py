"""Exact reference machinery the streaming tester is checked against.

Nothing here is streaming or space-bounded: the classical KS test sorts its
whole sample, the witness scan evaluates every bucket of every level from
exact CDFs, and binomial tails are summed term by term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp
from scipy.stats import binom

from .reference import (
    DomainError,
    LiftedDiscrete,
    PiecewiseLinearCDF,
    UnsupportedModel,
    exact_kdistance,
    lift,
    mixture,
    piecewise_linear,
    uniform_unit,
    wedge_perturb,
)
from .sketch import TesterConfig, level_params, rejection_halfwidth

__all__ = [
    "ks_statistic",
    "dkw_threshold",
    "KSResult",
    "ks_test",
    "DyadicDecomposition",
    "dyadic_decompose",
    "WitnessReport",
    "lemma1_witness",
    "binomial_tail_exact",
    "ChernoffBounds",
    "chernoff_upper",
    "chernoff_lower",
    "chernoff_two_sided",
    "chernoff_bounds",
    "null_rejection_bounds",
    "certification_catalog",
]


# -- classical KS / DKW ------------------------------------------------------


def ks_statistic(sorted_sample: Sequence[float], model) -> float:
    """One-sample KS statistic ``max_i max(i/n - F(X_i), F(X_i) - (i-1)/n)``."""
    x = np.asarray(sorted_sample, dtype=float)
    n = x.size
    if n == 0:
        raise DomainError("KS statistic of an empty sample")
    f = np.asarray(model.cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - f)
    d_minus = np.max(f - (i - 1) / n)
    return float(max(d_plus, d_minus))


def dkw_threshold(n: int, delta: float) -> float:
    """Two-sided DKW radius ``sqrt(ln(2/delta) / (2n))``."""
    if n < 1:
        raise DomainError("n must be at least 1")
    if not 0.0 < delta < 1.0:
        raise DomainError("delta must lie in (0, 1)")
    return math.sqrt(math.log(2.0 / delta) / (2.0 * n))


class KSResult(NamedTuple):
    statistic: float
    threshold: float
    n: int
    reject: bool


def ks_test(sample: Sequence[float], model, delta: float = 0.1) -> KSResult:
    """Classical test: reject iff the KS statistic exceeds the DKW radius."""
    x = np.sort(np.asarray(sample, dtype=float))
    stat = ks_statistic(x, model)
    thr = dkw_threshold(x.size, delta)
    return KSResult(stat, thr, int(x.size), stat > thr)


# -- dyadic prefix decomposition -----------------------------------------------


@dataclass(frozen=True)
class DyadicDecomposition:
    """``(-inf, q[x_tilde]]`` written as disjoint buckets, at most one per level.

    ``numerator / 2**levels`` is ``x_tilde``; ``parts`` lists ``(i, j)`` in
    left-to-right order.
    """

    numerator: int
    levels: int
    parts: tuple[tuple[int, int], ...]

    @property
    def x_tilde(self) -> Fraction:
        return Fraction(self.numerator, 2**self.levels)

    def measure(self) -> Fraction:
        return sum((Fraction(1, 2**j) for _, j in self.parts), Fraction(0))

    def intervals(self) -> list[tuple[Fraction, Fraction]]:
        """Probability endpoints ``((i-1)/2**j, i/2**j)`` of each part."""
        return [(Fraction(i - 1, 2**j), Fraction(i, 2**j)) for i, j in self.parts]


def dyadic_decompose(x: float, levels: int) -> DyadicDecomposition:
    """Scan the first ``levels`` binary digits of ``x``; each set digit adds a bucket.

    For ``x = 1`` the expansion ``0.111...`` is used, giving
    ``x_tilde = 1 - 2**-levels``.
    """
    if not 0.0 <= x <= 1.0:
        raise DomainError("x must lie in [0, 1]")
    if levels < 1:
        raise DomainError("need at least one level")
    num = math.floor(Fraction(x) * 2**levels)
    num = min(num, 2**levels - 1)
    parts = []
    prefix = 0  # x_{:k} * 2**k
    for k in range(levels):
        bit = (num >> (levels - 1 - k)) & 1
        if bit:
            parts.append((2 * prefix + 1, k + 1))
        prefix = 2 * prefix + bit
    return DyadicDecomposition(num, levels, tuple(parts))


# -- exhaustive witness scan -----------------------------------------------------


@dataclass(frozen=True)
class WitnessReport:
    best_bucket: tuple[int, int]
    gap: float
    threshold: float
    satisfied: bool


def _bucket_masses(d_unknown, d_ref, j: int) -> np.ndarray:
    probs = np.arange(2**j + 1) / float(2**j)
    edges = d_ref.quantiles(probs)
    if isinstance(d_ref, LiftedDiscrete):
        if not isinstance(d_unknown, LiftedDiscrete):
            raise UnsupportedModel("lifted reference needs a lifted unknown model")
        cdf = np.asarray(d_unknown.cdf(list(edges)), dtype=float)
    else:
        if not isinstance(d_unknown, PiecewiseLinearCDF):
            raise UnsupportedModel("real-valued reference needs a piecewise-linear unknown")
        cdf = np.asarray(d_unknown.cdf(edges), dtype=float)
    return np.diff(cdf)


def lemma1_witness(d_unknown, d_ref, eps: float) -> WitnessReport:
    """Search all ``(i, j)``, ``j <= ceil(lg 1/eps) + 2``, for a bucket off by ``2 Delta_j``.

    Returns the bucket of largest ``|D(B) - 2**-j|`` among those meeting their
    level's threshold, or the overall largest when none does.  Ties keep the
    first bucket in ``(j, i)`` order.
    """
    if not isinstance(d_ref, (PiecewiseLinearCDF, LiftedDiscrete)):
        raise UnsupportedModel(f"no exact CDF for {type(d_ref).__name__}")
    levels = math.ceil(math.log2(1.0 / eps)) + 2
    best_any = None
    best_ok = None
    for j in range(1, levels + 1):
        gaps = np.abs(_bucket_masses(d_unknown, d_ref, j) - 2.0**-j)
        thr = 2.0 * rejection_halfwidth(eps, j)
        k = int(np.argmax(gaps))
        cand = ((k + 1, j), float(gaps[k]), thr)
        if best_any is None or cand[1] > best_any[1]:
            best_any = cand
        if cand[1] >= thr and (best_ok is None or cand[1] > best_ok[1]):
            best_ok = cand
    bucket, gap, thr = best_ok if best_ok is not None else best_any
    return WitnessReport(best_bucket=bucket, gap=gap, threshold=thr, satisfied=gap >= thr)


# -- binomial tails and Chernoff bounds -----------------------------------------

_EXACT_MAX_N = 100_000


def _log_pmf(n: int, p: float) -> np.ndarray:
    k = np.arange(n + 1)
    with np.errstate(divide="ignore"):
        return (
            gammaln(n + 1)
            - gammaln(k + 1)
            - gammaln(n - k + 1)
            + k * np.log(p)
            + (n - k) * np.log1p(-p)
        )


def binomial_tail_exact(
    n: int, p: float, threshold: float, tail: str = "upper", log: bool = False
) -> float:
    """Exact tail of ``X ~ Bin(n, p)`` by summing the mass in log space.

    ``tail="upper"`` gives ``P[X > threshold]``, ``"lower"`` gives
    ``P[X < threshold]`` and ``"two-sided"`` gives ``P[|X - np| > threshold]``.
    Comparisons are done in exact rationals of the inputs, so ``threshold``
    may be a ``Fraction``.  With ``log=True`` the natural log of the tail is
    returned (``-inf`` for an empty tail), which stays finite where the
    probability itself would underflow.
    """
    if not (isinstance(n, (int, np.integer)) and 0 <= n <= _EXACT_MAX_N):
        raise DomainError(f"n must be an integer in [0, {_EXACT_MAX_N}]")
    if not 0.0 <= p <= 1.0:
        raise DomainError("p must lie in [0, 1]")
    k = np.arange(n + 1)
    thr = Fraction(threshold)
    if tail == "upper":
        mask = k > math.floor(thr)
    elif tail == "lower":
        mask = k < math.ceil(thr)
    elif tail == "two-sided":
        mean = Fraction(p) * n
        hi = math.floor(mean + thr)  # X > mean + thr  <=>  X > floor(mean + thr)
        lo = math.ceil(mean - thr)  # X < mean - thr  <=>  X < ceil(mean - thr)
        mask = (k > hi) | (k < lo)
    else:
        raise DomainError(f"unknown tail {tail!r}")
    if not mask.any():
        value = -math.inf
    elif p == 0.0 or p == 1.0:
        value = 0.0 if mask[0 if p == 0.0 else n] else -math.inf
    else:
        value = min(0.0, float(logsumexp(_log_pmf(n, p)[mask])))
    return value if log else math.exp(value)


class ChernoffBounds(NamedTuple):
    upper: float
    lower: float
    two_sided: float


def _check(n, p, delta_):
    if n < 1:
        raise DomainError("n must be at least 1")
    if not 0.0 < p < 1.0:
        raise DomainError("p must lie in (0, 1)")
    if not delta_ > 0.0:
        raise DomainError("Delta must be positive")


def _out(logval: float, log: bool) -> float:
    return logval if log else math.exp(logval)


def chernoff_upper(n: int, p: float, delta_: float, log: bool = False) -> float:
    """Bound on ``P[X/n > p + Delta]``: ``exp(-Delta**2 n / (2p + Delta))``."""
    _check(n, p, delta_)
    return _out(-(delta_**2) * n / (2.0 * p + delta_), log)


def chernoff_lower(n: int, p: float, delta_: float, log: bool = False) -> float:
    """Bound on ``P[X/n < p - Delta]``: ``exp(-Delta**2 n / (2p))``, needs ``Delta < p``."""
    _check(n, p, delta_)
    if not delta_ < p:
        raise DomainError("lower-tail bound needs Delta < p")
    return _out(-(delta_**2) * n / (2.0 * p), log)


def chernoff_two_sided(n: int, p: float, delta_: float, log: bool = False) -> float:
    """Bound on ``P[|X - np| > n Delta]``: ``2 exp(-(n Delta)**2 / (3np))``, needs ``Delta < p``."""
    _check(n, p, delta_)
    if not delta_ < p:
        raise DomainError("two-sided bound needs Delta < p")
    return _out(math.log(2.0) - (n * delta_) ** 2 / (3.0 * n * p), log)


def chernoff_bounds(n: int, p: float, delta_: float) -> ChernoffBounds:
    return ChernoffBounds(
        chernoff_upper(n, p, delta_),
        chernoff_lower(n, p, delta_),
        chernoff_two_sided(n, p, delta_),
    )


# -- analytic error rates of a configuration --------------------------------------


def null_rejection_bounds(config: TesterConfig) -> tuple[float, float]:
    """Bracket the single-round rejection probability when ``D = D*``.

    Under the null every bucket count is ``Bin(t_j, 2**-j)``.  The largest
    single-bucket rejection probability is a lower bound, the union bound
    over all buckets of all levels an upper bound (capped at 1).
    """
    lower = 0.0
    upper = 0.0
    for j in range(1, config.levels + 1):
        lp = level_params(config, j)
        t, scale, lim = lp.t_j, lp.bucket_count, lp.reject_limit
        # |Z * 2**j - t| > lim  <=>  Z > floor((t + lim) / 2**j)  or  Z < ceil((t - lim) / 2**j)
        hi = (t + lim) // scale
        lo = -((lim - t) // scale)
        pr = float(binom.sf(hi, t, 1.0 / scale) + binom.cdf(lo - 1, t, 1.0 / scale))
        lower = max(lower, pr)
        upper += scale * pr
    return lower, min(upper, 1.0)


# -- certification catalog -----------------------------------------------------------


def certification_catalog(eps: float) -> list[tuple[str, object, object]]:
    """Analytic ``(name, unknown, reference)`` pairs at Kolmogorov distance >= ``eps``."""
    u = uniform_unit()
    skewed = piecewise_linear([0.0, 0.3, 1.0], [0.0, 0.6, 1.0])
    pairs: list[tuple[str, object, object]] = []
    for center in (0.2, 0.37, 0.5, 0.75):
        pairs.append((f"wedge-c{center}", wedge_perturb(u, eps, center), u))
        wide = min(1.5 * eps, 0.95 * min(center, 1.0 - center))
        pairs.append((f"wedge-wide-c{center}", wedge_perturb(u, max(wide, eps), center), u))
        pairs.append((f"wedge-skewed-c{center}", wedge_perturb(skewed, eps, center), skewed))
    for a in (0.05, 0.3, 0.55, 0.8):
        h = 0.1
        bump = piecewise_linear([a, a + h], [0.0, 1.0])
        reach = max(a, 1.0 - a - h)
        w = min(1.0, eps / reach * (1.0 + 1e-9))
        pairs.append((f"bump-mix-a{a}", mixture([u, bump], [1.0 - w, w]), u))
    pairs.append(("shift", piecewise_linear([eps, 1.0 + eps], [0.0, 1.0]), u))
    pairs.append(("squeeze", piecewise_linear([0.0, 1.0 - eps], [0.0, 1.0]), u))
    ten = [i for i in range(10)]
    ref10 = lift(ten, [0.1] * 10)
    moved = [0.1 - eps] + [0.1] * 8 + [0.1 + eps]
    pairs.append(("lifted-tail-move", lift(ten, moved), ref10))
    coin = lift([0.0, 1.0], [0.5, 0.5])
    pairs.append(("lifted-coin", lift([0.0, 1.0], [0.5 - eps, 0.5 + eps]), coin))
    pairs.append(("lifted-shifted-support", lift([0.5 + i for i in range(4)], [0.25] * 4),
                  lift([0.0, 1.0, 2.0, 3.0], [0.25] * 4)))
    pairs.append(("lifted-split-atom", lift([0.0, 2.0, 2.5, 3.0], [0.25, 0.125, 0.375, 0.25]),
                  lift([0.0, 1.0, 2.0, 3.0], [0.25] * 4)))
    for name, d, ref in pairs:
        # the wedge constructions hit eps exactly in the reals, up to one rounding in floats
        dist = exact_kdistance(d, ref)
        if dist < eps - 1e-12:
            raise AssertionError(f"catalog pair {name} at distance {dist} < {eps}")
    return pairs

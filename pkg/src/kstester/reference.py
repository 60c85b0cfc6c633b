"""Reference and synthetic distribution models.

Every model answers exact CDF and quantile queries, draws samples by inverse
transform, and can be round-tripped through a small ``{"kind", "params"}``
dictionary.  Two universes exist:

* real-valued models (:class:`PiecewiseLinearCDF` and its subclasses), whose
  sentinels are ``-inf`` / ``+inf``;
* lifted discrete models (:class:`LiftedDiscrete`), whose values are
  :class:`LiftedValue` pairs ordered lexicographically, which removes atoms
  while keeping the Kolmogorov distance unchanged.
"""

from __future__ import annotations

import bisect
import math
from typing import Any, NamedTuple, Sequence

import numpy as np

__all__ = [
    "DomainError",
    "UnsupportedModel",
    "NEG_INF",
    "POS_INF",
    "LiftedValue",
    "LIFTED_NEG_INF",
    "LIFTED_POS_INF",
    "PiecewiseLinearCDF",
    "WedgePerturbed",
    "LiftedDiscrete",
    "uniform_unit",
    "piecewise_linear",
    "wedge_perturb",
    "mixture",
    "lift",
    "exact_kdistance",
    "discrete_kdistance",
    "model_from_dict",
]


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class UnsupportedModel(TypeError):
    """The operation needs a model with a finite breakpoint description."""


NEG_INF = -math.inf
POS_INF = math.inf


class LiftedValue(NamedTuple):
    """A sample of ``D x Uniform[0, 1)`` under lexicographic order."""

    base: float
    residual: float


LIFTED_NEG_INF = LiftedValue(-math.inf, 0.0)
LIFTED_POS_INF = LiftedValue(math.inf, 0.0)


def _uniforms(rng: np.random.Generator, size):
    # quantile(0) is the -inf sentinel, so an exact 0.0 draw is nudged into (0, 1)
    u = rng.random(size)
    if size is None:
        return u if u > 0.0 else math.ulp(0.0)
    u[u == 0.0] = math.ulp(0.0)
    return u


class PiecewiseLinearCDF:
    """Continuous distribution whose CDF interpolates linearly between knots.

    ``xs`` must be strictly increasing and finite; ``cdf_values`` must be
    nondecreasing, start at 0 and end at 1.  Flat stretches (gaps in the
    support) are allowed.
    """

    kind = "piecewise-linear-cdf"
    lifted = False

    def __init__(self, xs: Sequence[float], cdf_values: Sequence[float]):
        xs = np.asarray(xs, dtype=float)
        fs = np.asarray(cdf_values, dtype=float)
        if xs.ndim != 1 or xs.shape != fs.shape or xs.size < 2:
            raise DomainError("need at least two knots with matching CDF values")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(fs))):
            raise DomainError("knots must be finite")
        if np.any(np.diff(xs) <= 0):
            raise DomainError("knot positions must be strictly increasing")
        if np.any(np.diff(fs) < 0):
            raise DomainError("CDF values must be nondecreasing")
        if fs[0] != 0.0 or fs[-1] != 1.0:
            raise DomainError("CDF must rise from 0 at the first knot to 1 at the last")
        self.xs = xs
        self.fs = fs
        self.xs.setflags(write=False)
        self.fs.setflags(write=False)

    @property
    def breakpoints(self) -> np.ndarray:
        return self.xs

    def cdf(self, x):
        """``P[D <= x]``; works on scalars and arrays, sentinels map to 0 and 1."""
        out = np.interp(x, self.xs, self.fs)
        return float(out) if np.ndim(out) == 0 else out

    def quantile(self, p):
        """Return ``q_p = sup{y : cdf(y) <= p}`` with ``q_0 = -inf`` and ``q_1 = +inf``."""
        p_arr = np.asarray(p, dtype=float)
        if np.any(~((p_arr >= 0.0) & (p_arr <= 1.0))):
            raise DomainError("quantile level must lie in [0, 1]")
        flat = np.atleast_1d(p_arr)
        out = np.empty_like(flat)
        out[flat == 0.0] = NEG_INF
        out[flat == 1.0] = POS_INF
        inner = (flat > 0.0) & (flat < 1.0)
        if np.any(inner):
            v = flat[inner]
            # last knot whose CDF value is <= v; the segment after it rises strictly past v
            k = np.searchsorted(self.fs, v, side="right") - 1
            x0, x1 = self.xs[k], self.xs[k + 1]
            f0, f1 = self.fs[k], self.fs[k + 1]
            out[inner] = x0 + (v - f0) / (f1 - f0) * (x1 - x0)
        if p_arr.ndim == 0:
            return float(out[0])
        return out.reshape(p_arr.shape)

    def quantiles(self, probs) -> np.ndarray:
        return np.asarray(self.quantile(np.asarray(probs, dtype=float)), dtype=float)

    def sample(self, rng: np.random.Generator, size=None):
        return self.quantile(_uniforms(rng, size))

    def params(self) -> dict[str, Any]:
        return {"x": self.xs.tolist(), "F": self.fs.tolist()}

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "params": self.params()}

    def __repr__(self) -> str:
        return f"{type(self).__name__}(knots={self.xs.size})"


class UniformUnit(PiecewiseLinearCDF):
    kind = "uniform-unit"

    def __init__(self):
        super().__init__([0.0, 1.0], [0.0, 1.0])

    def params(self) -> dict[str, Any]:
        return {}

    def __repr__(self) -> str:
        return "UniformUnit()"


class WedgePerturbed(PiecewiseLinearCDF):
    """``base`` with its CDF bent down by ``eps`` at the ``center`` quantile.

    With ``F`` the base CDF the perturbed CDF is ``F * (1 - eps/center)`` up to
    ``F = center`` and ``(center - eps) + (F - center) * (1 + eps/(1 - center))``
    above it, so the Kolmogorov distance to ``base`` is exactly ``eps``.
    """

    kind = "wedge-perturbed"

    def __init__(self, base: PiecewiseLinearCDF, eps: float, center: float):
        if not isinstance(base, PiecewiseLinearCDF):
            raise UnsupportedModel("wedge perturbation needs a piecewise-linear base")
        if not 0.0 < center < 1.0:
            raise DomainError("center must lie in (0, 1)")
        if not 0.0 <= eps < min(center, 1.0 - center):
            raise DomainError(f"eps must lie in [0, {min(center, 1.0 - center)})")
        self.base = base
        self.eps = float(eps)
        self.center = float(center)
        xs = base.xs
        fs = base.fs
        pivot = base.quantile(center)
        if not np.any(xs == pivot):
            k = int(np.searchsorted(xs, pivot))
            xs = np.insert(xs, k, pivot)
            fs = np.insert(fs, k, center)
        g = np.where(
            fs <= center,
            fs * (1.0 - eps / center),
            (center - eps) + (fs - center) * (1.0 + eps / (1.0 - center)),
        )
        g[0], g[-1] = 0.0, 1.0
        super().__init__(xs, g)

    def params(self) -> dict[str, Any]:
        return {"base": self.base.to_dict(), "eps": self.eps, "center": self.center}

    def __repr__(self) -> str:
        return f"WedgePerturbed(base={self.base!r}, eps={self.eps}, center={self.center})"


class LiftedDiscrete:
    """A finite discrete distribution lifted to ``U x [0, 1)``.

    The lifted CDF at ``(a, u)`` is ``P[X < a] + P[X = a] * u``, which is
    continuous, so the lifted distribution has no atoms.
    """

    kind = "discrete-pmf-lifted"
    lifted = True

    def __init__(self, atoms: Sequence[float], weights: Sequence[float]):
        pairs = sorted(zip((float(a) for a in atoms), (float(w) for w in weights)))
        if not pairs:
            raise DomainError("need at least one atom")
        merged: dict[float, float] = {}
        for a, w in pairs:
            if not math.isfinite(a):
                raise DomainError("atoms must be finite")
            if w < 0.0:
                raise DomainError("weights must be nonnegative")
            merged[a] = merged.get(a, 0.0) + w
        self.atoms = tuple(a for a, w in merged.items() if w > 0.0)
        self.weights = tuple(w for w in merged.values() if w > 0.0)
        total = math.fsum(self.weights)
        if abs(total - 1.0) > 1e-12:
            raise DomainError(f"weights sum to {total}, not 1")
        cum = np.cumsum(self.weights)
        cum[-1] = 1.0
        # cumulative mass strictly below / up to each atom
        self._below = tuple([0.0] + cum[:-1].tolist())
        self._upto = tuple(cum.tolist())

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return self.atoms

    def atom_cdf(self, x: float) -> float:
        """CDF of the underlying (unlifted) discrete distribution."""
        k = bisect.bisect_right(self.atoms, x)
        return 0.0 if k == 0 else self._upto[k - 1]

    def atom_cdf_left(self, x: float) -> float:
        """``P[X < x]`` for the underlying discrete distribution."""
        k = bisect.bisect_left(self.atoms, x)
        return 0.0 if k == 0 else self._upto[k - 1]

    def _cdf_one(self, v) -> float:
        if not isinstance(v, tuple):
            if v == NEG_INF:
                return 0.0
            if v == POS_INF:
                return 1.0
            raise UnsupportedModel("lifted models are evaluated at LiftedValue points")
        base, residual = v
        k = bisect.bisect_left(self.atoms, base)
        below = 0.0 if k == 0 else self._upto[k - 1]
        if k < len(self.atoms) and self.atoms[k] == base:
            return below + self.weights[k] * min(max(residual, 0.0), 1.0)
        return below

    def cdf(self, v):
        if isinstance(v, list):
            return [self._cdf_one(x) for x in v]
        return self._cdf_one(v)

    def _quantile_one(self, p: float) -> LiftedValue:
        if not 0.0 <= p <= 1.0:
            raise DomainError("quantile level must lie in [0, 1]")
        if p == 0.0:
            return LIFTED_NEG_INF
        if p == 1.0:
            return LIFTED_POS_INF
        # first atom whose cumulative mass exceeds p; exact hits move to the next atom's start
        k = bisect.bisect_right(self._upto, p)
        residual = (p - self._below[k]) / self.weights[k]
        return LiftedValue(self.atoms[k], min(max(residual, 0.0), 1.0))

    def quantile(self, p):
        if np.ndim(p) == 0:
            return self._quantile_one(float(p))
        return [self._quantile_one(float(x)) for x in np.asarray(p, dtype=float)]

    def quantiles(self, probs) -> list[LiftedValue]:
        return [self._quantile_one(float(x)) for x in np.asarray(probs, dtype=float)]

    def sample(self, rng: np.random.Generator, size=None):
        u = _uniforms(rng, size)
        if size is None:
            return self._quantile_one(float(u))
        return [self._quantile_one(float(x)) for x in u]

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "params": {"atoms": list(self.atoms), "weights": list(self.weights)},
        }

    def __repr__(self) -> str:
        return f"LiftedDiscrete(atoms={len(self.atoms)})"


def uniform_unit() -> PiecewiseLinearCDF:
    return UniformUnit()


def piecewise_linear(xs: Sequence[float], cdf_values: Sequence[float]) -> PiecewiseLinearCDF:
    return PiecewiseLinearCDF(xs, cdf_values)


def wedge_perturb(
    base: PiecewiseLinearCDF | None = None, eps: float = 0.1, center: float = 0.5
) -> WedgePerturbed:
    """Build a model at Kolmogorov distance exactly ``eps`` from ``base``."""
    if base is None:
        base = uniform_unit()
    if eps <= 0.0:
        raise DomainError("eps must be positive")
    return WedgePerturbed(base, eps, center)


def mixture(models: Sequence[PiecewiseLinearCDF], weights: Sequence[float]) -> PiecewiseLinearCDF:
    """Finite mixture of piecewise-linear models, itself piecewise linear."""
    if len(models) != len(weights) or not models:
        raise DomainError("need one weight per model")
    if any(not isinstance(m, PiecewiseLinearCDF) for m in models):
        raise UnsupportedModel("mixtures are only formed from piecewise-linear models")
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise DomainError("mixture weights must be nonnegative and sum to 1")
    xs = np.unique(np.concatenate([m.xs for m in models]))
    fs = sum(wi * m.cdf(xs) for wi, m in zip(w, models))
    fs = np.maximum.accumulate(np.clip(fs, 0.0, 1.0))
    fs[0], fs[-1] = 0.0, 1.0
    return PiecewiseLinearCDF(xs, fs)


def lift(atoms: Sequence[float] | dict, weights: Sequence[float] | None = None) -> LiftedDiscrete:
    """Lift a discrete pmf, given as a mapping or as parallel sequences."""
    if isinstance(atoms, dict):
        atoms, weights = list(atoms.keys()), list(atoms.values())
    if weights is None:
        raise DomainError("weights are required")
    return LiftedDiscrete(atoms, weights)


def discrete_kdistance(a: LiftedDiscrete, b: LiftedDiscrete) -> float:
    """Kolmogorov distance between the *unlifted* step CDFs of two pmfs."""
    support = sorted(set(a.atoms) | set(b.atoms))
    return max(abs(a.atom_cdf(x) - b.atom_cdf(x)) for x in support)


def exact_kdistance(a, b) -> float:
    """``sup_x |CDF_a(x) - CDF_b(x)|`` for two models of the same universe.

    Piecewise-linear pairs are compared at the union of their knots: the
    difference is linear between consecutive knots, so its absolute value
    peaks at one of them.  Lifted pairs are compared at the left and right
    limits of every atom, the extremes of each linear residual piece.
    """
    if isinstance(a, PiecewiseLinearCDF) and isinstance(b, PiecewiseLinearCDF):
        xs = np.union1d(a.xs, b.xs)
        return float(np.max(np.abs(a.cdf(xs) - b.cdf(xs))))
    if isinstance(a, LiftedDiscrete) and isinstance(b, LiftedDiscrete):
        best = 0.0
        for x in sorted(set(a.atoms) | set(b.atoms)):
            left = a.cdf(LiftedValue(x, 0.0)) - b.cdf(LiftedValue(x, 0.0))
            right = a.cdf(LiftedValue(x, 1.0)) - b.cdf(LiftedValue(x, 1.0))
            best = max(best, abs(left), abs(right))
        return best
    raise UnsupportedModel(
        f"cannot compare {type(a).__name__} with {type(b).__name__}: "
        "need two piecewise-linear or two lifted discrete models"
    )


def model_from_dict(spec: dict[str, Any]):
    """Inverse of ``model.to_dict()``."""
    try:
        kind = spec["kind"]
    except (KeyError, TypeError):
        raise DomainError("model description needs a 'kind' field") from None
    params = spec.get("params", {}) or {}
    if kind == "uniform-unit":
        return uniform_unit()
    if kind == "piecewise-linear-cdf":
        return piecewise_linear(params["x"], params["F"])
    if kind == "discrete-pmf-lifted":
        if "pmf" in params:
            pmf = {float(k): float(v) for k, v in params["pmf"].items()}
            return lift(pmf)
        return lift(params["atoms"], params["weights"])
    if kind == "wedge-perturbed":
        base = model_from_dict(params["base"]) if "base" in params else uniform_unit()
        return wedge_perturb(base, float(params["eps"]), float(params.get("center", 0.5)))
    if kind == "mixture":
        comps = [model_from_dict(m) for m in params["models"]]
        return mixture(comps, params["weights"])
    raise DomainError(f"unknown model kind {kind!r}")

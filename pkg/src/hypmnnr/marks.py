"""Mark distributions and control sets.

Marks are dimensionless resource levels. A :class:`MarkModel` is the common
mark law of the point process; a :class:`ControlSet` is the symmetric set of
mark pairs that are allowed to cooperate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, special, stats

from .errors import InvalidArgumentError, UnsupportedOperationError

_NORMALIZATION_TOL = 1e-8


class MarkModel:
    """Common interface of the mark laws."""

    kind: str = ""

    @property
    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    @property
    def has_density(self) -> bool:
        return True

    def density(self, z):
        raise NotImplementedError

    def cdf(self, z):
        raise NotImplementedError

    def ppf(self, u):
        raise NotImplementedError

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    @property
    def spec(self) -> str:
        raise NotImplementedError

    def _check_normalized(self):
        lo, hi = self.support
        total, _ = integrate.quad(self.density, lo, hi, epsabs=1e-12, epsrel=1e-12, limit=200)
        if abs(total - 1.0) > _NORMALIZATION_TOL:
            raise InvalidArgumentError(f"{self.spec}: density integrates to {total}, not 1")


@dataclass(frozen=True)
class DegenerateMarks(MarkModel):
    """Every atom carries the same mark ``mu``; there is no density."""

    mu: float
    kind: str = field(default="degenerate", init=False)

    def __post_init__(self):
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise InvalidArgumentError(f"degenerate mark must be positive, got {self.mu}")

    @property
    def support(self):
        return (self.mu, self.mu)

    @property
    def has_density(self):
        return False

    def density(self, z):
        raise UnsupportedOperationError(
            "degenerate marks have no density; use the closed-form degenerate path")

    def cdf(self, z):
        return np.where(np.asarray(z, dtype=float) >= self.mu, 1.0, 0.0)

    def ppf(self, u):
        return np.full(np.shape(u), self.mu, dtype=float)

    def sample(self, n, rng):
        return np.full(int(n), self.mu, dtype=float)

    @property
    def mean(self):
        return self.mu

    @property
    def variance(self):
        return 0.0

    @property
    def spec(self):
        return f"degenerate:mu={self.mu!r}"


@dataclass(frozen=True)
class BetaMarks(MarkModel):
    """Beta law on (0, 1), stored by its shape parameters."""

    alpha: float
    beta: float
    kind: str = field(default="beta", init=False)

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise InvalidArgumentError(f"beta shapes must be positive, got {self.alpha}, {self.beta}")
        object.__setattr__(self, "_dist", stats.beta(self.alpha, self.beta))
        self._check_normalized()

    def _check_normalized(self):
        if min(self.alpha, self.beta) < 1.0:
            # algebraic endpoint weights keep quad exact for singular densities
            norm = math.exp(special.betaln(self.alpha, self.beta))
            total, _ = integrate.quad(lambda w: 1.0 / norm, 0.0, 1.0, weight="alg",
                                      wvar=(self.alpha - 1.0, self.beta - 1.0),
                                      epsabs=1e-13, epsrel=1e-12)
        else:
            # peaked densities: make sure the bulk is not stepped over
            pts = special.betaincinv(self.alpha, self.beta, [1e-9, 0.1, 0.5, 0.9, 1 - 1e-9])
            total, _ = integrate.quad(self._dist.pdf, 0.0, 1.0, points=pts,
                                      epsabs=1e-13, epsrel=1e-12, limit=200)
        if abs(total - 1.0) > _NORMALIZATION_TOL:
            raise InvalidArgumentError(f"{self.spec}: density integrates to {total}, not 1")

    @property
    def support(self):
        return (0.0, 1.0)

    def density(self, z):
        z = np.asarray(z, dtype=float)
        inside = (z > 0.0) & (z < 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(inside, self._dist.pdf(np.where(inside, z, 0.5)), 0.0)
        return out if out.ndim else float(out)

    def cdf(self, z):
        return special.betainc(self.alpha, self.beta, np.clip(np.asarray(z, dtype=float), 0.0, 1.0))

    def ppf(self, u):
        return special.betaincinv(self.alpha, self.beta, np.asarray(u, dtype=float))

    def sample(self, n, rng):
        out = rng.beta(self.alpha, self.beta, size=int(n))
        # underflow to exactly 0 is possible for tiny shapes; redraw those
        bad = out <= 0.0
        while np.any(bad):
            out[bad] = rng.beta(self.alpha, self.beta, size=int(bad.sum()))
            bad = out <= 0.0
        return out

    @property
    def mean(self):
        return self.alpha / (self.alpha + self.beta)

    @property
    def variance(self):
        a, b = self.alpha, self.beta
        return a * b / ((a + b) ** 2 * (a + b + 1.0))

    @property
    def spec(self):
        return f"beta:mean={self.mean!r},var={self.variance!r}"


@dataclass(frozen=True)
class UniformMarks(MarkModel):
    lo: float
    hi: float
    kind: str = field(default="uniform", init=False)

    def __post_init__(self):
        if not (0 < self.lo < self.hi and math.isfinite(self.hi)):
            raise InvalidArgumentError(f"uniform marks need 0 < lo < hi, got {self.lo}, {self.hi}")
        self._check_normalized()

    @property
    def support(self):
        return (self.lo, self.hi)

    def density(self, z):
        z = np.asarray(z, dtype=float)
        out = np.where((z >= self.lo) & (z <= self.hi), 1.0 / (self.hi - self.lo), 0.0)
        return out if out.ndim else float(out)

    def cdf(self, z):
        return np.clip((np.asarray(z, dtype=float) - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def ppf(self, u):
        return self.lo + (self.hi - self.lo) * np.asarray(u, dtype=float)

    def sample(self, n, rng):
        return rng.uniform(self.lo, self.hi, size=int(n))

    @property
    def mean(self):
        return 0.5 * (self.lo + self.hi)

    @property
    def variance(self):
        return (self.hi - self.lo) ** 2 / 12.0

    @property
    def spec(self):
        return f"uniform:lo={self.lo!r},hi={self.hi!r}"


def beta_from_mean_var(mean: float, var: float) -> BetaMarks:
    """Beta law with the given first two moments."""
    if not 0 < mean < 1:
        raise InvalidArgumentError(f"beta mean must lie in (0, 1), got {mean}")
    bound = mean * (1.0 - mean)
    if not 0 < var < bound:
        raise InvalidArgumentError(f"beta variance must lie in (0, {bound}), got {var}")
    k = bound / var - 1.0
    return BetaMarks(mean * k, (1.0 - mean) * k)


def density(m: MarkModel, z):
    return m.density(z)


def sample_marks(m: MarkModel, n: int, rng: np.random.Generator) -> np.ndarray:
    if n < 0:
        raise InvalidArgumentError(f"sample size must be >= 0, got {n}")
    out = m.sample(n, rng)
    lo, hi = m.support
    assert np.all((out > 0) & (out >= lo) & (out <= hi)), "mark draw outside support"
    return out


# --------------------------------------------------------------------------
# control sets


class ControlSet:
    kind: str = ""

    def contains(self, z, zt):
        """Vectorized membership of the mark pairs ``(z, zt)``."""
        raise NotImplementedError

    @property
    def spec(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class FullControl(ControlSet):
    kind: str = field(default="full", init=False)

    def contains(self, z, zt):
        return np.ones(np.broadcast(np.asarray(z), np.asarray(zt)).shape, dtype=bool)

    @property
    def spec(self):
        return "full"


@dataclass(frozen=True)
class EmptyControl(ControlSet):
    kind: str = field(default="empty", init=False)

    def contains(self, z, zt):
        return np.zeros(np.broadcast(np.asarray(z), np.asarray(zt)).shape, dtype=bool)

    @property
    def spec(self):
        return "empty"


@dataclass(frozen=True)
class MinProduct(ControlSet):
    """Pairs whose mark product is at least ``tau``."""

    tau: float
    kind: str = field(default="minproduct", init=False)

    def contains(self, z, zt):
        return np.asarray(z) * np.asarray(zt) >= self.tau

    @property
    def spec(self):
        return f"minproduct:tau={self.tau!r}"


@dataclass(frozen=True)
class MaxRatio(ControlSet):
    """Pairs whose larger mark is at most ``rho`` times the smaller one."""

    rho: float
    kind: str = field(default="maxratio", init=False)

    def __post_init__(self):
        if not self.rho >= 1:
            raise InvalidArgumentError(f"ratio bound must be >= 1, got {self.rho}")

    def contains(self, z, zt):
        z = np.asarray(z, dtype=float)
        zt = np.asarray(zt, dtype=float)
        return np.maximum(z, zt) <= self.rho * np.minimum(z, zt)

    @property
    def spec(self):
        return f"maxratio:rho={self.rho!r}"


@dataclass(frozen=True)
class CustomControl(ControlSet):
    """User predicate; must be pure and symmetric.

    Symmetry is checked on 10**4 random log-uniform mark pairs when the set is
    built.
    """

    predicate: Callable[[float, float], bool]
    name: str = "custom"
    kind: str = field(default="custom", init=False)

    def __post_init__(self):
        rng = np.random.default_rng(20160613)
        z = np.exp(rng.uniform(math.log(1e-3), math.log(1e3), 10_000))
        zt = np.exp(rng.uniform(math.log(1e-3), math.log(1e3), 10_000))
        if np.any(self.contains(z, zt) != self.contains(zt, z)):
            raise InvalidArgumentError(f"control set {self.name!r} is not symmetric")

    def contains(self, z, zt):
        z, zt = np.broadcast_arrays(np.asarray(z, dtype=float), np.asarray(zt, dtype=float))
        try:
            out = np.asarray(self.predicate(z, zt), dtype=bool)
            if out.shape == z.shape:
                return out
        except (TypeError, ValueError):
            pass
        return np.vectorize(lambda a, b: bool(self.predicate(float(a), float(b))), otypes=[bool])(z, zt)

    @property
    def spec(self):
        return self.name


def control_contains(D: ControlSet, z: float, zt: float) -> bool:
    return bool(D.contains(z, zt))


# --------------------------------------------------------------------------
# textual specs: ``beta:mean=0.5,var=0.05``, ``minproduct:tau=0.25`` ...


def _parse_kv(text: str) -> tuple[str, dict[str, float]]:
    name, _, rest = text.strip().partition(":")
    params = {}
    if rest.strip():
        for item in rest.split(","):
            key, eq, value = item.partition("=")
            if not eq:
                raise InvalidArgumentError(f"malformed parameter {item!r} in {text!r}")
            try:
                params[key.strip()] = float(value)
            except ValueError:
                raise InvalidArgumentError(f"parameter {key.strip()!r} in {text!r} is not a number") from None
    return name.strip().lower(), params


def _take(params: dict, keys: tuple[str, ...], text: str) -> list[float]:
    if set(params) != set(keys):
        raise InvalidArgumentError(f"{text!r}: expected parameters {', '.join(keys)}")
    return [params[k] for k in keys]


def parse_mark_model(text: str) -> MarkModel:
    name, params = _parse_kv(text)
    if name == "degenerate":
        return DegenerateMarks(*_take(params, ("mu",), text))
    if name == "beta":
        return beta_from_mean_var(*_take(params, ("mean", "var"), text))
    if name == "uniform":
        return UniformMarks(*_take(params, ("lo", "hi"), text))
    raise InvalidArgumentError(f"unknown mark model {name!r}")


def parse_control_set(text: str) -> ControlSet:
    name, params = _parse_kv(text)
    if name == "full":
        _take(params, (), text)
        return FullControl()
    if name == "empty":
        _take(params, (), text)
        return EmptyControl()
    if name == "minproduct":
        return MinProduct(*_take(params, ("tau",), text))
    if name == "maxratio":
        return MaxRatio(*_take(params, ("rho",), text))
    raise InvalidArgumentError(f"unknown control set {name!r}")

"""Motility and source families, initial data, and assumption checks.

Every family is a closed form with exact derivatives so that tail behaviour
and the branch decisions downstream are decidable.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import ClassVar

import numpy as np

from .grid import Field, Grid


class ConstructionError(ValueError):
    """Raised when a spec or an initial field violates its admissibility rules."""


def _check_domain(s):
    arr = np.asarray(s, dtype=np.float64)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError("argument must be nonnegative")
    return arr


def _out(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


# ---------------------------------------------------------------- motility

@dataclass(frozen=True)
class MotilitySpec:
    kind: ClassVar[str] = ""
    registry: ClassVar[dict[str, type]] = {}

    def __init_subclass__(cls, **kw):
        super().__init_subclass__(**kw)
        MotilitySpec.registry[cls.kind] = cls

    def gamma(self, s):
        arr = _check_domain(s)
        return _out(self._g(arr), s)

    def dgamma(self, s):
        arr = _check_domain(s)
        return _out(self._dg(arr), s)

    def d2gamma(self, s):
        arr = _check_domain(s)
        return _out(self._d2g(arr), s)

    def to_dict(self) -> dict:
        return {"kind": self.kind, **asdict(self)}

    @staticmethod
    def from_dict(d: dict) -> "MotilitySpec":
        d = dict(d)
        kind = d.pop("kind")
        try:
            cls = MotilitySpec.registry[kind]
        except KeyError:
            raise ConstructionError(f"unknown motility kind {kind!r}") from None
        return cls(**d)


@dataclass(frozen=True)
class ExpDecay(MotilitySpec):
    """gamma(s) = exp(-chi s)."""

    kind: ClassVar[str] = "exp_decay"
    chi: float = 1.0

    def __post_init__(self):
        if not self.chi > 0:
            raise ConstructionError("ExpDecay needs chi > 0")

    def _g(self, s):
        return np.exp(-self.chi * s)

    def _dg(self, s):
        return -self.chi * np.exp(-self.chi * s)

    def _d2g(self, s):
        return self.chi**2 * np.exp(-self.chi * s)


@dataclass(frozen=True)
class PowerDecay(MotilitySpec):
    """gamma(s) = (1 + s)^(-k)."""

    kind: ClassVar[str] = "power_decay"
    k: float = 1.0

    def __post_init__(self):
        if not self.k > 0:
            raise ConstructionError("PowerDecay needs k > 0")

    def _g(self, s):
        return (1.0 + s) ** (-self.k)

    def _dg(self, s):
        return -self.k * (1.0 + s) ** (-self.k - 1.0)

    def _d2g(self, s):
        return self.k * (self.k + 1.0) * (1.0 + s) ** (-self.k - 2.0)


@dataclass(frozen=True)
class LogGrowth(MotilitySpec):
    """gamma(s) = c + log(1 + s); non-decreasing and concave."""

    kind: ClassVar[str] = "log_growth"
    c: float = 1.0

    def __post_init__(self):
        if not self.c > 0:
            raise ConstructionError("LogGrowth needs c > 0 so that gamma(0) > 0")

    def _g(self, s):
        return self.c + np.log1p(s)

    def _dg(self, s):
        return 1.0 / (1.0 + s)

    def _d2g(self, s):
        return -1.0 / (1.0 + s) ** 2


@dataclass(frozen=True)
class AffineOsc(MotilitySpec):
    """gamma(s) = a + s + b sin(s); unbounded and, for |b| > 1, non-monotone."""

    kind: ClassVar[str] = "affine_osc"
    a: float = 3.0
    b: float = 2.0

    def __post_init__(self):
        if not self.a > abs(self.b):
            raise ConstructionError("AffineOsc needs a > |b| to keep gamma positive")

    def _g(self, s):
        return self.a + s + self.b * np.sin(s)

    def _dg(self, s):
        return 1.0 + self.b * np.cos(s)

    def _d2g(self, s):
        return -self.b * np.sin(s)


@dataclass(frozen=True)
class Constant(MotilitySpec):
    kind: ClassVar[str] = "constant"
    c: float = 1.0

    def __post_init__(self):
        if not self.c > 0:
            raise ConstructionError("Constant motility needs c > 0")

    def _g(self, s):
        return np.full_like(s, self.c, dtype=np.float64)

    def _dg(self, s):
        return np.zeros_like(s, dtype=np.float64)

    def _d2g(self, s):
        return np.zeros_like(s, dtype=np.float64)


def eval_gamma(spec: MotilitySpec, s):
    return spec.gamma(s)


# ---------------------------------------------------------------- source

@dataclass(frozen=True)
class SourceSpec:
    kind: ClassVar[str] = ""
    registry: ClassVar[dict[str, type]] = {}

    def __init_subclass__(cls, **kw):
        super().__init_subclass__(**kw)
        SourceSpec.registry[cls.kind] = cls

    def f(self, s):
        arr = _check_domain(s)
        return _out(self._f(arr), s)

    def df(self, s):
        arr = _check_domain(s)
        return _out(self._df(arr), s)

    def to_dict(self) -> dict:
        return {"kind": self.kind, **asdict(self)}

    @staticmethod
    def from_dict(d: dict) -> "SourceSpec":
        d = dict(d)
        kind = d.pop("kind")
        try:
            cls = SourceSpec.registry[kind]
        except KeyError:
            raise ConstructionError(f"unknown source kind {kind!r}") from None
        return cls(**d)


@dataclass(frozen=True)
class LogPower(SourceSpec):
    """f(s) = lam * log(1+s)**alpha - mu."""

    kind: ClassVar[str] = "log_power"
    lam: float = 1.0
    alpha: float = 1.0
    mu: float = 0.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ConstructionError("LogPower needs lam > 0")
        if not 0 < self.alpha <= 1:
            raise ConstructionError("LogPower needs 0 < alpha <= 1")

    def _f(self, s):
        return self.lam * np.log1p(s) ** self.alpha - self.mu

    def _df(self, s):
        with np.errstate(divide="ignore"):
            return self.lam * self.alpha * np.log1p(s) ** (self.alpha - 1.0) / (1.0 + s)

    def equilibrium(self) -> float:
        """Positive root of f, or 0 when mu <= 0."""
        if self.mu <= 0:
            return 0.0
        return math.expm1((self.mu / self.lam) ** (1.0 / self.alpha))


@dataclass(frozen=True)
class Zero(SourceSpec):
    kind: ClassVar[str] = "zero"

    def _f(self, s):
        return np.zeros_like(s, dtype=np.float64)

    def _df(self, s):
        return np.zeros_like(s, dtype=np.float64)


@dataclass(frozen=True)
class Logistic(SourceSpec):
    """f(s) = mu (s - 1). Quadratic degradation; violates the sublog growth cap."""

    kind: ClassVar[str] = "logistic"
    mu: float = 1.0

    def __post_init__(self):
        if not self.mu > 0:
            raise ConstructionError("Logistic needs mu > 0")

    def _f(self, s):
        return self.mu * (s - 1.0)

    def _df(self, s):
        return np.full_like(s, self.mu, dtype=np.float64)


def eval_f(spec: SourceSpec, s):
    return spec.f(s)


# ---------------------------------------------------------------- assumptions

TAIL_SAMPLES = (1e4, 1e6, 1e8)
_SUBLOG_SAMPLES = (1e4, 1e8, 1e12, 1e16, 1e20)


def gamma_bounded_at_infinity(m: MotilitySpec) -> bool:
    """Tail test: sampled gamma non-increasing and within 1% of gamma(1e4)."""
    gt = m.gamma(np.array(TAIL_SAMPLES))
    return bool(np.all(np.diff(gt) <= 0) and gt[-1] <= gt[0] * 1.01)


@dataclass
class AssumptionReport:
    gamma_positive: bool
    gamma_bounded_at_infinity: bool
    f_diverges: bool
    f_sublog: bool
    gamma_monotone_concave: bool
    warnings: list[str] = field(default_factory=list)

    @property
    def branch(self) -> str:
        return "bounded" if self.gamma_bounded_at_infinity else "unbounded"

    @property
    def global_bounds_apply(self) -> bool:
        return self.gamma_positive and self.f_diverges and self.f_sublog

    @property
    def u_cap_applies(self) -> bool:
        return self.gamma_positive and self.f_diverges and self.gamma_monotone_concave

    def to_dict(self) -> dict:
        d = asdict(self)
        d["branch"] = self.branch
        return d


def check_assumptions(m: MotilitySpec, f: SourceSpec, s_max: float = 100.0, n_samples: int = 4096) -> AssumptionReport:
    if not s_max > 0 or n_samples < 16:
        raise ValueError("need s_max > 0 and n_samples >= 16")
    warnings: list[str] = []
    s = np.linspace(0.0, s_max, n_samples)
    tail = np.array(TAIL_SAMPLES)
    everywhere = np.concatenate([s, tail])

    # strict positivity on the bulk range; far-tail samples may underflow to 0
    gamma_positive = bool(np.all(m.gamma(s) > 0) and np.all(m.gamma(tail) >= 0))

    bounded = gamma_bounded_at_infinity(m)
    gt = m.gamma(tail)
    if not bounded and np.all(np.abs(np.diff(gt)) <= 1e-3 * np.abs(gt[0])):
        warnings.append("gamma tail is nearly flat but increasing; bounded-at-infinity test inconclusive")

    ft = f.f(tail)
    diverges = bool(np.all(np.diff(ft) > 0))
    if diverges and ft[-1] - ft[0] < 1e-3 * max(1.0, abs(ft[0])):
        warnings.append("f grows very slowly on the sampled tail; divergence test inconclusive")
    if not diverges:
        warnings.append("f does not grow on the sampled tail: f must diverge, constants relying on it are unavailable")

    st = np.array(_SUBLOG_SAMPLES)
    ratio = f.f(st) / np.log(st)
    steps = np.abs(np.diff(ratio))
    sublog = bool(np.all(steps[1:] <= steps[:-1] * (1 + 1e-9) + 1e-12))
    if not sublog:
        warnings.append("f(s)/log s grows on the tail: superlogarithmic source, bound checks disabled")

    dg = m.dgamma(everywhere)
    d2g = m.d2gamma(everywhere)
    monotone_concave = bool(np.all(dg >= 0) and np.all(d2g <= 0))

    return AssumptionReport(gamma_positive, bounded, diverges, sublog, monotone_concave, warnings)


# ---------------------------------------------------------------- initial data

@dataclass(frozen=True)
class InitialConditionSpec:
    kind: ClassVar[str] = ""
    registry: ClassVar[dict[str, type]] = {}

    def __init_subclass__(cls, **kw):
        super().__init_subclass__(**kw)
        InitialConditionSpec.registry[cls.kind] = cls

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        for k, v in asdict(self).items():
            if v is not None:
                d[k] = list(v) if isinstance(v, tuple) else v
        return d

    @staticmethod
    def from_dict(d: dict) -> "InitialConditionSpec":
        d = dict(d)
        kind = d.pop("kind")
        try:
            cls = InitialConditionSpec.registry[kind]
        except KeyError:
            raise ConstructionError(f"unknown initial condition kind {kind!r}") from None
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


@dataclass(frozen=True)
class ConstantIC(InitialConditionSpec):
    kind: ClassVar[str] = "constant"
    c: float = 1.0

    def values(self, grid: Grid, rng=None) -> np.ndarray:
        return np.full(grid.shape, float(self.c))


@dataclass(frozen=True)
class GaussianBump(InitialConditionSpec):
    """``floor + amplitude * exp(-|x - center|^2 / (2 width^2))``.

    Giving ``mass`` instead of ``amplitude`` scales the bump so that its
    discrete integral (floor excluded) equals ``mass``.
    """

    kind: ClassVar[str] = "gaussian_bump"
    width: float = 0.1
    amplitude: float | None = None
    floor: float = 0.0
    center: tuple[float, ...] | None = None
    mass: float | None = None

    def __post_init__(self):
        if not self.width > 0:
            raise ConstructionError("GaussianBump needs width > 0")
        if self.amplitude is not None and self.mass is not None:
            raise ConstructionError("give either amplitude or mass, not both")
        if self.floor < 0:
            raise ConstructionError("GaussianBump needs floor >= 0")

    def profile(self, grid: Grid) -> np.ndarray:
        center = self.center if self.center is not None else tuple(e / 2 for e in grid.extent)
        if len(center) != grid.dim:
            raise ConstructionError(f"center {center} does not match grid dimension {grid.dim}")
        r2 = sum((x - c) ** 2 for x, c in zip(grid.mesh(), center))
        return np.exp(-r2 / (2.0 * self.width**2))

    def values(self, grid: Grid, rng=None) -> np.ndarray:
        p = self.profile(grid)
        if self.mass is not None:
            amp = self.mass / (np.sum(p) * grid.cell_volume)
        else:
            amp = 1.0 if self.amplitude is None else self.amplitude
        return self.floor + amp * p


@dataclass(frozen=True)
class PerturbedConstant(InitialConditionSpec):
    """``c + amplitude * sum_k prod_axes cos(k pi x / L)``, plus optional seeded noise."""

    kind: ClassVar[str] = "perturbed_constant"
    c: float = 1.0
    amplitude: float = 0.1
    wave_numbers: tuple[int, ...] = (1,)
    noise: float = 0.0

    def values(self, grid: Grid, rng=None) -> np.ndarray:
        out = np.full(grid.shape, float(self.c))
        mesh = grid.mesh()
        for k in self.wave_numbers:
            term = np.ones(grid.shape)
            for x, L in zip(mesh, grid.extent):
                term = term * np.cos(k * np.pi * x / L)
            out += self.amplitude * term
        if self.noise:
            rng = np.random.default_rng(0) if rng is None else rng
            out += self.noise * self.c * rng.uniform(-1.0, 1.0, grid.shape)
        return out


def init_field(ic: InitialConditionSpec, grid: Grid, seed: int = 0) -> Field:
    vals = ic.values(grid, np.random.default_rng(seed))
    if not np.all(np.isfinite(vals)) or np.any(vals < 0):
        raise ConstructionError("initial density must be finite and nonnegative")
    if not np.max(vals) > 0:
        raise ConstructionError("initial density must not vanish identically")
    return Field(grid, vals)

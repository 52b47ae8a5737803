"""Constructive constants behind the boundedness argument.

Suprema and minima are found by a dense scan followed by repeated 10x
refinement around the extremum; ranges are extended until the relevant
tail predicate holds.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .model import ConstructionError, MotilitySpec, SourceSpec, gamma_bounded_at_infinity


class DivergenceError(ValueError):
    """The source never dominates the requested level on the scanned range."""


class BranchError(ValueError):
    """An operation was asked for on the wrong side of the bounded/unbounded split."""


@dataclass(frozen=True)
class ScanConfig:
    step: float = 1e-3
    s_max: float = 10.0
    refine: int = 10
    levels: int = 5
    tol: float = 1e-6
    max_extent: float = 1e12
    max_points: int = 2_000_000
    gamma_tail: float = 1e8


@dataclass(frozen=True)
class ScanResult:
    value: float
    argmax: float
    s0: float


def sup_scan(g, a: float, b: float, cfg: ScanConfig = ScanConfig()) -> tuple[float, float]:
    """Maximum of a vectorised ``g`` on ``[a, b]`` by scan plus refinement."""
    if b <= a:
        return float(g(np.array([a]))[0]), a
    n = min(int(math.ceil((b - a) / cfg.step)) + 1, cfg.max_points)
    s = np.linspace(a, b, n)
    vals = g(s)
    k = int(np.argmax(vals))
    best, arg = float(vals[k]), float(s[k])
    for _ in range(cfg.levels):
        lo = s[max(k - 1, 0)]
        hi = s[min(k + 1, len(s) - 1)]
        if hi <= lo:
            break
        s = np.linspace(lo, hi, 2 * cfg.refine + 1)
        vals = g(s)
        k = int(np.argmax(vals))
        if vals[k] >= best:
            best, arg = float(vals[k]), float(s[k])
    return best, arg


def _log_power(x: np.ndarray, beta: float) -> np.ndarray:
    if beta == 0:
        return np.ones_like(x)
    if float(beta).is_integer():
        return x ** int(beta)
    return np.sign(x) * np.abs(x) ** beta


def _b1_gap(f: SourceSpec, a1: float, alpha: float, beta: float):
    """s -> a1 s^alpha - s^alpha f(s) log^beta(s), with the s = 0 limit filled in."""

    def g(s):
        s = np.asarray(s, dtype=np.float64)
        out = np.zeros_like(s)
        pos = s > 0
        sp = s[pos]
        sa = sp**alpha
        out[pos] = a1 * sa - sa * f.f(sp) * _log_power(np.log(sp), beta)
        return out

    return g


def scan_b1(f: SourceSpec, a1: float, alpha: float, beta: float, scan: ScanConfig = ScanConfig()) -> ScanResult:
    if not (a1 > 0 and alpha > 0 and beta >= 0):
        raise ValueError("need a1 > 0, alpha > 0, beta >= 0")

    def excess(s):
        # how far f(s) log^beta(s) sits above a1; must stay positive on the tail
        s = np.asarray(s, dtype=np.float64)
        return f.f(s) * _log_power(np.log(s), beta) - a1

    margin = scan.tol * a1
    S = max(scan.s_max, 2.0)
    while True:
        tail = np.geomspace(S, 1e3 * S, 64)
        if np.all(excess(tail) > margin):
            break
        S *= 4.0
        if S > scan.max_extent:
            raise DivergenceError(
                f"f(s) log^{beta}(s) never exceeds a1={a1} on [0, {scan.max_extent:g}]: f does not diverge"
            )
    g = _b1_gap(f, a1, alpha, beta)
    n = min(int(math.ceil(S / scan.step)) + 1, scan.max_points)
    s = np.linspace(0.0, S, n)
    above = np.nonzero(excess(s[1:]) <= margin)[0]
    s0 = float(s[1:][above[-1]]) if above.size else 0.0
    value, arg = sup_scan(g, 0.0, S, scan)
    return ScanResult(max(0.0, value), arg, s0)


def compute_b1(f: SourceSpec, a1: float, alpha: float, beta: float, scan: ScanConfig = ScanConfig()) -> float:
    """Smallest b1 >= 0 with s^alpha f(s) log^beta s >= a1 s^alpha - b1 for all s >= 0."""
    return scan_b1(f, a1, alpha, beta, scan).value


def compute_beta1(f: SourceSpec, scan: ScanConfig = ScanConfig()) -> float:
    return compute_b1(f, 1.0, 1.0, 0.0, scan)


def compute_sstar(m: MotilitySpec, vin_max: float, beta1: float, scan: ScanConfig = ScanConfig()) -> float:
    """First level at or above ``max(vin_max, beta1)`` where gamma attains its running maximum."""
    if gamma_bounded_at_infinity(m):
        raise BranchError("s_* is only defined when gamma is unbounded at infinity")
    lower = max(float(vin_max), float(beta1), 0.0)
    g = m.gamma
    peak, _ = sup_scan(g, 0.0, lower, scan)
    peak = max(peak, g(lower))
    if g(lower) >= peak - scan.tol:
        return lower
    a = lower
    width = max(1.0, lower)
    while a < scan.max_extent:
        s = np.linspace(a, a + width, min(int(math.ceil(width / scan.step)) + 1, scan.max_points))
        hit = np.nonzero(g(s) >= peak)[0]
        if hit.size:
            k = int(hit[0])
            if k == 0:
                return float(s[0])
            return float(brentq(lambda x: g(x) - peak, s[k - 1], s[k], xtol=1e-14))
        a = float(s[-1])
        width *= 2.0
    raise BranchError("gamma never regained its running maximum on the scanned range")


def gamma_sup(m: MotilitySpec, scan: ScanConfig = ScanConfig()) -> float:
    """sup of gamma over [0, scan.gamma_tail]: dense near 0, geometric beyond 100."""
    near, arg = sup_scan(m.gamma, 0.0, 100.0, scan)
    far = float(np.max(m.gamma(np.geomspace(100.0, scan.gamma_tail, 20001))))
    return max(near, far)


def compute_vstar(m: MotilitySpec, f: SourceSpec, vin_max: float, scan: ScanConfig = ScanConfig()) -> float:
    return _vstar_parts(m, f, vin_max, scan)["vstar"]


def _vstar_parts(m, f, vin_max, scan):
    if not vin_max > 0:
        raise ConstructionError("vin_max must be positive: the initial density may not vanish identically")
    if gamma_bounded_at_infinity(m):
        gsup = gamma_sup(m, scan)
        b1 = compute_b1(f, gsup + 1.0, 1.0, 0.0, scan)
        return {"branch": "bounded", "vstar": max(vin_max, b1), "sstar": None, "gamma_sup": gsup, "b1_vstar": b1}
    beta1 = compute_beta1(f, scan)
    sstar = compute_sstar(m, vin_max, beta1, scan)
    return {"branch": "unbounded", "vstar": sstar, "sstar": sstar, "gamma_sup": None, "b1_vstar": None}


def gamma_bounds(m: MotilitySpec, vstar: float, scan: ScanConfig = ScanConfig()) -> tuple[float, float, float]:
    """(min gamma, max gamma, max |gamma'|^2 / (2 gamma)) over [0, vstar]."""
    if not vstar > 0:
        raise ValueError("vstar must be positive")
    neg_lo, _ = sup_scan(lambda s: -m.gamma(s), 0.0, vstar, scan)
    hi, _ = sup_scan(m.gamma, 0.0, vstar, scan)
    k, _ = sup_scan(lambda s: m.dgamma(s) ** 2 / (2.0 * m.gamma(s)), 0.0, vstar, scan)
    return -neg_lo, hi, k


class GammaSplit:
    """Increasing/decreasing parts of gamma above ``sstar`` and the antiderivative of the latter.

    Both parts come from separate quadratures of the positive and negative
    parts of gamma'; kinks at sign changes of gamma' are located once and
    handed to the integrator as breakpoints.
    """

    def __init__(self, m: MotilitySpec, sstar: float, kink_step: float = 1e-2):
        self.m = m
        self.sstar = float(sstar)
        self.kink_step = kink_step
        self._covered = self.sstar
        self._kinks: list[float] = []

    def _kinks_until(self, s: float) -> list[float]:
        if s > self._covered:
            hi = max(s, 2.0 * self._covered + 1.0)
            n = int(math.ceil((hi - self._covered) / self.kink_step)) + 1
            grid = np.linspace(self._covered, hi, n)
            d = self.m.dgamma(grid)
            flips = np.nonzero(np.sign(d[:-1]) * np.sign(d[1:]) < 0)[0]
            for k in flips:
                self._kinks.append(brentq(self.m.dgamma, grid[k], grid[k + 1], xtol=1e-14))
            self._covered = hi
        return [k for k in self._kinks if self.sstar < k < s]

    def _quad(self, fn, s):
        val, _ = quad(fn, self.sstar, s, points=self._kinks_until(s) or None, limit=400, epsabs=1e-14, epsrel=1e-13)
        return val

    def gamma_i(self, s: float) -> float:
        if s <= self.sstar:
            return 0.0
        return self._quad(lambda x: max(self.m.dgamma(x), 0.0), s)

    def gamma_d(self, s: float) -> float:
        if s <= self.sstar:
            return 0.0
        return self._quad(lambda x: min(self.m.dgamma(x), 0.0), s)

    def Gamma_d(self, s: float) -> float:
        if s <= self.sstar:
            return 0.0
        # repeated integral written as one: int_{s*}^{s} (s - x) min(gamma'(x), 0) dx
        return self._quad(lambda x: (s - x) * min(self.m.dgamma(x), 0.0), s)


def gamma_split(m: MotilitySpec, sstar: float, s: float) -> tuple[float, float, float]:
    sp = GammaSplit(m, sstar)
    return sp.gamma_i(s), sp.gamma_d(s), sp.Gamma_d(s)


@dataclass
class TheoryConstants:
    branch: str
    vin_max: float
    beta1: float
    vstar: float
    sstar: float | None
    gamma_lo: float
    gamma_hi: float
    k_gamma: float
    gamma_sup: float | None = None
    b1_vstar: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TheoryConstants":
        return cls(**d)


def theory_constants(m: MotilitySpec, f: SourceSpec, vin_max: float, scan: ScanConfig = ScanConfig()) -> TheoryConstants:
    """Full constants pipeline; raises DivergenceError if f fails to diverge."""
    beta1 = compute_beta1(f, scan)
    parts = _vstar_parts(m, f, vin_max, scan)
    lo, hi, k = gamma_bounds(m, parts["vstar"], scan)
    return TheoryConstants(
        branch=parts["branch"],
        vin_max=float(vin_max),
        beta1=beta1,
        vstar=parts["vstar"],
        sstar=parts["sstar"],
        gamma_lo=lo,
        gamma_hi=hi,
        k_gamma=k,
        gamma_sup=parts["gamma_sup"],
        b1_vstar=parts["b1_vstar"],
    )

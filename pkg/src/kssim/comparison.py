"""Scalar comparison ODEs that dominate the sup norms of v and u.

Both equations take a recorded sup-norm trace as a known coefficient
(linear interpolation between samples) and are integrated with classical
fixed-step RK4.
"""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .constants import BranchError, GammaSplit, TheoryConstants
from .model import MotilitySpec


@dataclass(frozen=True)
class ScalarSeries:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.array(self.times, dtype=np.float64)
        y = np.array(self.values, dtype=np.float64)
        if t.ndim != 1 or t.shape != y.shape:
            raise ValueError("times and values must be 1D arrays of equal length")
        if t.size == 0:
            raise ValueError("series is empty")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", y)

    def __len__(self) -> int:
        return self.times.size

    def covers(self, t0: float, t1: float) -> bool:
        slack = 1e-12 * max(1.0, abs(t1))
        return self.times[0] <= t0 + slack and self.times[-1] >= t1 - slack

    def __call__(self, t):
        return np.interp(t, self.times, self.values)

    def to_csv(self, path: str | Path, name: str = "value") -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", name])
            for t, y in zip(self.times, self.values):
                w.writerow([repr(float(t)), repr(float(y))])

    @classmethod
    def from_csv(cls, path: str | Path) -> "ScalarSeries":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        data = np.array([[float(a), float(b)] for a, b in rows[1:]])
        if data.size == 0:
            raise ValueError(f"{path} holds no samples")
        return cls(data[:, 0], data[:, 1])

    @classmethod
    def from_records(cls, records, attr: str) -> "ScalarSeries":
        return cls([r.t for r in records], [getattr(r, attr) for r in records])


def _rk4(rhs: Callable[[float, float], float], y0: float, t_end: float, n_steps: int) -> ScalarSeries:
    ts = np.linspace(0.0, t_end, n_steps + 1)
    ys = np.empty_like(ts)
    ys[0] = y = float(y0)
    h = t_end / n_steps
    for k in range(n_steps):
        t = ts[k]
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        ys[k + 1] = y
    return ScalarSeries(ts, ys)


def _check_inputs(trace: ScalarSeries, t_end: float, n_steps: int) -> None:
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    if n_steps < 1000:
        raise ValueError("need at least 1000 steps (step <= 1e-3 t_end)")
    if not trace.covers(0.0, t_end):
        raise ValueError(
            f"trace covers [{trace.times[0]:g}, {trace.times[-1]:g}], which does not contain [0, {t_end:g}]"
        )


def integrate_V(
    m: MotilitySpec,
    constants: TheoryConstants,
    vinf: ScalarSeries,
    t_end: float,
    n_steps: int = 1000,
) -> ScalarSeries:
    """Supersolution for ``||v||_inf`` when gamma is unbounded.

    dV/dt = [gamma(s*) + gamma_i(vinf)] V + Gamma_d(V) + s* - gamma(V) V - V, V(0) = s*.
    """
    if constants.branch != "unbounded" or constants.sstar is None:
        raise BranchError("the V equation needs the unbounded-gamma branch")
    _check_inputs(vinf, t_end, n_steps)
    sstar = constants.sstar
    split = GammaSplit(m, sstar)
    g_s = m.gamma(sstar)

    def rhs(t, V):
        Vc = max(V, 0.0)
        gi = split.gamma_i(float(vinf(t)))
        return (g_s + gi) * V + split.Gamma_d(Vc) + sstar - m.gamma(Vc) * V - V

    return _rk4(rhs, sstar, t_end, n_steps)


def integrate_U(
    m: MotilitySpec,
    beta1: float,
    uinf: ScalarSeries,
    u0: float,
    t_end: float,
    n_steps: int = 1000,
) -> ScalarSeries:
    """Supersolution for ``||u||_inf``: dU/dt = -U + U gamma'(0) (uinf - U) + beta1, U(0) = u0."""
    if beta1 < 0 or u0 < 0:
        raise ValueError("beta1 and u0 must be nonnegative")
    slope = m.dgamma(0.0)
    if slope < 0:
        raise ValueError("the U equation needs gamma'(0) >= 0")
    _check_inputs(uinf, t_end, n_steps)

    def rhs(t, U):
        return -U + U * slope * (float(uinf(t)) - U) + beta1

    return _rk4(rhs, u0, t_end, n_steps)


@dataclass(frozen=True)
class DominationReport:
    passed: bool
    max_violation: float
    t_worst: float
    tol_rel: float
    samples: int

    def to_dict(self) -> dict:
        return asdict(self)


def check_domination(lower: ScalarSeries, upper: ScalarSeries, tol_rel: float = 0.02) -> DominationReport:
    """Worst of (lower - upper) / (1 + |upper|) over the shared time range, sampled at both grids."""
    t0 = max(lower.times[0], upper.times[0])
    t1 = min(lower.times[-1], upper.times[-1])
    if t0 > t1:
        raise ValueError("series have disjoint time ranges")
    ts = np.union1d(lower.times, upper.times)
    ts = ts[(ts >= t0) & (ts <= t1)]
    lo, up = lower(ts), upper(ts)
    viol = (lo - up) / (1.0 + np.abs(up))
    k = int(np.argmax(viol))
    worst = float(viol[k])
    return DominationReport(worst <= tol_rel, worst, float(ts[k]), tol_rel, int(ts.size))

"""Monitored functionals, key-identity residual, bound checks and regime classification."""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.special import xlogy

from .constants import TheoryConstants
from .grid import Field, grad_sq_norm, helmholtz_array, integrate
from .model import AssumptionReport, MotilitySpec, SourceSpec
from .state import State

CSV_COLUMNS = ("t", "mass", "u_max", "u_min", "v_max", "entropy", "dirichlet", "uf_int", "ki_residual", "dt")


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    mass: float
    u_max: float
    u_min: float
    v_max: float
    entropy: float
    dirichlet: float
    uf_int: float
    ki_residual: float | None
    dt: float

    def csv_row(self) -> list[str]:
        return ["" if getattr(self, c) is None else repr(float(getattr(self, c))) for c in CSV_COLUMNS]

    @classmethod
    def from_csv_row(cls, row: dict) -> "DiagnosticsRecord":
        return cls(**{c: (None if row[c] == "" else float(row[c])) for c in CSV_COLUMNS})


def key_identity_residual(prev: State, nxt: State, m: MotilitySpec, f: SourceSpec, method: str | None = None) -> float:
    """Max-norm defect of ``v_t + gamma(v) u = A^{-1}[gamma(v) u - u f(u)]`` across one step."""
    if prev.grid != nxt.grid:
        raise ValueError("states live on different grids")
    dt = nxt.t - prev.t
    if not dt > 0:
        raise ValueError("states are not consecutive in time (need next.t > prev.t)")
    u0 = prev.u.values
    w = m.gamma(np.maximum(prev.v.values, 0.0)) * u0
    z = helmholtz_array(prev.grid, w - u0 * f.f(u0), method=method)
    defect = (nxt.v.values - prev.v.values) / dt + w - z
    return float(np.max(np.abs(defect)))


def record(
    state: State,
    m: MotilitySpec,
    f: SourceSpec,
    prev: State | None = None,
    method: str | None = None,
) -> DiagnosticsRecord:
    u, v = state.u, state.v
    uv = u.values
    ki = key_identity_residual(prev, state, m, f, method) if prev is not None else None
    return DiagnosticsRecord(
        t=float(state.t),
        mass=integrate(u),
        u_max=float(np.max(uv)),
        u_min=float(np.min(uv)),
        v_max=float(np.max(v.values)),
        entropy=float(np.sum(xlogy(uv, uv)) * u.grid.cell_volume),
        dirichlet=grad_sq_norm(v) + integrate(Field(v.grid, v.values**2)),
        uf_int=float(np.sum(uv * f.f(uv)) * u.grid.cell_volume),
        ki_residual=ki,
        dt=float(state.t - prev.t) if prev is not None else 0.0,
    )


class CsvDiagnosticsSink:
    """Streams records to CSV with the fixed column order."""

    def __init__(self, path: str | Path):
        self._fh = open(path, "w", newline="")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(CSV_COLUMNS)

    def __call__(self, rec: DiagnosticsRecord) -> None:
        self._w.writerow(rec.csv_row())

    def close(self) -> None:
        self._fh.close()


def read_diagnostics_csv(path: str | Path) -> list[DiagnosticsRecord]:
    with open(path, newline="") as fh:
        return [DiagnosticsRecord.from_csv_row(r) for r in csv.DictReader(fh)]


# ---------------------------------------------------------------- plateau / bounds

def final_half(trajectory: Sequence[DiagnosticsRecord]) -> list[DiagnosticsRecord]:
    if not trajectory:
        return []
    t0, t1 = trajectory[0].t, trajectory[-1].t
    mid = t0 + 0.5 * (t1 - t0)
    return [r for r in trajectory if r.t >= mid]


def plateau_ok(values: Iterable[float], tol: float = 0.01, atol: float = 1e-9) -> bool:
    """max - min <= tol |min| + atol; for nonnegative series this is max <= (1+tol) min + atol."""
    vals = np.asarray(list(values), dtype=np.float64)
    if vals.size == 0 or not np.all(np.isfinite(vals)):
        return False
    lo, hi = float(vals.min()), float(vals.max())
    return hi - lo <= tol * abs(lo) + atol


PLATEAU_FUNCTIONALS = ("mass", "entropy", "dirichlet", "uf_int")


@dataclass
class BoundVerdict:
    name: str
    kind: str
    status: str
    margin: float | None = None
    detail: str = ""


@dataclass
class BoundReport:
    tol: float
    verdicts: list[BoundVerdict] = field(default_factory=list)

    def _ok(self, kinds) -> bool:
        return all(v.status != "fail" for v in self.verdicts if v.kind in kinds)

    @property
    def caps_passed(self) -> bool:
        return self._ok({"cap"})

    @property
    def plateaus_passed(self) -> bool:
        return self._ok({"plateau", "finite"})

    @property
    def passed(self) -> bool:
        return self._ok({"cap", "plateau", "finite"})

    def get(self, name: str) -> BoundVerdict:
        return next(v for v in self.verdicts if v.name == name)

    def to_dict(self) -> dict:
        return {
            "tol": self.tol,
            "caps_passed": self.caps_passed,
            "plateaus_passed": self.plateaus_passed,
            "verdicts": [asdict(v) for v in self.verdicts],
        }


def check_theory_bounds(
    trajectory: Sequence[DiagnosticsRecord],
    constants: TheoryConstants | None,
    flags: AssumptionReport,
    u_in_max: float,
    tol: float = 0.05,
    plateau_tol: float = 0.01,
) -> BoundReport:
    rep = BoundReport(tol=tol)
    v_peak = max(r.v_max for r in trajectory)
    u_peak = max(r.u_max for r in trajectory)

    if constants is None:
        rep.verdicts.append(BoundVerdict("v_cap", "cap", "skipped", detail="constants unavailable"))
    else:
        ok = v_peak <= constants.vstar * (1 + tol)
        rep.verdicts.append(BoundVerdict(
            "v_cap", "cap", "pass" if ok else "fail", 1.0 - v_peak / constants.vstar,
            f"max v_max={v_peak:.6g} vs v*={constants.vstar:.6g} ({constants.branch} branch)",
        ))

    if constants is not None and flags.gamma_monotone_concave:
        cap = max(u_in_max, constants.beta1)
        ok = u_peak <= cap * (1 + tol)
        rep.verdicts.append(BoundVerdict(
            "u_cap", "cap", "pass" if ok else "fail", 1.0 - u_peak / cap,
            f"max u_max={u_peak:.6g} vs max(|u_in|, beta1)={cap:.6g}",
        ))
    else:
        why = "constants unavailable" if constants is None else "gamma not monotone-concave"
        rep.verdicts.append(BoundVerdict("u_cap", "cap", "skipped", detail=why))

    half = final_half(trajectory)
    for name in PLATEAU_FUNCTIONALS:
        series = [getattr(r, name) for r in trajectory]
        finite = all(math.isfinite(x) for x in series)
        rep.verdicts.append(BoundVerdict(f"{name}_finite", "finite", "pass" if finite else "fail"))
        if not flags.f_sublog:
            rep.verdicts.append(BoundVerdict(f"{name}_plateau", "plateau", "skipped", detail="superlogarithmic source"))
            continue
        vals = [getattr(r, name) for r in half]
        ok = plateau_ok(vals, plateau_tol)
        spread = (max(vals) - min(vals)) / max(abs(min(vals)), 1e-300) if vals else float("nan")
        rep.verdicts.append(BoundVerdict(
            f"{name}_plateau", "plateau", "pass" if ok else "fail", plateau_tol - spread,
            f"final-half relative spread {spread:.3e}",
        ))
    return rep


# ---------------------------------------------------------------- classifier

class Regime(str, enum.Enum):
    BOUNDED = "Bounded"
    GROWING = "Growing"
    OVERFLOWED = "Overflowed"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class ClassifierConfig:
    min_time: float = 1.0
    plateau_tol: float = 0.01
    growth_factor: float = 5.0
    cap: float = 1e12
    early_stop: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def classify_regime(
    trajectory: Sequence[DiagnosticsRecord],
    cfg: ClassifierConfig = ClassifierConfig(),
    overflowed: bool = False,
) -> Regime:
    if overflowed or any(not math.isfinite(r.u_max) or r.u_max >= cfg.cap for r in trajectory):
        return Regime.OVERFLOWED
    if not trajectory or trajectory[-1].t - trajectory[0].t < cfg.min_time:
        return Regime.INCONCLUSIVE
    half = [r.u_max for r in final_half(trajectory)]
    hi, lo = max(half), min(half)
    if hi - lo <= cfg.plateau_tol * hi:
        return Regime.BOUNDED
    t0, t1 = trajectory[0].t, trajectory[-1].t
    quarter = [r.u_max for r in trajectory if r.t >= t0 + 0.75 * (t1 - t0)]
    gained = trajectory[-1].u_max >= cfg.growth_factor * trajectory[0].u_max
    if gained and len(quarter) >= 2 and quarter[-1] > quarter[0]:
        return Regime.GROWING
    return Regime.INCONCLUSIVE


def peak_functionals(trajectory: Sequence[DiagnosticsRecord]) -> dict[str, float]:
    out = {}
    for f_ in fields(DiagnosticsRecord):
        if f_.name in ("t", "dt", "ki_residual"):
            continue
        out[f"max_{f_.name}"] = max(getattr(r, f_.name) for r in trajectory)
    out["min_u_min"] = min(r.u_min for r in trajectory)
    return out

"""Time stepping for the density/signal pair.

One step: explicit flux-form Laplacian of ``w = gamma(v) u``, the source
split into a growth part taken explicitly and a degradation part taken
implicitly (Patankar style), then a fresh Helmholtz solve for ``v``.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .constants import BranchError, DivergenceError, TheoryConstants, theory_constants
from .diagnostics import (
    BoundReport,
    ClassifierConfig,
    DiagnosticsRecord,
    Regime,
    check_theory_bounds,
    classify_regime,
    peak_functionals,
    record,
)
from .grid import Field, Grid, SolverError, helmholtz_array, laplacian_array, write_snapshot
from .model import (
    AssumptionReport,
    ConstructionError,
    InitialConditionSpec,
    MotilitySpec,
    SourceSpec,
    check_assumptions,
    init_field,
)
from .state import State


class StepError(RuntimeError):
    """A step produced an inadmissible state (negative density in fully explicit mode)."""


class BlowupOverflow(ArithmeticError):
    """Density became non-finite or crossed the overflow cap; the runner turns this into a classification."""

    def __init__(self, message: str, t: float):
        super().__init__(message)
        self.t = t


class RunError(RuntimeError):
    """A step or solver failure inside :func:`run`, tagged with where it happened."""

    def __init__(self, step: int, t: float, snapshot: str | None, cause: Exception):
        where = f" (state dumped to {snapshot})" if snapshot else ""
        super().__init__(f"step {step} at t={t:.6g} failed: {cause}{where}")
        self.step = step
        self.t = t
        self.snapshot = snapshot
        self.cause = cause


class PositivityMode(str, Enum):
    IMPLICIT_DEGRADATION = "implicit_degradation"
    FULLY_EXPLICIT = "fully_explicit"


ELLIPTIC_SOLVERS = ("auto", "tridiagonal", "dct", "cg")


@dataclass(frozen=True)
class StepConfig:
    cfl_safety: float = 0.9
    dt_max: float = 0.1
    positivity_mode: PositivityMode = PositivityMode.IMPLICIT_DEGRADATION
    diagnostics_stride: int = 1
    elliptic_solver: str = "auto"
    overflow_cap: float = 1e12

    def __post_init__(self):
        object.__setattr__(self, "positivity_mode", PositivityMode(self.positivity_mode))
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if not self.dt_max > 0:
            raise ValueError("dt_max must be positive")
        if int(self.diagnostics_stride) != self.diagnostics_stride or self.diagnostics_stride < 1:
            raise ValueError("diagnostics_stride must be an integer >= 1")
        if self.elliptic_solver not in ELLIPTIC_SOLVERS:
            raise ValueError(f"elliptic_solver must be one of {ELLIPTIC_SOLVERS}")
        if not self.overflow_cap > 0:
            raise ValueError("overflow_cap must be positive")

    def solver_for(self, grid: Grid) -> str:
        if self.elliptic_solver == "auto":
            return "tridiagonal" if grid.dim == 1 else "dct"
        return self.elliptic_solver

    def to_dict(self) -> dict:
        return {
            "cfl_safety": self.cfl_safety,
            "dt_max": self.dt_max,
            "positivity_mode": self.positivity_mode.value,
            "diagnostics_stride": self.diagnostics_stride,
            "elliptic_solver": self.elliptic_solver,
            "overflow_cap": self.overflow_cap,
        }


def _dt_from_gamma(gmax: float, grid: Grid, cfg: StepConfig) -> float:
    inv_h2 = sum(1.0 / (hk * hk) for hk in grid.h)
    return min(cfg.cfl_safety / (2.0 * gmax * inv_h2), cfg.dt_max)


def adaptive_dt(state: State, m: MotilitySpec, cfg: StepConfig) -> float:
    """Largest diffusion-stable step: safety * h^2 / (2 dim max gamma(v)), capped by dt_max."""
    gmax = float(np.max(_motility(m, state.v.values)))
    return _dt_from_gamma(gmax, state.grid, cfg)


def _motility(m: MotilitySpec, v: np.ndarray) -> np.ndarray:
    # evaluated at max(v, 0): the solve may leave -1e-17 where u vanishes
    return m._g(np.maximum(v, 0.0))


def _step_arrays(u, v, g, f, grid, dt, cfg, solver):
    """Raw-array step given ``g = gamma(v)``; returns new u, new v and the mass-law defect."""
    d = laplacian_array(g * u, grid.h)
    fu = f._f(u)
    uf = u.ravel()
    if cfg.positivity_mode is PositivityMode.IMPLICIT_DEGRADATION:
        fp = np.maximum(fu, 0.0)
        fm = fp - fu
        u1 = u + dt * (d + u * fm)
        u1 /= 1.0 + dt * fp
        sink = float(np.dot(u1.ravel(), fp.ravel()) - np.dot(uf, fm.ravel()))
    else:
        u1 = u + dt * (d - u * fu)
        sink = float(np.dot(uf, fu.ravel()))
    s0, s1 = float(np.sum(u)), float(np.sum(u1))
    if not math.isfinite(s1):
        raise BlowupOverflow("density became non-finite", float("nan"))
    if cfg.positivity_mode is PositivityMode.FULLY_EXPLICIT and np.min(u1) < 0:
        raise StepError(f"negative density {np.min(u1):.3e} in fully explicit mode; reduce dt or cfl_safety")
    # discrete mass law: sum(u1 - u) = -dt sum(sink); diffusion telescopes to zero
    defect = abs(s1 - s0 + dt * sink) / max(s0, s1, 1e-300)
    v1 = helmholtz_array(grid, u1, method=solver, x0=v if solver == "cg" else None)
    return u1, v1, defect


def initial_state(ic: InitialConditionSpec, grid: Grid, seed: int = 0, solver: str | None = None) -> State:
    u = init_field(ic, grid, seed)
    return State(0.0, u, Field(grid, helmholtz_array(grid, u.values, method=solver)))


def advance(state: State, m: MotilitySpec, f: SourceSpec, cfg: StepConfig, dt: float | None = None) -> State:
    """One step of size ``dt`` (default: :func:`adaptive_dt`)."""
    if dt is None:
        dt = adaptive_dt(state, m, cfg)
    if not dt > 0:
        raise ValueError("dt must be positive")
    grid = state.grid
    u, v = state.u.values, state.v.values
    u1, v1, _ = _step_arrays(u, v, _motility(m, v), f, grid, dt, cfg, cfg.solver_for(grid))
    if np.max(u1) >= cfg.overflow_cap:
        raise BlowupOverflow(f"density exceeded overflow cap {cfg.overflow_cap:g}", state.t + dt)
    return State(state.t + dt, Field(grid, u1), Field(grid, v1))


DiagnosticsSink = Callable[[DiagnosticsRecord], None]


@dataclass
class RunSummary:
    final: State
    records: list[DiagnosticsRecord]
    classification: Regime
    peaks: dict[str, float]
    constants: TheoryConstants | None
    constants_note: str
    assumptions: AssumptionReport
    bounds: BoundReport
    steps: int
    overflowed: bool
    min_u: float
    max_mass_defect: float
    mass_drift: float
    u_in_max: float
    vin_max: float
    wall_clock: float
    classifier: ClassifierConfig
    snapshots: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "classification": self.classification.value,
            "final_time": self.final.t,
            "steps": self.steps,
            "overflowed": self.overflowed,
            "peaks": self.peaks,
            "min_u": self.min_u,
            "max_mass_defect": self.max_mass_defect,
            "mass_drift": self.mass_drift,
            "u_in_max": self.u_in_max,
            "vin_max": self.vin_max,
            "constants": self.constants.to_dict() if self.constants else None,
            "constants_note": self.constants_note,
            "assumptions": self.assumptions.to_dict(),
            "bounds": self.bounds.to_dict(),
            "classifier": self.classifier.to_dict(),
            "wall_clock": self.wall_clock,
            "snapshots": self.snapshots,
        }


def _try_constants(m, f, vin_max) -> tuple[TheoryConstants | None, str]:
    try:
        return theory_constants(m, f, vin_max), ""
    except (DivergenceError, BranchError, ConstructionError) as exc:
        return None, str(exc)


def _dump(state: State, directory: Path | None, tag: str) -> list[str]:
    if directory is None:
        return []
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, fld in (("u", state.u), ("v", state.v)):
        p = directory / f"{name}_{tag}.bin"
        write_snapshot(fld, state.t, p)
        paths.append(str(p))
    return paths


def run(
    ic: InitialConditionSpec,
    m: MotilitySpec,
    f: SourceSpec,
    grid: Grid,
    cfg: StepConfig,
    horizon: float,
    sinks: Sequence[DiagnosticsSink] = (),
    classifier: ClassifierConfig = ClassifierConfig(),
    seed: int = 0,
    snapshot_times: Sequence[float] = (),
    snapshot_dir: str | Path | None = None,
    on_step: Callable[[State, float], None] | None = None,
) -> RunSummary:
    """Integrate to ``horizon`` and collect diagnostics, constants and checks.

    ``on_step`` receives every accepted state and the mass-law defect of
    the step that produced it; it exists for tests and is slow on long runs.
    """
    if not horizon >= 0:
        raise ValueError("horizon must be nonnegative")
    clock = time.perf_counter()
    solver = cfg.solver_for(grid)
    snap_dir = Path(snapshot_dir) if snapshot_dir is not None else None
    pending = sorted(float(t) for t in snapshot_times)

    state = initial_state(ic, grid, seed, solver)
    flags = check_assumptions(m, f)
    u_in_max = float(np.max(state.u.values))
    vin_max = float(np.max(state.v.values))
    constants, note = _try_constants(m, f, vin_max)

    records: list[DiagnosticsRecord] = []

    def emit(rec):
        records.append(rec)
        for s in sinks:
            s(rec)

    emit(record(state, m, f, method=solver))
    mass0 = records[0].mass
    snapshots: list[str] = []
    while pending and pending[0] <= 0.0:
        snapshots += _dump(state, snap_dir, f"t{pending.pop(0):.6g}")

    u, v, t = state.u.values, state.v.values, 0.0
    steps, min_u, max_defect, overflowed = 0, float(np.min(u)), 0.0, False
    stride = int(cfg.diagnostics_stride)
    g = _motility(m, v)
    while t < horizon * (1 - 1e-14):
        dt = min(_dt_from_gamma(float(np.max(g)), grid, cfg), horizon - t)
        try:
            u1, v1, defect = _step_arrays(u, v, g, f, grid, dt, cfg, solver)
        except BlowupOverflow:
            overflowed = True
            break
        except (StepError, SolverError) as exc:
            bad = State(t, Field(grid, u), Field(grid, v))
            dumped = _dump(bad, snap_dir, f"failed_step{steps + 1}")
            raise RunError(steps + 1, t, dumped[0] if dumped else None, exc) from exc
        steps += 1
        t_new = horizon if horizon - (t + dt) <= 1e-14 * horizon else t + dt
        max_defect = max(max_defect, defect)
        min_u = min(min_u, float(np.min(u1)))
        peak_u = float(np.max(u1))
        last = steps % stride == 0 or t_new >= horizon or peak_u >= cfg.overflow_cap
        if last or on_step is not None or (pending and pending[0] <= t_new):
            prev = State(t, Field(grid, u), Field(grid, v))
            state = State(t_new, Field(grid, u1), Field(grid, v1))
            if on_step is not None:
                on_step(state, defect)
            if last:
                emit(record(state, m, f, prev=prev, method=solver))
            while pending and pending[0] <= t_new:
                pending.pop(0)
                snapshots += _dump(state, snap_dir, f"t{t_new:.6g}")
        u, v, t = u1, v1, t_new
        g = _motility(m, v)
        if peak_u >= cfg.overflow_cap:
            overflowed = True
            break
        if classifier.early_stop and last and classify_regime(records, classifier) is Regime.GROWING:
            break

    final = State(t, Field(grid, u), Field(grid, v)) if np.all(np.isfinite(u)) else state
    regime = classify_regime(records, classifier, overflowed=overflowed)
    bounds = check_theory_bounds(records, constants, flags, u_in_max)
    return RunSummary(
        final=final,
        records=records,
        classification=regime,
        peaks=peak_functionals(records),
        constants=constants,
        constants_note=note,
        assumptions=flags,
        bounds=bounds,
        steps=steps,
        overflowed=overflowed,
        min_u=min_u,
        max_mass_defect=max_defect,
        mass_drift=abs(records[-1].mass - mass0) / mass0,
        u_in_max=u_in_max,
        vin_max=vin_max,
        wall_clock=time.perf_counter() - clock,
        classifier=classifier,
        snapshots=snapshots,
    )

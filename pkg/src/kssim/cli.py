"""Command-line front end: ``constants``, ``run``, ``sweep`` and ``presets list``."""
from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .comparison import ScalarSeries, check_domination, integrate_U, integrate_V
from .config import ConfigError, RunConfig, expand_sweep, load, resolve
from .constants import BranchError, DivergenceError, ScanConfig, theory_constants
from .diagnostics import CsvDiagnosticsSink
from .grid import SolverError
from .model import ConstructionError, check_assumptions
from .presets import PRESETS
from .stepper import RunError, RunSummary, StepError, initial_state, run

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OVERFLOW = 0, 2, 3, 4
CONFIG_ERRORS = (ConfigError, ConstructionError, DivergenceError, BranchError, KeyError)
NUMERICAL_ERRORS = (RunError, SolverError, StepError, FloatingPointError)
COMPARE_STEPS = 2000


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=False) + "\n")


def cmd_constants(cfg: RunConfig) -> dict:
    """Constants for the configured specs and initial data, with scan metadata and assumption flags."""
    state = initial_state(cfg.initial, cfg.grid, cfg.seed, cfg.step.solver_for(cfg.grid))
    flags = check_assumptions(cfg.motility, cfg.source)
    vin_max = float(np.max(state.v.values))
    scan = ScanConfig()
    consts = theory_constants(cfg.motility, cfg.source, vin_max, scan)
    return {
        "constants": consts.to_dict(),
        "u_in_max": float(np.max(state.u.values)),
        "u_cap": max(float(np.max(state.u.values)), consts.beta1) if flags.gamma_monotone_concave else None,
        "assumptions": flags.to_dict(),
        "warnings": list(flags.warnings),
        "scan": asdict(scan),
    }


def compare_traces(cfg: RunConfig, summary: RunSummary, out: Path | None = None) -> dict:
    """Integrate the comparison ODEs against the recorded sup-norm traces where they apply."""
    reports: dict = {}
    consts = summary.constants
    recs = summary.records
    t_end = recs[-1].t
    if consts is None or t_end <= 0:
        return reports
    if consts.branch == "unbounded":
        vinf = ScalarSeries.from_records(recs, "v_max")
        V = integrate_V(cfg.motility, consts, vinf, t_end, COMPARE_STEPS)
        rep = check_domination(vinf, V).to_dict()
        rep["trace_exceeds_sstar"] = bool(np.max(vinf.values) > consts.sstar)
        reports["v_domination"] = rep
        if out is not None:
            V.to_csv(out / "V.csv", "V")
    if summary.assumptions.gamma_monotone_concave:
        uinf = ScalarSeries.from_records(recs, "u_max")
        U = integrate_U(cfg.motility, consts.beta1, uinf, summary.u_in_max, t_end, COMPARE_STEPS)
        reports["u_domination"] = check_domination(uinf, U).to_dict()
        reports["u_domination"]["U_max"] = float(np.max(U.values))
        if out is not None:
            U.to_csv(out / "U.csv", "U")
    return reports


def cmd_run(cfg: RunConfig, out: str | Path, threads: int = 1) -> dict:
    """Full pipeline for one configuration; writes config echo, diagnostics, snapshots and summary."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.toml").write_text(cfg.to_toml())
    clock = time.perf_counter()
    sink = CsvDiagnosticsSink(out / "diagnostics.csv")
    try:
        with threadpool_limits(limits=threads):
            summary = run(
                cfg.initial,
                cfg.motility,
                cfg.source,
                cfg.grid,
                cfg.step,
                cfg.horizon,
                sinks=[sink],
                classifier=cfg.classifier,
                seed=cfg.seed,
                snapshot_times=cfg.snapshot_times,
                snapshot_dir=out / "snapshots",
            )
    finally:
        sink.close()
    payload = summary.to_dict()
    payload["comparison"] = compare_traces(cfg, summary, out) if cfg.compare else {}
    payload["wall_clock"] = time.perf_counter() - clock
    payload["paths"] = {
        "config": str(out / "config.toml"),
        "diagnostics": str(out / "diagnostics.csv"),
        "snapshots": summary.snapshots,
    }
    _write_json(out / "summary.json", payload)
    return payload


SWEEP_COLUMNS = ("classification", "peak_u_max", "peak_v_max", "v_cap_margin", "u_cap_margin", "status", "error")


def _sweep_one(args) -> dict:
    index, raw, out = args
    row = {k: "" for k in SWEEP_COLUMNS}
    try:
        cfg = RunConfig.from_dict(raw)
        res = cmd_run(cfg, Path(out) / f"run_{index:03d}")
        margins = {v["name"]: v["margin"] for v in res["bounds"]["verdicts"]}
        row.update(
            classification=res["classification"],
            peak_u_max=res["peaks"]["max_u_max"],
            peak_v_max=res["peaks"]["max_v_max"],
            v_cap_margin=margins.get("v_cap"),
            u_cap_margin=margins.get("u_cap"),
            status="ok",
        )
    except Exception as exc:  # recorded per row, the sweep carries on
        row.update(status="error", error=f"{type(exc).__name__}: {exc}")
    return row


def cmd_sweep(raw: dict, out: str | Path, threads: int = 1) -> list[dict]:
    """Run every point of the ``[sweep]`` product; rows come back in axis order."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    axes, points, configs = expand_sweep(raw)
    jobs = [(i, c, str(out)) for i, c in enumerate(configs)]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_sweep_one, jobs))
    else:
        rows = [_sweep_one(j) for j in jobs]
    table = []
    for i, (values, row) in enumerate(zip(points, rows)):
        table.append({"index": i, **dict(zip(axes, values)), **row})
    header = ["index", *axes, *SWEEP_COLUMNS]
    with open(out / "sweep.csv", "w") as fh:
        fh.write(",".join(header) + "\n")
        for r in table:
            fh.write(",".join(_cell(r[h]) for h in header) + "\n")
    return table


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    s = str(x)
    return '"' + s.replace('"', '""') + '"' if ("," in s or '"' in s) else s


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kssim", description="Chemotaxis simulations with signal-dependent motility and logarithmic degradation.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required):
        sp.add_argument("--config", type=Path, help="TOML config; overrides the preset key by key")
        sp.add_argument("--preset", choices=sorted(PRESETS), help="start from a named scenario")
        sp.add_argument("--out", type=Path, required=out_required, help="output directory")
        sp.add_argument("--threads", type=int, default=1, help="thread cap per run; worker processes for sweeps")

    common(sub.add_parser("constants", help="compute the constructive constants"), False)
    r = sub.add_parser("run", help="run one simulation")
    common(r, True)
    r.add_argument("--fail-on-overflow", action="store_true", help="exit with status 4 when the run overflows")
    common(sub.add_parser("sweep", help="run a parameter sweep"), True)
    pr = sub.add_parser("presets", help="inspect presets")
    pr.add_argument("action", choices=["list"])
    return p


def _fail(code: int, exc: Exception, out: Path | None) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, RunError):
        payload.update(step=exc.step, t=exc.t, snapshot=exc.snapshot)
    text = json.dumps(payload)
    print(text, file=sys.stderr)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "error.json").write_text(text + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "presets":
        for name, d in PRESETS.items():
            print(f"{name:16s} {d.get('description', '')}")
        return EXIT_OK
    if args.threads < 1:
        return _fail(EXIT_CONFIG, ConfigError("--threads must be >= 1"), args.out)
    try:
        raw = resolve(args.config, args.preset)
        cfg = None if args.command == "sweep" else RunConfig.from_dict(raw)
        if args.command == "constants":
            res = cmd_constants(cfg)
            print(json.dumps(res, indent=2))
            if args.out is not None:
                args.out.mkdir(parents=True, exist_ok=True)
                _write_json(args.out / "constants.json", res)
            return EXIT_OK
        if args.command == "run":
            res = cmd_run(cfg, args.out, args.threads)
            print(json.dumps({k: res[k] for k in ("classification", "final_time", "steps", "peaks")}, indent=2))
            if args.fail_on_overflow and res["classification"] == "Overflowed":
                return EXIT_OVERFLOW
            return EXIT_OK
        rows = cmd_sweep(raw, args.out, args.threads)
        print(f"{len(rows)} runs, {sum(r['status'] == 'error' for r in rows)} failed; table in {args.out / 'sweep.csv'}")
        return EXIT_OK
    except CONFIG_ERRORS as exc:
        return _fail(EXIT_CONFIG, exc, args.out)
    except NUMERICAL_ERRORS as exc:
        return _fail(EXIT_NUMERICAL, exc, args.out)
    except ValueError as exc:
        return _fail(EXIT_CONFIG, exc, args.out)


if __name__ == "__main__":
    sys.exit(main())

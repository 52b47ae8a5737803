"""Acceptance criteria 1-11 at their stated tolerances.

Each test appends one ``ACCEPTANCE n: PASS|FAIL`` line (shown in the
terminal summary) and then asserts, so a failing criterion is both
reported and red. Full preset runs are shared through a module cache.
"""
import math
import time

import numpy as np

import oracles
from kssim.cli import compare_traces, main
from kssim.comparison import ScalarSeries, integrate_U, integrate_V
from kssim.config import load
from kssim.constants import GammaSplit, compute_beta1, compute_sstar, ScanConfig, theory_constants
from kssim.diagnostics import key_identity_residual
from kssim.grid import Grid, helmholtz_solve
from kssim.model import AffineOsc, Constant, ConstantIC, ExpDecay, LogGrowth, LogPower, PerturbedConstant
from kssim.presets import PRESETS
from kssim.stepper import StepConfig, adaptive_dt, advance, initial_state, run

_RUNS: dict = {}


def full_run(name: str, override: dict | None = None):
    """Run a preset (optionally patched) once per session; returns (config, summary)."""
    key = (name, repr(override))
    if key not in _RUNS:
        cfg = load(preset_name=name)
        if override:
            from kssim.config import RunConfig, deep_merge

            cfg = RunConfig.from_dict(deep_merge(cfg.to_dict(), override))
        summary = run(cfg.initial, cfg.motility, cfg.source, cfg.grid, cfg.step, cfg.horizon,
                      classifier=cfg.classifier, seed=cfg.seed)
        _RUNS[key] = (cfg, summary)
    return _RUNS[key]


def verdict(log, n, ok, detail):
    log.append(f"ACCEPTANCE {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def _order(errs):
    return [math.log2(a / b) for a, b in zip(errs, errs[1:])]


def test_criterion_01_helmholtz_accuracy(acceptance_log):
    clock = time.perf_counter()
    e1 = []
    for n in (64, 128, 256):
        g = Grid.uniform(1, 1.0, n)
        x = g.centers()[0]
        z = helmholtz_solve(g, 1.0 + np.cos(np.pi * x)).values
        e1.append(np.max(np.abs(z - (1 + np.cos(np.pi * x) / (1 + np.pi**2)))))
    e2 = []
    for n in (64, 128):
        g = Grid.uniform(2, 1.0, n)
        X, Y = g.mesh()
        m1, m2 = np.cos(np.pi * X) * np.cos(np.pi * Y), np.cos(2 * np.pi * X)
        z = helmholtz_solve(g, m1 + m2).values  # default 2D solver: CG
        e2.append(np.max(np.abs(z - m1 / (1 + 2 * np.pi**2) - m2 / (1 + 4 * np.pi**2))))
    elapsed = time.perf_counter() - clock
    orders = _order(e1) + _order(e2)
    ok = min(orders) >= 1.9 and elapsed < 5.0
    verdict(acceptance_log, 1, ok, f"orders 1D {_order(e1)[0]:.3f},{_order(e1)[1]:.3f} 2D {_order(e2)[0]:.3f}; {elapsed:.2f}s")


def _law_defect(s0, s1, f, dt):
    u0, u1 = s0.u.values, s1.u.values
    fu = f.f(u0)
    fp, fm = np.maximum(fu, 0.0), np.maximum(-fu, 0.0)
    lhs = np.sum(u1 - u0)
    return abs(lhs + dt * np.sum(u1 * fp - u0 * fm)) / np.sum(u0)


_STEP_MIN_U: list[float] = []


def test_criterion_02_discrete_mass_law(acceptance_log):
    worst = {}
    for name in PRESETS:
        cfg = load(preset_name=name)
        s = initial_state(cfg.initial, cfg.grid, cfg.seed, cfg.step.solver_for(cfg.grid))
        w, lo = 0.0, float(np.min(s.u.values))
        for _ in range(1000):
            dt = adaptive_dt(s, cfg.motility, cfg.step)
            s1 = advance(s, cfg.motility, cfg.source, cfg.step, dt=dt)
            w = max(w, _law_defect(s, s1, cfg.source, dt))
            lo = min(lo, float(np.min(s1.u.values)))
            s = s1
        worst[name] = w
        _STEP_MIN_U.append(lo)
    _, blow = full_run("blowup2d")
    drift = blow.mass_drift
    ok = max(worst.values()) <= 1e-12 and drift <= 1e-12
    verdict(acceptance_log, 2, ok, f"worst per-step defect {max(worst.values()):.2e}; f=0 drift over blowup2d run {drift:.2e}")


def test_criterion_03_positivity(acceptance_log):
    names = ["suppress1d", "concave1d", "nonmono1d", "boundedgamma1d", "blowup2d", "suppress2d"]
    mins = {n: full_run(n)[1].min_u for n in names}
    all_min = min(list(mins.values()) + _STEP_MIN_U)
    verdict(acceptance_log, 3, all_min >= 0.0, f"min u over all runs and steps {all_min:.3e}")


def test_criterion_04_constants(acceptance_log):
    f = LogPower(1, 1, 0)
    b = compute_beta1(f)
    refined = compute_beta1(f, ScanConfig(step=1e-4))
    rel = abs(b - refined) / refined
    rel_root = abs(b - oracles.BETA1_LOG) / oracles.BETA1_LOG
    rng = np.random.default_rng(2024)
    exact = all(
        compute_sstar(LogGrowth(1), v, b) == max(v, b) for v in rng.uniform(0, 20, 25).tolist() + [0.1, 0.33, b]
    )
    m = AffineOsc(3, 2)
    s0 = compute_sstar(m, 2.5, 0.0)
    sp = GammaSplit(m, s0)
    chain = True
    for s in rng.uniform(s0, s0 + 30, 100):
        Gd, gd = sp.Gamma_d(s), sp.gamma_d(s)
        chain &= (0 >= Gd - 1e-9) and (Gd >= (s - s0) * gd - 1e-9) and ((s - s0) * gd >= s * gd - 1e-9)
    ok = rel <= 1e-6 and rel_root <= 1e-6 and exact and chain
    verdict(acceptance_log, 4, ok, f"beta1={b:.10f} (refined rel {rel:.1e}, root oracle rel {rel_root:.1e}); monotone s* exact={exact}; chain={chain}")


def test_criterion_05_key_identity(acceptance_log):
    m, f = ExpDecay(1), LogPower(1, 1, 0)
    ic = PerturbedConstant(c=1.0, amplitude=0.5, wave_numbers=(1, 2))
    res = []
    for n, dt in ((64, 4e-3), (128, 2e-3)):
        g = Grid.uniform(1, 10.0, n)
        s = run(ic, m, f, g, StepConfig(dt_max=dt, diagnostics_stride=10**9), 1.0).final
        s1 = advance(s, m, f, StepConfig(dt_max=dt), dt=dt)
        res.append(key_identity_residual(s, s1, m, f))
    ratio = res[0] / res[1]
    feq = LogPower(1, 1, 1)
    g = Grid.uniform(1, 10.0, 64)
    s = initial_state(ConstantIC(feq.equilibrium()), g)
    stat = key_identity_residual(s, advance(s, m, feq, StepConfig()), m, feq)
    ok = ratio >= 1.8 and stat <= 1e-10
    verdict(acceptance_log, 5, ok, f"residual {res[0]:.3e} -> {res[1]:.3e} (factor {ratio:.2f}); stationary {stat:.1e}")


def test_criterion_06_signal_cap(acceptance_log):
    parts, ok = [], True
    for name in ("suppress1d", "nonmono1d"):
        cfg, s = full_run(name)
        c = s.constants
        peak = s.peaks["max_v_max"]
        good = c is not None and peak <= 1.05 * c.vstar and s.wall_clock < 60.0
        ok &= good
        parts.append(f"{name}: max v {peak:.4f} <= 1.05*v* ({c.branch}, v*={c.vstar:.4f}) in {s.wall_clock:.1f}s")
    verdict(acceptance_log, 6, ok, "; ".join(parts))


def test_criterion_07_density_cap(acceptance_log):
    cfg, s = full_run("concave1d")
    c = s.constants
    cap = max(s.u_in_max, c.beta1)
    peak = s.peaks["max_u_max"]
    ok = s.assumptions.gamma_monotone_concave and peak <= 1.05 * cap and s.wall_clock < 60.0
    verdict(acceptance_log, 7, ok, f"max u {peak:.4f} vs max(|u_in|, beta1)={cap:.4f} in {s.wall_clock:.1f}s")


def test_criterion_08_comparison_odes(acceptance_log):
    m = AffineOsc(3, 2)
    c = theory_constants(m, LogPower(2, 1, 2), 2.5)
    trace = ScalarSeries(np.linspace(0, 20, 200), c.sstar * (0.5 + 0.5 * np.sin(np.linspace(0, 20, 200)) ** 2))
    V = integrate_V(m, c, trace, 20.0)
    v_eq = float(np.max(np.abs(V.values - c.sstar)))
    beta1 = oracles.BETA1_LOG
    flat = ScalarSeries([0.0, 10.0], [3.0, 3.0])
    U = integrate_U(Constant(1), beta1, flat, 5.0, 10.0)
    u_err = float(np.max(np.abs(U.values - (5.0 * np.exp(-U.times) + beta1 * (1 - np.exp(-U.times))))))
    reports = {}
    for name, key in (("concave1d", "u_domination"), ("nonmono1d", "v_domination")):
        cfg, s = full_run(name)
        reports[name] = compare_traces(cfg, s)[key]
    dom = all(r["passed"] for r in reports.values())
    ok = v_eq <= 1e-9 and u_err <= 1e-8 and dom
    detail = ", ".join(f"{n} worst {r['max_violation']:.2e}" for n, r in reports.items())
    verdict(acceptance_log, 8, ok, f"|V-s*| {v_eq:.1e}; U closed-form err {u_err:.1e}; domination at 0.02: {detail}")


def test_criterion_09_suppression_contrast(acceptance_log):
    _, blow = full_run("blowup2d")
    _, supp = full_run("suppress2d")
    gain = blow.peaks["max_u_max"] / blow.u_in_max
    blow_ok = blow.classification.value in ("Growing", "Overflowed") and gain >= 5.0
    supp_ok = supp.classification.value == "Bounded" and supp.bounds.plateaus_passed
    wall = blow.wall_clock + supp.wall_clock
    # reported only: the same contrast with an equilibrium-carrying source
    _, mu1 = full_run("suppress2d", {"source": {"mu": 1.0}})
    acceptance_log.append(
        f"ACCEPTANCE 9 info: suppress2d with mu=1 -> {mu1.classification.value}, plateaus "
        f"{'pass' if mu1.bounds.plateaus_passed else 'fail'}, max u {mu1.peaks['max_u_max']:.3f}"
    )
    detail = (
        f"blowup2d {blow.classification.value}, gain {gain:.2f}x; suppress2d {supp.classification.value}, "
        f"plateaus {'pass' if supp.bounds.plateaus_passed else 'fail'} (final mass {supp.records[-1].mass:.3g} "
        f"from {supp.records[0].mass:.3g}); {wall:.0f}s"
    )
    verdict(acceptance_log, 9, blow_ok and supp_ok and wall < 600, detail)


def test_criterion_10_plateaus(acceptance_log):
    names = ["suppress1d", "concave1d", "nonmono1d", "boundedgamma1d", "blowup2d", "suppress2d"]
    bounded = [(n, full_run(n)[1]) for n in names if full_run(n)[1].classification.value == "Bounded"]
    bad = [n for n, s in bounded if not s.bounds.plateaus_passed]
    ok = bool(bounded) and not bad
    verdict(acceptance_log, 10, ok, f"Bounded runs {[n for n, _ in bounded]}; plateau failures {bad}")


def test_criterion_11_determinism(acceptance_log, tmp_path):
    cfg = tmp_path / "short.toml"
    cfg.write_text("[run]\nhorizon = 5.0\n")
    outs = []
    for k in range(2):
        out = tmp_path / f"r{k}"
        assert main(["run", "--preset", "concave1d", "--config", str(cfg), "--out", str(out), "--threads", "1"]) == 0
        outs.append((out / "diagnostics.csv").read_bytes())
    verdict(acceptance_log, 11, outs[0] == outs[1], f"diagnostics.csv identical ({len(outs[0])} bytes)")

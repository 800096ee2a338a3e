"""Acceptance criteria 1-12, one test each; each records a summary line."""

import math
import time

import numpy as np
import pytest

from besovmhd import cli_io
from besovmhd.calderon import find_T1, heat_identity_defect, heat_quartic_integral, run_calderon, split_report
from besovmhd.cli import main
from besovmhd.estimates import (ConstantsTable, DataNorms, bootstrap_monitor, budget_2d, budget_3d, check_aux_2d,
                                check_B_growth, check_energy, check_u_estimate, difference_experiment,
                                field_ratios, random_pair, truncation_convergence)
from besovmhd.littlewood_paley import build_partition
from besovmhd.paraproduct import bony_triple
from besovmhd.solver import MHDState, SolverConfig, make_initial_data, run
from besovmhd.spectral import FourierGrid, random_field
from conftest import ACCEPTANCE_LINES, CONFIGS
from oracles import lattice_convolution


def record(n: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")


def initial(cfg):
    grid = cfg.grid()
    return make_initial_data(cfg.init_kind, grid, **cfg.initial_params())


def truncated_norms(part, cfg, state0):
    g = part.grid
    s = MHDState(state0.t, g.truncate(state0.u, cfg.R), g.truncate(state0.B, cfg.R), g)
    return DataNorms.from_state(part, s)


@pytest.fixture(scope="module")
def ot_run():
    cfg = cli_io.load_run_config(CONFIGS / "ot2d.ini")
    part = build_partition(cfg.grid())
    state0 = initial(cfg)
    t0 = time.perf_counter()
    final, series = run(state0, cfg.solver(), part)
    return cfg, part, state0, series, time.perf_counter() - t0


@pytest.fixture(scope="module")
def calderon_run():
    cfg = cli_io.load_run_config(CONFIGS / "random3d.ini")
    part = build_partition(cfg.grid())
    state0 = initial(cfg)
    t0 = time.perf_counter()
    final, series, split = run_calderon(state0, cfg.solver(), part)
    return cfg, part, state0, series, split, time.perf_counter() - t0


def after_start(rep) -> float:
    """Worst ratio over t > 0; both sides coincide at t = 0 for several checks."""
    lhs, rhs = rep.lhs[1:], rep.rhs[1:]
    if lhs.size == 0:
        return 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(rhs > 0, lhs / rhs, np.where(lhs > 0, np.inf, 0.0))
    return float(np.max(r))


def budget_for(part, cfg, state0, k):
    norms = truncated_norms(part, cfg, state0)
    if part.grid.dim == 2:
        return budget_2d(norms, cfg.nu, k)
    T1 = math.inf if norms.u_Hhalf == 0 else find_T1(part.grid, state0.u, cfg.nu, k.c3, k.c4, cfg.R)
    return budget_3d(norms, cfg.nu, k, T1)


def test_criterion_01_partition():
    t0 = time.perf_counter()
    results = {}
    for dim, N in ((2, 128), (3, 32)):
        part = build_partition(FourierGrid(dim, N))
        d = part.identity_defects()
        results[(dim, N)] = (d, part.support_violations(), part.overlap_violations(), part.jmin, part.jmax)
    elapsed = time.perf_counter() - t0
    ok = elapsed < 5.0
    worst = 0.0
    for d, sup, ovl, _, _ in results.values():
        worst = max(worst, d["inhomogeneous_sum"], d["homogeneous_sum"])
        ok &= d["inhomogeneous_sum"] <= 1e-12 and d["homogeneous_sum"] <= 1e-12
        ok &= d["square_sum_min"] >= 0.5 and d["square_sum_max"] <= 1.0 + 1e-12
        ok &= sup == 0 and ovl == 0
    blocks = [(r[3], r[4]) for r in results.values()]
    record(1, ok, f"sum defect {worst:.2e}, blocks {blocks}, {elapsed:.2f} s")
    assert ok


def test_criterion_02_bony():
    t0 = time.perf_counter()
    worst = 0.0
    for dim, N in ((2, 16), (3, 8)):
        g = FourierGrid(dim, N)
        part = build_partition(g)
        rng = np.random.default_rng(2000 + dim)
        for _ in range(20):
            u = random_field(g, rng.uniform(0.5, 3.0), rng, components=0)
            v = random_field(g, rng.uniform(0.5, 3.0), rng, components=0)
            u[(0,) * dim], v[(0,) * dim] = rng.standard_normal(2)
            ref = lattice_convolution(u, v, dim)
            err = np.max(np.abs(bony_triple(part, u, v).total() - ref)) / np.max(np.abs(ref))
            worst = max(worst, err)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-11 and elapsed < 30
    record(2, ok, f"worst relative error {worst:.2e} over 40 pairs, {elapsed:.2f} s")
    assert ok


def test_criterion_03_energy(ot_run):
    cfg, _, _, series, elapsed = ot_run
    ident, ineq = check_energy(series)
    ok = ident.passed and ineq.passed and elapsed < 120
    record(3, ok, f"identity defect/(1e-6 E0) worst {ident.worst_ratio:.3g}, "
                  f"inequality worst {ineq.worst_ratio:.3g}, {len(series)} samples, {elapsed:.1f} s")
    assert ok


def test_criterion_04_aux_2d(ot_run):
    series = ot_run[3]
    rep = check_aux_2d(series)
    record(4, rep.passed, f"worst ratio {rep.worst_ratio:.3g}, violations {len(rep.violations)}")
    assert rep.passed


def test_criterion_05_heat_piece():
    t0 = time.perf_counter()
    g = FourierGrid(3, 32)
    nu = 0.05
    worst_id, worst_q = 0.0, 0.0
    for seed in range(10):
        u0 = make_initial_data("random_spectrum", g, seed=500 + seed, alpha_u=2.0 + 0.15 * seed).u
        for t in (0.05, 0.2, 1.0):
            worst_id = max(worst_id, heat_identity_defect(g, u0, nu, t))
        q = heat_quartic_integral(g, u0, nu, math.inf) / (2 / nu * g.sobolev_norm(u0, 0.5) ** 4)
        worst_q = max(worst_q, q)
    elapsed = time.perf_counter() - t0
    ok = worst_id <= 1e-9 and worst_q <= 1 and elapsed < 60
    record(5, ok, f"identity defect {worst_id:.2e}, quartic ratio {worst_q:.3g}, {elapsed:.1f} s")
    assert ok


def test_criterion_06_calderon(calderon_run, constants3):
    cfg, _, state0, series, split, elapsed = calderon_run
    g = state0.grid
    rep = split_report(split, series, g.sobolev_norm(g.truncate(state0.u, cfg.R), 0.5), constants3.c3, constants3.c4)
    ok = rep.passed and rep.closure_max <= 1e-8 and elapsed < 600
    record(6, ok, f"closure {rep.closure_max:.2e}, v ratios {rep.v_sup_ratio:.3g}/{rep.v_energy_ratio:.3g}, "
                  f"w ratio {rep.w_ratio:.3g}, {elapsed:.1f} s")
    assert ok


HELD_OUT_RUNS = [
    (2, "orszag_tang", 0.01, 0.005, 0.5, {}),
    (2, "random_spectrum", 0.01, 0.004, 0.3, {"alpha_u": 2.5, "alpha_B": 3.0, "seed": 11}),
    (2, "orszag_tang", 0.01, 0.004, 0.3, {"amp_u": 0.3, "amp_B": 1.5}),
    (3, "random_spectrum", 0.05, 0.005, 0.2, {"alpha_u": 2.5, "alpha_B": 3.0, "seed": 1}),
    (3, "abc_like", 0.05, 0.005, 0.15, {"amp_u": 1.0, "amp_B": 0.5}),
]

HELD_OUT_FIELDS = [(2, 1.7, 3.1), (2, 2.3, 2.3), (2, 3.2, 1.8), (3, 1.9, 2.9), (3, 2.9, 2.1)]


def test_criterion_07_estimates(constants2, constants3):
    t0 = time.perf_counter()
    tables = {2: constants2, 3: constants3}
    parts = {2: build_partition(FourierGrid(2, 64)), 3: build_partition(FourierGrid(3, 32))}
    failures, worst = [], {}

    def note(key, val, bound):
        r = val / bound if bound > 0 else (0.0 if val <= 0 else math.inf)
        worst[key] = max(worst.get(key, 0.0), r)
        if r > 1:
            failures.append((key, val, bound))

    for dim, kind, nu, dt, t_end, params in HELD_OUT_RUNS:
        k, part = tables[dim], parts[dim]
        s0 = make_initial_data(kind, part.grid, **params)
        _, series = run(s0, SolverConfig(nu=nu, dt=dt, t_end=t_end), part)
        for rep in (check_B_growth(series, k.c1), check_u_estimate(series, k.c2)):
            note(rep.name, rep.worst_ratio, 1.0)
            if not rep.passed:
                failures.append((rep.name, rep.violation_record(), kind))
            note(rep.name + " (t>0)", after_start(rep), 1.0)
    rng = np.random.default_rng(777)
    cfg0 = SolverConfig(nu=1.0, dt=1.0, t_end=0.0)
    for dim, au, aB in HELD_OUT_FIELDS:
        k, part = tables[dim], parts[dim]
        u, B = random_pair(part.grid, rng, au, aB)
        ratios = field_ratios(part, u, B, cfg0)
        for key in ("commutator", "chemin", "algebra", "embedding", "embedding_B0inf", "para_T", "para_R"):
            note(key, ratios[key], getattr(k, key))
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 900
    summary = ", ".join(f"{k} {v:.3g}" for k, v in sorted(worst.items()))
    record(7, ok, f"10 held-out runs/fields, worst ratios: {summary}, {elapsed:.0f} s")
    assert ok, failures


def test_criterion_08_budget():
    unit = ConstantsTable(c1=1.0, c2=1.0, c3=1.0, c4=1.0)
    b2 = budget_2d(DataNorms(2, 1.0, 1.0, 1.0, 1.0), 1.0, unit)
    b3 = budget_3d(DataNorms(3, 1.0, 1.0, 1.0, 1.0), 1.0, unit, math.inf)
    rel = lambda a, b: abs(a - b) / abs(b)  # noqa: E731
    errs = [rel(b2.M1, 5), rel(b2.M2, 4), rel(b2.M3, 1), rel(b2.Tstar, 5 * math.exp(-30)),
            rel(b3.Cstar, 0.5), rel(b3.M1, 10), rel(b3.M4, 40180), rel(b3.T2, 0.5 * math.exp(-14.25))]
    ok = max(errs) <= 1e-12 and abs(b2.Tstar - 4.68e-13) <= 1e-3 * 4.68e-13
    record(8, ok, f"2D T*={b2.Tstar:.4g}, 3D C*={b3.Cstar}, M4={b3.M4:.6g}, max rel err {max(errs):.1e}")
    assert ok


def test_criterion_09_monitor(ot_run, calderon_run, constants2, constants3):
    cfg2, part2, s2, series2 = ot_run[:4]
    cfg3, part3, s3, series3 = calderon_run[:4]
    reports = []
    for cfg, part, s0, series, k in ((cfg2, part2, s2, series2, constants2), (cfg3, part3, s3, series3, constants3)):
        b = budget_for(part, cfg, s0, k)
        reports.append((b, bootstrap_monitor(series, b, k)))
    # small data give a window covering many samples
    cfg = cli_io.load_run_config(CONFIGS / "small3d.ini")
    part = build_partition(cfg.grid())
    s0 = initial(cfg)
    _, series = run(s0, cfg.solver(), part)
    b = budget_for(part, cfg, s0, constants3)
    reports.append((b, bootstrap_monitor(series, b, constants3)))
    ok = all(m.passed for _, m in reports)
    detail = "; ".join(f"log T*={b.log_Tstar:.4g} samples={m.samples}" for b, m in reports)
    record(9, ok, f"2D OT / 3D random / 3D small data: {detail}")
    assert ok, "\n".join(m.violation_record() for _, m in reports)


def test_criterion_10_truncation():
    g = FourierGrid(2, 128)
    rng = np.random.default_rng(10)
    slopes = []
    ok = True
    for s, k in ((0.0, 1.0), (0.0, 2.0), (1.0, 1.0), (0.5, 1.5), (1.0, 2.5)):
        alpha = s + k + g.dim / 2 + 0.5
        f = random_field(g, alpha, rng, components=0)
        rep = truncation_convergence(g, f, s, k, [4, 8, 16, 32])
        slopes.append(f"(s={s:g},k={k:g}) {rep.slope:.3f}")
        ok &= rep.passed
    record(10, ok, "slopes " + ", ".join(slopes))
    assert ok


def test_criterion_11_difference(constants3):
    cfg = cli_io.load_run_config(CONFIGS / "random3d.ini")
    part = build_partition(cfg.grid())
    s0 = initial(cfg)
    b = budget_for(part, cfg, s0, constants3)
    rep = difference_experiment(s0, cfg.solver(), cfg.delta, constants3.gronwall, b.Tstar, seed=cfg.seed, part=part)
    ctrl = difference_experiment(s0, cfg.solver(), 0.0, constants3.gronwall, b.Tstar, seed=cfg.seed, part=part)
    ok = rep.passed and ctrl.passed and not np.any(ctrl.D)
    record(11, ok, f"window [0, {b.Tstar:.3g}] worst {rep.check.worst_ratio:.3g}, "
                   f"full run worst over t>0 {after_start(rep.full_run):.3g} ({rep.full_run.passed}), "
                   f"delta=0 max D {np.max(ctrl.D):.1g}")
    assert ok


RANDOM_SHORT = """
[grid]
dim = 3
N = 16

[physics]
nu = 0.05

[time]
dt = 0.01
t_end = 0.05

[init]
kind = random_spectrum

[run]
seed = 8
"""


def test_criterion_12_determinism(tmp_path):
    short = tmp_path / "short3d.ini"
    short.write_text(RANDOM_SHORT)
    ok, files = True, 0
    for cfg in (CONFIGS / "ot2d.ini", short):
        outs = []
        for rep in ("a", "b"):
            out = tmp_path / f"{cfg.stem}_{rep}"
            assert main(["simulate", "--config", str(cfg), "--out", str(out), "--seed", "42"]) == 0
            outs.append(out)
        for name in ("initial.bmhd", "final.bmhd", "series.csv"):
            ok &= (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
            files += 1
    record(12, ok, f"{files} checkpoint/CSV pairs byte-identical across repeated runs")
    assert ok

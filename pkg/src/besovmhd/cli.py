"""besovmhd command line: simulate, calderon, verify, calibrate, partition-check, plot.

Exit codes: 0 success, 2 configuration error, 3 runtime invariant violation
(NaN, divergence, CFL), 4 inequality-check failure (record on stderr).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import cli_io
from .calderon import SPLIT_COLUMNS, find_T1, heat_identity_defect, run_calderon, split_report
from .estimates import (ConstantsTable, CorpusSpec, DataNorms, bootstrap_monitor, budget_2d, budget_3d,
                        calibrate, check_aux_2d, check_B_growth, check_energy, check_time_derivatives,
                        check_u_estimate, default_corpus, difference_experiment, load_constants,
                        save_constants)
from .littlewood_paley import BesovIndex, build_partition, embedding_ratio
from .paraproduct import bony_triple
from .plots import plot_check, plot_series, plot_split
from .solver import SERIES_COLUMNS, ConfigError, InvariantViolation, NormSeries, make_initial_data, run
from .spectral import FourierGrid, random_field

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_CHECK = 0, 2, 3, 4
DEFAULT_CONSTANTS = Path(__file__).resolve().parents[2] / "configs" / "constants.json"


class CheckFailure(Exception):
    """Raised with the violation record when an inequality check fails."""


def _json(obj) -> str:
    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        raise TypeError(type(o).__name__)

    def clean(o):
        if isinstance(o, float) and not math.isfinite(o):
            return str(o)
        if isinstance(o, dict):
            return {k: clean(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [clean(v) for v in o]
        return o

    return json.dumps(clean(obj), indent=2, sort_keys=True, default=default) + "\n"


def _out_dir(args, cfg=None) -> Path:
    if args.out:
        return Path(args.out)
    return Path(cfg.out) if cfg is not None else Path("out")


def _constants(args, cfg, dim: int) -> ConstantsTable:
    path = args.constants or (cfg.constants if cfg is not None else None) or DEFAULT_CONSTANTS
    return load_constants(path, dim)


def _series_columns(series: NormSeries) -> dict[str, np.ndarray]:
    return {c: series[c] for c in SERIES_COLUMNS}


def _check_dict(rep) -> dict:
    return {"name": rep.name, "passed": rep.passed, "worst_ratio": rep.worst_ratio,
            "samples": len(rep.times), "violations": [list(v) for v in rep.violations]}


# ----------------------------------------------------------------------
# commands


def cmd_simulate(args) -> int:
    cfg = cli_io.load_run_config(args.config, seed=args.seed)
    grid = cfg.grid()
    part = build_partition(grid)
    state0 = make_initial_data(cfg.init_kind, grid, **cfg.initial_params())
    out = _out_dir(args, cfg)
    cli_io.write_checkpoint(out / "initial.bmhd", state0, cfg.nu)
    final, series = run(state0, cfg.solver(), part)
    cli_io.write_checkpoint(out / "final.bmhd", final, cfg.nu)
    cols = _series_columns(series)
    cli_io.write_csv(out / "series.csv", cols)
    plot_series(cols, out)
    print(f"simulate: {len(series)} samples to t={final.t:.6g}, wrote {out}")
    return EXIT_OK


def cmd_calderon(args) -> int:
    cfg = cli_io.load_run_config(args.config, seed=args.seed)
    grid = cfg.grid()
    if grid.dim != 3:
        raise ConfigError("calderon needs a three-dimensional configuration")
    consts = _constants(args, cfg, 3)
    part = build_partition(grid)
    state0 = make_initial_data(cfg.init_kind, grid, **cfg.initial_params())
    out = _out_dir(args, cfg)
    final, series, split = run_calderon(state0, cfg.solver(), part)
    cli_io.write_checkpoint(out / "final.bmhd", final, cfg.nu)
    cli_io.write_csv(out / "series.csv", _series_columns(series))
    split_cols = {c: split[c] for c in SPLIT_COLUMNS}
    cli_io.write_csv(out / "split.csv", split_cols)
    u0h = grid.sobolev_norm(grid.truncate(state0.u, cfg.R), 0.5)
    rep = split_report(split, series, u0h, consts.c3, consts.c4)
    heat = max(heat_identity_defect(grid, state0.u, cfg.nu, t, cfg.R) for t in split["t"])
    payload = {"split": asdict(rep), "heat_identity_defect": heat, "c3": consts.c3, "c4": consts.c4}
    cli_io.atomic_write_text(out / "calderon_report.json", _json(payload))
    plot_split(split_cols, out)
    print(_json(payload), end="")
    if not rep.passed:
        raise CheckFailure(f"splitting bounds violated: {asdict(rep)}")
    return EXIT_OK


def verify_series(cfg, series: NormSeries, consts: ConstantsTable) -> tuple[dict, list]:
    """Budgets, the bootstrap monitor and every along-run estimate check."""
    grid = cfg.grid()
    part = build_partition(grid)
    state0 = make_initial_data(cfg.init_kind, grid, **cfg.initial_params())
    state0 = replace(state0, u=grid.truncate(state0.u, cfg.R), B=grid.truncate(state0.B, cfg.R))
    norms = DataNorms.from_state(part, state0)
    if grid.dim == 2:
        budget = budget_2d(norms, cfg.nu, consts)
    else:
        T1 = math.inf if norms.u_Hhalf == 0 else find_T1(grid, state0.u, cfg.nu, consts.c3, consts.c4, cfg.R)
        budget = budget_3d(norms, cfg.nu, consts, T1)
    checks = list(check_energy(series))
    if grid.dim == 2:
        checks.append(check_aux_2d(series))
    checks += [check_B_growth(series, consts.c1), check_u_estimate(series, consts.c2),
               *check_time_derivatives(series, consts.time_derivative)]
    monitor = bootstrap_monitor(series, budget, consts)
    checks += monitor.checks
    report = {
        "budget": budget.as_dict(),
        "data_norms": asdict(norms),
        "monitor_window": {"end": monitor.window_end, "samples": monitor.samples},
        "checks": [_check_dict(c) for c in checks],
        "constants": {k: v for k, v in asdict(consts).items() if k != "raw"},
        "raw_ratios": consts.raw,
        "passed": all(c.passed for c in checks),
    }
    return report, checks


def cmd_verify(args) -> int:
    cfg = cli_io.load_run_config(args.config, seed=args.seed)
    consts = _constants(args, cfg, cfg.dim)
    out = _out_dir(args, cfg)
    series_path = Path(args.series) if args.series else out / "series.csv"
    cols = cli_io.read_csv(series_path)
    series = NormSeries.from_columns(cfg.dim, cfg.nu, cols)
    report, checks = verify_series(cfg, series, consts)
    cli_io.atomic_write_text(out / "verify_report.json", _json(report))
    for c in checks:
        plot_check(c, out)
    for c in checks:
        print(c.summary())
    print(f"budget: T*={report['budget']['Tstar']:.6g} (log T*={report['budget']['log_Tstar']:.6g}), "
          f"monitored samples={report['monitor_window']['samples']}")
    if not report["passed"]:
        raise CheckFailure("\n".join(c.violation_record() for c in checks if not c.passed))
    return EXIT_OK


def cmd_difference(args) -> int:
    cfg = cli_io.load_run_config(args.config, seed=args.seed)
    grid = cfg.grid()
    if grid.dim != 3:
        raise ConfigError("the difference experiment needs a three-dimensional configuration")
    consts = _constants(args, cfg, grid.dim)
    part = build_partition(grid)
    state0 = make_initial_data(cfg.init_kind, grid, **cfg.initial_params())
    norms = DataNorms.from_state(part, state0)
    T1 = find_T1(grid, state0.u, cfg.nu, consts.c3, consts.c4, cfg.R) if norms.u_Hhalf > 0 else math.inf
    Tstar = budget_3d(norms, cfg.nu, consts, T1).Tstar
    rep = difference_experiment(state0, cfg.solver(), cfg.delta, consts.gronwall, Tstar, seed=cfg.seed, part=part)
    out = _out_dir(args, cfg)
    cli_io.write_csv(out / "difference.csv", {"t": rep.times, "D": rep.D, "envelope": rep.envelope})
    plot_check(rep.full_run, out)
    print(rep.check.summary())
    print(rep.full_run.summary())
    if not rep.passed:
        raise CheckFailure(rep.check.violation_record())
    return EXIT_OK


def cmd_calibrate(args) -> int:
    dims = [args.dim] if args.dim else [2, 3]
    overrides = {}
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        overrides = cli_io.parse_sections(text).get("corpus", {})
    tables = {}
    for d in dims:
        spec = default_corpus(d)
        extra = {k: v for k, v in overrides.items() if k != "dim"}
        if "dim" in overrides and overrides["dim"] != d:
            continue
        if args.seed is not None:
            extra["seed"] = args.seed
        if args.n_fields is not None:
            extra["n_fields"] = args.n_fields
        spec = replace(spec, **extra)
        tables[d] = calibrate(spec)
        print(f"calibrated dim={d}: " + ", ".join(f"{k}={getattr(tables[d], k):.6g}"
                                                 for k in ("c1", "c2", "c3", "c4", "gronwall")))
    if not tables:
        raise ConfigError("no dimension selected for calibration")
    path = Path(args.constants) if args.constants else _out_dir(args) / "constants.json"
    save_constants(path, tables)
    print(f"wrote {path}")
    return EXIT_OK


def partition_suite(grid: FourierGrid, seed: int = 0) -> dict:
    part = build_partition(grid)
    defects = part.identity_defects()
    rng = np.random.default_rng(seed)
    u = random_field(grid, 2.0, rng, components=0)
    v = random_field(grid, 2.5, rng, components=0)
    exact = grid.product(u, v)
    bony = bony_triple(part, u, v).total()
    vel = random_field(grid, 2.5, rng)
    src = BesovIndex(grid.dim / 2, 2.0, 1.0)
    result = {
        "jmin": part.jmin,
        "jmax": part.jmax,
        **defects,
        "support_violations": part.support_violations(),
        "overlap_violations": part.overlap_violations(),
        "bony_reconstruction": float(grid.l2_norm(bony - exact) / grid.l2_norm(exact)),
        "embedding_Linf": embedding_ratio(part, vel, src, np.inf),
    }
    ok = (defects["inhomogeneous_sum"] <= 1e-12 and defects["homogeneous_sum"] <= 1e-12
          and defects["square_sum_min"] >= 0.5 and defects["square_sum_max"] <= 1.0 + 1e-12
          and result["support_violations"] == 0 and result["overlap_violations"] == 0
          and result["bony_reconstruction"] <= 1e-11)
    result["passed"] = bool(ok)
    return result


def cmd_partition_check(args) -> int:
    if args.config:
        cfg = cli_io.load_run_config(args.config, seed=args.seed)
        grid = cfg.grid()
    else:
        try:
            grid = FourierGrid(args.dim, args.N)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    result = partition_suite(grid, args.seed or 0)
    text = _json(result)
    if args.out:
        cli_io.atomic_write_text(Path(args.out) / "partition_check.json", text)
    print(text, end="")
    if not result["passed"]:
        raise CheckFailure(f"partition suite failed: {text}")
    return EXIT_OK


def cmd_plot(args) -> int:
    cols = cli_io.read_csv(args.series)
    out = _out_dir(args)
    paths = plot_series(cols, out)
    for p in paths:
        print(p)
    return EXIT_OK


# ----------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="besovmhd", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="INI run configuration")
        p.add_argument("--out", help="output directory (overrides [run] out)")
        p.add_argument("--constants", help="constants table JSON")
        p.add_argument("--seed", type=int, help="unsigned 64-bit seed, overrides the config")
        return p

    common(sub.add_parser("simulate", help="run the truncated solver")).set_defaults(fn=cmd_simulate)
    common(sub.add_parser("calderon", help="3D run with the heat/Stokes/remainder split")).set_defaults(
        fn=cmd_calderon)
    p = common(sub.add_parser("verify", help="budgets, bootstrap monitor and estimate checks"))
    p.add_argument("--series", help="series CSV (default OUT/series.csv)")
    p.set_defaults(fn=cmd_verify)
    common(sub.add_parser("difference", help="3D two-run Gronwall experiment")).set_defaults(fn=cmd_difference)
    p = common(sub.add_parser("calibrate", help="calibrate the constants table"), config_required=False)
    p.add_argument("--dim", type=int, choices=(2, 3))
    p.add_argument("--n-fields", type=int, dest="n_fields")
    p.set_defaults(fn=cmd_calibrate)
    p = common(sub.add_parser("partition-check", help="partition and paraproduct invariants"),
               config_required=False)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--N", type=int, default=128)
    p.set_defaults(fn=cmd_partition_check)
    p = sub.add_parser("plot", help="SVG charts from a series CSV")
    p.add_argument("--series", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_plot)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    if getattr(args, "seed", None) is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except CheckFailure as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())

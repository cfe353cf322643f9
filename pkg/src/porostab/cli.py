"""``porostab <mode> --config <file> [--out <dir>] [--seed <u64>]``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import cli_io, stabmap
from .dispersion import Regime
from .errors import NoSignChange, NumericalFailure, SchemaError

EXIT_OK, EXIT_SCHEMA, EXIT_NUMERIC = 0, 2, 3


def _grid(cfg: cli_io.RunConfig) -> stabmap.ScanGrid:
    lo, hi = cfg.param_range
    return stabmap.ScanGrid(cfg.param, np.linspace(lo, hi, cfg.n_param), cfg.k_values(),
                            regime=Regime(cfg.regime), rho_mode=cfg.rho_mode)


def _dump(obj, path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2) + "\n")


def run(cfg: cli_io.RunConfig, out: Path, log=print) -> dict:
    """Execute one configured run, writing its files under ``out``.

    Returns a small JSON-ready summary.
    """
    params = cfg.model_params()
    if cfg.mode == "simulate":
        pass
    elif cfg.rho_mode == "quasi_static" and cfg.mode in ("map", "dispersion", "critical"):
        params = params.with_(rho=0.0)
    if cfg.mode == "homog":
        v = stabmap.homogeneous_verdict(params)
        summary = {"beta2": params.beta2, "beta3": params.beta3, "stable": v.stable, "margin": v.margin,
                   "quadratic": v.quadratic, "reason": v.reason}
        _dump(summary, out / "homog.json")
    elif cfg.mode == "map":
        fld = stabmap.scan(params, _grid(cfg), cfg.expression)
        files = cli_io.write_field_csv(fld, out / f"map_{cfg.expression}.csv", cfg.param)
        summary = {"files": [str(f) for f in files], "n_polylines": len(fld.contour_polylines)}
    elif cfg.mode == "dispersion":
        k = cfg.k_values()
        growth = stabmap.dispersion_curve(params, k, Regime(cfg.regime))
        cli_io.write_curve(k, growth, out / "dispersion.csv")
        summary = {"max_re_phi": float(np.nanmax(growth)), "k_at_max": float(k[int(np.nanargmax(growth))])}
    elif cfg.mode == "critical":
        p_c, k_c = stabmap.critical_point(params, _grid(cfg), cfg.expression, n_coarse=cfg.n_k)
        summary = {"param": cfg.param, "critical_value": p_c, "critical_k": k_c}
        _dump(summary, out / "critical.json")
    elif cfg.mode == "patterning":
        ps = stabmap.patterning_space(params, cfg.beta2_range, cfg.beta3_range, cfg.n_grid)
        for name, curves in (("onset", ps.onset_curves), ("discriminant", ps.discriminant_curves),
                             ("homogeneous", ps.homogeneous_curves)):
            cli_io.write_polylines(curves, out / f"patterning_{name}.csv", ("beta2", "beta3"))
        summary = {"n_onset": len(ps.onset_curves), "n_discriminant": len(ps.discriminant_curves),
                   "n_homogeneous": len(ps.homogeneous_curves)}
    else:
        from .fem2d.scenario import run_scenario

        sc = cfg.build_scenario()

        def snapshot(mesh, state, index):
            cli_io.write_vtk(mesh, state, out / f"snapshot_{index:04d}.vtk")

        def progress(n, state):
            if n % max(1, sc.n_steps // 10) == 0:
                log(f"step {n}/{sc.n_steps} t={state.time:.4g}")

        res = run_scenario(sc, snapshot_writer=snapshot, progress=progress)
        cols, data = res.probe_table()
        cli_io.write_probes(cols, data, out / "probes.csv")
        cli_io.write_table(["t", "mass_w1", "mass_w2"], np.column_stack([res.step_times, res.mass_w1, res.mass_w2]),
                           out / "mass.csv")
        summary = {"scenario": sc.name, "steps": sc.n_steps, "snapshots": len(res.times),
                   "max_newton_iterations": int(res.newton_iterations.max(initial=0)),
                   "wall_time_s": res.wall_time}
    return summary


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="porostab", description=__doc__.splitlines()[0])
    parser.add_argument("mode", choices=cli_io.MODES)
    parser.add_argument("--config", type=Path, help="JSON run description (mode may be omitted)")
    parser.add_argument("--out", type=Path, help="output directory (overrides the config)")
    parser.add_argument("--seed", type=int, help="random seed (overrides the config)")
    args = parser.parse_args(argv)
    try:
        doc = json.loads(args.config.read_text()) if args.config else {}
        if not isinstance(doc, dict):
            raise SchemaError("$", "expected a JSON object")
        if doc.setdefault("mode", args.mode) != args.mode:
            raise SchemaError("mode", f"config says {doc['mode']!r} but the command line says {args.mode!r}")
        if args.seed is not None:
            doc["seed"] = args.seed
        cfg = cli_io.parse_config(json.dumps(doc))
    except (SchemaError, ValueError, OSError) as exc:
        print(f"porostab: configuration error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    out = args.out or Path(cfg.out or ".")
    try:
        summary = run(cfg, out, log=lambda s: print(s, file=sys.stderr))
    except (NumericalFailure, NoSignChange, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"porostab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except cli_io.IoError as exc:
        print(f"porostab: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    print(json.dumps(summary, indent=2, default=str))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

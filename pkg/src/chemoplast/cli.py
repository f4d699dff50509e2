"""Command-line entry point ``app``.

Exit codes: 0 success, 1 configuration error, 2 solver failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import _accel
from .config import PRESETS, ConfigError, RunConfig, load_config, preset_document
from .constitutive import MaterialError
from .coupling import SolverFailure, run_coupled
from .mesh import MeshError
from .output import emit_outputs, write_compare_csv, write_report_csv

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2


def _prepare(path: str) -> tuple[RunConfig, object]:
    cfg = load_config(path)
    try:
        mesh = cfg.build_mesh()
        cfg.check_mesh(mesh)
    except MeshError as exc:
        raise ConfigError(f"{path}: mesh: {exc}") from None
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return cfg, mesh


def _threads(cfg: RunConfig, override) -> None:
    _accel.set_threads(override if override is not None else cfg.raw["solver"].get("threads"))


def cmd_run(args) -> int:
    cfg, mesh = _prepare(args.config)
    _threads(cfg, args.threads)
    out = Path(args.out) if args.out else cfg.base_dir / cfg.raw["output"]["dir"]
    t0 = time.perf_counter()
    report, final, history = run_coupled(cfg, mesh)
    emit_outputs(report, history, cfg, mesh, out)
    worst = max((r.violation_pct for r in report.rows), default=0.0)
    print(f"{len(report)} steps in {time.perf_counter() - t0:.2f} s; "
          f"max violation {worst:.2f}%; outputs in {out}")
    return EXIT_OK


def cmd_preset(args) -> int:
    json.dump(preset_document(args.name), sys.stdout, indent=2)
    sys.stdout.write("\n")
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg, mesh = _prepare(args.config)
    m = cfg.material
    rows = [("mesh", f"{mesh.n_nodes} nodes, {mesh.n_elements} elements"),
            ("model", cfg.model.value), ("coupling", cfg.coupling),
            ("diffusion_path", cfg.diffusion_path), ("bounds", f"[{cfg.c_min}, {cfg.c_max}]"),
            ("steps", str(len(cfg.schedule))), ("peak_traction", f"{cfg.peak_traction:g}")]
    rows += [(k, f"{v}") for k, v in m.to_dict().items()]
    rows.append(("E0 (derived)", f"{m.E0:.6g}"))
    width = max(len(k) for k, _ in rows)
    for k, v in rows:
        print(f"{k:<{width}}  {v}")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg, mesh = _prepare(args.config)
    _threads(cfg, args.threads)
    paths = [p.strip() for p in args.paths.split(",") if p.strip()]
    models = [m.strip() for m in args.models.split(",")] if args.models else [cfg.model.value]
    out = Path(args.out) if args.out else cfg.base_dir / cfg.raw["output"]["dir"]
    out.mkdir(parents=True, exist_ok=True)
    reports = {}
    for model in models:
        for path in paths:
            run_cfg = cfg.with_overrides(model=model, diffusion_path=path)
            label = f"{run_cfg.model.value}_{path}"
            report, _, _ = run_coupled(run_cfg, mesh, snapshots="none")
            write_report_csv(report, out / f"report_{label}.csv")
            reports[label] = report
            worst = max((r.violation_pct for r in report.rows), default=0.0)
            print(f"{label}: {len(report)} steps, max violation {worst:.2f}%")
    write_compare_csv(reports, out / "compare.csv")
    print(f"merged report: {out / 'compare.csv'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="app", description="Coupled elastoplasticity-diffusion runs")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one configuration")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (default: output.dir of the config)")
    r.add_argument("--threads", type=int)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("preset", help="print a benchmark configuration")
    s.add_argument("name", choices=sorted(PRESETS))
    s.set_defaults(func=cmd_preset)

    v = sub.add_parser("validate", help="check a configuration and print the resolved parameters")
    v.add_argument("config")
    v.set_defaults(func=cmd_validate)

    c = sub.add_parser("compare", help="run several diffusion paths/models and merge the reports")
    c.add_argument("config")
    c.add_argument("--paths", default="cg,nn")
    c.add_argument("--models")
    c.add_argument("--out")
    c.add_argument("--threads", type=int)
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, MaterialError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

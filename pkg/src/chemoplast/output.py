"""Emission of report tables, field snapshots, path profiles and run metadata."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .constitutive import von_mises
from .coupling import REPORT_COLUMNS, RunReport, Snapshot
from .mesh import Mesh, NodalField, sample_along_path

__all__ = ["REPORT_COLUMNS", "emit_outputs", "write_report_csv", "write_vtk", "write_path_csv",
           "write_compare_csv", "read_report_csv"]


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_report_csv(report: RunReport, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_COLUMNS)
        for row in report.rows:
            w.writerow([_fmt(v) for v in row.as_tuple()])
    return path


def read_report_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def write_vtk(mesh: Mesh, snap: Snapshot, path, title: str = "chemoplast snapshot") -> Path:
    """Legacy ASCII unstructured grid with nodal and element fields."""
    path = Path(path)
    n, m = mesh.n_nodes, mesh.n_elements
    lines = ["# vtk DataFile Version 3.0", f"{title} step {snap.step} t={snap.time_s:g}",
             "ASCII", "DATASET UNSTRUCTURED_GRID", f"POINTS {n} double"]
    lines += [f"{x!r} {y!r} 0.0" for x, y in mesh.nodes.tolist()]
    lines.append(f"CELLS {m} {4 * m}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.elements.tolist()]
    lines.append(f"CELL_TYPES {m}")
    lines += ["5"] * m
    lines.append(f"POINT_DATA {n}")
    lines.append("VECTORS displacement double")
    lines += [f"{ux!r} {uy!r} 0.0" for ux, uy in snap.displacement.tolist()]
    lines += ["SCALARS concentration double 1", "LOOKUP_TABLE default"]
    lines += [repr(float(v)) for v in snap.concentration]
    lines.append(f"CELL_DATA {m}")
    lines += ["SCALARS von_mises double 1", "LOOKUP_TABLE default"]
    lines += [repr(float(v)) for v in von_mises(snap.stress)]
    lines += ["SCALARS kappa double 1", "LOOKUP_TABLE default"]
    lines += [repr(float(v)) for v in snap.kappa]
    lines += ["SCALARS yielded int 1", "LOOKUP_TABLE default"]
    lines += [str(int(v > 0.0)) for v in snap.kappa]
    path.write_text("\n".join(lines) + "\n")
    return path


def write_path_csv(mesh: Mesh, snap: Snapshot, polyline, path, count: int = 51) -> Path:
    path = Path(path)
    samples = sample_along_path(mesh, NodalField(snap.concentration), polyline, count)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["arclength", "c"])
        for s in samples:
            w.writerow([repr(float(s.arclength)), repr(float(s.value))])
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and math.isinf(obj):
        return "inf"
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def emit_outputs(report: RunReport, history: list, cfg, mesh: Mesh, out_dir) -> dict:
    """Write report.csv, VTK snapshots, path profiles and run.json into ``out_dir``.

    Returns a mapping from output kind to the list of written paths.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: dict[str, list] = {"report": [write_report_csv(report, out / "report.csv")],
                                "vtk": [], "path": []}
    opts = cfg.raw["output"]
    polyline = cfg.probe_path(mesh)
    steps = opts.get("path_steps", "all")
    want_path = (lambda k: True) if steps == "all" else (lambda k: k in set(steps or []))
    for snap in history:
        if opts.get("vtk", True):
            written["vtk"].append(write_vtk(mesh, snap, out / f"fields_{snap.step:03d}.vtk"))
        if polyline is not None and want_path(snap.step):
            written["path"].append(write_path_csv(mesh, snap, polyline,
                                                  out / f"path_C_{snap.step:03d}.csv",
                                                  int(opts.get("path_samples", 51))))
    meta = {"config": _jsonable(cfg.resolved()), "n_nodes": mesh.n_nodes,
            "n_elements": mesh.n_elements, "steps": len(report)}
    run_json = out / "run.json"
    run_json.write_text(json.dumps(meta, indent=2) + "\n")
    written["run"] = [run_json]
    return written


def write_compare_csv(reports: dict, path) -> Path:
    """Merge several runs into one table keyed by step.

    ``reports`` maps a label such as ``"I_cg"`` to a :class:`RunReport`; every
    report column except ``step``, ``time_s`` and ``load_scale`` is suffixed with it.
    """
    path = Path(path)
    labels = list(reports)
    n = max((len(r) for r in reports.values()), default=0)
    shared = ("step", "time_s", "load_scale")
    cols = [c for c in REPORT_COLUMNS if c not in shared]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(shared) + [f"{c}_{lab}" for lab in labels for c in cols])
        for i in range(n):
            first = next(r.rows[i] for r in reports.values() if len(r) > i)
            row = [_fmt(getattr(first, c)) for c in shared]
            for lab in labels:
                rep = reports[lab]
                row += [_fmt(getattr(rep.rows[i], c)) if len(rep) > i else "" for c in cols]
            w.writerow(row)
    return path

"""Run configuration: JSON schema, validation, resolution and benchmark presets.

A configuration is one JSON object. Every key is optional; missing keys take the
defaults of :data:`DEFAULTS`. ``load_config`` reports JSON syntax errors with the
line number and schema errors with the dotted key path.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .constitutive import DegradationModel, MaterialError, MaterialParams
from .deformation import DeformationBC, NewtonOpts
from .diffusion import DiffusionBC
from .mesh import Mesh, MeshError, generate_plate_with_hole, load_mesh, plate_probe_path
from .qp import TrustRegionOpts
from .schedule import PEAK_TRACTION, LoadSchedule, default_load_schedule

COUPLINGS = ("uncoupled", "one_way", "two_way")
PATHS = ("cg", "nn")

DEFAULTS: dict = {
    "mesh": {"generate": {"length": 0.36, "height": 0.20, "hole_radius": 0.05,
                          "refinement": 6, "jitter": 0.25, "seed": 0,
                          "layout": "annulus"}},
    "material": {},
    "phi_by_model": {},
    "model": "I",
    "coupling": "two_way",
    "diffusion_path": "nn",
    "bounds": {"c_min": 0.0, "c_max": None},
    "schedule": "default",
    "peak_traction": PEAK_TRACTION,
    "deformation_bc": {
        "dirichlet": [["left_edge", 0, 0.0], ["corner_bl", 1, 0.0]],
        "neumann": [["right_edge", [1.0, 0.0]]],
    },
    "diffusion_bc": {"dirichlet": [["hole", 1.0], ["outer", 0.0]], "neumann": []},
    "source": None,
    "probes": {"A": "point_A", "B": "point_B"},
    "path": None,
    "initial_concentration": "diffusion",
    "output": {"dir": "out", "snapshots": "all", "vtk": True, "path_steps": "all", "path_samples": 51},
    "solver": {"newton_rel_tol": 1e-6, "newton_max_iter": 60, "cg_tol": 1e-6, "threads": 1,
               "qp": {"rel_tol": 1e-14, "pcg_tol": 0.1, "max_outer": 200}},
}

_SHARED = {
    "lambda0": 1.94e10, "mu0": 2.92e10, "lambda1": -8.5e8, "mu1": -8.5e8,
    "sigma0": 243e6, "Et": 2.171e9, "n_w": 5.0, "theta": math.pi / 3,
    "eta_T": 1.0, "eta_S": 1.0, "E_ref": 1e-3, "m_source": 0.0,
}

PRESETS = {
    "caseI": {"material": {**_SHARED, "d1": 50.0, "d2": 1.0, "c_ref": 0.05, "zeta": -0.3},
              "phi_by_model": {"I": [1.2, 1.2], "II": [1.25, 1.25]}},
    "caseII_iso": {"material": {**_SHARED, "d1": 1.0, "d2": 1.0, "c_ref": 0.0365, "zeta": -0.9},
                   "phi_by_model": {"I": [1.75, 1.75], "II": [2.0, 2.0]}},
    "caseII_low": {"material": {**_SHARED, "d1": 1.0, "d2": 5.0, "c_ref": 0.0365, "zeta": -0.9},
                   "phi_by_model": {"I": [1.75, 1.75], "II": [2.0, 2.0]}},
    "caseII_high": {"material": {**_SHARED, "d1": 1.0, "d2": 500.0, "c_ref": 0.0365,
                                 "zeta": -0.9},
                    "phi_by_model": {"I": [1.75, 1.75], "II": [2.0, 2.0]}},
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key or line."""


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in ("mesh", "material"):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _need(cond: bool, where: str, msg: str) -> None:
    if not cond:
        raise ConfigError(f"{where}: {msg}")


@dataclass
class RunConfig:
    """Fully resolved run configuration."""

    raw: dict
    material: MaterialParams
    model: DegradationModel
    coupling: str
    diffusion_path: str
    c_min: float
    c_max: float
    schedule: LoadSchedule
    peak_traction: float
    base_dir: Path

    # ---------------------------------------------------------------- building

    @classmethod
    def from_dict(cls, data: dict, base_dir: str | Path = ".") -> "RunConfig":
        _need(isinstance(data, dict), "<root>", "configuration must be a JSON object")
        unknown = set(data) - set(DEFAULTS)
        _need(not unknown, "<root>", f"unknown keys {sorted(unknown)}")
        raw = _merge(DEFAULTS, data)

        try:
            model = DegradationModel.parse(raw["model"])
        except ValueError as exc:
            raise ConfigError(f"model: {exc}") from None
        _need(raw["coupling"] in COUPLINGS, "coupling", f"must be one of {COUPLINGS}")
        _need(raw["diffusion_path"] in PATHS, "diffusion_path", f"must be one of {PATHS}")

        mat_dict = dict(raw["material"])
        phi = raw["phi_by_model"].get(model.value)
        if phi is not None:
            _need(len(phi) == 2, f"phi_by_model.{model.value}", "expects [phi_T, phi_S]")
            mat_dict["phi_T"], mat_dict["phi_S"] = float(phi[0]), float(phi[1])
        if "rho_b" in mat_dict:
            mat_dict["rho_b"] = tuple(mat_dict["rho_b"])
        try:
            material = MaterialParams.from_dict(mat_dict)
        except (MaterialError, TypeError) as exc:
            raise ConfigError(f"material: {exc}") from None

        diff = raw["diffusion_bc"]
        _need(isinstance(diff.get("dirichlet"), list) and diff["dirichlet"], "diffusion_bc.dirichlet",
              "needs at least one [node_set, value] entry")
        for i, item in enumerate(diff["dirichlet"]):
            _need(len(item) == 2 and isinstance(item[0], str), f"diffusion_bc.dirichlet[{i}]",
                  "expects [node_set, value]")
        data_max = max(float(v) for _, v in diff["dirichlet"])

        b = raw["bounds"]
        if b == "nonnegative":
            c_min, c_max = 0.0, math.inf
        else:
            _need(isinstance(b, dict), "bounds", "expects {c_min, c_max} or 'nonnegative'")
            c_min = float(b.get("c_min", 0.0))
            c_max = b.get("c_max")
            c_max = data_max if c_max is None else (math.inf if c_max == "inf" else float(c_max))
        _need(c_min <= c_max, "bounds", "c_min exceeds c_max")

        sched = raw["schedule"]
        try:
            schedule = default_load_schedule() if sched == "default" else \
                LoadSchedule.from_dict(sched)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"schedule: {exc}") from None

        dbc = raw["deformation_bc"]
        _need(dbc.get("dirichlet"), "deformation_bc.dirichlet", "needs at least one entry")
        for i, item in enumerate(dbc["dirichlet"]):
            _need(len(item) == 3 and item[1] in (0, 1), f"deformation_bc.dirichlet[{i}]",
                  "expects [node_set, component 0|1, value]")
        for i, item in enumerate(dbc.get("neumann", [])):
            _need(len(item) == 2 and len(item[1]) == 2, f"deformation_bc.neumann[{i}]",
                  "expects [edge_tag, [tx, ty]]")

        _need(raw["initial_concentration"] in ("diffusion", "zero"), "initial_concentration",
              "must be 'diffusion' or 'zero'")
        mesh_spec = raw["mesh"]
        _need(isinstance(mesh_spec, dict) and len(mesh_spec) == 1
              and next(iter(mesh_spec)) in ("generate", "file"), "mesh",
              "expects {'generate': {...}} or {'file': path}")
        peak = float(raw["peak_traction"])
        _need(math.isfinite(peak), "peak_traction", "must be finite")
        cfg = cls(raw, material, model, raw["coupling"], raw["diffusion_path"], c_min, c_max,
                  schedule, peak, Path(base_dir))
        if model in (DegradationModel.MODEL_I, DegradationModel.LINEAR_ELASTIC):
            try:
                material.check_concentration_range(max(c_max if math.isfinite(c_max) else
                                                       data_max, data_max))
            except MaterialError as exc:
                raise ConfigError(f"material: {exc}") from None
        return cfg

    # ---------------------------------------------------------------- objects

    def build_mesh(self) -> Mesh:
        spec = self.raw["mesh"]
        try:
            if "file" in spec:
                path = Path(spec["file"])
                if not path.is_absolute():
                    path = self.base_dir / path
                return load_mesh(path)
            g = {**DEFAULTS["mesh"]["generate"], **spec["generate"]}
            return generate_plate_with_hole(g["length"], g["height"], g["hole_radius"],
                                            g["refinement"], g["jitter"], g["seed"],
                                            g["layout"])
        except FileNotFoundError as exc:
            raise ConfigError(f"mesh.file: file not found: {exc.filename}") from None
        except TypeError as exc:
            raise ConfigError(f"mesh.generate: {exc}") from None

    def check_mesh(self, mesh: Mesh) -> None:
        """All node sets and tags referenced by the configuration must exist."""
        refs = [(f"deformation_bc.dirichlet[{i}]", d[0], "set")
                for i, d in enumerate(self.raw["deformation_bc"]["dirichlet"])]
        refs += [(f"deformation_bc.neumann[{i}]", d[0], "tag")
                 for i, d in enumerate(self.raw["deformation_bc"].get("neumann", []))]
        refs += [(f"diffusion_bc.dirichlet[{i}]", d[0], "set")
                 for i, d in enumerate(self.raw["diffusion_bc"]["dirichlet"])]
        refs += [(f"diffusion_bc.neumann[{i}]", d[0], "tag")
                 for i, d in enumerate(self.raw["diffusion_bc"].get("neumann", []))]
        refs += [(f"probes.{k}", v, "set") for k, v in self.raw["probes"].items()
                 if isinstance(v, str)]
        for where, name, kind in refs:
            ok = name in mesh.node_sets if kind == "set" else name in mesh.edge_tags
            _need(ok, where, f"mesh has no {'node set' if kind == 'set' else 'edge tag'} {name!r}")

    def deformation_bc(self) -> DeformationBC:
        sched, peak = self.schedule, self.peak_traction
        dirichlet = [(s, int(c), float(v)) for s, c, v in self.raw["deformation_bc"]["dirichlet"]]
        neumann = []
        for tag, (tx, ty) in self.raw["deformation_bc"].get("neumann", []):
            neumann.append((tag, (lambda t, a=float(tx): peak * a * sched.scale_at(t),
                                  lambda t, a=float(ty): peak * a * sched.scale_at(t))))
        return DeformationBC(dirichlet, neumann)

    def diffusion_bc(self) -> DiffusionBC:
        d = self.raw["diffusion_bc"]
        return DiffusionBC([(s, float(v)) for s, v in d["dirichlet"]],
                           [(s, float(v)) for s, v in d.get("neumann", [])])

    def source(self) -> float:
        return self.material.m_source if self.raw["source"] is None else float(self.raw["source"])

    def newton_opts(self) -> NewtonOpts:
        s = self.raw["solver"]
        return NewtonOpts(float(s["newton_rel_tol"]), None, int(s["newton_max_iter"]))

    def qp_opts(self) -> TrustRegionOpts:
        q = self.raw["solver"]["qp"]
        return TrustRegionOpts(rel_tol=float(q["rel_tol"]), pcg_tol=float(q["pcg_tol"]),
                               max_outer=int(q["max_outer"]))

    def probe_path(self, mesh: Mesh):
        if self.raw["path"] is not None:
            return self.raw["path"]
        if "generate" in self.raw["mesh"]:
            g = {**DEFAULTS["mesh"]["generate"], **self.raw["mesh"]["generate"]}
            return plate_probe_path(g["length"], g["height"], g["hole_radius"]).tolist()
        return None

    # ---------------------------------------------------------------- echo

    def resolved(self) -> dict:
        """Configuration with every default filled in; re-ingesting it is lossless."""
        out = copy.deepcopy(self.raw)
        out["material"] = self.material.to_dict()
        out["model"] = self.model.value
        out["phi_by_model"] = {}
        out["bounds"] = {"c_min": self.c_min,
                         "c_max": "inf" if math.isinf(self.c_max) else self.c_max}
        out["schedule"] = self.schedule.to_dict()
        return out

    def with_overrides(self, **kw) -> "RunConfig":
        data = copy.deepcopy(self.raw)
        data.update(kw)
        return RunConfig.from_dict(data, self.base_dir)


def preset(name: str, **overrides) -> RunConfig:
    """Benchmark configuration for ``caseI``, ``caseII_iso``, ``caseII_low`` or ``caseII_high``."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    data = copy.deepcopy(PRESETS[name])
    data.update(overrides)
    return RunConfig.from_dict(data)


def preset_document(name: str) -> dict:
    """JSON document of a preset with every default spelled out."""
    return copy.deepcopy(preset(name).raw)


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except FileNotFoundError:
        raise ConfigError(f"{p}: file not found") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    if isinstance(data, dict) and isinstance(data.get("config"), dict) and "mesh" not in data:
        data = data["config"]  # run.json written by a previous run
    try:
        return RunConfig.from_dict(data, p.parent)
    except ConfigError as exc:
        raise ConfigError(f"{p}: {exc}") from None

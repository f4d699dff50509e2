"""Staggered deformation/diffusion driver.

Per load step the deformation problem is solved once at the frozen concentration
of the previous step, then the diffusion problem is solved once with the
diffusivity evaluated at the new strain. There is no inner fixed-point sweep.
"""

from __future__ import annotations

import enum
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .constitutive import DegradationModel, MaterialParams, PointStates
from .deformation import DeformationError, solve_load_step
from .diffusion import (
    DiffusionError,
    DiffusionResult,
    DiffusivityModel,
    assemble_diffusion,
    solve_cg_path,
    solve_nn_path,
    strain_trace,
)
from .linalg import NotPositiveDefiniteError
from .mesh import Mesh, MeshError
from .schedule import LoadSchedule, default_load_schedule

log = logging.getLogger(__name__)

__all__ = [
    "CouplingMode", "CoupledState", "LoadSchedule", "RunReport", "ReportRow", "SolverFailure",
    "Snapshot", "default_load_schedule", "plastic_zone_percentage", "pure_diffusion",
    "run_coupled",
]

REPORT_COLUMNS = (
    "step", "time_s", "load_scale", "newton_iters", "def_assembly_s", "def_solve_s",
    "diff_iters", "pcg_total", "diff_assembly_s", "diff_solve_s", "violation_pct",
    "min_c", "max_c", "plastic_zone_pct", "uA_x", "uA_y", "uB_x", "uB_y",
)


class CouplingMode(enum.Enum):
    UNCOUPLED = "uncoupled"
    ONE_WAY = "one_way"
    TWO_WAY = "two_way"


class SolverFailure(RuntimeError):
    """A subproblem failed; carries the step index and the underlying diagnostics."""

    def __init__(self, step: int, time_s: float, cause: Exception):
        super().__init__(f"step {step} (t={time_s:g} s): {type(cause).__name__}: {cause}")
        self.step = step
        self.time_s = time_s
        self.cause = cause


@dataclass
class CoupledState:
    displacement: np.ndarray
    concentration: np.ndarray
    states: PointStates
    step: int


@dataclass
class Snapshot:
    step: int
    time_s: float
    displacement: np.ndarray
    concentration: np.ndarray
    stress: np.ndarray
    kappa: np.ndarray
    plastic_strain: np.ndarray | None = None


@dataclass
class ReportRow:
    step: int
    time_s: float
    load_scale: float
    newton_iters: int
    def_assembly_s: float
    def_solve_s: float
    diff_iters: int
    pcg_total: int
    diff_assembly_s: float
    diff_solve_s: float
    violation_pct: float
    min_c: float
    max_c: float
    plastic_zone_pct: float
    uA_x: float
    uA_y: float
    uB_x: float
    uB_y: float

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, k) for k in REPORT_COLUMNS)


@dataclass
class RunReport:
    rows: list = field(default_factory=list)
    initial: DiffusionResult | None = None

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])


def plastic_zone_percentage(states, model=None, mat: MaterialParams | None = None) -> float:
    """Share of elements that have yielded at some point (``kappa > 0``), in percent.

    ``model`` and ``mat`` are accepted for interface symmetry; the count only
    depends on the hardening variable.
    """
    kappa = np.asarray(getattr(states, "kappa", states), dtype=float)
    if kappa.size == 0:
        return 0.0
    return 100.0 * float(np.count_nonzero(kappa > 0.0)) / kappa.size


def _diffusivity(cfg: RunConfig, mode: CouplingMode) -> DiffusivityModel:
    kind = "two_way" if mode is CouplingMode.TWO_WAY else "one_way"
    return DiffusivityModel.from_material(cfg.material, kind)


def _solve_diffusion(cfg: RunConfig, system) -> DiffusionResult:
    s = cfg.raw["solver"]
    if cfg.diffusion_path == "cg":
        return solve_cg_path(system, cfg.c_min, cfg.c_max, tol=float(s["cg_tol"]))
    return solve_nn_path(system, cfg.c_min, cfg.c_max, cfg.qp_opts())


def pure_diffusion(cfg: RunConfig, mesh: Mesh | None = None) -> DiffusionResult:
    """Steady diffusion at zero strain with the configured path and bounds."""
    mesh = mesh or cfg.build_mesh()
    system = assemble_diffusion(mesh, None, cfg.diffusion_bc(),
                                _diffusivity(cfg, CouplingMode.ONE_WAY), cfg.source())
    return _solve_diffusion(cfg, system)


def _probe(mesh: Mesh, u: np.ndarray, name) -> tuple[float, float]:
    if name is None:
        return (math.nan, math.nan)
    if isinstance(name, str):
        idx = mesh.node_set(name)
        return tuple(float(v) for v in u[idx].mean(axis=0))
    return tuple(float(v) for v in mesh.interpolate(u, np.atleast_2d(name))[0])


def run_coupled(cfg: RunConfig, mesh: Mesh | None = None, *, snapshots=None):
    """Run the staggered loop over the configured load schedule.

    Parameters
    ----------
    cfg : RunConfig
    mesh : Mesh, optional
        Pre-built mesh; built from the configuration when omitted.
    snapshots : "all", "none" or iterable of step indices, optional
        Overrides ``output.snapshots``.

    Returns
    -------
    report : RunReport
    final : CoupledState
    history : list of Snapshot

    Raises
    ------
    SolverFailure
        If the deformation or diffusion solve of any step fails.
    """
    mesh = mesh or cfg.build_mesh()
    cfg.check_mesh(mesh)
    mode = CouplingMode(cfg.coupling)
    model = cfg.model
    mat = cfg.material
    dbc = cfg.deformation_bc()
    cbc = cfg.diffusion_bc()
    dmodel = _diffusivity(cfg, mode)
    newton = cfg.newton_opts()
    probes = cfg.raw["probes"]
    want = cfg.raw["output"]["snapshots"] if snapshots is None else snapshots
    if want == "all":
        keep = lambda k: True  # noqa: E731
    elif want in ("none", None):
        keep = lambda k: False  # noqa: E731
    else:
        sel = {int(k) for k in want}
        keep = sel.__contains__

    report = RunReport()
    n = mesh.n_nodes
    u = np.zeros((n, 2))
    if cfg.raw["initial_concentration"] == "zero":
        c = np.zeros(n)
    else:
        try:
            report.initial = pure_diffusion(cfg, mesh)
        except (DiffusionError, NotPositiveDefiniteError, RuntimeError) as exc:
            raise SolverFailure(0, 0.0, exc) from exc
        c = report.initial.c
    states = PointStates.virgin(mesh.n_elements)
    history: list[Snapshot] = []
    for k, (t, scale) in enumerate(cfg.schedule.steps(), start=1):
        c_mech = None if mode is CouplingMode.UNCOUPLED else c
        t0 = time.perf_counter()
        try:
            dres = solve_load_step(mesh, states, u, dbc, t, c_mech, model, mat, newton)
        except (DeformationError, MeshError) as exc:
            raise SolverFailure(k, t, exc) from exc
        log.debug("step %d t=%.3f newton=%d (%.2fs)", k, t, dres.newton_iterations,
                  time.perf_counter() - t0)
        u, states = dres.displacement, dres.states
        I_E = strain_trace(states.strain) if mode is CouplingMode.TWO_WAY else None
        try:
            system = assemble_diffusion(mesh, I_E, cbc, dmodel, cfg.source())
            cres = _solve_diffusion(cfg, system)
        except (DiffusionError, NotPositiveDefiniteError, RuntimeError, ValueError) as exc:
            raise SolverFailure(k, t, exc) from exc
        c = cres.c
        uA = _probe(mesh, u, probes.get("A"))
        uB = _probe(mesh, u, probes.get("B"))
        report.rows.append(ReportRow(
            k, float(t), float(scale), dres.newton_iterations, dres.assembly_time,
            dres.solve_time, cres.solver_iterations, cres.pcg_total_iterations,
            cres.assembly_time, cres.solve_time, cres.violation_pct, cres.min_c, cres.max_c,
            plastic_zone_percentage(states), uA[0], uA[1], uB[0], uB[1]))
        if keep(k):
            history.append(Snapshot(k, float(t), u.copy(), c.copy(), states.stress.copy(),
                                    states.kappa.copy(), states.plastic_strain.copy()))
    final = CoupledState(u, c, states, len(cfg.schedule))
    return report, final, history

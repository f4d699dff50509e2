"""Steady anisotropic diffusion: diffusivity models, P1 assembly and the two solution paths.

The classical Galerkin path solves the condensed linear system by diagonally
preconditioned CG and may violate the physical bounds. The non-negative path solves
the same condensed system as a box-constrained QP.
"""

from __future__ import annotations

import enum
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .constitutive.params import MaterialParams
from .linalg import pcg_solve
from .mesh import Mesh, MeshError
from .qp import QpProblem, TrustRegionOpts, solve_box_qp

log = logging.getLogger(__name__)

VIOLATION_TOL = 1e-12
CG_TOL = 1e-6


class DiffusionError(RuntimeError):
    pass


class CouplingKind(enum.Enum):
    ONE_WAY = "one_way"
    TWO_WAY = "two_way"


@dataclass(frozen=True)
class DiffusivityModel:
    """Principal diffusivities, axis angle and the strain-dependence parameters."""

    d1: float
    d2: float
    theta: float
    mode: CouplingKind = CouplingKind.ONE_WAY
    eta_T: float = 1.0
    eta_S: float = 1.0
    E_ref: float = 1e-3
    phi_T: float = 1.0
    phi_S: float = 1.0

    @classmethod
    def from_material(cls, mat: MaterialParams, mode="one_way") -> "DiffusivityModel":
        return cls(mat.d1, mat.d2, mat.theta, CouplingKind(mode), mat.eta_T, mat.eta_S,
                   mat.E_ref, mat.phi_T, mat.phi_S)

    @property
    def D0(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        R = np.array([[c, -s], [s, c]])
        return R @ np.diag([self.d1, self.d2]) @ R.T

    @property
    def floor(self) -> float:
        return 1e-9 * min(self.d1, self.d2)


def _weight(eta, I_E, E_ref):
    # (exp(eta I) - 1) / (exp(eta E_ref) - 1), with the eta -> 0 limit I / E_ref
    if eta == 0.0:
        return I_E / E_ref
    return np.expm1(eta * I_E) / math.expm1(eta * E_ref)


def diffusivity_field(I_E, model: DiffusivityModel) -> tuple[np.ndarray, int]:
    """Diffusivity tensors for an array of strain traces.

    Returns
    -------
    D : ndarray, shape (n, 2, 2)
    n_clamped : int
        Number of tensors whose eigenvalues had to be floored to stay SPD.
    """
    I_E = np.atleast_1d(np.asarray(I_E, dtype=float))
    D0 = model.D0
    D = np.broadcast_to(D0, (I_E.size, 2, 2)).copy()
    if model.mode is CouplingKind.ONE_WAY:
        return D, 0
    DT = model.phi_T * D0 - D0
    DS = model.phi_S * D0 - D0
    wt = _weight(model.eta_T, I_E, model.E_ref)
    ws = _weight(model.eta_S, I_E, model.E_ref)
    D = D0 + DT * wt[:, None, None] + DS * ws[:, None, None]
    # 2x2 symmetric eigenvalues in closed form
    tr = D[:, 0, 0] + D[:, 1, 1]
    det = D[:, 0, 0] * D[:, 1, 1] - D[:, 0, 1] * D[:, 1, 0]
    lam_min = 0.5 * tr - np.sqrt(np.maximum(0.25 * tr * tr - det, 0.0))
    bad = ~(lam_min >= model.floor)
    n_bad = int(bad.sum())
    if n_bad:
        w, V = np.linalg.eigh(D[bad])
        w = np.maximum(np.nan_to_num(w, nan=model.floor), model.floor)
        D[bad] = np.einsum("nij,nj,nkj->nik", V, w, V)
        log.debug("floored the diffusivity eigenvalues of %d elements", n_bad)
    return D, n_bad


def diffusivity_at(point_strain: float, model: DiffusivityModel) -> np.ndarray:
    """Diffusivity tensor at one point for the strain trace ``point_strain``."""
    return diffusivity_field(np.array([point_strain]), model)[0][0]


def strain_trace(strain4: np.ndarray) -> np.ndarray:
    """First invariant of per-element strain stored as ``[xx, yy, zz, xy]``."""
    return strain4[:, 0] + strain4[:, 1] + strain4[:, 2]


@dataclass
class DiffusionBC:
    """Dirichlet data per node set and normal influx per edge tag."""

    dirichlet: list = field(default_factory=list)
    neumann: list = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.dirichlet:
            raise ValueError("at least one Dirichlet condition is required")
        for tag, val in self.dirichlet:
            if not math.isfinite(float(val)):
                raise ValueError(f"Dirichlet value for {tag!r} is not finite")

    def max_datum(self) -> float:
        return max(float(v) for _, v in self.dirichlet)

    def min_datum(self) -> float:
        return min(float(v) for _, v in self.dirichlet)


@dataclass
class DiffusionSystem:
    """Full and condensed diffusion systems; condensation keeps ascending node order."""

    K: sp.csr_matrix
    f: np.ndarray
    free: np.ndarray
    fixed: np.ndarray
    fixed_values: np.ndarray
    K_ff: sp.csr_matrix
    f_ff: np.ndarray
    assembly_time: float
    n_clamped: int = 0

    def expand(self, c_free: np.ndarray) -> np.ndarray:
        c = np.empty(self.f.shape[0])
        c[self.free] = c_free
        c[self.fixed] = self.fixed_values
        return c


def dirichlet_nodes(mesh: Mesh, bc: DiffusionBC) -> tuple[np.ndarray, np.ndarray]:
    vals = {}
    for tag, v in bc.dirichlet:
        for i in mesh.node_set(tag).tolist():
            if i in vals and vals[i] != float(v):
                raise MeshError(f"node {i} has conflicting Dirichlet concentrations")
            vals[i] = float(v)
    idx = np.array(sorted(vals), dtype=np.int64)
    return idx, np.array([vals[i] for i in idx.tolist()])


def element_diffusion_matrices(mesh: Mesh, D: np.ndarray) -> np.ndarray:
    g = mesh.shape_gradients()
    ke = mesh.areas()[:, None, None] * np.einsum("eia,eab,ejb->eij", g, D, g)
    return 0.5 * (ke + ke.transpose(0, 2, 1))


def assemble_diffusion(mesh: Mesh, strain_field, bc: DiffusionBC, model: DiffusivityModel,
                       source: float = 0.0) -> DiffusionSystem:
    """Assemble ``K_c`` and ``f_c`` and condense the Dirichlet nodes.

    Parameters
    ----------
    mesh : Mesh
    strain_field : ndarray or None
        Per-element strain trace ``I_E``; ``None`` means zero strain.
    bc : DiffusionBC
    model : DiffusivityModel
    source : float
        Uniform volumetric source ``m``.
    """
    t0 = time.perf_counter()
    m = mesh.n_elements
    I_E = np.zeros(m) if strain_field is None else np.asarray(strain_field, dtype=float)
    if I_E.shape != (m,):
        raise ValueError(f"strain field must have one value per element ({m})")
    D, n_clamped = diffusivity_field(I_E, model)
    ke = element_diffusion_matrices(mesh, D)
    conn = mesh.elements
    rows = np.repeat(conn, 3, axis=1).ravel()
    cols = np.tile(conn, (1, 3)).ravel()
    n = mesh.n_nodes
    K = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    K = ((K + K.T) * 0.5).tocsr()
    K.sort_indices()

    f = np.zeros(n)
    if source:
        np.add.at(f, conn.ravel(), np.repeat(source * mesh.areas() / 3.0, 3))
    for tag, flux in bc.neumann:
        e = mesh.edges_with_tag(tag)
        length = np.linalg.norm(mesh.nodes[e[:, 0]] - mesh.nodes[e[:, 1]], axis=1)
        np.add.at(f, e.ravel(), np.repeat(float(flux) * length / 2.0, 2))

    fixed, vals = dirichlet_nodes(mesh, bc)
    mask = np.ones(n, dtype=bool)
    mask[fixed] = False
    free = np.flatnonzero(mask)
    K_ff = K[free][:, free].tocsr()
    f_ff = f[free] - K[free][:, fixed] @ vals
    return DiffusionSystem(K, f, free, fixed, vals, K_ff, f_ff,
                           time.perf_counter() - t0, n_clamped)


@dataclass
class DiffusionResult:
    c: np.ndarray
    solver_iterations: int
    pcg_total_iterations: int
    assembly_time: float
    solve_time: float
    violation_pct: float
    min_c: float
    max_c: float
    kkt_residual: float = float("nan")


def violation_metrics(c, c_min: float, c_max: float, tol: float = VIOLATION_TOL) -> float:
    """Percentage of nodes outside ``[c_min - tol, c_max + tol]``."""
    c = np.asarray(getattr(c, "values", c), dtype=float)
    if c.size == 0:
        return 0.0
    bad = (c < c_min - tol) | (c > c_max + tol)
    return 100.0 * float(np.count_nonzero(bad)) / c.size


def solve_cg_path(system: DiffusionSystem, c_min: float = 0.0, c_max: float = math.inf,
                  tol: float = CG_TOL) -> DiffusionResult:
    """Classical Galerkin solution; bound violations are measured, not corrected."""
    t0 = time.perf_counter()
    if system.free.size:
        x, its = pcg_solve(system.K_ff, system.f_ff, system.K_ff.diagonal(), tol=tol)
    else:
        x, its = np.zeros(0), 0
    c = system.expand(x)
    dt = time.perf_counter() - t0
    return DiffusionResult(c, its, 0, system.assembly_time, dt,
                           violation_metrics(c, c_min, c_max), float(c.min()), float(c.max()))


def solve_nn_path(system: DiffusionSystem, c_min: float = 0.0, c_max: float = math.inf,
                  opts: TrustRegionOpts | None = None) -> DiffusionResult:
    """Bound-constrained solution ``c_min <= c <= c_max`` through the box QP.

    Raises
    ------
    DiffusionError
        If the QP solution cannot be certified.
    """
    if c_min > c_max:
        raise ValueError("c_min exceeds c_max")
    t0 = time.perf_counter()
    outer = pcg = 0
    kkt = 0.0
    x = np.zeros(0)
    if system.free.size:
        sol = solve_box_qp(QpProblem(system.K_ff, system.f_ff, c_min, c_max), opts)
        if not sol.converged:
            raise DiffusionError(f"box QP did not converge (KKT residual {sol.kkt_residual:.3e} "
                                 f"after {sol.outer_iterations} iterations)")
        x, outer, pcg, kkt = sol.c, sol.outer_iterations, sol.pcg_iterations_total, \
            sol.kkt_residual
    c = system.expand(x)
    dt = time.perf_counter() - t0
    return DiffusionResult(c, outer, pcg, system.assembly_time, dt,
                           violation_metrics(c, c_min, c_max), float(c.min()), float(c.max()), kkt)

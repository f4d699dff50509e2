"""Plane-stress CST assembly and the incremental Newton solve of one load step."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
import scipy.sparse as sp

from .constitutive import (
    DegradationModel,
    MaterialParams,
    PointStates,
    status_message,
    update_points,
)
from .linalg import BandedCholesky, NotPositiveDefiniteError
from .mesh import Mesh, MeshError

Value = Union[float, Callable[[float], float]]


class DeformationError(RuntimeError):
    """Newton failure or constitutive failure inside a load step."""

    def __init__(self, message: str, residual_norms=None):
        super().__init__(message)
        self.residual_norms = list(residual_norms or [])


def _eval(v, t):
    return float(v(t)) if callable(v) else float(v)


@dataclass
class DeformationBC:
    """Prescribed displacement components and edge tractions.

    ``dirichlet`` holds ``(node_set, component, value)`` and ``neumann`` holds
    ``(edge_tag, (tx, ty))``; values may be constants or functions of time.
    """

    dirichlet: list = field(default_factory=list)
    neumann: list = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.dirichlet:
            raise ValueError("at least one Dirichlet condition is required")
        for _, comp, _ in self.dirichlet:
            if comp not in (0, 1):
                raise ValueError(f"displacement component must be 0 or 1, got {comp}")

    def dirichlet_dofs(self, mesh: Mesh, t: float) -> tuple[np.ndarray, np.ndarray]:
        vals: dict[int, float] = {}
        for tag, comp, v in self.dirichlet:
            val = _eval(v, t)
            for i in mesh.node_set(tag).tolist():
                dof = 2 * i + comp
                if dof in vals and vals[dof] != val:
                    raise MeshError(f"conflicting displacement prescriptions at node {i}")
                vals[dof] = val
        dofs = np.array(sorted(vals), dtype=np.int64)
        return dofs, np.array([vals[d] for d in dofs.tolist()])

    def external_force(self, mesh: Mesh, t: float) -> np.ndarray:
        """Consistent nodal loads of the edge tractions (half of each edge per node)."""
        f = np.zeros(2 * mesh.n_nodes)
        for tag, trac in self.neumann:
            tx, ty = (_eval(trac[0], t), _eval(trac[1], t)) if not callable(trac) else trac(t)
            e = mesh.edges_with_tag(tag)
            half = 0.5 * np.linalg.norm(mesh.nodes[e[:, 0]] - mesh.nodes[e[:, 1]], axis=1)
            for k in (0, 1):
                np.add.at(f, 2 * e[:, k], tx * half)
                np.add.at(f, 2 * e[:, k] + 1, ty * half)
        return f


@dataclass
class NewtonOpts:
    rel_tol: float = 1e-6
    abs_tol: float | None = None
    max_iter: int = 60
    growth_limit: float | None = 4.0
    min_step: float = 1.0 / 64.0


@dataclass
class DeformationStepResult:
    displacement: np.ndarray
    states: PointStates
    newton_iterations: int
    residual_norms: list
    assembly_time: float
    solve_time: float
    dgamma: np.ndarray
    reactions: np.ndarray


def element_dofs(mesh: Mesh) -> np.ndarray:
    e = mesh.elements
    return np.stack([2 * e[:, 0], 2 * e[:, 0] + 1, 2 * e[:, 1], 2 * e[:, 1] + 1,
                     2 * e[:, 2], 2 * e[:, 2] + 1], axis=1)


def element_concentration(mesh: Mesh, c_nodal) -> np.ndarray:
    """Concentration at the element centroids (mean of the nodal values)."""
    if c_nodal is None:
        return np.zeros(mesh.n_elements)
    return np.asarray(c_nodal, dtype=float)[mesh.elements].mean(axis=1)


def element_strains(mesh: Mesh, u: np.ndarray) -> np.ndarray:
    """Engineering in-plane strains ``[e_xx, e_yy, gamma_xy]`` per element."""
    B = mesh.strain_matrices()
    return np.einsum("eij,ej->ei", B, np.asarray(u).reshape(-1)[element_dofs(mesh)])


def stress_pass(mesh: Mesh, states_n: PointStates, u: np.ndarray, c_elem, model,
                mat: MaterialParams):
    """Stress update of every element for the total displacement ``u``."""
    deps = element_strains(mesh, u) - states_n.in_plane_strain
    return update_points(states_n, deps, c_elem, model, mat)


def internal_force(mesh: Mesh, stress: np.ndarray) -> np.ndarray:
    B = mesh.strain_matrices()
    s3 = stress[:, [0, 1, 3]]
    fe = mesh.areas()[:, None] * np.einsum("eki,ek->ei", B, s3)
    f = np.zeros(2 * mesh.n_nodes)
    np.add.at(f, element_dofs(mesh).ravel(), fe.ravel())
    return f


def assemble_residual(mesh: Mesh, states: PointStates, u_total, bc: DeformationBC, t: float,
                      c_field, model, mat: MaterialParams, *, zero_dirichlet: bool = True):
    """Out-of-balance force ``f_int(u) - f_ext(t)``.

    Stresses come from a stress-update pass from the committed ``states`` to the
    strain of ``u_total``. Dirichlet rows are zeroed unless ``zero_dirichlet`` is false.

    Returns
    -------
    residual : ndarray, shape (2 n_nodes,)
    trial : tuple
        ``(new_states, dgamma, tangent, status)`` of the stress pass.
    """
    u = np.asarray(u_total, dtype=float).reshape(-1)
    trial = stress_pass(mesh, states, u, element_concentration(mesh, c_field), model, mat)
    r = internal_force(mesh, trial[0].stress) - bc.external_force(mesh, t)
    if zero_dirichlet:
        dofs, _ = bc.dirichlet_dofs(mesh, t)
        r[dofs] = 0.0
    return r, trial


def assemble_stiffness(mesh: Mesh, tangent: np.ndarray) -> sp.csr_matrix:
    """Global tangent ``sum_e A_e B^T C_alg B`` without boundary conditions."""
    B = mesh.strain_matrices()
    ke = mesh.areas()[:, None, None] * np.einsum("eki,ekl,elj->eij", B, tangent, B)
    dofs = element_dofs(mesh)
    rows = np.repeat(dofs, 6, axis=1).ravel()
    cols = np.tile(dofs, (1, 6)).ravel()
    n = 2 * mesh.n_nodes
    K = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    K.sort_indices()
    return K


def assemble_jacobian(mesh: Mesh, states: PointStates, c_field, model, mat: MaterialParams,
                      u_total=None, bc: DeformationBC | None = None, t: float = 0.0):
    """Consistent tangent stiffness at ``u_total`` (default: the committed strain).

    Returns the full matrix, or the Dirichlet-condensed free block when ``bc`` is given.
    """
    if u_total is None:
        deps = np.zeros((len(states), 3))
        _, _, tangent, _ = update_points(states, deps, element_concentration(mesh, c_field),
                                         model, mat)
    else:
        _, _, tangent, _ = stress_pass(mesh, states, np.asarray(u_total).reshape(-1),
                                       element_concentration(mesh, c_field), model, mat)
    K = assemble_stiffness(mesh, tangent)
    if bc is None:
        return K
    dofs, _ = bc.dirichlet_dofs(mesh, t)
    free = np.setdiff1d(np.arange(K.shape[0]), dofs)
    return K[free][:, free].tocsr()


def _solve(K: sp.csr_matrix, b: np.ndarray) -> np.ndarray:
    try:
        return BandedCholesky(K).solve(b)
    except NotPositiveDefiniteError:
        from scipy.sparse.linalg import splu

        try:
            return splu(K.tocsc()).solve(b)
        except RuntimeError as exc:
            raise DeformationError(f"singular tangent stiffness: {exc}") from None


def solve_load_step(mesh: Mesh, states_n: PointStates, u_n, bc: DeformationBC, t: float,
                    c_field, model, mat: MaterialParams,
                    opts: NewtonOpts | None = None) -> DeformationStepResult:
    """Newton iteration with full steps for the equilibrium at time ``t``.

    The committed ``states_n`` are never modified; the returned states are the
    converged update from ``states_n``.

    Raises
    ------
    DeformationError
        If a stress update fails or Newton does not converge.
    """
    opts = opts or NewtonOpts()
    model = DegradationModel.parse(model)
    u = np.array(u_n, dtype=float).reshape(-1)
    dofs, vals = bc.dirichlet_dofs(mesh, t)
    u[dofs] = vals
    free = np.setdiff1d(np.arange(u.size), dofs)
    c_elem = element_concentration(mesh, c_field)
    f_ext = bc.external_force(mesh, t)
    abs_tol = opts.abs_tol
    if abs_tol is None:
        size = float(np.sqrt(mesh.areas().sum()))
        abs_tol = 1e-12 * mat.sigma0 * size
    t_asm = t_sol = 0.0
    norms = []

    def evaluate(u_try):
        trial = stress_pass(mesh, states_n, u_try, c_elem, model, mat)
        r = internal_force(mesh, trial[0].stress) - f_ext
        return trial, r, float(np.linalg.norm(r[free]))

    du = None
    for it in range(opts.max_iter + 1):
        t0 = time.perf_counter()
        trial, r, rn = evaluate(u)
        # safeguard: halve a Newton step that grows the residual by more than growth_limit
        alpha = 1.0
        while (opts.growth_limit and du is not None and not rn <= opts.growth_limit * norms[-1]
               and alpha > opts.min_step):
            alpha *= 0.5
            u[free] += alpha * du
            trial, r, rn = evaluate(u)
        new_states, dgamma, tangent, status = trial
        if status.any():
            raise DeformationError(f"stress update failed at t={t}: {status_message(status)}",
                                   norms)
        norms.append(rn)
        t_asm += time.perf_counter() - t0
        if rn <= opts.rel_tol * norms[0] or rn <= abs_tol:
            return DeformationStepResult(u.reshape(-1, 2), new_states, it, norms, t_asm, t_sol,
                                         dgamma, r[dofs])
        if it == opts.max_iter:
            break
        t0 = time.perf_counter()
        K = assemble_stiffness(mesh, tangent)
        K_ff = K[free][:, free].tocsr()
        t_asm += time.perf_counter() - t0
        t0 = time.perf_counter()
        du = _solve(K_ff, r[free])
        u[free] -= du
        t_sol += time.perf_counter() - t0
    raise DeformationError(
        f"Newton did not converge in {opts.max_iter} iterations at t={t} "
        f"(relative residual {norms[-1] / max(norms[0], 1e-300):.3e})", norms)

"""Quadrature-point states, the stress update and its consistent tangent.

Strain increments are given in engineering Voigt form ``[de_xx, de_yy, dgamma_xy]``;
the returned tangent maps the same quantities to ``[s_xx, s_yy, s_xy]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import _accel
from . import kernels_numba, kernels_numpy
from .params import DegradationModel, MaterialError, MaterialParams, lame_params

SQRT2 = np.sqrt(2.0)
SQRT23 = np.sqrt(2.0 / 3.0)
_I4 = np.array([1.0, 1.0, 1.0, 0.0])
_MANDEL = np.array([1.0, 1.0, 1.0, SQRT2])

#: Default tolerances, relative to ``sigma0``.
PLANE_STRESS_TOL = 1e-9
YIELD_TOL = 1e-8
KMAX = 50

_STATUS_TEXT = {
    1: "local Newton on the consistency condition did not converge",
    2: "plane-stress iteration on the out-of-plane strain did not converge",
    3: "non-physical degraded moduli or yield stress",
}


class StressUpdateError(RuntimeError):
    """Raised when the return mapping fails at one or more points."""

    def __init__(self, message: str, points: np.ndarray | None = None):
        super().__init__(message)
        self.points = points


@dataclass
class QuadPointState:
    """History of one quadrature point.

    Arrays use the component order ``[xx, yy, zz, xy]`` with tensor shear.
    ``strain`` is the total strain including the resolved out-of-plane part.
    """

    stress: np.ndarray
    plastic_strain: np.ndarray
    kappa: float
    strain: np.ndarray

    @classmethod
    def virgin(cls) -> "QuadPointState":
        return cls(np.zeros(4), np.zeros(4), 0.0, np.zeros(4))

    def copy(self) -> "QuadPointState":
        return QuadPointState(self.stress.copy(), self.plastic_strain.copy(),
                              float(self.kappa), self.strain.copy())


@dataclass
class PointStates:
    """Structure-of-arrays history for ``n`` points."""

    stress: np.ndarray
    plastic_strain: np.ndarray
    kappa: np.ndarray
    strain: np.ndarray

    @classmethod
    def virgin(cls, n: int) -> "PointStates":
        return cls(np.zeros((n, 4)), np.zeros((n, 4)), np.zeros(n), np.zeros((n, 4)))

    def __len__(self) -> int:
        return self.kappa.shape[0]

    def copy(self) -> "PointStates":
        return PointStates(self.stress.copy(), self.plastic_strain.copy(),
                           self.kappa.copy(), self.strain.copy())

    def point(self, i: int) -> QuadPointState:
        return QuadPointState(self.stress[i].copy(), self.plastic_strain[i].copy(),
                              float(self.kappa[i]), self.strain[i].copy())

    @property
    def in_plane_strain(self) -> np.ndarray:
        """Engineering in-plane strain ``[e_xx, e_yy, gamma_xy]`` per point."""
        e = self.strain
        return np.column_stack([e[:, 0], e[:, 1], 2.0 * e[:, 3]])


@dataclass
class StressUpdateResult:
    new_state: QuadPointState
    delta_gamma: float
    tangent: np.ndarray


def _as_voigt4(stress) -> np.ndarray:
    s = np.asarray(stress, dtype=float)
    if s.shape == (3, 3):
        return np.array([s[0, 0], s[1, 1], s[2, 2], s[0, 1]])
    if s.shape[-1] == 4:
        return s
    raise ValueError(f"stress must be a 3x3 tensor or 4-vector, got shape {s.shape}")


def _as_engineering(deps) -> np.ndarray:
    d = np.asarray(deps, dtype=float)
    if d.shape == (2, 2):
        if abs(d[0, 1] - d[1, 0]) > 1e-14 * (1.0 + np.abs(d).max()):
            raise ValueError("strain increment must be symmetric")
        return np.array([d[0, 0], d[1, 1], 2.0 * d[0, 1]])
    if d.shape[-1] == 3:
        return d
    raise ValueError(f"strain increment must be 2x2 or engineering 3-vector, got {d.shape}")


def von_mises(stress) -> np.ndarray:
    """Equivalent stress ``sqrt(3/2) |dev(stress)|`` of 4-component stresses."""
    s = _as_voigt4(stress)
    p = (s[..., 0] + s[..., 1] + s[..., 2]) / 3.0
    dev = s - p[..., None] * _I4
    return np.sqrt(1.5 * np.sum((dev * _MANDEL) ** 2, axis=-1))


def yield_stress(model, kappa, c, mat: MaterialParams):
    """Current radius of the yield surface in equivalent-stress units."""
    model = DegradationModel.parse(model)
    if model is DegradationModel.MODEL_I:
        return mat.sigma0 + mat.H * kappa
    if model is DegradationModel.MODEL_II:
        sig_c = (mat.zeta * c + 1.0) * mat.sigma0
        return sig_c * (1.0 + kappa / mat.kappa0) ** mat.n_w
    if model is DegradationModel.PERFECT_PLASTIC:
        return mat.sigma0 + 0.0 * kappa
    return np.inf + 0.0 * kappa


def yield_function(model, stress, kappa, c, mat: MaterialParams):
    """Yield function ``f = sqrt(3/2)|S| - sigma_y(kappa, c)`` in Pa.

    Parameters
    ----------
    model : DegradationModel or str
    stress : array_like
        3x3 tensor or ``[xx, yy, zz, xy]`` components (batched on leading axes).
    kappa : float or ndarray
        Accumulated equivalent plastic strain, ``>= 0``.
    c : float or ndarray
        Concentration; only Model II uses it here.
    mat : MaterialParams

    Returns
    -------
    float or ndarray
        ``-inf`` for the linear elastic variant.
    """
    return von_mises(stress) - yield_stress(model, kappa, c, mat)


def _effective_material(model: DegradationModel, mat: MaterialParams) -> MaterialParams:
    if model is DegradationModel.PERFECT_PLASTIC:
        return mat.with_updates(H=0.0, Et=0.0, lambda1=0.0, mu1=0.0, zeta=0.0)
    return mat


def update_points(states: PointStates, deps: np.ndarray, c: np.ndarray, model,
                  mat: MaterialParams, *, ptol: float | None = None,
                  ftol: float | None = None, kmax: int = KMAX):
    """Batched stress update.

    Returns
    -------
    new_states : PointStates
    dgamma : ndarray, shape (n,)
    tangent : ndarray, shape (n, 3, 3)
        Engineering Voigt plane-stress tangents.
    status : ndarray of int
        0 ok, 1 local Newton failure, 2 plane-stress failure, 3 bad moduli.
    """
    model = DegradationModel.parse(model)
    mat = _effective_material(model, mat)
    n = len(states)
    deps = np.ascontiguousarray(np.broadcast_to(np.asarray(deps, dtype=float), (n, 3)))
    c = np.ascontiguousarray(np.broadcast_to(np.asarray(c, dtype=float), (n,)))
    ptol = PLANE_STRESS_TOL * mat.sigma0 if ptol is None else ptol
    ftol = YIELD_TOL * mat.sigma0 if ftol is None else ftol
    prm = mat.kernel_vector()

    out = PointStates.virgin(n)
    dgamma = np.zeros(n)
    tangent = np.zeros((n, 3, 3))
    status = np.zeros(n, dtype=np.int64)
    kern = kernels_numba.update_points if _accel.numba_enabled() else kernels_numpy.update_points
    kern(np.ascontiguousarray(states.strain), deps, np.ascontiguousarray(states.plastic_strain),
         np.ascontiguousarray(states.kappa), c, model.code, prm, float(ptol), float(ftol),
         int(kmax), out.stress, out.plastic_strain, out.strain, out.kappa, dgamma, tangent, status)
    return out, dgamma, tangent, status


def status_message(status: np.ndarray) -> str:
    bad = np.flatnonzero(status)
    if bad.size == 0:
        return "ok"
    codes = sorted(set(int(s) for s in status[bad]))
    parts = [f"{_STATUS_TEXT[k]} ({int(np.sum(status == k))} points)" for k in codes]
    return "; ".join(parts) + f"; first failing point {int(bad[0])}"


def stress_update(state_n: QuadPointState, delta_eps, c: float, model,
                  mat: MaterialParams) -> StressUpdateResult:
    """Backward-Euler return mapping of a single point in plane stress.

    Parameters
    ----------
    state_n : QuadPointState
        Converged history at the start of the step.
    delta_eps : array_like
        In-plane increment, symmetric 2x2 tensor or ``[de_xx, de_yy, dgamma_xy]``.
    c : float
        Concentration, frozen during the update.
    model : DegradationModel or str
    mat : MaterialParams

    Returns
    -------
    StressUpdateResult

    Raises
    ------
    StressUpdateError
        If the local or plane-stress Newton iteration fails.
    MaterialError
        If the degraded moduli are not admissible at ``c``.
    """
    model = DegradationModel.parse(model)
    if model in (DegradationModel.MODEL_I, DegradationModel.LINEAR_ELASTIC):
        lame_params(c, mat)
    states = PointStates(state_n.stress[None].copy(), state_n.plastic_strain[None].copy(),
                         np.array([state_n.kappa], dtype=float), state_n.strain[None].copy())
    new, dg, tan, st = update_points(states, _as_engineering(delta_eps)[None], np.array([c]),
                                     model, mat)
    if st[0] == 3:
        raise MaterialError(_STATUS_TEXT[3] + f" at c={c}")
    if st[0] != 0:
        raise StressUpdateError(_STATUS_TEXT[int(st[0])], np.array([0]))
    return StressUpdateResult(new.point(0), float(dg[0]), tan[0])


def plane_stress_elastic_matrix(lam: float, mu: float) -> np.ndarray:
    """Plane-stress elasticity in engineering Voigt form."""
    E = mu * (3.0 * lam + 2.0 * mu) / (lam + mu)
    nu = lam / (2.0 * (lam + mu))
    f = E / (1.0 - nu * nu)
    return f * np.array([[1.0, nu, 0.0], [nu, 1.0, 0.0], [0.0, 0.0, 0.5 * (1.0 - nu)]])


def algorithmic_tangent(trial_stress, kappa_n: float, delta_gamma: float, c: float, model,
                        mat: MaterialParams) -> np.ndarray:
    """Consistent plane-stress tangent from the 3D trial stress of a converged update.

    Parameters
    ----------
    trial_stress : array_like
        Elastic trial stress ``[xx, yy, zz, xy]`` at the converged out-of-plane strain.
    kappa_n : float
        Accumulated plastic strain at the start of the step.
    delta_gamma : float
        Plastic multiplier returned by the update; 0 selects the elastic branch.
    c, model, mat
        As in :func:`stress_update`.

    Returns
    -------
    ndarray, shape (3, 3)
    """
    model = DegradationModel.parse(model)
    mat = _effective_material(model, mat)
    if model in (DegradationModel.MODEL_I, DegradationModel.LINEAR_ELASTIC):
        lam, mu = lame_params(c, mat)
    else:
        lam, mu = mat.lambda0, mat.mu0
    kb = lam + 2.0 * mu / 3.0
    cm = (kb - 2.0 * mu / 3.0) * np.outer(_I4, _I4) + 2.0 * mu * np.eye(4)
    cm[3, 3] = 2.0 * mu
    if delta_gamma > 0.0:
        t = _as_voigt4(trial_stress)
        dev = (t - t[:3].sum() / 3.0 * _I4) * _MANDEL
        snorm = np.linalg.norm(dev)
        nm = dev / snorm
        kap1 = kappa_n + SQRT23 * delta_gamma
        if model is DegradationModel.MODEL_II:
            sig_c = (mat.zeta * c + 1.0) * mat.sigma0
            hp = mat.n_w * sig_c / mat.kappa0 * (1.0 + kap1 / mat.kappa0) ** (mat.n_w - 1.0)
        else:
            hp = mat.H
        mcoef = 2.0 * mu + (2.0 / 3.0) * hp
        idev = np.eye(4) - np.outer(_I4, _I4) / 3.0
        nn = np.outer(nm, nm)
        cm = cm - 4.0 * mu**2 / mcoef * nn - 4.0 * mu**2 * delta_gamma / snorm * (idev - nn)
    idx = [0, 1, 3]
    red = cm[np.ix_(idx, idx)] - np.outer(cm[idx, 2], cm[2, idx]) / cm[2, 2]
    sv = np.array([1.0, 1.0, 1.0 / SQRT2])
    return red * np.outer(sv, sv)

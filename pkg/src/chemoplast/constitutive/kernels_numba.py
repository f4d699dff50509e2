"""Per-point return mapping in plane stress, compiled with numba.

Tensors are stored as four components ``[xx, yy, zz, xy]`` with tensor (not
engineering) shear. The consistent tangent is built in the Mandel basis
``[xx, yy, zz, sqrt(2) xy]`` where the fourth-order identity is the unit matrix,
then condensed over ``zz`` and returned in engineering Voigt form for
``[e_xx, e_yy, gamma_xy] -> [s_xx, s_yy, s_xy]``.

Parameter vector layout (see ``MaterialParams.kernel_vector``)::

    0 lambda0  1 mu0  2 lambda1  3 mu1  4 c_ref  5 sigma0
    6 H        7 n_w  8 zeta     9 kappa0

Model codes: 0 model I, 1 model II, 2 linear elastic, 3 perfect plasticity.
Status codes: 0 ok, 1 local Newton failure, 2 plane-stress failure,
3 non-physical moduli or yield stress.
"""

from __future__ import annotations

import math

import numpy as np

from .._accel import HAVE_NUMBA

SQRT2 = math.sqrt(2.0)
SQRT23 = math.sqrt(2.0 / 3.0)
PS_MAXIT = 60


def _moduli(c, model, prm):
    if model == 0 or model == 2:
        s = c / prm[4]
        lam = prm[0] + prm[2] * s
        mu = prm[1] + prm[3] * s
    else:
        lam = prm[0]
        mu = prm[1]
    if model == 1:
        sig_c = (prm[8] * c + 1.0) * prm[5]
    else:
        sig_c = prm[5]
    if model == 0:
        hard = prm[6]
    else:
        hard = 0.0
    return lam, mu, sig_c, hard


def _sigy(kappa, model, sig_c, hard, nw, k0):
    if model == 1:
        return sig_c * (1.0 + kappa / k0) ** nw
    return sig_c + hard * kappa


def _dsigy(kappa, model, sig_c, hard, nw, k0):
    if model == 1:
        return nw * sig_c / k0 * (1.0 + kappa / k0) ** (nw - 1.0)
    return hard


def _radial_return(ee, lam, mu, kap_n, model, sig_c, hard, nw, k0, ftol, kmax, stress, nrm, cm):
    """3D return map at a fixed elastic trial strain ``ee``.

    Writes stress, unit normal and the 4x4 Mandel tangent into the output
    buffers and returns ``(dgamma, |S_trial|, status)``.
    """
    tr = ee[0] + ee[1] + ee[2]
    kb = lam + 2.0 * mu / 3.0
    p = kb * tr
    s0 = 2.0 * mu * (ee[0] - tr / 3.0)
    s1 = 2.0 * mu * (ee[1] - tr / 3.0)
    s2 = 2.0 * mu * (ee[2] - tr / 3.0)
    s3 = 2.0 * mu * ee[3]
    snorm = math.sqrt(s0 * s0 + s1 * s1 + s2 * s2 + 2.0 * s3 * s3)

    for a in range(4):
        for b in range(4):
            cm[a, b] = 0.0
    for a in range(3):
        for b in range(3):
            cm[a, b] = kb - 2.0 * mu / 3.0
        cm[a, a] += 2.0 * mu
    cm[3, 3] = 2.0 * mu

    dgamma = 0.0
    status = 0
    plastic = False
    f_tr = 0.0
    if model != 2 and snorm > 0.0:
        f_tr = snorm - SQRT23 * _sigy(kap_n, model, sig_c, hard, nw, k0)
        # trial states within the yield tolerance are treated as elastic
        plastic = f_tr > SQRT23 * ftol

    if not plastic:
        stress[0] = p + s0
        stress[1] = p + s1
        stress[2] = p + s2
        stress[3] = s3
        for a in range(4):
            nrm[a] = 0.0
        return 0.0, snorm, 0

    nrm[0] = s0 / snorm
    nrm[1] = s1 / snorm
    nrm[2] = s2 / snorm
    nrm[3] = s3 / snorm

    if model == 1:
        # local Newton on the consistency condition, from dgamma = 0
        target = 1e-13 * snorm
        converged = False
        for _ in range(kmax):
            kap = kap_n + SQRT23 * dgamma
            res = snorm - 2.0 * mu * dgamma - SQRT23 * _sigy(kap, model, sig_c, hard, nw, k0)
            if abs(res) <= target:
                converged = True
                break
            jac = -2.0 * mu - (2.0 / 3.0) * _dsigy(kap, model, sig_c, hard, nw, k0)
            step = -res / jac
            dgamma += step
            if abs(step) <= 1e-15 * dgamma:
                converged = True
                break
        if not converged:
            kap = kap_n + SQRT23 * dgamma
            res = snorm - 2.0 * mu * dgamma - SQRT23 * _sigy(kap, model, sig_c, hard, nw, k0)
            if abs(res) / SQRT23 > ftol:
                status = 1
    else:
        dgamma = f_tr / (2.0 * mu + (2.0 / 3.0) * hard)

    kap1 = kap_n + SQRT23 * dgamma
    scale = 1.0 - 2.0 * mu * dgamma / snorm
    stress[0] = p + scale * s0
    stress[1] = p + scale * s1
    stress[2] = p + scale * s2
    stress[3] = scale * s3

    mcoef = 2.0 * mu + (2.0 / 3.0) * _dsigy(kap1, model, sig_c, hard, nw, k0)
    a1 = 4.0 * mu * mu / mcoef
    a2 = 4.0 * mu * mu * dgamma / snorm
    nm0 = nrm[0]
    nm1 = nrm[1]
    nm2 = nrm[2]
    nm3 = SQRT2 * nrm[3]
    nm = (nm0, nm1, nm2, nm3)
    for a in range(4):
        for b in range(4):
            idev = -1.0 / 3.0 if (a < 3 and b < 3) else 0.0
            if a == b:
                idev += 1.0
            cm[a, b] -= a1 * nm[a] * nm[b] + a2 * (idev - nm[a] * nm[b])
    return dgamma, snorm, status


def _condense(cm, out):
    idx = (0, 1, 3)
    sv = (1.0, 1.0, 1.0 / SQRT2)
    c22 = cm[2, 2]
    for i in range(3):
        a = idx[i]
        for j in range(3):
            b = idx[j]
            out[i, j] = (cm[a, b] - cm[a, 2] * cm[2, b] / c22) * sv[i] * sv[j]


def _update_point(eps_n, deps, ep_n, kap_n, c, model, prm, ptol, ftol, kmax,
                  stress, ep, eps, tangent):
    """Plane-stress update of one quadrature point; returns ``(dgamma, kappa, status)``."""
    lam, mu, sig_c, hard = _moduli(c, model, prm)
    if mu <= 0.0 or 3.0 * lam + 2.0 * mu <= 0.0 or sig_c <= 0.0:
        for a in range(4):
            stress[a] = math.nan
        return 0.0, kap_n, 3
    nw = prm[7]
    k0 = prm[9]

    ee = np.empty(4)
    nrm = np.empty(4)
    cm = np.empty((4, 4))
    ee[0] = eps_n[0] + deps[0] - ep_n[0]
    ee[1] = eps_n[1] + deps[1] - ep_n[1]
    ee[3] = eps_n[3] + 0.5 * deps[2] - ep_n[3]
    # elastic plane-stress predictor for the out-of-plane strain
    z = ep_n[2] - lam * (ee[0] + ee[1]) / (lam + 2.0 * mu)
    zlo = -math.inf
    zhi = math.inf
    status = 0
    dgamma = 0.0
    ok = False
    for _ in range(PS_MAXIT):
        ee[2] = z - ep_n[2]
        dgamma, snorm, st = _radial_return(ee, lam, mu, kap_n, model, sig_c, hard,
                                           nw, k0, ftol, kmax, stress, nrm, cm)
        status = st
        tzz = stress[2]
        scale = abs(stress[0]) + abs(stress[1]) + abs(stress[3]) + 1e-6 * prm[5]
        if abs(tzz) <= 1e-13 * scale:
            ok = True
            break
        if tzz > 0.0:
            zhi = min(zhi, z)
        else:
            zlo = max(zlo, z)
        znew = z - tzz / cm[2, 2]
        if (zlo > -math.inf and znew <= zlo) or (zhi < math.inf and znew >= zhi):
            if zlo > -math.inf and zhi < math.inf:
                znew = 0.5 * (zlo + zhi)
        if znew == z:
            ok = abs(tzz) <= ptol
            break
        z = znew
    if not ok and abs(stress[2]) > ptol and status == 0:
        status = 2

    eps[0] = eps_n[0] + deps[0]
    eps[1] = eps_n[1] + deps[1]
    eps[2] = z
    eps[3] = eps_n[3] + 0.5 * deps[2]
    for a in range(4):
        ep[a] = ep_n[a] + dgamma * nrm[a]
    _condense(cm, tangent)
    return dgamma, kap_n + SQRT23 * dgamma, status


def _update_points(eps_n, deps, ep_n, kap_n, c, model, prm, ptol, ftol, kmax,
                   stress, ep, eps, kappa, dgamma, tangent, status):
    n = eps_n.shape[0]
    for i in range(n):
        dg, kp, st = _update_point(eps_n[i], deps[i], ep_n[i], kap_n[i], c[i], model, prm,
                                   ptol, ftol, kmax, stress[i], ep[i], eps[i], tangent[i])
        dgamma[i] = dg
        kappa[i] = kp
        status[i] = st


if HAVE_NUMBA:
    import numba

    _jit = numba.njit(cache=True, fastmath=False)
    _moduli = _jit(_moduli)
    _sigy = _jit(_sigy)
    _dsigy = _jit(_dsigy)
    _radial_return = _jit(_radial_return)
    _condense = _jit(_condense)
    _update_point = _jit(_update_point)
    update_points = _jit(_update_points)
else:  # pragma: no cover
    update_points = _update_points

"""Vectorized numpy implementation of the plane-stress return mapping.

Mirrors :mod:`.kernels_numba` point for point; every point advances through
the nested Newton loops in lock step with per-point convergence masks.
"""

from __future__ import annotations

import numpy as np

SQRT2 = np.sqrt(2.0)
SQRT23 = np.sqrt(2.0 / 3.0)
PS_MAXIT = 60

_I = np.array([1.0, 1.0, 1.0, 0.0])
_IDEV = np.eye(4) - np.outer(_I, _I) / 3.0
_MANDEL = np.array([1.0, 1.0, 1.0, SQRT2])


def _moduli(c, model, prm):
    if model in (0, 2):
        s = c / prm[4]
        lam = prm[0] + prm[2] * s
        mu = prm[1] + prm[3] * s
    else:
        lam = np.full_like(c, prm[0])
        mu = np.full_like(c, prm[1])
    sig_c = (prm[8] * c + 1.0) * prm[5] if model == 1 else np.full_like(c, prm[5])
    hard = prm[6] if model == 0 else 0.0
    return lam, mu, sig_c, hard


def _sigy(kappa, model, sig_c, hard, nw, k0):
    if model == 1:
        return sig_c * (1.0 + kappa / k0) ** nw
    return sig_c + hard * kappa


def _dsigy(kappa, model, sig_c, hard, nw, k0):
    if model == 1:
        return nw * sig_c / k0 * (1.0 + kappa / k0) ** (nw - 1.0)
    return np.broadcast_to(np.asarray(hard, dtype=float), np.shape(kappa))


def _radial_return(ee, lam, mu, kap_n, model, sig_c, hard, nw, k0, ftol, kmax):
    tr = ee[:, 0] + ee[:, 1] + ee[:, 2]
    kb = lam + 2.0 * mu / 3.0
    p = kb * tr
    s_tr = 2.0 * mu[:, None] * (ee - (tr / 3.0)[:, None] * _I)
    snorm = np.sqrt(np.einsum("ij,ij->i", s_tr * _MANDEL, s_tr * _MANDEL))

    n = ee.shape[0]
    cm = (kb - 2.0 * mu / 3.0)[:, None, None] * np.outer(_I, _I)
    cm = cm + 2.0 * mu[:, None, None] * np.eye(4)
    cm[:, 3, 3] = 2.0 * mu

    dgamma = np.zeros(n)
    status = np.zeros(n, dtype=np.int64)
    nrm = np.zeros((n, 4))
    if model == 2:
        plastic = np.zeros(n, dtype=bool)
        f_tr = np.zeros(n)
    else:
        f_tr = snorm - SQRT23 * _sigy(kap_n, model, sig_c, hard, nw, k0)
        plastic = (snorm > 0.0) & (f_tr > SQRT23 * ftol)

    stress = p[:, None] * _I + s_tr
    if not plastic.any():
        return stress, dgamma, nrm, cm, status

    ip = np.flatnonzero(plastic)
    sn = snorm[ip]
    nrm[ip] = s_tr[ip] / sn[:, None]
    mu_p = mu[ip]
    sc_p = sig_c[ip]
    kn_p = kap_n[ip]
    if model == 1:
        dg = np.zeros(ip.size)
        active = np.ones(ip.size, dtype=bool)
        target = 1e-13 * sn
        for _ in range(kmax):
            kap = kn_p + SQRT23 * dg
            res = sn - 2.0 * mu_p * dg - SQRT23 * _sigy(kap, model, sc_p, hard, nw, k0)
            active &= np.abs(res) > target
            if not active.any():
                break
            jac = -2.0 * mu_p - (2.0 / 3.0) * _dsigy(kap, model, sc_p, hard, nw, k0)
            step = np.where(active, -res / jac, 0.0)
            dg = dg + step
            active &= np.abs(step) > 1e-15 * dg
        kap = kn_p + SQRT23 * dg
        res = sn - 2.0 * mu_p * dg - SQRT23 * _sigy(kap, model, sc_p, hard, nw, k0)
        status[ip[active & (np.abs(res) / SQRT23 > ftol)]] = 1
    else:
        dg = f_tr[ip] / (2.0 * mu_p + (2.0 / 3.0) * hard)
    dgamma[ip] = dg

    kap1 = kn_p + SQRT23 * dg
    scale = 1.0 - 2.0 * mu_p * dg / sn
    stress[ip] = p[ip, None] * _I + scale[:, None] * s_tr[ip]

    mcoef = 2.0 * mu_p + (2.0 / 3.0) * _dsigy(kap1, model, sc_p, hard, nw, k0)
    a1 = 4.0 * mu_p**2 / mcoef
    a2 = 4.0 * mu_p**2 * dg / sn
    nm = nrm[ip] * _MANDEL
    nn = np.einsum("ia,ib->iab", nm, nm)
    cm[ip] -= a1[:, None, None] * nn + a2[:, None, None] * (_IDEV - nn)
    return stress, dgamma, nrm, cm, status


def _condense(cm):
    idx = [0, 1, 3]
    sv = np.array([1.0, 1.0, 1.0 / SQRT2])
    cpp = cm[:, idx][:, :, idx]
    cpz = cm[:, idx, 2]
    czp = cm[:, 2, idx]
    out = cpp - np.einsum("ia,ib->iab", cpz, czp) / cm[:, 2, 2][:, None, None]
    return out * np.outer(sv, sv)


def update_points(eps_n, deps, ep_n, kap_n, c, model, prm, ptol, ftol, kmax,
                  stress, ep, eps, kappa, dgamma, tangent, status):
    lam, mu, sig_c, hard = _moduli(c, model, prm)
    bad = (mu <= 0.0) | (3.0 * lam + 2.0 * mu <= 0.0) | (sig_c <= 0.0)
    nw, k0 = prm[7], prm[9]

    ee = np.empty_like(eps_n)
    ee[:, 0] = eps_n[:, 0] + deps[:, 0] - ep_n[:, 0]
    ee[:, 1] = eps_n[:, 1] + deps[:, 1] - ep_n[:, 1]
    ee[:, 3] = eps_n[:, 3] + 0.5 * deps[:, 2] - ep_n[:, 3]
    with np.errstate(invalid="ignore", divide="ignore"):
        z = ep_n[:, 2] - lam * (ee[:, 0] + ee[:, 1]) / (lam + 2.0 * mu)
    zlo = np.full_like(z, -np.inf)
    zhi = np.full_like(z, np.inf)
    todo = ~bad
    ok = np.zeros(z.shape, dtype=bool)

    s_out = np.full((z.size, 4), np.nan)
    dg_out = np.zeros(z.size)
    n_out = np.zeros((z.size, 4))
    cm_out = np.tile(np.eye(4), (z.size, 1, 1))
    st_out = np.zeros(z.size, dtype=np.int64)

    for _ in range(PS_MAXIT):
        idx = np.flatnonzero(todo)
        if idx.size == 0:
            break
        ee[idx, 2] = z[idx] - ep_n[idx, 2]
        s_i, dg_i, n_i, cm_i, st_i = _radial_return(
            ee[idx], lam[idx], mu[idx], kap_n[idx], model, sig_c[idx], hard, nw, k0, ftol, kmax
        )
        s_out[idx], dg_out[idx], n_out[idx], cm_out[idx], st_out[idx] = s_i, dg_i, n_i, cm_i, st_i
        tzz = s_i[:, 2]
        scale = np.abs(s_i[:, 0]) + np.abs(s_i[:, 1]) + np.abs(s_i[:, 3]) + 1e-6 * prm[5]
        done = np.abs(tzz) <= 1e-13 * scale
        ok[idx[done]] = True
        zi = z[idx]
        zhi_i = np.where(tzz > 0.0, np.minimum(zhi[idx], zi), zhi[idx])
        zlo_i = np.where(tzz > 0.0, zlo[idx], np.maximum(zlo[idx], zi))
        znew = zi - tzz / cm_i[:, 2, 2]
        outside = ((zlo_i > -np.inf) & (znew <= zlo_i)) | ((zhi_i < np.inf) & (znew >= zhi_i))
        both = (zlo_i > -np.inf) & (zhi_i < np.inf)
        znew = np.where(outside & both, 0.5 * (zlo_i + zhi_i), znew)
        stall = (znew == zi) & ~done
        ok[idx[stall]] = np.abs(tzz[stall]) <= ptol
        zhi[idx], zlo[idx] = zhi_i, zlo_i
        upd = ~done & ~stall
        z[idx[upd]] = znew[upd]
        todo[idx[~upd]] = False

    good = ~bad
    st_out[good & ~ok & (np.abs(s_out[:, 2]) > ptol) & (st_out == 0)] = 2
    st_out[bad] = 3

    stress[:] = s_out
    eps[:, 0] = eps_n[:, 0] + deps[:, 0]
    eps[:, 1] = eps_n[:, 1] + deps[:, 1]
    eps[:, 2] = z
    eps[:, 3] = eps_n[:, 3] + 0.5 * deps[:, 2]
    ep[:] = ep_n + dg_out[:, None] * n_out
    kappa[:] = kap_n + SQRT23 * dg_out
    dgamma[:] = dg_out
    tangent[:] = _condense(cm_out)
    status[:] = st_out

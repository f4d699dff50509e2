"""Bound-constrained convex quadratic programming.

Solves ``min 1/2 c^T K c - f^T c`` subject to ``l <= c <= u`` with a reflective
interior trust-region method: affine scaling by the distance to the bound the
gradient points at, truncated preconditioned CG for the scaled subproblem, and
reflection at the first bound crossed. An exact solve on the identified free set
polishes the final iterate. :func:`kkt_residual` certifies any candidate
independently of how it was produced.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .linalg import NotPositiveDefiniteError, as_csr, direct_solve, pcg_solve

__all__ = [
    "QpProblem", "QpSolution", "TrustRegionOpts", "QpError", "solve_box_qp",
    "kkt_residual", "recover_multipliers", "objective", "pcg_solve",
]

ACTIVE_TOL = 1e-12


class QpError(RuntimeError):
    """Raised when the solver cannot certify a solution."""

    def __init__(self, message: str, solution: "QpSolution | None" = None):
        super().__init__(message)
        self.solution = solution


@dataclass
class QpProblem:
    """Data of ``min 1/2 c^T K c - f^T c`` over the box ``[lower, upper]``."""

    K: sp.csr_matrix
    f: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        self.K = as_csr(self.K)
        self.f = np.asarray(self.f, dtype=float).ravel()
        n = self.f.shape[0]
        self.lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (n,)).copy()
        self.upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (n,)).copy()
        if self.K.shape != (n, n):
            raise ValueError(f"K has shape {self.K.shape}, expected {(n, n)}")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")
        if np.isnan(self.lower).any() or np.isnan(self.upper).any():
            raise ValueError("bounds must not be NaN")
        if self.K.nnz:
            asym = abs(self.K - self.K.T).max()
            if asym > 1e-12 * abs(self.K).max():
                raise ValueError("K is not symmetric")

    @property
    def n(self) -> int:
        return self.f.shape[0]


@dataclass
class TrustRegionOpts:
    """Controls of the trust-region iteration.

    ``rel_tol`` applies to the scaled first-order measure ``|v * g|_inf`` relative to
    its value at the starting point. ``initial_radius`` multiplies the length of the
    scaled Cauchy step, which scales with the right-hand side.
    """

    rel_tol: float = 1e-14
    pcg_tol: float = 0.1
    max_outer: int = 200
    initial_radius: float = 1.0
    theta_min: float = 0.995
    polish: bool = True
    kkt_tol: float = 1e-8

    def __post_init__(self) -> None:
        if not (self.rel_tol > 0 and self.pcg_tol > 0 and self.initial_radius > 0):
            raise ValueError("tolerances and initial radius must be positive")
        if self.max_outer < 1:
            raise ValueError("max_outer must be >= 1")


@dataclass
class QpSolution:
    c: np.ndarray
    lambda_min: np.ndarray
    lambda_max: np.ndarray
    outer_iterations: int
    pcg_iterations_total: int
    kkt_residual: float
    converged: bool = True
    polished: bool = False
    history: list = field(default_factory=list)


def objective(K, f, c) -> float:
    c = np.asarray(c, dtype=float)
    return float(0.5 * c @ (K @ c) - f @ c)


def _activity_thresholds(lower, upper):
    width = upper - lower
    return np.where(np.isfinite(width), ACTIVE_TOL * width, ACTIVE_TOL)


def recover_multipliers(problem: QpProblem, c) -> tuple[np.ndarray, np.ndarray]:
    """Split ``K c - f`` into bound multipliers on the active sides."""
    c = np.asarray(c, dtype=float)
    r = problem.K @ c - problem.f
    thr = _activity_thresholds(problem.lower, problem.upper)
    at_lo = c - problem.lower <= thr
    at_up = (problem.upper - c <= thr) & ~at_lo
    # a pinned variable (l == u) takes whichever sign the residual has
    pinned = at_lo & (problem.upper - c <= thr)
    lam_min = np.where(at_lo, r, 0.0)
    lam_max = np.where(at_up, -r, 0.0)
    lam_min = np.where(pinned & (r < 0), 0.0, lam_min)
    lam_max = np.where(pinned & (r < 0), -r, lam_max)
    return lam_min, lam_max


def kkt_residual(problem: QpProblem, candidate) -> tuple[float, tuple[np.ndarray, np.ndarray]]:
    """First-order optimality residual of ``candidate``.

    Returns the maximum of: stationarity ``|K c - f - lam_min + lam_max|_inf`` and
    multiplier negativity, both relative to ``max(|f|_inf, |K c|_inf)``; the absolute
    bound overshoot; and complementarity ``|(c - l) lam_min| + |(u - c) lam_max|``
    relative to the same scale times ``max(1, |c|_inf)``.

    Returns
    -------
    residual : float
    multipliers : tuple of ndarray
        ``(lambda_min, lambda_max)``.
    """
    c = np.asarray(candidate, dtype=float)
    Kc = problem.K @ c
    r = Kc - problem.f
    lam_min, lam_max = recover_multipliers(problem, c)
    scale = max(np.abs(problem.f).max(initial=0.0), np.abs(Kc).max(initial=0.0), 1e-300)
    stat = np.abs(r - lam_min + lam_max).max(initial=0.0) / scale
    feas = max(np.max(problem.lower - c, initial=0.0), np.max(c - problem.upper, initial=0.0), 0.0)
    neg = max(np.max(-lam_min, initial=0.0), np.max(-lam_max, initial=0.0)) / scale
    lo_gap = np.where(np.isfinite(problem.lower), c - problem.lower, 0.0)
    up_gap = np.where(np.isfinite(problem.upper), problem.upper - c, 0.0)
    comp_vec = np.abs(lo_gap * lam_min) + np.abs(up_gap * lam_max)
    comp = comp_vec.max(initial=0.0) / (scale * max(1.0, np.abs(c).max(initial=0.0)))
    return float(max(stat, feas, neg, comp)), (lam_min, lam_max)


# ---------------------------------------------------------------- internals

def _scaling(x, g, lower, upper):
    """Affine scaling vector ``v`` and its derivative pattern ``dv``."""
    v = np.ones_like(x)
    dv = np.zeros_like(x)
    neg = (g < 0) & np.isfinite(upper)
    v[neg] = upper[neg] - x[neg]
    dv[neg] = 1.0
    pos = (g >= 0) & np.isfinite(lower)
    v[pos] = x[pos] - lower[pos]
    dv[pos] = 1.0
    return v, dv


def _step_to_bound(x, p, lower, upper):
    """Largest ``t`` with ``x + t p`` in the box, and the components that hit first."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(p > 0, (upper - x) / p, np.where(p < 0, (lower - x) / p, np.inf))
    t = np.where(np.isnan(t), np.inf, t)
    tmin = float(t.min(initial=np.inf))
    return tmin, (t == tmin) & np.isfinite(t)


def _to_sphere(a, b, radius):
    """Positive root ``t`` of ``|a + t b| = radius`` (``|a| <= radius``)."""
    bb = b @ b
    if bb == 0.0:
        return np.inf
    ab = a @ b
    disc = ab * ab - bb * (a @ a - radius * radius)
    return float((-ab + math.sqrt(max(disc, 0.0))) / bb)


def _min_1d(a, b, lo, hi):
    """Minimize ``a t^2 + b t`` on ``[lo, hi]``."""
    cands = [lo, hi]
    if a > 0:
        t = -0.5 * b / a
        if lo < t < hi:
            cands.append(t)
    vals = [a * t * t + b * t for t in cands]
    k = int(np.argmin(vals))
    return cands[k], vals[k]


class _ScaledModel:
    """Quadratic model ``g^T z + 1/2 z^T H z`` in the variables ``z = sqrt(m) s``.

    ``s`` is the affinely scaled step (``p = d * s``) and ``m`` the diagonal of the
    scaled Hessian, so the Euclidean norm of ``z`` is the preconditioner norm of ``s``
    and plain CG in ``z`` is diagonal-preconditioned CG in ``s``.
    """

    def __init__(self, K, g, d, cdiag):
        self.K, self.d, self.cdiag = K, d, cdiag
        kdiag = K.diagonal()
        m = d * d * kdiag + cdiag
        m = np.where(m > 0, m, 1.0)
        self.w = 1.0 / np.sqrt(m)
        self.t = d * self.w  # p = t * z
        self.g = self.t * g

    def hv(self, z):
        return self.t * (self.K @ (self.t * z)) + self.cdiag * self.w * self.w * z

    def value(self, z):
        return float(self.g @ z + 0.5 * z @ self.hv(z))

    def line(self, dz, z0=None):
        """Coefficients ``(a, b)`` of ``q(z0 + t dz) - q(z0) = a t^2 + b t``."""
        hd = self.hv(dz)
        b = self.g @ dz
        if z0 is not None:
            b += z0 @ hd
        return 0.5 * float(dz @ hd), float(b)


def _steihaug(model: _ScaledModel, radius: float, tol: float, maxiter: int):
    """Truncated CG on the scaled model inside ``|z| <= radius``; returns ``(z, iters)``."""
    n = model.g.shape[0]
    z = np.zeros(n)
    r = -model.g.copy()
    gnorm = np.linalg.norm(r)
    if gnorm == 0.0:
        return z, 0
    p = r.copy()
    rr = r @ r
    stop = tol * gnorm
    for it in range(1, maxiter + 1):
        hp = model.hv(p)
        curv = p @ hp
        if curv <= 0.0:
            return z + _to_sphere(z, p, radius) * p, it
        alpha = rr / curv
        z_new = z + alpha * p
        if np.linalg.norm(z_new) >= radius:
            return z + _to_sphere(z, p, radius) * p, it
        z = z_new
        r -= alpha * hp
        rr_new = r @ r
        if math.sqrt(rr_new) <= stop:
            return z, it
        p = r + (rr_new / rr) * p
        rr = rr_new
    return z, maxiter


def _select_step(x, model: _ScaledModel, z, radius, lower, upper, theta):
    """Choose among the backed-off, reflected and scaled-gradient steps."""
    t = model.t
    p = t * z
    step, hits = _step_to_bound(x, p, lower, upper)
    if step > 1.0:
        return p, z, -model.value(z)

    # reflect the components that hit a bound
    zr = z.copy()
    zr[hits] *= -1.0
    zb = step * z
    x_on = x + step * p
    to_tr = _to_sphere(zb, zr, radius)
    to_bd, _ = _step_to_bound(x_on, t * zr, lower, upper)
    r_max = min(to_bd, to_tr)
    r_val = np.inf
    if r_max > 0:
        r_lo = (1.0 - theta) * step / r_max
        r_hi = theta * to_bd if to_bd <= to_tr else to_tr
        if r_lo <= r_hi:
            a, b = model.line(zr, zb)
            tr_, dval = _min_1d(a, b, r_lo, r_hi)
            zr = zb + tr_ * zr
            r_val = model.value(zb) + dval
    zp = theta * step * z
    p_val = model.value(zp)

    zg = -model.g
    gz = np.linalg.norm(zg)
    g_val = np.inf
    if gz > 0:
        to_tr_g = radius / gz
        to_bd_g, _ = _step_to_bound(x, t * zg, lower, upper)
        hi = theta * to_bd_g if to_bd_g < to_tr_g else to_tr_g
        a, b = model.line(zg)
        tg, g_val = _min_1d(a, b, 0.0, hi)
        zg = tg * zg

    # projection of the full step onto the box, pulled back into the interior;
    # every component moves, so many simultaneous bound crossings do not stall progress
    pp = np.clip(x + p, lower, upper) - x
    pp *= theta
    zq = np.divide(pp, t, out=np.zeros_like(pp), where=t > 0)
    q_val = model.value(zq)

    vals = (p_val, r_val, g_val, q_val)
    k = int(np.argmin(vals))
    z_sel = (zp, zr, zg, zq)[k]
    return t * z_sel, z_sel, -vals[k]


def _projected_gradient_norm(x, g, lower, upper):
    return float(np.abs(np.clip(x - g, lower, upper) - x).max(initial=0.0))


def _interior_start(lower, upper, x0=None):
    lo_f, up_f = np.isfinite(lower), np.isfinite(upper)
    x = np.zeros_like(lower)
    both = lo_f & up_f
    x[both] = 0.5 * (lower[both] + upper[both])
    x[lo_f & ~up_f] = lower[lo_f & ~up_f] + 1.0
    x[up_f & ~lo_f] = upper[up_f & ~lo_f] - 1.0
    if x0 is not None:
        x0 = np.asarray(x0, dtype=float)
        width = np.where(both, upper - lower, 1.0)
        margin = 1e-3 * width
        lo_m = np.where(lo_f, lower + margin, -np.inf)
        up_m = np.where(up_f, upper - margin, np.inf)
        x = np.clip(x0, lo_m, up_m)
    return x


def _polish(problem: QpProblem, x, g):
    """Exact solve on the free set suggested by the interior iterate."""
    lo, up = problem.lower, problem.upper
    width = np.where(np.isfinite(up - lo), up - lo, np.maximum(1.0, np.abs(x)))
    near_lo = (x - lo <= 1e-6 * width) & (g > 0)
    near_up = (up - x <= 1e-6 * width) & (g < 0)
    fixed = near_lo | near_up
    c = x.copy()
    c[near_lo] = lo[near_lo]
    c[near_up] = up[near_up]
    free = np.flatnonzero(~fixed)
    if free.size:
        K = problem.K
        rhs = problem.f[free] - K[free][:, np.flatnonzero(fixed)] @ c[fixed]
        try:
            c[free] = direct_solve(K[free][:, free], rhs)
        except (np.linalg.LinAlgError, RuntimeError, ValueError):
            return None
    return c


def solve_box_qp(problem: QpProblem, opts: TrustRegionOpts | None = None, x0=None) -> QpSolution:
    """Minimize ``1/2 c^T K c - f^T c`` over ``lower <= c <= upper``.

    Parameters
    ----------
    problem : QpProblem
    opts : TrustRegionOpts, optional
    x0 : ndarray, optional
        Starting guess, moved strictly inside the box.

    Returns
    -------
    QpSolution
        ``converged`` is false when the KKT residual stays above ``opts.kkt_tol``.
    """
    opts = opts or TrustRegionOpts()
    lo_all, up_all = problem.lower, problem.upper
    n_all = problem.n
    pinned = lo_all == up_all
    if pinned.any():
        free_idx = np.flatnonzero(~pinned)
        K_all = problem.K
        c_pin = lo_all[pinned]
        f_red = problem.f[free_idx] - K_all[free_idx][:, np.flatnonzero(pinned)] @ c_pin
        sub = QpProblem(K_all[free_idx][:, free_idx], f_red, lo_all[free_idx], up_all[free_idx])
        inner = solve_box_qp(sub, opts, None if x0 is None else np.asarray(x0)[free_idx]) \
            if free_idx.size else None
        c = lo_all.copy()
        if inner is not None:
            c[free_idx] = inner.c
        res, (lmin, lmax) = kkt_residual(problem, c)
        return QpSolution(c, lmin, lmax,
                          inner.outer_iterations if inner else 0,
                          inner.pcg_iterations_total if inner else 0,
                          res, res <= opts.kkt_tol, inner.polished if inner else False,
                          inner.history if inner else [])

    K, f, lower, upper = problem.K, problem.f, lo_all, up_all
    n = n_all
    x = _interior_start(lower, upper, x0)
    g = K @ x - f
    q = float(0.5 * x @ (g - f))
    v, dv = _scaling(x, g, lower, upper)
    measure0 = np.abs(v * g).max(initial=0.0)
    pg0 = _projected_gradient_norm(x, g, lower, upper)
    pcg_total = 0
    outer = 0
    history = []
    radius = None
    if measure0 > 0:
        for outer in range(1, opts.max_outer + 1):
            d = np.sqrt(v)
            model = _ScaledModel(K, g, d, np.abs(g) * dv)
            if radius is None:
                a, b = model.line(-model.g)
                gz = np.linalg.norm(model.g)
                cauchy = gz * gz / (2 * a) * gz if a > 0 else gz
                radius = opts.initial_radius * cauchy
            measure = np.abs(v * g).max()
            theta = max(opts.theta_min, 1.0 - measure / measure0)
            z, its = _steihaug(model, radius, opts.pcg_tol, max(10, 2 * n))
            pcg_total += its
            p, zs, pred = _select_step(x, model, z, radius, lower, upper, theta)
            x_new = np.clip(x + p, lower, upper)
            g_new = K @ x_new - f
            q_new = float(0.5 * x_new @ (g_new - f))
            # exact decrease of a quadratic, free of cancellation in q
            dx = x_new - x
            actual = -float(dx @ (0.5 * (g + g_new)))
            ratio = actual / pred if pred > 0 else (1.0 if actual >= 0 else -1.0)
            znorm = np.linalg.norm(zs)
            r_used = radius
            if ratio < 0.25:
                radius = 0.25 * znorm if znorm > 0 else 0.25 * radius
            elif ratio > 0.75 and np.linalg.norm(z) >= 0.95 * radius:
                radius *= 2.0
            accepted = actual >= 0.0 and pred > 0
            if accepted:
                step_norm = np.linalg.norm(x_new - x)
                x, g, q = x_new, g_new, q_new
                v, dv = _scaling(x, g, lower, upper)
            else:
                step_norm = np.inf
            measure = np.abs(v * g).max()
            pg = _projected_gradient_norm(x, g, lower, upper)
            history.append((outer, q, pg, its, bool(accepted), r_used, ratio))
            if pg <= opts.rel_tol * pg0:
                break
            if accepted and step_norm <= 1e-15 * (1.0 + np.linalg.norm(x)):
                break
            if accepted and abs(actual) <= 1e-16 * max(abs(q), 1e-300) and measure <= \
                    1e-10 * measure0:
                break
            if radius <= 1e-300:
                break

    res, (lmin, lmax) = kkt_residual(problem, x)
    polished = False
    if opts.polish:
        c_pol = _polish(problem, x, g)
        if c_pol is not None:
            res_pol, mult = kkt_residual(problem, c_pol)
            if res_pol <= res or (res_pol <= opts.kkt_tol and
                                  objective(K, f, c_pol) <= objective(K, f, x) + 1e-14 * abs(q)):
                x, res, (lmin, lmax), polished = c_pol, res_pol, mult, True
    return QpSolution(x, lmin, lmax, outer, pcg_total, res, res <= opts.kkt_tol, polished, history)

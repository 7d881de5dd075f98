"""
Continuous source and jammer power allocation.

The building blocks are

* ``secure_waterfill`` -- KKT water-filling of source power over subcarriers
  whose objective is ``w [log2(1 + p/eta) - log2(1 + p/nu)]``;
* ``allocate_pj_fixed_ps`` -- jammer power for a fixed source allocation,
  either the per-subcarrier optimum or, when the budget binds, the root of the
  quartic stationarity condition priced by a multiplier ``mu``;
* ``alternating_optimization`` -- alternates the two blocks on the jammed set;
* ``primal_decomposition`` -- master loop splitting the source budget between
  the unjammed set (J0) and the jammed set (J1).

All inner loops are vectorized over subcarriers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .channel_model import ChannelRealization
from .jammer_analysis import (
    _clamp_array,
    _optimal_pj,
    _pj_threshold_improve,
    reorder_bounds,
)
from .secure_rate import pair_rate

__all__ = [
    "WaterfillInput",
    "QuarticCoeffs",
    "JammingTargets",
    "PdResult",
    "AoResult",
    "secure_waterfill",
    "waterfill",
    "waterfill_power",
    "marginal_at_zero",
    "quartic_coeffs",
    "solve_quartic_root",
    "pj_marginal",
    "pj_marginal_slope",
    "allocate_pj_fixed_ps",
    "build_jamming_targets",
    "alternating_optimization",
    "primal_decomposition",
    "suboptimal_pj",
]

LN2 = math.log(2.0)

AO_MAX_ITER = 30
PD_MAX_ITER = 50
OBJ_TOL = 1e-6
LAMBDA_GAP_RTOL = 1e-4
ROOT_ITER = 60


def _decreasing_root(fn, target, x_lo, x_hi, ftol, max_iter=100):
    """Solve ``fn(x) = target`` for non-increasing ``fn`` on ``[x_lo, x_hi]``.

    Illinois-modified regula falsi with a bisection safeguard; stops once the
    residual is within ``ftol``. Requires ``fn(x_lo) >= target >= fn(x_hi)``.
    """
    f_lo = fn(x_lo) - target
    f_hi = fn(x_hi) - target
    if f_lo <= ftol:
        return x_lo
    if f_hi >= -ftol:
        return x_hi
    side = 0
    x = x_lo
    for _ in range(max_iter):
        x = (x_lo * f_hi - x_hi * f_lo) / (f_hi - f_lo)
        if not x_lo < x < x_hi:
            x = 0.5 * (x_lo + x_hi)
        f = fn(x) - target
        if abs(f) <= ftol or x_hi - x_lo <= 1e-15 * max(1.0, abs(x)):
            return x
        if f > 0:
            x_lo, f_lo = x, f
            if side == 1:
                f_hi *= 0.5
            side = 1
        else:
            x_hi, f_hi = x, f
            if side == -1:
                f_lo *= 0.5
            side = -1
    return x


def _newton_decreasing(fn, target, x_lo, x_hi, ftol, max_iter=100):
    """Safeguarded Newton for ``f(x) = target`` with ``f`` non-increasing.

    ``fn`` returns ``(f(x), f'(x))``; steps leaving the bracket fall back to
    bisection.
    """
    x = 0.5 * (x_lo + x_hi)
    for _ in range(max_iter):
        f, d = fn(x)
        r = f - target
        if abs(r) <= ftol:
            return x
        if r > 0:
            x_lo = x
        else:
            x_hi = x
        if x_hi - x_lo <= 1e-14 * max(1.0, abs(x)):
            return x
        step = x - r / d if d < 0 else math.nan
        x = step if x_lo < step < x_hi else 0.5 * (x_lo + x_hi)
    return x

# -- secure water-filling ----------------------------------------------------

@dataclass
class WaterfillInput:
    """Per-subcarrier ``eta`` (main), ``nu`` (eavesdropper) noise-to-gain ratios.

    A subcarrier with source power ``p`` contributes
    ``weight * [log2(1 + p/eta) - log2(1 + p/nu)]``; only ``nu > eta`` can
    ever get power.
    """

    eta: np.ndarray
    nu: np.ndarray
    weight: np.ndarray
    budget: float

    def __post_init__(self):
        self.eta = np.atleast_1d(np.asarray(self.eta, dtype=float))
        self.nu = np.atleast_1d(np.asarray(self.nu, dtype=float))
        self.weight = np.broadcast_to(np.asarray(self.weight, dtype=float),
                                      self.eta.shape).copy()
        if self.budget < 0:
            raise ValueError("water-filling budget must be non-negative")


def waterfill_power(eta, nu, kappa):
    """Closed-form stationary power ``max(0, (sqrt(d^2 + kappa d) - (nu + eta)) / 2)``, ``d = nu - eta``."""
    d = nu - eta
    with np.errstate(invalid="ignore"):
        p = 0.5 * (np.sqrt(np.maximum(d * d + kappa * d, 0.0)) - (nu + eta))
    return np.where(d > 0, np.maximum(p, 0.0), 0.0)


def marginal_at_zero(eta, nu, weight):
    """Marginal utility ``d/dp`` at ``p = 0``; the price above which a subcarrier gets nothing."""
    d = nu - eta
    return np.where(d > 0, weight * d / (LN2 * eta * nu), 0.0)


def _wf_total(lam, eta, nu, w):
    return waterfill_power(eta, nu, 4.0 * w / (lam * LN2)).sum()


def waterfill(eta, nu, weight, budget):
    """Array-level water-filling; returns ``(powers, lambda)``.

    ``lambda`` is ``inf`` for a zero budget and 0 when no subcarrier can use
    power.
    """
    eta = np.asarray(eta, dtype=float)
    nu = np.asarray(nu, dtype=float)
    w = np.broadcast_to(np.asarray(weight, dtype=float), eta.shape)
    if budget <= 0:
        return np.zeros_like(eta), math.inf
    lam_hi = float(np.max(marginal_at_zero(eta, nu, w), initial=0.0))
    if lam_hi <= 0:
        return np.zeros_like(eta), 0.0
    lam_lo = lam_hi
    while _wf_total(lam_lo, eta, nu, w) < budget:
        lam_lo *= 0.5
    if lam_lo == lam_hi:
        lam = lam_hi
    else:
        lam = brentq(lambda x: _wf_total(x, eta, nu, w) - budget, lam_lo, lam_hi,
                     xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=200)
    p = waterfill_power(eta, nu, 4.0 * w / (lam * LN2))
    total = p.sum()
    if total > 0:
        p *= budget / total
    return p, lam


def secure_waterfill(inp: WaterfillInput):
    """Water-fill ``inp.budget`` over the subcarriers in ``inp``.

    Returns the power vector and the multiplier of the budget constraint,
    found by bracketed root search so that the powers sum to the budget.
    """
    return waterfill(inp.eta, inp.nu, inp.weight, inp.budget)


# -- quartic stationarity condition for the jammer power ---------------------

@dataclass
class QuarticCoeffs:
    """Both sides of ``(mu ln2 / w) * quartic(P_j) = P_s * quadratic(P_j)``.

    ``a..e`` multiply ``P_j^4..P_j^0`` on the multiplier side, ``c2..e2`` the
    ``P_j^2..P_j^0`` terms on the source side. Fields broadcast over arrays.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    e: np.ndarray
    c2: np.ndarray
    d2: np.ndarray
    e2: np.ndarray
    ps: np.ndarray

    def lhs(self, p):
        return (((self.a * p + self.b) * p + self.c) * p + self.d) * p + self.e

    def rhs(self, p):
        return self.ps * ((self.c2 * p + self.d2) * p + self.e2)

    def residual(self, p, mu, weight):
        """``(mu ln2 / w) lhs - rhs``; negative while the marginal rate exceeds ``mu``."""
        return (mu * LN2 / weight) * self.lhs(p) - self.rhs(p)

    def residual_slope(self, p, mu, weight):
        dl = ((4 * self.a * p + 3 * self.b) * p + 2 * self.c) * p + self.d
        dr = self.ps * (2 * self.c2 * p + self.d2)
        return (mu * LN2 / weight) * dl - dr


def quartic_coeffs(ps, Hm, He, Gm, Ge, sigma2) -> QuarticCoeffs:
    """Coefficients of the jammer-power stationarity quartic (squared gains)."""
    s2, s4 = sigma2, sigma2 ** 2
    GG = Ge * Gm
    a = GG ** 2
    b = GG * (2 * s2 * (Ge + Gm) + ps * (Gm * He + Ge * Hm))
    c = (ps ** 2 * GG * He * Hm
         + ps * s2 * (Gm * He * (Gm + 2 * Ge) + Ge * Hm * (Ge + 2 * Gm))
         + s4 * (Ge ** 2 + Gm ** 2 + 4 * GG))
    d = ((Ge + Gm) * (2 * s4 * s2 + ps * s4 * (Hm + He) + ps ** 2 * s2 * Hm * He)
         + ps * s4 * (Gm * He + Ge * Hm))
    e = s4 * (s2 + ps * He) * (s2 + ps * Hm)
    c2 = GG * (Gm * He - Ge * Hm)
    d2 = 2 * GG * s2 * (He - Hm)
    e2 = s4 * (Ge * He - Gm * Hm) + s2 * ps * He * Hm * (Ge - Gm)
    return QuarticCoeffs(a, b, c, d, e, c2, d2, e2, np.asarray(ps, dtype=float))


def solve_quartic_root(coeffs: QuarticCoeffs, mu, weight, lower, upper, x0=None):
    """Root of the stationarity quartic inside ``[lower, upper]``.

    Where the residual is already non-negative at ``lower`` the multiplier
    prices the subcarrier out and ``lower`` is returned; where it is still
    negative at ``upper`` the marginal rate exceeds ``mu`` across the bracket
    and ``upper`` is returned. Otherwise a bracketed Newton/bisection search
    locates the sign change, started from ``x0`` when given. Vectorized
    over subcarriers.
    """
    shape = np.broadcast_shapes(np.shape(coeffs.a), np.shape(coeffs.ps),
                                np.shape(lower), np.shape(upper))
    lo = np.array(np.broadcast_to(lower, shape), dtype=float)
    hi = np.array(np.broadcast_to(upper, shape), dtype=float)
    if np.any(hi < lo):
        raise ValueError("invalid bracket: upper < lower")
    f_lo = coeffs.residual(lo, mu, weight)
    f_hi = coeffs.residual(hi, mu, weight)
    out = np.where(f_lo >= 0, lo, hi)
    active = (f_lo < 0) & (f_hi > 0)
    if not np.any(active):
        return out
    # iterate on the active entries only, flattened
    idx = np.flatnonzero(active)

    def flat(v):
        return np.broadcast_to(np.asarray(v, dtype=float), shape).ravel()[idx]

    sub = QuarticCoeffs(*(flat(v) for v in (coeffs.a, coeffs.b, coeffs.c, coeffs.d,
                                            coeffs.e, coeffs.c2, coeffs.d2, coeffs.e2,
                                            coeffs.ps)))
    k = mu * LN2 / flat(weight)
    a, b = lo.ravel()[idx], hi.ravel()[idx]
    x = 0.5 * (a + b)
    if x0 is not None:
        xs = flat(x0)
        x = np.where((xs > a) & (xs < b), xs, x)
    res = x.copy()
    pos = np.arange(idx.size)
    for _ in range(ROOT_ITER):
        f = k * sub.lhs(x) - sub.rhs(x)
        neg = f < 0
        a = np.where(neg, x, a)
        b = np.where(neg, b, x)
        dl = ((4 * sub.a * x + 3 * sub.b) * x + 2 * sub.c) * x + sub.d
        slope = k * dl - sub.ps * (2 * sub.c2 * x + sub.d2)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = x - f / slope
        ok = np.isfinite(newton) & (newton >= a) & (newton <= b)
        x_new = np.where(ok, newton, 0.5 * (a + b))
        x_new = np.where(f == 0, x, x_new)
        scale = 1e-14 * np.maximum(1.0, np.abs(x_new))
        # Newton approaches from one side, so test the step as well as the bracket
        done = (np.abs(x_new - x) <= scale) | (b - a <= scale) | (f == 0)
        res[pos] = x_new
        if done.all():
            break
        keep = ~done
        pos, x, a, b, k = pos[keep], x_new[keep], a[keep], b[keep], k[keep]
        sub = QuarticCoeffs(*(v[keep] for v in (sub.a, sub.b, sub.c, sub.d, sub.e,
                                                 sub.c2, sub.d2, sub.e2, sub.ps)))
    out = np.array(out, dtype=float).ravel()
    out[idx] = res
    return out.reshape(shape)


def pj_marginal(pj, ps, Hm, He, Gm, Ge, sigma2, weight=1.0):
    """Derivative of the weighted pair rate with respect to jammer power."""
    te = ps * He * Ge / ((sigma2 + pj * Ge) * (sigma2 + pj * Ge + ps * He))
    tm = ps * Hm * Gm / ((sigma2 + pj * Gm) * (sigma2 + pj * Gm + ps * Hm))
    return weight * (te - tm) / LN2


def pj_marginal_slope(pj, ps, Hm, He, Gm, Ge, sigma2, weight=1.0):
    """Second derivative of the weighted pair rate with respect to jammer power."""
    ae, be = sigma2 + pj * Ge, sigma2 + pj * Ge + ps * He
    am, bm = sigma2 + pj * Gm, sigma2 + pj * Gm + ps * Hm
    de = -He * Ge * Ge * (ae + be) / (ae * be) ** 2
    dm = -Hm * Gm * Gm * (am + bm) / (am * bm) ** 2
    return weight * ps * (de - dm) / LN2


def allocate_pj_fixed_ps(ps, Hm, He, Gm, Ge, weight, sigma2, lower, upper, budget):
    """Jammer powers for fixed source powers on the jammed set.

    Each subcarrier's unconstrained optimum is clamped into ``(lower, upper)``.
    If those fit the budget they are used as is; otherwise the multiplier
    ``mu`` is searched so that the clamped quartic roots exhaust the budget.
    Subcarriers with an empty interval (or no interior optimum) get 0.
    """
    ps = np.asarray(ps, dtype=float)
    if ps.size == 0:
        return np.zeros(0)
    if budget <= 0:
        return np.zeros_like(ps)
    w = np.broadcast_to(np.asarray(weight, dtype=float), ps.shape)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    p_opt = _optimal_pj(ps, Hm, He, Gm, Ge, sigma2)
    usable = (lower < upper) & (p_opt > 0) & (ps > 0)
    star = np.where(usable, _clamp_array(p_opt, lower, upper), 0.0)
    if star.sum() <= budget:
        return star

    lo_b = np.where(usable, lower, 0.0)
    hi_b = star
    coeffs = quartic_coeffs(ps, Hm, He, Gm, Ge, sigma2)

    state = {"x": None}

    def alloc(mu):
        r = solve_quartic_root(coeffs, mu, w, lo_b, hi_b, x0=state["x"])
        state["x"] = r
        return np.where(usable, _clamp_array(r, lower, upper), 0.0)

    def total_and_slope(v):
        # total jammer power and its derivative with respect to log(mu)
        mu = math.exp(v)
        pj = alloc(mu)
        r = state["x"]
        interior = usable & (r > lo_b) & (r < hi_b) & (pj == r)
        slope = pj_marginal_slope(r, ps, Hm, He, Gm, Ge, sigma2, w)
        with np.errstate(divide="ignore", invalid="ignore"):
            d = mu * np.sum(np.where(interior & (slope < 0), 1.0 / slope, 0.0))
        return pj.sum(), d

    marg_lo = pj_marginal(lo_b, ps, Hm, He, Gm, Ge, sigma2, w)
    marg_hi = pj_marginal(hi_b, ps, Hm, He, Gm, Ge, sigma2, w)
    mu_hi = float(np.max(np.where(usable, marg_lo, 0.0), initial=0.0))
    if mu_hi <= 0 or alloc(mu_hi).sum() > budget:
        # even the cheapest feasible point (lower edge) exceeds the budget
        return alloc(mu_hi * 2 + 1.0)
    mu_lo = float(np.min(np.where(usable, marg_hi, np.inf)))
    mu_lo = max(mu_lo, mu_hi * 1e-12)
    while alloc(mu_lo).sum() <= budget and mu_lo > mu_hi * 1e-300:
        mu_lo *= 0.5
    state["x"] = None
    v = _newton_decreasing(total_and_slope, budget, math.log(mu_lo), math.log(mu_hi),
                           ftol=1e-9 * budget)
    pj = alloc(math.exp(v))
    total = pj.sum()
    if total > budget:
        pj = alloc(math.exp(v) * (1 + 1e-10))
        total = pj.sum()
        if total > budget:
            pj = np.where(usable, np.maximum(pj * budget / total, 0.0), 0.0)
    return pj


# -- jammed set description --------------------------------------------------

@dataclass
class JammingTargets:
    """Jammed subcarriers with their fixed main user and eavesdropper.

    ``lower``/``upper`` are the source-power independent jammer limits
    (identity preservation, snatch threshold, policy caps). Where ``improve``
    is set the improvement threshold at the current source power is applied
    on top.
    """

    idx: np.ndarray
    owner: np.ndarray
    eve: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    improve: np.ndarray

    def __post_init__(self):
        self.idx = np.asarray(self.idx, dtype=int)
        self.owner = np.asarray(self.owner, dtype=int)
        self.eve = np.asarray(self.eve, dtype=int)
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        self.improve = np.asarray(self.improve, dtype=bool)

    def __len__(self):
        return self.idx.size

    def subset(self, keep) -> "JammingTargets":
        return JammingTargets(self.idx[keep], self.owner[keep], self.eve[keep],
                              self.lower[keep], self.upper[keep], self.improve[keep])

    def gains(self, ch: ChannelRealization):
        n = self.idx
        return ch.H[self.owner, n], ch.H[self.eve, n], ch.G[self.owner, n], ch.G[self.eve, n]

    def bounds(self, ps, ch: ChannelRealization):
        Hm, He, Gm, Ge = self.gains(ch)
        th = np.where(self.improve,
                      _pj_threshold_improve(ps, Hm, He, Gm, Ge, ch.noise_variance), np.inf)
        return self.lower, np.minimum(self.upper, th)


def build_jamming_targets(ch: ChannelRealization, idx, owner, eve, caps=None) -> JammingTargets:
    """Precompute identity-preserving jammer limits for ``idx``.

    ``owner``/``eve`` are per-subcarrier (length N or aligned with ``idx``);
    ``caps`` optionally adds a per-subcarrier upper limit.
    """
    idx = np.asarray(idx, dtype=int)
    owner = np.asarray(owner, dtype=int)
    eve = np.asarray(eve, dtype=int)
    if owner.size != idx.size:
        owner = owner[idx]
        eve = eve[idx]
    lo = np.zeros(idx.size)
    up = np.zeros(idx.size)
    improve = np.zeros(idx.size, dtype=bool)
    for i, (n, m, e) in enumerate(zip(idx, owner, eve)):
        b = reorder_bounds(int(m), int(e), int(n), ch)
        lo[i], up[i] = b.lower, b.upper
        improve[i] = ch.h[m, n] > ch.h[e, n]
    if caps is not None:
        up = np.minimum(up, np.broadcast_to(np.asarray(caps, dtype=float), up.shape))
    return JammingTargets(idx, owner, eve, lo, up, improve)


# -- alternating optimization on the jammed set ------------------------------

@dataclass
class AoResult:
    ps: np.ndarray
    pj: np.ndarray
    objective: float
    lam: float
    iterations: int
    trace: list = field(default_factory=list)


def _set_objective(ps, pj, Hm, He, Gm, Ge, w, s2):
    return float(np.sum(w * np.maximum(pair_rate(ps, pj, Hm, He, Gm, Ge, s2), 0.0)))


def alternating_optimization(ch: ChannelRealization, targets: JammingTargets,
                             source_budget: float, jammer_budget: float, weights,
                             max_iter: int = AO_MAX_ITER, ps_init=None) -> AoResult:
    """Alternate jammer and source power updates on the jammed set.

    Starts from equal source power (or ``ps_init``), then repeats: jammer
    powers for the current source powers, followed by water-filling with the
    jammed main/eavesdropper coefficients. An iterate that lowers the
    objective is rejected, so the returned trace is non-decreasing.
    ``weights`` is per user.
    """
    K = len(targets)
    if K == 0:
        return AoResult(np.zeros(0), np.zeros(0), 0.0, 0.0, 0)
    s2 = ch.noise_variance
    Hm, He, Gm, Ge = targets.gains(ch)
    w = np.asarray(weights, dtype=float)[targets.owner]
    if ps_init is None:
        ps = np.full(K, source_budget / K)
    else:
        ps = np.asarray(ps_init, dtype=float).copy()
    pj = np.zeros(K)
    best = _set_objective(ps, pj, Hm, He, Gm, Ge, w, s2)
    lam = math.inf
    trace = [best]
    it = 0
    for it in range(1, max_iter + 1):
        lo, up = targets.bounds(ps, ch)
        pj_new = allocate_pj_fixed_ps(ps, Hm, He, Gm, Ge, w, s2, lo, up, jammer_budget)
        eta = (s2 + pj_new * Gm) / Hm
        nu = (s2 + pj_new * Ge) / He
        ps_new, lam_new = waterfill(eta, nu, w, source_budget)
        obj = _set_objective(ps_new, pj_new, Hm, He, Gm, Ge, w, s2)
        if obj < best - 1e-12:
            break
        gain = obj - best
        ps, pj, best, lam = ps_new, pj_new, obj, lam_new
        trace.append(best)
        if gain < OBJ_TOL and it > 1:
            break
    if math.isinf(lam) or it == 0:
        eta = (s2 + pj * Gm) / Hm
        nu = (s2 + pj * Ge) / He
        _, lam = waterfill(eta, nu, w, source_budget)
    return AoResult(ps, pj, best, lam, it, trace)


# -- primal decomposition master ---------------------------------------------

@dataclass
class PdResult:
    """Outcome of the source-budget split between the unjammed and jammed sets."""

    ps: np.ndarray
    pj: np.ndarray
    jammer_active: np.ndarray
    objective: float
    t: float
    lam1: float
    lam2: float
    pd_iterations: int
    ao_iterations: int
    converged: bool
    demoted: list = field(default_factory=list)
    trace: list = field(default_factory=list)


def _j0_coeffs(ch, idx, owner, eve):
    s2 = ch.noise_variance
    return s2 / ch.H[owner[idx], idx], s2 / ch.H[eve[idx], idx]


def _finite_price(lam, eta, nu, w):
    if math.isinf(lam):
        return float(np.max(marginal_at_zero(eta, nu, w), initial=0.0))
    return lam


def primal_decomposition(ch: ChannelRealization, j0, targets: JammingTargets,
                         owner, eve, source_budget: float, jammer_budget: float,
                         weights, max_iter: int = PD_MAX_ITER,
                         ao_max_iter: int = AO_MAX_ITER) -> PdResult:
    """Split the source budget between J0 (no jammer) and J1 (``targets``).

    ``owner``/``eve`` are length-N vectors used for the J0 subcarriers. The
    coupling budget ``t`` of J0 follows ``t <- t - xi (lambda2 - lambda1)``
    with the step normalized by ``max(lambda1, lambda2)`` and halved whenever
    the subgradient changes sign. Improvement subcarriers whose jammer power
    drops to zero are moved to J0 (at most once per outer iteration). The best
    allocation seen is returned.
    """
    N = ch.num_subcarriers
    owner = np.asarray(owner, dtype=int)
    eve = np.asarray(eve, dtype=int)
    w_user = np.asarray(weights, dtype=float)
    j0 = np.asarray(j0, dtype=int)
    P_S, P_J = float(source_budget), float(jammer_budget)

    def assemble(j0_idx, tg, ps0, ao):
        ps = np.zeros(N)
        pj = np.zeros(N)
        act = np.zeros(N, dtype=bool)
        ps[j0_idx] = ps0
        if len(tg):
            ps[tg.idx] = ao.ps
            pj[tg.idx] = ao.pj
            act[tg.idx] = ao.pj > 0
        return ps, pj, act

    def j0_solve(j0_idx, budget):
        eta, nu = _j0_coeffs(ch, j0_idx, owner, eve)
        w = w_user[owner[j0_idx]]
        p, lam = waterfill(eta, nu, w, budget)
        obj = float(np.sum(w * np.maximum(
            (np.log1p(p / eta) - np.log1p(p / nu)) / LN2, 0.0)))
        return p, _finite_price(lam, eta, nu, w), obj

    if len(targets) == 0 or P_J <= 0:
        all_idx = np.sort(np.concatenate([j0, targets.idx])) if len(targets) else j0
        p, lam, obj = j0_solve(all_idx, P_S)
        empty = targets.subset(np.zeros(len(targets), dtype=bool))
        ps, pj, act = assemble(all_idx, empty, p, None)
        return PdResult(ps, pj, act, obj, P_S, lam, lam, 0, 0, True)

    tg = targets
    if j0.size == 0:
        t = 0.0
    else:
        t = P_S * j0.size / (j0.size + len(tg))
    step = 0.5 * P_S
    prev_sign = 0
    best = None
    prev_obj = None
    demoted = []
    trace = []
    ao_total = 0
    converged = False
    last_ps = None  # warm start for the next jammed-set solve
    k = 0
    for k in range(1, max_iter + 1):
        if j0.size:
            p0, lam1, obj0 = j0_solve(j0, t)
        else:
            p0, lam1, obj0 = np.zeros(0), math.inf, 0.0
            t = 0.0
        warm = None
        if last_ps is not None and last_ps.sum() > 0 and P_S - t > 0:
            warm = last_ps * ((P_S - t) / last_ps.sum())
        ao = alternating_optimization(ch, tg, P_S - t, P_J, w_user, max_iter=ao_max_iter,
                                      ps_init=warm)
        ao_total += ao.iterations
        last_ps = ao.ps
        Hm, He, Gm, Ge = tg.gains(ch)
        w1 = w_user[tg.owner]
        lam2 = ao.lam
        if math.isinf(lam2):
            eta = (ch.noise_variance + ao.pj * Gm) / Hm
            nu = (ch.noise_variance + ao.pj * Ge) / He
            lam2 = _finite_price(lam2, eta, nu, w1)
        obj = obj0 + ao.objective
        trace.append({"iter": k, "t": t, "lambda1": lam1, "lambda2": lam2, "objective": obj})
        if best is None or obj > best[0] + 1e-12:
            ps, pj, act = assemble(j0, tg, p0, ao)
            best = (obj, ps, pj, act, t, lam1, lam2)

        # improvement subcarriers that ended with zero jammer power rejoin J0;
        # a snatched one has no unjammed use for its main user
        zero = (ao.pj <= 0) & tg.improve
        if np.any(zero):
            moved = tg.idx[zero]
            demoted.extend(int(n) for n in moved)
            t = min(P_S, t + float(ao.ps[zero].sum()))
            j0 = np.sort(np.concatenate([j0, moved]))
            tg = tg.subset(~zero)
            last_ps = ao.ps[~zero]
            prev_obj = None
            prev_sign = 0
            if len(tg) == 0:
                p, lam, obj_all = j0_solve(j0, P_S)
                if obj_all > best[0] + 1e-12:
                    ps, pj, act = assemble(j0, tg, p, None)
                    best = (obj_all, ps, pj, act, P_S, lam, lam)
                converged = True
                break
            continue

        if j0.size == 0:
            converged = True
            break
        gap = lam2 - lam1
        if abs(gap) <= LAMBDA_GAP_RTOL * max(lam1, lam2, 1.0):
            converged = True
            break
        if prev_obj is not None and abs(obj - prev_obj) < OBJ_TOL:
            converged = True
            break
        prev_obj = obj
        sign = 1 if gap > 0 else -1
        if prev_sign and sign != prev_sign:
            step *= 0.5
        prev_sign = sign
        xi = step / max(lam1, lam2)
        t_new = min(P_S, max(0.0, t - xi * gap))
        if t_new == t:
            # pinned at a boundary with the subgradient pushing outward
            converged = True
            break
        t = t_new

    obj, ps, pj, act, t_best, lam1, lam2 = best
    return PdResult(ps, pj, act, obj, t_best, lam1, lam2, k, ao_total, converged,
                    demoted, trace)


# -- reduced-complexity jammer allocation ------------------------------------

def suboptimal_pj(ch: ChannelRealization, targets: JammingTargets, ps, jammer_budget: float,
                  weights, when_slack: str = "midpoint"):
    """Closed-form jammer allocation maximizing the log-ratio upper bound.

    For the upper-bound objective ``log((s2 + P Ge) / (s2 + P Gm))`` the
    stationary point has the water-filling form with ``eta = s2/Ge`` and
    ``nu = s2/Gm``; the multiplier is searched so the clamped powers use the
    whole budget. If the summed upper limits fit inside the budget the
    objective would run to the limits, so ``when_slack`` selects the fallback:
    ``"midpoint"`` gives ``(lower + upper) / 2``, ``"upper"`` gives
    ``upper - delta``.
    """
    K = len(targets)
    if K == 0 or jammer_budget <= 0:
        return np.zeros(K)
    s2 = ch.noise_variance
    ps = np.asarray(ps, dtype=float)
    Hm, He, Gm, Ge = targets.gains(ch)
    w = np.asarray(weights, dtype=float)[targets.owner]
    lo, up = targets.bounds(ps, ch)
    usable = (lo < up) & (Ge > Gm) & (ps > 0)
    if not np.any(usable):
        return np.zeros(K)
    if up[usable].sum() <= jammer_budget:
        if when_slack == "midpoint":
            mid = 0.5 * (lo + up)
        elif when_slack == "upper":
            # clamping from above leaves the margin below the upper limit
            mid = _clamp_array(np.full_like(up, np.inf), lo, up)
        else:
            raise ValueError(f"unknown fallback {when_slack!r}")
        return np.where(usable, mid, 0.0)

    eta, nu = s2 / Ge, s2 / Gm

    def alloc(lam):
        p = waterfill_power(eta, nu, 4.0 * w / (lam * LN2))
        return np.where(usable, _clamp_array(p, lo, up), 0.0)

    lam_hi = float(np.max(np.where(usable, marginal_at_zero(eta, nu, w), 0.0)))
    # marginal of the bound at the lower edge prices every subcarrier out
    lam_hi = max(lam_hi, 1e-300)
    if alloc(lam_hi).sum() > jammer_budget:
        return alloc(lam_hi)
    lam_lo = lam_hi
    while alloc(lam_lo).sum() < jammer_budget and lam_lo > 1e-300:
        lam_lo *= 0.5
    s = _decreasing_root(lambda v: alloc(math.exp(v)).sum(), jammer_budget,
                         math.log(lam_lo), math.log(lam_hi), ftol=1e-9 * jammer_budget)
    pj = alloc(math.exp(s))
    total = pj.sum()
    if total > jammer_budget:
        pj = alloc(math.exp(s) * (1 + 1e-10))
        total = pj.sum()
        if total > jammer_budget:
            pj = pj * jammer_budget / total
    return pj

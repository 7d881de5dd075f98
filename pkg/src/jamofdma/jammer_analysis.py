"""
Per-subcarrier jamming analysis.

For a main user ``m`` and eavesdropper ``e`` on one subcarrier this module
decides whether jamming can help (rate improvement when ``m`` already has
the better source gain, snatching when it does not), computes the power
thresholds involved, the rate-maximizing jammer power, and the jammer power
interval that keeps ``m`` and ``e`` in their roles.

Functions prefixed with an underscore work on *squared* gains and broadcast
over numpy arrays; the public wrappers take user/subcarrier indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .channel_model import ChannelRealization

__all__ = [
    "JammerBounds",
    "JammerAnalysisResult",
    "DegenerateIntervalError",
    "rate_improvement_feasible",
    "ps_threshold",
    "pj_threshold_improve",
    "optimal_pj",
    "snatch_feasible",
    "pj_threshold_snatch",
    "reorder_bounds",
    "clamp_pj",
    "default_delta",
    "pj_star",
    "analyze_subcarrier",
    "best_gain_user",
    "strongest_other",
]

DELTA_RTOL = 1e-6


class DegenerateIntervalError(ValueError):
    """The clamp margin does not fit inside the jammer power interval."""


class JammerBounds(NamedTuple):
    lower: float
    upper: float

    @property
    def feasible(self) -> bool:
        return self.lower < self.upper


def _gains(ch: ChannelRealization, m: int, e: int, n: int):
    return ch.H[m, n], ch.H[e, n], ch.G[m, n], ch.G[e, n], ch.noise_variance


def best_gain_user(ch: ChannelRealization, n: int) -> int:
    return int(np.argmax(ch.h[:, n]))


def strongest_other(ch: ChannelRealization, m: int, n: int) -> int:
    """Unjammed eavesdropper of ``m`` on ``n``: the best source gain among the rest."""
    col = ch.h[:, n].copy()
    col[m] = -np.inf
    return int(np.argmax(col))


# -- vectorized kernels on squared gains ------------------------------------

def _ps_threshold(Hm, He, Gm, Ge, s2):
    num = s2 * (Gm * Hm - Ge * He)
    den = (Ge - Gm) * Hm * He
    return np.maximum(num / den, 0.0)


def _pj_threshold_improve(ps, Hm, He, Gm, Ge, s2):
    alpha = (Ge - Gm) * Hm * He
    beta = Ge * He - Gm * Hm
    return (ps * alpha + s2 * beta) / (Gm * Ge * (Hm - He))


def _quad_coeffs(ps, Hm, He, Gm, Ge, s2):
    """Coefficients of the quadratic whose positive root zeroes d(rate)/d(P_j)."""
    x = Gm * Ge * (Gm * He - Ge * Hm)
    y = 2.0 * s2 * Gm * Ge * (He - Hm)
    z = s2 * ps * Hm * He * (Ge - Gm) + s2 ** 2 * (Ge * He - Gm * Hm)
    return x, y, z


def _positive_root(x, y, z):
    """Positive root of ``x P^2 + y P + z`` for ``x < 0 < z``; 0 elsewhere.

    Uses the cancellation-free form ``q = -(y + sign(y) sqrt(disc)) / 2``.
    """
    x, y, z = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float),
                                  np.asarray(z, float))
    ok = (x < 0) & (z > 0)
    disc = np.where(ok, y * y - 4.0 * x * z, 1.0)
    sq = np.sqrt(np.maximum(disc, 0.0))
    q = -0.5 * (y + np.copysign(sq, y))
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = np.where(ok, q / np.where(ok, x, 1.0), 0.0)
        r2 = np.where(ok & (q != 0), z / np.where(q != 0, q, 1.0), 0.0)
    return np.where(ok, np.maximum(r1, r2), 0.0)


def _optimal_pj(ps, Hm, He, Gm, Ge, s2):
    return _positive_root(*_quad_coeffs(ps, Hm, He, Gm, Ge, s2))


def _snatch_threshold(Hm, He, Gm, Ge, s2):
    den = Ge * Hm - Gm * He
    with np.errstate(divide="ignore"):
        return np.where(den > 0, s2 * (He - Hm) / np.where(den > 0, den, 1.0), np.inf)


def _reorder_limits(He, Ge, Hk, Gk, s2):
    """Bounds on P_j keeping ``e`` above every ``k`` in jammed SNR.

    ``e`` stays ahead of ``k`` iff ``P_j (He Gk - Hk Ge) > s2 (Hk - He)``,
    which is linear in P_j once the source power cancels. Returns the
    (lower, upper) pair implied by all ``k`` together.
    """
    a = He * Gk - Hk * Ge
    b = s2 * (Hk - He)
    lower, upper = 0.0, math.inf
    for ai, bi in zip(np.atleast_1d(a), np.atleast_1d(b)):
        if ai > 0:
            lower = max(lower, bi / ai)
        elif ai < 0:
            upper = min(upper, bi / ai)
        elif bi >= 0:
            # no P_j separates them; mark empty
            upper = min(upper, 0.0)
    return lower, upper


# -- public API --------------------------------------------------------------

def rate_improvement_feasible(m: int, e: int, n: int, ch: ChannelRealization) -> bool:
    """True when jamming can raise ``m``'s secure rate against ``e`` on ``n``.

    Requires ``|h_m| > |h_e|``; the jammer helps only if it hits the
    eavesdropper harder, ``|g_e| > |g_m|`` (equality counts as infeasible).
    """
    if not ch.h[m, n] > ch.h[e, n]:
        raise ValueError(f"user {m} must have a larger source gain than {e} on subcarrier {n}")
    return bool(ch.g[e, n] > ch.g[m, n])


def ps_threshold(m: int, e: int, n: int, ch: ChannelRealization) -> float:
    """Source power above which jamming improves the rate (0 if any power works)."""
    return float(_ps_threshold(*_gains(ch, m, e, n)))


def pj_threshold_improve(m: int, e: int, n: int, ps_n: float, ch: ChannelRealization) -> float:
    """Jammer power below which the jammed rate beats the unjammed one."""
    Hm, He, Gm, Ge, s2 = _gains(ch, m, e, n)
    return float(_pj_threshold_improve(ps_n, Hm, He, Gm, Ge, s2))


def optimal_pj(m: int, e: int, n: int, ps_n: float, ch: ChannelRealization) -> float:
    """Unconstrained rate-maximizing jammer power for the pair ``(m, e)``.

    Valid in the improvement regime above the source threshold and in the
    snatching regime; raises ``ValueError`` otherwise.
    """
    x, y, z = _quad_coeffs(ps_n, *_gains(ch, m, e, n))
    if not (x < 0 and z > 0):
        raise ValueError(
            f"no interior rate maximum for users ({m}, {e}) on subcarrier {n} at P_s={ps_n}")
    return float(_positive_root(x, y, z))


def snatch_feasible(m: int, e: int, n: int, ch: ChannelRealization) -> bool:
    """Whether ``m`` can take ``n`` from the stronger user ``e`` by jamming."""
    if not ch.h[e, n] > ch.h[m, n]:
        raise ValueError(f"user {e} must have a larger source gain than {m} on subcarrier {n}")
    Hm, He, Gm, Ge, _ = _gains(ch, m, e, n)
    return bool(Ge * Hm > Gm * He)


def pj_threshold_snatch(m: int, e: int, n: int, ch: ChannelRealization) -> float:
    """Jammer power above which ``m`` out-rates ``e``; ``inf`` when infeasible."""
    return float(_snatch_threshold(*_gains(ch, m, e, n)))


def reorder_bounds(m: int, e: int, n: int, ch: ChannelRealization,
                   ps_n: Optional[float] = None) -> JammerBounds:
    """Jammer power interval keeping ``m`` as main user and ``e`` as eavesdropper.

    Every other user ``k`` contributes a linear bound from staying below ``e``
    in jammed SNR. In the improvement case (``|h_m| > |h_e|``) the result is
    further capped by the improvement threshold at source power ``ps_n``
    (skipped when ``ps_n`` is None). In the snatching case the snatch
    threshold is a lower bound. Check ``.feasible`` on the result.
    """
    Hm, He, Gm, Ge, s2 = _gains(ch, m, e, n)
    others = [k for k in range(ch.num_users) if k not in (m, e)]
    lower, upper = _reorder_limits(He, Ge, ch.H[others, n], ch.G[others, n], s2)
    if Hm > He:
        # main vs eavesdropper gives no finite bound when |g_e| > |g_m|
        a, b = Hm * Ge - He * Gm, s2 * (He - Hm)
        if a < 0:
            upper = min(upper, b / a)
        if ps_n is not None:
            upper = min(upper, float(_pj_threshold_improve(ps_n, Hm, He, Gm, Ge, s2)))
    else:
        lower = max(lower, float(_snatch_threshold(Hm, He, Gm, Ge, s2)))
    return JammerBounds(float(lower), float(upper))


def default_delta(lower: float, upper: float) -> float:
    """Margin used to keep jammer powers strictly inside their interval."""
    ref = upper if math.isfinite(upper) else lower
    return DELTA_RTOL * max(1.0, ref)


def clamp_pj(p: float, lower: float, upper: float, delta: Optional[float] = None) -> float:
    """Pull ``p`` strictly inside ``(lower, upper)`` by margin ``delta``."""
    if delta is None:
        delta = default_delta(lower, upper)
    if not lower < upper:
        raise DegenerateIntervalError(f"empty jammer interval ({lower}, {upper})")
    if delta >= (upper - lower) / 2:
        raise DegenerateIntervalError(
            f"delta={delta} too large for interval ({lower}, {upper})")
    if p < lower:
        return lower + delta
    if p > upper:
        return upper - delta
    return p


def _clamp_array(p, lower, upper):
    """Vectorized clamp with the default margin; assumes non-degenerate intervals."""
    ref = np.where(np.isfinite(upper), upper, lower)
    delta = DELTA_RTOL * np.maximum(1.0, ref)
    delta = np.minimum(delta, np.where(np.isfinite(upper), (upper - lower) / 4, delta))
    return np.where(p < lower, lower + delta, np.where(p > upper, upper - delta, p))


def pj_star(m: int, e: int, n: int, ps_n: float, ch: ChannelRealization) -> float:
    """Rate-maximizing jammer power clamped into the reordering-safe interval.

    Returns 0 when no feasible jamming interval exists.
    """
    bounds = reorder_bounds(m, e, n, ch, ps_n)
    if not bounds.feasible:
        return 0.0
    return clamp_pj(optimal_pj(m, e, n, ps_n, ch), *bounds)


@dataclass
class JammerAnalysisResult:
    """Everything the schemes need to know about jamming one subcarrier."""

    subcarrier: int
    owner: int
    eavesdropper: int
    improvable: bool
    ps_threshold: float
    pj_threshold_improve: float
    pj_opt: float
    pj_lower: float
    pj_upper: float
    snatchable_by: np.ndarray
    pj_threshold_snatch: np.ndarray
    snatch_pj_opt: np.ndarray
    snatch_lower: np.ndarray
    snatch_upper: np.ndarray

    @property
    def jamming_feasible(self) -> bool:
        return self.improvable and self.pj_lower < self.pj_upper


def analyze_subcarrier(n: int, ch: ChannelRealization, ps_n: float,
                       owner: Optional[int] = None) -> JammerAnalysisResult:
    """Tabulate thresholds, bounds and optimal powers for subcarrier ``n``.

    ``owner`` defaults to the best source-gain user. Snatching quantities are
    computed for every other user against the best-gain user and are ``nan``
    (or ``inf`` for thresholds) where snatching is infeasible.
    """
    best = best_gain_user(ch, n)
    m = best if owner is None else owner
    e = strongest_other(ch, m, n)
    M = ch.num_users
    s2 = ch.noise_variance

    improvable = bool(ch.h[m, n] > ch.h[e, n] and ch.g[e, n] > ch.g[m, n])
    th_s = ps_th = th_i = p_opt = math.nan
    lo, up = 0.0, 0.0
    if improvable:
        ps_th = ps_threshold(m, e, n, ch)
        th_i = pj_threshold_improve(m, e, n, ps_n, ch)
        if ps_n > ps_th:
            p_opt = optimal_pj(m, e, n, ps_n, ch)
            lo, up = reorder_bounds(m, e, n, ch, ps_n)
        else:
            improvable = False

    snatchable = np.zeros(M, dtype=bool)
    thr = np.full(M, math.inf)
    s_opt = np.full(M, math.nan)
    s_lo = np.full(M, math.nan)
    s_up = np.full(M, math.nan)
    for k in range(M):
        if k == best or not ch.h[best, n] > ch.h[k, n]:
            continue
        if snatch_feasible(k, best, n, ch):
            snatchable[k] = True
            thr[k] = pj_threshold_snatch(k, best, n, ch)
            s_opt[k] = optimal_pj(k, best, n, ps_n, ch)
            s_lo[k], s_up[k] = reorder_bounds(k, best, n, ch)
    return JammerAnalysisResult(
        subcarrier=n, owner=m, eavesdropper=e, improvable=improvable,
        ps_threshold=ps_th, pj_threshold_improve=th_i, pj_opt=p_opt,
        pj_lower=lo, pj_upper=up, snatchable_by=snatchable,
        pj_threshold_snatch=thr, snatch_pj_opt=s_opt,
        snatch_lower=s_lo, snatch_upper=s_up)

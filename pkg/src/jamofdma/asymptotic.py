"""
Infinite-power limits and the bounds built on them.

As source and jammer powers grow without bound, the jammed SNR ordering on a
subcarrier is decided by ``|h|^2 / |g|^2``: the user with the largest ratio
is the only one no finite jammer power can overtake. Each subcarrier then
settles either in a no-jammer mode (owner = best source gain) or a jammer
mode (owner = best ratio), whichever has the larger limiting secure rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .channel_model import ChannelRealization, ScenarioConfig
from .jammer_analysis import _optimal_pj
from .secure_rate import SchemeOutcome, pair_rate

__all__ = [
    "AsymptoticVerdict",
    "SubcarrierMode",
    "asymptotic_main_user",
    "asymptotic_pair_rate",
    "asymptotic_user_verdict",
    "subcarrier_modes",
    "rate_upper_limit",
    "rate_upper_curve",
    "maxmin_upper_bound",
]

MODES = ("no-jammer", "improvement", "snatch", "zero")
UPPER_CURVE_STEPS = 4096


@dataclass(frozen=True)
class AsymptoticVerdict:
    main_user: int
    eavesdropper: int
    mode: str
    limit_rate: float

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.limit_rate < 0 or (self.mode == "zero" and self.limit_rate != 0):
            raise ValueError("inconsistent limit rate")


def asymptotic_main_user(n: int, ch: ChannelRealization) -> int:
    """User whose jammed SNR cannot be overtaken as jammer power grows (ties to lowest index)."""
    return int(np.argmax(ch.H[:, n] / ch.G[:, n]))


def asymptotic_pair_rate(m: int, e: int, n: int, ch: ChannelRealization) -> AsymptoticVerdict:
    """Limiting secure rate of ``m`` against ``e`` on ``n`` as all powers grow.

    * ``|h_m| > |h_e|`` and ``|g_m| >= |g_e|``: jamming does not help, limit
      ``log2(|h_m|^2 / |h_e|^2)``;
    * ``|h_m| > |h_e|`` and ``|g_e| > |g_m|``: improvement, limit
      ``log2(|g_e|^2 |h_m|^2 / (|g_m|^2 |h_e|^2))``;
    * ``|h_m| <= |h_e|``: snatching; same limit when feasible, else 0.
    """
    if m == e:
        raise ValueError("main user and eavesdropper must differ")
    Hm, He, Gm, Ge = ch.H[m, n], ch.H[e, n], ch.G[m, n], ch.G[e, n]
    if Hm > He:
        if Gm >= Ge:
            return AsymptoticVerdict(m, e, "no-jammer", float(math.log2(Hm / He)))
        return AsymptoticVerdict(m, e, "improvement", float(math.log2(Ge * Hm / (Gm * He))))
    if Ge * Hm > Gm * He:
        return AsymptoticVerdict(m, e, "snatch", float(math.log2(Ge * Hm / (Gm * He))))
    return AsymptoticVerdict(m, e, "zero", 0.0)


def asymptotic_user_verdict(m: int, n: int, ch: ChannelRealization) -> AsymptoticVerdict:
    """Verdict for ``m`` against its worst eavesdropper (minimum limit over ``e``)."""
    verdicts = [asymptotic_pair_rate(m, e, n, ch) for e in range(ch.num_users) if e != m]
    return min(verdicts, key=lambda v: (v.limit_rate, v.eavesdropper))


class SubcarrierMode(NamedTuple):
    owner: int
    eavesdropper: int
    jammed: bool
    limit_rate: float


def subcarrier_modes(ch: ChannelRealization) -> list:
    """Owner, eavesdropper and jammer mode of every subcarrier in the limit.

    The no-jammer mode pits the best source-gain user against the next best.
    The jammer mode gives the subcarrier to the asymptotic main user, judged
    against its worst eavesdropper. The mode with the larger limiting rate is
    kept (no-jammer on ties).
    """
    out = []
    M = ch.num_users
    for n in range(ch.num_subcarriers):
        H = ch.H[:, n]
        b = int(np.argmax(H))
        e0 = int(np.argmax(np.where(np.arange(M) == b, -np.inf, H)))
        lim0 = float(np.log2(H[b] / H[e0]))
        vj = asymptotic_user_verdict(asymptotic_main_user(n, ch), n, ch)
        if vj.limit_rate > lim0:
            out.append(SubcarrierMode(vj.main_user, vj.eavesdropper, True, vj.limit_rate))
        else:
            out.append(SubcarrierMode(b, e0, False, lim0))
    return out


def rate_upper_limit(ch: ChannelRealization, weights=None) -> float:
    """Weighted sum of the per-subcarrier limiting rates."""
    modes = subcarrier_modes(ch)
    w = np.ones(ch.num_users) if weights is None else np.asarray(weights, dtype=float)
    return float(sum(w[md.owner] * md.limit_rate for md in modes))


def _mode_rates(ch: ChannelRealization, modes, p):
    """Per-subcarrier rates on a source-power grid ``p`` under fixed modes.

    Jammed subcarriers use their best rate over unconstrained jammer power
    against the fixed eavesdropper.
    """
    s2 = ch.noise_variance
    owner = np.array([md.owner for md in modes])
    eve = np.array([md.eavesdropper for md in modes])
    jam = np.array([md.jammed for md in modes])
    cols = np.arange(len(modes))
    Hm, He = ch.H[owner, cols][:, None], ch.H[eve, cols][:, None]
    Gm, Ge = ch.G[owner, cols][:, None], ch.G[eve, cols][:, None]
    P = p[None, :]
    r0 = pair_rate(P, 0.0, Hm, He, Gm, Ge, s2)
    pj = _optimal_pj(P, Hm, He, Gm, Ge, s2)
    rj = np.maximum(pair_rate(P, pj, Hm, He, Gm, Ge, s2), r0)
    return np.maximum(np.where(jam[:, None], rj, r0), 0.0)


def rate_upper_curve(ch: ChannelRealization, cfg: ScenarioConfig, ps_grid,
                     steps: int = UPPER_CURVE_STEPS) -> np.ndarray:
    """Sum-rate bound at each source budget in ``ps_grid`` with unlimited jammer power.

    Subcarrier modes are frozen at their limits; the source budget is split
    by marginal allocation of ``steps`` equal quanta. Each subcarrier's
    increments are sorted in decreasing order before the split, which solves
    a concave problem dominating the original exactly on the grid.
    """
    ps_grid = np.atleast_1d(np.asarray(ps_grid, dtype=float))
    if np.any(np.diff(ps_grid) < 0):
        raise ValueError("ps_grid must be ascending")
    modes = subcarrier_modes(ch)
    w = np.asarray(cfg.weights, dtype=float)[[md.owner for md in modes]]
    out = np.zeros(ps_grid.size)
    for i, P_S in enumerate(ps_grid):
        if P_S <= 0:
            continue
        levels = np.linspace(0.0, P_S, steps + 1)
        r = w[:, None] * _mode_rates(ch, modes, levels)
        inc = -np.sort(-np.diff(r, axis=1), axis=1)
        out[i] = float(np.sort(inc.ravel())[::-1][:steps].clip(min=0.0).sum())
    return out


def maxmin_upper_bound(ch: ChannelRealization, cfg: ScenarioConfig) -> SchemeOutcome:
    """On-demand max-min allocation with an unlimited jammer pool."""
    from .maxmin import maxmin_scheme

    out = maxmin_scheme(ch, cfg, "oda", jammer_budget=math.inf)
    out.scheme = "maxmin_ub"
    return out

"""
Sum secure rate maximization schemes.

``jpa``
    Best-gain subcarrier allocation, jammer set selection at equal source
    power, then joint source/jammer power optimization.
``jpaso``
    Source water-filling without a jammer, followed by a closed-form jammer
    allocation on the jammable subcarriers.
``epa_rate``
    Equal source power and equal (clamped) jammer power baseline.
``ospwj``
    Optimal source power with the jammer switched off.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel_model import ChannelRealization, ScenarioConfig
from .jammer_analysis import (
    _clamp_array,
    _pj_threshold_improve,
    _ps_threshold,
)
from .power_optimizer import (
    JammingTargets,
    build_jamming_targets,
    primal_decomposition,
    suboptimal_pj,
    waterfill,
)
from .secure_rate import PowerAllocation, SchemeOutcome, make_outcome

__all__ = [
    "SetPartition",
    "allocate_subcarriers_best_gain",
    "eavesdroppers_unjammed",
    "partition_sets",
    "jpa",
    "jpaso",
    "epa_rate",
    "ospwj",
    "RATE_SCHEMES",
]


@dataclass
class SetPartition:
    """Unjammed (``J0``) and jammed (``J1``) subcarriers with their users."""

    J0: np.ndarray
    J1: np.ndarray
    owner: np.ndarray
    eve: np.ndarray

    @property
    def N1(self) -> int:
        return int(self.J0.size)

    @property
    def N2(self) -> int:
        return int(self.J1.size)


def allocate_subcarriers_best_gain(ch: ChannelRealization) -> np.ndarray:
    """Owner of each subcarrier = user with the largest source gain (ties to lowest index)."""
    return np.argmax(ch.h, axis=0)


def eavesdroppers_unjammed(owners, ch: ChannelRealization) -> np.ndarray:
    """Strongest non-owner on each subcarrier when no jammer is active."""
    h = np.array(ch.h)
    cols = np.arange(ch.num_subcarriers)
    h[owners, cols] = -np.inf
    return np.argmax(h, axis=0)


def partition_sets(owners, ch: ChannelRealization, ps_init, jammer_budget: float = np.inf
                   ) -> SetPartition:
    """Split subcarriers into unjammed and jammed sets.

    A subcarrier is jammed when the jammer hits its eavesdropper harder than
    its owner, the source power exceeds the improvement threshold, and a
    non-empty identity-preserving jammer interval exists at that power.
    """
    owners = np.asarray(owners, dtype=int)
    N = ch.num_subcarriers
    eve = eavesdroppers_unjammed(owners, ch)
    if jammer_budget <= 0:
        return SetPartition(np.arange(N), np.zeros(0, dtype=int), owners, eve)
    cols = np.arange(N)
    ps_init = np.broadcast_to(np.asarray(ps_init, dtype=float), (N,))
    Hm, He = ch.H[owners, cols], ch.H[eve, cols]
    Gm, Ge = ch.G[owners, cols], ch.G[eve, cols]
    s2 = ch.noise_variance
    cand = (Hm > He) & (Ge > Gm)
    with np.errstate(divide="ignore", invalid="ignore"):
        cand &= ps_init > np.where(cand, _ps_threshold(Hm, He, Gm, Ge, s2), np.inf)
    in_j1 = np.zeros(N, dtype=bool)
    idx = np.flatnonzero(cand)
    if idx.size:
        tg = build_jamming_targets(ch, idx, owners, eve)
        _, up = tg.bounds(ps_init[idx], ch)
        in_j1[idx] = tg.lower < up
    return SetPartition(np.flatnonzero(~in_j1), np.flatnonzero(in_j1), owners, eve)


def _budgets(cfg: ScenarioConfig):
    return float(cfg.source_budget), float(cfg.jammer_budget), np.asarray(cfg.weights, float)


def ospwj(ch: ChannelRealization, cfg: ScenarioConfig) -> SchemeOutcome:
    """Best-gain owners and secure water-filling with the jammer off."""
    P_S, _, w = _budgets(cfg)
    owners = allocate_subcarriers_best_gain(ch)
    ps = _ospwj_powers(ch, owners, P_S, w)
    N = ch.num_subcarriers
    alloc = PowerAllocation(ps, np.zeros(N), owners, np.zeros(N, dtype=bool))
    return make_outcome(alloc, ch, w, "ospwj")


def _ospwj_powers(ch, owners, P_S, w):
    # same code path as the empty-J1 branch of primal_decomposition
    idx = np.arange(ch.num_subcarriers)
    eve = eavesdroppers_unjammed(owners, ch)
    s2 = ch.noise_variance
    p, _ = waterfill(s2 / ch.H[owners[idx], idx], s2 / ch.H[eve[idx], idx],
                     w[owners[idx]], P_S)
    out = np.zeros(ch.num_subcarriers)
    out[idx] = p
    return out


def jpa(ch: ChannelRealization, cfg: ScenarioConfig) -> SchemeOutcome:
    """Joint source and jammer power allocation for sum secure rate."""
    P_S, P_J, w = _budgets(cfg)
    N = ch.num_subcarriers
    owners = allocate_subcarriers_best_gain(ch)
    part = partition_sets(owners, ch, P_S / N, P_J)
    tg = build_jamming_targets(ch, part.J1, owners, part.eve)
    res = primal_decomposition(ch, part.J0, tg, owners, part.eve, P_S, P_J, w)
    alloc = PowerAllocation(res.ps, res.pj, owners, res.jammer_active)
    iters = {"pd": res.pd_iterations, "ao": res.ao_iterations,
             "converged": res.converged, "jammed": int(res.jammer_active.sum()),
             "demoted": len(res.demoted)}
    return make_outcome(alloc, ch, w, "jpa", iters)


def jpaso(ch: ChannelRealization, cfg: ScenarioConfig) -> SchemeOutcome:
    """Sequential allocation: source water-filling first, then jammer power."""
    P_S, P_J, w = _budgets(cfg)
    N = ch.num_subcarriers
    owners = allocate_subcarriers_best_gain(ch)
    ps = _ospwj_powers(ch, owners, P_S, w)
    pj = np.zeros(N)
    part = partition_sets(owners, ch, ps, P_J)
    if part.N2:
        tg = build_jamming_targets(ch, part.J1, owners, part.eve)
        pj[part.J1] = suboptimal_pj(ch, tg, ps[part.J1], P_J, w, when_slack="midpoint")
    alloc = PowerAllocation(ps, pj, owners, pj > 0)
    return make_outcome(alloc, ch, w, "jpaso", {"jammed": int((pj > 0).sum())})


def epa_rate(ch: ChannelRealization, cfg: ScenarioConfig) -> SchemeOutcome:
    """Equal source power everywhere and equal jammer power on the jammed set.

    The jammer share ``P_J / |J1|`` is clamped into each subcarrier's interval;
    clamped surplus is not redistributed.
    """
    P_S, P_J, w = _budgets(cfg)
    N = ch.num_subcarriers
    owners = allocate_subcarriers_best_gain(ch)
    ps = np.full(N, P_S / N)
    pj = np.zeros(N)
    part = partition_sets(owners, ch, ps, P_J)
    if part.N2:
        tg = build_jamming_targets(ch, part.J1, owners, part.eve)
        lo, up = tg.bounds(ps[part.J1], ch)
        share = np.full(part.N2, P_J / part.N2)
        pj[part.J1] = np.where(lo < up, _clamp_array(share, lo, up), 0.0)
    alloc = PowerAllocation(ps, pj, owners, pj > 0)
    return make_outcome(alloc, ch, w, "epa", {"jammed": int((pj > 0).sum())})


RATE_SCHEMES = {"jpa": jpa, "jpaso": jpaso, "epa": epa_rate, "ospwj": ospwj}

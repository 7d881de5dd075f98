"""
Max-min fair subcarrier and power allocation with subcarrier snatching.

The greedy loop repeatedly serves the active user with the lowest secure
rate: it first hands out one of the user's remaining best-gain subcarriers,
otherwise tries to snatch a subcarrier from its best-gain user with jammer
help, and otherwise retires the user. Every iteration consumes a subcarrier
or a user, so the loop ends after at most ``M + N`` iterations.

Jammer policies
---------------
``pfa``   equal jammer reserve ``P_J / N`` per subcarrier, joint re-optimization
``oda``   first-come-first-serve jammer pool, joint re-optimization
``pfaso`` PFA admission, sequential source then closed-form jammer power
``odaso`` ODA admission, equal source power and no re-optimization
``none``  no snatching; per-user water-filling only
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel_model import ChannelRealization, ScenarioConfig
from .jammer_analysis import _clamp_array, _optimal_pj, _snatch_threshold, reorder_bounds
from .power_optimizer import (
    JammingTargets,
    build_jamming_targets,
    primal_decomposition,
    suboptimal_pj,
    waterfill,
)
from .rate_max import allocate_subcarriers_best_gain, eavesdroppers_unjammed
from .secure_rate import UNASSIGNED, PowerAllocation, SchemeOutcome, make_outcome, per_user_rates

__all__ = [
    "POLICIES",
    "FairnessState",
    "init_fairness_state",
    "maxmin_loop",
    "maxmin_scheme",
    "pfa",
    "oda",
    "pfaso",
    "odaso",
    "ospwj_fair",
]

POLICIES = ("pfa", "oda", "pfaso", "odaso", "none")
RATE_TOL = 1e-12


@dataclass
class FairnessState:
    """Mutable bookkeeping of the max-min loop.

    ``best``/``eve`` give each subcarrier's best-gain user and its unjammed
    eavesdropper. Snatching data is indexed ``[m, n]``: threshold, and the
    identity-preserving jammer interval when ``m`` takes ``n`` from
    ``best[n]``; ``inf`` thresholds mark pairs that cannot snatch.
    """

    ch: ChannelRealization
    source_budget: float
    jammer_budget: float
    weights: np.ndarray
    best: np.ndarray
    eve: np.ndarray
    ratio: np.ndarray
    th_snatch: np.ndarray
    snatch_lower: np.ndarray
    snatch_upper: np.ndarray
    active: list
    free: set
    alloc: PowerAllocation
    Ab: list
    As: list
    rates: np.ndarray
    committed: np.ndarray
    leftover: float
    removed: list = field(default_factory=list)
    iterations: int = 0
    log: list = field(default_factory=list)

    @property
    def num_users(self) -> int:
        return self.ch.num_users

    @property
    def share(self) -> float:
        """Equal source power per subcarrier."""
        return self.source_budget / self.ch.num_subcarriers

    def B(self, m: int) -> list:
        return [n for n in sorted(self.free) if self.best[n] == m]

    def S(self, m: int) -> list:
        return [n for n in sorted(self.free) if np.isfinite(self.th_snatch[m, n])]

    def user_subcarriers(self, m: int) -> list:
        return sorted(self.Ab[m] + self.As[m])

    def check(self) -> None:
        """Assert the bookkeeping invariants."""
        seen = set()
        for m in range(self.num_users):
            for n in self.Ab[m] + self.As[m]:
                assert n not in seen and n not in self.free, f"subcarrier {n} double-booked"
                assert self.alloc.owner[n] == m
                seen.add(n)
        assert np.allclose(self.rates, per_user_rates(self.alloc, self.ch), atol=1e-9)
        assert self.leftover >= -1e-12 or math.isinf(self.leftover)


def init_fairness_state(ch: ChannelRealization, cfg: ScenarioConfig,
                        jammer_budget=None) -> FairnessState:
    """Build candidate sets and give each user one initial best-gain subcarrier.

    Users are served in index order; each takes the free subcarrier among
    its best-gain ones with the largest ``|h_m| / |h_e|``. Users without any
    best-gain subcarrier start at rate 0 and can only snatch.
    """
    M, N = ch.num_users, ch.num_subcarriers
    P_J = cfg.jammer_budget if jammer_budget is None else jammer_budget
    best = allocate_subcarriers_best_gain(ch)
    eve = eavesdroppers_unjammed(best, ch)
    cols = np.arange(N)
    ratio = ch.h[best, cols] / ch.h[eve, cols]

    th = np.full((M, N), np.inf)
    lo = np.full((M, N), np.nan)
    up = np.full((M, N), np.nan)
    s2 = ch.noise_variance
    for n in range(N):
        e = best[n]
        for m in range(M):
            if m == e:
                continue
            t = float(_snatch_threshold(ch.H[m, n], ch.H[e, n], ch.G[m, n], ch.G[e, n], s2))
            if not np.isfinite(t):
                continue
            b = reorder_bounds(m, e, n, ch)
            if b.feasible:
                th[m, n], lo[m, n], up[m, n] = t, b.lower, b.upper

    state = FairnessState(
        ch=ch, source_budget=float(cfg.source_budget), jammer_budget=float(P_J),
        weights=np.asarray(cfg.weights, dtype=float), best=best, eve=eve, ratio=ratio,
        th_snatch=th, snatch_lower=lo, snatch_upper=up,
        active=list(range(M)), free=set(range(N)), alloc=PowerAllocation.empty(N),
        Ab=[[] for _ in range(M)], As=[[] for _ in range(M)], rates=np.zeros(M),
        committed=np.zeros(M), leftover=float(P_J))
    for m in range(M):
        cand = state.B(m)
        if not cand:
            continue
        n = max(cand, key=lambda k: (ratio[k], -k))
        state.free.discard(n)
        state.Ab[m].append(n)
        state.alloc.owner[n] = m
        state.alloc.ps[n] = state.share
    state.rates = per_user_rates(state.alloc, ch)
    return state


# -- per-user power updates --------------------------------------------------

def _user_targets(state: FairnessState, v: int, caps=None) -> JammingTargets:
    idx = np.array(sorted(state.As[v]), dtype=int)
    owner = np.full(idx.size, v)
    eve = state.best[idx]
    tg = build_jamming_targets(state.ch, idx, owner, eve, caps=caps)
    return tg


def _write_user(state: FairnessState, v: int, ps: np.ndarray, pj: np.ndarray) -> None:
    idx = state.user_subcarriers(v)
    state.alloc.ps[idx] = ps[idx]
    state.alloc.pj[idx] = pj[idx]
    state.alloc.jammer_active[idx] = pj[idx] > 0


def _user_rate(state: FairnessState, v: int, ps, pj) -> float:
    trial = state.alloc.copy()
    idx = state.user_subcarriers(v)
    trial.ps[idx] = ps[idx]
    trial.pj[idx] = pj[idx]
    trial.jammer_active[idx] = pj[idx] > 0
    return float(per_user_rates(trial, state.ch)[v])


def _joint_update(state: FairnessState, v: int, jammer_budget: float, caps=None):
    """Joint source/jammer re-optimization over user ``v``'s subcarriers."""
    ch = state.ch
    N = ch.num_subcarriers
    j0 = np.array(sorted(state.Ab[v]), dtype=int)
    tg = _user_targets(state, v, caps)
    budget = state.share * (len(state.Ab[v]) + len(state.As[v]))
    owner = np.where(state.alloc.owner >= 0, state.alloc.owner, state.best)
    res = primal_decomposition(ch, j0, tg, owner, state.eve, budget, jammer_budget,
                               state.weights)
    return res.ps, res.pj


def _sequential_update(state: FairnessState, v: int):
    """Water-fill over the best-gain set, equal power on snatched ones, then jammer."""
    ch = state.ch
    N = ch.num_subcarriers
    s2 = ch.noise_variance
    ps, pj = np.zeros(N), np.zeros(N)
    j0 = np.array(sorted(state.Ab[v]), dtype=int)
    if j0.size:
        p, _ = waterfill(s2 / ch.H[v, j0], s2 / ch.H[state.eve[j0], j0],
                         state.weights[v], state.share * j0.size)
        ps[j0] = p
    if state.As[v]:
        tg = _user_targets(state, v)
        ps[tg.idx] = state.share
        budget = state.jammer_budget * len(tg) / N
        pj[tg.idx] = suboptimal_pj(ch, tg, ps[tg.idx], budget, state.weights,
                                   when_slack="upper")
    return ps, pj


def _star(state: FairnessState, v: int, n: int, ps_n: float, cap=math.inf) -> float:
    """Rate-maximizing jammer power for ``v`` snatching ``n``, clamped to its interval."""
    ch = state.ch
    e = state.best[n]
    lo = state.snatch_lower[v, n]
    up = min(state.snatch_upper[v, n], cap)
    if not lo < up:
        return 0.0
    p = _optimal_pj(ps_n, ch.H[v, n], ch.H[e, n], ch.G[v, n], ch.G[e, n], ch.noise_variance)
    return float(_clamp_array(np.array(p), np.array(lo), np.array(up)))


# -- admission rules ---------------------------------------------------------

def _admit(state: FairnessState, v: int, n: int, policy: str) -> bool:
    N = state.ch.num_subcarriers
    lo, up = state.snatch_lower[v, n], state.snatch_upper[v, n]
    if policy in ("pfa", "pfaso"):
        eq = state.jammer_budget / N
        return bool(eq >= state.th_snatch[v, n] and lo < min(up, eq))
    if policy in ("oda", "odaso"):
        if not lo < up:
            return False
        return _star(state, v, n, state.share) <= state.leftover
    return False


def _serve(state: FairnessState, v: int, n: int, snatched: bool, policy: str) -> None:
    """Give ``n`` to ``v`` and update ``v``'s powers under ``policy``."""
    N = state.ch.num_subcarriers
    prev_ps = state.alloc.ps.copy()
    prev_pj = np.where(state.alloc.jammer_active, state.alloc.pj, 0.0)
    prev_rate = state.rates[v]
    state.free.discard(n)
    (state.As if snatched else state.Ab)[v].append(n)
    state.alloc.owner[n] = v

    # fallback point: old powers plus equal power on the new subcarrier
    base_ps, base_pj = prev_ps.copy(), prev_pj.copy()
    base_ps[n] = state.share
    eq = state.jammer_budget / N
    if snatched:
        cap = eq if policy in ("pfa", "pfaso") else math.inf
        base_pj[n] = _star(state, v, n, state.share, cap)

    if policy == "odaso":
        ps, pj = base_ps, base_pj
    elif policy == "pfa":
        caps = np.full(len(state.As[v]), eq)
        ps, pj = _joint_update(state, v, eq * len(state.As[v]), caps)
    elif policy == "oda":
        # optimal jammer power on every snatched subcarrier; if that overdraws
        # the pool, keep the admitted point instead of shrinking the powers
        pool = state.committed[v] + state.leftover
        ps, pj = _joint_update(state, v, math.inf)
        if pj[state.As[v]].sum() > pool:
            ps, pj = base_ps, base_pj
    elif policy == "pfaso":
        ps, pj = _sequential_update(state, v)
    else:
        ps, pj = _joint_update(state, v, 0.0)

    if policy != "odaso":
        r_new = _user_rate(state, v, ps, pj)
        r_base = _user_rate(state, v, base_ps, base_pj)
        # every snatched subcarrier must stay above its rate-positive threshold
        lost = any(not pj[k] > state.th_snatch[v, k] for k in state.As[v])
        if lost or r_base > r_new + RATE_TOL:
            ps, pj = base_ps, base_pj
    _write_user(state, v, ps, pj)
    if policy in ("oda", "odaso"):
        used = float(pj[state.As[v]].sum()) if state.As[v] else 0.0
        state.leftover = state.leftover + state.committed[v] - used
        if not math.isinf(state.leftover):
            state.leftover = max(state.leftover, 0.0)
        state.committed[v] = used
    state.rates = per_user_rates(state.alloc, state.ch)
    state.log.append((v, n, "snatch" if snatched else "best", float(prev_rate),
                      float(state.rates[v])))


def maxmin_loop(state: FairnessState, policy: str = "pfa") -> SchemeOutcome:
    """Run the greedy max-min loop to completion and package the outcome."""
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}; choose from {POLICIES}")
    ch = state.ch
    limit = ch.num_users + ch.num_subcarriers
    while state.active and state.free:
        state.iterations += 1
        if state.iterations > limit:
            raise RuntimeError("max-min loop exceeded M + N iterations")
        # lowest rate first, ties to the lowest index
        v = min(state.active, key=lambda m: (state.rates[m], m))
        best_free = state.B(v)
        if best_free:
            n = max(best_free, key=lambda k: (state.ratio[k], -k))
            _serve(state, v, n, False, policy)
            continue
        snatchable = state.S(v) if policy != "none" else []
        if snatchable:
            n = min(snatchable, key=lambda k: (state.th_snatch[v, k], k))
            if _admit(state, v, n, policy):
                _serve(state, v, n, True, policy)
                continue
        state.active.remove(v)
        state.removed.append(v)

    iters = {"loop": state.iterations, "removed": list(state.removed),
             "snatched": int(sum(len(s) for s in state.As)),
             "unallocated": len(state.free)}
    if policy in ("oda", "odaso"):
        iters["jammer_leftover"] = state.leftover
    return make_outcome(state.alloc.copy(), ch, state.weights, policy, iters)


def maxmin_scheme(ch: ChannelRealization, cfg: ScenarioConfig, policy: str,
                  jammer_budget=None) -> SchemeOutcome:
    state = init_fairness_state(ch, cfg, jammer_budget)
    return maxmin_loop(state, policy)


def pfa(ch, cfg):
    return maxmin_scheme(ch, cfg, "pfa")


def oda(ch, cfg):
    return maxmin_scheme(ch, cfg, "oda")


def pfaso(ch, cfg):
    return maxmin_scheme(ch, cfg, "pfaso")


def odaso(ch, cfg):
    return maxmin_scheme(ch, cfg, "odaso")


def ospwj_fair(ch, cfg):
    """Max-min loop without the jammer: no snatching, per-user water-filling."""
    out = maxmin_scheme(ch, cfg, "none", jammer_budget=0.0)
    out.scheme = "ospwj_fair"
    return out

"""
SNR and secure-rate evaluation for a given power allocation.

Rates are in bits per OFDM symbol per subcarrier. A subcarrier's secure
rate is the positive part of the capacity difference between its owner and
the strongest of the remaining users.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .channel_model import ChannelRealization

__all__ = [
    "UNASSIGNED",
    "BUDGET_RTOL",
    "PowerAllocation",
    "SchemeOutcome",
    "snr",
    "snr_matrix",
    "eavesdropper_of",
    "secure_rate",
    "subcarrier_rates",
    "pair_rate",
    "per_user_rates",
    "sum_weighted_rate",
    "fairness_gap",
    "fairness_index",
    "make_outcome",
]

UNASSIGNED = -1
BUDGET_RTOL = 1e-9


@dataclass
class PowerAllocation:
    """Per-subcarrier source/jammer powers, owners and jammer flags."""

    ps: np.ndarray
    pj: np.ndarray
    owner: np.ndarray
    jammer_active: np.ndarray

    def __post_init__(self):
        self.ps = np.asarray(self.ps, dtype=float)
        self.pj = np.asarray(self.pj, dtype=float)
        self.owner = np.asarray(self.owner, dtype=int)
        self.jammer_active = np.asarray(self.jammer_active, dtype=bool)
        n = self.ps.shape[0]
        if not (self.pj.shape == self.owner.shape == self.jammer_active.shape == (n,)):
            raise ValueError("allocation vectors must all have length N")

    @classmethod
    def empty(cls, num_subcarriers: int) -> "PowerAllocation":
        return cls(np.zeros(num_subcarriers), np.zeros(num_subcarriers),
                   np.full(num_subcarriers, UNASSIGNED),
                   np.zeros(num_subcarriers, dtype=bool))

    def copy(self) -> "PowerAllocation":
        return PowerAllocation(self.ps.copy(), self.pj.copy(), self.owner.copy(),
                               self.jammer_active.copy())

    @property
    def effective_pj(self) -> np.ndarray:
        return np.where(self.jammer_active, self.pj, 0.0)

    def check(self, source_budget: float, jammer_budget: float) -> None:
        """Raise ``AssertionError`` if any allocation invariant is violated."""
        assert np.all(self.ps >= 0), "negative source power"
        assert np.all(self.pj >= 0), "negative jammer power"
        assert self.ps.sum() <= source_budget * (1 + BUDGET_RTOL) + 1e-12, \
            f"source budget exceeded: {self.ps.sum()} > {source_budget}"
        assert self.pj.sum() <= jammer_budget * (1 + BUDGET_RTOL) + 1e-12, \
            f"jammer budget exceeded: {self.pj.sum()} > {jammer_budget}"
        assert np.all(self.pj[~self.jammer_active] == 0), \
            "jammer power on a subcarrier with the jammer disabled"


@dataclass
class SchemeOutcome:
    user_rates: np.ndarray
    sum_weighted_rate: float
    fairness_gap: float
    allocation: PowerAllocation
    iterations: dict = field(default_factory=dict)
    scheme: str = ""

    @property
    def fairness_index(self) -> float:
        return 1.0 - self.fairness_gap

    @property
    def sum_rate(self) -> float:
        return float(np.sum(self.user_rates))

    @property
    def min_rate(self) -> float:
        return float(np.min(self.user_rates))


def snr(ps_n, h_mn, sigma2, pj_n=0.0, g_mn=0.0):
    """Received SNR ``P_s |h|^2 / (sigma^2 + P_j |g|^2)``; gains are magnitudes."""
    return ps_n * h_mn ** 2 / (sigma2 + pj_n * g_mn ** 2)


def snr_matrix(alloc: PowerAllocation, ch: ChannelRealization) -> np.ndarray:
    """M x N matrix of jammed SNRs for every user on every subcarrier."""
    pj = alloc.effective_pj
    return alloc.ps[None, :] * ch.H / (ch.noise_variance + pj[None, :] * ch.G)


def eavesdropper_of(m: int, n: int, alloc: PowerAllocation,
                    ch: ChannelRealization) -> int:
    """Strongest user other than ``m`` on subcarrier ``n`` (ties to lowest index)."""
    pj = alloc.pj[n] if alloc.jammer_active[n] else 0.0
    gam = alloc.ps[n] * ch.H[:, n] / (ch.noise_variance + pj * ch.G[:, n])
    gam[m] = -np.inf
    return int(np.argmax(gam))


def secure_rate(m: int, n: int, alloc: PowerAllocation, ch: ChannelRealization) -> float:
    pj = alloc.pj[n] if alloc.jammer_active[n] else 0.0
    gam = alloc.ps[n] * ch.H[:, n] / (ch.noise_variance + pj * ch.G[:, n])
    e = eavesdropper_of(m, n, alloc, ch)
    return max(0.0, float(np.log2(1.0 + gam[m]) - np.log2(1.0 + gam[e])))


def subcarrier_rates(alloc: PowerAllocation, ch: ChannelRealization) -> np.ndarray:
    """Secure rate of each subcarrier for its owner (0 where unassigned)."""
    gam = snr_matrix(alloc, ch)
    N = ch.num_subcarriers
    cols = np.arange(N)
    owned = alloc.owner >= 0
    own = np.where(owned, alloc.owner, 0)
    main = gam[own, cols]
    others = gam.copy()
    others[own, cols] = -np.inf
    eve = others.max(axis=0)
    r = np.log2(1.0 + main) - np.log2(1.0 + eve)
    return np.where(owned, np.maximum(r, 0.0), 0.0)


def pair_rate(ps, pj, Hm, He, Gm, Ge, sigma2):
    """Unclamped log-rate difference for a fixed main/eavesdropper pair.

    Arguments are squared gains. Vectorizes over numpy inputs.
    """
    gm = ps * Hm / (sigma2 + pj * Gm)
    ge = ps * He / (sigma2 + pj * Ge)
    return (np.log1p(gm) - np.log1p(ge)) / np.log(2.0)


def per_user_rates(alloc: PowerAllocation, ch: ChannelRealization,
                   owners: Optional[np.ndarray] = None) -> np.ndarray:
    if owners is not None and not np.array_equal(owners, alloc.owner):
        alloc = PowerAllocation(alloc.ps, alloc.pj, owners, alloc.jammer_active)
    r = subcarrier_rates(alloc, ch)
    out = np.zeros(ch.num_users)
    owned = alloc.owner >= 0
    np.add.at(out, alloc.owner[owned], r[owned])
    return out


def sum_weighted_rate(alloc: PowerAllocation, ch: ChannelRealization,
                      weights) -> float:
    return float(np.dot(np.asarray(weights, dtype=float), per_user_rates(alloc, ch)))


def fairness_gap(user_rates) -> float:
    """Relative gap ``(R_max - R_min) / R_max`` of the sorted rates; 0 if all zero."""
    r = np.sort(np.asarray(user_rates, dtype=float))
    if r.size == 0 or r[-1] <= 0:
        return 0.0
    return float((r[-1] - r[0]) / r[-1])


def fairness_index(user_rates) -> float:
    return 1.0 - fairness_gap(user_rates)


def make_outcome(alloc: PowerAllocation, ch: ChannelRealization, weights,
                 scheme: str = "", iterations: Optional[dict] = None) -> SchemeOutcome:
    rates = per_user_rates(alloc, ch)
    return SchemeOutcome(
        user_rates=rates,
        sum_weighted_rate=float(np.dot(np.asarray(weights, dtype=float), rates)),
        fairness_gap=fairness_gap(rates),
        allocation=alloc,
        iterations=dict(iterations or {}),
        scheme=scheme,
    )

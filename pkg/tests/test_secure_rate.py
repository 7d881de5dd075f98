import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from jamofdma.channel_model import ChannelRealization
from jamofdma.secure_rate import (
    UNASSIGNED,
    PowerAllocation,
    eavesdropper_of,
    fairness_gap,
    fairness_index,
    make_outcome,
    pair_rate,
    per_user_rates,
    secure_rate,
    snr,
    subcarrier_rates,
)

from oracles import rate as longhand_rate

BEST_OWNERS = [0, 2, 0, 2, 2]


def alloc_for(N, owner, ps, pj=None):
    pj = np.zeros(N) if pj is None else np.asarray(pj, dtype=float)
    return PowerAllocation(np.broadcast_to(ps, (N,)).astype(float), pj,
                           np.asarray(owner), pj > 0)


def one_carrier(ch, n, m, ps, pj):
    N = ch.num_subcarriers
    owner = np.full(N, UNASSIGNED)
    owner[n] = m
    a = PowerAllocation(np.zeros(N), np.zeros(N), owner, np.zeros(N, dtype=bool))
    a.ps[n] = ps
    a.pj[n] = pj
    a.jammer_active[n] = pj > 0
    return a


@pytest.mark.parametrize("args, expected", [
    ((1, 1.4772, 1, 0.0, 0.0), 2.1821),
    ((1, 1.4772, 1, 0.1, 2.0636), 1.5304),
    ((0, 1.4772, 1, 0.3, 2.0636), 0.0),
])
def test_snr_values(args, expected):
    assert snr(*args) == pytest.approx(expected, abs=5e-4)


@pytest.mark.parametrize("m, n, ps, pj, e", [
    (2, 1, 2.0, 0.0, 1),
    (0, 2, 2.0, 0.5, 2),
])
def test_eavesdropper_on_fixture(fx, m, n, ps, pj, e):
    assert eavesdropper_of(m, n, one_carrier(fx, n, m, ps, pj), fx) == e


def test_unjammed_eavesdroppers_on_fixture(fx):
    a = alloc_for(5, BEST_OWNERS, 2.0)
    eves = [eavesdropper_of(m, n, a, fx) for n, m in enumerate(BEST_OWNERS)]
    assert eves == [2, 1, 1, 0, 1]


def test_two_users_other_is_eavesdropper():
    ch = ChannelRealization(np.array([[1.0, 2.0], [3.0, 0.5]]), np.ones((2, 2)))
    a = alloc_for(2, [0, 1], 1.0)
    assert eavesdropper_of(0, 0, a, ch) == 1
    assert eavesdropper_of(1, 1, a, ch) == 0


@pytest.mark.parametrize("m, n, pj, expected", [
    (2, 1, 0.0, 0.6988),
    (2, 1, 0.1, 1.5518),
    (1, 3, 0.1, 0.0),
])
def test_secure_rate_values(fx, m, n, pj, expected):
    assert secure_rate(m, n, one_carrier(fx, n, m, 2.0, pj), fx) == pytest.approx(expected, abs=5e-4)


def test_zero_power_zero_rate(fx):
    assert secure_rate(0, 0, one_carrier(fx, 0, 0, 0.0, 0.0), fx) == 0.0


def test_per_user_all_zero(fx):
    a = alloc_for(5, BEST_OWNERS, 0.0)
    assert np.array_equal(per_user_rates(a, fx), np.zeros(3))


def test_per_user_single_carrier(fx):
    a = one_carrier(fx, 1, 2, 2.0, 0.1)
    r = per_user_rates(a, fx)
    assert r[2] == pytest.approx(secure_rate(2, 1, a, fx))
    assert r[0] == r[1] == 0.0


def test_per_user_equal_power_fixture(fx):
    a = alloc_for(5, BEST_OWNERS, 2.0)
    expect = np.zeros(3)
    for n, m in enumerate(BEST_OWNERS):
        e = max((k for k in range(3) if k != m), key=lambda k: fx.h[k, n])
        expect[m] += longhand_rate(2.0, 0.0, fx.h[m, n], fx.h[e, n], fx.g[m, n], fx.g[e, n])
    assert np.allclose(per_user_rates(a, fx), expect, atol=1e-12)


@pytest.mark.parametrize("rates, gap", [
    ([0.7, 0.7, 0.7], 0.0),
    ([0.0, 1.3], 1.0),
    ([1, 2, 4], 0.75),
    ([4, 1, 2], 0.75),
    ([0, 0, 0], 0.0),
])
def test_fairness_gap(rates, gap):
    assert fairness_gap(rates) == pytest.approx(gap)
    assert fairness_index(rates) == pytest.approx(1 - gap)


def test_outcome_fields(fx):
    a = alloc_for(5, BEST_OWNERS, 2.0)
    out = make_outcome(a, fx, [1.0, 2.0, 1.0], "epa")
    assert out.sum_weighted_rate == pytest.approx(out.user_rates @ [1.0, 2.0, 1.0])
    assert out.sum_rate == pytest.approx(out.user_rates.sum())
    assert out.min_rate == out.user_rates.min()


def test_allocation_check():
    a = PowerAllocation(np.array([1.0, 1.0]), np.array([0.5, 0.0]), np.array([0, 1]),
                        np.array([True, False]))
    a.check(2.0, 0.5)
    with pytest.raises(AssertionError):
        a.check(1.5, 0.5)
    with pytest.raises(AssertionError):
        a.check(2.0, 0.4)
    a.pj[1] = 0.1
    with pytest.raises(AssertionError):
        a.check(2.0, 1.0)


gains = st.floats(0.05, 5.0)
powers = st.floats(0.0, 20.0)


@st.composite
def small_channels(draw, max_users=4, max_sub=3):
    M = draw(st.integers(2, max_users))
    N = draw(st.integers(1, max_sub))
    h = draw(st.lists(gains, min_size=M * N, max_size=M * N))
    g = draw(st.lists(gains, min_size=M * N, max_size=M * N))
    return ChannelRealization(np.reshape(h, (M, N)), np.reshape(g, (M, N)))


@given(small_channels(), st.data())
def test_rate_matches_min_over_eavesdroppers(ch, data):
    M, N = ch.num_users, ch.num_subcarriers
    owner = data.draw(st.lists(st.integers(0, M - 1), min_size=N, max_size=N))
    ps = data.draw(st.lists(powers, min_size=N, max_size=N))
    pj = data.draw(st.lists(powers, min_size=N, max_size=N))
    a = PowerAllocation(np.array(ps), np.array(pj), np.array(owner), np.array(pj) > 0)
    r = subcarrier_rates(a, ch)
    for n, m in enumerate(owner):
        brute = min(longhand_rate(ps[n], pj[n], ch.h[m, n], ch.h[e, n], ch.g[m, n], ch.g[e, n])
                    for e in range(M) if e != m)
        assert r[n] >= 0
        assert r[n] == pytest.approx(brute, abs=1e-9)
        assert secure_rate(m, n, a, ch) == pytest.approx(r[n], abs=1e-12)


@given(small_channels(max_sub=1), st.floats(0.0, 10.0), st.floats(0.0, 10.0))
def test_rate_non_decreasing_in_ps_for_strongest_owner(ch, p1, p2):
    m = int(np.argmax(ch.h[:, 0]))
    if np.sum(ch.h[:, 0] == ch.h[m, 0]) > 1:
        return
    lo, hi = sorted((p1, p2))
    a_lo = one_carrier(ch, 0, m, lo, 0.0)
    a_hi = one_carrier(ch, 0, m, hi, 0.0)
    assert secure_rate(m, 0, a_hi, ch) >= secure_rate(m, 0, a_lo, ch) - 1e-12


@given(gains, gains, gains, gains, powers, powers)
def test_pair_rate_matches_longhand(hm, he, gm, ge, ps, pj):
    v = float(pair_rate(ps, pj, hm ** 2, he ** 2, gm ** 2, ge ** 2, 1.0))
    assert max(v, 0.0) == pytest.approx(longhand_rate(ps, pj, hm, he, gm, ge), abs=1e-9)


@given(st.lists(st.floats(0, 100), min_size=1, max_size=10))
def test_fairness_gap_in_unit_interval_and_identity_free(rates):
    g = fairness_gap(rates)
    assert 0.0 <= g <= 1.0
    assert g == fairness_gap(list(reversed(rates)))

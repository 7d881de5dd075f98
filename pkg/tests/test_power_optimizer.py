import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from numpy.polynomial import Polynomial

from jamofdma.channel_model import ChannelRealization, ScenarioConfig, generate_channels
from jamofdma.jammer_analysis import _clamp_array, _optimal_pj
from jamofdma.power_optimizer import (
    LAMBDA_GAP_RTOL,
    PD_MAX_ITER,
    WaterfillInput,
    allocate_pj_fixed_ps,
    alternating_optimization,
    build_jamming_targets,
    marginal_at_zero,
    pj_marginal,
    primal_decomposition,
    quartic_coeffs,
    secure_waterfill,
    solve_quartic_root,
    suboptimal_pj,
    waterfill,
)
from jamofdma.rate_max import allocate_subcarriers_best_gain, eavesdroppers_unjammed, ospwj
from jamofdma.secure_rate import pair_rate

from oracles import grid_argmax, jpa_grid_oracle, simplex_grid_max

LN2 = math.log(2.0)
FX_J0 = np.array([0, 3, 4])
FX_J1 = np.array([1, 2])


def wf_objective(p, eta, nu, w=1.0):
    return float(np.sum(w * (np.log2(1 + p / eta) - np.log2(1 + p / nu))))


def fx_sets(fx):
    owners = allocate_subcarriers_best_gain(fx)
    eve = eavesdroppers_unjammed(owners, fx)
    return owners, eve


# -- water-filling -----------------------------------------------------------

def test_waterfill_single_subcarrier():
    p, lam = waterfill(np.array([0.5]), np.array([2.0]), 1.0, 3.0)
    assert p[0] == pytest.approx(3.0)
    assert lam > 0


def test_waterfill_identical_split():
    p, _ = waterfill(np.array([0.5, 0.5]), np.array([2.0, 2.0]), 1.0, 3.0)
    assert np.allclose(p, 1.5)


def test_waterfill_zero_budget_and_useless_carriers():
    p, lam = waterfill(np.array([0.5]), np.array([2.0]), 1.0, 0.0)
    assert p[0] == 0.0 and math.isinf(lam)
    p, lam = waterfill(np.array([2.0]), np.array([0.5]), 1.0, 4.0)
    assert p[0] == 0.0 and lam == 0.0


def test_waterfill_fixture_unjammed_set_matches_grid(fx):
    owners, eve = fx_sets(fx)
    n = FX_J0
    eta = 1.0 / fx.H[owners[n], n]
    nu = 1.0 / fx.H[eve[n], n]
    p, _ = secure_waterfill(WaterfillInput(eta, nu, 1.0, 6.0))
    assert p.sum() == pytest.approx(6.0)
    fns = [lambda q, a=a, b=b: max(0.0, math.log2(1 + q / a) - math.log2(1 + q / b))
           for a, b in zip(eta, nu)]
    ref = simplex_grid_max(fns, 6.0, 1200)
    assert wf_objective(p, eta, nu) >= ref - 1e-3


ratios = st.floats(0.01, 10.0)


@given(st.lists(st.tuples(ratios, ratios, st.floats(0.2, 3.0)), min_size=1, max_size=8),
       st.floats(0.01, 50.0))
def test_waterfill_complementary_slackness(rows, budget):
    eta, nu, w = (np.array(v) for v in zip(*rows))
    assume(np.any(nu > eta * 1.001))
    p, lam = waterfill(eta, nu, w, budget)
    assert np.all(p >= 0)
    assert p.sum() == pytest.approx(budget, rel=1e-9)
    marg = w * (1 / (eta + p) - 1 / (nu + p)) / LN2
    scale = max(lam, 1e-12)
    on = p > 1e-12 * budget
    assert np.all(np.abs(marg[on] - lam) <= 1e-6 * scale)
    assert np.all(marginal_at_zero(eta, nu, w)[~on] <= lam * (1 + 1e-6))


# -- stationarity quartic ----------------------------------------------------

def test_quartic_degenerate_unit_gains():
    q = quartic_coeffs(0.0, 1.0, 1.0, 1.0, 1.0, 1.0)
    assert (q.a, q.b, q.c, q.d, q.e) == (1, 4, 6, 4, 1)
    assert (q.c2, q.d2, q.e2) == (0, 0, 0)


def independent_quartic(ps, Hm, He, Gm, Ge, s2):
    """Multiply out the two sides of the jammer-power stationarity condition."""
    De = Polynomial([s2, Ge]) * Polynomial([s2 + ps * He, Ge])
    Dm = Polynomial([s2, Gm]) * Polynomial([s2 + ps * Hm, Gm])
    return De * Dm, He * Ge * Dm - Hm * Gm * De


@pytest.mark.parametrize("n", [1, 2])
def test_quartic_fixture_matches_expansion(fx, n):
    owners, eve = fx_sets(fx)
    m, e = owners[n], eve[n]
    args = (2.0, fx.H[m, n], fx.H[e, n], fx.G[m, n], fx.G[e, n], 1.0)
    q = quartic_coeffs(*args)
    lhs, rhs = independent_quartic(*args)
    assert np.allclose([q.e, q.d, q.c, q.b, q.a], lhs.coef, rtol=1e-12)
    assert np.allclose([q.e2, q.d2, q.c2], rhs.coef[:3], rtol=1e-12)
    assert np.allclose(rhs.coef[3:], 0, atol=1e-12)


gain2 = st.floats(0.05, 5.0)


@st.composite
def improvement_carrier(draw):
    Hm, Gm = draw(gain2), draw(gain2)
    He = Hm * draw(st.floats(0.05, 0.95))
    Ge = Gm * draw(st.floats(1.05, 10.0))
    ps = draw(st.floats(0.5, 30.0))
    s2 = draw(st.floats(0.2, 3.0))
    return ps, Hm, He, Gm, Ge, s2


@given(improvement_carrier())
def test_quartic_matches_expansion_random(args):
    q = quartic_coeffs(*args)
    lhs, rhs = independent_quartic(*args)
    assert np.allclose([q.e, q.d, q.c, q.b, q.a], lhs.coef, rtol=1e-10)
    assert np.allclose([q.e2, q.d2, q.c2], rhs.coef[:3], rtol=1e-10, atol=1e-12 * abs(rhs.coef).max())


def star_of(args):
    ps, Hm, He, Gm, Ge, s2 = args
    return float(_optimal_pj(ps, Hm, He, Gm, Ge, s2))


@given(improvement_carrier(), st.floats(0.05, 0.95))
def test_quartic_root_satisfies_stationarity(args, frac):
    q = quartic_coeffs(*args)
    pstar = star_of(args)
    assume(pstar > 1e-9)
    # pick mu as the marginal at an interior point so the root is interior
    mu = float(pj_marginal(frac * pstar, *args))
    assume(mu > 0)
    r = float(solve_quartic_root(q, mu, 1.0, 0.0, pstar))
    lhs = mu * LN2 * q.lhs(r)
    rhs = q.rhs(r)
    assert abs(lhs - rhs) <= 1e-6 * abs(rhs)
    assert r == pytest.approx(frac * pstar, rel=1e-6)


@given(improvement_carrier(), st.floats(0.05, 0.95))
def test_quartic_root_scales_with_noise(args, frac):
    ps, Hm, He, Gm, Ge, s2 = args
    pstar = star_of(args)
    assume(pstar > 1e-9)
    mu = float(pj_marginal(frac * pstar, *args))
    assume(mu > 0)
    r1 = float(solve_quartic_root(quartic_coeffs(*args), mu, 1.0, 0.0, pstar))
    # doubling noise and every power halves the marginal per unit power
    q2 = quartic_coeffs(2 * ps, Hm, He, Gm, Ge, 2 * s2)
    r2 = float(solve_quartic_root(q2, mu / 2, 1.0, 0.0, 2 * pstar))
    assert r2 == pytest.approx(2 * r1, rel=1e-7)


def test_quartic_root_price_limits(fx):
    owners, eve = fx_sets(fx)
    n = 1
    args = (2.0, fx.H[owners[n], n], fx.H[eve[n], n], fx.G[owners[n], n], fx.G[eve[n], n], 1.0)
    q = quartic_coeffs(*args)
    pstar = star_of(args)
    assert float(solve_quartic_root(q, 1e-12, 1.0, 0.0, pstar)) == pytest.approx(pstar, rel=1e-6)
    assert float(solve_quartic_root(q, 1e6, 1.0, 0.0, pstar)) == 0.0


def test_quartic_root_is_penalized_argmax(fx):
    owners, eve = fx_sets(fx)
    n = 1
    args = (2.0, fx.H[owners[n], n], fx.H[eve[n], n], fx.G[owners[n], n], fx.G[eve[n], n], 1.0)
    pstar = star_of(args)
    for mu in (0.5, 2.0, 5.0):
        r = float(solve_quartic_root(quartic_coeffs(*args), mu, 1.0, 0.0, pstar))
        x, _ = grid_argmax(lambda p: float(pair_rate(2.0, p, *args[1:])) - mu * p,
                           0.0, pstar, 1e-5)
        assert abs(r - x) < 1e-4


# -- jammer allocation at fixed source power --------------------------------

def fx_targets(fx):
    owners, eve = fx_sets(fx)
    return build_jamming_targets(fx, FX_J1, owners, eve)


def test_pj_fixed_ps_slack_budget_gives_clamped_optima(fx):
    tg = fx_targets(fx)
    ps = np.full(2, 2.0)
    lo, up = tg.bounds(ps, fx)
    Hm, He, Gm, Ge = tg.gains(fx)
    pj = allocate_pj_fixed_ps(ps, Hm, He, Gm, Ge, 1.0, 1.0, lo, up, 1e6)
    expect = _clamp_array(_optimal_pj(ps, Hm, He, Gm, Ge, 1.0), lo, up)
    assert np.allclose(pj, expect)
    assert pj == pytest.approx([0.1027, 0.0808], abs=5e-4)


def test_pj_fixed_ps_zero_budget(fx):
    tg = fx_targets(fx)
    ps = np.full(2, 2.0)
    lo, up = tg.bounds(ps, fx)
    assert np.array_equal(allocate_pj_fixed_ps(ps, *tg.gains(fx), 1.0, 1.0, lo, up, 0.0),
                          np.zeros(2))


@pytest.mark.parametrize("budget", [0.02, 0.05, 0.1])
def test_pj_fixed_ps_binding_budget_matches_split_search(fx, budget):
    tg = fx_targets(fx)
    ps = np.full(2, 2.0)
    lo, up = tg.bounds(ps, fx)
    Hm, He, Gm, Ge = tg.gains(fx)
    pj = allocate_pj_fixed_ps(ps, Hm, He, Gm, Ge, 1.0, 1.0, lo, up, budget)
    assert pj.sum() == pytest.approx(budget, rel=1e-8)
    obj = float(pair_rate(ps, pj, Hm, He, Gm, Ge, 1.0).sum())

    def split(x):
        q = np.array([x, budget - x])
        return float(pair_rate(ps, q, Hm, He, Gm, Ge, 1.0).sum())

    _, ref = grid_argmax(split, 0.0, budget, budget / 20000)
    assert obj >= ref - 1e-3


# -- alternating optimization ------------------------------------------------

def test_ao_empty_set(fx):
    owners, eve = fx_sets(fx)
    tg = build_jamming_targets(fx, np.zeros(0, dtype=int), owners, eve)
    res = alternating_optimization(fx, tg, 5.0, 5.0, np.ones(3))
    assert res.ps.size == 0 and res.iterations == 0


def test_ao_single_carrier_closed_form(fx):
    owners, eve = fx_sets(fx)
    tg = build_jamming_targets(fx, np.array([1]), owners, eve)
    res = alternating_optimization(fx, tg, 4.0, 10.0, np.ones(3))
    lo, up = tg.bounds(np.array([4.0]), fx)
    expect = _clamp_array(_optimal_pj(4.0, *tg.gains(fx), 1.0), lo, up)
    assert res.ps[0] == pytest.approx(4.0)
    assert res.pj[0] == pytest.approx(float(expect[0]))
    # the first sweep already lands on the optimum
    assert res.trace[1] == pytest.approx(res.objective, abs=1e-12)


def test_ao_fixture_trace_and_equal_power(fx):
    tg = fx_targets(fx)
    res = alternating_optimization(fx, tg, 4.0, 10.0, np.ones(3))
    assert np.all(np.diff(res.trace) >= -1e-12)
    Hm, He, Gm, Ge = tg.gains(fx)
    lo, up = tg.bounds(np.full(2, 2.0), fx)
    pj_eq = _clamp_array(np.full(2, 5.0), lo, up)
    epa = float(np.maximum(pair_rate(2.0, pj_eq, Hm, He, Gm, Ge, 1.0), 0).sum())
    assert res.objective >= epa


def random_partition(seed, M=4, N=12, ps_db=15, pj_db=6):
    from jamofdma.rate_max import partition_sets
    cfg = ScenarioConfig.from_db(ps_db, pj_db, num_users=M, num_subcarriers=N)
    ch = generate_channels(cfg, np.random.default_rng(seed))
    owners = allocate_subcarriers_best_gain(ch)
    part = partition_sets(owners, ch, cfg.source_budget / N, cfg.jammer_budget)
    return cfg, ch, owners, part


@given(st.integers(0, 10 ** 6), st.floats(0.1, 30.0), st.floats(0.01, 10.0))
def test_ao_trace_non_decreasing(seed, ps_budget, pj_budget):
    cfg, ch, owners, part = random_partition(seed)
    tg = build_jamming_targets(ch, part.J1, owners, part.eve)
    res = alternating_optimization(ch, tg, ps_budget, pj_budget, cfg.weights)
    assert np.all(np.diff(res.trace) >= -1e-12)
    assert res.ps.sum() <= ps_budget * (1 + 1e-9)
    assert res.pj.sum() <= pj_budget * (1 + 1e-9) + 1e-12
    lo, up = tg.bounds(res.ps, ch)
    on = res.pj > 0
    assert np.all(res.pj[on] > lo[on]) and np.all(res.pj[on] < up[on])


# -- primal decomposition ----------------------------------------------------

def test_pd_empty_jammed_set_is_ospwj(fx, fx_cfg):
    owners, eve = fx_sets(fx)
    tg = build_jamming_targets(fx, np.zeros(0, dtype=int), owners, eve)
    res = primal_decomposition(fx, np.arange(5), tg, owners, eve, 10.0, 10.0, np.ones(3))
    assert np.array_equal(res.ps, ospwj(fx, fx_cfg).allocation.ps)
    assert np.all(res.pj == 0)


def test_pd_fixture_matches_grid(fx, fx_cfg):
    owners, eve = fx_sets(fx)
    tg = fx_targets(fx)
    res = primal_decomposition(fx, FX_J0, tg, owners, eve, 10.0, 10.0, np.ones(3))
    ref = jpa_grid_oracle(fx, fx_cfg, FX_J1, owners, eve)
    assert res.objective >= ref - 1e-2
    assert res.trace and res.objective >= res.trace[0]["objective"] - 1e-12


@given(st.integers(0, 10 ** 6))
def test_pd_convergence_and_budgets(seed):
    cfg, ch, owners, part = random_partition(seed)
    tg = build_jamming_targets(ch, part.J1, owners, part.eve)
    res = primal_decomposition(ch, part.J0, tg, owners, part.eve, cfg.source_budget,
                               cfg.jammer_budget, cfg.weights)
    assert res.ps.sum() <= cfg.source_budget * (1 + 1e-9)
    assert res.pj.sum() <= cfg.jammer_budget * (1 + 1e-9)
    assert res.objective >= res.trace[0]["objective"] - 1e-12 if res.trace else True
    if not res.converged:
        assert res.pd_iterations == PD_MAX_ITER
    last = res.trace[-1] if res.trace else None
    if res.converged and last is not None and part.N1 and len(tg) and not res.demoted:
        gap = abs(last["lambda2"] - last["lambda1"])
        # converged either on the price gap, a stalled objective or a pinned split
        assert (gap <= LAMBDA_GAP_RTOL * max(last["lambda1"], last["lambda2"], 1.0)
                or len(res.trace) >= 2 or last["t"] in (0.0, cfg.source_budget))


# -- closed-form jammer allocation ------------------------------------------

def test_suboptimal_zero_budget(fx):
    tg = fx_targets(fx)
    assert np.array_equal(suboptimal_pj(fx, tg, np.full(2, 2.0), 0.0, np.ones(3)), np.zeros(2))


def test_suboptimal_excludes_non_improving_pairs(fx):
    owners, eve = fx_sets(fx)
    # c1: owner's jammer gain exceeds the eavesdropper's, so nothing to gain
    tg = build_jamming_targets(fx, np.array([0]), owners, eve)
    assert np.all(suboptimal_pj(fx, tg, np.array([2.0]), 5.0, np.ones(3)) == 0)


@pytest.mark.parametrize("budget", [0.05, 0.2])
def test_suboptimal_single_pair_matches_bound_grid(fx, budget):
    owners, eve = fx_sets(fx)
    tg = build_jamming_targets(fx, np.array([1]), owners, eve)
    pj = suboptimal_pj(fx, tg, np.array([2.0]), budget, np.ones(3))
    _, _, Gm, Ge = tg.gains(fx)
    lo, up = tg.bounds(np.array([2.0]), fx)
    bound = lambda p: math.log2((1 + p * Ge[0]) / (1 + p * Gm[0]))
    x, _ = grid_argmax(bound, 0.0, min(budget, up[0]), 1e-6)
    assert abs(pj[0] - x) < 1e-4


def test_suboptimal_slack_rules(fx):
    tg = fx_targets(fx)
    ps = np.full(2, 2.0)
    lo, up = tg.bounds(ps, fx)
    mid = suboptimal_pj(fx, tg, ps, 1e6, np.ones(3), when_slack="midpoint")
    top = suboptimal_pj(fx, tg, ps, 1e6, np.ones(3), when_slack="upper")
    assert np.allclose(mid, (lo + up) / 2)
    assert np.all(top < up) and np.allclose(top, up, rtol=1e-5)
    with pytest.raises(ValueError):
        suboptimal_pj(fx, tg, ps, 1e6, np.ones(3), when_slack="other")

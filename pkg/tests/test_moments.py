import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import bernoulli_moment, product
from poelab.cocycle import CocycleSystem, PotentialFamily, fiber_grid
from poelab.moments import (
    contraction_moment_exact,
    contraction_moment_mc,
    decay_fit,
    decay_rate_report,
    moment_ratio_check,
    partition_moment,
    product_log_norms,
    tail_probability_check,
)
from poelab.poe import CombinedPotential
from poelab.shift import ShiftSpec, word_array
from poelab.systems import LOG2, golden_b, rotation, sys_a, sys_b
from poelab.transfer import Potential


def random_full_shift(seed, beta):
    rng = np.random.default_rng(seed)
    mats = np.array([rotation(rng.uniform(0, np.pi)) @ np.diag(rng.uniform(0.5, 2.5, 2)) for _ in range(2)])
    psi = Potential(rng.normal(size=2))
    return CombinedPotential(psi, PotentialFamily(CocycleSystem.one_sided(ShiftSpec.full(2), mats)), -beta)


@pytest.mark.parametrize("beta", [0.3, 1.0])
@pytest.mark.parametrize("n", [1, 5, 11])
def test_sys_b_moment_matches_binomial_sum(beta, n):
    cp = sys_b().combined(-beta)
    ts = np.array([0.0, 0.3, math.pi / 4, 2.0])
    got = contraction_moment_exact(cp, n, ts)
    ref = [bernoulli_moment(0.5, n, beta, t) for t in ts]
    assert np.allclose(got, ref, rtol=1e-12)


def test_product_log_norms_match_explicit_products():
    cp = random_full_shift(1, 1.0)
    sys = cp.family.base
    words = word_array(sys.spec, 6)
    ts = [0.2, 1.7]
    got = product_log_norms(sys, words, 6, ts)
    for w, row in zip(words, got):
        P = product([sys.matrices[a] for a in w])
        for t, v in zip(ts, row):
            assert v == pytest.approx(math.log(np.linalg.norm(P @ [math.cos(t), math.sin(t)])), abs=1e-12)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.1, 1.5))
def test_moment_equals_partition_sum_on_full_shift(seed, beta):
    cp = random_full_shift(seed, beta)
    ts = fiber_grid(3)
    Z = partition_moment(cp, 12, ts)
    for n in (1, 4, 8, 12):
        assert np.allclose(contraction_moment_exact(cp, n, ts), Z[n - 1], rtol=1e-10, atol=0)


def test_ratio_constant_on_full_shift_memory1():
    rep = moment_ratio_check(random_full_shift(3, 0.7), list(range(1, 13)), fiber_grid(4))
    assert rep.constant_in_n
    assert np.allclose(rep.ratios, 1.0, atol=1e-12)
    assert rep.passed


def test_ratio_within_gibbs_constant_on_golden_mean():
    cp = golden_b().combined(-1.0)
    rep = moment_ratio_check(cp, list(range(1, 13)), fiber_grid(5))
    assert rep.passed
    assert rep.within_calibrated
    assert rep.gibbs_constant > 1
    assert rep.ratios.min() >= 1 / rep.bound and rep.ratios.max() <= rep.bound


def test_monte_carlo_covers_exact_value():
    cp = sys_b().combined(-1.0)
    exact = contraction_moment_exact(cp, 8, [0.0])[0]
    hits = sum(contraction_moment_mc(cp, 8, 0.0, 2000, seed).covers(exact) for seed in range(100))
    assert hits >= 95


def test_monte_carlo_is_thread_independent():
    cp = golden_b().combined(-0.5)
    runs = [contraction_moment_mc(cp, 10, 0.4, 10000, 7, task_id=3, threads=k) for k in (1, 4, 8)]
    assert all(r.estimate == runs[0].estimate and r.std_error == runs[0].std_error for r in runs)


def test_sys_a_decay_rates_are_ordered():
    cp = sys_a().combined(-1.0)
    betas = [0.2, 0.5, 1.0]
    rep = decay_rate_report(cp, betas, list(range(2, 13)), fiber_grid(3), chi=LOG2)
    rates = [f.rate for f in rep.fits]
    assert np.allclose(rates, np.array(betas) * LOG2, atol=1e-12)
    assert rates == sorted(rates)
    assert rep.passed


def test_decay_fit_on_synthetic_line():
    n = np.arange(2, 20)
    fit = decay_fit(1.0, n, 0.3 - 0.25 * n, chi=0.4)
    assert fit.rate == pytest.approx(0.25, abs=1e-12)
    assert fit.rate_err == pytest.approx(0.0, abs=1e-9)
    assert fit.passed
    assert not decay_fit(1.0, n, 0.3 - 0.1 * n, chi=0.4).rate_ok


def test_tail_bound_sys_b():
    cp = sys_b().combined(-1.0)
    rep = tail_probability_check(cp, 12, 0.1, 0.0)
    # |A^n e1| = 2^(zeros): the tail is P(Bin(12, 1/2) <= 12 * 0.1 / log 2)
    k = math.floor(12 * 0.1 / LOG2)
    ref = sum(math.comb(12, j) for j in range(k + 1)) / 2**12
    assert rep.exact_tail == pytest.approx(ref, rel=1e-12)
    assert rep.passed


def test_tail_bound_sys_a():
    cp = sys_a().combined(-1.0)
    rep = tail_probability_check(cp, 10, LOG2 / 2, 0.3)
    assert rep.exact_tail == 0.0
    assert rep.bound == pytest.approx(2 ** (-10 / 2), rel=1e-12)

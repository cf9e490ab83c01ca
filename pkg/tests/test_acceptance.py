"""Acceptance criteria 1-10, each at its stated tolerance and time budget.

Every test records one PASS/FAIL line, shown in the "acceptance criteria"
section at the end of the pytest run.
"""

import json
import math
import time

import numpy as np

from oracles import bernoulli_moment
from poelab.cli import run_experiment
from poelab.cocycle import PotentialFamily, fiber_grid, reduction_residuals, two_sided_reduce
from poelab.config import system_document
from poelab.moments import contraction_moment_mc, decay_rate_report, moment_ratio_check
from poelab.poe import CombinedPotential, poe_estimate, submultiplicativity_check
from poelab.shift import ShiftSpec
from poelab.systems import LOG2, golden_b, past_twist, sys_a, sys_b
from poelab.transfer import (
    Potential,
    gap_bound_check,
    gibbs_model,
    pressure,
    pressure_derivative,
    pressure_second_derivative,
)
from poelab.variational import OptimizerConfig, markov_lower_bound, variational_sandwich


def test_criterion_01_closed_form_pressure(criterion):
    t0 = time.perf_counter()
    golden_err = abs(pressure(ShiftSpec.golden_mean(), Potential.constant(2, 0.0)) - math.log((1 + math.sqrt(5)) / 2))
    full_err = max(
        abs(pressure(ShiftSpec.full(S), Potential.constant(S, c)) - (math.log(S) + c))
        for S in (1, 2, 3, 4, 7)
        for c in (-2.0, -LOG2, 0.0, 0.5)
    )
    dt = time.perf_counter() - t0
    ok = golden_err < 1e-10 and full_err < 1e-12 and dt < 1
    criterion(1, ok, f"golden-mean error {golden_err:.1e}, full-shift error {full_err:.1e}", dt)
    assert ok


def test_criterion_02_gibbs_exactness(criterion):
    t0 = time.perf_counter()
    spec = ShiftSpec.full(2)
    worst_C = worst_id = 0.0
    for values in ([0.0, 0.0], [0.3, -1.1], [-2.0, 1.5], [LOG2, 0.0]):
        phi = Potential(np.array(values))
        model = gibbs_model(spec, phi)
        P = pressure(spec, phi)
        p = np.exp(values) / np.sum(np.exp(values))
        worst_C = max(worst_C, abs(model.gibbs_constant - 1))
        for n in range(1, 13):
            words, probs = model.word_probabilities(n)
            bern = np.prod(p[words], axis=1)
            ident = np.array([phi.birkhoff(w, n) - n * P for w in words])
            worst_id = max(worst_id, float(np.abs(np.log(probs) - ident).max()), float(np.abs(probs - bern).max()))
    dt = time.perf_counter() - t0
    ok = worst_C <= 1e-12 and worst_id <= 1e-12 and dt < 1
    criterion(2, ok, f"|C - 1| = {worst_C:.1e}, cylinder identity error {worst_id:.1e}", dt)
    assert ok


def test_criterion_03_linear_response(criterion):
    t0 = time.perf_counter()
    s = sys_b()
    phi = s.family.potential(0.0)
    P = lambda b: pressure(s.spec, s.psi - b * phi)  # noqa: E731
    closed = lambda b: math.log((1 + 2.0**-b) / 2)  # noqa: E731
    d1 = pressure_derivative(s.spec, s.psi, phi)
    d2 = pressure_second_derivative(s.spec, s.psi, phi)
    h = 1e-4
    fd1 = (P(h) - P(-h)) / (2 * h)
    fd2 = (P(h) - 2 * P(0) + P(-h)) / h**2
    cf1 = (closed(h) - closed(-h)) / (2 * h)
    cf2 = (closed(h) - 2 * closed(0) + closed(-h)) / h**2
    target1, target2 = -LOG2 / 2, LOG2**2 / 4
    rel = max(
        abs(d1 / target1 - 1), abs(d2 / target2 - 1),
        abs(fd1 / d1 - 1), abs(fd2 / d2 - 1),
        abs(cf1 / d1 - 1), abs(cf2 / d2 - 1),
    )
    dt = time.perf_counter() - t0
    ok = rel <= 1e-5 and dt < 1
    criterion(3, ok, f"P' = {d1:.10f}, P'' = {d2:.10f}, worst relative error {rel:.1e}", dt)
    assert ok


def test_criterion_04_gap_bound(criterion):
    t0 = time.perf_counter()
    s = sys_b()
    betas = [round(0.05 * k, 2) for k in range(1, 11)]
    rep = gap_bound_check(s.spec, s.psi, s.family, betas, fiber_grid(8), LOG2 / 2)
    dt = time.perf_counter() - t0
    violations = sum(r[4] < 0 for r in rep.rows)
    ok = rep.passed and violations == 0 and not rep.skipped_betas and len(rep.rows) == 256 * 10 and dt < 10
    criterion(4, ok, f"{len(rep.rows)} checks, worst margin {rep.worst_margin:.3e} at {rep.worst_at}, {violations} violations", dt)
    assert ok


def test_criterion_05_poe_sandwich(criterion):
    t0 = time.perf_counter()
    sys_a_err = 0.0
    small = OptimizerConfig(starts=4, prefixes=16, length=128, max_sweeps=30)
    for beta in (0.5, 1.0):
        cp = sys_a().combined(-beta)
        lb = markov_lower_bound(cp, 1, small)
        est = poe_estimate(cp, 8, grid_log2=6, bins=64)
        sys_a_err = max(sys_a_err, abs(lb.value + beta * LOG2), abs(est.fekete_upper + beta * LOG2))
    rep = variational_sandwich(sys_b().combined(-1.0), n_max=16, memory=2, grid_log2=10, bins=256)
    dt = time.perf_counter() - t0
    ok = sys_a_err <= 1e-9 and rep.passed and rep.width <= 0.05 and dt < 300
    criterion(
        5, ok,
        f"SYS-A error {sys_a_err:.1e}; SYS-B lower {rep.lower:.5f} +- {rep.stat_err:.5f} <= "
        f"min seq {rep.sequence.min():.5f} <= fekete {rep.fekete_upper:.5f}, width {rep.width:.4f}",
        dt,
    )
    assert ok


def twist_combined(s):
    red = two_sided_reduce(past_twist()).reduced
    return CombinedPotential(Potential.constant(2, -LOG2), PotentialFamily(red), s)


def test_criterion_06_submultiplicativity(criterion):
    t0 = time.perf_counter()
    systems = {
        "SYS-A": sys_a().combined(-1.0),
        "SYS-B": sys_b().combined(-1.0),
        "GOLDEN-B": golden_b().combined(-1.0),
        "TWIST": twist_combined(-1.0),
    }
    pairs = [(n, m) for n in range(1, 16) for m in range(n, 16) if n + m <= 16]
    parts, ok = [], True
    for name, cp in systems.items():
        est = poe_estimate(cp, 16, grid_log2=10, bins=256)
        rep = submultiplicativity_check(cp, pairs, est=est)
        monotone = bool((np.diff(est.fekete_prefix()) <= 0).all())
        ok &= rep.exact_passed and rep.certified_passed and monotone
        parts.append(f"{name} {'ok' if rep.passed and monotone else 'FAIL'}")
    dt = time.perf_counter() - t0
    ok = ok and dt < 120
    criterion(6, ok, f"{len(pairs)} pairs per system: " + ", ".join(parts), dt)
    assert ok


def test_criterion_07_moment_identity(criterion):
    t0 = time.perf_counter()
    ts = fiber_grid(6)
    n_list = list(range(1, 13))
    full = [moment_ratio_check(make().combined(-beta), n_list, ts) for make in (sys_a, sys_b) for beta in (0.5, 1.0)]
    spread = max(r.spread for r in full)
    golden = moment_ratio_check(golden_b().combined(-1.0), n_list, ts)
    dt = time.perf_counter() - t0
    ok = spread <= 1e-12 and golden.passed and dt < 60
    criterion(
        7, ok,
        f"full-shift spread {spread:.1e}; golden ratios in [{golden.ratios.min():.4f}, {golden.ratios.max():.4f}] "
        f"within [1/{golden.bound:.4f}, {golden.bound:.4f}]",
        dt,
    )
    assert ok


def test_criterion_08_decay(criterion):
    t0 = time.perf_counter()
    s = sys_b()
    cp = s.combined(-1.0)
    chi = LOG2 / 2
    rep = decay_rate_report(cp, [1.0], list(range(1, 17)), fiber_grid(8), chi)
    fit = rep.fits[0]
    t_star = fiber_grid(8)[fit.argmax_t[-1]]
    mc = contraction_moment_mc(cp, 40, t_star, 100_000, seed=2024)
    prediction = fit.predict(40)
    closed = bernoulli_moment(0.5, 40, 1.0, t_star)
    dt = time.perf_counter() - t0
    ok = fit.rate >= 0.28 and fit.rate > chi / 2 and mc.covers(prediction) and dt < 120
    criterion(
        8, ok,
        f"rate {fit.rate:.5f} (log 4/3 = {math.log(4 / 3):.5f}, bound {chi / 2:.4f}); n=40 prediction {prediction:.4e}, "
        f"MC {mc.estimate:.4e} [{mc.ci_low:.4e}, {mc.ci_high:.4e}], closed form {closed:.4e}",
        dt,
    )
    assert ok


def test_criterion_09_reduction(criterion):
    t0 = time.perf_counter()
    res = reduction_residuals(two_sided_reduce(past_twist()))
    ident = reduction_residuals(two_sided_reduce(sys_b().cocycle))
    dt = time.perf_counter() - t0
    ok = res.cohomology < 1e-9 and res.past_independence < 1e-9 and ident.identity and dt < 10
    criterion(9, ok, f"cohomology {res.cohomology:.1e}, past independence {res.past_independence:.1e}, one-sided identity {ident.identity}", dt)
    assert ok


def test_criterion_10_determinism(criterion, tmp_path):
    t0 = time.perf_counter()
    s = sys_b()
    doc = system_document("SYS-B", s.spec, s.psi, s.cocycle, n_max=8, fiber_grid_log2=6, bins=64, mc_samples=5000,
                          beta_grid=[0.5, 1.0], optimizer={"starts": 4, "prefixes": 16, "length": 64, "max_sweeps": 20})
    cfg = tmp_path / "sys_b.json"
    cfg.write_text(json.dumps(doc))
    outputs = []
    for rep in range(2):
        for threads in (1, 4, 8):
            out = tmp_path / f"r{rep}_t{threads}"
            run_experiment("report", cfg, out, seed=12345, threads=threads)
            outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    dt = time.perf_counter() - t0
    ok = all(o == outputs[0] for o in outputs) and any(n.endswith(".csv") for n in outputs[0])
    criterion(10, ok, f"{len(outputs)} runs, {len(outputs[0])} files each, byte-identical: {ok}", dt)
    assert ok

"""Command-line driver: ``poelab <command> --config FILE --out DIR --seed U64 --threads N``.

Each command writes one CSV and ``summary.json``; ``report`` runs every
stage in order. Exit status is 0 when every check passes, 1 on an
invariant violation and 2 on a configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np
from scipy.stats import binom

from .cocycle import PotentialFamily, reduction_residuals, two_sided_reduce, uniform_expansion_margin
from .config import ExperimentConfig, load_config
from .errors import ConfigurationError, InvariantViolation
from .moments import contraction_moment_mc, decay_rate_report, moment_ratio_check, tail_probability_check
from .poe import CombinedPotential, partition_records, poe_estimate, submultiplicativity_check
from .sampling import gibbs_words, stream
from .shift import word_array
from .transfer import gap_bound_check, gibbs_model
from .variational import variational_sandwich

log = logging.getLogger("poelab")

COMMANDS = ("pressure", "gibbs", "poe", "variational", "hyperbolicity", "reduce", "report")
EXPANSION_GRID = 1024


def _plain(x):
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    return x


def _cell(x) -> str:
    x = _plain(x)
    if x is None:
        return ""
    return repr(x) if isinstance(x, float) else str(x)


def write_csv(path: Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in rows:
            w.writerow([_cell(v) for v in row])


class Run:
    """Shared state of one invocation: config, derived models and collected checks."""

    def __init__(self, cfg: ExperimentConfig, out: Path, seed: int, threads: int):
        self.cfg = cfg
        self.out = out
        self.seed = seed
        self.threads = threads
        self.checks: dict[str, dict] = {}
        self.reduction = two_sided_reduce(cfg.cocycle)
        self.cocycle = self.reduction.reduced
        self.family = PotentialFamily(self.cocycle)
        self.model = gibbs_model(cfg.spec, cfg.psi)
        self._chi = None

    @property
    def chi(self) -> float:
        if self._chi is None:
            self._chi = uniform_expansion_margin(self.family, self.model, EXPANSION_GRID)
        return self._chi

    def combined(self, s: float) -> CombinedPotential:
        return CombinedPotential(self.cfg.psi, self.family, s)

    def check(self, name: str, passed: bool, **data) -> None:
        self.checks[name] = {"passed": bool(passed), **_plain(data)}
        log.info("%s: %s", name, "pass" if passed else "FAIL")

    # ------------------------------------------------------------ stages

    def pressure(self) -> None:
        cfg = self.cfg
        chi = self.chi
        self.check("expansion_certified", chi > 0, chi=chi)
        rep = gap_bound_check(cfg.spec, cfg.psi, self.family, cfg.beta_grid, cfg.fiber_points, chi, self.threads)
        write_csv(self.out / "pressure.csv", rep.csv_rows())
        self.check(
            "gap_bound",
            rep.passed and chi > 0,
            chi=chi,
            beta_radius=rep.beta_radius,
            worst_margin=rep.worst_margin,
            skipped_betas=rep.skipped_betas,
            second_derivative_sup=rep.second_derivative_sup,
            pressure=self.model.spectrum.pressure,
            spectral_gap=self.model.spectrum.gap,
        )

    def gibbs(self) -> None:
        m = self.model
        rows = [("state", "word", "stationary") + tuple(f"q_{j}" for j in range(m.chain.size))]
        for i, w in enumerate(m.states):
            rows.append((i, "".join(map(str, w)), m.chain.stationary[i], *m.chain.transition[i]))
        write_csv(self.out / "gibbs.csv", rows)
        n = min(self.cfg.n_max, 12)
        words = word_array(self.cfg.spec, n)
        total = float(np.exp(m.log_cylinder(words)).sum())
        self.check("cylinder_sum", abs(total - 1) <= 1e-12, length=n, total=total)
        # symbol frequencies of exact samples against the stationary marginal
        rng = stream(self.seed, 1)
        draws = gibbs_words(m, 1, rng, self.cfg.mc_samples)[:, 0]
        freq = np.bincount(draws, minlength=self.cfg.spec.alphabet_size) / len(draws)
        p = np.exp(m.log_cylinder(np.arange(self.cfg.spec.alphabet_size)[:, None]))
        sd = np.sqrt(p * (1 - p) / len(draws))
        self.check(
            "sample_frequencies",
            bool((np.abs(freq - p) <= 4 * sd + 1e-15).all()),
            frequencies=freq,
            marginal=p,
            gibbs_constant=m.gibbs_constant,
            pressure=m.spectrum.pressure,
        )

    def poe(self):
        cfg = self.cfg
        cp = self.combined(cfg.poe_coefficient)
        est = poe_estimate(cp, cfg.n_max, cfg.fiber_grid_log2, cfg.bins)
        write_csv(self.out / "partition.csv", partition_records(cp, est))
        pairs = [(a, b) for a in range(1, cfg.n_max) for b in range(a, cfg.n_max - a + 1)]
        sub = submultiplicativity_check(cp, pairs, cfg.fiber_grid_log2, cfg.bins, est=est) if pairs else None
        self.check(
            "poe_brackets",
            bool((est.sequence <= est.certified_upper / est.n_values + 1e-12).all()),
            sequence=est.sequence,
            certified_upper=est.certified_upper / est.n_values,
            fekete_upper=est.fekete_upper,
            fekete_n=est.fekete_n,
        )
        if sub is not None:
            self.check("submultiplicativity", sub.certified_passed, pairs=len(pairs), grid_form=sub.exact_passed, worst_excess=sub.worst_excess)
        return est

    def variational(self, est=None) -> None:
        cfg = self.cfg
        cp = self.combined(cfg.poe_coefficient)
        est = est or poe_estimate(cp, cfg.n_max, cfg.fiber_grid_log2, cfg.bins)
        opt = cfg.optimizer
        if opt.seed == 0:
            opt = type(opt)(**{**opt.__dict__, "seed": self.seed})
        rep = variational_sandwich(cp, cfg.n_max, cfg.markov_memory, cfg.fiber_grid_log2, cfg.bins, opt, estimate=est)
        Q = rep.bound.measure.transition
        header = ("system", "s", "m", "lower", "fekete_upper", "width") + tuple(f"row_{i}" for i in range(len(Q)))
        rows = [header, (cfg.name, cp.coefficient, cfg.markov_memory, rep.lower, rep.fekete_upper, rep.width, *(" ".join(repr(float(v)) for v in r) for r in Q))]
        write_csv(self.out / "variational.csv", rows)
        self.check(
            "variational_sandwich",
            rep.passed,
            lower=rep.lower,
            stat_err=rep.stat_err,
            sequence_min=float(rep.sequence.min()),
            fekete_upper=rep.fekete_upper,
            width=rep.width,
        )

    def hyperbolicity(self) -> None:
        cfg = self.cfg
        chi = self.chi
        if chi <= 0:
            self.check("expansion_certified", False, chi=chi)
            return
        ts = cfg.fiber_points
        n_values = list(range(1, cfg.n_max + 1))
        rep = decay_rate_report(self.combined(-1.0), cfg.beta_grid, n_values, ts, chi, self.threads)
        rows = [("beta", "n", "t_index", "moment_exact", "moment_mc", "ci_low", "ci_high", "log_rate")]
        covered = []
        for bi, fit in enumerate(rep.fits):
            cp = self.combined(-fit.beta)
            for n, ti, y in zip(fit.n_values, fit.argmax_t, fit.log_sup_moment):
                mc = contraction_moment_mc(cp, int(n), ts[ti], cfg.mc_samples, self.seed, task_id=bi * 4096 + int(n), threads=self.threads, model=self.model)
                covered.append(mc.covers(float(np.exp(y))))
                rows.append((fit.beta, int(n), int(ti), float(np.exp(y)), mc.estimate, mc.ci_low, mc.ci_high, -y / n))
            # beyond enumeration: compare the fit's prediction with Monte Carlo
            n_far = cfg.mc_extrapolation_n
            ti = int(fit.argmax_t[-1])
            mc = contraction_moment_mc(cp, n_far, ts[ti], cfg.mc_samples, self.seed, task_id=bi * 4096 + 4095, threads=self.threads, model=self.model)
            rows.append((fit.beta, n_far, ti, None, mc.estimate, mc.ci_low, mc.ci_high, None))
            self.check(
                f"decay_beta_{fit.beta!r}",
                fit.passed,
                rate=fit.rate,
                rate_err=fit.rate_err,
                bound=fit.bound_rate,
                constant=fit.constant,
                extrapolated_n=n_far,
                extrapolated_prediction=fit.predict(n_far),
                extrapolated_mc=[mc.estimate, mc.ci_low, mc.ci_high],
                extrapolation_consistent=mc.covers(fit.predict(n_far)),
            )
            n_tail = min(cfg.n_max, 16)
            tail = tail_probability_check(cp, n_tail, chi * fit.beta / 4, ts[ti], self.model)
            self.check(f"tail_beta_{fit.beta!r}", tail.passed, n=n_tail, threshold=tail.threshold, bound=tail.bound, exact=tail.exact_tail)
        write_csv(self.out / "hyperbolicity.csv", rows)
        # each 99% interval misses with probability 0.01; allow what a 1e-3 binomial tail allows
        allowed = int(binom.ppf(0.999, len(covered), 0.01))
        misses = len(covered) - sum(covered)
        self.check("mc_covers_exact", misses <= allowed, intervals=len(covered), misses=misses, allowed=allowed)
        ratio = moment_ratio_check(self.combined(-cfg.beta_grid[0]), range(1, min(cfg.n_max, 12) + 1), ts, self.model)
        self.check("moment_ratio", ratio.passed, gibbs_constant=ratio.gibbs_constant, bound=ratio.bound, calibrated=ratio.calibrated, spread=ratio.spread)

    def reduce(self) -> None:
        red = self.reduction
        res = reduction_residuals(red)
        S = self.cfg.spec.alphabet_size
        L = self.cocycle.window_length
        rows = [("word", "a", "b", "c", "d")]
        for w in word_array(self.cfg.spec, L):
            rows.append(("".join(map(str, w)), *self.cocycle.matrix(w).ravel()))
        write_csv(self.out / "reduce.csv", rows)
        past = self.cfg.cocycle.window[0]
        ok = res.identity if past == 0 else (res.cohomology < 1e-9 and res.past_independence < 1e-9)
        self.check("reduction", ok, past=past, cohomology=res.cohomology, past_independence=res.past_independence, alphabet_size=S)

    def report(self) -> None:
        self.reduce()
        self.pressure()
        est = self.poe()
        self.variational(est)
        self.hyperbolicity()

    def summary(self, command: str) -> bool:
        passed = all(c["passed"] for c in self.checks.values())
        doc = {"command": command, "system": self.cfg.name, "seed": self.seed, "passed": passed, "checks": self.checks}
        (self.out / "summary.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return passed


def run_experiment(command: str, config_path, out, seed: int = 0, threads: int = 1) -> int:
    """Run one command; returns the process exit code."""
    if command not in COMMANDS:
        raise ValueError(f"unknown command {command!r}")
    try:
        cfg = load_config(config_path)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    run = Run(cfg, out, int(seed), max(int(threads), 1))
    try:
        getattr(run, command)()
    except InvariantViolation as exc:
        run.check("invariant", False, message=str(exc))
    return 0 if run.summary(command) else 1


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="poelab", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="experiment JSON")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--seed", type=int, default=0, help="64-bit seed")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    if not 0 <= args.seed < 2**64:
        ap.error("seed must fit in 64 unsigned bits")
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    return run_experiment(args.command, args.config, args.out, args.seed, args.threads)


if __name__ == "__main__":
    sys.exit(main())

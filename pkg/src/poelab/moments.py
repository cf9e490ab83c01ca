"""Contraction moments of Gibbs-driven cocycles and their decay.

The moment ``E_mu |A^n_omega u(t)|^(-beta)`` is computed three ways: by
exact enumeration with direct matrix products, by Monte Carlo over exact
Gibbs samples, and (in :mod:`poelab.poe`) as an anchored partition sum.
The first two share no code with the third.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from ._parallel import parallel_map
from .cocycle import CocycleSystem
from .errors import DomainError, EnumerationCapError
from .poe import CombinedPotential, partition_sums
from .sampling import gibbs_words, stream
from .shift import MAX_WORDS, word_array, word_count
from .transfer import GibbsModel, gibbs_model, pressure

Z99 = 2.5758293035489004
MC_BLOCK = 4096
ENUM_CHUNK = 1 << 16


def _beta(cp: CombinedPotential) -> float:
    beta = -cp.coefficient
    if beta <= 0:
        raise DomainError("moments need coefficient s = -beta with beta > 0")
    return beta


def product_log_norms(cocycle: CocycleSystem, words: np.ndarray, n: int, ts) -> np.ndarray:
    """``log |A^n_w u(t)|`` for each word (rows) and fiber point (columns).

    The product ``A_(n-1) ... A_0`` is accumulated as a matrix with a
    running log-scale, then applied to ``u(t)`` once.
    """
    words = np.asarray(words, dtype=np.intp)
    L = cocycle.window_length
    if words.shape[1] < n + L - 1:
        raise DomainError(f"need words of length {n + L - 1}")
    P = np.broadcast_to(np.eye(2), (len(words), 2, 2)).copy()
    scale = np.zeros(len(words))
    for k in range(n):
        A = cocycle.matrices[tuple(words[:, k + j] for j in range(L))]
        P = A @ P
        m = np.abs(P).max(axis=(1, 2))
        P /= m[:, None, None]
        scale += np.log(m)
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    c, s = np.cos(ts), np.sin(ts)
    vx = P[:, 0, 0, None] * c + P[:, 0, 1, None] * s
    vy = P[:, 1, 0, None] * c + P[:, 1, 1, None] * s
    return scale[:, None] + np.log(np.hypot(vx, vy))


def _enumerate(model: GibbsModel, cocycle: CocycleSystem, n: int, ts):
    L = cocycle.window_length
    length = n + L - 1
    if word_count(model.spec, length) > MAX_WORDS:
        raise EnumerationCapError(f"{length}-word enumeration exceeds 2^24 words")
    words = word_array(model.spec, length)
    for i in range(0, len(words), ENUM_CHUNK):
        w = words[i : i + ENUM_CHUNK]
        yield model.log_cylinder(w), product_log_norms(cocycle, w, n, ts)


def contraction_moment_exact(cp: CombinedPotential, n: int, ts, model: GibbsModel | None = None) -> np.ndarray:
    """``sum_w mu([w]) |A^n_w u(t)|^(-beta)`` over all admissible words, for each ``t``.

    ``mu`` is the Gibbs measure of the base potential and ``beta = -s``.
    """
    beta = _beta(cp)
    cocycle = cp.family.base
    model = model or gibbs_model(cp.spec, cp.base)
    parts = [logsumexp(lp[:, None] - beta * ln, axis=0) for lp, ln in _enumerate(model, cocycle, n, ts)]
    return np.exp(logsumexp(np.array(parts), axis=0))


@dataclass
class MonteCarloMoment:
    estimate: float
    std_error: float
    ci_low: float
    ci_high: float
    samples: int

    def covers(self, value: float) -> bool:
        # rounding slack matters when the variance vanishes (scalar cocycles)
        slack = 1e-12 * abs(value)
        return self.ci_low - slack <= value <= self.ci_high + slack


def contraction_moment_mc(
    cp: CombinedPotential,
    n: int,
    t: float,
    samples: int,
    seed: int,
    task_id: int = 0,
    threads: int = 1,
    model: GibbsModel | None = None,
) -> MonteCarloMoment:
    """Monte Carlo moment with a 99% normal confidence interval.

    Draws come in fixed blocks of :data:`MC_BLOCK` words, block ``b`` using
    stream ``(seed, task_id * 2**20 + b)``, so the result does not depend on
    ``threads``. Mean and second moment are accumulated in log space.
    """
    if samples < 2:
        raise DomainError("need at least two samples")
    beta = _beta(cp)
    cocycle = cp.family.base
    model = model or gibbs_model(cp.spec, cp.base)
    L = cocycle.window_length
    sizes = [min(MC_BLOCK, samples - b0) for b0 in range(0, samples, MC_BLOCK)]

    def block(b: int) -> np.ndarray:
        rng = stream(seed, (task_id << 20) + b)
        w = gibbs_words(model, n + L - 1, rng, sizes[b])
        return -beta * product_log_norms(cocycle, w, n, [t])[:, 0]

    logv = np.concatenate(parallel_map(block, range(len(sizes)), threads))
    N = len(logv)
    log_mean = logsumexp(logv) - np.log(N)
    log_m2 = logsumexp(2 * logv) - np.log(N)
    mean = float(np.exp(log_mean))
    var = max(float(np.exp(log_m2)) - mean * mean, 0.0) * N / (N - 1)
    se = np.sqrt(var / N)
    return MonteCarloMoment(mean, float(se), mean - Z99 * se, mean + Z99 * se, N)


def partition_moment(cp: CombinedPotential, n_max: int, ts) -> np.ndarray:
    """``Z_n`` (anchors summed) for the normalized base potential, as ``(n_max, T)`` values.

    This is the partition-sum side of the moment identity; for
    memory-one data on a full shift it equals the exact moment.
    """
    psi_n = cp.base - pressure(cp.spec, cp.base)
    cpn = CombinedPotential(psi_n, cp.family, cp.coefficient)
    return np.exp(partition_sums(cpn, n_max, ts).anchor_summed())


def cocycle_distortion(cocycle: CocycleSystem) -> float:
    """Bound on ``|log |A^n_w u| - log |A^n_w' u||`` for words agreeing on their first ``n`` symbols.

    Only the last ``future`` factors can differ, each moving the log-norm
    within ``[log smin, log smax]``.
    """
    future = cocycle.window[1]
    if future == 0:
        return 0.0
    sv = np.linalg.svd(cocycle.window_matrices, compute_uv=False)
    return float(future * (np.log(sv[:, 0]).max() - np.log(sv[:, 1]).min()))


@dataclass
class RatioReport:
    """``R(n, t) = moment / Z_n`` with the certified and calibrated constants.

    ``bound`` is the Gibbs constant times ``exp(beta * distortion)``.
    """

    n_values: np.ndarray
    ratios: np.ndarray
    gibbs_constant: float
    bound: float
    calibrated: float
    spread: float
    within_certified: bool
    within_calibrated: bool

    @property
    def constant_in_n(self) -> bool:
        return self.spread <= 1e-12

    @property
    def passed(self) -> bool:
        return self.within_certified


def moment_ratio_check(cp: CombinedPotential, n_list, ts, model: GibbsModel | None = None) -> RatioReport:
    """Compare the exact moment with the anchored partition sum.

    The ratio must stay in ``[1/C, C]`` with ``C`` the certified Gibbs
    constant, widened by the cocycle distortion when the window reads
    ahead. A constant calibrated on the first half of ``n_list`` is
    validated on the second half and reported.
    """
    model = model or gibbs_model(cp.spec, cp.base)
    n_list = np.asarray(sorted(int(n) for n in n_list))
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    Z = partition_moment(cp, int(n_list.max()), ts)
    R = np.array([contraction_moment_exact(cp, int(n), ts, model) / Z[n - 1] for n in n_list])
    C = model.gibbs_constant * np.exp(_beta(cp) * cocycle_distortion(cp.family.base))
    logR = np.abs(np.log(R))
    half = max(len(n_list) // 2, 1)
    cal = float(np.exp(logR[:half].max()))
    tol = 1e-12
    within_cert = bool((logR <= np.log(C) + tol).all())
    within_cal = bool((logR[half:] <= np.log(cal) + tol).all())
    spread = float(np.abs(R - R[:1]).max())
    return RatioReport(n_list, R, model.gibbs_constant, float(C), cal, spread, within_cert, within_cal)


@dataclass
class DecayFit:
    beta: float
    n_values: np.ndarray
    log_sup_moment: np.ndarray
    argmax_t: np.ndarray
    rate: float
    rate_err: float
    intercept: float
    bound_rate: float
    constant: float
    rate_ok: bool
    held_out_ok: bool

    def predict(self, n) -> float:
        return float(np.exp(self.intercept - self.rate * n))

    @property
    def passed(self) -> bool:
        return self.rate_ok and self.held_out_ok


@dataclass
class MomentReport:
    """Per-``beta`` decay fits against the bound ``chi * beta / 2``."""

    chi: float
    fits: list[DecayFit]
    rows: list[tuple] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(f.passed for f in self.fits)


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Slope, its standard error and intercept of a least-squares line."""
    X = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    if len(x) > 2:
        resid = y - X @ coef
        s2 = resid @ resid / (len(x) - 2)
        se = float(np.sqrt(s2 * np.linalg.inv(X.T @ X)[1, 1]))
    else:
        se = 0.0
    return float(coef[1]), se, float(coef[0])


def decay_fit(beta: float, n_values, log_sup: np.ndarray, chi: float, argmax_t=None) -> DecayFit:
    """Fit ``log sup_t moment ~ a - rate * n`` on the upper half of ``n_values``.

    The rate must exceed ``chi * beta / 2`` up to three standard errors. A
    constant ``C`` with ``sup_t moment <= C exp(-chi beta n / 2)`` is fitted
    on the lower half and validated on the upper half.
    """
    n = np.asarray(n_values, dtype=float)
    y = np.asarray(log_sup, dtype=float)
    half = len(n) // 2
    fit = slice(half, None) if len(n) - half >= 2 else slice(None)
    slope, se, icpt = _ols(n[fit], y[fit])
    rate, err = -slope, 3 * se
    bound = chi * beta / 2
    cal = slice(None, max(half, 1))
    logC = float((y[cal] + bound * n[cal]).max())
    held = (y[half:] + bound * n[half:]) <= logC + 1e-12
    return DecayFit(
        beta, n.astype(int), y, np.asarray(argmax_t) if argmax_t is not None else np.zeros(len(n), int),
        rate, err, icpt, bound, float(np.exp(logC)), bool(rate >= bound - err), bool(held.all()),
    )


def decay_rate_report(cp: CombinedPotential, beta_grid, n_values, ts, chi: float, threads: int = 1) -> MomentReport:
    """Exact ``sup_t`` moments over the grid and their fitted decay, for each ``beta``."""
    if chi <= 0:
        raise DomainError("decay bound needs a certified expansion margin chi > 0")
    model = gibbs_model(cp.spec, cp.base)
    n_values = [int(n) for n in n_values]
    fits = []

    def per_n(args):
        beta, n = args
        return contraction_moment_exact(cp.with_coefficient(-beta), n, ts, model)

    for beta in beta_grid:
        moments = parallel_map(per_n, [(beta, n) for n in n_values], threads)
        arg = np.array([int(np.argmax(m)) for m in moments])
        logsup = np.log([m.max() for m in moments])
        fits.append(decay_fit(beta, n_values, logsup, chi, arg))
    return MomentReport(chi, fits)


@dataclass
class TailReport:
    n: int
    threshold: float
    bound: float
    exact_tail: float | None

    @property
    def passed(self) -> bool:
        return self.exact_tail is None or self.exact_tail <= self.bound * (1 + 1e-12) + 1e-300


def tail_probability_check(cp: CombinedPotential, n: int, threshold: float, t: float, model: GibbsModel | None = None) -> TailReport:
    """Markov-inequality bound ``mu{|A^n u(t)| <= e^(c n)} <= e^(beta c n) * moment``.

    The exact tail is enumerated when the word count allows it.
    """
    beta = _beta(cp)
    model = model or gibbs_model(cp.spec, cp.base)
    moment = float(contraction_moment_exact(cp, n, [t], model)[0])
    bound = float(np.exp(beta * threshold * n) * moment)
    try:
        tail = 0.0
        for lp, ln in _enumerate(model, cp.family.base, n, [t]):
            tail += float(np.exp(lp[ln[:, 0] <= threshold * n]).sum())
    except EnumerationCapError:
        tail = None
    return TailReport(n, threshold, bound, tail)

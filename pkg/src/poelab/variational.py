"""Maximal instability averages, instability kernels and the variational sandwich.

The skew product moves ``(omega, t)`` to ``(T omega, F_omega t)`` and the
skew potential reads ``psi(omega) + s * log |A_omega u(t)|``. Its best
Birkhoff average over fiber points, taken along a long prefix of
``omega``, estimates the maximal instability potential. Averaged over a
Markov measure and added to its entropy, it gives a lower bound for the
POE; the Fekete bound from :mod:`poelab.poe` gives the upper side.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cocycle import act, fiber_grid
from .errors import InvariantViolation
from .poe import CombinedPotential, poe_estimate
from .sampling import stream
from .shift import HigherBlock, MarkovMeasure, markov_entropy

log = logging.getLogger(__name__)


def _paths(cp: CombinedPotential, omega) -> np.ndarray:
    w = np.atleast_2d(np.asarray(omega, dtype=np.intp))
    paths = cp.blocks.higher.encode(w)
    if (paths < 0).any():
        raise ValueError("prefix is not admissible")
    return paths


def skew_averages(cp: CombinedPotential, omega: Sequence[int], ts, n_list: Sequence[int]) -> np.ndarray:
    """``(1/n) S_n(omega, t)`` for every ``n`` in ``n_list`` and every fiber point in ``ts``."""
    bs = cp.blocks
    path = _paths(cp, omega)[0]
    n_list = np.asarray(n_list)
    if n_list.max() > len(path):
        raise ValueError(f"prefix supports {len(path)} steps, asked for {n_list.max()}")
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    x, y = np.cos(ts)[None], np.sin(ts)[None]
    total = np.zeros(len(ts))
    out = np.empty((len(n_list), len(ts)))
    want = {int(n): i for i, n in enumerate(n_list)}
    for k in range(int(n_list.max())):
        x, y, w = bs.step(path[k : k + 1], x, y)
        total = total + w[0]
        if k + 1 in want:
            out[want[k + 1]] = total / (k + 1)
    return out


def skew_orbit(cp: CombinedPotential, omega: Sequence[int], t: float, n: int) -> np.ndarray:
    """Fiber angles ``F^k_omega t`` for ``k < n``."""
    bs = cp.blocks
    path = _paths(cp, omega)[0]
    out = np.empty(n)
    cur = float(t)
    for k in range(n):
        out[k] = cur
        cur = float(act(bs.matrices[path[k]], cur)[0])
    return out


def _log_singular_values(mats: np.ndarray, logdet: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``log smax`` and ``log smin`` of ``mats[..., K-1, :, :] @ ... @ mats[..., 0, :, :]``.

    ``logdet`` holds ``log |det|`` of each factor. The product is formed by
    pairwise tree reduction on the four entries with rescaling, and
    ``log smin = sum log|det| - log smax`` keeps the small singular value
    accurate.
    """
    a, b, c, d = (np.array(mats[..., i, j], dtype=float) for i, j in ((0, 0), (0, 1), (1, 0), (1, 1)))
    scale = np.zeros(a.shape[:-1])
    while a.shape[-1] > 1:
        K = a.shape[-1]
        e = slice(0, K - 1, 2)
        o = slice(1, K, 2)
        # odd @ even
        na = a[..., o] * a[..., e] + b[..., o] * c[..., e]
        nb = a[..., o] * b[..., e] + b[..., o] * d[..., e]
        nc = c[..., o] * a[..., e] + d[..., o] * c[..., e]
        nd = c[..., o] * b[..., e] + d[..., o] * d[..., e]
        if K % 2:
            na, nb, nc, nd = (np.concatenate([x, y[..., K - 1 :]], axis=-1) for x, y in ((na, a), (nb, b), (nc, c), (nd, d)))
        norm = np.maximum(np.maximum(np.abs(na), np.abs(nb)), np.maximum(np.abs(nc), np.abs(nd)))
        a, b, c, d = na / norm, nb / norm, nc / norm, nd / norm
        scale = scale + np.log(norm).sum(axis=-1)
    a, b, c, d = a[..., 0], b[..., 0], c[..., 0], d[..., 0]
    # largest singular value of [[a, b], [c, d]] in closed form
    fro = a * a + b * b + c * c + d * d
    det = a * d - b * c
    smax = np.sqrt((fro + np.sqrt(np.maximum(fro * fro - 4 * det * det, 0.0))) / 2)
    log_smax = scale + np.log(smax)
    return log_smax, logdet.sum(axis=-1) - log_smax


def exact_extreme_averages(cp: CombinedPotential, words: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Continuum ``sup_t`` and ``inf_t`` of ``(1/n) S_n(omega, t)`` for a batch of prefixes.

    The fiber part telescopes to ``log |A^(n)_omega u(t)|``, whose range over
    directions is ``[log smin, log smax]`` of the product matrix.
    """
    bs = cp.blocks
    paths = _paths(cp, words)[:, :n]
    psi_sum = bs.psi[paths].sum(axis=1)
    logdet = np.log(np.abs(np.linalg.det(bs.matrices)))
    mats = np.stack([bs.matrices[:, i, j][paths] for i in range(2) for j in range(2)], axis=-1).reshape(paths.shape + (2, 2))
    lmax, lmin = _log_singular_values(mats, logdet[paths])
    s = bs.coefficient
    hi, lo = (lmax, lmin) if s >= 0 else (lmin, lmax)
    return (psi_sum + s * hi) / n, (psi_sum + s * lo) / n


@dataclass
class InstabilityEstimate:
    """Finite-``n`` maximal instability averages along one prefix.

    ``values`` are grid suprema (lower bounds for the fiber supremum),
    ``exact`` the continuum suprema from singular values, ``upper`` the
    smaller of the Lipschitz-corrected grid value and the exact value.
    """

    omega: tuple
    n_values: np.ndarray
    values: np.ndarray
    argmax_t: np.ndarray
    exact: np.ndarray
    upper: np.ndarray
    inf_values: np.ndarray
    stability_gap: float


def max_instability(cp: CombinedPotential, omega_prefix: Sequence[int], n_list: Sequence[int], grid_log2: int = 10) -> InstabilityEstimate:
    ts = fiber_grid(grid_log2)
    n = np.asarray(n_list)
    avgs = skew_averages(cp, omega_prefix, ts, n)
    values = avgs.max(axis=1)
    argmax = avgs.argmax(axis=1)
    inf_grid = avgs.min(axis=1)
    exact = np.empty(len(n))
    exact_inf = np.empty(len(n))
    for i, k in enumerate(n):
        hi, lo = exact_extreme_averages(cp, np.asarray(omega_prefix)[None], int(k))
        exact[i], exact_inf[i] = hi[0], lo[0]
    mesh = np.pi / len(ts)
    lip = values + np.array([cp.blocks.weight_lipschitz(int(k)) for k in n]) * mesh / 2 / n
    upper = np.minimum(lip, exact + 1e-12)
    tail = slice(len(n) // 2, None)
    gap = float(exact[tail].max() - exact_inf[tail].min())
    return InstabilityEstimate(tuple(int(x) for x in omega_prefix), n, values, argmax, exact, upper, inf_grid, gap)


@dataclass
class ShiftInvarianceReport:
    n: int
    residual_exact: float
    residual_grid: float
    bound: float
    grid_slack: float

    @property
    def passed(self) -> bool:
        return self.residual_exact <= self.bound + 1e-9


def shift_invariance_check(cp: CombinedPotential, omega_prefix: Sequence[int], n: int, grid_log2: int = 10) -> ShiftInvarianceReport:
    """``|phi~_n(omega) - phi~_{n-1}(T omega)| <= 2 ||phi^||_inf / n``.

    Exact for the continuum supremum, since each fiber map is a bijection.
    The grid version is reported with its Lipschitz slack.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    w = np.asarray(omega_prefix)
    a = exact_extreme_averages(cp, w[None], n)[0][0]
    b = exact_extreme_averages(cp, w[None, 1:], n - 1)[0][0]
    ts = fiber_grid(grid_log2)
    ga = skew_averages(cp, w, ts, [n]).max()
    gb = skew_averages(cp, w[1:], ts, [n - 1]).max()
    bound = 2 * cp.sup_norm / n
    # grid values sit below the exact ones by at most this much
    slack = (a - ga) + (b - gb)
    return ShiftInvarianceReport(n, float(abs(a - b)), float(abs(ga - gb)), bound, float(slack))


# ---------------------------------------------------------------- kernels


def circular_w1(p: np.ndarray, q: np.ndarray) -> float:
    """Wasserstein-1 distance between histograms on equal bins of the circle ``[0, pi)``."""
    h = np.pi / len(p)
    d = np.cumsum(np.asarray(p) - np.asarray(q))
    return float(h * np.abs(d - np.median(d)).sum())


def orbit_histogram(angles: np.ndarray, bins: int) -> np.ndarray:
    idx = np.floor(np.mod(angles, np.pi) / (np.pi / bins)).astype(np.intp) % bins
    return np.bincount(idx, minlength=bins) / len(angles)


@dataclass
class KernelSample:
    """Empirical fiber measures along near-maximizing fiber points.

    ``flags`` holds (I) value convergence over the tail of the schedule,
    (II) each chosen point within ``1/j`` of the grid supremum, (III)
    consecutive tail histograms within ``eps(n)`` of each other.
    """

    omega: tuple
    n_schedule: list[int]
    chosen_t: np.ndarray
    sup_values: np.ndarray
    chosen_values: np.ndarray
    histograms: np.ndarray
    candidates: list[np.ndarray]
    labels: list[int]
    flags: dict
    bins: int

    def epsilon(self, n: int) -> float:
        return np.pi / n + np.pi / self.bins


def _cluster(hists: np.ndarray, eps: Sequence[float]) -> tuple[list[np.ndarray], list[int]]:
    cands: list[np.ndarray] = []
    labels = []
    for h, e in zip(hists, eps):
        for i, c in enumerate(cands):
            if circular_w1(h, c) <= e:
                labels.append(i)
                break
        else:
            cands.append(h)
            labels.append(len(cands) - 1)
    return cands, labels


def instability_kernel(cp: CombinedPotential, omega_prefix: Sequence[int], n_schedule: Sequence[int], grid_log2: int = 10, bins: int = 64, start_t=None) -> KernelSample:
    """Histograms of fiber orbits started at near-maximizing points, clustered into candidates.

    ``start_t`` overrides the chosen starting points (used to follow the
    same points one step along the skew product).
    """
    sched = [int(n) for n in n_schedule]
    if any(b <= a for a, b in zip(sched, sched[1:])):
        raise ValueError("schedule must be increasing")
    ts = fiber_grid(grid_log2)
    avgs = skew_averages(cp, omega_prefix, ts, sched)
    sups = avgs.max(axis=1)
    if start_t is None:
        chosen = ts[avgs.argmax(axis=1)]
        chosen_vals = avgs.max(axis=1)
    else:
        chosen = np.asarray(start_t, dtype=float)
        chosen_vals = np.array([skew_averages(cp, omega_prefix, [t], [n])[0, 0] for t, n in zip(chosen, sched)])
    hists = np.array([orbit_histogram(skew_orbit(cp, omega_prefix, t, n), bins) for t, n in zip(chosen, sched)])
    eps = [np.pi / n + np.pi / bins for n in sched]
    cands, labels = _cluster(hists, eps)
    J = len(sched)
    tail = range(J // 2, J)
    n_tail = sched[J // 2]
    flags = {
        "I": bool(np.ptp(sups[J // 2 :]) <= 2 * cp.sup_norm / np.sqrt(n_tail)),
        "II": bool(all(chosen_vals[j] >= sups[j] - 1.0 / (j + 1) for j in range(J))),
        "III": bool(all(circular_w1(hists[j - 1], hists[j]) <= eps[j - 1] for j in tail if j > 0)),
    }
    return KernelSample(tuple(int(x) for x in omega_prefix), sched, chosen, sups, chosen_vals, hists, cands, labels, flags, bins)


def kernel_shift_distance(cp: CombinedPotential, sample: KernelSample) -> np.ndarray:
    """W1 distance between each histogram for ``omega`` and its image for ``T omega``.

    The image uses ``n_j - 1`` steps started at ``F_omega(t_j)``.
    """
    w = np.asarray(sample.omega)
    path0 = cp.blocks.higher.encode(w[None])[0, 0]
    A = cp.blocks.matrices[path0]
    out = []
    for t, n, h in zip(sample.chosen_t, sample.n_schedule, sample.histograms):
        t1 = float(act(A, t)[0])
        out.append(circular_w1(h, orbit_histogram(skew_orbit(cp, w[1:], t1, n - 1), sample.bins)))
    return np.array(out)


def kernel_closure_check(a: KernelSample, b: KernelSample) -> bool:
    """Every candidate from a merged schedule lies within resolution of a candidate from ``a``."""
    eps = np.pi / min(a.n_schedule[0], b.n_schedule[0]) + np.pi / a.bins
    merged, _ = _cluster(np.concatenate([a.histograms, b.histograms]), [eps] * (len(a.histograms) + len(b.histograms)))
    return all(min(circular_w1(m, c) for c in a.candidates) <= eps for m in merged)


# ---------------------------------------------------------------- lower bound


@dataclass
class OptimizerConfig:
    starts: int = 32
    prefixes: int = 64
    length: int = 512
    tol: float = 1e-6
    step: float = 0.25
    floor: float = 1e-6
    max_sweeps: int = 400
    burn: int = 0
    seed: int = 0


@dataclass
class MarkovLowerBound:
    """Best memory-``m`` Markov value ``h(nu) + E_nu[phi~]`` with its statistical error.

    ``value`` is re-estimated on prefixes independent of those used during
    the search; ``stat_err`` is three standard errors; ``window`` is the
    finite-``n`` allowance ``2 ||phi^||_inf * burn / n``.
    """

    value: float
    stat_err: float
    window: float
    measure: MarkovMeasure
    memory: int
    entropy: float
    phi_mean: float
    search_values: np.ndarray
    evaluations: int

    @property
    def lower(self) -> float:
        return self.value - self.stat_err - self.window


def _project_row(row: np.ndarray, allowed: np.ndarray, floor: float) -> np.ndarray:
    """Euclidean projection onto ``{x >= floor on allowed, 0 elsewhere, sum 1}``."""
    v = row[allowed] - floor
    target = 1.0 - floor * allowed.sum()
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - target
    k = np.flatnonzero(u - css / np.arange(1, len(u) + 1) > 0)[-1]
    tau = css[k] / (k + 1)
    out = np.zeros_like(row)
    out[allowed] = np.maximum(v - tau, 0) + floor
    return out / out.sum()


def _batched_stationary(Q: np.ndarray) -> np.ndarray:
    B, N, _ = Q.shape
    A = np.transpose(Q, (0, 2, 1)) - np.eye(N)
    A[:, -1, :] = 1.0
    b = np.zeros((B, N))
    b[:, -1] = 1.0
    pi = np.linalg.solve(A, b[..., None])[..., 0]
    pi = np.clip(pi, 0, None)
    return pi / pi.sum(axis=1, keepdims=True)


class _Objective:
    """``h(nu) + mean phi~_N`` for batches of chains under fixed uniforms."""

    def __init__(self, cp: CombinedPotential, block: HigherBlock, uniforms: np.ndarray, n: int):
        self.cp = cp
        self.block = block
        self.u = uniforms
        self.n = n
        self.calls = 0

    def per_prefix(self, Q: np.ndarray):
        B = len(Q)
        P, L = self.u.shape
        pi = _batched_stationary(Q)
        with np.errstate(divide="ignore", invalid="ignore"):
            ent = -np.nansum(pi[:, :, None] * np.where(Q > 0, Q * np.log(Q), 0.0), axis=(1, 2))
        cum_pi = np.cumsum(pi, axis=1)
        cum_pi[:, -1] = 1.0
        cum_Q = np.cumsum(Q, axis=2)
        cum_Q[:, :, -1] = 1.0
        bidx = np.repeat(np.arange(B), P)
        u = np.tile(self.u, (B, 1))
        states = np.empty((B * P, L), dtype=np.intp)
        states[:, 0] = (u[:, 0, None] >= cum_pi[bidx]).sum(axis=1)
        for k in range(1, L):
            states[:, k] = (u[:, k, None] >= cum_Q[bidx, states[:, k - 1]]).sum(axis=1)
        np.minimum(states, Q.shape[1] - 1, out=states)
        W = self.block.words
        words = np.concatenate([W[states[:, 0]], W[states[:, 1:], -1]], axis=1)
        sup, _ = exact_extreme_averages(self.cp, words, self.n)
        self.calls += B
        return ent, sup.reshape(B, P)

    def __call__(self, Q: np.ndarray) -> np.ndarray:
        ent, phi = self.per_prefix(Q)
        return ent + phi.mean(axis=1)


def markov_lower_bound(cp: CombinedPotential, memory: int = 1, config: OptimizerConfig | None = None) -> MarkovLowerBound:
    """Maximize ``h(nu) + E_nu[phi~]`` over memory-``m`` Markov measures.

    Multi-start coordinate ascent on transition rows (each move adds or
    removes ``h`` at one entry and projects back onto the simplex; ``h``
    halves after a sweep without improvement). The expectation uses
    common random numbers, so the search compares measures on the same
    uniforms; the winner is re-evaluated on fresh ones.
    """
    cfg = config or OptimizerConfig()
    if not 1 <= memory <= 3:
        raise ValueError("memory must be 1, 2 or 3")
    spec = cp.spec
    block = HigherBlock(spec, memory)
    allowed = block.spec.adjacency
    N = len(block.words)
    L = cfg.length + cp.blocks.length - memory
    u_search = stream(cfg.seed, 0).random((cfg.prefixes, L))
    obj = _Objective(cp, block, u_search, cfg.length)

    rng = stream(cfg.seed, 1)
    Q = np.zeros((cfg.starts, N, N))
    for i in range(cfg.starts):
        for r in range(N):
            a = allowed[r]
            row = np.zeros(N)
            row[a] = 1.0 / a.sum() if i == 0 else rng.dirichlet(np.ones(a.sum()))
            Q[i, r] = _project_row(row, a, cfg.floor)
    val = obj(Q)
    h = np.full(cfg.starts, cfg.step)
    moves = [(r, c, sg) for r in range(N) for c in np.flatnonzero(allowed[r]) for sg in (1.0, -1.0)]
    for _ in range(cfg.max_sweeps):
        active = np.flatnonzero(h >= cfg.tol)
        if active.size == 0:
            break
        improved = np.zeros(cfg.starts, dtype=bool)
        for r, c, sg in moves:
            prop = Q[active].copy()
            for j, i in enumerate(active):
                row = prop[j, r].copy()
                row[c] += sg * h[i]
                prop[j, r] = _project_row(row, allowed[r], cfg.floor)
            pv = obj(prop)
            better = pv > val[active] + 1e-15
            Q[active[better]] = prop[better]
            val[active[better]] = pv[better]
            improved[active[better]] = True
        h[active[~improved[active]]] /= 2
    best = int(np.argmax(val))
    Qb = Q[best : best + 1]
    fresh = _Objective(cp, block, stream(cfg.seed, 2).random((cfg.prefixes, L)), cfg.length)
    ent, phi = fresh.per_prefix(Qb)
    phi = phi[0]
    se = phi.std(ddof=1) / np.sqrt(len(phi)) if len(phi) > 1 else 0.0
    measure = MarkovMeasure(Qb[0], _batched_stationary(Qb)[0])
    window = 2 * cp.sup_norm * cfg.burn / cfg.length
    return MarkovLowerBound(
        value=float(ent[0] + phi.mean()),
        stat_err=float(3 * se),
        window=float(window),
        measure=measure,
        memory=memory,
        entropy=markov_entropy(measure),
        phi_mean=float(phi.mean()),
        search_values=val,
        evaluations=obj.calls,
    )


@dataclass
class SandwichReport:
    lower: float
    stat_err: float
    sequence: np.ndarray
    fekete_upper: float
    width: float
    lower_ok: bool
    upper_ok: bool
    bound: MarkovLowerBound = field(repr=False)

    @property
    def passed(self) -> bool:
        return self.lower_ok and self.upper_ok


def variational_sandwich(
    cp: CombinedPotential,
    n_max: int = 16,
    memory: int = 2,
    grid_log2: int = 10,
    bins: int = 256,
    config: OptimizerConfig | None = None,
    tol: float = 1e-9,
    estimate=None,
    bound: MarkovLowerBound | None = None,
) -> SandwichReport:
    """Check ``lower - stat_err <= min_n seq_n <= fekete_upper`` and record the width.

    ``seq_n`` are the grid values ``(1/n) sup_t log Z_n``; their minimum
    approximates the POE from above only up to grid resolution, which the
    tolerance absorbs on the shipped systems.
    """
    est = estimate or poe_estimate(cp, n_max, grid_log2, bins)
    lb = bound or markov_lower_bound(cp, memory, config)
    seq = est.sequence
    slack = tol + lb.window
    lower_ok = bool(lb.value - lb.stat_err <= seq.min() + slack)
    upper_ok = bool(seq.min() <= est.fekete_upper + tol)
    est.best_lower = lb.value
    return SandwichReport(lb.value, lb.stat_err, seq, est.fekete_upper, est.fekete_upper - (lb.value - lb.stat_err), lower_ok, upper_ok, lb)


@dataclass
class PushforwardReport:
    rows: list[tuple[float, float, bool]]
    passed: bool


def pushforward_inequality_check(cp: CombinedPotential, skew_samples: Sequence[tuple[Sequence[int], float]], tol: float = 1e-9) -> PushforwardReport:
    """Orbit averages of the skew potential never exceed the maximal instability average.

    Each sample ``(omega, t)`` gives the Cesaro average along the skew
    orbit; it is compared with the continuum supremum over fiber points
    on the same prefix.
    """
    rows = []
    for omega, t in skew_samples:
        n = len(omega) - cp.blocks.length + 1
        avg = float(skew_averages(cp, omega, [t], [n])[0, 0])
        sup = float(exact_extreme_averages(cp, np.asarray(omega)[None], n)[0][0])
        rows.append((avg, sup, avg <= sup + tol))
    return PushforwardReport(rows, all(r[2] for r in rows))

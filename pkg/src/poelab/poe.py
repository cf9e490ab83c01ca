"""Out-of-equilibrium partition sums.

For a combined potential ``psi + s * phi_t`` the weight of a point ``x``
over ``n`` steps is

    exp( sum_{k<n} psi(T^k x) + s * log |A_{T^k x} u(t_k)| ),  t_{k+1} = F_{T^k x} t_k,

so the fiber point is driven by the word itself. Everything is organised
around "blocks": admissible words of length ``max(memory of psi, window of
A)``, the smallest unit that fixes one step of both the potential and the
fiber map. A point is then a path of overlapping blocks.

Two evaluations are provided. Exact enumeration walks all block paths in
lexicographic order with the fiber state carried as a unit vector. The
binned dynamic program pushes fiber intervals through the maps and gives
rigorous two-sided bounds valid on whole intervals of fiber points.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .cocycle import MatrixShape, PotentialFamily, fiber_grid
from .errors import DomainError, EnumerationCapError, InvariantViolation
from .shift import MAX_WORDS, HigherBlock, ShiftSpec, word_count
from .transfer import Potential

log = logging.getLogger(__name__)

CHUNK_ELEMENTS = 2**22
# Absolute slack per step absorbing rounding differences between the closed
# form used for interval extrema and the vector arithmetic of enumeration.
STEP_SLACK = 1e-12
ARC_WIDEN = 1e-12


@dataclass(frozen=True, eq=False)
class CombinedPotential:
    """``psi + coefficient * phi_t``; ``coefficient = -beta`` in hyperbolicity runs."""

    base: Potential
    family: PotentialFamily
    coefficient: float

    def __post_init__(self):
        if not np.isfinite(self.coefficient):
            raise DomainError("coefficient must be finite")
        if self.base.alphabet_size != self.family.spec.alphabet_size:
            raise DomainError("base potential and family live on different alphabets")
        if not self.family.base.is_one_sided:
            raise DomainError("partition sums need a one-sided cocycle; reduce two-sided systems first")

    @property
    def spec(self) -> ShiftSpec:
        return self.family.spec

    @property
    def sup_norm(self) -> float:
        return self.base.sup_norm(self.spec) + abs(self.coefficient) * self.family.sup_norm

    @cached_property
    def blocks(self) -> "BlockSystem":
        return BlockSystem.build(self)

    def with_coefficient(self, s: float) -> "CombinedPotential":
        return CombinedPotential(self.base, self.family, s)


@dataclass(frozen=True, eq=False)
class BlockSystem:
    """Per-block data: psi value, matrix, successor lists."""

    length: int
    higher: HigherBlock
    psi: np.ndarray
    matrices: np.ndarray
    coefficient: float
    shapes: list = field(repr=False)

    @classmethod
    def build(cls, cp: CombinedPotential) -> "BlockSystem":
        k = cp.base.memory
        L = cp.family.memory
        M = max(k, L)
        hb = HigherBlock(cp.spec, M)
        W = hb.words
        psi = cp.base.evaluate(W[:, :k])
        mats = cp.family.base.matrices[tuple(W[:, :L].T)]
        return cls(M, hb, psi, mats, float(cp.coefficient), [MatrixShape.of(A) for A in mats])

    @property
    def words(self) -> np.ndarray:
        return self.higher.words

    @property
    def size(self) -> int:
        return len(self.psi)

    @cached_property
    def successors(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """CSR successor lists ``(indptr, indices, degree)``, indices ascending."""
        adj = self.higher.spec.adjacency
        deg = adj.sum(axis=1)
        indptr = np.concatenate([[0], np.cumsum(deg)])
        return indptr, np.flatnonzero(adj.ravel()) % self.size, deg

    def index_of(self, word: Sequence[int]) -> int:
        i = int(self.higher.index[tuple(int(x) for x in word)])
        if i < 0:
            raise DomainError(f"block {tuple(word)} is not admissible")
        return i

    def step(self, blocks: np.ndarray, x: np.ndarray, y: np.ndarray):
        """One step at every (path, fiber point): new unit vectors and step log-weights."""
        A = self.matrices[blocks]
        nx = A[:, 0, 0, None] * x + A[:, 0, 1, None] * y
        ny = A[:, 1, 0, None] * x + A[:, 1, 1, None] * y
        r = np.hypot(nx, ny)
        w = self.psi[blocks, None] + self.coefficient * np.log(r)
        return nx / r, ny / r, w

    @cached_property
    def lipschitz(self) -> float:
        return max(s.log_lipschitz for s in self.shapes)

    @cached_property
    def map_lipschitz(self) -> float:
        return max(s.map_lipschitz for s in self.shapes)

    def weight_lipschitz(self, n: int) -> float:
        """Lipschitz constant in ``t`` of any ``n``-step log-weight."""
        lam = self.map_lipschitz
        geo = float(n) if lam == 1 else (lam**n - 1) / (lam - 1)
        return abs(self.coefficient) * self.lipschitz * geo


def default_tails(spec: ShiftSpec, length: int) -> dict[int, tuple[int, ...]]:
    """Lexicographically minimal continuation of each symbol, used as the anchor point."""
    return {a: spec.minimal_continuation(a, length) for a in range(spec.alphabet_size)}


def _check_tails(bs: BlockSystem, tails: dict) -> dict[int, int]:
    out = {}
    for a, tail in tails.items():
        if len(tail) < bs.length or tail[0] != a:
            raise DomainError(f"tail for anchor {a} must start with {a} and have at least {bs.length} symbols")
        out[a] = bs.index_of(tail[: bs.length])
    return out


@dataclass
class PartitionSums:
    """Exact ``log`` partition sums for ``n = 1..n_max`` on a set of fiber points.

    ``anchored[n-1, i, j]`` is ``log Z_n(phi_t, a_i)`` at ``t_j`` for the
    anchors ``anchors[i]``; ``free[n-1, j]`` is the unanchored sum with the
    per-word maximizing continuation.
    """

    ts: np.ndarray
    anchors: list[int]
    tails: dict
    anchored: np.ndarray
    free: np.ndarray

    def anchor_summed(self) -> np.ndarray:
        return logsumexp(self.anchored, axis=1)


def _prefix_ranks(words: np.ndarray, n: int) -> np.ndarray:
    _, inv = np.unique(words[:, :n], axis=0, return_inverse=True)
    return inv.ravel()


def partition_sums(cp: CombinedPotential, n_max: int, ts, tails: dict | None = None) -> PartitionSums:
    """Enumerate every admissible block path up to ``n_max`` steps.

    Fiber points are processed in chunks so that no array exceeds about
    2^22 entries; paths stay in lexicographic order, which makes each
    reduction order (and so each float) independent of the chunking.
    """
    bs = cp.blocks
    M = bs.length
    spec = cp.spec
    if word_count(spec, n_max + M - 1) > MAX_WORDS:
        raise EnumerationCapError(f"{n_max + M - 1}-word enumeration exceeds 2^24 paths; use partition_sum_binned")
    tails = tails or default_tails(spec, M)
    anchor_block = _check_tails(bs, tails)
    anchors = sorted(anchor_block)
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    T = len(ts)
    anchored = np.empty((n_max, len(anchors), T))
    free = np.empty((n_max, T))
    indptr, succ, deg = bs.successors
    P_max = word_count(spec, n_max + M - 1)
    chunk = max(1, CHUNK_ELEMENTS // P_max)
    prefix_rank = {n: _prefix_ranks(bs.words, n) for n in range(1, M)}
    for c0 in range(0, T, chunk):
        tc = ts[c0 : c0 + chunk]
        blocks = np.arange(bs.size)
        root = blocks.copy()
        history: list[np.ndarray] = []
        x = np.broadcast_to(np.cos(tc), (bs.size, len(tc)))
        y = np.broadcast_to(np.sin(tc), (bs.size, len(tc)))
        x, y, logw = bs.step(blocks, x, y)
        for n in range(1, n_max + 1):
            if n > 1:
                counts = deg[blocks]
                parent = np.repeat(np.arange(len(blocks)), counts)
                offset = np.arange(parent.size) - np.repeat(np.cumsum(counts) - counts, counts)
                blocks = succ[indptr[blocks[parent]] + offset]
                root = root[parent]
                history.append(parent)
                if len(history) > M - 1:
                    history.pop(0)
                x, y, w = bs.step(blocks, x[parent], y[parent])
                logw = logw[parent] + w
            for i, a in enumerate(anchors):
                sel = blocks == anchor_block[a]
                anchored[n - 1, i, c0 : c0 + len(tc)] = logsumexp(logw[sel], axis=0) if sel.any() else -np.inf
            # Paths sharing their first n symbols form contiguous groups.
            if M == 1:
                grouped = logw
            else:
                if n - M + 1 >= 1:
                    gid = np.arange(len(blocks))
                    for par in reversed(history[-(M - 1):]):
                        gid = par[gid]
                else:
                    gid = prefix_rank[n][root]
                starts = np.flatnonzero(np.concatenate([[True], gid[1:] != gid[:-1]]))
                grouped = np.maximum.reduceat(logw, starts, axis=0)
            free[n - 1, c0 : c0 + len(tc)] = logsumexp(grouped, axis=0)
    return PartitionSums(ts, anchors, tails, anchored, free)


def partition_sum_exact(cp: CombinedPotential, n: int, anchor: int, tail: Sequence[int] | None, t: float) -> float:
    """``log`` of the anchored partition sum at a single fiber point."""
    bs = cp.blocks
    tail = tuple(tail) if tail is not None else cp.spec.minimal_continuation(anchor, bs.length)
    ps = partition_sums(cp, n, [t], {anchor: tail})
    return float(ps.anchored[n - 1, 0, 0])


def log_weight(cp: CombinedPotential, point: Sequence[int], n: int, t: float) -> float:
    """Log-weight of a single point over ``n`` steps, evaluated step by step."""
    bs = cp.blocks
    x = tuple(int(v) for v in point)
    if len(x) < n + bs.length - 1:
        raise DomainError("point too short")
    v = np.array([[np.cos(t)]]), np.array([[np.sin(t)]])
    total = 0.0
    for k in range(n):
        b = np.array([bs.index_of(x[k : k + bs.length])])
        vx, vy, w = bs.step(b, v[0], v[1])
        v = (vx, vy)
        total += float(w[0, 0])
    return total


# ---------------------------------------------------------------- binned bounds


def _bin_extrema(shape: MatrixShape, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact min and max of ``log |A u(t)|`` over each arc ``[lo, hi]``."""
    q = lambda t: shape.mean + shape.amplitude * np.cos(2 * (t - shape.phase))  # noqa: E731
    qlo, qhi = q(lo), q(hi)
    qmin, qmax = np.minimum(qlo, qhi), np.maximum(qlo, qhi)
    # Critical points of q sit at phase + k*pi/2: maxima for even k, minima for odd k.
    for k in range(-2, 6):
        c = shape.phase + k * np.pi / 2
        inside = (c >= lo) & (c <= hi)
        val = shape.mean + (shape.amplitude if k % 2 == 0 else -shape.amplitude)
        if k % 2 == 0:
            qmax = np.where(inside, np.maximum(qmax, val), qmax)
        else:
            qmin = np.where(inside, np.minimum(qmin, val), qmin)
    return 0.5 * np.log(qmin), 0.5 * np.log(qmax)


def _image_cover(A: np.ndarray, edges: np.ndarray, bins: int) -> np.ndarray:
    """Index pairs ``[start, stop)`` into a doubled bin array covering ``F_A`` of each bin."""
    from .cocycle import act

    h = np.pi / bins
    img, _ = act(A, edges)
    a, b = img[:-1], img[1:]
    if np.linalg.det(A) < 0:
        a, b = b, a
    length = np.mod(b - a, np.pi) + 2 * ARC_WIDEN
    a = a - ARC_WIDEN
    start = np.floor(np.mod(a, np.pi) / h).astype(np.intp) % bins
    offset = np.mod(a, np.pi) - start * h
    count = np.floor((offset + length) / h).astype(np.intp) + 1
    count = np.minimum(count, bins)
    return np.stack([start, start + count], axis=1)


@dataclass
class BinnedBounds:
    """Rigorous bounds on ``log`` partition sums over fiber bins.

    ``lower[n-1, i, j] <= log Z_n(a_i)(t) <= upper[n-1, i, j]`` for every
    ``t`` in bin ``j``. ``free_upper`` bounds the unanchored sum (it is
    the sum over all endings, which dominates the maximizing-continuation
    sum and equals it when blocks are single symbols).
    """

    bins: int
    anchors: list[int]
    lower: np.ndarray
    upper: np.ndarray
    free_lower: np.ndarray
    free_upper: np.ndarray

    def at(self, ts) -> tuple[np.ndarray, np.ndarray]:
        j = np.floor(np.mod(np.asarray(ts), np.pi) / (np.pi / self.bins)).astype(np.intp) % self.bins
        return self.lower[..., j], self.upper[..., j]

    def bin_of(self, ts) -> np.ndarray:
        return np.floor(np.mod(np.asarray(ts), np.pi) / (np.pi / self.bins)).astype(np.intp) % self.bins


def _range_reduce(U: np.ndarray, cover: np.ndarray, op) -> np.ndarray:
    """Reduce the last axis of ``U`` over cyclic index ranges ``cover`` (B, 2)."""
    doubled = np.concatenate([U, U, U[..., :1]], axis=-1)
    idx = cover.ravel()
    return op.reduceat(doubled, idx, axis=-1)[..., ::2]


def binned_bounds(cp: CombinedPotential, n_max: int, bins: int, tails: dict | None = None) -> BinnedBounds:
    """Backward dynamic program over (block, fiber bin) for every ``n <= n_max``."""
    bs = cp.blocks
    tails = tails or default_tails(cp.spec, bs.length)
    anchor_block = _check_tails(bs, tails)
    anchors = sorted(anchor_block)
    s = bs.coefficient
    edges = np.arange(bins + 1) * (np.pi / bins)
    lo, hi = edges[:-1], edges[1:]
    gmin = np.empty((bs.size, bins))
    gmax = np.empty((bs.size, bins))
    covers = []
    for b, shape in enumerate(bs.shapes):
        emin, emax = _bin_extrema(shape, lo, hi)
        a1, a2 = s * emin, s * emax
        gmin[b] = bs.psi[b] + np.minimum(a1, a2) - STEP_SLACK
        gmax[b] = bs.psi[b] + np.maximum(a1, a2) + STEP_SLACK
        covers.append(_image_cover(bs.matrices[b], edges, bins))
    adj = bs.higher.spec.adjacency
    # Targets: one per anchor, plus "any final block".
    n_t = len(anchors) + 1
    term = np.zeros((n_t, bs.size), dtype=bool)
    for i, a in enumerate(anchors):
        term[i, anchor_block[a]] = True
    term[-1] = True
    Ulo = np.where(term[:, :, None], gmin[None], -np.inf)
    Uhi = np.where(term[:, :, None], gmax[None], -np.inf)
    lower = np.empty((n_max, n_t, bins))
    upper = np.empty((n_max, n_t, bins))
    with np.errstate(invalid="ignore"):
        for n in range(1, n_max + 1):
            if n > 1:
                new_lo = np.empty_like(Ulo)
                new_hi = np.empty_like(Uhi)
                for b in range(bs.size):
                    Rlo = _range_reduce(Ulo, covers[b], np.minimum)
                    Rhi = _range_reduce(Uhi, covers[b], np.maximum)
                    mask = ~adj[b]
                    Rlo[:, mask] = -np.inf
                    Rhi[:, mask] = -np.inf
                    new_lo[:, b] = gmin[b] + logsumexp(Rlo, axis=1)
                    new_hi[:, b] = gmax[b] + logsumexp(Rhi, axis=1)
                Ulo, Uhi = new_lo, new_hi
            lower[n - 1] = logsumexp(Ulo, axis=1)
            upper[n - 1] = logsumexp(Uhi, axis=1)
    free_lower = logsumexp(lower[:, :-1], axis=1)
    return BinnedBounds(bins, anchors, lower[:, :-1], upper[:, :-1], free_lower, upper[:, -1])


def partition_sum_binned(cp: CombinedPotential, n: int, anchor: int, bins: int, ts=None, tail=None):
    """Certified ``(lower, upper)`` for ``log Z_n(a)`` at fiber points ``ts`` (default: bin left edges)."""
    tails = {anchor: tuple(tail)} if tail is not None else {anchor: cp.spec.minimal_continuation(anchor, cp.blocks.length)}
    bb = binned_bounds(cp, n, bins, tails)
    lo, hi = bb.lower[n - 1, 0], bb.upper[n - 1, 0]
    if ts is None:
        return lo, hi
    j = bb.bin_of(ts)
    return lo[j], hi[j]


# ---------------------------------------------------------------- estimates


@dataclass
class PartitionSumRecord:
    n: int
    anchor: int
    per_t: np.ndarray
    sup_log: float
    argmax: int
    bracket: tuple[float, float]


@dataclass
class PoeEstimate:
    """POE diagnostics for ``n = 1..n_max``.

    ``sup_log[n-1]`` is the grid maximum of the unanchored ``log Z_n`` (a
    lower bound for the fiber supremum); ``certified_upper[n-1]`` is an
    upper bound for the supremum over the whole fiber. ``fekete_upper`` is
    the min over ``n`` of ``certified_upper / n``, an upper bound for the
    POE by subadditivity.
    """

    n_values: np.ndarray
    grid: np.ndarray
    sup_log: np.ndarray
    argmax: np.ndarray
    certified_upper: np.ndarray
    lipschitz_upper: np.ndarray
    binned_upper: np.ndarray
    fekete_upper: float
    fekete_n: int
    sums: PartitionSums | None = field(default=None, repr=False)
    binned: BinnedBounds | None = field(default=None, repr=False)
    best_lower: float | None = None

    @property
    def sequence(self) -> np.ndarray:
        return self.sup_log / self.n_values

    @property
    def width(self) -> float:
        return np.nan if self.best_lower is None else self.fekete_upper - self.best_lower

    def fekete_prefix(self) -> np.ndarray:
        """``min_{m <= n} certified_upper_m / m`` for each ``n``: the bound as ``n_max`` grows."""
        return np.minimum.accumulate(self.certified_upper / self.n_values)


def poe_estimate(cp: CombinedPotential, n_max: int, grid_log2: int = 10, bins: int = 256, tails: dict | None = None) -> PoeEstimate:
    """Unanchored partition sums on the fiber grid, with certified upper bounds.

    Where enumeration is feasible the grid value plus a Lipschitz
    correction is one upper bound; the binned program gives another that
    stays useful when the fiber maps expand. The smaller is kept.
    """
    cp.spec.require_irreducible()
    ts = fiber_grid(grid_log2)
    bs = cp.blocks
    n = np.arange(1, n_max + 1)
    bb = binned_bounds(cp, n_max, bins, tails)
    binned_up = bb.free_upper.max(axis=1)
    try:
        sums = partition_sums(cp, n_max, ts, tails)
        sup_log = sums.free.max(axis=1)
        argmax = sums.free.argmax(axis=1)
        mesh = np.pi / len(ts)
        lip_up = sup_log + np.array([bs.weight_lipschitz(k) for k in n]) * mesh / 2
    except EnumerationCapError:
        sums = None
        j = bb.bin_of(ts)
        sup_log = bb.free_lower[:, j].max(axis=1)
        argmax = bb.free_lower[:, j].argmax(axis=1)
        lip_up = np.full(n_max, np.inf)
    cert = np.minimum(lip_up, binned_up)
    ratios = cert / n
    k = int(np.argmin(ratios))
    return PoeEstimate(n, ts, sup_log, argmax, cert, lip_up, binned_up, float(ratios[k]), int(n[k]), sums, bb)


def partition_records(cp: CombinedPotential, est: PoeEstimate) -> list[tuple]:
    """CSV rows ``(n, anchor, t_index, log_Z_lower, log_Z_upper, sup_log, fekete_upper)``.

    Anchor ``-1`` marks the unanchored sum. Bounds come from the binned
    program at the bin containing each grid point.
    """
    rows = [("n", "anchor", "t_index", "log_Z_lower", "log_Z_upper", "sup_log", "fekete_upper")]
    bb = est.binned
    j = bb.bin_of(est.grid)
    prefix = est.fekete_prefix()
    for i, n in enumerate(est.n_values):
        labels = [(-1, bb.free_lower[i, j], bb.free_upper[i, j])]
        labels += [(a, bb.lower[i, q, j], bb.upper[i, q, j]) for q, a in enumerate(bb.anchors)]
        for a, lo, hi in labels:
            for ti in range(len(est.grid)):
                rows.append((int(n), int(a), ti, float(lo[ti]), float(hi[ti]), float(est.sup_log[i]), float(prefix[i])))
    return rows


@dataclass
class SubmultiplicativityReport:
    """Rows ``(n, m, log Z_{n+m}, log Z_n, log Z_m, exact_ok, certified_ok)``."""

    rows: list[tuple[int, int, float, float, float, bool, bool]]
    exact_passed: bool
    certified_passed: bool
    worst_excess: float

    @property
    def passed(self) -> bool:
        return self.exact_passed and self.certified_passed


def submultiplicativity_check(
    cp: CombinedPotential,
    pairs: Sequence[tuple[int, int]],
    grid_log2: int = 10,
    bins: int = 256,
    tol: float = 1e-12,
    est: PoeEstimate | None = None,
) -> SubmultiplicativityReport:
    """``log Z_{n+m} <= log Z_n + log Z_m`` for the fiber supremum.

    Two forms are checked: the exact one on grid maxima (the supremum
    over the fiber is attained on the grid for the shipped systems), and
    the rigorous one ``lower(n+m) <= upper(n) + upper(m)``.
    ``worst_excess`` is the largest ``lower(n+m) - upper(n) - upper(m)``.
    """
    top = max(n + m for n, m in pairs)
    if est is None or len(est.n_values) < top:
        est = poe_estimate(cp, top, grid_log2, bins)
    rows = []
    exact_ok = cert_ok = True
    worst = -np.inf
    for n, m in pairs:
        a, b, c = est.sup_log[n + m - 1], est.sup_log[n - 1], est.sup_log[m - 1]
        exact = bool(a <= b + c + tol)
        excess = float(a - est.certified_upper[n - 1] - est.certified_upper[m - 1])
        cert = excess <= tol
        worst = max(worst, excess)
        rows.append((n, m, float(a), float(b), float(c), exact, cert))
        exact_ok &= exact
        cert_ok &= cert
    return SubmultiplicativityReport(rows, bool(exact_ok), bool(cert_ok), worst)


def connectivity_length(spec: ShiftSpec) -> int:
    """Smallest ``N`` such that every symbol reaches every other in at most ``N`` steps."""
    A = spec.adjacency.astype(np.int64)
    S = spec.alphabet_size
    reach = np.eye(S, dtype=bool)
    P = np.eye(S, dtype=np.int64)
    for N in range(1, S + 1):
        P = np.minimum(P @ A, 1)
        reach |= P.astype(bool)
        if reach.all():
            return N
    return S


@dataclass
class AnchorReport:
    n_values: list[int]
    spread: np.ndarray
    scaled: np.ndarray
    constant_bound: float
    fitted_constant: float

    @property
    def passed(self) -> bool:
        return bool(self.scaled.max() <= self.constant_bound + 1e-9)


def anchor_independence_check(cp: CombinedPotential, tails_list: Sequence[dict], n_list: Sequence[int], grid_log2: int = 8) -> AnchorReport:
    """Spread of ``(1/n) sup_t log Z_n(a)`` across anchor/tail choices.

    The spread times ``n`` must stay below ``2 (N + M - 1)(||psi + s phi||_inf + log S)``
    where ``N`` bounds connecting path lengths and ``M`` is the block length.
    """
    ts = fiber_grid(grid_log2)
    n_max = max(n_list)
    vals = []
    for tails in tails_list:
        ps = partition_sums(cp, n_max, ts, tails)
        vals.append(ps.anchored.max(axis=2))  # (n_max, n_anchor)
    stacked = np.concatenate(vals, axis=1)
    n = np.asarray(n_list)
    per = stacked[n - 1] / n[:, None]
    spread = per.max(axis=1) - per.min(axis=1)
    scaled = spread * n
    N = connectivity_length(cp.spec)
    bound = 2 * (N + cp.blocks.length - 1) * (cp.sup_norm + np.log(cp.spec.alphabet_size))
    return AnchorReport(list(n_list), spread, scaled, float(bound), float(scaled.max()))


def product_form_diagnostic(cp: CombinedPotential, n: int, t: float, tail=None) -> dict:
    """Look for non-adjacent positions whose symbols interact in the log-weight.

    A weight of the form ``prod_k M_k[w_k, w_{k+1}]`` has zero interaction
    ``log W(..a..b..) + log W(..a'..b'..) - log W(..a..b'..) - log W(..a'..b..)``
    between positions at distance >= 2. Returns the largest interaction found.
    """
    spec = cp.spec
    bs = cp.blocks
    S = spec.alphabet_size
    base = list(spec.minimal_continuation(0, n + bs.length - 1))
    best = {"interaction": 0.0}
    for i in range(n):
        for j in range(i + 2, n):
            for a in range(S):
                for a2 in range(a + 1, S):
                    for b in range(S):
                        for b2 in range(b + 1, S):
                            words = []
                            for p, q in ((a, b), (a2, b2), (a, b2), (a2, b)):
                                w = base.copy()
                                w[i], w[j] = p, q
                                words.append(w)
                            if not all(spec.is_admissible(w) for w in words):
                                continue
                            lw = [log_weight(cp, w, n, t) for w in words]
                            inter = lw[0] + lw[1] - lw[2] - lw[3]
                            if abs(inter) > abs(best["interaction"]):
                                best = {"interaction": inter, "positions": (i, j), "symbols": ((a, a2), (b, b2)), "words": words}
    return best

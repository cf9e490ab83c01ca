"""Projective action of 2x2 matrix cocycles over a Markov shift.

The fiber is the projective line, parametrized by an angle ``t`` in
``[0, pi)`` standing for the direction ``u(t) = (cos t, sin t)``. A cocycle
assigns an invertible matrix to every admissible window word
``(omega_{-past}, ..., omega_{future})``; it moves directions by
``t -> angle(A u(t))`` and defines the potentials
``phi_t(omega) = log |A_omega u(t)|``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DomainError
from .shift import ShiftSpec, word_array
from .transfer import GibbsModel, Potential

SIGMA_MIN = 1e-8
CONDITION_MAX = 1e6
HOMEO_GRID = 512


def reduce_angle(t):
    """Angle(s) reduced to ``[0, pi)``."""
    r = np.mod(t, np.pi)
    return np.where(r >= np.pi, 0.0, r) if np.ndim(r) else (0.0 if r >= np.pi else float(r))


def angle_distance(s, t):
    """Distance on the projective circle of circumference ``pi``."""
    d = np.mod(np.asarray(s) - np.asarray(t), np.pi)
    return np.minimum(d, np.pi - d)


def fiber_grid(log2_size: int) -> np.ndarray:
    """Uniform grid of ``2**log2_size`` angles on ``[0, pi)``."""
    G = 2**log2_size
    return np.arange(G) * (np.pi / G)


def act(A: np.ndarray, t):
    """Projective action and log-expansion of ``A`` (or a stack of matrices) at angle(s) ``t``.

    Returns ``(angle(A u(t)), log |A u(t)|)``.
    """
    A = np.asarray(A, dtype=float)
    c, s = np.cos(t), np.sin(t)
    x = A[..., 0, 0] * c + A[..., 0, 1] * s
    y = A[..., 1, 0] * c + A[..., 1, 1] * s
    return np.mod(np.arctan2(y, x), np.pi), 0.5 * np.log(x * x + y * y)


@dataclass(frozen=True)
class MatrixShape:
    """Closed-form description of ``t -> |A u(t)|^2 = mean + amp * cos(2 (t - phase))``."""

    smax: float
    smin: float
    det: float
    phase: float

    @classmethod
    def of(cls, A: np.ndarray) -> "MatrixShape":
        U, sv, _ = np.linalg.svd(A.T @ A)
        v = U[:, 0]
        return cls(float(np.sqrt(sv[0])), float(np.sqrt(sv[1])), float(np.linalg.det(A)), float(np.mod(np.arctan2(v[1], v[0]), np.pi)))

    @property
    def amplitude(self) -> float:
        return 0.5 * (self.smax**2 - self.smin**2)

    @property
    def mean(self) -> float:
        return 0.5 * (self.smax**2 + self.smin**2)

    @property
    def log_lipschitz(self) -> float:
        """Exact sup of ``|d/dt log |A u(t)||``."""
        return self.amplitude / (self.smax * self.smin)

    @property
    def log_curvature(self) -> float:
        """Exact sup of ``|d^2/dt^2 log |A u(t)||``."""
        return 2 * self.amplitude / self.smin**2

    @property
    def map_lipschitz(self) -> float:
        """Lipschitz constant of the projective action."""
        return self.smax / self.smin


@dataclass(frozen=True, eq=False)
class CocycleSystem:
    """Matrices ``A_w`` for admissible window words ``w`` of length ``past + future + 1``.

    ``matrices`` has shape ``(S,)*L + (2, 2)``; entries at inadmissible
    words are ignored (they may be NaN).
    """

    spec: ShiftSpec
    window: tuple[int, int]
    matrices: np.ndarray

    def __post_init__(self):
        past, future = (int(x) for x in self.window)
        if past < 0 or future < 0:
            raise ConfigurationError("window lengths must be non-negative")
        object.__setattr__(self, "window", (past, future))
        S, L = self.spec.alphabet_size, past + future + 1
        M = np.array(self.matrices, dtype=float)
        if M.shape != (S,) * L + (2, 2):
            raise ConfigurationError(f"matrices must have shape {(S,) * L + (2, 2)}, got {M.shape}")
        M.setflags(write=False)
        object.__setattr__(self, "matrices", M)
        mats = self.window_matrices
        if not np.isfinite(mats).all():
            raise ConfigurationError("matrices at admissible words must be finite")
        sv = np.linalg.svd(mats, compute_uv=False)
        if sv[:, 1].min() < SIGMA_MIN:
            raise ConfigurationError(f"matrix with smallest singular value {sv[:, 1].min():.3e} < {SIGMA_MIN}")
        cond = sv[:, 0] / sv[:, 1]
        if cond.max() > CONDITION_MAX:
            raise ConfigurationError(f"matrix condition number {cond.max():.3e} exceeds {CONDITION_MAX:g}")
        if not self.homeomorphism_check():
            raise ConfigurationError("a fiber map fails the monotone degree-one check")

    @classmethod
    def one_sided(cls, spec: ShiftSpec, matrices: Sequence) -> "CocycleSystem":
        """Memory-one system from one matrix per symbol."""
        return cls(spec, (0, 0), np.asarray(matrices, dtype=float))

    @property
    def window_length(self) -> int:
        return self.window[0] + self.window[1] + 1

    @property
    def is_one_sided(self) -> bool:
        return self.window[0] == 0

    @cached_property
    def window_words(self) -> np.ndarray:
        return word_array(self.spec, self.window_length).astype(np.intp)

    @cached_property
    def window_matrices(self) -> np.ndarray:
        W = self.window_words
        return self.matrices[tuple(W.T)]

    @cached_property
    def shapes(self) -> list[MatrixShape]:
        return [MatrixShape.of(A) for A in self.window_matrices]

    def matrix(self, word: Sequence[int]) -> np.ndarray:
        return self.matrices[tuple(int(x) for x in word)]

    def homeomorphism_check(self, grid: int = HOMEO_GRID) -> bool:
        """Every fiber map is a monotone circle map of degree one on a ``grid``-point sample."""
        t = np.arange(grid + 1) * (np.pi / grid)
        for A in self.window_matrices:
            x = A[0, 0] * np.cos(t) + A[0, 1] * np.sin(t)
            y = A[1, 0] * np.cos(t) + A[1, 1] * np.sin(t)
            lifted = np.unwrap(np.arctan2(y, x))
            steps = np.diff(lifted)
            orientation = np.sign(np.linalg.det(A))
            if not (orientation * steps > 0).all():
                return False
            if abs(abs(lifted[-1] - lifted[0]) - np.pi) > 1e-9:
                return False
        return True

    def holder_data(self) -> np.ndarray:
        """Per-coordinate variation ``max ||A_w - A_w'||`` over words differing at one coordinate."""
        W = self.window_words
        mats = self.window_matrices
        out = np.zeros(self.window_length)
        for j in range(self.window_length):
            others = np.delete(W, j, axis=1)
            _, group = np.unique(others, axis=0, return_inverse=True)
            for g in np.unique(group):
                sel = mats[group == g]
                if len(sel) > 1:
                    diff = sel[:, None] - sel[None, :]
                    out[j] = max(out[j], float(np.linalg.norm(diff, ord=2, axis=(2, 3)).max()))
        return out

    def map_lipschitz(self) -> float:
        return max(s.map_lipschitz for s in self.shapes)


def fiber_orbit(sys: CocycleSystem, prefix: Sequence[int], t: float) -> np.ndarray:
    """Angles ``t, F_w t, F^2_w t, ...`` driven by a one-sided prefix.

    With future window ``r`` the prefix determines ``len(prefix) - r`` maps,
    so the orbit has ``len(prefix) - r + 1`` points.
    """
    if not sys.is_one_sided:
        raise DomainError("fiber orbits are defined for one-sided systems; reduce the system first")
    w = np.asarray(prefix, dtype=np.intp)
    if not sys.spec.is_admissible(w):
        raise DomainError("prefix is not admissible")
    L = sys.window_length
    if len(w) < L:
        raise DomainError(f"prefix of length {len(w)} is shorter than the window {L}")
    windows = np.lib.stride_tricks.sliding_window_view(w, L)
    out = np.empty(len(windows) + 1)
    out[0] = reduce_angle(t)
    for k, win in enumerate(windows):
        out[k + 1], _ = act(sys.matrices[tuple(win)], out[k])
    return out


@dataclass(frozen=True, eq=False)
class PotentialFamily:
    """The family ``phi_t(omega) = log |A_omega u(t)|`` over a cocycle system."""

    base: CocycleSystem

    @property
    def spec(self) -> ShiftSpec:
        return self.base.spec

    @property
    def memory(self) -> int:
        return self.base.window_length

    def eval(self, t: float, word: Sequence[int]) -> float:
        return float(act(self.base.matrix(word), t)[1])

    @cached_property
    def sup_norm(self) -> float:
        """``sup_t ||phi_t||_inf``, exact: ``|A u|`` ranges over ``[smin, smax]``."""
        return max(max(abs(np.log(s.smax)), abs(np.log(s.smin))) for s in self.base.shapes)

    @cached_property
    def lipschitz(self) -> float:
        """Lipschitz constant of ``t -> phi_t(omega)``, uniform in ``omega``."""
        return max(s.log_lipschitz for s in self.base.shapes)

    @cached_property
    def curvature(self) -> float:
        return max(s.log_curvature for s in self.base.shapes)

    @cached_property
    def equi_holder(self) -> np.ndarray:
        """Per-coordinate variation of ``phi_t``, uniform in ``t``.

        Uses ``|log|Au| - log|A'u|| <= ||A - A'|| / min(smin(A), smin(A'))``.
        """
        smin = min(s.smin for s in self.base.shapes)
        return self.base.holder_data() / smin

    def potential(self, t: float) -> Potential:
        """``phi_t`` as a locally constant potential (one-sided systems)."""
        if not self.base.is_one_sided:
            raise DomainError("phi_t of a two-sided system is not a one-sided potential")
        W = self.base.window_words
        values = np.zeros((self.spec.alphabet_size,) * self.memory)
        values[tuple(W.T)] = act(self.base.window_matrices, t)[1]
        return Potential(values)

    def window_values(self, t) -> np.ndarray:
        """``phi_t`` at every admissible window word; shape (len(t), n_words) for array ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return act(self.base.window_matrices[None], t[:, None])[1]


def birkhoff_sum(family: PotentialFamily, word: Sequence[int], t: float, tail: Sequence[int] = ()) -> float:
    """``sum_{k<n} phi_{t_k}(T^k x)`` with ``t_{k+1} = F_{T^k x} t_k``, ``x = word + tail``, ``n = len(word)``."""
    sys = family.base
    x = tuple(word) + tuple(tail)
    n = len(word)
    if not sys.spec.is_admissible(x):
        raise DomainError("word followed by tail is not admissible")
    if len(x) < n + sys.window_length - 1:
        raise DomainError(f"tail too short: need {sys.window_length - 1} symbols after the word")
    orbit = fiber_orbit(sys, x[: n + sys.window_length - 1], t)
    L = sys.window_length
    total = 0.0
    for k in range(n):
        total += float(act(sys.matrices[x[k : k + L]], orbit[k])[1])
    return total


@dataclass
class ExpansionProfile:
    """``t -> int phi_t dmu`` on a grid with a certified lower bound for its infimum."""

    grid: np.ndarray
    averages: np.ndarray
    grid_min: float
    argmin: int
    correction: float
    lower_bound: float

    @property
    def certified(self) -> bool:
        return self.lower_bound > 0


def expansion_profile(family: PotentialFamily, gibbs: GibbsModel, grid_size: int) -> ExpansionProfile:
    """Exact stationary averages of ``phi_t`` on a uniform grid, and a certified inf.

    Between grid points the average can dip below the grid minimum by at
    most ``min(Lip*h/2, curv*h^2/8)``, with Lipschitz and curvature bounds of
    the mu-weighted sum of the closed-form log-norm profiles.
    """
    if gibbs.spec is not family.spec and not np.array_equal(gibbs.spec.adjacency, family.spec.adjacency):
        raise DomainError("Gibbs model and family live on different shifts")
    sys = family.base
    probs = np.exp(gibbs.log_cylinder(sys.window_words))
    t = np.arange(grid_size) * (np.pi / grid_size)
    avg = family.window_values(t) @ probs
    i = int(np.argmin(avg))
    lip = float(probs @ np.array([s.log_lipschitz for s in sys.shapes]))
    curv = float(probs @ np.array([s.log_curvature for s in sys.shapes]))
    h = np.pi / grid_size
    corr = min(lip * h / 2, curv * h * h / 8)
    return ExpansionProfile(t, avg, float(avg[i]), i, corr, float(avg[i]) - corr)


def uniform_expansion_margin(family: PotentialFamily, gibbs: GibbsModel, grid_size: int = 1024) -> float:
    """Certified lower bound for ``chi = inf_t int phi_t dmu``; a value <= 0 means not certified."""
    return expansion_profile(family, gibbs, grid_size).lower_bound


def _product(mats: Sequence[np.ndarray]) -> np.ndarray:
    """``mats[-1] @ ... @ mats[0]`` (the first matrix acts first)."""
    P = np.eye(2)
    for A in mats:
        P = A @ P
    return P


def _cocycle_power(sys: CocycleSystem, x: Sequence[int], n: int) -> np.ndarray:
    """``f^n`` at the two-sided point whose coordinates ``-past .. n-1+future`` are ``x``."""
    L = sys.window_length
    return _product([sys.matrices[tuple(x[k : k + L])] for k in range(n)])


def anchor_pasts(spec: ShiftSpec, length: int) -> dict[int, tuple[int, ...]]:
    """For each symbol ``a``, the lexicographically least admissible word of ``length`` that may precede ``a``."""
    if length == 0:
        return {a: () for a in range(spec.alphabet_size)}
    words = word_array(spec, length)
    out = {}
    for a in range(spec.alphabet_size):
        ok = spec.adjacency[words[:, -1], a]
        out[a] = tuple(int(x) for x in words[np.flatnonzero(ok)[0]])
    return out


@dataclass(frozen=True, eq=False)
class Reduction:
    """A two-sided cocycle rewritten over future coordinates only.

    ``coboundary`` is indexed by ``(omega_{-past}, ..., omega_{past+future-1})``
    and holds ``C_omega``; ``reduced`` has window ``(0, past + future)``.
    """

    original: CocycleSystem
    reduced: CocycleSystem
    coboundary: np.ndarray
    anchors: dict = field(repr=False)

    def coboundary_at(self, x: Sequence[int]) -> np.ndarray:
        past, future = self.original.window
        return self.coboundary[tuple(int(v) for v in x[: 2 * past + future])] if past else np.eye(2)


def two_sided_reduce(sys: CocycleSystem, anchors: dict | None = None) -> Reduction:
    """Conjugate a finite-window two-sided cocycle to one reading only the future.

    With ``C_omega = (f^p_omega)^{-1} f^p_{[omega_a, omega]}`` (``p`` the past
    window, where the defining limit is already constant), the reduced maps
    ``C_{T omega}^{-1} f_omega C_omega`` equal
    ``(f^p_{[omega_b, T omega]})^{-1} f^{p+1}_{[omega_a, omega]}`` with
    ``a = omega_0`` and ``b = omega_1``.
    """
    past, future = sys.window
    spec = sys.spec
    if past == 0:
        C = np.broadcast_to(np.eye(2), (2, 2)).copy()
        return Reduction(sys, sys, C, anchor_pasts(spec, 0))
    anchors = anchors or anchor_pasts(spec, past)
    S = spec.alphabet_size
    L_new = past + future + 1
    red = np.full((S,) * L_new + (2, 2), np.nan)
    for v in word_array(spec, L_new):
        v = tuple(int(x) for x in v)
        head = anchors[v[0]] + v
        nxt = anchors[v[1]] + v[1:]
        num = _cocycle_power(sys, head, past + 1)
        den = _cocycle_power(sys, nxt, past)
        red[v] = np.linalg.solve(den, num)
    cob_len = 2 * past + future
    cob = np.full((S,) * cob_len + (2, 2), np.nan)
    for x in word_array(spec, cob_len):
        x = tuple(int(c) for c in x)
        fut = x[past:]
        bracket = anchors[fut[0]] + fut
        cob[x] = np.linalg.solve(_cocycle_power(sys, x, past), _cocycle_power(sys, bracket, past))
    if not np.isfinite(red[tuple(word_array(spec, L_new).astype(np.intp).T)]).all():
        raise DomainError("matrix products overflowed during the reduction")
    return Reduction(sys, CocycleSystem(spec, (0, past + future), red), cob, anchors)


def coboundary_direct(sys: CocycleSystem, x: Sequence[int], n: int, anchors: dict | None = None) -> np.ndarray:
    """``(f^n_omega)^{-1} f^n_{[omega_a, omega]}`` for a point with coordinates ``-past ..`` given by ``x``.

    An independent evaluation of the coboundary at any ``n >= past``.
    """
    past, future = sys.window
    anchors = anchors or anchor_pasts(sys.spec, past)
    fut = tuple(x[past:])
    bracket = anchors[fut[0]] + fut
    if len(x) < past + n + future:
        raise DomainError("point too short for the requested power")
    return np.linalg.solve(_cocycle_power(sys, x, n), _cocycle_power(sys, bracket, n))


@dataclass
class ReductionResiduals:
    """Largest deviations found when checking a reduction on enumerated points.

    ``cohomology``: ``C_{T omega}^{-1} f_omega C_omega`` against the reduced
    matrix, using the tabulated coboundary. ``past_independence``: the same
    conjugated map built with :func:`coboundary_direct` at a longer power,
    compared across points that share their future but not their past.
    """

    cohomology: float
    past_independence: float
    identity: bool


def reduction_residuals(red: Reduction, extra: int = 2) -> ReductionResiduals:
    sys = red.original
    past, future = sys.window
    if past == 0:
        ident = bool((red.coboundary == np.eye(2)).all() and red.reduced is sys)
        return ReductionResiduals(0.0, 0.0, ident)
    spec = sys.spec
    L = sys.window_length
    coh = 0.0
    for x in word_array(spec, 2 * past + future + 1):
        x = tuple(int(v) for v in x)
        f = sys.matrices[x[:L]]
        conj = np.linalg.solve(red.coboundary_at(x[1:]), f @ red.coboundary_at(x))
        coh = max(coh, float(np.abs(conj - red.reduced.matrix(x[past:])).max()))
    n = past + extra
    groups: dict[tuple, np.ndarray] = {}
    indep = 0.0
    for x in word_array(spec, 1 + past + n + future):
        x = tuple(int(v) for v in x)
        f = sys.matrices[x[:L]]
        c0 = coboundary_direct(sys, x, n, red.anchors)
        c1 = coboundary_direct(sys, x[1:], n, red.anchors)
        conj = np.linalg.solve(c1, f @ c0)
        key = x[past : 2 * past + future + 1]
        ref = groups.setdefault(key, conj)
        indep = max(indep, float(np.abs(conj - ref).max()), float(np.abs(conj - red.reduced.matrix(key)).max()))
    return ReductionResiduals(coh, indep, False)


@dataclass
class ExpansionComparison:
    original: float
    reduced: float
    flagged: bool


def expansion_preservation_check(original: CocycleSystem, reduced: CocycleSystem, gibbs: GibbsModel, grid_size: int = 1024) -> ExpansionComparison:
    """Certified expansion margins before and after a reduction; flags a non-positive reduced margin."""
    a = uniform_expansion_margin(PotentialFamily(original), gibbs, grid_size)
    b = uniform_expansion_margin(PotentialFamily(reduced), gibbs, grid_size)
    return ExpansionComparison(a, b, b <= 0)

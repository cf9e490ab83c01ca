"""Ruelle transfer operators of locally constant potentials.

A potential of memory ``k`` is a table over admissible ``k``-words. Its
transfer matrix lives on the admissible ``max(k-1, 1)``-words ("states"):
``M[u, v] = exp(phi(u + v[-1:])[:k])`` whenever ``v`` may follow ``u``. The
pressure is the log of the Perron root of ``M``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import ConvergenceError, DomainError, InvariantViolation
from .shift import (
    HigherBlock,
    MarkovMeasure,
    ShiftSpec,
    cylinder_log_probabilities,
    stationary_distribution,
    word_array,
)

log = logging.getLogger(__name__)

DENSE_LIMIT = 512
EIG_TOL = 1e-13
EIG_MAXITER = 100_000


@dataclass(frozen=True, eq=False)
class Potential:
    """Locally constant potential ``phi(omega) = values[omega_0, ..., omega_{k-1}]``.

    Entries at inadmissible words are ignored.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim < 1 or len(set(v.shape)) != 1:
            raise DomainError(f"potential table must have shape (S,)*k, got {v.shape}")
        if not np.isfinite(v).all():
            raise DomainError("potential values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, alphabet_size: int, c: float, memory: int = 1) -> "Potential":
        return cls(np.full((alphabet_size,) * memory, float(c)))

    @classmethod
    def indicator(cls, alphabet_size: int, symbol: int) -> "Potential":
        v = np.zeros(alphabet_size)
        v[symbol] = 1.0
        return cls(v)

    @property
    def memory(self) -> int:
        return self.values.ndim

    @property
    def alphabet_size(self) -> int:
        return self.values.shape[0]

    def lift(self, k: int) -> "Potential":
        """Same function, tabulated on ``k``-words (``k >= memory``)."""
        if k < self.memory:
            raise DomainError("cannot lower the memory of a potential")
        shape = (self.alphabet_size,) * k
        return Potential(np.broadcast_to(self.values.reshape(self.values.shape + (1,) * (k - self.memory)), shape))

    def evaluate(self, words: np.ndarray) -> np.ndarray:
        """Values at points whose first symbols are the rows of ``words``."""
        words = np.atleast_2d(np.asarray(words, dtype=np.intp))
        return self.values[tuple(words[:, j] for j in range(self.memory))]

    def birkhoff(self, word: Sequence[int], n: int) -> float:
        """``sum_{k<n} phi(T^k x)`` for a point starting with ``word`` (needs n+k-1 symbols)."""
        w = np.asarray(word, dtype=np.intp)
        k = self.memory
        if len(w) < n + k - 1:
            raise DomainError(f"need {n + k - 1} symbols, got {len(w)}")
        windows = np.lib.stride_tricks.sliding_window_view(w[: n + k - 1], k)
        return float(self.evaluate(windows).sum())

    def sup_norm(self, spec: ShiftSpec | None = None) -> float:
        if spec is None:
            return float(np.abs(self.values).max())
        words = word_array(spec, self.memory)
        return float(np.abs(self.evaluate(words)).max())

    def _binary(self, other, op) -> "Potential":
        if isinstance(other, Potential):
            k = max(self.memory, other.memory)
            return Potential(op(self.lift(k).values, other.lift(k).values))
        return Potential(op(self.values, float(other)))

    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, c: float):
        return Potential(self.values * float(c))

    __rmul__ = __mul__

    def __neg__(self):
        return Potential(-self.values)


def state_length(memory: int) -> int:
    return max(memory - 1, 1)


def transfer_matrix(spec: ShiftSpec, phi: Potential) -> tuple[np.ndarray, HigherBlock, float]:
    """Scaled transfer matrix on states.

    Returns ``(M, block, shift)`` with the true matrix equal to ``exp(shift) * M``;
    the shift keeps entries O(1) when potentials are large.
    """
    if phi.alphabet_size != spec.alphabet_size:
        raise DomainError("potential and shift have different alphabets")
    k = phi.memory
    block = HigherBlock(spec, state_length(k))
    W = block.words
    adj = block.spec.adjacency
    u, v = np.nonzero(adj)
    kwords = np.concatenate([W[u], W[v][:, -1:]], axis=1)[:, :k]
    logw = phi.evaluate(kwords)
    shift = float(logw.max())
    M = np.zeros(adj.shape)
    M[u, v] = np.exp(logw - shift)
    return M, block, shift


@dataclass(frozen=True, eq=False)
class RuelleSpectrum:
    """Perron data of a transfer matrix.

    ``h`` is the right and ``p`` the left Perron vector, normalized by
    ``<h, p> = 1`` and ``max(h) = 1``.
    """

    matrix_dim: int
    leading_eigenvalue: float
    pressure: float
    h: np.ndarray
    p: np.ndarray
    second_modulus: float
    gap: float
    eigenvalues: np.ndarray = field(repr=False)

    @property
    def ratio(self) -> float:
        """``rho_2 / lambda``, the geometric mixing rate."""
        return self.second_modulus / self.leading_eigenvalue


def _perron_dense(M: np.ndarray):
    w, V = np.linalg.eig(M)
    i = int(np.argmax(w.real))
    lam = float(w[i].real)
    wl, U = np.linalg.eig(M.T)
    j = int(np.argmax(wl.real))
    h = np.abs(V[:, i].real)
    p = np.abs(U[:, j].real)
    rest = np.delete(np.abs(w), i)
    return lam, h, p, float(rest.max()) if rest.size else 0.0, w


def _power(M: np.ndarray, x0: np.ndarray | None = None):
    x = np.ones(M.shape[0]) if x0 is None else x0
    x = x / np.abs(x).max()
    lam = 0.0
    for it in range(EIG_MAXITER):
        y = M @ x
        lam_new = float(np.abs(y).max())
        y /= lam_new
        if np.abs(y - x).max() < EIG_TOL and abs(lam_new - lam) <= EIG_TOL * lam_new:
            return lam_new, y
        x, lam = y, lam_new
    raise ConvergenceError(f"power iteration did not converge in {EIG_MAXITER} steps")


def _perron_iterative(M: np.ndarray):
    lam, h = _power(M)
    _, p = _power(M.T)
    p = p / (p @ h)
    # Second modulus by power iteration on the deflated operator.
    N = M - lam * np.outer(h, p)
    rng = np.random.default_rng(0)
    x = rng.standard_normal(M.shape[0])
    x -= h * (p @ x)
    norms = []
    for _ in range(200):
        x = N @ x
        nx = np.linalg.norm(x)
        if nx == 0:
            norms.append(0.0)
            break
        norms.append(nx)
        x /= nx
    logs = np.log(np.maximum(norms, 1e-300))
    rho2 = float(np.exp(logs[len(logs) // 2 :].mean())) if norms[-1] > 0 else 0.0
    return lam, h, p, rho2, np.array([lam, rho2])


def spectrum_of(M: np.ndarray, shift: float = 0.0) -> RuelleSpectrum:
    """Perron data of a nonnegative irreducible matrix ``exp(shift) * M``."""
    dim = M.shape[0]
    if dim <= DENSE_LIMIT:
        lam, h, p, rho2, eig = _perron_dense(M)
    else:
        lam, h, p, rho2, eig = _perron_iterative(M)
    # One refinement sweep tightens eigenvector residuals to machine precision.
    h = M @ h / lam
    p = p @ M / lam
    h = h / h.max()
    p = p / (p @ h)
    if (h <= 0).any() or (p <= 0).any():
        raise ConvergenceError("Perron vectors are not strictly positive; is the shift irreducible?")
    res_h = np.abs(M @ h - lam * h).max() / (lam * h.max())
    res_p = np.abs(p @ M - lam * p).max() / (lam * p.max())
    if max(res_h, res_p) > 1e-12:
        raise ConvergenceError(f"Perron residuals {res_h:.2e}, {res_p:.2e} exceed 1e-12")
    return RuelleSpectrum(
        matrix_dim=dim,
        leading_eigenvalue=lam * np.exp(shift),
        pressure=float(np.log(lam) + shift),
        h=h,
        p=p,
        second_modulus=rho2 * np.exp(shift),
        gap=1.0 - rho2 / lam,
        eigenvalues=eig * np.exp(shift),
    )


def ruelle_spectrum(spec: ShiftSpec, phi: Potential) -> RuelleSpectrum:
    spec.require_irreducible()
    M, _, shift = transfer_matrix(spec, phi)
    return spectrum_of(M, shift)


def pressure(spec: ShiftSpec, phi: Potential) -> float:
    """Topological pressure: log of the spectral radius of the transfer matrix."""
    spec.require_irreducible()
    M, _, shift = transfer_matrix(spec, phi)
    if M.shape[0] <= DENSE_LIMIT:
        return float(np.log(np.abs(np.linalg.eigvals(M)).max()) + shift)
    return ruelle_spectrum(spec, phi).pressure


def normalize(spec: ShiftSpec, phi: Potential) -> Potential:
    """``phi - P(phi)``, a potential of pressure zero."""
    return phi - pressure(spec, phi)


@dataclass(frozen=True, eq=False)
class GibbsModel:
    """Equilibrium state of a normalized locally constant potential as a Markov chain on states."""

    spec: ShiftSpec
    potential: Potential
    spectrum: RuelleSpectrum
    chain: MarkovMeasure
    block: HigherBlock
    gibbs_constant: float

    @property
    def state_length(self) -> int:
        return self.block.m

    @property
    def states(self) -> np.ndarray:
        return self.block.words

    def log_cylinder(self, words: np.ndarray) -> np.ndarray:
        """Log-measure of cylinders for a batch of symbol words of equal length."""
        words = np.atleast_2d(np.asarray(words, dtype=np.intp))
        L, m = words.shape[1], self.state_length
        if L >= m:
            paths = self.block.encode(words)
            out = np.full(len(words), -np.inf)
            ok = (paths >= 0).all(axis=1)
            out[ok] = cylinder_log_probabilities(self.chain, paths[ok])
            return out
        # Cylinders shorter than a state: marginalize the state distribution.
        W = self.states
        keys = W[:, :L]
        out = np.full(len(words), -np.inf)
        for i, w in enumerate(words):
            sel = (keys == w).all(axis=1)
            if sel.any():
                out[i] = np.log(self.chain.stationary[sel].sum())
        return out

    def cylinder_probability(self, word: Sequence[int]) -> float:
        w = np.asarray(word, dtype=np.intp)
        if not self.spec.is_admissible(w):
            raise DomainError(f"word {tuple(w.tolist())} is not admissible")
        return float(np.exp(self.log_cylinder(w[None, :])[0]))

    def word_probabilities(self, L: int) -> tuple[np.ndarray, np.ndarray]:
        """All admissible ``L``-words (lexicographic) and their measures."""
        words = word_array(self.spec, L)
        return words, np.exp(self.log_cylinder(words))

    def expectation(self, phi: Potential) -> float:
        words, probs = self.word_probabilities(phi.memory)
        return float(probs @ phi.evaluate(words))

    def block_chain(self, K: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """The chain lifted to ``K``-word states (K >= state length).

        Returns ``(words, stationary, transition)``.
        """
        m = self.state_length
        if K < m:
            raise DomainError("lift length must be at least the state length")
        words, probs = self.word_probabilities(K)
        idx = np.full((self.spec.alphabet_size,) * K, -1, dtype=np.intp)
        idx[tuple(words.T)] = np.arange(len(words))
        Q = np.zeros((len(words), len(words)))
        enc = self.block.index
        for i, w in enumerate(words):
            src = enc[tuple(w[K - m :])]
            for b in np.flatnonzero(self.spec.adjacency[w[-1]]):
                nxt = tuple(w[1:]) + (int(b),)
                dst = enc[nxt[K - m :]]
                Q[i, idx[nxt]] = self.chain.transition[src, dst]
        return words, probs, Q


def _gibbs_constant(spec: ShiftSpec, psi: Potential, block: HigherBlock, spec_: RuelleSpectrum, chain: MarkovMeasure) -> float:
    """Certified constant with ``mu[w] / exp(psi^(n)(x)) in [1/C, C]`` for every word and every x in [w].

    For words covering at least one state the log-ratio equals
    ``log p[first state] + log h[last state] - (Birkhoff terms reading past w)``,
    which depends only on the two end states and the continuation.
    """
    k, m = psi.memory, block.m
    h = spec_.h
    p = spec_.p
    W = block.words
    tail_len = k - 1 if k >= 2 else 1  # Birkhoff terms not covered by chain edges
    worst = 0.0
    for j, last in enumerate(W):
        conts = [()] if k == 1 else [tuple(c) for c in word_array(spec, k, first_symbol=int(last[-1]))[:, 1:]]
        for c in conts:
            x = np.concatenate([last, np.asarray(c, dtype=np.intp)])
            # Terms at positions |w|-tail_len .. |w|-1, i.e. starting inside the last state.
            start = len(last) - tail_len
            tail = sum(float(psi.evaluate(x[None, s : s + k])[0]) for s in range(start, len(last)))
            r = np.log(p) + np.log(h[j]) - tail
            worst = max(worst, float(np.abs(r).max()))
    if m > 1:
        # Words shorter than a state: check directly with every continuation.
        for L in range(1, m):
            for w in word_array(spec, L):
                logmu = np.log(chain.stationary[(W[:, :L] == w).all(axis=1)].sum())
                for x in word_array(spec, L + k - 1, first_symbol=int(w[0])):
                    if (x[:L] == w).all():
                        worst = max(worst, abs(logmu - psi.birkhoff(x, L)))
    return float(np.exp(worst))


def gibbs_model(spec: ShiftSpec, psi: Potential) -> GibbsModel:
    """Normalize ``psi`` and build its equilibrium state as an exact Markov chain."""
    spec.require_irreducible()
    psi_n = normalize(spec, psi)
    M, block, shift = transfer_matrix(spec, psi_n)
    sp = spectrum_of(M, shift)
    Mt = M * np.exp(shift)
    lam = sp.leading_eigenvalue
    Q = Mt * sp.h[None, :] / (lam * sp.h[:, None])
    Q /= Q.sum(axis=1, keepdims=True)
    pi = sp.p * sp.h
    pi = pi / pi.sum()
    if np.abs(pi @ Q - pi).max() > 1e-13:
        pi = stationary_distribution(Q)
    chain = MarkovMeasure(Q, pi)
    C = _gibbs_constant(spec, psi_n, block, sp, chain)
    return GibbsModel(spec=spec, potential=psi_n, spectrum=sp, chain=chain, block=block, gibbs_constant=C)


def pressure_derivative(spec: ShiftSpec, psi: Potential, direction: Potential, model: GibbsModel | None = None) -> float:
    """``d/dbeta P(psi - beta * direction)`` at 0, i.e. ``-E_mu[direction]``."""
    model = model or gibbs_model(spec, psi)
    return -model.expectation(direction)


def _series_length(ratio: float, prefactor: float, dim: int, tol: float = 1e-12) -> int:
    if ratio <= 0 or prefactor <= 0:
        return dim
    # Tail bound prefactor * ratio^(K+1) / (1 - ratio) < tol.
    K = int(np.ceil((np.log(tol * (1 - ratio) / prefactor)) / np.log(ratio))) if ratio < 1 else EIG_MAXITER
    return int(min(max(K, dim), EIG_MAXITER))


def pressure_second_derivative(
    spec: ShiftSpec, psi: Potential, direction: Potential, model: GibbsModel | None = None
) -> float:
    """Green-Kubo sum ``Var(f) + 2 sum_{k>=1} Cov(f, f o T^k)`` for the centered observable.

    The series is cut once the geometric tail bound from the spectral gap
    drops below 1e-12.
    """
    model = model or gibbs_model(spec, psi)
    if model.spectrum.gap <= 0:
        raise DomainError("spectral gap is zero; the covariance series need not converge")
    K = max(direction.memory, model.state_length)
    words, pi, Q = model.block_chain(K)
    f = direction.evaluate(words)
    fbar = f - pi @ f
    weighted = pi * fbar
    ratio = model.spectrum.ratio
    w, V = np.linalg.eig(Q)
    cond = np.linalg.cond(V)
    if not np.isfinite(cond) or cond > 1e8:
        cond = 1e8
    prefactor = 2 * cond * np.abs(weighted).sum() * np.abs(fbar).max()
    terms = _series_length(ratio, prefactor, len(words))
    total = float(weighted @ fbar)
    v = fbar
    cov_sum = 0.0
    for j in range(1, EIG_MAXITER + 1):
        v = Q @ v
        c = float(weighted @ v)
        cov_sum += c
        if j >= terms and abs(c) < 1e-17 + 1e-15 * abs(total):
            break
    return total + 2 * cov_sum


def deflated_decay(spec: ShiftSpec, phi: Potential, n_max: int = 50) -> dict:
    """Operator norms of ``(L/lambda)^n`` restricted off the Perron line, for ``n <= n_max``.

    Returns the norms, ``rho_2 / lambda`` and the smallest constant ``C``
    with ``norm_n <= C (rho_2/lambda)^n`` (inf when a norm is positive but
    the ratio is zero).
    """
    M, _, shift = transfer_matrix(spec, phi)
    sp = spectrum_of(M, shift)
    lam = sp.leading_eigenvalue / np.exp(shift)
    A = M / lam
    P = np.outer(sp.h, sp.p)
    N = A - P
    r = sp.ratio
    norms, Nn = [], np.eye(len(A))
    for _ in range(n_max):
        Nn = Nn @ N
        norms.append(float(np.linalg.norm(Nn, 2)))
    norms = np.array(norms)
    n = np.arange(1, n_max + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        C = float(np.max(np.where(norms > 1e-13, norms / r**n, 0.0))) if r > 0 else (0.0 if norms.max() <= 1e-13 else np.inf)
    w, V = np.linalg.eig(A)
    return {"norms": norms, "ratio": r, "C": C, "eigvec_condition": float(np.linalg.cond(V))}


@dataclass
class GapBoundReport:
    """Outcome of checking ``P(psi - beta*phi_t) <= -chi*beta/2`` on a (t, beta) grid."""

    chi: float
    beta_radius: float
    rows: list[tuple[int, float, float, float, float]]
    worst_margin: float
    worst_at: tuple[int, float]
    skipped_betas: list[float]
    second_derivative_sup: float
    tolerance: float = 1e-9

    @property
    def passed(self) -> bool:
        return self.worst_margin >= -self.tolerance

    def csv_rows(self):
        return [("t_index", "beta", "pressure", "bound", "margin")] + self.rows


def gap_bound_check(
    spec: ShiftSpec,
    psi: Potential,
    family,
    beta_grid: Sequence[float],
    t_grid: Sequence[float],
    chi: float,
    threads: int = 1,
) -> GapBoundReport:
    """Sweep ``P(psi - beta*phi_t)`` against the bound ``-chi*beta/2``.

    Only betas inside the perturbative radius (half the spectral gap of
    ``L_psi`` over ``sup_t |phi_t|``) are asserted; larger ones are listed
    in ``skipped_betas``.
    """
    from ._parallel import parallel_map

    model = gibbs_model(spec, psi)
    psi_n = model.potential
    sup_phi = family.sup_norm
    radius = 0.5 * model.spectrum.gap / sup_phi if sup_phi > 0 else np.inf
    betas = [float(b) for b in beta_grid]
    active = [b for b in betas if b <= radius]
    skipped = [b for b in betas if b > radius]
    ts = np.asarray(t_grid, dtype=float)

    def per_t(i):
        phi_t = family.potential(ts[i])
        out = []
        for b in active:
            P = pressure(spec, psi_n - b * phi_t)
            bound = -chi * b / 2
            out.append((i, b, P, bound, bound - P))
        k2 = abs(pressure_second_derivative(spec, psi_n, phi_t, model=model))
        return out, k2

    results = parallel_map(per_t, range(len(ts)), threads)
    rows = [r for out, _ in results for r in out]
    k2 = max((k for _, k in results), default=0.0)
    if rows:
        worst = min(rows, key=lambda r: (r[4], r[0], r[1]))
        worst_margin, worst_at = worst[4], (worst[0], worst[1])
    else:
        worst_margin, worst_at = np.inf, (-1, np.nan)
    return GapBoundReport(
        chi=chi,
        beta_radius=radius,
        rows=rows,
        worst_margin=float(worst_margin),
        worst_at=worst_at,
        skipped_betas=skipped,
        second_derivative_sup=k2,
    )


def log_partition_by_powers(spec: ShiftSpec, phi: Potential, n: int) -> float:
    """``log sum_{|w|=n} exp(phi^(n)(w x))`` for memory-1 ``phi``, via matrix powers (no enumeration)."""
    if phi.memory != 1:
        raise DomainError("matrix-power partition sums are implemented for memory-1 potentials")
    A = spec.adjacency
    v = phi.values.copy()
    for _ in range(n - 1):
        v = np.array([logsumexp(v[A[:, b]]) for b in range(len(v))]) + phi.values
    return float(logsumexp(v))

"""Finite-alphabet one-sided topological Markov shifts.

Words are represented as tuples of ints (single words) or as 2-d integer
arrays with one word per row (batches). Batches are always produced in
lexicographic order.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np
from scipy.special import xlogy

from .errors import ConfigurationError, DomainError, EnumerationCapError

MAX_ALPHABET = 64
MAX_WORDS = 2**24

Word = tuple[int, ...]


@dataclass(frozen=True, eq=False)
class ShiftSpec:
    """Adjacency data of a one-sided topological Markov shift.

    ``adjacency[a, b]`` is true iff symbol ``b`` may follow ``a``.
    """

    adjacency: np.ndarray

    def __post_init__(self):
        A = np.array(self.adjacency, dtype=bool)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
            raise ConfigurationError(f"adjacency must be a non-empty square matrix, got shape {A.shape}")
        if A.shape[0] > MAX_ALPHABET:
            raise ConfigurationError(f"alphabet size {A.shape[0]} exceeds {MAX_ALPHABET}")
        dead_rows = np.flatnonzero(~A.any(axis=1))
        dead_cols = np.flatnonzero(~A.any(axis=0))
        if dead_rows.size or dead_cols.size:
            raise ConfigurationError(
                f"dead symbols: no successor {dead_rows.tolist()}, no predecessor {dead_cols.tolist()}"
            )
        A.setflags(write=False)
        object.__setattr__(self, "adjacency", A)

    @classmethod
    def full(cls, size: int) -> "ShiftSpec":
        return cls(np.ones((size, size), dtype=bool))

    @classmethod
    def golden_mean(cls) -> "ShiftSpec":
        """The shift on {0, 1} forbidding the word 11."""
        return cls(np.array([[1, 1], [1, 0]], dtype=bool))

    @property
    def alphabet_size(self) -> int:
        return self.adjacency.shape[0]

    @cached_property
    def irreducible(self) -> bool:
        return self.reachability_defect() is None

    def reachability_defect(self) -> tuple[int, int] | None:
        """Return a pair ``(a, b)`` with ``b`` unreachable from ``a``, or None."""
        A = self.adjacency
        forward = _reachable(A, 0)
        if not forward.all():
            return 0, int(np.flatnonzero(~forward)[0])
        backward = _reachable(A.T, 0)
        if not backward.all():
            return int(np.flatnonzero(~backward)[0]), 0
        return None

    def require_irreducible(self) -> None:
        defect = self.reachability_defect()
        if defect is not None:
            a, b = defect
            raise ConfigurationError(f"shift is not irreducible: symbol {b} is unreachable from symbol {a}")

    def is_admissible(self, word: Sequence[int]) -> bool:
        w = np.asarray(word, dtype=int)
        if w.size == 0:
            return True
        if w.min() < 0 or w.max() >= self.alphabet_size:
            return False
        return bool(self.adjacency[w[:-1], w[1:]].all())

    def minimal_continuation(self, start: int, length: int) -> Word:
        """Lexicographically minimal admissible word of ``length`` symbols beginning with ``start``."""
        word = [start]
        for _ in range(length - 1):
            word.append(int(np.flatnonzero(self.adjacency[word[-1]])[0]))
        return tuple(word[:length])


def _reachable(A: np.ndarray, source: int) -> np.ndarray:
    seen = np.zeros(A.shape[0], dtype=bool)
    seen[source] = True
    queue = deque([source])
    while queue:
        a = queue.popleft()
        for b in np.flatnonzero(A[a] & ~seen):
            seen[b] = True
            queue.append(int(b))
    return seen


def is_irreducible(spec: ShiftSpec) -> bool:
    """True iff the adjacency digraph is strongly connected."""
    return spec.irreducible


def word_array(spec: ShiftSpec, n: int, last_symbol: int | None = None, first_symbol: int | None = None) -> np.ndarray:
    """All admissible words of length ``n`` as an (N, n) array in lexicographic order."""
    if n < 1:
        raise DomainError("word length must be >= 1")
    S = spec.alphabet_size
    if float(S) ** n > MAX_WORDS:
        raise EnumerationCapError(f"{S}^{n} words exceed the enumeration cap 2^24; use the binned bounds")
    A = spec.adjacency
    deg = A.sum(axis=1)
    indptr = np.concatenate([[0], np.cumsum(deg)])
    succ = np.concatenate([np.flatnonzero(A[a]) for a in range(S)])
    start = np.arange(S) if first_symbol is None else np.array([first_symbol])
    words = start[:, None].astype(np.int8 if S <= 127 else np.int16)
    for _ in range(n - 1):
        last = words[:, -1].astype(np.intp)
        counts = deg[last]
        parent = np.repeat(np.arange(len(words)), counts)
        offset = np.arange(parent.size) - np.repeat(np.cumsum(counts) - counts, counts)
        new = succ[indptr[last[parent]] + offset]
        words = np.column_stack([words[parent], new.astype(words.dtype)])
    if last_symbol is not None:
        words = words[words[:, -1] == last_symbol]
    return words


def enumerate_words(spec: ShiftSpec, n: int, last_symbol: int | None = None) -> Iterator[Word]:
    """Yield the admissible words of length ``n`` once each, in lexicographic order."""
    spec.require_irreducible()
    for row in word_array(spec, n, last_symbol=last_symbol):
        yield tuple(int(x) for x in row)


def word_count(spec: ShiftSpec, n: int, last_symbol: int | None = None) -> int:
    """Number of admissible words of length ``n``, from powers of the adjacency matrix."""
    A = spec.adjacency.astype(object)
    v = np.ones(spec.alphabet_size, dtype=object)
    for _ in range(n - 1):
        v = v @ A
    return int(v.sum() if last_symbol is None else v[last_symbol])


@dataclass(frozen=True, eq=False)
class HigherBlock:
    """Recoding of a shift onto the alphabet of its admissible ``m``-words.

    Block ``u`` may be followed by block ``v`` iff ``u[1:] == v[:-1]``.
    """

    base: ShiftSpec
    m: int

    @cached_property
    def words(self) -> np.ndarray:
        return word_array(self.base, self.m).astype(np.intp)

    @cached_property
    def index(self) -> np.ndarray:
        """Lookup table of shape (S,)*m mapping a word to its block index (-1 if inadmissible)."""
        table = np.full((self.base.alphabet_size,) * self.m, -1, dtype=np.intp)
        table[tuple(self.words.T)] = np.arange(len(self.words))
        return table

    @cached_property
    def spec(self) -> ShiftSpec:
        W = self.words
        if self.m == 1:
            return self.base
        adj = (W[:, None, 1:] == W[None, :, :-1]).all(axis=2)
        return ShiftSpec(adj)

    def encode(self, words: np.ndarray) -> np.ndarray:
        """Map symbol words (N, L) with L >= m to block paths (N, L-m+1)."""
        words = np.atleast_2d(np.asarray(words, dtype=np.intp))
        L = words.shape[1]
        if L < self.m:
            raise DomainError(f"words of length {L} are shorter than the block length {self.m}")
        cols = [self.index[tuple(words[:, k + j] for j in range(self.m))] for k in range(L - self.m + 1)]
        return np.stack(cols, axis=1)


def stationary_distribution(Q: np.ndarray) -> np.ndarray:
    """A stationary probability vector of the row-stochastic matrix ``Q``."""
    Q = np.asarray(Q, dtype=float)
    N = Q.shape[0]
    system = np.vstack([Q.T - np.eye(N), np.ones((1, N))])
    rhs = np.zeros(N + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    for _ in range(3):
        nxt = pi @ Q
        nxt /= nxt.sum()
        if np.abs(nxt - pi).max() < 1e-15:
            break
        pi = nxt
    return pi


@dataclass(frozen=True, eq=False)
class MarkovMeasure:
    """Stationary Markov measure with row-stochastic ``transition`` and ``stationary`` vector."""

    transition: np.ndarray
    stationary: np.ndarray

    def __post_init__(self):
        Q = np.array(self.transition, dtype=float)
        pi = np.array(self.stationary, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or pi.shape != (Q.shape[0],):
            raise DomainError("transition must be square and match the stationary vector")
        if (Q < 0).any() or (pi < 0).any():
            raise DomainError("negative probabilities")
        if np.abs(Q.sum(axis=1) - 1).max() > 1e-12:
            raise DomainError("transition rows must sum to 1 within 1e-12")
        if abs(pi.sum() - 1) > 1e-12 or np.abs(pi @ Q - pi).max() > 1e-12:
            raise DomainError("stationary vector is not invariant within 1e-12")
        Q.setflags(write=False)
        pi.setflags(write=False)
        object.__setattr__(self, "transition", Q)
        object.__setattr__(self, "stationary", pi)

    @classmethod
    def from_transition(cls, Q: np.ndarray) -> "MarkovMeasure":
        Q = np.asarray(Q, dtype=float)
        Q = Q / Q.sum(axis=1, keepdims=True)
        return cls(Q, stationary_distribution(Q))

    @classmethod
    def bernoulli(cls, p: Sequence[float]) -> "MarkovMeasure":
        p = np.asarray(p, dtype=float)
        p = p / p.sum()
        return cls(np.tile(p, (p.size, 1)), p)

    @property
    def size(self) -> int:
        return self.transition.shape[0]

    def supported_on(self, spec: ShiftSpec) -> bool:
        return not bool(((self.transition > 0) & ~spec.adjacency).any())

    def relabel(self, perm: Sequence[int]) -> "MarkovMeasure":
        """Conjugate by the permutation sending state ``i`` to ``perm[i]``."""
        perm = np.asarray(perm)
        inv = np.argsort(perm)
        return MarkovMeasure(self.transition[np.ix_(inv, inv)], self.stationary[inv])


def markov_entropy(m: MarkovMeasure) -> float:
    """Entropy rate in nats."""
    return float(-(m.stationary[:, None] * xlogy(m.transition, m.transition)).sum())


def cylinder_probability(m: MarkovMeasure, w: Sequence[int], spec: ShiftSpec | None = None) -> float:
    """Measure of the cylinder ``[w]``; inadmissible words (under ``spec``) are a domain error."""
    w = np.asarray(w, dtype=np.intp)
    if w.size == 0:
        return 1.0
    if spec is not None and not spec.is_admissible(w):
        raise DomainError(f"word {tuple(w.tolist())} is not admissible")
    return float(m.stationary[w[0]] * np.prod(m.transition[w[:-1], w[1:]]))


def cylinder_log_probabilities(m: MarkovMeasure, words: np.ndarray) -> np.ndarray:
    """Vectorized log-measure of cylinders for a batch of state words (N, L)."""
    words = np.atleast_2d(np.asarray(words, dtype=np.intp))
    with np.errstate(divide="ignore"):
        logp = np.log(m.stationary[words[:, 0]])
        if words.shape[1] > 1:
            logp = logp + np.log(m.transition[words[:, :-1], words[:, 1:]]).sum(axis=1)
    return logp

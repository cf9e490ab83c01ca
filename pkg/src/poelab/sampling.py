"""Reproducible random streams and exact sampling of stationary Markov chains.

Streams are Philox counter-based generators keyed by ``(seed, task_id)``,
so any task can be replayed on its own and work split across threads
draws the same numbers as a serial run.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError
from .shift import HigherBlock
from .transfer import GibbsModel


def stream(seed: int, task_id: int) -> np.random.Generator:
    """Independent generator for ``task_id`` under a 64-bit ``seed``."""
    key = np.array([int(seed) & (2**64 - 1), int(task_id) & (2**64 - 1)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def inverse_cdf_chain(transition: np.ndarray, stationary: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Stationary chain paths driven by given uniforms (common random numbers).

    ``uniforms`` has shape (N, L); column 0 picks the initial state from the
    stationary vector, column ``k`` the ``k``-th transition. Returns state
    indices of shape (N, L).
    """
    u = np.asarray(uniforms, dtype=float)
    N, L = u.shape
    cum_pi = np.cumsum(stationary)
    cum_pi[-1] = 1.0
    cum_Q = np.cumsum(transition, axis=1)
    cum_Q[:, -1] = 1.0
    states = np.empty((N, L), dtype=np.intp)
    states[:, 0] = np.minimum(np.searchsorted(cum_pi, u[:, 0], side="right"), len(cum_pi) - 1)
    for k in range(1, L):
        rows = cum_Q[states[:, k - 1]]
        states[:, k] = np.minimum((u[:, k, None] >= rows).sum(axis=1), rows.shape[1] - 1)
    return states


def decode_states(block: HigherBlock, states: np.ndarray) -> np.ndarray:
    """Symbol words from paths of overlapping ``m``-blocks."""
    W = block.words
    first = W[states[:, 0]]
    rest = W[states[:, 1:], -1]
    return np.concatenate([first, rest], axis=1)


def gibbs_words(model: GibbsModel, n: int, rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` independent words of length ``n`` from the Gibbs measure, as an int array."""
    if n < 1:
        raise DomainError("word length must be >= 1")
    m = model.state_length
    L = max(n - m + 1, 1)
    u = rng.random((size, L))
    states = inverse_cdf_chain(model.chain.transition, model.chain.stationary, u)
    return decode_states(model.block, states)[:, :n]


def gibbs_sample(model: GibbsModel, n: int, rng: np.random.Generator) -> tuple[int, ...]:
    """One word of length ``n`` drawn from the exact stationary chain (no burn-in needed)."""
    return tuple(int(x) for x in gibbs_words(model, n, rng, 1)[0])

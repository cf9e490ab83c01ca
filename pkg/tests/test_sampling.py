import numpy as np
import pytest
from scipy.stats import chisquare

from poelab.sampling import gibbs_sample, gibbs_words, inverse_cdf_chain, stream
from poelab.shift import ShiftSpec
from poelab.transfer import Potential, gibbs_model


def test_streams_are_reproducible_and_distinct():
    a = stream(42, 3).random(5)
    assert np.array_equal(a, stream(42, 3).random(5))
    assert not np.array_equal(a, stream(42, 4).random(5))
    assert not np.array_equal(a, stream(43, 3).random(5))


def test_inverse_cdf_chain_follows_uniforms():
    Q = np.array([[0.25, 0.75], [1.0, 0.0]])
    pi = np.array([4 / 7, 3 / 7])
    u = np.array([[0.1, 0.2, 0.9], [0.6, 0.5, 0.3]])
    # state 0 iff u < cumulative mass of 0
    assert inverse_cdf_chain(Q, pi, u).tolist() == [[0, 0, 1], [1, 0, 1]]


def test_gibbs_words_are_admissible_and_distributed_correctly():
    spec = ShiftSpec.golden_mean()
    model = gibbs_model(spec, Potential(np.array([[0.2, -0.6], [0.4, 0.0]])))
    words = gibbs_words(model, 4, stream(1, 0), 200_000)
    assert all(spec.is_admissible(w) for w in words[:1000])
    assert all(spec.is_admissible(w) for w in np.unique(words, axis=0))
    ref_words, probs = model.word_probabilities(4)
    _, idx = np.unique(np.vstack([ref_words, words]), axis=0, return_inverse=True)
    counts = np.bincount(idx.ravel()[len(ref_words):], minlength=len(ref_words))
    assert chisquare(counts, probs * counts.sum()).pvalue > 1e-4


def test_single_sample():
    model = gibbs_model(ShiftSpec.full(3), Potential.constant(3, 0.0))
    w = gibbs_sample(model, 7, stream(0, 0))
    assert len(w) == 7 and all(0 <= a < 3 for a in w)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_words, markov_entropy_rate
from poelab.errors import ConfigurationError, DomainError, EnumerationCapError
from poelab.shift import (
    HigherBlock,
    MarkovMeasure,
    ShiftSpec,
    cylinder_probability,
    enumerate_words,
    is_irreducible,
    markov_entropy,
    word_array,
    word_count,
)


@st.composite
def irreducible_specs(draw, max_size=4):
    S = draw(st.integers(1, max_size))
    bits = draw(st.lists(st.booleans(), min_size=S * S, max_size=S * S))
    A = np.array(bits, dtype=bool).reshape(S, S)
    # a cycle through every symbol keeps the digraph strongly connected
    for a in range(S):
        A[a, (a + 1) % S] = True
    return ShiftSpec(A)


def test_golden_mean_counts_are_fibonacci():
    spec = ShiftSpec.golden_mean()
    fib = [2, 3, 5, 8, 13, 21, 34]
    assert [word_count(spec, n) for n in range(1, 8)] == fib


@settings(max_examples=40, deadline=None)
@given(irreducible_specs(), st.integers(1, 6))
def test_enumeration_matches_brute_force(spec, n):
    words = list(enumerate_words(spec, n))
    assert words == brute_words(spec.adjacency, n)
    assert len(words) == word_count(spec, n)


@settings(max_examples=30, deadline=None)
@given(irreducible_specs(), st.integers(1, 5))
def test_last_symbol_filter(spec, n):
    for b in range(spec.alphabet_size):
        words = list(enumerate_words(spec, n, last_symbol=b))
        assert all(w[-1] == b for w in words)
        assert len(words) == word_count(spec, n, last_symbol=b)


def test_reducible_shift_names_the_unreachable_symbol():
    spec = ShiftSpec(np.array([[1, 1, 0], [1, 1, 0], [1, 0, 1]], dtype=bool))
    assert not is_irreducible(spec)
    with pytest.raises(ConfigurationError, match="symbol 2"):
        spec.require_irreducible()


def test_dead_symbol_rejected():
    with pytest.raises(ConfigurationError):
        ShiftSpec(np.array([[1, 0], [0, 0]], dtype=bool))


def test_enumeration_cap():
    with pytest.raises(EnumerationCapError):
        word_array(ShiftSpec.full(2), 25)


def test_higher_block_encoding_round_trip():
    spec = ShiftSpec.golden_mean()
    hb = HigherBlock(spec, 3)
    assert [tuple(w) for w in hb.words] == brute_words(spec.adjacency, 3)
    words = word_array(spec, 7)
    paths = hb.encode(words)
    assert (paths >= 0).all()
    # consecutive blocks overlap in m-1 symbols
    W = hb.words
    assert (W[paths[:, :-1], 1:] == W[paths[:, 1:], :-1]).all()
    assert hb.spec.irreducible


def test_bernoulli_entropy():
    m = MarkovMeasure.bernoulli([0.25, 0.75])
    expected = -(0.25 * math.log(0.25) + 0.75 * math.log(0.75))
    assert markov_entropy(m) == pytest.approx(expected, abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.05, 1.0), min_size=9, max_size=9))
def test_entropy_matches_oracle(entries):
    Q = np.array(entries).reshape(3, 3)
    m = MarkovMeasure.from_transition(Q)
    assert markov_entropy(m) == pytest.approx(markov_entropy_rate(m.transition), abs=1e-12)
    assert 0 <= markov_entropy(m) <= math.log(3) + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.05, 1.0), min_size=4, max_size=4), st.integers(1, 6))
def test_cylinders_sum_to_one_and_are_consistent(entries, n):
    m = MarkovMeasure.from_transition(np.array(entries).reshape(2, 2))
    spec = ShiftSpec.full(2)
    words = brute_words(spec.adjacency, n)
    probs = {w: cylinder_probability(m, w, spec) for w in words}
    assert sum(probs.values()) == pytest.approx(1.0, abs=1e-12)
    # Kolmogorov consistency: [w] = union of [wa]
    for w in words:
        children = sum(cylinder_probability(m, w + (a,), spec) for a in range(2))
        assert children == pytest.approx(probs[w], abs=1e-14)


def test_inadmissible_cylinder_is_a_domain_error():
    spec = ShiftSpec.golden_mean()
    m = MarkovMeasure.from_transition(np.array([[0.5, 0.5], [1.0, 0.0]]))
    assert m.supported_on(spec)
    with pytest.raises(DomainError):
        cylinder_probability(m, (1, 1), spec)


def test_relabel_preserves_entropy():
    m = MarkovMeasure.from_transition(np.array([[0.2, 0.5, 0.3], [0.6, 0.1, 0.3], [0.3, 0.3, 0.4]]))
    r = m.relabel([2, 0, 1])
    assert markov_entropy(r) == pytest.approx(markov_entropy(m), abs=1e-14)
    assert r.stationary[2] == pytest.approx(m.stationary[0])

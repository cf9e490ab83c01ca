import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import product, projective_step
from poelab.cocycle import (
    CocycleSystem,
    MatrixShape,
    PotentialFamily,
    act,
    birkhoff_sum,
    coboundary_direct,
    expansion_preservation_check,
    fiber_orbit,
    reduction_residuals,
    two_sided_reduce,
    uniform_expansion_margin,
)
from poelab.errors import ConfigurationError, DomainError
from poelab.shift import ShiftSpec
from poelab.systems import LOG2, contracting, past_twist, rotation, sys_b
from poelab.transfer import gibbs_model


@st.composite
def matrices(draw):
    """``R(a) diag(s1, +-s2) R(b)`` with singular values in [0.3, 3]."""
    a, b = draw(st.floats(0, math.pi)), draw(st.floats(0, math.pi))
    s1, s2 = draw(st.floats(0.3, 3.0)), draw(st.floats(0.3, 3.0))
    sign = draw(st.sampled_from([1.0, -1.0]))
    return rotation(a) @ np.diag([s1, sign * s2]) @ rotation(b)


angles = st.floats(0.0, math.pi, exclude_max=True)


@settings(max_examples=60, deadline=None)
@given(matrices(), angles)
def test_act_matches_trigonometric_oracle(A, t):
    ang, logn = act(A, t)
    ref_ang, ref_log = projective_step(A, t)
    assert logn == pytest.approx(ref_log, abs=1e-13)
    assert min(abs(ang - ref_ang), math.pi - abs(ang - ref_ang)) < 1e-12


@settings(max_examples=60, deadline=None)
@given(matrices())
def test_matrix_shape_closed_form(A):
    shape = MatrixShape.of(A)
    t = np.linspace(0, math.pi, 257)
    norm2 = np.exp(2 * act(A, t)[1])
    assert np.allclose(norm2, shape.mean + shape.amplitude * np.cos(2 * (t - shape.phase)), rtol=1e-12, atol=1e-12)
    assert shape.smax == pytest.approx(np.linalg.norm(A, 2), rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(matrices(), angles, st.floats(1e-6, 0.2))
def test_log_norm_lipschitz_bound(A, t, h):
    shape = MatrixShape.of(A)
    d = abs(act(A, t + h)[1] - act(A, t)[1])
    assert d <= shape.log_lipschitz * h * (1 + 1e-9) + 1e-14


@settings(max_examples=60, deadline=None)
@given(matrices())
def test_lipschitz_and_curvature_are_attained(A):
    shape = MatrixShape.of(A)
    t = np.linspace(0, math.pi, 20001)
    f = act(A, t)[1]
    h = t[1] - t[0]
    slope = np.abs(np.diff(f)).max() / h
    assert slope <= shape.log_lipschitz * (1 + 1e-9) + 1e-9
    assert slope >= shape.log_lipschitz * (1 - 1e-3) - 1e-9
    curv = np.abs(np.diff(f, 2)).max() / h**2
    # second differences amplify rounding by 1/h^2
    assert curv <= shape.log_curvature * (1 + 1e-6) + 1e-6


def random_system(seed, S=2):
    rng = np.random.default_rng(seed)
    mats = np.array([rotation(rng.uniform(0, np.pi)) @ np.diag(rng.uniform(0.5, 2.5, 2)) for _ in range(S)])
    return CocycleSystem.one_sided(ShiftSpec.full(S), mats)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.lists(st.integers(0, 1), min_size=1, max_size=30), angles)
def test_orbit_and_birkhoff_telescope(seed, word, t):
    sys = random_system(seed)
    orbit = fiber_orbit(sys, word, t)
    cur = t
    for k, a in enumerate(word):
        cur, _ = projective_step(sys.matrices[a], cur)
        assert min(abs(orbit[k + 1] - cur), math.pi - abs(orbit[k + 1] - cur)) < 1e-9
    P = product([sys.matrices[a] for a in word])
    expected = math.log(np.linalg.norm(P @ [math.cos(t), math.sin(t)]))
    assert birkhoff_sum(PotentialFamily(sys), word, t) == pytest.approx(expected, abs=1e-10)


def test_potential_family_sup_norm_is_exact():
    fam = PotentialFamily(random_system(7))
    t = np.linspace(0, math.pi, 4001)
    observed = np.abs(fam.window_values(t)).max()
    assert observed <= fam.sup_norm + 1e-14
    assert observed >= fam.sup_norm - 1e-5


def test_sys_b_expansion_margin():
    s = sys_b()
    chi = uniform_expansion_margin(s.family, gibbs_model(s.spec, s.psi), 1024)
    assert 0 < chi <= LOG2 / 2
    assert chi == pytest.approx(LOG2 / 2, abs=1e-3)


def test_contracting_system_is_not_certified():
    s = contracting()
    assert uniform_expansion_margin(s.family, gibbs_model(s.spec, s.psi), 1024) <= 0


def test_singular_matrix_rejected():
    with pytest.raises(ConfigurationError):
        CocycleSystem.one_sided(ShiftSpec.full(2), [np.eye(2), np.array([[1.0, 1.0], [1.0, 1.0]])])


def test_bad_shape_rejected():
    with pytest.raises(ConfigurationError):
        CocycleSystem(ShiftSpec.full(2), (1, 0), np.zeros((2, 2, 2)))


def test_two_sided_orbit_needs_reduction():
    with pytest.raises(DomainError):
        fiber_orbit(past_twist(), (0, 1, 0), 0.1)


def test_one_sided_reduction_is_identity():
    red = two_sided_reduce(sys_b().cocycle)
    res = reduction_residuals(red)
    assert res.identity
    assert red.reduced is red.original
    assert (red.coboundary_at((0, 1)) == np.eye(2)).all()


def test_past_twist_reduction_residuals():
    red = two_sided_reduce(past_twist())
    assert red.reduced.is_one_sided
    assert red.reduced.window == (0, 1)
    res = reduction_residuals(red, extra=3)
    assert res.cohomology < 1e-9
    assert res.past_independence < 1e-9
    assert not res.identity


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([(1, 0), (1, 1), (2, 0)]))
def test_random_two_sided_reductions(seed, window):
    rng = np.random.default_rng(seed)
    spec = ShiftSpec.golden_mean()
    L = sum(window) + 1
    mats = np.empty((2,) * L + (2, 2))
    for idx in np.ndindex((2,) * L):
        mats[idx] = rotation(rng.uniform(0, np.pi)) @ np.diag(rng.uniform(0.6, 1.8, 2))
    red = two_sided_reduce(CocycleSystem(spec, window, mats))
    res = reduction_residuals(red)
    assert res.cohomology < 1e-9
    assert res.past_independence < 1e-9


def test_coboundary_limit_is_already_constant():
    sys = past_twist()
    red = two_sided_reduce(sys)
    x = (1, 0, 1, 1, 0, 0, 1)
    for n in (1, 2, 4, 6):
        assert np.allclose(coboundary_direct(sys, x, n, red.anchors), red.coboundary_at(x), atol=1e-12)


def test_expansion_preserved_by_reduction():
    sys = past_twist()
    red = two_sided_reduce(sys)
    model = gibbs_model(sys.spec, sys_b().psi)
    cmp = expansion_preservation_check(sys, red.reduced, model, 512)
    assert not cmp.flagged

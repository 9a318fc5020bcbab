import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mhdci.errors import NotSimple, SchemaError
from mhdci.phase_space import (Bivector, ConstraintParams, State15, comass_norm, constitutive_state,
                               distance_to_K, elsasser_state, factorize, from_elsasser, in_K, in_M,
                               is_simple, to_elsasser, wedge, wedge_square, wedge_vector)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
vec3 = arrays(float, 3, elements=finite)
vec4 = arrays(float, 4, elements=finite)


def pfaffian(M):
    return M[0, 1] * M[2, 3] - M[0, 2] * M[1, 3] + M[0, 3] * M[1, 2]


def test_wedge_of_basis_vectors():
    e = np.eye(4)
    # spatial pair: magnetic part is the cross product
    np.testing.assert_array_equal(wedge(e[0], e[1]).b, [0, 0, 1])
    np.testing.assert_array_equal(wedge(e[0], e[1]).e, [0, 0, 0])
    # space-time pair: electric part v_x w_t
    np.testing.assert_array_equal(wedge(e[2], e[3]).e, [0, 0, 1])
    np.testing.assert_array_equal(wedge(e[2], e[3]).b, [0, 0, 0])


def test_matrix_layout_frozen():
    om = Bivector([1.0, 2.0, 3.0], [4.0, 5.0, 6.0])
    expected = np.array([[0, 3, -2, 4],
                         [-3, 0, 1, 5],
                         [2, -1, 0, 6],
                         [-4, -5, -6, 0]], dtype=float)
    np.testing.assert_array_equal(om.matrix(), expected)
    back = Bivector.from_matrix(expected)
    np.testing.assert_array_equal(back.as_array(), [1, 2, 3, 4, 5, 6])


@given(vec3, vec3)
def test_wedge_square_is_twice_pfaffian(b, e):
    om = Bivector(b, e)
    M = om.matrix()
    pf = pfaffian(M)
    assert abs(wedge_square(om) - 2 * pf) <= 1e-12 * (1 + np.abs(M).max() ** 2)
    # det of an antisymmetric 4x4 matrix is the squared Pfaffian
    assert np.isclose(np.linalg.det(M), pf * pf, rtol=1e-8, atol=1e-8)


@given(vec3, vec3)
def test_comass_matches_top_singular_value(b, e):
    om = Bivector(b, e)
    s = np.linalg.svd(om.matrix(), compute_uv=False)[0]
    assert np.isclose(comass_norm(om), s, rtol=1e-10, atol=1e-12)


@given(vec4, vec4)
def test_factorize_reconstructs_simple_bivectors(v, w):
    om = wedge(v, w)
    assert is_simple(om)
    a, b = factorize(om)
    err = np.abs((wedge(a, b) - om).as_array()).max()
    assert err <= 1e-12 * (1 + comass_norm(om))


def test_factorize_rejects_non_simple():
    with pytest.raises(NotSimple):
        factorize(Bivector([1.0, 0, 0], [1.0, 0, 0]))


def test_factorize_zero_is_zero_pair():
    v, w = factorize(Bivector.zero())
    assert not v.any() and not w.any()


@given(vec4, vec4, vec4)
def test_wedge_with_factor_vanishes(v, w, c):
    # (v ^ w) ^ (a v + b w) = 0
    xi = c[0] * v + c[1] * w
    om = wedge(v, w)
    scale = 1 + np.abs(v).max() ** 2 * (1 + np.abs(xi).max())
    assert np.abs(wedge_vector(om, xi)).max() <= 1e-10 * scale * (1 + np.abs(w).max())


def test_state_serialization_roundtrip():
    a = np.arange(18, dtype=float)
    a[3:12] = np.array([[1, 2, 3], [2, 5, 6], [3, 6, 9]]).ravel()
    s = State15.from_array(a)
    np.testing.assert_array_equal(s.as_array(), a)


def test_state_rejects_wrong_length():
    with pytest.raises(SchemaError):
        State15.from_array(np.zeros(17))


@given(vec3, vec3, finite)
def test_elsasser_roundtrip(u, B, pi):
    v = constitutive_state(u, B, pi)
    back = from_elsasser(to_elsasser(v, pi))
    np.testing.assert_allclose(back.as_array(), v.as_array(), atol=1e-10 * (1 + v.norm()))


def test_constitutive_states_lie_in_K(rng):
    p = ConstraintParams(2.0, 1.0)
    for _ in range(100):
        zp = rng.normal(size=3)
        zm = rng.normal(size=3)
        zp *= p.r / np.linalg.norm(zp)
        zm *= p.s / np.linalg.norm(zm)
        v = elsasser_state(zp, zm, rng.uniform(-1, 1))
        assert in_K(v, p)
        assert in_M(v)
    # 0 is at distance max(r, s) from K through the Elsasser norms
    assert distance_to_K(State15.zero(), p) == pytest.approx(2.0)

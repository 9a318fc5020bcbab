import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mhdci.errors import InvalidSegment, NotInCone
from mhdci.phase_space import State15, WaveVector, constitutive_state
from mhdci.scenarios import CONSTITUTIVE_FAMILIES, constitutive_segment
from mhdci.wave_cone import (Kind, SegmentSpec, certificate_ok, classify_segment, cone_residual,
                             find_xi, in_lambda, rigidity_check)

seeds = st.integers(0, 2**32 - 1)


def cone_direction(rng):
    """Random (V, xi) solving the plane-wave conditions by construction."""
    n = rng.normal(size=3)
    n /= np.linalg.norm(n)
    P = np.eye(3) - np.outer(n, n)
    t = rng.normal()
    u, B = P @ rng.normal(size=3), P @ rng.normal(size=3)
    E = t * np.cross(n, B) + rng.normal() * n
    M = rng.normal(size=(3, 3))
    S = -t * (np.outer(u, n) + np.outer(n, u)) + P @ (M + M.T) @ P
    return State15(u, S, B, E), WaveVector(n, t)


@given(seeds)
def test_constructed_directions_have_zero_residual(seed):
    V, xi = cone_direction(np.random.default_rng(seed))
    assert np.abs(cone_residual(V, xi)).max() <= 1e-12 * (1 + V.norm())


@given(seeds)
def test_in_lambda_certifies_constructed_directions(seed):
    V, _ = cone_direction(np.random.default_rng(seed))
    xi = in_lambda(V)
    assert xi is not None
    assert np.linalg.norm(xi.xi_x) > 0
    assert np.abs(cone_residual(V, xi)).max() / np.linalg.norm(xi.xi_x) <= 1e-11 * (1 + V.norm())


@given(seeds)
def test_find_xi_residuals(seed):
    rng = np.random.default_rng(seed)
    u, B = rng.normal(size=3), rng.normal(size=3)
    E = np.cross(rng.normal(size=3), B)
    xi = find_xi(u, B, E)
    assert np.linalg.norm(xi.xi_x) == pytest.approx(1.0)
    assert abs(xi.xi_x @ u) <= 1e-12 * (1 + np.linalg.norm(u))
    assert abs(xi.xi_x @ B) <= 1e-12 * (1 + np.linalg.norm(B))
    r = xi.xi_t * B + np.cross(xi.xi_x, E)
    assert np.abs(r).max() <= 1e-11 * (1 + np.linalg.norm(B) + np.linalg.norm(E))


def test_find_xi_frozen_case():
    # u = e1, B = e2, E = 0: xi_x is along B x u = -e3 with xi_t = 0
    xi = find_xi([1.0, 0, 0], [0, 1.0, 0], [0, 0, 0])
    np.testing.assert_allclose(xi.xi_x, [0, 0, -1])
    assert xi.xi_t == 0.0


@given(seeds)
def test_nonzero_BE_always_rejected(seed):
    rng = np.random.default_rng(seed)
    B = rng.normal(size=3)
    E = rng.normal(size=3)
    E += (0.1 + abs(E @ B)) * B / (B @ B)
    assert abs(B @ E) > 0.05
    with pytest.raises(NotInCone):
        find_xi(rng.normal(size=3), B, E)
    M = rng.normal(size=(3, 3))
    assert in_lambda(State15(rng.normal(size=3), M + M.T, B, E)) is None


def test_certificate_with_zero_spatial_part_is_rejected():
    V = State15.zero()
    assert not certificate_ok(V, WaveVector(np.zeros(3), 1.0))


EXPECTED_KIND = {"zminus": Kind.GOOD2, "zplus": Kind.GOOD2, "fluid": Kind.GOOD1,
                 "parallel": Kind.GOOD3, "flip": Kind.GOOD4, "shear": Kind.BAD,
                 "transverse": Kind.BAD}


@pytest.mark.parametrize("family", CONSTITUTIVE_FAMILIES)
def test_family_verdicts(family, rng):
    for _ in range(50):
        seg = constitutive_segment(rng, family)
        assert classify_segment(seg).kind == EXPECTED_KIND[family]


@given(seeds, st.sampled_from(["zminus", "zplus", "fluid", "parallel", "flip"]))
def test_rigidity_on_good_constitutive_segments(seed, family):
    seg = constitutive_segment(np.random.default_rng(seed), family)
    assert rigidity_check(seg)
    b = seg.base
    assert np.linalg.norm(b.E - np.cross(b.B, b.u)) <= 1e-10 * (1 + b.norm())


def test_bad_constitutive_segments_can_miss_the_identity(rng):
    gaps = []
    for _ in range(50):
        b = constitutive_segment(rng, "transverse").base
        gaps.append(np.linalg.norm(b.E - np.cross(b.B, b.u)))
    assert max(gaps) > 1e-2


def test_segment_endpoints_and_barycentre():
    lo = constitutive_state([1.0, 0, 0], [0, 0, 0])
    hi = constitutive_state([2.0, 0, 0], [0, 0, 0])
    seg = SegmentSpec.from_endpoints(lo, hi, 0.25)
    np.testing.assert_allclose(seg.lower.as_array(), lo.as_array())
    np.testing.assert_allclose(seg.upper.as_array(), hi.as_array())
    np.testing.assert_allclose(seg.base.u, [1.75, 0, 0])


def test_invalid_lambda_rejected():
    V, xi = cone_direction(np.random.default_rng(0))
    with pytest.raises(InvalidSegment):
        classify_segment(SegmentSpec(State15.zero(), V, 1.0, xi))

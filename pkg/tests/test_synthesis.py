import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from mhdci.errors import BadParams, NotInKernel, NotSubsolution, ResolutionExceeded
from mhdci.phase_space import ConstraintParams, State15, State17
from mhdci.scenarios import fluid_laminate_depth2, good2_segment, zero_good_laminate
from mhdci.synthesis import (Box, CubeSpec, FluidPotential, build_sawtooth, certify_state,
                             constant_field, cover_domain, fluid_matrix, improve_step,
                             plateau_fractions, relaxed_residual, synthesize_laminate,
                             synthesize_wave)

P = ConstraintParams(2.0, 1.0)
lams = st.floats(0.05, 0.95)
epss = st.floats(0.02, 0.5)


def kinks(h):
    r, a = h.moll_radius, 1 - h.lam
    return [r, a - r, a + r, 1 - r]


@given(lams, epss)
def test_profile_second_derivative_has_mean_zero(lam, eps):
    h = build_sawtooth(lam, eps)
    mean, _ = quad(lambda s: float(h.d2(s)), 0, 1, points=kinks(h), limit=200)
    assert abs(mean) < 1e-9


@given(lams, epss)
def test_profile_derivative_chain(lam, eps):
    h = build_sawtooth(lam, eps)
    s = np.linspace(0.01, 0.99, 57)
    d = 1e-6
    np.testing.assert_allclose((h.d1(s + d) - h.d1(s - d)) / (2 * d), h.d2(s), atol=1e-6)
    np.testing.assert_allclose((h.d0(s + d) - h.d0(s - d)) / (2 * d), h.d1(s), atol=1e-8)


@given(lams, epss)
def test_profile_is_periodic_with_mean_zero_slope(lam, eps):
    h = build_sawtooth(lam, eps)
    assert h.d0(1 - 1e-12) == pytest.approx(float(h.d0(0.0)), abs=1e-9)
    assert h.d1(1 - 1e-12) == pytest.approx(float(h.d1(0.0)), abs=1e-9)
    mean, _ = quad(lambda s: float(h.d1(s)), 0, 1, points=kinks(h), limit=200)
    assert abs(mean) < 1e-9


def test_profile_plateaus_frozen():
    h = build_sawtooth(0.25, 0.2)
    assert h.moll_radius == pytest.approx(0.0125)
    assert h.plateau(2) == pytest.approx((0.0125, 0.7375))
    assert h.plateau(1) == pytest.approx((0.7625, 0.9875))
    s = (np.arange(200_000) + 0.5) / 200_000
    v = h.d2(s)
    assert np.mean(v == 0.25) == pytest.approx(0.75 - 0.025, abs=1e-4)
    assert np.mean(v == -0.75) == pytest.approx(0.25 - 0.025, abs=1e-4)
    assert v.min() >= -0.75 and v.max() <= 0.25


def test_profile_rejects_bad_parameters():
    with pytest.raises(BadParams):
        build_sawtooth(1.0, 0.1)


def test_cutoff_values_and_gradient(rng):
    cube = CubeSpec(np.array([0.1, -0.2, 0.3, 0.0]), 0.8, 0.3)
    assert cube.cutoff(cube.center[None])[0][0] == 1.0
    outside = cube.center + np.array([[0.41, 0, 0, 0]])
    assert cube.cutoff(outside)[0][0] == 0.0
    Y = cube.sample(rng, 256)
    chi, grad, _ = cube.cutoff(Y)
    d = 1e-6
    for k in range(4):
        e = np.zeros(4)
        e[k] = d
        fd = (cube.cutoff(Y + e)[0] - cube.cutoff(Y - e)[0]) / (2 * d)
        np.testing.assert_allclose(grad[:, k], fd, atol=1e-5 * cube.grad_bound())


def random_kernel_matrix(rng):
    xi = rng.normal(size=4)
    Pp = np.eye(4) - np.outer(xi, xi) / (xi @ xi)
    M = rng.normal(size=(4, 4))
    U = Pp @ (M + M.T) @ Pp
    # remove the (4,4) entry along the direction of e4 projected off xi
    f = Pp @ np.eye(4)[3]
    U -= U[3, 3] / f[3] ** 2 * np.outer(f, f)
    return U, xi


@given(st.integers(0, 2**32 - 1))
def test_fluid_potential_identities(seed):
    rng = np.random.default_rng(seed)
    U, xi = random_kernel_matrix(rng)
    fp = FluidPotential(U, xi)
    scale = 1 + np.abs(U).max()
    np.testing.assert_allclose(fp.symbol(xi)[0], U, atol=1e-10 * scale)
    eta = rng.normal(size=(20, 4))
    Pe = fp.symbol(eta)
    # divergence-free output: P(eta) eta = 0 for every covector
    assert np.abs(np.einsum("nij,nj->ni", Pe, eta)).max() <= 1e-10 * scale
    np.testing.assert_allclose(Pe, np.transpose(Pe, (0, 2, 1)), atol=1e-12 * scale)


def test_fluid_potential_rejects_matrix_outside_kernel():
    with pytest.raises(NotInKernel):
        FluidPotential(np.diag([1.0, 0, 0, 0]), np.array([1.0, 0, 0, 0]))


def test_fluid_matrix_layout():
    S = np.arange(9.0).reshape(3, 3)
    S = S + S.T
    U = fluid_matrix(State15([1.0, 2, 3], S, np.zeros(3), np.zeros(3)))
    np.testing.assert_array_equal(U[:3, :3], S)
    np.testing.assert_array_equal(U[3], [1, 2, 3, 0])


def test_good2_cancellation_decays_like_inverse_frequency(rng):
    seg = good2_segment(P, 0.5)
    cube = CubeSpec(np.zeros(4), 1.0, 0.05)
    Y = cube.sample(rng, 50_000)
    ells = [8, 16, 32]
    errs = [synthesize_wave(State17.lift(seg.base), seg, cube, ell=e).cancellation_error(Y).max()
            for e in ells]
    slope = np.polyfit(np.log(ells), np.log(errs), 1)[0]
    assert -1.2 <= slope <= -0.8


def test_good2_plateau_fractions(rng):
    seg = good2_segment(P, 0.5)
    cube = CubeSpec(np.zeros(4), 1.0, 0.05)
    wave = synthesize_wave(State17.lift(seg.base), seg, cube, ell=16)
    fr = plateau_fractions(wave, 2, rng, n=40_000)
    assert fr == pytest.approx([seg.lam, 1 - seg.lam], abs=0.05)


def test_nested_fluid_laminate_weights(rng):
    lam = fluid_laminate_depth2()
    cube = CubeSpec(np.zeros(4), 1.0, 0.05)
    wave = synthesize_laminate(State17.zero(), lam, cube, eps=0.05, periods=32)
    fr = plateau_fractions(wave, 4, rng, n=40_000)
    np.testing.assert_allclose(fr, 0.25, atol=0.05)


def test_zero_laminate_plateau_values_are_atoms(rng):
    lam = zero_good_laminate(P, 0.5)
    atoms = lam.atoms()
    cube = CubeSpec(np.zeros(4), 1.0, 0.1)
    wave = synthesize_laminate(State17.zero(), lam, cube, eps=0.1, periods=8)
    s = wave.evaluate(cube.sample(rng, 5000))
    hit = s.atom >= 0
    assert hit.mean() > 0.3
    got = s.states()[hit]
    want = np.array([atoms[j].state.as_array() for j in s.atom[hit]])
    assert np.abs(got - want).max() <= 1e-12


def test_wave_solves_linear_system(rng):
    seg = good2_segment(P, 0.5)
    cube = CubeSpec(np.zeros(4), 1.0, 0.05)
    wave = synthesize_wave(State17.lift(seg.base), seg, cube, ell=8)
    Y = cube.sample(rng, 256)
    s = wave.evaluate(Y)
    res = relaxed_residual(wave, Y)
    scale = np.maximum(s.freq, 1) * (1 + np.abs(s.states()).max())
    assert (res / scale).max() < 1e-6


def test_cover_domain_uniform_rule():
    box = Box.unit()
    cubes = cover_domain(box, lambda c: c.side <= 0.5)
    assert len(cubes) == 16
    assert sum(c.volume for c in cubes) == pytest.approx(1.0)
    centers = np.array([c.center for c in cubes])
    assert len({tuple(c) for c in centers}) == 16


def test_cover_domain_reports_unreachable_resolution():
    with pytest.raises(ResolutionExceeded):
        cover_domain(Box.unit(), lambda c: False, max_depth=1)


def test_zero_state_is_certified():
    pair = certify_state(State15.zero(), P)
    assert pair is not None
    tau, eps = pair
    assert 0 < tau < 1 and eps > 0


def test_improve_rejects_non_subsolution():
    W = State17.lift(State15([3.0, 0, 0], np.zeros((3, 3)), np.zeros(3), np.zeros(3)))
    with pytest.raises(NotSubsolution):
        improve_step(constant_field(W), Box.unit(), P, n_cert=20)

"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run under pytest, or directly with `python tests/test_acceptance.py`.
"""

import sys
import time

import numpy as np
import pytest

from mhdci import quantities as Q
from mhdci.laminates import HullParams, Laminate, decompose_full, energy_estimate, goodify, \
    relax_normalization, sample_relaxed_state
from mhdci.phase_space import Bivector, ConstraintParams, State15, State17, factorize, wedge, \
    wedge_square
from mhdci.scenarios import abc_field, beltrami_field, constitutive_segment, default_phi, \
    default_psi0, fluid_segment, good2_segment, shear_velocity
from mhdci.synthesis import Box, CubeSpec, constant_field, improve_step, plateau_fractions, \
    synthesize_wave
from mhdci.wave_cone import Kind, certificate_ok, classify_segment, cone_residual, find_xi, \
    in_lambda, rigidity_check
from mhdci.errors import NotInCone

P = ConstraintParams(2.0, 1.0)


class Check:
    def __init__(self, number, title, limit=None):
        self.number, self.title, self.limit = number, title, limit
        self.failures = []
        self.notes = []

    def expect(self, ok, message):
        if not ok:
            self.failures.append(message)

    def note(self, message):
        self.notes.append(message)

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0
        if exc[0] is not None:
            self.failures.append(f"{exc[0].__name__}: {exc[1]}")
        if self.limit is not None and self.seconds > self.limit:
            self.failures.append(f"runtime {self.seconds:.1f}s over {self.limit}s")
        status = "PASS" if not self.failures else "FAIL"
        detail = "; ".join(self.failures or self.notes)
        line = f"[{status}] criterion {self.number} {self.title} ({self.seconds:.1f}s): {detail}"
        print(line, flush=True)
        return True

    @property
    def ok(self):
        return not self.failures


# --- 1. bivector algebra ---------------------------------------------------------------

def check_bivectors(rng, n=10_000):
    with Check(1, "bivector algebra", limit=1.0) as c:
        b, e = rng.normal(size=(n, 3)), rng.normal(size=(n, 3))
        om = Bivector(b, e)
        M = om.matrix()
        pf = M[:, 0, 1] * M[:, 2, 3] - M[:, 0, 2] * M[:, 1, 3] + M[:, 0, 3] * M[:, 1, 2]
        scale = 1 + np.linalg.norm(b, axis=1) * np.linalg.norm(e, axis=1)
        # om ^ om by the Pfaffian of the matrix against 2 B.E
        d1 = np.max(np.abs(2 * pf - 2 * np.sum(b * e, 1)) / scale)
        d2 = np.max(np.abs(wedge_square(om) - 2 * pf) / scale)
        c.expect(d1 <= 1e-13 and d2 <= 1e-13, f"wedge square defect {max(d1, d2):.1e}")
        v, w = rng.normal(size=(n, 4)), rng.normal(size=(n, 4))
        om = wedge(v, w)
        a, bb = factorize(om)
        back = wedge(a, bb)
        size = 1 + np.linalg.norm(om.as_array(), axis=1)
        rec = np.max(np.abs(back.as_array() - om.as_array()).max(1) / size)
        c.expect(rec <= 1e-12, f"reconstruction error {rec:.1e}")
        c.note(f"max wedge defect {max(d1, d2):.1e}, reconstruction {rec:.1e}")
    return c


# --- 2. wave cone ----------------------------------------------------------------------

def _cone_direction(rng):
    n = rng.normal(size=3)
    n /= np.linalg.norm(n)
    Pp = np.eye(3) - np.outer(n, n)
    t = rng.normal()
    u, B = Pp @ rng.normal(size=3), Pp @ rng.normal(size=3)
    E = t * np.cross(n, B) + rng.normal() * n
    A = rng.normal(size=(3, 3))
    S = -t * (np.outer(u, n) + np.outer(n, u)) + Pp @ (A + A.T) @ Pp
    return State15(u, S, B, E)


def check_wave_cone(rng, n=10_000):
    with Check(2, "wave-cone certificates", limit=5.0) as c:
        worst_find = worst_lambda = 0.0
        missing = accepted = 0
        for _ in range(n):
            u, B = rng.normal(size=3), rng.normal(size=3)
            E = np.cross(rng.normal(size=3), B)
            xi = find_xi(u, B, E)
            r = np.concatenate([[xi.xi_x @ u, xi.xi_x @ B], xi.xi_t * B + np.cross(xi.xi_x, E)])
            worst_find = max(worst_find, np.abs(r).max() / (1 + np.linalg.norm(B) + np.linalg.norm(E)))
        for _ in range(n):
            V = _cone_direction(rng)
            xi = in_lambda(V)
            if xi is None:
                missing += 1
                continue
            res = np.abs(cone_residual(V, xi)).max() / np.linalg.norm(xi.xi_x) / (1 + V.norm())
            worst_lambda = max(worst_lambda, res)
        for _ in range(n // 10):
            B = rng.normal(size=3)
            E = rng.normal(size=3)
            E += (0.1 + abs(E @ B)) * B / (B @ B)
            S = rng.normal(size=(3, 3))
            if in_lambda(State15(rng.normal(size=3), S + S.T, B, E)) is not None:
                accepted += 1
            try:
                find_xi(rng.normal(size=3), B, E)
                accepted += 1
            except NotInCone:
                pass
        c.expect(worst_find <= 1e-11, f"findXi residual {worst_find:.1e}")
        c.expect(worst_lambda <= 1e-11 and missing == 0,
                 f"inLambda residual {worst_lambda:.1e}, {missing} uncertified")
        c.expect(accepted == 0, f"{accepted} states with B.E != 0 accepted")
        c.note(f"findXi {worst_find:.1e}, inLambda {worst_lambda:.1e}, B.E != 0 rejected")
    return c


# --- 3. hull decomposition -------------------------------------------------------------

def check_hull(rng, per_tau=500):
    with Check(3, "hull decomposition", limit=30.0) as c:
        worst_k = worst_bary = 0.0
        uncertified = estimate_fail = 0
        for tau in (0.5, 0.9):
            hp = HullParams(P, tau)
            for i in range(per_tau):
                v = sample_relaxed_state(hp, rng, 0.9 if i % 2 else 0.0)
                lam = decompose_full(v, hp, annotate=False)
                worst_k = max(worst_k, lam.max_distance_to_K(P))
                worst_bary = max(worst_bary, lam.barycenter_error())
                uncertified += sum(not certificate_ok(nd.direction, nd.certificate)
                                   for _, nd in lam.internal_nodes())
                if tau == 0.9:
                    estimate_fail += not energy_estimate(lam, P)[0]
        c.expect(worst_k <= 1e-9, f"atom distance to K {worst_k:.1e}")
        c.expect(worst_bary <= 1e-10, f"barycentre error {worst_bary:.1e}")
        c.expect(uncertified == 0, f"{uncertified} uncertified splits")
        c.expect(estimate_fail == 0, f"{estimate_fail} laminates violate the distance estimate")
        c.note(f"{2 * per_tau} states: distance {worst_k:.1e}, barycentre {worst_bary:.1e}")
    return c


# --- 4. rigidity -----------------------------------------------------------------------

def check_rigidity(rng, n=1000):
    with Check(4, "rigidity of good segments") as c:
        families = ["zminus", "zplus", "fluid", "parallel", "flip"]
        worst = 0.0
        kinds = set()
        for i in range(n):
            seg = constitutive_segment(rng, families[i % len(families)])
            v = classify_segment(seg)
            c.expect(v.good, "generated segment is not good")
            kinds.add(v.kind.value)
            b = seg.base
            worst = max(worst, np.linalg.norm(b.E - np.cross(b.B, b.u)) / (1 + b.norm()))
            if not rigidity_check(seg):
                c.expect(False, "rigidity_check rejected a good segment")
        c.expect(worst <= 1e-10, f"|E0 - B0 x u0| = {worst:.1e}")
        c.note(f"{n} segments of kinds {sorted(kinds)}, max |E0 - B0 x u0| {worst:.1e}")
    return c


# --- 5. goodify ------------------------------------------------------------------------

def _bad_laminate(rng, tau):
    inner = P.scaled(tau)
    zp = rng.normal(size=3)
    zm = rng.normal(size=3)
    zp *= rng.uniform(0, 0.9) * inner.r / np.linalg.norm(zp)
    zm *= rng.uniform(0, 0.9) * inner.s / np.linalg.norm(zm)
    lam = relax_normalization(zp, zm, rng.uniform(-0.1, 0.1), inner)
    lam.annotate()
    bad = [nd for _, nd in lam.internal_nodes() if nd.verdict.kind == Kind.BAD]
    return Laminate(bad[-1])


def check_goodify(rng, n=100):
    with Check(5, "goodify") as c:
        remaining = 0
        worst = 0.0
        for i in range(n):
            tau = 0.5 if i % 2 else 0.9
            lam = _bad_laminate(rng, tau)
            c.expect(lam.bad_count() >= 1, "seed laminate has no bad split")
            good = goodify(lam, HullParams(P, tau))
            remaining += good.bad_count()
            worst = max(worst, good.barycenter_error())
        c.expect(remaining == 0, f"{remaining} bad verdicts remain")
        c.expect(worst <= 1e-10, f"barycentre error {worst:.1e}")
        c.note(f"{n} laminates, 0 bad verdicts, barycentre error {worst:.1e}")
    return c


# --- 6. cancellation decay -------------------------------------------------------------

def check_cancellation(rng, eps=0.05):
    with Check(6, "cancellation decay", limit=120.0) as c:
        seg = good2_segment(P, 0.5)
        cube = CubeSpec(np.zeros(4), 1.0, eps)
        Y = cube.sample(rng, 100_000)
        ells = [8, 16, 32, 64]
        errs, fracs = [], []
        for ell in ells:
            wave = synthesize_wave(State17.lift(seg.base), seg, cube, ell=ell, eps=eps)
            errs.append(float(wave.cancellation_error(Y).max()))
            fracs.append(plateau_fractions(wave, 2, rng, n=100_000))
        slope = float(np.polyfit(np.log(ells), np.log(errs), 1)[0])
        c.expect(abs(slope + 1) <= 0.2, f"slope {slope:.3f}")
        target = np.array([seg.lam, 1 - seg.lam])
        dev = max(np.abs(f - target).max() for f in fracs)
        # an asymmetric segment pins down which plateau carries which weight
        fl = fluid_segment(0.3)
        wave = synthesize_wave(State17.lift(fl.base), fl, cube, ell=16, eps=eps)
        dev_fl = np.abs(plateau_fractions(wave, 2, rng, n=100_000) - [0.3, 0.7]).max()
        c.expect(dev <= eps and dev_fl <= eps, f"plateau deviation {max(dev, dev_fl):.3f}")
        c.note(f"slope {slope:.3f}, plateau deviation {max(dev, dev_fl):.3f} <= {eps}")
    return c


# --- 7. improvement step ---------------------------------------------------------------

def check_improve():
    with Check(7, "one improvement step", limit=300.0) as c:
        field, rep = improve_step(constant_field(State17.zero()), Box.unit(), P, n_cert=1000, seed=0)
        c.expect(rep.gain > 0, f"gain {rep.gain:.3e}")
        c.expect(rep.certified == rep.samples == 1000, f"{rep.certified}/{rep.samples} certified")
        c.note(f"gain {rep.gain:.4f} of deficit {rep.deficit:.2f} (ratio {rep.ratio:.4f}), "
               f"{rep.certified}/{rep.samples} certified, relative residual "
               f"{rep.relative_residual_after:.1e}")
    return c


# --- 8. helicity -----------------------------------------------------------------------

def check_helicity(n_maxwell=32, dts=(0.05, 0.025)):
    with Check(8, "magnetic helicity", limit=60.0) as c:
        hel = Q.magnetic_helicity(beltrami_field(64))
        c.expect(abs(hel - (2 * np.pi) ** 3) <= 1e-6, f"Beltrami helicity off by {hel - (2 * np.pi) ** 3:.1e}")
        B0, u = abc_field(n_maxwell), shear_velocity(n_maxwell)
        scale = float(np.sqrt(np.mean(B0.samples**2)))
        drifts = []
        for dt in dts:
            Bs, Es = Q.evolve_induction(B0, u, dt, 1.0)
            rep = Q.helicity_drift(Bs, Es, dt)
            budget = 10 * (dt**2 + n_maxwell**-2) * scale
            c.expect(rep.drift_per_time <= budget, f"drift {rep.drift_per_time:.1e} over budget {budget:.1e}")
            drifts.append(rep.drift_per_time)
        c.note(f"Beltrami error {abs(hel - (2 * np.pi) ** 3):.1e}, drift per time "
               + ", ".join(f"{d:.1e}" for d in drifts))
    return c


# --- 9. 2D rigidity --------------------------------------------------------------------

def check_2d(n=256, dts=(0.01, 0.005)):
    with Check(9, "2D mean-square potential", limit=120.0) as c:
        phi, psi0 = default_phi(n), default_psi0(n)
        drifts = []
        for dt in dts:
            evo = Q.evolve_2d(phi, psi0, dt, 1.0)
            drifts.append(evo.msmp_drift)
            floor = Q.poincare_floor(evo, slack=10 * evo.msmp_drift)
            c.expect(floor.ok, f"energy {floor.min_magnetic_energy:.3f} below the floor")
        ratio = drifts[0] / max(drifts[1], 1e-300)
        c.expect(ratio >= 8, f"convergence ratio {ratio:.1f}")
        c.note(f"drift {drifts[0]:.1e} -> {drifts[1]:.1e} (ratio {ratio:.1f}), floor holds")
    return c


CHECKS = {
    1: lambda: check_bivectors(np.random.default_rng(1)),
    2: lambda: check_wave_cone(np.random.default_rng(2)),
    3: lambda: check_hull(np.random.default_rng(3)),
    4: lambda: check_rigidity(np.random.default_rng(4)),
    5: lambda: check_goodify(np.random.default_rng(5)),
    6: lambda: check_cancellation(np.random.default_rng(6)),
    7: check_improve,
    8: check_helicity,
    9: check_2d,
}


@pytest.mark.parametrize("number", sorted(CHECKS))
def test_criterion(number, capsys):
    with capsys.disabled():
        print()
        c = CHECKS[number]()
    assert c.ok, "; ".join(c.failures)


if __name__ == "__main__":
    results = [CHECKS[k]() for k in sorted(CHECKS)]
    sys.exit(0 if all(r.ok for r in results) else 1)

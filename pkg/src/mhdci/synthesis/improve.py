"""One step of the convex-integration scheme: add laminate-driven waves to a subsolution."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import BadParams, MhdciError, NotSubsolution
from ..laminates import HullParams, decompose_full, goodify
from ..phase_space import ConstraintParams, State15, State17
from .covering import Box, cover_domain, oscillation_rule
from .profiles import CubeSpec
from .waves import WaveSample, relaxed_residual, synthesize_laminate

CERT_TAUS = tuple(np.round(np.linspace(0.05, 0.99, 48), 6))
CERT_EPS_GROWTH = 2.0


def _eps_ladder(params: ConstraintParams, tau):
    """Neighbourhood radii from the default up to a quarter of the margin min(r, s)(1 - tau)."""
    eps = HullParams(params, tau).eps_tau
    cap = 0.25 * min(params.r, params.s) * (1.0 - tau)
    out = []
    while eps <= cap:
        out.append(eps)
        eps *= CERT_EPS_GROWTH
    return out


def certify_state(state: State15, params: ConstraintParams, taus=CERT_TAUS, widen=True):
    """(tau, eps_tau) for which decompose_full yields a valid laminate, or None.

    Radii above the default are only accepted through a full check of the
    resulting laminate (certificates, barycentre, atoms on K_{r,s}), so a
    returned pair always comes with a valid certificate.
    """
    ladders = [(float(t), _eps_ladder(params, float(t))) for t in taus]
    depth = max(len(ld) for _, ld in ladders) if widen else 1
    for k in range(depth):
        for tau, ladder in ladders:
            if k >= len(ladder):
                continue
            hp = HullParams(params, tau, ladder[k])
            try:
                lam = decompose_full(state, hp, annotate=False, check=True)
            except MhdciError:
                continue
            if lam.certify(params)["ok"]:
                return tau, float(hp.eps_tau)
    return None


def certify_samples(states, params, **kw):
    """Boolean array: which of the (N, 18) sampled states are certified."""
    return np.array([certify_state(State15.from_array(s), params, **kw) is not None for s in states])


def energy_density(states):
    u, B = states[:, :3], states[:, 12:15]
    return np.sum(u * u, 1) + np.sum(B * B, 1)


def constraint_excursion(states, params: ConstraintParams):
    """Largest amount by which |u+B| or |u-B| exceeds r or s."""
    u, B = states[:, :3], states[:, 12:15]
    ex = np.maximum(np.linalg.norm(u + B, axis=1) - params.r, np.linalg.norm(u - B, axis=1) - params.s)
    return float(ex.max())


class ImprovedField:
    """Subsolution plus localized perturbations on disjoint cubes."""

    def __init__(self, base, waves):
        self.base = base
        self.waves = list(waves)

    def __call__(self, Y):
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        out = self.base(Y)
        for wave in self.waves:
            m = wave.cube.contains(Y)
            if not m.any():
                continue
            s = wave.evaluate(Y[m])
            W0 = wave.base
            out.u[m] += s.u - W0.u
            out.S[m] += s.S - W0.S
            out.v[m] += s.v - W0.v
            out.w[m] += s.w - W0.w
            out.atom[m] = s.atom
            out.freq[m] = np.maximum(out.freq[m], s.freq)
        return out

    evaluate = __call__


@dataclass
class ImproveReport:
    gain: float
    deficit: float
    ratio: float
    max_excursion: float
    residual_before: float
    residual_after: float
    relative_residual_before: float
    relative_residual_after: float
    weak_proxy: float
    certified: int
    samples: int
    cubes: int
    skipped: int
    gamma: float
    seconds: float
    details: dict = field(default_factory=dict)

    def to_dict(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "details"}
        d.update(self.details)
        return d


def _test_functions(box: Box):
    """Five fixed smooth weights on the box used for the weak-distance proxy."""
    lo, hi = box.lo, box.hi

    def unit(Y):
        return (Y - lo) / (hi - lo)

    def bump(Y):
        z = unit(Y)
        return np.prod(np.sin(np.pi * z), axis=1)

    fns = [
        bump,
        lambda Y: bump(Y) * np.cos(2 * np.pi * unit(Y)[:, 0]),
        lambda Y: bump(Y) * unit(Y)[:, 1],
        lambda Y: bump(Y) * np.sin(np.pi * unit(Y)[:, 3]) ** 2,
        lambda Y: bump(Y) * np.exp(-np.sum((unit(Y) - 0.5) ** 2, 1)),
    ]
    return fns


def weak_proxy(field_a, field_b, box, rng, n=50_000):
    """max over test weights g and components of |mean_box (A - B) g|."""
    Y = box.sample(rng, n)
    diff = field_a(Y).states() - field_b(Y).states()
    return float(max(np.abs(np.mean(diff * g(Y)[:, None], 0)).max() for g in _test_functions(box)))


def _residuals(field_fn, Y):
    """Max FD residual, absolute and relative to frequency times field size."""
    s = field_fn(Y)
    res = relaxed_residual(field_fn, Y, freq=s.freq)
    scale = np.maximum(s.freq, 1.0) * (1.0 + np.abs(s.states()).max())
    return float(res.max()), float((res / scale).max())


def center_laminate(state: State15, params: ConstraintParams, tau, tau_inner=None):
    """Good laminate at the state with atoms near K_{tau r, tau s}."""
    inner = params.scaled(tau)
    tau_inner = 0.5 if tau_inner is None else tau_inner
    lam = decompose_full(state, HullParams(inner, tau_inner), annotate=False, check=True)
    return goodify(lam, HullParams(params, tau))


def improve_step(field_fn, domain, params: ConstraintParams, tau=0.5, gamma=None, eps=0.9,
                 periods=512, ells=None, n_cert=1000, n_mc=20_000, seed=0, max_depth=4,
                 tau_inner=None, check_input=True):
    """Add a nested wave for the goodified centre laminate on every cube of a dyadic cover.

    field_fn maps (N, 4) points to a WaveSample.  Raises NotSubsolution when
    sampled input values are not certified.  Returns (new field, report).
    """
    if not 0 < tau < 1:
        raise BadParams("tau must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    t0 = time.time()
    box = Box.of(domain)
    Yc = box.sample(rng, n_cert)
    before = field_fn(Yc).states()
    if check_input:
        ok = certify_samples(before, params)
        if not ok.all():
            raise NotSubsolution(f"{int((~ok).sum())} of {len(ok)} sampled values are not certified")
    deficit_density = 0.5 * (params.r**2 + params.s**2) - energy_density(before)
    if gamma is None:
        gamma = float(np.sqrt(max(deficit_density.min(), 0.0) / 10.0))
    rule = oscillation_rule(gamma, field_fn, rng=np.random.default_rng(seed + 1))
    cubes = cover_domain(box, rule, max_depth=max_depth, epsilon=eps)
    waves, skipped = [], []
    for cube in cubes:
        W0 = field_fn(cube.center[None, :])
        W = State17(W0.u[0], W0.S[0], W0.v[0], W0.w[0])
        try:
            lam = center_laminate(W.project(), params, tau, tau_inner)
            waves.append(synthesize_laminate(W, lam, cube, ells=ells, eps=eps, periods=periods))
        except MhdciError as err:
            skipped.append((cube.center.tolist(), type(err).__name__))
    new = ImprovedField(field_fn, waves)

    Ym = box.sample(rng, n_mc)
    e_before = energy_density(field_fn(Ym).states())
    e_after = energy_density(new(Ym).states())
    vol = box.volume
    gain = float(np.mean(e_after - e_before) * vol)
    deficit = float(np.mean(0.5 * (params.r**2 + params.s**2) - e_before) * vol)

    after = new(Yc).states()
    certified = int(certify_samples(after, params).sum())
    Yr = Yc[: min(200, len(Yc))]
    res_before, rel_before = _residuals(field_fn, Yr)
    res_after, rel_after = _residuals(new, Yr)
    report = ImproveReport(
        gain=gain, deficit=deficit, ratio=gain / deficit if deficit > 0 else float("nan"),
        max_excursion=constraint_excursion(after, params), residual_before=res_before,
        residual_after=res_after, relative_residual_before=rel_before,
        relative_residual_after=rel_after, weak_proxy=weak_proxy(new, field_fn, box, rng),
        certified=certified, samples=len(Yc), cubes=len(cubes), skipped=len(skipped),
        gamma=gamma, seconds=time.time() - t0, details={"skipped_cubes": skipped})
    return new, report


improveStep = improve_step

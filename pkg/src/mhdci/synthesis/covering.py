"""Dyadic covers of space-time boxes and removal of degenerate Clebsch regions."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..errors import BadParams, CoverFailure, ResolutionExceeded
from .profiles import CubeSpec
from .waves import WaveSample

_CORNERS = np.array(list(itertools.product((-1.0, 1.0), repeat=4)))


@dataclass(frozen=True)
class Box:
    """Axis-aligned box [lo, hi] in space-time."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(4)
        hi = np.asarray(self.hi, dtype=float).reshape(4)
        if np.any(hi <= lo):
            raise BadParams("box must have positive extent in every direction")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def unit(cls):
        return cls(np.zeros(4), np.ones(4))

    @classmethod
    def of(cls, domain):
        if isinstance(domain, Box):
            return domain
        if isinstance(domain, CubeSpec):
            h = 0.5 * domain.side
            return cls(domain.center - h, domain.center + h)
        lo, hi = domain
        return cls(lo, hi)

    @property
    def volume(self):
        return float(np.prod(self.hi - self.lo))

    def contains(self, Y):
        return np.all((Y >= self.lo) & (Y <= self.hi), axis=-1)

    def sample(self, rng, n):
        return self.lo + (self.hi - self.lo) * rng.random((n, 4))


def _probe_points(cube: CubeSpec, rng, n):
    h = 0.5 * cube.side
    pts = [cube.center[None, :], cube.center + h * _CORNERS]
    if n > 0:
        pts.append(cube.center + h * (2.0 * rng.random((n, 4)) - 1.0))
    return np.concatenate(pts)


def _initial_tiling(box: Box, epsilon):
    side = float(np.min(box.hi - box.lo))
    counts = np.floor((box.hi - box.lo) / side + 1e-12).astype(int)
    cubes = []
    for idx in itertools.product(*[range(c) for c in counts]):
        center = box.lo + (np.array(idx) + 0.5) * side
        cubes.append(CubeSpec(center, side, epsilon))
    return cubes


def _children(cube: CubeSpec):
    q = 0.25 * cube.side
    return [cube.__class__(cube.center + q * c, 0.5 * cube.side, cube.epsilon, cube.frame)
            for c in _CORNERS]


def oscillation_rule(tol, field, n_probe=16, rng=None):
    """Size rule sup_Q |W - W(center)| < tol, estimated on centre, corners and random probes.

    tol may be a number or a callable of the centre sample.
    """
    rng = np.random.default_rng(0) if rng is None else rng

    def rule(cube):
        Y = _probe_points(cube, rng, n_probe)
        vals = field(Y).states()
        spread = float(np.max(np.linalg.norm(vals - vals[0], axis=1)))
        bound = tol(vals[0]) if callable(tol) else tol
        return spread < bound

    return rule


def cover_domain(domain, size_rule, max_depth=8, coverage=0.97, epsilon=0.05):
    """Pairwise disjoint dyadic cubes satisfying size_rule, by greedy refinement.

    Cubes still failing the rule at max_depth are dropped; if the kept cubes
    cover less than `coverage` of the box, ResolutionExceeded is raised.
    """
    box = Box.of(domain)
    queue = [(c, 0) for c in _initial_tiling(box, epsilon)]
    kept, dropped = [], 0.0
    while queue:
        cube, depth = queue.pop()
        if size_rule(cube):
            kept.append(cube)
        elif depth >= max_depth:
            dropped += cube.volume
        else:
            queue.extend((c, depth + 1) for c in _children(cube))
    covered = sum(c.volume for c in kept) / box.volume
    if covered < coverage:
        raise ResolutionExceeded(f"cover reaches {covered:.3f} < {coverage} at depth {max_depth}")
    kept.sort(key=lambda c: tuple(c.center))
    return kept


def cover_fraction(cubes, domain):
    return sum(c.volume for c in cubes) / Box.of(domain).volume


coverDomain = cover_domain


# --- flattening degenerate Clebsch regions ---------------------------------------------

class FlattenedField:
    """A field whose Clebsch factors are pulled back by g(y) = y + chi(y)(c - y) on chosen cubes.

    On the plateau of chi the factors vanish identically, and elsewhere the
    projected bivector changes by at most |omega|(sup |Dg|)^2.
    """

    def __init__(self, field, cubes):
        self.field = field
        self.cubes = list(cubes)

    def __call__(self, Y):
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        out = self.field(Y)
        for cube in self.cubes:
            m = cube.contains(Y)
            if not m.any():
                continue
            Ym = Y[m]
            chi, grad, _ = cube.cutoff(Ym)
            d = cube.center - Ym
            G = Ym + chi[:, None] * d
            inner = self.field(G)
            # Dg^T a = (1 - chi) a + grad chi ((c - y) . a)
            pull = lambda a: (1.0 - chi)[:, None] * a + grad * np.sum(d * a, 1)[:, None]  # noqa: E731
            out.v[m] = pull(inner.v)
            out.w[m] = pull(inner.w)
        return out

    evaluate = __call__


def _pullback_gain(cube: CubeSpec):
    """Bound on |Dg| over the cube."""
    return 1.0 + 2.0 * cube.side * cube.grad_bound()


def flatten_clebsch(field, domain, eps=0.05, nondegenerate_tol=None, max_depth=6,
                    n_probe=16, rng=None, n_measure=20_000, cube_eps=0.05):
    """Modify the Clebsch factors so that almost every point is either nondegenerate or flat.

    Cubes where |v ^ w| stays above nondegenerate_tol, or where v and w
    vanish, are kept.  Cubes where |v ^ w| stays below eps / |Dg|^2 are
    flattened by the pullback.  Others are refined.  Returns the modified
    field and the sampled fraction of good points.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    box = Box.of(domain)
    thresh = eps * 1e-3 if nondegenerate_tol is None else nondegenerate_tol
    queue = [(c, 0) for c in _initial_tiling(box, cube_eps)]
    flat = []
    while queue:
        cube, depth = queue.pop()
        Y = _probe_points(cube, rng, n_probe)
        s = field(Y)
        om = np.linalg.norm(s.omega().as_array(), axis=1)
        factors = np.abs(np.concatenate([s.v, s.w], axis=1)).max()
        if om.min() > thresh or factors == 0.0:
            continue
        if om.max() * _pullback_gain(cube) ** 2 < eps:
            flat.append(cube)
        elif depth < max_depth:
            queue.extend((c, depth + 1) for c in _children(cube))
    out = FlattenedField(field, flat)
    Y = box.sample(rng, n_measure)
    fraction = good_fraction(out, Y, thresh)
    if fraction <= 1.0 - eps:
        raise CoverFailure(f"only {fraction:.3f} of the domain is flat or nondegenerate")
    return out, fraction


def good_fraction(field, Y, thresh=0.0):
    """Sampled fraction of points with v ^ w nonzero or with v = w = 0."""
    s = field(Y)
    om = np.linalg.norm(s.omega().as_array(), axis=1)
    zero = np.all(np.concatenate([s.v, s.w], axis=1) == 0.0, axis=1)
    return float(np.mean((om > thresh) | zero))


flattenClebsch = flatten_clebsch


def constant_field(W):
    """The constant field W as a callback."""
    return lambda Y: WaveSample.constant(W, len(np.atleast_2d(Y)))

"""Reference inputs shared by the command line and the test-suite."""

from __future__ import annotations

import numpy as np

from .laminates import HullParams, Laminate, goodify, relax_normalization
from .phase_space import ConstraintParams, State15, WaveVector, constitutive_state
from .quantities import TorusField3, grid
from .wave_cone import Kind, SegmentSpec, classify_segment


def zero_good_laminate(params: ConstraintParams, tau=0.5) -> Laminate:
    """Goodified laminate with barycentre 0 and atoms near K_{tau r, tau s}."""
    lam = relax_normalization(np.zeros(3), np.zeros(3), 0.0, params.scaled(tau))
    lam.root.state = State15.zero()
    return goodify(lam, HullParams(params, tau))


def good_segments(lam: Laminate, kind: Kind):
    return [n.segment() for _, n in lam.internal_nodes() if classify_segment(n.segment()).kind == kind]


def good2_segment(params: ConstraintParams, tau=0.5):
    """A Good2 segment from the goodified zero laminate."""
    return good_segments(zero_good_laminate(params, tau), Kind.GOOD2)[0]


def fluid_segment(lam=0.3):
    """Fluid-only Good1 segment: S = e1 (x) e1 with xi = (e2, 0.2)."""
    e = np.eye(3)
    V = State15(np.zeros(3), np.outer(e[0], e[0]), np.zeros(3), np.zeros(3))
    return SegmentSpec(State15.zero(), V, lam, WaveVector(e[1], 0.2))


def fluid_laminate_depth2():
    """Depth-2 Good1 laminate with four atoms of weight 1/4."""
    from .laminates import SplitNode

    e = np.eye(3)
    V1 = State15(np.zeros(3), np.outer(e[0], e[0]), np.zeros(3), np.zeros(3))
    V2 = State15(np.zeros(3), np.outer(e[2], e[2]), np.zeros(3), np.zeros(3))
    x1, x2 = WaveVector(e[1], 0.2), WaveVector(e[0], -0.1)

    def split(s, V, x):
        return SplitNode(s, None, 0.5, V, x, None, SplitNode(s - 0.5 * V), SplitNode(s + 0.5 * V))

    root = SplitNode(State15.zero(), None, 0.5, V1, x1, None,
                     split(-0.5 * V1, V2, x2), split(0.5 * V1, V2, x2))
    return Laminate(root)


CONSTITUTIVE_FAMILIES = ("zminus", "zplus", "shear", "fluid", "parallel", "flip", "transverse")


def constitutive_segment(rng, family):
    """Random Lambda-segment whose two endpoints satisfy E = B x u and S = u (x) u - B (x) B + pi I.

    With xi = (n, t), a = u.n and b = B.n on both ends, the cone conditions
    reduce to (t + a) du = b dB and (t + a) dB = b du.  zminus/zplus vary one
    Elsasser field (t + a = +-b); the other families take b = 0, t = -a.
    "transverse" has du, dB unrelated and is generically Bad; it keeps the
    rigidity check honest because its base misses E = B x u.
    """
    n = rng.normal(size=3)
    n /= np.linalg.norm(n)

    def perp():
        x = rng.normal(size=3)
        return x - (x @ n) * n

    a, pi = rng.normal(), rng.normal()
    b = rng.normal() if family in ("zminus", "zplus") else 0.0
    u1, B1 = perp() + a * n, perp() + b * n
    lam = rng.uniform(0.05, 0.95)
    t = -a
    if family == "zminus":
        d = perp()
        u2, B2, t = u1 + d, B1 + d, b - a
    elif family == "zplus":
        d = perp()
        u2, B2, t = u1 + d, B1 - d, -b - a
    elif family == "fluid":
        u2, B2 = u1 + rng.normal() * B1, B1
    elif family == "parallel":
        u2, B2 = u1, rng.uniform(-3, 3) * B1
    elif family == "flip":
        u2, B2, lam = u1, -B1, 0.5
    elif family == "shear":
        d = perp()
        u2, B2 = u1 + d, B1 + rng.normal() * d
    elif family == "transverse":
        u2, B2 = u1 + perp(), B1 + perp()
    else:
        raise ValueError(f"unknown family {family!r}")
    return SegmentSpec.from_endpoints(constitutive_state(u1, B1, pi), constitutive_state(u2, B2, pi),
                                      lam, WaveVector(n, t))


def beltrami_field(n) -> TorusField3:
    """B = (sin z, cos z, 0): curl B = B and |B| = 1."""
    return TorusField3.from_function(lambda x, y, z: [np.sin(z), np.cos(z), 0 * x], n,
                                     solenoidal=True, mean_zero=True)


def abc_field(n, a=1.0, b=1.0, c=1.0) -> TorusField3:
    return TorusField3.from_function(
        lambda x, y, z: [a * np.sin(z) + c * np.cos(y), b * np.sin(x) + a * np.cos(z),
                         c * np.sin(y) + b * np.cos(x)], n, solenoidal=True, mean_zero=True)


def shear_velocity(n) -> TorusField3:
    return TorusField3.from_function(
        lambda x, y, z: [0.3 * np.sin(2 * y), 0.2 * np.cos(z), 0.25 * np.sin(x)], n)


def default_psi0(n):
    X, Y = grid(n, 2)
    return np.sin(X) * np.cos(2 * Y) + 0.5 * np.cos(3 * X + Y)


def default_phi(n):
    X, Y = grid(n, 2)
    return lambda t: np.sin(X + 0.2 * t) * np.sin(Y) + 0.3 * np.cos(2 * Y - X)

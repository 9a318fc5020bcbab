"""Conversion of wave-cone laminates into laminates built from good segments.

Every bad split is replaced by a small two-level structure: the base is
displaced by a pure bivector perturbation +-W, each displaced base is split
along the original direction (now a good segment), and the two displaced
bases are recombined along 2W (also good).  Subtrees that hang below a
displaced endpoint are carried along by `perturb_good`, which moves a good
tree to a nearby base while keeping every split good.

The perturbation size starts at half the distance of the atoms to the
boundary of the open set and is halved until every new atom is inside.
"""

from __future__ import annotations

import copy

import numpy as np

from .errors import AtomOnBoundary, DegenerateProjection, InvalidSegment, NotSimple
from .phase_space import (
    Bivector,
    State15,
    WaveVector,
    comass_norm,
    distance_to_K,
    factorize,
    in_M,
    wedge,
    wedge_vector,
)
from .wave_cone import Kind, classify_segment, realign_factors, solve_matrix_eq

EPS_FLOOR = 1e-12


def _omega_state(om: Bivector) -> State15:
    return State15(np.zeros(3), np.zeros((3, 3)), om.b, om.e)


def plane_basis(om: Bivector):
    """Orthonormal (p1, p2) and sigma > 0 with om ~ sigma p1 ^ p2.

    Uses the dominant singular plane of the antisymmetric matrix, so a
    bivector that is simple only up to roundoff is handled gracefully.
    """
    W = om.matrix()
    _, sv, vt = np.linalg.svd(W)
    if sv[0] <= 1e-300:
        raise DegenerateProjection("zero bivector has no plane")
    p1, p2 = vt[0], vt[1]
    if wedge(p1, p2).as_array() @ om.as_array() < 0:
        p2 = -p2
    return p1, p2, float(sv[0])


def _norm3(x):
    return float(np.linalg.norm(x))


def _triple(a, b, c):
    return float(np.linalg.norm(wedge_vector(wedge(a, b), c)))


def _node(state, lam, direction, cert, lower, upper):
    from .laminates import SplitNode

    return SplitNode(state, None, float(lam), direction, cert, None, lower, upper)


def _leaf(state, pressure=None):
    from .laminates import SplitNode

    return SplitNode(state, pressure)


# --- moving a good tree -------------------------------------------------------------

def perturb_good(node, new_state: State15):
    """Copy of a good subtree re-rooted at a nearby state, every split kept good."""
    if node.is_leaf:
        return _leaf(new_state, node.pressure)
    verdict = node.verdict or classify_segment(node.segment())
    lam, V, xi = node.lam, node.direction, node.certificate
    if verdict.kind == Kind.GOOD1:
        return _recombine(node, new_state, lam, V, xi)
    if verdict.kind == Kind.GOOD2:
        return _perturb_good2(node, new_state)
    if verdict.kind == Kind.GOOD3:
        return _perturb_good3(node, new_state, verdict.k)
    if verdict.kind == Kind.GOOD4:
        return _perturb_good4(node, new_state)
    raise InvalidSegment("perturb_good called on a bad split")


def _recombine(node, new_state, lam, V, xi):
    lo = perturb_good(node.lower, new_state - (1.0 - lam) * V)
    hi = perturb_good(node.upper, new_state + lam * V)
    return _node(new_state, lam, V, xi, lo, hi)


def _perturb_good2(node, new_state):
    V, xi = node.direction, node.certificate
    om0, om = node.state.omega, V.omega
    xa = xi.as_array()
    a = om.matrix() @ xa / (xa @ xa)
    # shift a along xi into the plane of om0
    ra = wedge_vector(om0, a)
    rx = wedge_vector(om0, xa)
    beta = float(ra @ rx / (rx @ rx))
    p = a - beta * xa
    kappa = np.linalg.norm(p)
    if kappa == 0:
        return _recombine(node, new_state, node.lam, V, xi)
    v_hat = p / kappa
    q1, q2, _ = plane_basis(new_state.omega)
    v_new, _ = realign_factors(v_hat, np.zeros(4), q1, q2)
    new_om = kappa * wedge(v_new, xa)
    new_V = V.with_omega(new_om)
    return _recombine(node, new_state, node.lam, new_V, xi)


def _perturb_good3(node, new_state, k):
    V, xi = node.direction, node.certificate
    xa = xi.as_array()
    xn = np.linalg.norm(xa)
    q1, q2, _ = plane_basis(new_state.omega)
    xi_new, _ = realign_factors(xa / xn, np.zeros(4), q1, q2)
    xi_new = xi_new * xn
    xx, xt = xi_new[:3], xi_new[3]
    u = V.u - (V.u @ xx) / (xx @ xx) * xx
    S = V.S + solve_matrix_eq(xx, -(V.S @ xx + xt * u))
    new_V = State15(u, S, k * new_state.B, k * new_state.E)
    return _recombine(node, new_state, node.lam, new_V, WaveVector.from_array(xi_new))


def _perturb_good4(node, new_state):
    V, xi, lam = node.direction, node.certificate, node.lam
    om0 = new_state.omega
    sig = comass_norm(om0)
    if sig <= 1e-300:
        return _recombine(node, new_state, lam, V, xi)
    xa = xi.as_array()
    xn = np.linalg.norm(xa)
    w = -V.omega.matrix() @ xa / (xa @ xa)
    if np.linalg.norm(w[:3]) < 1e-3 * np.linalg.norm(w):
        w = w + np.linalg.norm(w) / xn * xa
    wn = np.linalg.norm(w)
    p1, p2, _ = plane_basis(om0)
    amp = np.sqrt(sig * xn / wn)
    best = None
    for theta in np.linspace(0.0, np.pi, 13)[:-1]:
        vd = np.cos(theta) * p1 + np.sin(theta) * p2
        wd = -np.sin(theta) * p1 + np.cos(theta) * p2
        v0, w0 = amp * vd, (sig / amp) * wd
        score = min(_triple(v0, w0 + w, xa), _triple(v0, w0 - w, xa), _triple(v0, w0, w))
        if best is None or score > best[0]:
            best = (score, v0, w0)
    _, v0, w0 = best
    X = _omega_state(wedge(v0, w))
    sides = []
    for sgn in (1.0, -1.0):
        base = new_state + sgn * X
        direction = _omega_state(wedge(xa, w + sgn * w0))
        lo = perturb_good(node.lower, base - (1.0 - lam) * direction)
        hi = perturb_good(node.upper, base + lam * direction)
        sides.append(_node(base, lam, direction, xi, lo, hi))
    plus, minus = sides
    return _node(new_state, 0.5, 2.0 * X, WaveVector.from_array(w), minus, plus)


# --- repairing a bad split ------------------------------------------------------------

def _repair_parts(node):
    """Unit perturbation bivector and its certificate for a bad split."""
    xi = node.certificate
    xa = xi.as_array()
    x2 = xa @ xa
    om0, om = node.state.omega, node.direction.omega
    n0 = np.linalg.norm(om0.as_array())
    scale = 1.0 + node.state.norm() + node.direction.norm()
    if n0 <= 1e-12 * scale:
        w = -om.matrix() @ xa / x2
        if np.linalg.norm(w[:3]) <= 1e-3 * np.linalg.norm(w):
            w = w + xa * np.linalg.norm(w) / np.sqrt(x2)
        fx = np.cross(w[:3], xa[:3])
        if np.linalg.norm(fx) <= 1e-9 * np.linalg.norm(w[:3]) * np.linalg.norm(xa[:3]):
            fx = np.cross(w[:3], np.eye(3)[int(np.argmin(np.abs(w[:3])))])
        f = np.append(fx / np.linalg.norm(fx), 0.0)
        if _triple(xa, w, f) <= 1e-9 * np.linalg.norm(w) * np.sqrt(x2):
            # xi lies in span(w, f): use the remaining spatial direction
            g = np.cross(w[:3], fx)
            f = np.append(g / np.linalg.norm(g), 0.0)
        W = wedge(w, f)
        return W * (1.0 / comass_norm(W)), WaveVector.from_array(f)
    k = float(om.as_array() @ om0.as_array() / n0**2)
    parallel = np.linalg.norm(om.as_array() - k * om0.as_array()) <= 1e-9 * np.linalg.norm(om.as_array())
    if not parallel:
        w0 = -om0.matrix() @ xa / x2
        w = -om.matrix() @ xa / x2
        W = wedge(w0, w)
        best = None
        for alpha in (0.0, 1.0, -1.0, 2.0):
            cert = w + alpha * w0
            sx = np.linalg.norm(cert[:3])
            if best is None or sx > best[0]:
                best = (sx, cert)
        return W * (1.0 / comass_norm(W)), WaveVector.from_array(best[1] / np.linalg.norm(best[1]))
    v0 = om0.matrix() @ xa / x2
    best = None
    for i in range(3):
        e = np.eye(4)[i]
        score = _triple(v0, e, xa)
        if best is None or score > best[0]:
            best = (score, e)
    e = best[1]
    W = wedge(v0, e)
    return W * (1.0 / comass_norm(W)), WaveVector.from_array(e)


def _repair(node, eps):
    unitW, cert = _repair_parts(node)
    X = _omega_state(eps * unitW)
    lam, V, xi = node.lam, node.direction, node.certificate
    sides = []
    for sgn in (-1.0, 1.0):
        base = node.state + sgn * X
        lo = perturb_good(node.lower, base - (1.0 - lam) * V)
        hi = perturb_good(node.upper, base + lam * V)
        sides.append(_node(base, lam, V, xi, lo, hi))
    return _node(node.state, 0.5, 2.0 * X, cert, sides[0], sides[1])


# --- driver ---------------------------------------------------------------------------

def _leaves(node):
    out = []
    stack = [node]
    while stack:
        n = stack.pop()
        if n.is_leaf:
            out.append(n)
        else:
            stack.extend((n.lower, n.upper))
    return out


def _internal(node):
    out = []
    stack = [node]
    while stack:
        n = stack.pop()
        if not n.is_leaf:
            out.append(n)
            stack.extend((n.lower, n.upper))
    return out


def _open_margin(state, hp):
    if not in_M(state):
        return -1.0
    return hp.eps_tau - distance_to_K(state, hp.inner)


def _all_good(node):
    try:
        for n in _internal(node):
            n.verdict = classify_segment(n.segment())
            if n.verdict.kind == Kind.BAD:
                return False
    except (InvalidSegment, DegenerateProjection, NotSimple):
        return False
    return True


def _goodify_node(node, hp, floor, stats):
    if node.is_leaf:
        return node
    node.lower = _goodify_node(node.lower, hp, floor, stats)
    node.upper = _goodify_node(node.upper, hp, floor, stats)
    node.verdict = classify_segment(node.segment())
    if node.verdict.kind != Kind.BAD:
        return node
    margin = min(_open_margin(l.state, hp) for l in _leaves(node))
    if margin <= floor:
        raise AtomOnBoundary(f"atom margin {margin:.3e} below floor {floor:.1e}")
    eps = 0.5 * margin
    while eps > floor * 1e-3:
        try:
            cand = _repair(node, eps)
        except (InvalidSegment, DegenerateProjection, NotSimple, ZeroDivisionError,
                FloatingPointError):
            cand = None
        if cand is not None and all(_open_margin(l.state, hp) > 0 for l in _leaves(cand)) \
                and _all_good(cand):
            stats["repaired"] += 1
            stats["min_eps"] = min(stats["min_eps"], eps)
            return cand
        eps *= 0.5
    raise AtomOnBoundary("no perturbation size keeps every atom inside the open set")


def goodify(lam, hp, floor=EPS_FLOOR):
    """Laminate with the same barycentre whose every split is good.

    Atoms must lie in the open set {V in M : distance_to_K(V, tau K) < eps_tau}.
    """
    from .laminates import Laminate

    for leaf in _leaves(lam.root):
        if _open_margin(leaf.state, hp) <= floor:
            raise AtomOnBoundary("an input atom is not strictly inside the open set")
    root = copy.deepcopy(lam.root)
    stats = {"repaired": 0, "min_eps": np.inf}
    with np.errstate(divide="raise", invalid="raise"):
        root = _goodify_node(root, hp, floor, stats)
    meta = dict(lam.meta)
    meta["goodify"] = {"repaired": stats["repaired"],
                       "min_eps": None if stats["repaired"] == 0 else float(stats["min_eps"])}
    return Laminate(root, meta)

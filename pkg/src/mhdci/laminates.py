"""Finite-order laminates and constructive hull decompositions.

A laminate is stored as its splitting tree.  An internal node at state V0
with weight parameter lam and direction Vbar has two children

    lower = V0 - (1 - lam) Vbar   (relative weight lam)
    upper = V0 + lam Vbar         (relative weight 1 - lam)

so every split preserves the barycentre exactly.  The decomposition chain
maps a state of the relaxed neighbourhood of K_{tau r, tau s} to atoms on
K_{r,s}:

    general state -> magnetic relaxation (B != 0) or zero-field relaxation
                  -> fluid relaxation (rank-one stress terms)
                  -> Elsasser normalization onto the two spheres.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadCertificate,
    DepthExceeded,
    NotInRelaxedSet,
    NotScaledK,
    OutOfRange,
    SegmentNotInM,
)
from .phase_space import (
    ConstraintParams,
    State15,
    WaveVector,
    constitutive_state,
    distance_to_K,
    elsasser_state,
    in_M,
    orthonormal_complement,
    stress_of,
    unit_orthogonal,
    cross3,
)
from .wave_cone import (
    GoodnessVerdict,
    Kind,
    SegmentSpec,
    certificate_ok,
    classify_segment,
    in_lambda,
)

MAX_DEPTH = 64
_EYE3 = np.eye(3)


@dataclass
class SplitNode:
    state: State15
    pressure: float | None = None
    lam: float | None = None
    direction: State15 | None = None
    certificate: WaveVector | None = None
    verdict: GoodnessVerdict | None = None
    lower: "SplitNode | None" = None
    upper: "SplitNode | None" = None

    @property
    def is_leaf(self):
        return self.lower is None

    def segment(self):
        return SegmentSpec(self.state, self.direction, self.lam, self.certificate)

    def depth(self):
        if self.is_leaf:
            return 0
        return 1 + max(self.lower.depth(), self.upper.depth())

    def to_dict(self):
        d = {"state": self.state.to_list()}
        if self.pressure is not None:
            d["pressure"] = float(self.pressure)
        if not self.is_leaf:
            d["lam"] = float(self.lam)
            d["direction"] = self.direction.to_list()
            d["certificate"] = self.certificate.to_list()
            if self.verdict is not None:
                d["verdict"] = self.verdict.to_dict()
            d["lower"] = self.lower.to_dict()
            d["upper"] = self.upper.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        node = cls(State15.from_list(d["state"]), d.get("pressure"))
        if "lower" in d:
            node.lam = float(d["lam"])
            node.direction = State15.from_list(d["direction"])
            node.certificate = WaveVector.from_array(d["certificate"])
            if "verdict" in d:
                node.verdict = GoodnessVerdict.from_dict(d["verdict"])
            node.lower = cls.from_dict(d["lower"])
            node.upper = cls.from_dict(d["upper"])
        return node


def make_split(state, lam, direction, certificate, lower, upper, depth=0):
    """Internal node; lower/upper are callables or nodes for the two children."""
    if depth > MAX_DEPTH:
        raise DepthExceeded(f"split tree deeper than {MAX_DEPTH}")
    low_state = state - (1.0 - lam) * direction
    up_state = state + lam * direction
    lo = lower(low_state) if callable(lower) else lower
    hi = upper(up_state) if callable(upper) else upper
    return SplitNode(state, None, float(lam), direction, certificate, None, lo, hi)


@dataclass
class Atom:
    weight: float
    state: State15
    path: tuple
    pressure: float | None = None


@dataclass
class Laminate:
    root: SplitNode
    meta: dict = field(default_factory=dict)

    @classmethod
    def dirac(cls, state, pressure=None):
        return cls(SplitNode(state, pressure))

    @property
    def barycenter_target(self):
        return self.root.state

    def atoms(self):
        out = []
        stack = [(self.root, 1.0, ())]
        while stack:
            node, w, path = stack.pop()
            if node.is_leaf:
                out.append(Atom(w, node.state, path, node.pressure))
            else:
                stack.append((node.upper, w * (1.0 - node.lam), path + (2,)))
                stack.append((node.lower, w * node.lam, path + (1,)))
        return out

    def internal_nodes(self):
        out = []
        stack = [(self.root, ())]
        while stack:
            node, path = stack.pop()
            if not node.is_leaf:
                out.append((path, node))
                stack.append((node.upper, path + (2,)))
                stack.append((node.lower, path + (1,)))
        return out

    def weights(self):
        return np.array([a.weight for a in self.atoms()])

    def barycenter(self):
        acc = np.zeros(18)
        for a in self.atoms():
            acc += a.weight * a.state.as_array()
        return State15.from_array(acc)

    def barycenter_error(self):
        return float(np.linalg.norm(self.barycenter().as_array() - self.root.state.as_array()))

    def depth(self):
        return self.root.depth()

    def split_count(self):
        return len(self.internal_nodes())

    def max_distance_to_K(self, params):
        return max(distance_to_K(a.state, params) for a in self.atoms())

    def annotate(self):
        """Classify every split and store the verdict on its node."""
        for _, node in self.internal_nodes():
            node.verdict = classify_segment(node.segment())
        return self

    def verdicts(self):
        return [node.verdict for _, node in self.internal_nodes()]

    def bad_count(self):
        self.annotate()
        return sum(1 for v in self.verdicts() if v.kind == Kind.BAD)

    def certify(self, params=None, tol=1e-9):
        """Re-check the structural invariants; returns a summary dictionary."""
        w = self.weights()
        cert = all(certificate_ok(n.direction, n.certificate) and np.linalg.norm(n.certificate.xi_x) > 0
                   for _, n in self.internal_nodes())
        in_m = all(in_M(n.lower.state) and in_M(n.upper.state) for _, n in self.internal_nodes())
        report = {
            "atoms": len(w),
            "splits": self.split_count(),
            "depth": self.depth(),
            "weight_sum_error": float(abs(w.sum() - 1.0)),
            "barycenter_error": self.barycenter_error(),
            "certificates_valid": bool(cert),
            "children_in_M": bool(in_m),
        }
        if params is not None:
            report["max_distance_to_K"] = self.max_distance_to_K(params)
            report["atoms_in_K"] = report["max_distance_to_K"] <= tol
        report["ok"] = bool(cert and in_m and report["weight_sum_error"] <= 1e-12
                            and report["barycenter_error"] <= 1e-10 * (1 + self.root.state.norm())
                            and report.get("atoms_in_K", True))
        return report

    def to_dict(self):
        return {"meta": self.meta, "tree": self.root.to_dict()}

    @classmethod
    def from_dict(cls, d):
        return cls(SplitNode.from_dict(d["tree"]), dict(d.get("meta", {})))


def _find_leaf(root, index):
    lam = Laminate(root)
    atoms = lam.atoms()
    if not 0 <= index < len(atoms):
        raise IndexError(f"atom index {index} out of range")
    node = root
    for step in atoms[index].path:
        node = node.lower if step == 1 else node.upper
    return node


def split(lam: Laminate, atom_index: int, weight, direction: State15, certificate=None) -> Laminate:
    """Replace one atom by the two endpoints of a certified segment through it."""
    new_root = copy.deepcopy(lam.root)
    leaf = _find_leaf(new_root, atom_index)
    seg = SegmentSpec(leaf.state, direction, float(weight), certificate)
    if not (in_M(seg.lower) and in_M(seg.upper)):
        raise SegmentNotInM("an endpoint of the split leaves M")
    if certificate is None:
        certificate = in_lambda(direction)
        if certificate is None:
            raise BadCertificate("direction is not in the wave cone")
    elif not certificate_ok(direction, certificate) or np.linalg.norm(certificate.xi_x) == 0:
        raise BadCertificate("certificate fails the wave cone conditions")
    leaf.lam = float(weight)
    leaf.direction = direction
    leaf.certificate = certificate
    leaf.lower = SplitNode(seg.lower)
    leaf.upper = SplitNode(seg.upper)
    return Laminate(new_root, dict(lam.meta))


# --- step (i): normalization on the Elsasser spheres -----------------------------

def _perp_cert(a, b):
    """Frequency (xi_x, 0) with xi_x orthogonal to both a and b."""
    n = cross3(a, b)
    nn = np.linalg.norm(n)
    if nn > 1e-13 * np.linalg.norm(a) * np.linalg.norm(b) and nn > 0:
        return WaveVector(n / nn, 0.0)
    ref = a if np.linalg.norm(a) >= np.linalg.norm(b) else b
    return WaveVector(unit_orthogonal(ref), 0.0)


def _sphere_split(zp, zm, pi, params, which, axis, depth):
    """Split the chosen Elsasser variable onto its sphere along axis."""
    radius = params.r if which == "plus" else params.s
    z = zp if which == "plus" else zm
    nz = np.linalg.norm(z)
    state = elsasser_state(zp, zm, pi)
    if nz > radius * (1 + 1e-12):
        raise OutOfRange(f"|z{'+' if which == 'plus' else '-'}| = {nz:.6g} exceeds {radius:.6g}")
    if abs(nz - radius) <= 1e-13 * radius:
        return None
    lam = 0.5 * (1.0 + nz / radius)
    top = radius * axis
    if which == "plus":
        lo_z, hi_z = (top, zm), (-top, zm)
        cert = _perp_cert(axis, zm)
    else:
        lo_z, hi_z = (zp, top), (zp, -top)
        cert = _perp_cert(zp, axis)
    lo_state = elsasser_state(*lo_z, pi)
    hi_state = elsasser_state(*hi_z, pi)
    direction = hi_state - lo_state
    return state, lam, direction, cert, lo_z, hi_z


def _normalization_node(zp, zm, pi, params, depth=0):
    zp = np.asarray(zp, dtype=float)
    zm = np.asarray(zm, dtype=float)
    if abs(pi) > params.pressure_bound * (1 + 1e-12):
        raise OutOfRange(f"|Pi| = {abs(pi):.6g} exceeds rs = {params.pressure_bound:.6g}")
    nzp, nzm = np.linalg.norm(zp), np.linalg.norm(zm)
    if nzp > 0:
        n_axis = zp / nzp
    elif nzm > 0:
        n_axis = zm / nzm
    else:
        n_axis = np.array([1.0, 0.0, 0.0])
    m_axis = zm / nzm if nzm > 0 else n_axis

    def minus_stage(zp_child):
        def build(_state):
            out = _sphere_split(zp_child, zm, pi, params, "minus", m_axis, depth + 1)
            if out is None:
                return SplitNode(elsasser_state(zp_child, zm, pi), pi)
            st, lam, direction, cert, lo_z, hi_z = out
            return make_split(st, lam, direction, cert,
                              SplitNode(elsasser_state(*lo_z, pi), pi),
                              SplitNode(elsasser_state(*hi_z, pi), pi), depth + 2)
        return build

    out = _sphere_split(zp, zm, pi, params, "plus", n_axis, depth)
    if out is None:
        return minus_stage(zp)(None)
    st, lam, direction, cert, lo_z, hi_z = out
    return make_split(st, lam, direction, cert, minus_stage(lo_z[0]), minus_stage(hi_z[0]), depth + 1)


def relax_normalization(zp, zm, pi, params: ConstraintParams) -> Laminate:
    """Laminate with at most four atoms on K_{r,s} and barycentre (z+, z-, Pi)."""
    return Laminate(_normalization_node(zp, zm, pi, params))


# --- steps (ii) and (iii): stress relaxation ---------------------------------------

def primitive_decomposition(S, tol=0.0):
    """S = sum_i c_i q_i (x) q_i with orthonormal q_i (spectral form).

    sum |c_i| is at most sqrt(3) |S|_F <= 3 sqrt(3) |S|_op.
    """
    S = np.asarray(S, dtype=float)
    c, Q = np.linalg.eigh(0.5 * (S + S.T))
    return [(float(ci), Q[:, i]) for i, ci in enumerate(c) if abs(ci) > tol]


def absorb_negative_part(S, pi):
    """Rewrite S + Pi I as S' + Pi' I with S' positive semidefinite.

    For a unit q with orthonormal completion f, g one has
    -q (x) q = f (x) f + g (x) g - I, so a negative spectrum is moved into the
    pressure without any split.  Returns (positive terms, Pi').
    """
    S = np.asarray(S, dtype=float)
    terms = primitive_decomposition(S, tol=1e-15 * (1.0 + np.abs(S).max()))
    if not terms:
        return [], pi
    cmin = min(c for c, _ in terms)
    if cmin >= 0 or len(terms) < 3:
        # a missing eigenvalue is zero, so the shift is only needed for full rank
        if cmin >= 0:
            return terms, pi
        c, Q = np.linalg.eigh(0.5 * (S + S.T))
        terms = [(float(ci), Q[:, i]) for i, ci in enumerate(c)]
        cmin = terms[0][0]
    drop = 1e-15 * (1.0 + abs(cmin))
    return [(c - cmin, q) for c, q in terms if c - cmin > drop], pi + cmin


def _kstate_with_rest(u, B, rest, pi):
    base = constitutive_state(u, B, pi)
    return base.replace(S=base.S + rest)


def _fluid_node(u, B, rest, pi, params, depth):
    """Relax (u, S_{u,B} + rest + Pi I, B, B x u) by rank-one velocity splits."""
    if depth > MAX_DEPTH:
        raise DepthExceeded(f"split tree deeper than {MAX_DEPTH}")
    terms, pi = absorb_negative_part(rest, pi)
    return _rank_one_chain(u, B, terms, pi, params, depth)


def _rank_one_chain(u, B, terms, pi, params, depth):
    if not terms:
        return _normalization_node(u + B, u - B, pi, params, depth)
    rest_all = sum(c * np.outer(q, q) for c, q in terms)
    state = _kstate_with_rest(u, B, rest_all, pi)
    (c, q), remaining = terms[0], terms[1:]
    e = np.sqrt(c) * q
    direction = State15(2 * e, 2 * (np.outer(u, e) + np.outer(e, u)), np.zeros(3), 2 * cross3(B, e))
    bxe = cross3(B, e)
    if np.linalg.norm(bxe) > 1e-14 * np.linalg.norm(B) * np.linalg.norm(e):
        cert = WaveVector(bxe, -(u @ bxe)).normalized()
    else:
        cert = _perp_cert(u, e)
    return make_split(state, 0.5, direction, cert,
                      lambda _s: _rank_one_chain(u - e, B, remaining, pi, params, depth + 1),
                      lambda _s: _rank_one_chain(u + e, B, remaining, pi, params, depth + 1),
                      depth)


def add_rank_one(u, B, e, pi, params: ConstraintParams) -> Laminate:
    """Split (u, S_{u,B} + e (x) e + Pi I, B, B x u) along the velocity direction e."""
    u, B, e = (np.asarray(a, dtype=float) for a in (u, B, e))
    ne = np.linalg.norm(e)
    terms = [] if ne == 0 else [(ne**2, e / ne)]
    return Laminate(_rank_one_chain(u, B, terms, pi, params, 0))


def relax_fluid(u, B, S, pi, params: ConstraintParams) -> Laminate:
    """Relax (u, S_{u,B} + S + Pi I, B, B x u) for a small symmetric S."""
    u, B = np.asarray(u, dtype=float), np.asarray(B, dtype=float)
    return Laminate(_fluid_node(u, B, np.asarray(S, dtype=float), pi, params, 0))


# --- steps (iv) and (v): electric field relaxation -------------------------------

def _general_node(u, B, E, rest, pi, params, depth):
    """Dispatch a state (u, S_{u,B} + rest + Pi I, B, E) with B.E = 0."""
    nB = np.linalg.norm(B)
    if nB > 0:
        defect = E - cross3(B, u)
        v = cross3(defect, B) / nB**2
        return _magnetic_node(u, B, rest, v, pi, params, depth)
    return _zero_field_node(u, rest, E, pi, params, depth)


def _magnetic_node(u, B, rest, v, pi, params, depth):
    if depth > MAX_DEPTH:
        raise DepthExceeded(f"split tree deeper than {MAX_DEPTH}")
    nB = np.linalg.norm(B)
    if nB > 0:
        v = v - (v @ B) / nB**2 * B
    nv = np.linalg.norm(v)
    if nv == 0 or nB == 0:
        return _fluid_node(u, B, rest, pi, params, depth)
    c = np.sqrt(nB / nv)
    cv = c * v
    Bc = B / c
    state = _kstate_with_rest(u, B, rest, pi).replace(E=cross3(B, u + v))
    direction = State15(
        2 * cv,
        2 * (np.outer(u, cv) + np.outer(cv, u)) - (4.0 / c) * np.outer(B, B),
        2 * Bc,
        2 * (cross3(B, cv) + cross3(Bc, u)),
    )
    bxv = cross3(B, v)
    cert = WaveVector(bxv, -(B @ cross3(v, u))).normalized()
    new_rest = rest - stress_of(cv, Bc)
    return make_split(state, 0.5, direction, cert,
                      lambda _s: _fluid_node(u - cv, B - Bc, new_rest, pi, params, depth + 1),
                      lambda _s: _fluid_node(u + cv, B + Bc, new_rest, pi, params, depth + 1),
                      depth)


def relax_magnetic(u, B, S, v, pi, params: ConstraintParams) -> Laminate:
    """Relax (u, S_{u,B} + S + Pi I, B, B x (u + v)); v is first projected onto B-perp."""
    u, B, S, v = (np.asarray(a, dtype=float) for a in (u, B, S, v))
    return Laminate(_magnetic_node(u, B, S, v, pi, params, 0))


def orthogonal_factor_pair(E):
    """Orthogonal e, f with e x f = E and |e| = |f| = |E|^(1/2)."""
    E = np.asarray(E, dtype=float)
    nE = np.linalg.norm(E)
    e_dir = unit_orthogonal(E)
    f_dir = cross3(E, e_dir)
    f_dir /= np.linalg.norm(f_dir)
    s = np.sqrt(nE)
    return s * e_dir, s * f_dir


def _zero_field_node(u, rest, E, pi, params, depth):
    if depth > MAX_DEPTH:
        raise DepthExceeded(f"split tree deeper than {MAX_DEPTH}")
    if np.linalg.norm(E) == 0:
        return _fluid_node(u, np.zeros(3), rest, pi, params, depth)
    e, f = orthogonal_factor_pair(E)
    g = cross3(e, f)
    state = _kstate_with_rest(u, np.zeros(3), rest, pi).replace(E=E)
    direction = State15(2 * g, 2 * (np.outer(u, g) + np.outer(g, u)), 2 * e, 2 * cross3(e, u + g))
    f_hat = f / np.linalg.norm(f)
    cert = WaveVector(f_hat, -(u @ f_hat))
    child_rest = rest - stress_of(g, e)
    lower_E = -cross3(e, u + g - f)
    upper_E = cross3(e, u + g + f)
    return make_split(state, 0.5, direction, cert,
                      lambda _s: _general_node(u - g, -e, lower_E, child_rest, pi, params, depth + 1),
                      lambda _s: _general_node(u + g, e, upper_E, child_rest, pi, params, depth + 1),
                      depth)


def relax_zero_field(u, S, E, pi, params: ConstraintParams) -> Laminate:
    """Relax (u, S_{u,0} + S + Pi I, 0, E)."""
    u, S, E = (np.asarray(a, dtype=float) for a in (u, S, E))
    return Laminate(_zero_field_node(u, S, E, pi, params, 0))


# --- full chain ----------------------------------------------------------------------

@dataclass(frozen=True)
class HullParams:
    base: ConstraintParams
    tau: float
    eps_tau: float | None = None

    def __post_init__(self):
        if not 0.0 < self.tau <= 1.0:
            raise OutOfRange("tau must lie in (0, 1]")
        if self.eps_tau is None:
            object.__setattr__(self, "eps_tau", default_eps_tau(self.base, self.tau))

    @property
    def inner(self):
        return self.base.scaled(self.tau)


def default_eps_tau(params: ConstraintParams, tau):
    """Neighbourhood radius whose square-root excursions stay inside the margin."""
    m = min(params.r, params.s) * (1.0 - tau)
    return min(m, m * m) / 150.0


def relaxed_set_violation(v: State15, hp: HullParams):
    """Name of the first failed membership inequality, or None."""
    r, s, tau, eps = hp.base.r, hp.base.s, hp.tau, hp.eps_tau
    if not in_M(v):
        return "B.E = 0"
    if not np.linalg.norm(v.u + v.B) < tau * r + eps:
        return "|u+B| < tau r + eps"
    if not np.linalg.norm(v.u - v.B) < tau * s + eps:
        return "|u-B| < tau s + eps"
    if not np.linalg.norm(v.E - cross3(v.B, v.u)) < eps:
        return "|E - B x u| < eps"
    mu = np.linalg.eigvalsh(v.S - stress_of(v.u, v.B))
    lo = max(mu[-1] - eps, -(tau**2 * r * s + eps))
    hi = min(mu[0] + eps, tau**2 * r * s + eps)
    if not lo < hi:
        return "|S - S_{u,B} - Pi I| < eps with |Pi| < tau^2 rs + eps"
    return None


def decompose_full(v: State15, hp: HullParams, annotate=True, check=True) -> Laminate:
    """Laminate with barycentre v and atoms on K_{r,s}."""
    bad = relaxed_set_violation(v, hp)
    if bad is not None:
        raise NotInRelaxedSet(f"state violates {bad}", inequality=bad)
    D = v.S - stress_of(v.u, v.B)
    pi0 = float(np.linalg.eigvalsh(D)[0])
    rest = D - pi0 * _EYE3
    root = _general_node(v.u, v.B, v.E, rest, pi0, hp.base, 0)
    # keep the exact input at the root
    root.state = v
    lam = Laminate(root, {"r": hp.base.r, "s": hp.base.s, "tau": hp.tau, "eps_tau": hp.eps_tau})
    if check:
        worst = lam.max_distance_to_K(hp.base)
        if worst > 1e-9:
            raise OutOfRange(f"atom at distance {worst:.3e} from K; neighbourhood radius too large")
    if annotate:
        lam.annotate()
    return lam


def energy_estimate(lam: Laminate, params: ConstraintParams):
    """Per-atom check of (r^2+s^2)/2 - e0 <= 2 (e_j - e0) with e = |u|^2 + |B|^2."""
    v0 = lam.root.state
    e0 = v0.u @ v0.u + v0.B @ v0.B
    deficit = 0.5 * (params.r**2 + params.s**2) - e0
    slack = [2 * (a.state.u @ a.state.u + a.state.B @ a.state.B - e0) - deficit for a in lam.atoms()]
    return bool(min(slack) >= -1e-12), float(min(slack))


def scale_hull(v: State15, mu, params: ConstraintParams, tol=1e-10) -> Laminate:
    """Split a state of mu K_{r,s} into two atoms of K_{sqrt(mu) r, sqrt(mu) s}."""
    if not 0.0 < mu < 1.0:
        raise OutOfRange("mu must lie in (0, 1)")
    v1 = (1.0 / mu) * v
    if distance_to_K(v1, params) > tol:
        raise NotScaledK("state divided by mu is not in K_{r,s}")
    pi1 = float(np.trace(v1.S - stress_of(v1.u, v1.B)) / 3.0)
    sq = np.sqrt(mu)
    plus = constitutive_state(sq * v1.u, sq * v1.B, mu * pi1)
    minus = constitutive_state(-sq * v1.u, -sq * v1.B, mu * pi1)
    lam = 0.5 * (1.0 + sq)
    cert = _perp_cert(v1.u, v1.B)
    node = make_split(v, lam, minus - plus, cert, SplitNode(plus, mu * pi1), SplitNode(minus, mu * pi1))
    return Laminate(node)


def compose(lam: Laminate, leaf_builder) -> Laminate:
    """Replace every leaf by the tree leaf_builder(atom_state) (or keep it if None)."""
    root = copy.deepcopy(lam.root)

    def walk(node):
        if node.is_leaf:
            sub = leaf_builder(node.state)
            if sub is None:
                return node
            sub_root = sub.root if isinstance(sub, Laminate) else sub
            sub_root.state = node.state
            return sub_root
        node.lower = walk(node.lower)
        node.upper = walk(node.upper)
        return node

    return Laminate(walk(root), dict(lam.meta))


from .goodify import goodify  # noqa: E402  (re-export; goodify needs the tree types above)

relaxNormalization = relax_normalization
addRankOne = add_rank_one
relaxFluid = relax_fluid
relaxMagnetic = relax_magnetic
relaxZeroB = relax_zero_field
decomposeFull = decompose_full
scaleHull = scale_hull


def sample_relaxed_state(hp: HullParams, rng, edge=0.0):
    """Random state of the relaxed neighbourhood; edge in [0,1) pushes radii to the rim."""
    r, s, tau, eps = hp.base.r, hp.base.s, hp.tau, hp.eps_tau

    def ball(radius):
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        return d * radius * (edge + (1 - edge) * rng.random()) * (1 - 1e-9)

    zp, zm = ball(tau * r + eps), ball(tau * s + eps)
    u, B = 0.5 * (zp + zm), 0.5 * (zp - zm)
    pb = tau**2 * r * s + eps
    pi = pb * (2 * rng.random() - 1) * (edge + (1 - edge) * rng.random()) * (1 - 1e-9)
    A = rng.normal(size=(3, 3))
    A = A + A.T
    D = A / np.linalg.norm(A, 2) * eps * (edge + (1 - edge) * rng.random()) * (1 - 1e-9)
    d = rng.normal(size=3)
    nB = np.linalg.norm(B)
    if nB > 0:
        d -= (d @ B) / nB**2 * B
    d *= eps * (edge + (1 - edge) * rng.random()) * (1 - 1e-9) / np.linalg.norm(d)
    return State15(u, stress_of(u, B) + pi * _EYE3 + D, B, cross3(B, u) + d)

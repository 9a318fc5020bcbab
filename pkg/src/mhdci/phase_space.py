"""Algebra of the 15-dimensional MHD state space.

A state is V = (u, S, B, E): velocity, symmetric stress, magnetic and
electric field.  The pair (B, E) is identified with a bivector in
Lambda^2(R^4) through the antisymmetric 4x4 matrix

    Omega[1,2] = B0, Omega[2,0] = B1, Omega[0,1] = B2, Omega[i,3] = E_i,

so that wedge(v, w) = v (x) w - w (x) v has magnetic part v_x cross w_x and
electric part v_x w_t - v_t w_x.  Space-time vectors are ordered
(x1, x2, x3, t).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotSimple, SchemaError

TOL_ABS = 1e-12
TOL_REL = 1e-9

_EYE3 = np.eye(3)


def cross3(a, b):
    """Cross product of two 3-vectors without the generic broadcasting overhead."""
    return np.array([a[1] * b[2] - a[2] * b[1],
                     a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]])


def _vec(x, n=3):
    a = np.array(x, dtype=float)
    if a.shape != (n,):
        raise SchemaError(f"expected a vector of length {n}, got shape {a.shape}")
    a.setflags(write=False)
    return a


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def cross_matrix(x):
    """Matrix A with A @ y == cross(x, y)."""
    x = np.asarray(x, dtype=float)
    return np.array([[0.0, -x[2], x[1]],
                     [x[2], 0.0, -x[0]],
                     [-x[1], x[0], 0.0]])


def stress_of(u, B):
    """S_{u,B} = u (x) u - B (x) B."""
    u = np.asarray(u, dtype=float)
    B = np.asarray(B, dtype=float)
    return np.outer(u, u) - np.outer(B, B)


def unit_orthogonal(x):
    """A unit vector orthogonal to x (any unit vector when x = 0)."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    axis = int(np.argmin(np.abs(x)))
    e = np.zeros(n)
    e[axis] = 1.0
    nx = np.linalg.norm(x)
    if nx == 0.0:
        return e
    p = e - (e @ x) / nx**2 * x
    return p / np.linalg.norm(p)


def orthonormal_complement(vectors, dim=3, tol=1e-12):
    """Orthonormal basis (rows) of the orthogonal complement of span(vectors)."""
    vs = [np.asarray(v, dtype=float) for v in vectors]
    vs = [v for v in vs if np.linalg.norm(v) > 0]
    if not vs:
        return np.eye(dim)
    A = np.vstack(vs)
    _, sv, vt = np.linalg.svd(A)
    scale = sv[0] if sv.size else 1.0
    rank = int(np.sum(sv > tol * max(scale, 1e-300)))
    return vt[rank:]


@dataclass(frozen=True)
class ConstraintParams:
    r: float
    s: float

    def __post_init__(self):
        if not (self.r > 0 and self.s > 0):
            raise SchemaError("r and s must be positive")

    @property
    def pressure_bound(self):
        return self.r * self.s

    def scaled(self, tau):
        return ConstraintParams(tau * self.r, tau * self.s)


@dataclass(frozen=True, eq=False)
class WaveVector:
    """Space-time frequency xi = (xi_x, xi_t)."""

    xi_x: np.ndarray
    xi_t: float

    def __post_init__(self):
        object.__setattr__(self, "xi_x", _vec(self.xi_x))
        object.__setattr__(self, "xi_t", float(self.xi_t))

    @classmethod
    def from_array(cls, a):
        a = np.asarray(a, dtype=float)
        return cls(a[:3], a[3])

    def as_array(self):
        return np.append(self.xi_x, self.xi_t)

    def normalized(self):
        n = np.linalg.norm(self.xi_x)
        if n == 0:
            n = abs(self.xi_t) or 1.0
        return WaveVector(self.xi_x / n, self.xi_t / n)

    def to_list(self):
        return self.as_array().tolist()

    def __repr__(self):
        return f"WaveVector(xi_x={self.xi_x.tolist()}, xi_t={self.xi_t})"


@dataclass(frozen=True, eq=False)
class Bivector:
    """Element of Lambda^2(R^4) stored as its magnetic and electric parts.

    The parts may carry a leading batch dimension, shape (..., 3).
    """

    b: np.ndarray
    e: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "b", _frozen(self.b))
        object.__setattr__(self, "e", _frozen(self.e))

    @classmethod
    def zero(cls):
        return cls(np.zeros(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, om):
        om = np.asarray(om, dtype=float)
        b = np.stack([om[..., 1, 2], om[..., 2, 0], om[..., 0, 1]], axis=-1)
        e = om[..., :3, 3]
        return cls(b, e)

    @classmethod
    def from_list(cls, values):
        a = np.asarray(values, dtype=float)
        if a.shape != (6,):
            raise SchemaError("a bivector serializes as 6 numbers [b, e]")
        return cls(a[:3], a[3:])

    def matrix(self):
        b, e = self.b, self.e
        om = np.zeros(b.shape[:-1] + (4, 4))
        om[..., 1, 2], om[..., 2, 1] = b[..., 0], -b[..., 0]
        om[..., 2, 0], om[..., 0, 2] = b[..., 1], -b[..., 1]
        om[..., 0, 1], om[..., 1, 0] = b[..., 2], -b[..., 2]
        om[..., :3, 3] = e
        om[..., 3, :3] = -e
        return om

    def as_array(self):
        return np.concatenate([self.b, self.e], axis=-1)

    def to_list(self):
        return self.as_array().tolist()

    def __add__(self, other):
        return Bivector(self.b + other.b, self.e + other.e)

    def __sub__(self, other):
        return Bivector(self.b - other.b, self.e - other.e)

    def __neg__(self):
        return Bivector(-self.b, -self.e)

    def __mul__(self, c):
        return Bivector(c * self.b, c * self.e)

    __rmul__ = __mul__

    def euclidean_norm(self):
        return np.sqrt(np.sum(self.b**2, -1) + np.sum(self.e**2, -1))

    def comass(self):
        return comass_norm(self)

    def is_zero(self, tol=0.0):
        return bool(np.all(np.abs(self.as_array()) <= tol))

    def __repr__(self):
        return f"Bivector(b={np.round(self.b, 12).tolist()}, e={np.round(self.e, 12).tolist()})"


@dataclass(frozen=True, eq=False)
class State15:
    u: np.ndarray
    S: np.ndarray
    B: np.ndarray
    E: np.ndarray

    def __post_init__(self):
        S = np.array(self.S, dtype=float)
        if S.shape != (3, 3):
            raise SchemaError(f"S must be 3x3, got shape {S.shape}")
        object.__setattr__(self, "u", _vec(self.u))
        object.__setattr__(self, "S", _frozen(0.5 * (S + S.T)))
        object.__setattr__(self, "B", _vec(self.B))
        object.__setattr__(self, "E", _vec(self.E))

    @classmethod
    def zero(cls):
        return cls(np.zeros(3), np.zeros((3, 3)), np.zeros(3), np.zeros(3))

    @classmethod
    def from_array(cls, a):
        a = np.asarray(a, dtype=float).ravel()
        if a.shape != (18,):
            raise SchemaError("a state serializes as 18 numbers [u, S row-major, B, E]")
        return cls(a[:3], a[3:12].reshape(3, 3), a[12:15], a[15:18])

    from_list = from_array

    def as_array(self):
        return np.concatenate([self.u, self.S.ravel(), self.B, self.E])

    def to_list(self):
        return self.as_array().tolist()

    @property
    def omega(self):
        return Bivector(self.B, self.E)

    def with_omega(self, om):
        return State15(self.u, self.S, om.b, om.e)

    def replace(self, **kw):
        d = dict(u=self.u, S=self.S, B=self.B, E=self.E)
        d.update(kw)
        return State15(**d)

    def __add__(self, o):
        return State15(self.u + o.u, self.S + o.S, self.B + o.B, self.E + o.E)

    def __sub__(self, o):
        return State15(self.u - o.u, self.S - o.S, self.B - o.B, self.E - o.E)

    def __neg__(self):
        return State15(-self.u, -self.S, -self.B, -self.E)

    def __mul__(self, c):
        return State15(c * self.u, c * self.S, c * self.B, c * self.E)

    __rmul__ = __mul__

    def norm(self):
        return float(np.linalg.norm(self.as_array()))

    def __repr__(self):
        return (f"State15(u={self.u.tolist()}, S={self.S.tolist()}, "
                f"B={self.B.tolist()}, E={self.E.tolist()})")


@dataclass(frozen=True, eq=False)
class State17:
    """Lifted state W = (u, S, v, w) whose projection replaces (v, w) by v ^ w."""

    u: np.ndarray
    S: np.ndarray
    v: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        S = np.array(self.S, dtype=float)
        object.__setattr__(self, "u", _vec(self.u))
        object.__setattr__(self, "S", _frozen(0.5 * (S + S.T)))
        object.__setattr__(self, "v", _vec(self.v, 4))
        object.__setattr__(self, "w", _vec(self.w, 4))

    @classmethod
    def zero(cls):
        return cls(np.zeros(3), np.zeros((3, 3)), np.zeros(4), np.zeros(4))

    @classmethod
    def lift(cls, state):
        """Lift a state by factorizing its bivector."""
        v, w = factorize(state.omega)
        return cls(state.u, state.S, v, w)

    def project(self):
        om = wedge(self.v, self.w)
        return State15(self.u, self.S, om.b, om.e)

    def as_array(self):
        return np.concatenate([self.u, self.S.ravel(), self.v, self.w])

    def to_list(self):
        return self.as_array().tolist()


@dataclass(frozen=True, eq=False)
class ElsasserState:
    """Elsasser form (z+, z-, M) with M = S + A and A x = E cross x."""

    zPlus: np.ndarray
    zMinus: np.ndarray
    M: np.ndarray
    pressure: float | None = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "zPlus", _vec(self.zPlus))
        object.__setattr__(self, "zMinus", _vec(self.zMinus))
        object.__setattr__(self, "M", _frozen(self.M))


def to_elsasser(v: State15, pressure=None) -> ElsasserState:
    return ElsasserState(v.u + v.B, v.u - v.B, v.S + cross_matrix(v.E), pressure)


def from_elsasser(z: ElsasserState) -> State15:
    M = np.asarray(z.M)
    A = 0.5 * (M - M.T)
    E = np.array([A[2, 1], A[0, 2], A[1, 0]])
    return State15(0.5 * (z.zPlus + z.zMinus), 0.5 * (M + M.T),
                   0.5 * (z.zPlus - z.zMinus), E)


def constitutive_state(u, B, pressure=0.0) -> State15:
    """The point of K with velocity u, field B and pressure Pi."""
    u = np.asarray(u, dtype=float)
    B = np.asarray(B, dtype=float)
    return State15(u, stress_of(u, B) + pressure * _EYE3, B, cross3(B, u))


def elsasser_state(zp, zm, pressure=0.0) -> State15:
    zp = np.asarray(zp, dtype=float)
    zm = np.asarray(zm, dtype=float)
    return constitutive_state(0.5 * (zp + zm), 0.5 * (zp - zm), pressure)


# --- bivector calculus -------------------------------------------------------

def wedge(v, w) -> Bivector:
    """v ^ w for space-time vectors; broadcasts over leading dimensions."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    b = np.cross(v[..., :3], w[..., :3])
    e = v[..., :3] * w[..., 3:4] - v[..., 3:4] * w[..., :3]
    return Bivector(b, e)


def wedge_square(om: Bivector):
    """Coefficient of the volume form in om ^ om, namely 2 b.e."""
    return 2.0 * np.sum(om.b * om.e, axis=-1)


def wedge_pair(om: Bivector, eta: Bivector):
    """Volume coefficient of om ^ eta."""
    return np.sum(om.b * eta.e, -1) + np.sum(om.e * eta.b, -1)


def wedge_vector(om: Bivector, xi):
    """The 3-form om ^ xi as components on (012), (013), (023), (123)."""
    if isinstance(xi, WaveVector):
        xi = xi.as_array()
    xi = np.asarray(xi, dtype=float)
    b, e = om.b, om.e
    x0, x1, x2, t = xi[..., 0], xi[..., 1], xi[..., 2], xi[..., 3]
    c012 = b[..., 0] * x0 + b[..., 1] * x1 + b[..., 2] * x2
    c013 = b[..., 2] * t + e[..., 1] * x0 - e[..., 0] * x1
    c023 = -b[..., 1] * t + e[..., 2] * x0 - e[..., 0] * x2
    c123 = b[..., 0] * t + e[..., 2] * x1 - e[..., 1] * x2
    return np.stack([c012, c013, c023, c123], axis=-1)


def comass_norm(om: Bivector):
    """max over unit f, g of om(f, g): the top singular value of Omega.

    The antisymmetric matrix has singular values s1 >= s2 with
    s1^2 + s2^2 = |b|^2 + |e|^2 and s1 s2 = |b.e|, which gives s1 in closed form.
    """
    n = np.sum(om.b**2, -1) + np.sum(om.e**2, -1)
    d = np.sum(om.b * om.e, -1)
    disc = np.sqrt(np.maximum(n * n - 4.0 * d * d, 0.0))
    return np.sqrt(0.5 * (n + disc))


def is_simple(om: Bivector, tol=TOL_REL):
    return bool(abs(wedge_square(om)) <= tol * comass_norm(om) ** 2 + TOL_ABS**2)


def _factorize_arrays(b, e, tol):
    b = np.atleast_2d(b)
    e = np.atleast_2d(e)
    n = b.shape[0]
    nb = np.linalg.norm(b, axis=1)
    ne = np.linalg.norm(e, axis=1)
    sq = np.abs(2.0 * np.sum(b * e, 1))
    scale2 = comass_norm(Bivector(b, e)) ** 2
    bad = sq > tol * scale2 + TOL_ABS**2
    if np.any(bad):
        i = int(np.argmax(bad))
        raise NotSimple(f"bivector is not simple: 2 b.e = {2 * np.dot(b[i], e[i]):.3e}")
    use_b = nb >= ne
    safe_b = np.where(nb > 0, nb, 1.0)
    safe_e = np.where(ne > 0, ne, 1.0)
    e_proj = e - (np.sum(e * b, 1) / safe_b**2)[:, None] * b
    b_proj = b - (np.sum(b * e, 1) / safe_e**2)[:, None] * e
    bu = np.where(use_b[:, None], b, b_proj)
    eu = np.where(use_b[:, None], e_proj, e)
    neu = np.linalg.norm(eu, axis=1)
    flat = neu <= 1e-14 * (nb + ne)
    v = np.zeros((n, 4))
    w = np.zeros((n, 4))
    for i in range(n):
        if nb[i] == 0.0 and ne[i] == 0.0:
            continue
        if flat[i]:
            p = unit_orthogonal(bu[i])
            v[i, :3] = p
            w[i, :3] = np.cross(bu[i], p)
        else:
            p = eu[i] / neu[i]
            v[i, :3] = p
            w[i, :3] = np.cross(bu[i], p)
            w[i, 3] = neu[i]
    return v, w


def factorize(om: Bivector, tol=TOL_REL):
    """Return (v, w) in R^4 with v ^ w == om.

    The electric part fixes v = (e/|e|, 0) and w = (b cross v_x, |e|); when
    e = 0 the pair spans a plane with normal b.  The zero bivector maps to
    the zero pair.  Raises NotSimple when om ^ om is not negligible.
    Accepts batched bivectors and then returns arrays of shape (n, 4).
    """
    batched = np.ndim(om.b) == 2
    v, w = _factorize_arrays(om.b, om.e, tol)
    if batched:
        return v, w
    return v[0], w[0]


# --- constitutive sets -------------------------------------------------------

def best_pressure(v: State15, params: ConstraintParams):
    R = v.S - stress_of(v.u, v.B)
    pi = np.trace(R) / 3.0
    return float(np.clip(pi, -params.pressure_bound, params.pressure_bound))


def distance_to_K(v: State15, params: ConstraintParams) -> float:
    """Nonnegative defect that vanishes exactly on K_{r,s}."""
    zp = np.linalg.norm(v.u + v.B)
    zm = np.linalg.norm(v.u - v.B)
    pi = best_pressure(v, params)
    stress_gap = np.linalg.norm(v.S - stress_of(v.u, v.B) - pi * _EYE3)
    return float(max(abs(zp - params.r), abs(zm - params.s),
                     np.linalg.norm(v.E - cross3(v.B, v.u)), stress_gap))


def in_K(v: State15, params: ConstraintParams, tol=1e-10) -> bool:
    return distance_to_K(v, params) <= tol


def in_M(v: State15, tol=TOL_REL) -> bool:
    return bool(abs(v.B @ v.E) <= tol * (1.0 + np.linalg.norm(v.B) * np.linalg.norm(v.E)))


# sklearn-style naming aliases
toElsasser = to_elsasser
fromElsasser = from_elsasser
wedgeSquare = wedge_square
wedgeVector = wedge_vector
distanceToK = distance_to_K
inM = in_M

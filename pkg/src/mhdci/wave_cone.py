"""Wave cone membership, certificates and the good/bad segment classification.

A direction V = (u, S, B, E) lies in the wave cone with frequency
xi = (xi_x, xi_t) when the plane wave V h(x.xi_x + t xi_t) solves the linear
conservation laws, i.e.

    xi_x . u = 0,   xi_t u + S xi_x = 0,   xi_x . B = 0,   xi_t B + xi_x x E = 0.

Segments are written [V0 - (1 - lam) Vbar, V0 + lam Vbar].  The upper end
V0 + lam Vbar carries weight 1 - lam in the induced laminate and the lower end
carries weight lam, so the barycentre is V0.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DegenerateProjection, InvalidSegment, NotInCone, ZeroVector
from .phase_space import (
    TOL_REL,
    Bivector,
    State15,
    WaveVector,
    cross_matrix,
    factorize,
    in_M,
    orthonormal_complement,
    unit_orthogonal,
    wedge,
    wedge_pair,
    wedge_vector,
)

CERT_TOL = 1e-11
K_EXCLUSION = 1e-6
# om0 ^ xi counts as nonzero above this multiple of |om0||xi| (roundoff is ~1e-16)
WEDGE_TOL = 1e-12


def cone_residual(v: State15, xi) -> np.ndarray:
    """The eight scalar residuals of the plane-wave conditions."""
    if isinstance(xi, WaveVector):
        xx, xt = xi.xi_x, xi.xi_t
    else:
        xi = np.asarray(xi, dtype=float)
        xx, xt = xi[:3], xi[3]
    return np.concatenate([
        [xx @ v.u],
        xt * v.u + v.S @ xx,
        [xx @ v.B],
        xt * v.B + np.cross(xx, v.E),
    ])


def certificate_ok(v: State15, xi, tol=CERT_TOL) -> bool:
    xi = xi if isinstance(xi, WaveVector) else WaveVector.from_array(xi)
    nx = np.linalg.norm(xi.xi_x)
    if nx == 0:
        return False
    res = np.max(np.abs(cone_residual(v, xi))) / nx
    return bool(res <= tol * (1.0 + v.norm()))


def find_xi(u, B, E, tol=TOL_REL) -> WaveVector:
    """Frequency for the magnetic-velocity part of a direction.

    Returns xi with |xi_x| = 1, xi_x . u = xi_x . B = 0 and
    xi_t B + xi_x x E = 0.
    """
    u, B, E = (np.asarray(a, dtype=float) for a in (u, B, E))
    nB, nE, nu = (np.linalg.norm(a) for a in (B, E, u))
    if abs(B @ E) > tol * (1.0 + nB * nE):
        raise NotInCone(f"B.E = {B @ E:.3e} is not zero")
    n = np.cross(B, u)
    nn = np.linalg.norm(n)
    if nn > 1e-13 * nB * nu and nn > 0:
        # (B x u) x E = -(u.E) B once B.E = 0
        return WaveVector(n / nn, (u @ E) / nn)
    if nE > 0:
        if nB == 0 and abs(E @ u) > tol * (1.0 + nE * nu):
            raise NotInCone("B = 0 and E.u != 0 leave no admissible frequency")
        return WaveVector(E / nE, 0.0)
    basis = orthonormal_complement([u, B])
    if len(basis) == 0:
        raise NotInCone("no direction orthogonal to u and B")
    return WaveVector(basis[0], 0.0)


def _least_squares_time(v: State15, xx):
    den = v.B @ v.B + v.u @ v.u
    if den == 0:
        return 0.0
    return -(v.B @ np.cross(xx, v.E) + v.u @ (v.S @ xx)) / den


def _system_matrix(v: State15):
    """Linear map (xi_x, xi_t) -> cone residuals."""
    L = np.zeros((8, 4))
    L[0, :3] = v.u
    L[1:4, :3] = v.S
    L[1:4, 3] = v.u
    L[4, :3] = v.B
    L[5:8, :3] = -cross_matrix(v.E)
    L[5:8, 3] = v.B
    return L


def in_lambda(v: State15, tol=CERT_TOL):
    """A certificate xi with xi_x != 0 for v, or None if v is not in the cone."""
    if not in_M(v):
        return None
    candidates = []
    n = np.cross(v.B, v.u)
    nn = np.linalg.norm(n)
    if nn > 1e-13 * np.linalg.norm(v.B) * np.linalg.norm(v.u) and nn > 0:
        xx = n / nn
        candidates.append(WaveVector(xx, _least_squares_time(v, xx)))
    else:
        for q in orthonormal_complement([v.u + v.B, v.u - v.B]):
            candidates.append(WaveVector(q, 0.0))
            candidates.append(WaveVector(q, _least_squares_time(v, q)))
    for xi in candidates:
        if certificate_ok(v, xi, tol):
            return xi
    # general fallback: null space of the residual map
    L = _system_matrix(v)
    _, sv, vt = np.linalg.svd(L)
    top = max(sv[0], 1e-300)
    null = vt[np.concatenate([sv, np.zeros(4 - len(sv))]) <= 1e-10 * top].T
    if null.shape[1] == 0:
        return None
    _, _, wt = np.linalg.svd(null[:3])
    xi = null @ wt[0]
    if np.linalg.norm(xi[:3]) < 1e-8:
        return None
    xi = WaveVector.from_array(xi).normalized()
    return xi if certificate_ok(v, xi, tol) else None


# --- segments ----------------------------------------------------------------

class Kind(str, Enum):
    GOOD1 = "Good1"
    GOOD2 = "Good2"
    GOOD3 = "Good3"
    GOOD4 = "Good4"
    BAD = "Bad"


@dataclass(frozen=True)
class GoodnessVerdict:
    kind: Kind
    k: float | None = None
    c1: float | None = None
    c2: float | None = None

    @property
    def good(self):
        return self.kind != Kind.BAD

    def to_dict(self):
        d = {"kind": self.kind.value}
        for name in ("k", "c1", "c2"):
            val = getattr(self, name)
            if val is not None:
                d[name] = float(val)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(Kind(d["kind"]), d.get("k"), d.get("c1"), d.get("c2"))


@dataclass(frozen=True, eq=False)
class SegmentSpec:
    base: State15
    direction: State15
    lam: float
    certificate: WaveVector | None = None

    @property
    def upper(self):
        return self.base + self.lam * self.direction

    @property
    def lower(self):
        return self.base - (1.0 - self.lam) * self.direction

    @classmethod
    def from_endpoints(cls, lower: State15, upper: State15, weight_lower, certificate=None):
        """Segment whose laminate puts weight_lower on lower and the rest on upper."""
        lam = float(weight_lower)
        direction = upper - lower
        base = lam * lower + (1.0 - lam) * upper
        return cls(base, direction, lam, certificate)


def _check_segment(seg: SegmentSpec, tol=CERT_TOL) -> WaveVector:
    if not 0.0 < seg.lam < 1.0:
        raise InvalidSegment(f"lambda = {seg.lam} outside (0, 1)")
    for name, st in (("base", seg.base), ("upper", seg.upper), ("lower", seg.lower)):
        if not in_M(st):
            raise InvalidSegment(f"{name} endpoint is not in M")
    xi = seg.certificate
    if xi is None:
        xi = in_lambda(seg.direction, tol)
        if xi is None:
            raise InvalidSegment("direction is not in the wave cone")
    elif not certificate_ok(seg.direction, xi, tol):
        raise InvalidSegment("certificate does not satisfy the wave cone conditions")
    return xi


def potential_coefficients(om0: Bivector, om: Bivector, xi: WaveVector):
    """Solve (c2 v0 - c1 w0) ^ xi = om for the factors (v0, w0) of om0.

    The returned error is the residual relative to |om| + sum |c_i| |column_i|.
    """
    v0, w0 = factorize(om0)
    xa = xi.as_array()
    A = np.column_stack([-wedge(w0, xa).as_array(), wedge(v0, xa).as_array()])
    sol, *_ = np.linalg.lstsq(A, om.as_array(), rcond=None)
    c1, c2 = sol
    err = np.linalg.norm(A @ sol - om.as_array())
    # relative backward error: residual against the size of the summed terms
    size = np.linalg.norm(om.as_array()) + np.linalg.norm(A, axis=0) @ np.abs(sol)
    return float(c1), float(c2), float(err / max(size, 1e-300)), v0, w0


def _near(k, target, margin):
    return abs(k - target) <= margin * max(abs(target), 1e-300)


def classify_segment(seg: SegmentSpec, exclusion=K_EXCLUSION, tol=1e-9,
                     wedge_tol=WEDGE_TOL) -> GoodnessVerdict:
    """First matching good case, else Bad."""
    xi = _check_segment(seg)
    om0 = seg.base.omega
    om = seg.direction.omega
    scale = 1.0 + seg.base.norm() + seg.direction.norm()
    zero_tol = 1e-12 * scale
    n_om = np.linalg.norm(om.as_array())
    n_om0 = np.linalg.norm(om0.as_array())
    if n_om <= zero_tol:
        return GoodnessVerdict(Kind.GOOD1)
    xn = np.linalg.norm(xi.as_array())
    rel_wedge = np.linalg.norm(wedge_vector(om0, xi)) / max(n_om0 * xn, 1e-300)
    if n_om0 > zero_tol and rel_wedge > wedge_tol:
        if abs(wedge_pair(om0, om)) > 1e-8 * n_om0 * n_om + zero_tol**2:
            raise InvalidSegment("segment leaves M: om0 ^ om != 0")
        c1, c2, err, _, _ = potential_coefficients(om0, om, xi)
        # roundoff in om0 is magnified by the near-degeneracy of om0 ^ xi
        if err > tol + 64 * np.finfo(float).eps / rel_wedge:
            raise InvalidSegment(f"potential condition unsolvable (residual {err:.2e})")
        return GoodnessVerdict(Kind.GOOD2, c1=c1, c2=c2)
    if n_om0 > zero_tol:
        k = float(om.as_array() @ om0.as_array() / n_om0**2)
        if np.linalg.norm(om.as_array() - k * om0.as_array()) <= tol * n_om:
            lam = seg.lam
            if not (_near(k, -1.0 / lam, exclusion) or _near(k, 1.0 / (1.0 - lam), exclusion)):
                return GoodnessVerdict(Kind.GOOD3, k=k)
    d = seg.direction
    if (n_om0 <= zero_tol and np.linalg.norm(d.u) <= zero_tol
            and np.linalg.norm(d.S) <= zero_tol):
        return GoodnessVerdict(Kind.GOOD4)
    return GoodnessVerdict(Kind.BAD)


def rigidity_check(seg: SegmentSpec, tol=1e-10) -> bool:
    """For a good segment with constitutive endpoints, test E0 = B0 x u0."""
    verdict = classify_segment(seg)
    if not verdict.good:
        raise InvalidSegment("segment is not good")
    for st in (seg.lower, seg.upper):
        gap = np.linalg.norm(st.E - np.cross(st.B, st.u))
        if gap > tol * (1.0 + st.norm()):
            raise InvalidSegment("an endpoint violates E = B x u")
    b0 = seg.base
    return bool(np.linalg.norm(b0.E - np.cross(b0.B, b0.u)) <= tol * (1.0 + b0.norm()))


# --- auxiliary constructions ---------------------------------------------------

def realign_factors(v1, w1, v2, w2, tol=1e-14):
    """Rotate the orthonormal pair (v2, w2) inside its plane towards (v1, w1).

    The new first vector is the normalized projection of v1 onto span(v2, w2),
    so v2 ^ w2 is unchanged.
    """
    v1, w1, v2, w2 = (np.asarray(a, dtype=float) for a in (v1, w1, v2, w2))
    a = v1 @ v2
    b = v1 @ w2
    N = np.hypot(a, b)
    if N <= tol:
        raise DegenerateProjection("v1 is orthogonal to the target plane")
    return (a * v2 + b * w2) / N, (-b * v2 + a * w2) / N


def solve_matrix_eq(x, y):
    """Symmetric S with S x = y and operator norm at most 3|y|/|x|."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    nx2 = x @ x
    if nx2 == 0:
        raise ZeroVector("x must be nonzero")
    return (np.outer(x, y) + np.outer(y, x) - (x @ y) * np.eye(len(x))) / nx2


def unit_normal_pair(x):
    """Two unit vectors completing x/|x| to an orthonormal frame of R^3."""
    p = unit_orthogonal(x)
    q = np.cross(x, p)
    return p, q / np.linalg.norm(q)


findXi = find_xi
inLambda = in_lambda
classifySegment = classify_segment
realignFactors = realign_factors
solveMatrixEq = solve_matrix_eq
rigidityCheck = rigidity_check

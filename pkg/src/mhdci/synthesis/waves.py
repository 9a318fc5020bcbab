"""Localized plane waves along good segments and their nested composition.

A wave is an evaluable map y = (x, t) -> W(y) in R^17 that equals its base
state W0 outside its cube.  The fluid part comes from a second-order
potential operator applied to chi(y) h(ell y.xi) / ell^2, and the bivector part
from the Clebsch pair

    phi = v0.y + c1 chi h'(ell y.xi) / ell,   psi = w0.y + c2 chi h'(ell y.xi) / ell,

so that d phi ^ d psi is exactly closed and simple.  Deeper levels of a
laminate are attached on a lattice of small cubes placed inside the plateau
slabs, which keeps evaluation lazy: the child cube containing a point is
computed arithmetically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import BadSegment, DepthExceeded, FrequencyTooLow, NotInKernel
from ..phase_space import State15, State17, WaveVector, wedge
from ..wave_cone import Kind, classify_segment
from .profiles import CubeSpec, build_sawtooth

MAX_LEVELS = 8
DEFAULT_PERIODS = 24


# --- fluid potential -----------------------------------------------------------------

def fluid_matrix(direction: State15):
    """The symmetric 4x4 matrix [[S, u], [u^T, 0]] of a direction."""
    U = np.zeros((4, 4))
    U[:3, :3] = direction.S
    U[:3, 3] = direction.u
    U[3, :3] = direction.u
    return U


def _complement(vectors, dim=4):
    """Orthonormal basis of the orthogonal complement of the given vectors."""
    A = np.atleast_2d(np.asarray(vectors, dtype=float))
    _, sv, vt = np.linalg.svd(A)
    rank = int(np.sum(sv > 1e-12 * max(sv[0], 1e-300)))
    return vt[rank:]


class FluidPotential:
    """Second-order operator P_U with divergence-free output and P_U[h(y.xi)] = h'' U.

    U is written as sum_i (a_i b_i^T + b_i a_i^T) / 2 with a_i, b_i orthogonal
    to xi and a_i purely spatial.  Each pair gives the symbol
    (R eta (Q eta)^T + Q eta (R eta)^T) / 2 with R = (a x xi_x - xi_x x a) / |xi_x|^2
    acting on space only and Q = (b x xi - xi x b) / |xi|^2.
    """

    def __init__(self, U, xi, tol=1e-9):
        U = np.asarray(U, dtype=float)
        xi = xi.as_array() if isinstance(xi, WaveVector) else np.asarray(xi, dtype=float)
        scale = 1.0 + np.abs(U).max()
        if np.linalg.norm(xi[:3]) == 0 and np.abs(U).max() > 0:
            raise NotInKernel("xi_x must be nonzero")
        if np.abs(U - U.T).max() > tol * scale or abs(U[3, 3]) > tol * scale:
            raise NotInKernel("U must be symmetric with vanishing (4,4) entry")
        if np.linalg.norm(U @ xi) > tol * scale * np.linalg.norm(xi):
            raise NotInKernel("U xi != 0")
        self.U = 0.5 * (U + U.T)
        self.xi = xi
        if not np.any(self.U):
            self.pairs = []
            self.R = self.Q = np.zeros((0, 4, 4))
            return
        e4 = np.array([0.0, 0.0, 0.0, 1.0])
        g = _complement([xi, e4])
        f3 = e4 - (e4 @ xi) / (xi @ xi) * xi
        f3 /= np.linalg.norm(f3)
        basis = [g[0], g[1], f3]
        M = np.array([[p @ self.U @ q for q in basis] for p in basis])
        pairs = [(g[0], M[0, 0] * g[0]), (g[1], M[1, 1] * g[1]),
                 (g[0], 2.0 * M[0, 1] * g[1]), (2.0 * M[0, 2] * g[0], f3),
                 (2.0 * M[1, 2] * g[1], f3)]
        self.pairs = [(a, b) for a, b in pairs if np.any(b != 0) and np.any(a != 0)]
        xx = xi[:3]
        Rs, Qs = [], []
        for a, b in self.pairs:
            R = np.zeros((4, 4))
            R[:3, :3] = (np.outer(a[:3], xx) - np.outer(xx, a[:3])) / (xx @ xx)
            Q = (np.outer(b, xi) - np.outer(xi, b)) / (xi @ xi)
            Rs.append(R)
            Qs.append(Q)
        self.R = np.array(Rs).reshape(-1, 4, 4)
        self.Q = np.array(Qs).reshape(-1, 4, 4)

    def symbol(self, eta):
        """P(eta) for one or many covectors eta."""
        eta = np.atleast_2d(eta)
        Re = np.einsum("pij,nj->pni", self.R, eta)
        Qe = np.einsum("pij,nj->pni", self.Q, eta)
        out = 0.5 * (np.einsum("pni,pnj->nij", Re, Qe) + np.einsum("pni,pnj->nij", Qe, Re))
        return out

    def apply(self, H):
        """P(d) phi given the Hessians H (N, 4, 4) of phi."""
        H = np.asarray(H, dtype=float).reshape(-1, 4, 4)
        if len(self.pairs) == 0:
            return np.zeros_like(H)
        RHQ = np.einsum("pij,njk,plk->nil", self.R, H, self.Q)
        return 0.5 * (RHQ + np.transpose(RHQ, (0, 2, 1)))

    def __call__(self, hessian_fn):
        """The operator on a scalar field given through its Hessian callback."""
        return lambda Y: self.apply(hessian_fn(Y))


def fluid_potential(U, xi) -> FluidPotential:
    return FluidPotential(U, xi)


# --- evaluated samples ------------------------------------------------------------------

@dataclass
class WaveSample:
    """Values of a lifted field at N points plus bookkeeping.

    atom is the index of the laminate atom whose plateau contains the point
    (-1 if none) and freq the largest oscillation frequency active there.
    """

    u: np.ndarray
    S: np.ndarray
    v: np.ndarray
    w: np.ndarray
    atom: np.ndarray
    freq: np.ndarray

    @classmethod
    def constant(cls, W: State17, n):
        return cls(np.tile(W.u, (n, 1)), np.tile(W.S, (n, 1, 1)), np.tile(W.v, (n, 1)),
                   np.tile(W.w, (n, 1)), np.full(n, -1), np.zeros(n))

    def __len__(self):
        return len(self.u)

    def assign(self, mask, other: "WaveSample"):
        for name in ("u", "S", "v", "w", "atom", "freq"):
            getattr(self, name)[mask] = getattr(other, name)

    def omega(self):
        return wedge(self.v, self.w)

    def states(self):
        """(N, 18) array of projected states [u, S, B, E]."""
        om = self.omega()
        return np.concatenate([self.u, self.S.reshape(-1, 9), om.b, om.e], axis=1)

    def lifted(self):
        return np.concatenate([self.u, self.S.reshape(-1, 9), self.v, self.w], axis=1)

    def state(self, i) -> State15:
        return State15.from_array(self.states()[i])


# --- waves -------------------------------------------------------------------------------

@dataclass(eq=False)
class LatticeChild:
    """A template wave repeated on the cubes of a lattice aligned with the parent's slabs."""

    template: "LocalizedWave"
    frame: np.ndarray
    slabs: list            # (unit axis, frequency, (s0, s1)) per slab axis
    side: float

    def locate(self, Y, parent_cube: CubeSpec, parent_centers):
        """Mask of points inside a lattice cube that fits in the parent's plateau core."""
        pc = parent_cube.center if parent_centers is None else parent_centers
        Z = (Y - pc) @ self.frame
        zc = np.empty_like(Z)
        mask = np.ones(len(Y), dtype=bool)
        nslab = len(self.slabs)
        for j, (axis, kappa, (s0, s1)) in enumerate(self.slabs):
            theta = kappa * Z[:, j]
            k = np.floor(theta)
            frac = theta - k
            mask &= (frac >= s0) & (frac <= s1)
            zc[:, j] = (k + 0.5 * (s0 + s1)) / kappa
        T = self.side
        for j in range(nslab, 4):
            zc[:, j] = (np.floor(Z[:, j] / T) + 0.5) * T
        centers = pc + zc @ self.frame.T
        if mask.any():
            corners = np.array(np.meshgrid(*[[-0.5, 0.5]] * 4, indexing="ij")).reshape(4, -1).T
            offs = corners * T @ self.frame.T
            idx = np.nonzero(mask)[0]
            pci = None if parent_centers is None else parent_centers[idx]
            ok = np.ones(len(idx), dtype=bool)
            for off in offs:
                ok &= parent_cube.inner_contains(centers[idx] + off, pci)
            mask[idx[~ok]] = False
        return mask, centers


@dataclass(eq=False)
class LocalizedWave:
    base: State17
    cube: CubeSpec
    ell: float
    children: dict = field(default_factory=dict)
    labels: dict = field(default_factory=dict)

    def evaluate(self, Y, centers=None) -> WaveSample:
        """Lifted values at the points Y (N, 4); centers overrides the cube centre per point."""
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        if centers is not None:
            centers = np.broadcast_to(centers, Y.shape)
        out = self._local(Y, centers)
        for key, child in self.children.items():
            mask, cc = child.locate(Y, self.cube, centers)
            if mask.any():
                out.assign(mask, child.template.evaluate(Y[mask], cc[mask]))
        return out

    __call__ = evaluate

    def _offset(self, Y, centers):
        # phases are taken relative to the cube centre so that they stay exact at high frequency
        return Y - (self.cube.center if centers is None else centers)

    def levels(self):
        sub = [c.template.levels() for c in self.children.values()]
        return 1 + (max(sub) if sub else 0)


@dataclass(eq=False)
class PlaneWave(LocalizedWave):
    """Wave along a segment of kind Good1, Good2 or Good3."""

    direction: State15 = None
    xi: np.ndarray = None
    lam: float = 0.5
    profile: object = None
    c1: float = 0.0
    c2: float = 0.0
    fluid: FluidPotential = None
    kind: Kind = Kind.GOOD1

    def _local(self, Y, centers):
        n = len(Y)
        xi = self.xi
        theta = self.ell * (self._offset(Y, centers) @ xi)
        s = theta - np.floor(theta)
        h2, h1, h0 = self.profile(s)
        chi, g, H = self.cube.cutoff(Y, centers)
        a = (chi * h2)[:, None] * xi + (h1 / self.ell)[:, None] * g
        W0 = self.base
        v = W0.v + self.c1 * a
        w = W0.w + self.c2 * a
        Hrest = ((h1 / self.ell)[:, None, None] * (g[:, :, None] * xi[None, None, :]
                                                   + xi[None, :, None] * g[:, None, :])
                 + (h0 / self.ell**2)[:, None, None] * H)
        P = (chi * h2)[:, None, None] * self.fluid.U + self.fluid.apply(Hrest)
        u = W0.u + P[:, :3, 3]
        S = W0.S + P[:, :3, :3]
        atom = np.full(n, -1)
        flat = chi == 1.0
        for key, label in self.labels.items():
            s0, s1 = self.profile.plateau(key)
            atom[flat & (s >= s0) & (s <= s1)] = label
        freq = np.where(chi > 0, self.ell * np.linalg.norm(xi), 0.0)
        return WaveSample(u, S, v, w, atom, freq)

    def plateau_value(self, key) -> State17:
        hv = self.profile.high if key == 2 else self.profile.low
        W0 = self.base
        U = self.fluid.U
        return State17(W0.u + hv * U[:3, 3], W0.S + hv * U[:3, :3],
                       W0.v + self.c1 * hv * self.xi, W0.w + self.c2 * hv * self.xi)

    def lattice(self):
        """Frame, slab data and side of the plateau cubes for each key."""
        kappa = self.ell * np.linalg.norm(self.xi)
        f1 = self.xi / np.linalg.norm(self.xi)
        F = np.column_stack([f1, *_complement([f1])])
        out = {}
        for key in (1, 2):
            s0, s1 = self.profile.plateau(key)
            out[key] = (F, [(f1, kappa, (s0, s1))], (s1 - s0) / kappa)
        return out

    def cancellation_error(self, Y):
        """Pointwise |d phi ^ d psi - v0 ^ w0 - chi h'' (c2 v0 - c1 w0) ^ xi| (Euclidean)."""
        Y = np.atleast_2d(Y)
        sample = self._local(Y, None)
        theta = self.ell * (self._offset(Y, None) @ self.xi)
        h2 = self.profile.d2(theta - np.floor(theta))
        chi, _, _ = self.cube.cutoff(Y)
        W0 = self.base
        lead = wedge(W0.v, W0.w).as_array() + (chi * h2)[:, None] * wedge(
            self.c2 * W0.v - self.c1 * W0.w, self.xi).as_array()
        return np.linalg.norm(sample.omega().as_array() - lead, axis=-1)


@dataclass(eq=False)
class CrossWave(LocalizedWave):
    """Two-direction wave for a pure bivector direction from a vanishing base (lam = 1/2).

    phi = chi h'(ell y.vbar) / ell and psi = 2 chi h'(ell y.wbar) / ell with
    vbar orthogonal to wbar, so d phi ^ d psi = +-(1/2) vbar ^ wbar on the plateaus.
    """

    vbar: np.ndarray = None
    wbar: np.ndarray = None
    profile: object = None

    KEYS = ((1, 1), (-1, -1), (1, -1), (-1, 1))

    def _phases(self, Y, centers):
        Z = self._offset(Y, centers)
        t1 = self.ell * (Z @ self.vbar)
        t2 = self.ell * (Z @ self.wbar)
        return t1 - np.floor(t1), t2 - np.floor(t2)

    def _local(self, Y, centers):
        n = len(Y)
        s1, s2 = self._phases(Y, centers)
        p1, q1, _ = self.profile(s1)
        p2, q2, _ = self.profile(s2)
        chi, g, _ = self.cube.cutoff(Y, centers)
        W0 = self.base
        v = W0.v + (chi * p1)[:, None] * self.vbar + (q1 / self.ell)[:, None] * g
        w = W0.w + 2.0 * ((chi * p2)[:, None] * self.wbar + (q2 / self.ell)[:, None] * g)
        atom = np.full(n, -1)
        flat = chi == 1.0
        for key, label in self.labels.items():
            m1 = self._on(s1, key[0])
            m2 = self._on(s2, key[1])
            atom[flat & m1 & m2] = label
        kap = self.ell * max(np.linalg.norm(self.vbar), np.linalg.norm(self.wbar))
        freq = np.where(chi > 0, kap, 0.0)
        return WaveSample(np.tile(W0.u, (n, 1)), np.tile(W0.S, (n, 1, 1)), v, w, atom, freq)

    def _on(self, s, sign):
        lo, hi = self.profile.plateau(2 if sign > 0 else 1)
        return (s >= lo) & (s <= hi)

    def plateau_value(self, key) -> State17:
        W0 = self.base
        return State17(W0.u, W0.S, W0.v + 0.5 * key[0] * self.vbar, W0.w + key[1] * self.wbar)

    def lattice(self):
        n = np.linalg.norm(self.vbar)
        f1 = self.vbar / n
        f2 = self.wbar / np.linalg.norm(self.wbar)
        F = np.column_stack([f1, f2, *_complement([f1, f2])])
        kappa = self.ell * n
        out = {}
        for key in self.KEYS:
            i1 = self.profile.plateau(2 if key[0] > 0 else 1)
            i2 = self.profile.plateau(2 if key[1] > 0 else 1)
            out[key] = (F, [(f1, kappa, i1), (f2, kappa, i2)], (i1[1] - i1[0]) / kappa)
        return out


# --- construction ----------------------------------------------------------------------

def potential_coefficients_for(W0: State17, om, xi, tol=1e-9):
    """(c1, c2) with (c2 v0 - c1 w0) ^ xi = om for the factors carried by W0."""
    xa = xi.as_array() if isinstance(xi, WaveVector) else np.asarray(xi, dtype=float)
    target = om.as_array()
    if np.linalg.norm(target) == 0:
        return 0.0, 0.0
    A = np.column_stack([-wedge(W0.w, xa).as_array(), wedge(W0.v, xa).as_array()])
    sol, *_ = np.linalg.lstsq(A, target, rcond=None)
    err = np.linalg.norm(A @ sol - target)
    size = np.linalg.norm(target) + np.linalg.norm(A, axis=0) @ np.abs(sol)
    if err > tol * size + 1e-300 or not np.all(np.isfinite(sol)):
        raise BadSegment(f"potential condition has no solution (relative residual {err / size:.2e})")
    return float(sol[0]), float(sol[1])


def _check_frequency(ell, kappa_unit, cube):
    periods = ell * kappa_unit * cube.side * cube.inner
    if periods < 2.0:
        raise FrequencyTooLow(f"only {periods:.2f} periods fit in the cube core")


def _auto_ell(kappa_unit, cube, periods):
    return float(math.ceil(periods / (kappa_unit * cube.side)))


def _expand_good4(node):
    """Rewrite a Good4 split with lam != 1/2 as a symmetric Good4 split followed by Good3 splits."""
    from ..laminates import SplitNode

    lam, V, xi = node.lam, node.direction, node.certificate
    delta = 0.5 * min(lam, 1.0 - lam)
    up_state = node.state + delta * V
    lo_state = node.state - delta * V
    up = SplitNode(up_state, None, lam - delta, V, xi, None, node.lower, node.upper)
    lo = SplitNode(lo_state, None, lam + delta, V, xi, None, node.lower, node.upper)
    return SplitNode(node.state, node.pressure, 0.5, 2.0 * delta * V, xi, None, lo, up)


def _single_wave(W0, node, verdict, cube, ell, eps, periods):
    V, xi = node.direction, node.certificate
    xa = xi.as_array()
    if verdict.kind == Kind.GOOD4:
        if np.any(W0.v != 0) or np.any(W0.w != 0):
            raise BadSegment("a vanishing base bivector must carry zero factors")
        from ..goodify import plane_basis

        p1, p2, sigma = plane_basis(V.omega)
        vbar, wbar = np.sqrt(sigma) * p1, np.sqrt(sigma) * p2
        kappa = np.linalg.norm(vbar)
        ell = _auto_ell(kappa, cube, periods) if ell is None else float(ell)
        _check_frequency(ell, kappa, cube)
        return CrossWave(W0, cube, ell, vbar=vbar, wbar=wbar, profile=build_sawtooth(0.5, eps))
    om0 = wedge(W0.v, W0.w)
    if np.linalg.norm(om0.as_array()) == 0 and (np.any(W0.v != 0) or np.any(W0.w != 0)) \
            and np.linalg.norm(V.omega.as_array()) > 0:
        raise BadSegment("degenerate factors with a vanishing base bivector")
    c1, c2 = potential_coefficients_for(W0, V.omega, xa)
    kappa = np.linalg.norm(xa)
    ell = _auto_ell(kappa, cube, periods) if ell is None else float(ell)
    _check_frequency(ell, kappa, cube)
    fluid = FluidPotential(fluid_matrix(V), xa)
    return PlaneWave(W0, cube, ell, direction=V, xi=xa, lam=node.lam,
                     profile=build_sawtooth(node.lam, eps), c1=c1, c2=c2, fluid=fluid,
                     kind=verdict.kind)


def _plateau_nodes(wave, node):
    if isinstance(wave, CrossWave):
        return {k: (node.upper if k[0] == k[1] else node.lower) for k in CrossWave.KEYS}
    return {1: node.lower, 2: node.upper}


def _build(W0, node, cube, level, ells, eps, periods, labels):
    if level >= MAX_LEVELS:
        raise DepthExceeded(f"more than {MAX_LEVELS} nested wave levels")
    verdict = classify_segment(node.segment())
    if verdict.kind == Kind.BAD:
        raise BadSegment("bad segments must be goodified before synthesis")
    if verdict.kind == Kind.GOOD4 and abs(node.lam - 0.5) > 1e-14:
        node = _expand_good4(node)
        verdict = classify_segment(node.segment())
    ell = ells[level] if ells is not None and level < len(ells) else None
    wave = _single_wave(W0, node, verdict, cube, ell, eps, periods)
    geometry = wave.lattice()
    for key, child in _plateau_nodes(wave, node).items():
        if child.is_leaf:
            wave.labels[key] = labels[id(child)]
            continue
        F, slabs, side = geometry[key]
        template_cube = CubeSpec(np.zeros(4), side, eps, F)
        sub = _build(wave.plateau_value(key), child, template_cube, level + 1, ells, eps,
                     periods, labels)
        wave.children[key] = LatticeChild(sub, F, slabs, side)
    return wave


def _leaf_labels(root):
    """Atom index for every leaf node, in the order of Laminate.atoms()."""
    labels = {}
    stack = [root]
    count = 0
    while stack:
        n = stack.pop()
        if n.is_leaf:
            labels.setdefault(id(n), count)
            count += 1
        else:
            stack.append(n.upper)
            stack.append(n.lower)
    return labels


def synthesize_laminate(W0: State17, lam, cube: CubeSpec, ells=None, eps=0.05,
                        periods=DEFAULT_PERIODS) -> LocalizedWave:
    """Nested localized waves realizing a good laminate inside the cube.

    ells gives the frequency per level; missing entries are chosen so that
    `periods` oscillations fit across the cube of that level.
    """
    root = lam.root if hasattr(lam, "root") else lam
    if root.is_leaf:
        raise BadSegment("a single atom has no segment to synthesize")
    base = W0.project()
    if np.linalg.norm(base.as_array() - root.state.as_array()) > 1e-9 * (1.0 + root.state.norm()):
        raise BadSegment("W0 does not project to the laminate barycentre")
    return _build(W0, root, cube, 0, ells, eps, periods, _leaf_labels(root))


def synthesize_wave(W0: State17, seg, cube: CubeSpec, ell=None, eps=0.05,
                    periods=DEFAULT_PERIODS) -> LocalizedWave:
    """Localized wave along one good segment; plateau labels 0 (lower) and 1 (upper)."""
    from ..laminates import SplitNode

    node = SplitNode(seg.base, None, seg.lam, seg.direction, seg.certificate, None,
                     SplitNode(seg.lower), SplitNode(seg.upper))
    ells = None if ell is None else [ell]
    return synthesize_laminate(W0, node, cube, ells, eps, periods)


# --- measurements -----------------------------------------------------------------------

def plateau_fractions(wave: LocalizedWave, n_atoms, rng, n=100_000, cube=None):
    """Stratified Monte-Carlo measure of each atom's plateau set relative to the cube."""
    cube = wave.cube if cube is None else cube
    Y = cube.sample(rng, n)
    atoms = wave.evaluate(Y).atom
    return np.array([np.mean(atoms == j) for j in range(n_atoms)])


def relaxed_residual(field_fn, Y, freq=None, rel_step=1e-4, order=4):
    """Finite-difference residual of the linear relaxed system at points Y.

    Returns the residual vector norms (N,) built from d_t u + div S, div u,
    d_t B + curl E and div B.  The step at each point is rel_step divided by
    the local frequency, rounded down to a power of two; order
    selects the centred 2- or 4-point stencil.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if freq is None:
        freq = field_fn(Y).freq
    # power-of-two steps keep y +- h exact
    h = 2.0 ** np.floor(np.log2(rel_step / np.maximum(freq, 1.0)))
    if order == 2:
        stencil = ((1, 0.5), (-1, -0.5))
    elif order == 4:
        stencil = ((2, -1 / 12), (1, 8 / 12), (-1, -8 / 12), (-2, 1 / 12))
    else:
        raise ValueError("order must be 2 or 4")
    d = []
    for k in range(4):
        acc = 0.0
        for m, c in stencil:
            Ys = Y.copy()
            Ys[:, k] += m * h
            acc = acc + c * field_fn(Ys).states()
        d.append(acc / h[:, None])
    Dx, Dy, Dz, Dt = d

    def comp(D, name, i=None, j=None):
        off = {"u": 0, "S": 3, "B": 12, "E": 15}[name]
        if name == "S":
            return D[:, off + 3 * i + j]
        return D[:, off + i]

    grads = (Dx, Dy, Dz)
    mom = np.stack([Dt[:, i] + sum(comp(grads[j], "S", i, j) for j in range(3)) for i in range(3)], 1)
    divu = sum(comp(grads[j], "u", j) for j in range(3))
    divB = sum(comp(grads[j], "B", j) for j in range(3))
    dE = lambda j, i: comp(grads[j], "E", i)  # noqa: E731
    curlE = np.stack([dE(1, 2) - dE(2, 1), dE(2, 0) - dE(0, 2), dE(0, 1) - dE(1, 0)], 1)
    far = np.stack([Dt[:, 12 + i] + curlE[:, i] for i in range(3)], 1)
    return np.sqrt(np.sum(mom**2, 1) + divu**2 + np.sum(far**2, 1) + divB**2)


fluidPotential = fluid_potential
synthesizeWave = synthesize_wave
synthesizeLaminate = synthesize_laminate

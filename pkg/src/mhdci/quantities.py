"""Conserved quantities on periodic grids.

Fields live on [0, 2pi)^d with n points per axis; all spatial derivatives
are spectral and only time derivatives use finite differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from .errors import CFLViolation, NonzeroMean, NotSolenoidal, ResidualTooLarge, SchemaError

TWO_PI = 2.0 * np.pi
DIV_TOL = 1e-10
MEAN_TOL = 1e-12
WORKERS = None


def set_workers(n):
    """Thread count used by the FFTs (None lets scipy decide)."""
    global WORKERS
    WORKERS = n


def _fft(a, axes):
    return sfft.fftn(a, axes=axes, workers=WORKERS)


def _ifft(a, axes):
    return sfft.ifftn(a, axes=axes, workers=WORKERS).real


def wavenumbers(n, dim):
    k = sfft.fftfreq(n, 1.0 / n)
    return np.meshgrid(*([k] * dim), indexing="ij")


def grid(n, dim=3):
    x = TWO_PI * np.arange(n) / n
    return np.meshgrid(*([x] * dim), indexing="ij")


def _scale(a):
    return float(np.sqrt(np.mean(a**2))) + 1e-300


# --- 3D fields -------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TorusField3:
    """Vector field samples of shape (3, n, n, n) on the 3-torus."""

    samples: np.ndarray
    solenoidal: bool = False
    mean_zero: bool = False

    def __post_init__(self):
        a = np.array(self.samples, dtype=float)
        if a.ndim != 4 or a.shape[0] != 3 or len(set(a.shape[1:])) != 1:
            raise SchemaError(f"expected samples of shape (3, n, n, n), got {a.shape}")
        a.setflags(write=False)
        object.__setattr__(self, "samples", a)

    @property
    def n(self):
        return self.samples.shape[1]

    @property
    def cell_volume(self):
        return (TWO_PI / self.n) ** 3

    @classmethod
    def from_function(cls, fn, n, **flags):
        x = grid(n, 3)
        return cls(np.stack(fn(*x)), **flags)

    def spectrum(self):
        return _fft(self.samples, (1, 2, 3))

    def mean(self):
        return self.samples.mean(axis=(1, 2, 3))

    def integrate(self, density):
        return float(np.sum(density) * self.cell_volume)

    def validate(self):
        """Check the declared flags; raises NotSolenoidal or NonzeroMean."""
        if self.solenoidal:
            d = divergence(self)
            if np.abs(d).max() > DIV_TOL * max(1.0, np.abs(self.samples).max()):
                raise NotSolenoidal(f"spectral divergence {np.abs(d).max():.2e}")
        if self.mean_zero and np.abs(self.mean()).max() > MEAN_TOL * max(1.0, np.abs(self.samples).max()):
            raise NonzeroMean(f"mean {np.abs(self.mean()).max():.2e}")
        return self

    def __add__(self, other):
        return TorusField3(self.samples + other.samples)

    def __sub__(self, other):
        return TorusField3(self.samples - other.samples)

    def __mul__(self, c):
        return TorusField3(c * self.samples, self.solenoidal, self.mean_zero)

    __rmul__ = __mul__


def divergence(F: TorusField3):
    k = wavenumbers(F.n, 3)
    Fh = F.spectrum()
    return _ifft(sum(1j * k[i] * Fh[i] for i in range(3)), (0, 1, 2))


def curl(F: TorusField3) -> TorusField3:
    k1, k2, k3 = wavenumbers(F.n, 3)
    a, b, c = F.spectrum()
    out = np.stack([1j * (k2 * c - k3 * b), 1j * (k3 * a - k1 * c), 1j * (k1 * b - k2 * a)])
    return TorusField3(_ifft(out, (1, 2, 3)), solenoidal=True, mean_zero=True)


def vector_potential(B: TorusField3) -> TorusField3:
    """Divergence-free mean-zero A with curl A = B, from A = -Laplacian^{-1} curl B."""
    TorusField3(B.samples, solenoidal=True, mean_zero=True).validate()
    k1, k2, k3 = wavenumbers(B.n, 3)
    k2sum = k1**2 + k2**2 + k3**2
    k2sum[0, 0, 0] = 1.0
    a, b, c = B.spectrum()
    curl_hat = np.stack([1j * (k2 * c - k3 * b), 1j * (k3 * a - k1 * c), 1j * (k1 * b - k2 * a)])
    A = curl_hat / k2sum
    A[:, 0, 0, 0] = 0.0
    return TorusField3(_ifft(A, (1, 2, 3)), solenoidal=True, mean_zero=True)


@dataclass(frozen=True)
class Integrals:
    energy: float
    cross_helicity: float
    magnetic_helicity: float

    def as_tuple(self):
        return self.energy, self.cross_helicity, self.magnetic_helicity


def integrals(u: TorusField3, B: TorusField3, helicity=True) -> Integrals:
    """Energy 1/2 int(|u|^2 + |B|^2), cross helicity int u.B and magnetic helicity int A.B."""
    U, Bs = u.samples, B.samples
    energy = 0.5 * B.integrate(np.sum(U * U, 0) + np.sum(Bs * Bs, 0))
    cross = B.integrate(np.sum(U * Bs, 0))
    mag = float("nan")
    if helicity:
        A = vector_potential(B)
        mag = B.integrate(np.sum(A.samples * Bs, 0))
    return Integrals(energy, cross, mag)


def magnetic_helicity(B: TorusField3):
    A = vector_potential(B)
    return B.integrate(np.sum(A.samples * B.samples, 0))


def arnold_bound(B: TorusField3):
    """(int |B|^2, |int A.B|); the first dominates the second on the unit-frequency torus."""
    return B.integrate(np.sum(B.samples**2, 0)), abs(magnetic_helicity(B))


def _l2(F, n):
    return float(np.sqrt(np.sum(F**2) * (TWO_PI / n) ** 3))


def maxwell_residual(Bs, Es, dt):
    """max over interior steps of ||d_t B + curl E||_2 (centred in t) and of ||div B||_2."""
    if len(Bs) != len(Es) or len(Bs) < 3:
        raise SchemaError("need matching series of at least three time levels")
    n = Bs[0].n
    worst = max(_l2(divergence(B), n) for B in Bs)
    for j in range(1, len(Bs) - 1):
        dB = (Bs[j + 1].samples - Bs[j - 1].samples) / (2.0 * dt)
        worst = max(worst, _l2(dB + curl(Es[j]).samples, n))
    return worst


@dataclass
class DriftReport:
    times: np.ndarray
    helicity: np.ndarray
    measured_rate: np.ndarray
    predicted_rate: np.ndarray
    max_discrepancy: float
    drift_per_time: float
    maxwell_residual: float

    def rows(self):
        for j, t in enumerate(self.times):
            yield {"t": float(t), "magnetic_helicity": float(self.helicity[j]),
                   "measured_rate": float(self.measured_rate[j]),
                   "predicted_rate": float(self.predicted_rate[j])}


def helicity_drift(Bs, Es, dt, check=True, residual_tol=None):
    """Compare centred d/dt int A.B with -2 int B.E along a Maxwell time series.

    With check=True the series must satisfy the Maxwell system up to
    residual_tol (default: 10 (dt^2 + n^-2) times the field scale).
    """
    n = Bs[0].n
    res = maxwell_residual(Bs, Es, dt)
    scale = max(_scale(B.samples) for B in Bs) * max(_scale(E.samples) for E in Es) + \
        max(_scale(B.samples) for B in Bs) ** 2
    tol = 10.0 * (dt**2 + n**-2) * scale * TWO_PI**1.5 if residual_tol is None else residual_tol
    if check and res > tol:
        raise ResidualTooLarge(f"Maxwell residual {res:.3e} exceeds {tol:.3e}")
    H = np.array([magnetic_helicity(B) for B in Bs])
    pred = np.array([-2.0 * B.integrate(np.sum(B.samples * E.samples, 0)) for B, E in zip(Bs, Es)])
    meas = np.full(len(Bs), np.nan)
    meas[1:-1] = (H[2:] - H[:-2]) / (2.0 * dt)
    disc = float(np.nanmax(np.abs(meas - pred))) if len(Bs) > 2 else 0.0
    T = dt * (len(Bs) - 1)
    return DriftReport(np.arange(len(Bs)) * dt, H, meas, pred, disc,
                       float(np.abs(H - H[0]).max() / T), res)


def _truncate3(a):
    n = a.shape[-1]
    k = wavenumbers(n, 3)
    mask = np.all([np.abs(ki) < n / 3.0 for ki in k], axis=0)
    return _ifft(_fft(a, (1, 2, 3)) * mask, (1, 2, 3))


def evolve_induction(B0: TorusField3, u: TorusField3, dt, T):
    """Ideal induction d_t B = curl(u x B) by RK4, returning (B, E = B x u) series.

    E is orthogonal to B pointwise, so the pair has B.E = 0 by construction.
    """
    steps = max(1, int(round(T / dt)))
    U = _truncate3(u.samples)

    def electric(b):
        return _truncate3(np.cross(b, U, axis=0))

    def rhs(b):
        return -curl(TorusField3(electric(b))).samples

    b = _truncate3(B0.samples)
    Bs, Es = [TorusField3(b)], [TorusField3(electric(b))]
    for _ in range(steps):
        k1 = rhs(b)
        k2 = rhs(b + 0.5 * dt * k1)
        k3 = rhs(b + 0.5 * dt * k2)
        k4 = rhs(b + dt * k3)
        b = b + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        Bs.append(TorusField3(b))
        Es.append(TorusField3(electric(b)))
    return Bs, Es


def sample_to_torus(field_fn, n, times, box_lo=None, box_hi=None):
    """Sample B and E of a space-time field on the torus grid at the given times.

    The torus [0, 2pi)^3 is mapped affinely onto the spatial part of the box.
    """
    lo = np.zeros(3) if box_lo is None else np.asarray(box_lo, dtype=float)
    hi = np.ones(3) if box_hi is None else np.asarray(box_hi, dtype=float)
    x = np.stack([g.ravel() for g in grid(n, 3)], 1) / TWO_PI
    pts = lo + x * (hi - lo)
    stretch = (hi - lo) / TWO_PI
    Bs, Es = [], []
    for t in times:
        Y = np.concatenate([pts, np.full((len(pts), 1), t)], 1)
        st = field_fn(Y).states()
        B = st[:, 12:15] * (stretch[[1, 2, 0]] * stretch[[2, 0, 1]])
        E = st[:, 15:18] * stretch
        Bs.append(TorusField3(B.T.reshape(3, n, n, n)))
        Es.append(TorusField3(E.T.reshape(3, n, n, n)))
    return Bs, Es


# --- 2D fields -------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TorusField2:
    """Vector field samples of shape (2, n, n) on the 2-torus, with an optional stream function."""

    samples: np.ndarray
    stream: np.ndarray | None = None

    def __post_init__(self):
        a = np.array(self.samples, dtype=float)
        if a.ndim != 3 or a.shape[0] != 2 or a.shape[1] != a.shape[2]:
            raise SchemaError(f"expected samples of shape (2, n, n), got {a.shape}")
        a.setflags(write=False)
        object.__setattr__(self, "samples", a)

    @property
    def n(self):
        return self.samples.shape[1]

    @classmethod
    def from_stream(cls, psi):
        return cls(perp_grad(psi), np.asarray(psi, dtype=float))


def _cell2(n):
    return (TWO_PI / n) ** 2


def integrate2(a):
    return float(np.sum(a) * _cell2(a.shape[-1]))


def gradient2(f):
    k1, k2 = wavenumbers(f.shape[0], 2)
    fh = _fft(f, (0, 1))
    return _ifft(1j * k1 * fh, (0, 1)), _ifft(1j * k2 * fh, (0, 1))


def perp_grad(f):
    """(-d_2 f, d_1 f)."""
    f1, f2 = gradient2(np.asarray(f, dtype=float))
    return np.stack([-f2, f1])


def stream_function(v: TorusField2):
    """Mean-zero psi with perp_grad(psi) = v for solenoidal mean-zero v."""
    n = v.n
    k1, k2 = wavenumbers(n, 2)
    vh = _fft(v.samples, (1, 2))
    div = _ifft(1j * (k1 * vh[0] + k2 * vh[1]), (0, 1))
    size = max(1.0, np.abs(v.samples).max())
    if np.abs(div).max() > DIV_TOL * size:
        raise NotSolenoidal(f"spectral divergence {np.abs(div).max():.2e}")
    if np.abs(v.samples.mean(axis=(1, 2))).max() > MEAN_TOL * size:
        raise NonzeroMean("field has nonzero mean")
    ksq = k1**2 + k2**2
    ksq[0, 0] = 1.0
    vort = 1j * (k1 * vh[1] - k2 * vh[0])
    ph = -vort / ksq
    ph[0, 0] = 0.0
    return _ifft(ph, (0, 1))


def jacobian(f, g, dealias=False):
    """J(f, g) = d_1 f d_2 g - d_2 f d_1 g, optionally with the 2/3 rule."""
    n = f.shape[0]
    if dealias:
        f, g = _truncate(f), _truncate(g)
    f1, f2 = gradient2(f)
    g1, g2 = gradient2(g)
    J = f1 * g2 - f2 * g1
    return _truncate(J) if dealias else J


def _mask(n):
    k1, k2 = wavenumbers(n, 2)
    cut = n / 3.0
    return (np.abs(k1) < cut) & (np.abs(k2) < cut)


def _truncate(f):
    return _ifft(_fft(f, (0, 1)) * _mask(f.shape[0]), (0, 1))


@dataclass
class Evolution2D:
    times: np.ndarray
    psi: list
    msmp: np.ndarray
    magnetic_energy: np.ndarray
    dt: float
    cfl: float

    def rows(self):
        for t, m, e in zip(self.times, self.msmp, self.magnetic_energy):
            yield {"t": float(t), "msmp": float(m), "magnetic_energy": float(e)}

    @property
    def msmp_drift(self):
        return float(np.abs(self.msmp - self.msmp[0]).max())


def _as_stream(phi):
    if callable(phi):
        return phi
    arr = np.asarray(phi, dtype=float)
    return lambda t: arr


def cfl_step(phi_t, n, cfl=0.5):
    """Step with cfl = dt max|grad phi| / dx."""
    u = perp_grad(phi_t)
    speed = np.sqrt(np.sum(u**2, 0)).max()
    if speed == 0:
        return np.inf
    return cfl * (TWO_PI / n) / speed


def evolve_2d(phi, psi0, dt=None, T=1.0, cfl_max=1.0, keep=1):
    """Advect psi by d_t psi + J(phi, psi) = 0 with RK4 and the 2/3 rule.

    phi is an (n, n) array or a callable of t.  With dt=None the step is
    chosen from the CFL estimate at cfl 0.5.  Every `keep`-th level is stored.
    """
    psi = _truncate(np.asarray(psi0, dtype=float))
    n = psi.shape[0]
    phi_fn = _as_stream(phi)
    if dt is None:
        dt = cfl_step(phi_fn(0.0), n)
        dt = T if not np.isfinite(dt) else dt
    steps = int(round(T / dt))
    if steps < 1 or abs(steps * dt - T) > 1e-9 * max(T, 1.0):
        steps = max(1, int(np.ceil(T / dt)))
        dt = T / steps
    speed_dt = dt / cfl_step(phi_fn(0.0), n, cfl=1.0) if np.any(phi_fn(0.0)) else 0.0
    worst = speed_dt

    def rhs(t, p):
        return -jacobian(_truncate(phi_fn(t)), p, dealias=True)

    times, series, msmp, energy = [0.0], [psi], [integrate2(psi**2)], [_magnetic_energy(psi)]
    t = 0.0
    for j in range(steps):
        ph = phi_fn(t + 0.5 * dt)
        if np.any(ph):
            c = dt / cfl_step(ph, n, cfl=1.0)
            worst = max(worst, c)
            if c > cfl_max:
                raise CFLViolation(f"CFL number {c:.3f} exceeds {cfl_max}")
        k1 = rhs(t, psi)
        k2 = rhs(t + 0.5 * dt, psi + 0.5 * dt * k1)
        k3 = rhs(t + 0.5 * dt, psi + 0.5 * dt * k2)
        k4 = rhs(t + dt, psi + dt * k3)
        psi = psi + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = (j + 1) * dt
        msmp.append(integrate2(psi**2))
        energy.append(_magnetic_energy(psi))
        times.append(t)
        if (j + 1) % keep == 0 or j + 1 == steps:
            series.append(psi)
    return Evolution2D(np.array(times), series, np.array(msmp), np.array(energy), dt, worst)


def _magnetic_energy(psi):
    return integrate2(np.sum(perp_grad(psi) ** 2, 0))


def jacobian_pairing(f1, f2, f3):
    """(int f1 J(f2, f3), ratio to ||grad f1|| ||grad f2|| ||grad f3||)."""
    val = integrate2(f1 * jacobian(f2, f3))
    norms = [np.sqrt(integrate2(np.sum(np.stack(gradient2(f)) ** 2, 0))) for f in (f1, f2, f3)]
    denom = float(np.prod(norms))
    return val, (abs(val) / denom if denom > 0 else 0.0)


@dataclass
class FloorReport:
    min_magnetic_energy: float
    floor: np.ndarray
    magnetic_energy: np.ndarray
    constant: float
    ok: bool


def poincare_floor(evo: Evolution2D, constant=1.0, slack=0.0):
    """Per-step lower bound constant * int psi^2 against int |B|^2 = int |grad psi|^2."""
    floor = constant * np.asarray(evo.msmp)
    energy = np.asarray(evo.magnetic_energy)
    ok = bool(np.all(energy >= floor - slack))
    if evo.msmp[0] > 0:
        ok = ok and bool(floor.min() > 0)
    return FloorReport(float(energy.min()), floor, energy, constant, ok)


# --- storage -----------------------------------------------------------------------------

def save_field(path, samples, **flags):
    """Raw little-endian float64 samples plus a JSON sidecar."""
    path = Path(path)
    a = np.ascontiguousarray(samples, dtype="<f8")
    a.tofile(path)
    n = a.shape[-1]
    meta = {"shape": list(a.shape), "dtype": "<f8", "spacing": TWO_PI / n, **flags}
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True))


def load_field(path):
    """(samples, sidecar) from a raw grid and its JSON sidecar."""
    path = Path(path)
    side = path.with_suffix(path.suffix + ".json")
    try:
        meta = json.loads(side.read_text())
        shape = tuple(int(s) for s in meta["shape"])
    except (OSError, ValueError, KeyError, TypeError) as err:
        raise SchemaError(f"unreadable sidecar {side}: {err}") from err
    a = np.fromfile(path, dtype="<f8")
    if a.size != int(np.prod(shape)):
        raise SchemaError(f"{path} holds {a.size} values, sidecar declares {shape}")
    return a.reshape(shape), meta


def load_torus_field3(path) -> TorusField3:
    a, meta = load_field(path)
    return TorusField3(a, bool(meta.get("solenoidal", False)), bool(meta.get("mean_zero", False)))


vectorPotential = vector_potential
helicityDrift = helicity_drift
maxwellResidual = maxwell_residual
streamFunction = stream_function
evolve2D = evolve_2d
jacobianPairing = jacobian_pairing
poincareFloor = poincare_floor

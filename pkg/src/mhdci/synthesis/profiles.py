"""Oscillation profiles and cutoff functions.

The sawtooth profile h has a second derivative that is a mollified 1-periodic
step function taking the value lam on a set of relative length about 1 - lam
and -(1 - lam) on the rest.  The mollifier is the polynomial bump
c (1 - y^2)^4 on [-1, 1], so h', h'' and h all have closed piecewise
polynomial forms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial

from ..errors import BadParams

# repeated antiderivatives of the normalized bump, started at y = -1
_BUMP = Polynomial([1.0, 0.0, -1.0]) ** 4
_BUMP = _BUMP / (_BUMP.integ()(1.0) - _BUMP.integ()(-1.0))
_P1 = _BUMP.integ(lbnd=-1.0)
_P2 = _P1.integ(lbnd=-1.0)
_P3 = _P2.integ(lbnd=-1.0)
_P3_AT_1 = float(_P3(1.0))


def _step(x, rho):
    """Mollified Heaviside step of half-width rho."""
    y = np.clip(x / rho, -1.0, 1.0)
    return np.where(x <= -rho, 0.0, np.where(x >= rho, 1.0, _P1(y)))


def _ramp(x, rho):
    """Antiderivative of the step vanishing on the far left."""
    y = np.clip(x / rho, -1.0, 1.0)
    return np.where(x <= -rho, 0.0, np.where(x >= rho, x, rho * _P2(y)))


def _ramp2(x, rho):
    y = np.clip(x / rho, -1.0, 1.0)
    return np.where(x <= -rho, 0.0,
                    np.where(x >= rho, rho * rho * _P3_AT_1 + 0.5 * (x * x - rho * rho),
                             rho * rho * _P3(y)))


@dataclass(frozen=True)
class SawtoothProfile:
    """h with h'' in [-(1 - lam), lam], 1-periodic h, h', h'' and mean-zero h''."""

    lam: float
    epsilon: float
    moll_radius: float
    _mean_first: float = field(init=False, repr=False)

    def __post_init__(self):
        lam, rho = self.lam, self.moll_radius
        a = 1.0 - lam
        # mean over one period of int_0^s h''
        m = (-(1.0 - lam) / 2.0
             + float(_ramp2(1.0, rho) - _ramp2(0.0, rho))
             - float(_ramp(0.0, rho))
             - float(_ramp2(1.0 - a, rho) - _ramp2(-a, rho))
             + float(_ramp2(0.0, rho) - _ramp2(-1.0, rho)))
        object.__setattr__(self, "_mean_first", m)

    @property
    def high(self):
        return self.lam

    @property
    def low(self):
        return -(1.0 - self.lam)

    def plateau(self, which):
        """Phase interval in [0, 1) where h'' is constant: 2 for high, 1 for low."""
        rho, a = self.moll_radius, 1.0 - self.lam
        if which == 2:
            return (rho, a - rho)
        return (a + rho, 1.0 - rho)

    def d2(self, s):
        s = np.asarray(s, dtype=float)
        s = s - np.floor(s)
        lam, rho, a = self.lam, self.moll_radius, 1.0 - self.lam
        val = self.low + _step(s, rho) - _step(s - a, rho) + _step(s - 1.0, rho)
        lo2, hi2 = self.plateau(2)
        lo1, hi1 = self.plateau(1)
        val = np.where((s >= lo2) & (s <= hi2), lam, val)
        return np.where((s >= lo1) & (s <= hi1), self.low, val)

    def _first_raw(self, s):
        rho, a = self.moll_radius, 1.0 - self.lam
        return (self.low * s + _ramp(s, rho) - _ramp(0.0, rho)
                - _ramp(s - a, rho) + _ramp(s - 1.0, rho))

    def d1(self, s):
        s = np.asarray(s, dtype=float)
        s = s - np.floor(s)
        return self._first_raw(s) - self._mean_first

    def d0(self, s):
        s = np.asarray(s, dtype=float)
        s = s - np.floor(s)
        rho, a = self.moll_radius, 1.0 - self.lam
        J = (0.5 * self.low * s * s
             + _ramp2(s, rho) - _ramp2(0.0, rho) - _ramp(0.0, rho) * s
             - (_ramp2(s - a, rho) - _ramp2(-a, rho))
             + _ramp2(s - 1.0, rho) - _ramp2(-1.0, rho))
        return J - self._mean_first * s

    def __call__(self, s):
        """(h'', h', h) at phases s."""
        return self.d2(s), self.d1(s), self.d0(s)


def build_sawtooth(lam, eps) -> SawtoothProfile:
    if not (0.0 < lam < 1.0 and 0.0 < eps < 1.0):
        raise BadParams("lam and eps must lie in (0, 1)")
    return SawtoothProfile(float(lam), float(eps), float(eps) * min(lam, 1.0 - lam) / 4.0)


# --- cutoff -------------------------------------------------------------------------

def _smoothstep(t):
    """C^4 transition 0 -> 1 on [0, 1] with its first two derivatives."""
    t = np.clip(t, 0.0, 1.0)
    s = t**5 * (126.0 + t * (-420.0 + t * (540.0 + t * (-315.0 + 70.0 * t))))
    d1 = 630.0 * t**4 * (1.0 - t) ** 4
    d2 = 2520.0 * t**3 * (1.0 - t) ** 3 * (1.0 - 2.0 * t)
    return s, d1, d2


SMOOTHSTEP_SLOPE = 630.0 / 256.0


@dataclass(frozen=True, eq=False)
class CubeSpec:
    """Space-time cube with a tensor-product cutoff.

    The cube has edges along the columns of `frame` (identity by default).  The
    cutoff equals 1 on the concentric inner cube of volume fraction 1 - eps/3
    and vanishes outside the cube.
    """

    center: np.ndarray
    side: float
    epsilon: float = 0.05
    frame: np.ndarray = None

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(4))
        F = np.eye(4) if self.frame is None else np.asarray(self.frame, dtype=float)
        object.__setattr__(self, "frame", F)
        if not self.side > 0 or not 0.0 < self.epsilon < 1.0:
            raise BadParams("cube side must be positive and eps in (0, 1)")

    @property
    def inner(self):
        """Inner half-width as a fraction of the half side."""
        return (1.0 - self.epsilon / 3.0) ** 0.25

    @property
    def volume(self):
        return self.side**4

    def grad_bound(self):
        return 2.0 * SMOOTHSTEP_SLOPE / ((1.0 - self.inner) * self.side)

    def moved(self, center):
        return CubeSpec(center, self.side, self.epsilon, self.frame)

    def local(self, Y, centers=None):
        c = self.center if centers is None else centers
        return (np.atleast_2d(Y) - c) @ self.frame / (0.5 * self.side)

    def contains(self, Y, centers=None):
        return np.all(np.abs(self.local(Y, centers)) < 1.0, axis=-1)

    def inner_contains(self, Y, centers=None, slack=0.0):
        return np.all(np.abs(self.local(Y, centers)) <= self.inner - slack, axis=-1)

    def cutoff(self, Y, centers=None):
        """chi, grad chi (N, 4) and Hessian (N, 4, 4) at the points Y."""
        z = self.local(Y, centers)
        a = self.inner
        r = np.abs(z)
        t = (1.0 - r) / (1.0 - a)
        s, d1, d2 = _smoothstep(t)
        inside = r <= a
        beta = np.where(inside, 1.0, s)
        db = np.where(inside, 0.0, -np.sign(z) * d1 / (1.0 - a))
        ddb = np.where(inside, 0.0, d2 / (1.0 - a) ** 2)
        n = len(z)
        chi = np.prod(beta, axis=1)
        others = np.empty((n, 4))
        for j in range(4):
            others[:, j] = np.prod(np.delete(beta, j, axis=1), axis=1)
        gz = db * others
        Hz = np.empty((n, 4, 4))
        for j in range(4):
            for k in range(4):
                if j == k:
                    Hz[:, j, j] = ddb[:, j] * others[:, j]
                else:
                    rest = np.prod(np.delete(beta, [j, k], axis=1), axis=1)
                    Hz[:, j, k] = db[:, j] * db[:, k] * rest
        sc = 2.0 / self.side
        F = self.frame
        grad = sc * gz @ F.T
        hess = sc * sc * np.einsum("ij,njk,lk->nil", F, Hz, F)
        return chi, grad, hess

    def sample(self, rng, n, stratified=True):
        """Points of the cube; stratified over an m^4 grid when possible."""
        if stratified:
            m = max(1, int(round(n ** 0.25)))
            grid = np.stack(np.meshgrid(*[np.arange(m)] * 4, indexing="ij"), -1).reshape(-1, 4)
            z = (grid + rng.random(grid.shape)) / m
        else:
            z = rng.random((n, 4))
        return self.center + (z - 0.5) * self.side @ self.frame.T


buildSawtooth = build_sawtooth

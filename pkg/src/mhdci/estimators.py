"""Estimator-style wrappers around the hull decomposition and the spectral vector potential."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .laminates import HullParams, decompose_full, goodify
from .phase_space import ConstraintParams, State15
from .quantities import TorusField3, curl, vector_potential


def _states(X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != 18:
        raise ValueError(f"expected rows of 18 numbers [u, S, B, E], got width {X.shape[1]}")
    return [State15.from_array(x) for x in X]


class HullDecomposer(TransformerMixin, BaseEstimator):
    """Map states of the relaxed set to laminates with atoms on K_{r,s}.

    transform returns an object array of Laminate; summarize turns rows into
    (atoms, depth, barycentre error, max distance to K).
    """

    def __init__(self, r=2.0, s=1.0, tau=0.5, eps_tau=None, good=False):
        self.r = r
        self.s = s
        self.tau = tau
        self.eps_tau = eps_tau
        self.good = good

    def fit(self, X=None, y=None):
        self.params_ = ConstraintParams(self.r, self.s)
        self.hull_params_ = HullParams(self.params_, self.tau, self.eps_tau)
        return self

    def _check(self):
        if not hasattr(self, "hull_params_"):
            raise NotFittedError("call fit before transform")

    def decompose(self, state: State15):
        self._check()
        lam = decompose_full(state, self.hull_params_)
        return goodify(lam, self.hull_params_) if self.good else lam

    def transform(self, X):
        out = np.empty(len(np.atleast_2d(X)), dtype=object)
        for i, v in enumerate(_states(X)):
            out[i] = self.decompose(v)
        return out

    def summarize(self, X):
        rows = []
        for lam in self.transform(X):
            rows.append([len(lam.atoms()), lam.depth(), lam.barycenter_error(),
                         lam.max_distance_to_K(self.params_)])
        return np.array(rows)


class VectorPotential(TransformerMixin, BaseEstimator):
    """B -> A with curl A = B on the 3-torus; inverse_transform is the curl."""

    def fit(self, X=None, y=None):
        self.fitted_ = True
        return self

    @staticmethod
    def _field(X):
        return X if isinstance(X, TorusField3) else TorusField3(X)

    def transform(self, X):
        if not getattr(self, "fitted_", False):
            raise NotFittedError("call fit before transform")
        return vector_potential(self._field(X)).samples

    def inverse_transform(self, X):
        return curl(self._field(X)).samples

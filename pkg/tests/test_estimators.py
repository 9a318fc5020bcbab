import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from mhdci.estimators import HullDecomposer, VectorPotential
from mhdci.laminates import HullParams, sample_relaxed_state
from mhdci.phase_space import ConstraintParams
from mhdci.scenarios import abc_field


def test_params_roundtrip_through_clone():
    est = HullDecomposer(r=3.0, s=1.5, tau=0.7, good=True)
    twin = clone(est)
    assert twin.get_params() == est.get_params()
    assert twin.set_params(tau=0.4).tau == 0.4


def test_transform_requires_fit():
    with pytest.raises(NotFittedError):
        HullDecomposer().transform(np.zeros((1, 18)))


def test_summaries_match_certificates(rng):
    hp = HullParams(ConstraintParams(2.0, 1.0), 0.5)
    X = np.array([sample_relaxed_state(hp, rng).as_array() for _ in range(5)])
    est = HullDecomposer().fit(X)
    lams = est.transform(X)
    assert lams.shape == (5,)
    table = est.summarize(X)
    assert table.shape == (5, 4)
    assert (table[:, 2] <= 1e-10).all() and (table[:, 3] <= 1e-9).all()
    for lam, x in zip(lams, X):
        np.testing.assert_allclose(lam.root.state.as_array(), x)


def test_rejects_wrong_width():
    with pytest.raises(ValueError):
        HullDecomposer().fit().transform(np.zeros((2, 15)))


def test_vector_potential_in_pipeline():
    B = abc_field(8).samples
    pipe = make_pipeline(VectorPotential())
    A = pipe.fit_transform(B)
    np.testing.assert_allclose(VectorPotential().inverse_transform(A), B, atol=1e-12)

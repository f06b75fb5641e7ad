import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fedkf.filter_core import (
    KfModel,
    ShapeMismatchError,
    SingularMatrixError,
    StateEstimate,
    gain,
    predict,
    step,
    update,
)

from conftest import random_spd


# independent scalar oracle, written without matrices
def naive_predict(x, p, a, q):
    return a * x, a * a * p + q


def naive_update(x, p, c, r, z):
    k = p * c / (c * p * c + r)
    return x + k * (z - c * x), (1 - k * c) ** 2 * p + k * k * r


class TestPredict:
    def test_identity_dynamics(self):
        out = predict(StateEstimate([5.0], [[2.0]]), KfModel.scalar(A=1, Q=0))
        assert out.x[0] == 5.0 and out.P[0, 0] == 2.0 and out.k == 1

    def test_scalar_process_noise(self):
        out = predict(StateEstimate([-57.0], [[1.0]]), KfModel.scalar(A=1, Q=0.5))
        assert out.x[0] == -57.0
        assert out.P[0, 0] == pytest.approx(1.5)

    def test_constant_velocity(self):
        model = KfModel(A=[[1, 1], [0, 1]], C=[[1, 0]], Q=np.zeros((2, 2)), R=[[1]])
        out = predict(StateEstimate([0, 1], np.eye(2)), model)
        np.testing.assert_allclose(out.x, [1, 1])
        np.testing.assert_allclose(out.P, [[2, 1], [1, 1]])

    def test_control_input(self):
        model = KfModel(A=[[1]], B=[[2]], C=[[1]], Q=[[0]], R=[[1]])
        assert predict(StateEstimate([1.0], [[1.0]]), model, u=[3.0]).x[0] == 7.0

    def test_shape_mismatch_names_matrix(self):
        model = KfModel.scalar()
        with pytest.raises(ShapeMismatchError, match="A"):
            predict(StateEstimate([0, 0], np.eye(2)), model)
        with pytest.raises(ShapeMismatchError, match="B"):
            predict(StateEstimate([0.0], [[1.0]]), model, u=[1.0, 2.0])


class TestGain:
    def test_half(self):
        assert gain([[1]], [[1]], [[1]])[0, 0] == pytest.approx(0.5)

    def test_no_trust_limit(self):
        assert abs(gain([[1]], [[1]], [[1e12]])[0, 0]) <= 1e-10

    def test_full_trust_limit(self):
        assert gain([[4]], [[1]], [[1e-12]])[0, 0] == pytest.approx(1.0, abs=1e-6)

    def test_shape(self):
        K = gain(np.eye(3), np.ones((2, 3)), np.eye(2))
        assert K.shape == (3, 2)

    def test_singular(self):
        with pytest.raises(SingularMatrixError):
            gain(np.zeros((1, 1)), [[1]], [[0]])


class TestUpdate:
    def test_zero_innovation_is_bit_identical(self):
        model = KfModel(A=np.eye(2), C=[[1.0, 0.5]], Q=np.eye(2), R=[[2.0]])
        est = StateEstimate([0.3, -1.7], [[2.0, 0.3], [0.3, 1.0]])
        out = update(est, model, model.C @ est.x)
        assert np.array_equal(out.x, est.x)
        assert not np.array_equal(out.P, est.P)

    def test_hand_evaluation(self):
        out = update(StateEstimate([0.0], [[1.0]]), KfModel.scalar(R=1), [2.0])
        assert out.x[0] == pytest.approx(1.0)
        assert out.P[0, 0] == pytest.approx(0.5)

    def test_measurement_ignored(self):
        out = update(StateEstimate([0.0], [[1.0]]), KfModel.scalar(R=1e12), [100.0])
        assert abs(out.x[0]) <= 1e-6

    def test_measurement_dimension(self):
        with pytest.raises(ShapeMismatchError):
            update(StateEstimate([0.0], [[1.0]]), KfModel.scalar(), [1.0, 2.0])


def test_scalar_oracle_equivalence():
    rng = np.random.default_rng(7)
    a, c, q, r = 0.97, 1.3, 0.4, 2.5
    model = KfModel.scalar(A=a, C=c, Q=q, R=r)
    est = StateEstimate([1.0], [[5.0]])
    x, p = 1.0, 5.0
    for _ in range(1000):
        z = rng.normal(0, 3)
        est = step(est, model, [z])
        x, p = naive_update(*naive_predict(x, p, a, q), c, r, z)
        assert est.x[0] == pytest.approx(x, abs=1e-12)
        assert est.P[0, 0] == pytest.approx(p, abs=1e-12)


def test_joseph_form_keeps_covariance_spd():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        n_x = int(rng.integers(1, 5))
        n_z = int(rng.integers(1, n_x + 1))
        model = KfModel(
            A=rng.normal(size=(n_x, n_x)),
            C=rng.normal(size=(n_z, n_x)),
            Q=random_spd(rng, n_x, 0.0, 2.0),
            R=random_spd(rng, n_z, 0.01, 5.0),
        )
        est = StateEstimate(rng.normal(size=n_x), random_spd(rng, n_x))
        out = update(predict(est, model), model, rng.normal(size=n_z))
        assert np.max(np.abs(out.P - out.P.T)) <= 1e-9
        assert np.min(np.linalg.eigvalsh(out.P)) >= -1e-9


@settings(max_examples=60, deadline=None)
@given(
    r=st.floats(0.05, 50),
    p0=st.floats(0.01, 100),
    zs=st.lists(st.floats(-100, 100), min_size=1, max_size=30),
)
def test_trace_non_increasing_without_process_noise(r, p0, zs):
    model = KfModel.scalar(Q=0.0, R=r)
    est = StateEstimate([0.0], [[p0]])
    prev = np.trace(est.P)
    for z in zs:
        est = update(predict(est, model), model, [z])
        tr = np.trace(est.P)
        assert tr <= prev * (1 + 1e-12)
        prev = tr


def test_model_validation():
    assert KfModel.scalar(Q=0.1, R=1.0).is_valid()
    assert not KfModel.scalar(R=0.0).is_valid()
    with pytest.raises(ShapeMismatchError, match="R"):
        KfModel(A=np.eye(2), C=np.ones((1, 2)), Q=np.eye(2), R=np.eye(2))
    assert StateEstimate([0, 0], [[1, 0], [0, 1]]).is_valid()
    assert not StateEstimate([0, 0], [[1, 2], [0, 1]]).is_valid()

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ngkalman import models
from ngkalman.errors import ContractError


def rel(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1.0)


# --- static models --------------------------------------------------------

def test_linear_predict_examples():
    m = models.LinearModel(1, 1)
    np.testing.assert_array_equal(m.predict([2.0], [3.0]), [6.0])
    m2 = models.LinearModel(2, 2)
    np.testing.assert_array_equal(m2.predict(np.eye(2).ravel(), [4.0, -5.0]), [4.0, -5.0])


def test_linear_jacobian_examples():
    np.testing.assert_array_equal(models.LinearModel(1, 1).jacobian_theta([7.0], [3.0]), [[3.0]])
    u = np.array([2.0, -1.0])
    H = models.LinearModel(2, 2).jacobian_theta(np.zeros(4), u)
    np.testing.assert_array_equal(H, [[2.0, -1.0, 0.0, 0.0], [0.0, 0.0, 2.0, -1.0]])


def test_linear_bias_flattening():
    m = models.LinearModel(2, 2, bias=True)
    theta = np.arange(6.0)   # A = [[0, 1], [2, 3]], b = [4, 5]
    A, b = m.unpack(theta)
    np.testing.assert_array_equal(A, [[0, 1], [2, 3]])
    np.testing.assert_array_equal(b, [4, 5])
    np.testing.assert_array_equal(m.predict(theta, [1.0, 1.0]), [5.0, 10.0])
    np.testing.assert_array_equal(m.jacobian_theta(theta, [1.0, 2.0])[:, 4:], np.eye(2))


def test_net_zero_parameter_gives_zero():
    m = models.OneHiddenLayerNet(5, 4, 2)
    assert m.dim_theta == 5 * 4 + 4 + 4 * 2 + 2
    np.testing.assert_array_equal(m.predict(np.zeros(m.dim_theta), np.arange(5.0)), np.zeros(2))


def test_net_flattening_order():
    m = models.OneHiddenLayerNet(2, 3, 1)
    theta = np.arange(m.dim_theta, dtype=float)
    W1, b1, W2, b2 = m.unpack(theta)
    np.testing.assert_array_equal(W1, np.arange(6.0).reshape(3, 2))
    np.testing.assert_array_equal(b1, [6, 7, 8])
    np.testing.assert_array_equal(W2, [[9, 10, 11]])
    np.testing.assert_array_equal(b2, [12])


def test_net_jacobian_matches_fd_seed7():
    rng = np.random.default_rng(7)
    m = models.OneHiddenLayerNet(3, 4, 2)
    theta, u = rng.standard_normal(m.dim_theta), rng.standard_normal(3)
    fd = models.fd_jacobian(lambda th: m.predict(th, u), theta)
    assert rel(m.jacobian_theta(theta, u), fd) <= 1e-5


def test_fan_in():
    np.testing.assert_array_equal(models.OneHiddenLayerNet(3, 2, 1).fan_in(), [3] * 8 + [2] * 3)
    np.testing.assert_array_equal(models.LinearModel(3, 2, bias=True).fan_in(), [3] * 8)


@pytest.mark.parametrize("call", [
    lambda: models.LinearModel(2, 2).predict(np.zeros(3), [1, 1]),
    lambda: models.LinearModel(2, 2).predict(np.zeros(4), [1, 1, 1]),
    lambda: models.OneHiddenLayerNet(2, 2, 1).jacobian_theta(np.zeros(2), [1, 1]),
    lambda: models.LinearRNN(1, 1).step([0.0, 0.0], [0.5, 1.0], [1.0]),
    lambda: models.TanhRNN(1, 2).jacobians([0.0, 0.0], np.zeros(3), [1.0]),
])
def test_dimension_mismatch(call):
    with pytest.raises(ContractError):
        call()


# --- recurrent models -----------------------------------------------------

def test_linear_rnn_examples():
    m = models.LinearRNN(1, 1)
    theta = m.pack([[0.5]], [[1.0]])
    assert models.step_recurrent(m, [0.0], theta, [1.0]).tolist() == [1.0]
    assert models.step_recurrent(m, [1.0], theta, [1.0]).tolist() == [1.5]
    d_theta, d_state = models.jacobians_recurrent(m, [2.0], theta, [3.0])
    np.testing.assert_array_equal(d_theta, [[2.0, 3.0]])
    np.testing.assert_array_equal(d_state, [[0.5]])


def test_linear_rnn_zero_inputs_zero_theta_jacobian():
    m = models.LinearRNN(2, 3)
    d_theta, _ = m.jacobians(np.zeros(3), np.ones(m.dim_theta), np.zeros(2))
    np.testing.assert_array_equal(d_theta, np.zeros((3, m.dim_theta)))


def test_tanh_rnn_zero_parameter():
    m = models.TanhRNN(2, 3)
    np.testing.assert_array_equal(m.step([0.3, -1.0, 2.0], np.zeros(m.dim_theta), [1.0, 4.0]), np.zeros(3))


def test_tanh_rnn_jacobians_match_fd_seed11():
    rng = np.random.default_rng(11)
    m = models.TanhRNN(2, 3)
    theta, y, u = rng.standard_normal(m.dim_theta), rng.standard_normal(3), rng.standard_normal(2)
    d_theta, d_state = m.jacobians(y, theta, u)
    assert rel(d_theta, models.fd_jacobian(lambda th: m.step(y, th, u), theta)) <= 1e-5
    assert rel(d_state, models.fd_jacobian(lambda yy: m.step(yy, theta, u), y)) <= 1e-5


def test_observed_slice():
    m = models.LinearRNN(2, 4, observed=(1, 3))
    assert m.observed_slice == slice(1, 3) and models.observed_dim(m) == 2
    assert models.observed_dim(models.TanhRNN(1, 3)) == 3
    for bad in ((2, 2), (0, 5), (-1, 2)):
        with pytest.raises(ContractError):
            models.LinearRNN(2, 4, observed=bad)


def test_contraction_of_linear_rnn():
    rng = np.random.default_rng(1)
    m = models.LinearRNN(2, 3)
    A = rng.standard_normal((3, 3))
    A *= 0.7 / np.abs(np.linalg.eigvals(A)).max()
    theta = m.pack(A, rng.standard_normal((3, 2)))
    norms = {np.linalg.norm(m.jacobians(rng.standard_normal(3), theta, rng.standard_normal(2))[1], 2)
             for _ in range(5)}
    assert len(norms) == 1
    assert np.abs(np.linalg.eigvals(m.jacobians(np.zeros(3), theta, np.zeros(2))[1])).max() < 1


def test_purity():
    m = models.TanhRNN(2, 3)
    rng = np.random.default_rng(3)
    theta, y, u = rng.standard_normal(m.dim_theta), rng.standard_normal(3), rng.standard_normal(2)
    a, b = m.step(y, theta, u), m.step(y, theta, u)
    assert a.tobytes() == b.tobytes()
    s = models.OneHiddenLayerNet(2, 3, 1)
    th = rng.standard_normal(s.dim_theta)
    assert s.predict(th, u).tobytes() == s.predict(th, u).tobytes()


# --- fd_jacobian ----------------------------------------------------------

def test_fd_jacobian_examples():
    np.testing.assert_allclose(models.fd_jacobian(lambda x: x, np.array([0.3, -2.0, 5.0])), np.eye(3), atol=1e-9)
    assert models.fd_jacobian(lambda x: x ** 2, np.array([2.0]))[0, 0] == pytest.approx(4.0, abs=1e-8)
    M = np.array([[1.0, 2.0], [3.0, -4.0], [0.5, 0.0]])
    for h in (1e-3, 1e-6):
        np.testing.assert_allclose(models.fd_jacobian(lambda x: M @ x + 1.0, np.array([0.1, 0.2]), h=h), M, atol=1e-9)


# --- properties -----------------------------------------------------------

KINDS = [lambda: models.LinearRNN(2, 3), lambda: models.TanhRNN(2, 3),
         lambda: models.LinearModel(3, 2, bias=True), lambda: models.OneHiddenLayerNet(3, 4, 2)]


@settings(max_examples=50, deadline=None)
@given(kind=st.integers(0, 3), seed=st.integers(0, 2 ** 32 - 1))
def test_jacobians_match_fd(kind, seed):
    rng = np.random.default_rng(seed)
    m = KINDS[kind]()
    theta = 0.5 * rng.standard_normal(m.dim_theta)
    u = rng.standard_normal(m.dim_u)
    if models.is_recurrent(m):
        y = rng.standard_normal(m.dim_y)
        d_theta, d_state = m.jacobians(y, theta, u)
        assert rel(d_theta, models.fd_jacobian(lambda th: m.step(y, th, u), theta)) <= 1e-5
        assert rel(d_state, models.fd_jacobian(lambda yy: m.step(yy, theta, u), y)) <= 1e-5
    else:
        assert rel(m.jacobian_theta(theta, u), models.fd_jacobian(lambda th: m.predict(th, u), theta)) <= 1e-5


def test_from_config():
    assert isinstance(models.from_config({"kind": "linear", "dim_u": 2, "dim_y": 1}), models.LinearModel)
    m = models.from_config({"kind": "tanh_rnn", "dim_u": 2, "dim_y": 3, "observed_slice": [0, 1]})
    assert isinstance(m, models.TanhRNN) and models.observed_dim(m) == 1
    assert models.is_recurrent(m) and not models.is_recurrent(models.LinearModel(1, 1))
    with pytest.raises(ContractError, match="hidden"):
        models.from_config({"kind": "one_hidden_layer", "dim_u": 2, "dim_y": 1})
    with pytest.raises(ContractError):
        models.from_config({"kind": "lstm"})

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ngkalman import ekf, expfam, models, recurrent
from ngkalman.checks import random_blocks as _random_blocks
from ngkalman.data import stable_matrix
from ngkalman.errors import ContractError, DecompositionError, SingularityError
from ngkalman.natgrad import fisher_term
from ngkalman.recurrent import BlockCovariance

G1 = expfam.gaussian(1.0)
BERN = expfam.bernoulli()


def random_blocks(rng):
    b = _random_blocks(rng)
    R = np.diag(rng.uniform(0.5, 2.0, 3))
    return b, rng.standard_normal((3, 4)), 0.8 * rng.standard_normal((3, 3)) / np.sqrt(3), R


def blocks_close(a, b, tol):
    scale = max(np.abs(a.assemble()).max(), 1.0)
    for name in ("P_theta", "G", "W"):
        assert np.abs(getattr(a, name) - getattr(b, name)).max() <= tol * scale, name


# --- RTRL -----------------------------------------------------------------

def test_rtrl_hand_recursion():
    m = models.LinearRNN(1, 1)
    s = recurrent.init_rtrl(m, m.pack([[0.5]], [[1.0]]), [0.0])
    s = recurrent.rtrl_step(s, m, G1, [1.0], [0.0], eta=0.0)
    assert s.G[0, 0] == 0.0 and s.y_state[0] == 1.0
    s = recurrent.rtrl_step(s, m, G1, [1.0], [0.0], eta=0.0)
    assert s.G[0, 0] == 1.0 and s.y_state[0] == 1.5


def test_rtrl_zero_sensitivity_stays_zero():
    m = models.LinearRNN(2, 2)
    s = recurrent.init_rtrl(m, np.ones(m.dim_theta), np.zeros(2))
    for _ in range(5):
        s = recurrent.rtrl_step(s, m, expfam.gaussian(np.eye(2)), np.zeros(2), np.zeros(2), eta=0.1)
    np.testing.assert_array_equal(s.G, 0.0)


def unrolled(m, theta, y0, inputs):
    y = np.asarray(y0, dtype=float)
    for u in inputs:
        y = m.step(y, theta, u)
    return y


@pytest.mark.parametrize("make", [lambda: models.LinearRNN(2, 3), lambda: models.TanhRNN(2, 3)])
def test_rtrl_matches_fd_through_trajectory(make):
    m = make()
    rng = np.random.default_rng(4)
    if isinstance(m, models.LinearRNN):
        theta = m.pack(stable_matrix(rng, 3, 0.8), rng.standard_normal((3, 2)))
    else:
        theta = 0.5 * rng.standard_normal(m.dim_theta)
    y0, inputs = rng.standard_normal(3), rng.standard_normal((20, 2))
    s = recurrent.init_rtrl(m, theta, y0)
    for u in inputs:
        s = recurrent.rtrl_step(s, m, expfam.gaussian(np.eye(3)), u, np.zeros(3), eta=0.0)
    fd = models.fd_jacobian(lambda th: unrolled(m, th, y0, inputs), theta)
    assert np.abs(s.G - fd).max() / max(np.abs(fd).max(), 1.0) <= 1e-5


def test_rtrl_gradient_zero_outside_observed_slice():
    m = models.LinearRNN(1, 3, observed=(0, 1))
    grad = recurrent.observed_grad(m, G1, [2.0], [0.5, 9.0, -9.0])
    np.testing.assert_array_equal(grad, [-1.5, 0.0, 0.0])


def test_natgrad_rtrl_zero_sensitivity_leaves_state():
    m = models.LinearRNN(1, 1)
    theta = m.pack([[0.5]], [[1.0]])
    s = recurrent.init_rtrl(m, theta, [0.0], J0=np.eye(2))
    s = recurrent.natgrad_rtrl_step(s, m, G1, [0.0], [3.0], eta=0.5)   # u = 0, y0 = 0: dPhi/dtheta = 0
    np.testing.assert_array_equal(s.theta, theta)
    assert s.y_state[0] == 0.0


def test_natgrad_rtrl_needs_metric():
    m = models.LinearRNN(1, 1)
    with pytest.raises(ContractError):
        recurrent.natgrad_rtrl_step(recurrent.init_rtrl(m, [0.5, 1.0], [0.0]), m, G1, [1.0], [0.0], 0.5)
    with pytest.raises(SingularityError):
        recurrent.natgrad_rtrl_step(recurrent.init_rtrl(m, [0.5, 1.0], [0.0], J0=np.zeros((2, 2))),
                                    m, G1, [1.0], [0.0], 0.1)


def test_bernoulli_rtrl_fisher_enumeration():
    G = np.array([[0.3, -0.2, 0.7]])
    y_hat = np.array([0.35])
    enum = sum(expfam.probability(BERN, y, y_hat) * np.outer(g, g)
               for y in (0, 1) for g in [expfam.loss_grad_mean(BERN, y, y_hat) @ G])
    np.testing.assert_allclose(fisher_term(BERN, y_hat, G), enum, atol=1e-12)


# --- joint system and augmentation ----------------------------------------

def test_build_joint_example():
    m = models.LinearRNN(1, 1)
    s0 = recurrent.build_joint(m, [0.1, 0.2], [7.5], np.eye(2))
    np.testing.assert_array_equal(s0.s, [0.1, 0.2, 7.5])
    np.testing.assert_array_equal(s0.P, np.diag([1.0, 1.0, 0.0]))
    b = recurrent.decompose_covariance(s0.P, 2)
    np.testing.assert_array_equal(b.P_theta, np.eye(2))
    np.testing.assert_array_equal(b.G, 0.0)
    np.testing.assert_array_equal(b.W, 0.0)
    with pytest.raises(ContractError):
        recurrent.build_joint(m, [0.1, 0.2], [7.5, 1.0], np.eye(2))


def test_joint_observation_reads_slice():
    m = models.TanhRNN(1, 3, observed=(1, 3))
    system = recurrent.JointSystem(m)
    s = np.arange(m.dim_theta + 3, dtype=float)
    y_hat, H = system.observation(s, None)
    np.testing.assert_array_equal(y_hat, s[-2:])
    assert H.shape == (2, m.dim_theta + 3)


def test_augment_init_state():
    m = models.LinearRNN(1, 1)
    theta_plus, G0 = recurrent.augment_init_state(m, [0.5, 1.0], [0.0])
    np.testing.assert_array_equal(theta_plus, [0.5, 1.0, 0.0])
    np.testing.assert_array_equal(G0, [[0.0, 0.0, 1.0]])
    aug = recurrent.InitAugmented(m)
    assert aug.dim_theta == 3
    # y0 -> y0 is the identity map on the tail of theta+
    fd = models.fd_jacobian(lambda th: th[2:], theta_plus)
    np.testing.assert_array_equal(fd, G0)
    d_theta, _ = aug.jacobians([2.0], theta_plus, [3.0])
    np.testing.assert_array_equal(d_theta, [[2.0, 3.0, 0.0]])


# --- block covariance -----------------------------------------------------

@pytest.mark.parametrize("P, expected", [
    ([[1.0, 0.0], [0.0, 0.0]], (1.0, 0.0, 0.0)),
    ([[1.0, 1.0], [1.0, 1.0]], (1.0, 1.0, 0.0)),
    ([[1.0, 0.0], [0.0, 2.0]], (1.0, 0.0, 2.0)),
])
def test_decompose_examples(P, expected):
    b = recurrent.decompose_covariance(np.array(P), 1)
    assert (b.P_theta[0, 0], b.G[0, 0], b.W[0, 0]) == pytest.approx(expected, abs=1e-15)


def test_decompose_rejects_inconsistent_cross_covariance():
    with pytest.raises(DecompositionError):
        recurrent.decompose_covariance(np.array([[0.0, 1.0], [1.0, 1.0]]), 1)
    with pytest.raises(ContractError):
        recurrent.decompose_covariance(np.eye(2), 3)


def test_block_transition_scalar_example():
    b = recurrent.block_transition(BlockCovariance(np.eye(1), np.zeros((1, 1)), np.eye(1)),
                                   np.array([[2.0]]), np.array([[0.5]]))
    assert (b.P_theta[0, 0], b.W[0, 0], b.G[0, 0]) == (1.0, 0.25, 2.0)
    b0 = recurrent.block_transition(BlockCovariance(np.eye(1), np.ones((1, 1)), np.zeros((1, 1))),
                                    np.array([[2.0]]), np.array([[0.5]]))
    assert b0.W[0, 0] == 0.0


def test_block_observe_scalar_example():
    b = BlockCovariance(np.eye(1), np.zeros((1, 1)), np.eye(1))
    new = recurrent.block_observe(b, np.eye(1))
    assert new.W[0, 0] == pytest.approx(0.5, abs=1e-15)
    assert recurrent.block_observe_information(b, np.eye(1)).W[0, 0] == pytest.approx(0.5, abs=1e-15)


def test_block_observe_w0_is_additive_information():
    rng = np.random.default_rng(2)
    P_theta = np.linalg.inv(np.eye(3) + 0.1 * np.ones((3, 3)))
    G = rng.standard_normal((2, 3))
    R = np.diag([0.5, 2.0])
    new = recurrent.block_observe(BlockCovariance(P_theta, G, np.zeros((2, 2))), R)
    expected = np.linalg.inv(np.linalg.inv(P_theta) + G.T @ np.linalg.inv(R) @ G)
    np.testing.assert_allclose(new.P_theta, expected, atol=1e-12)
    np.testing.assert_array_equal(new.G, G)
    np.testing.assert_array_equal(new.W, 0.0)


@pytest.mark.parametrize("seed", range(10))
def test_blocks_match_full_matrix(seed):
    rng = np.random.default_rng(seed)
    b, d_theta, d_state, R = random_blocks(rng)
    P = b.assemble()
    blocks_close(recurrent.block_transition(b, d_theta, d_state),
                 recurrent.decompose_covariance(recurrent.full_transition(P, d_theta, d_state), b.P_theta.shape[0]),
                 1e-10)
    blocks_close(recurrent.block_observe(b, R),
                 recurrent.decompose_covariance(recurrent.full_observe(P, R), b.P_theta.shape[0]), 1e-9)
    blocks_close(recurrent.block_observe_information(b, R), recurrent.block_observe(b, R), 1e-9)


def test_pre_update_w_reading_disagrees_with_oracle():
    rng = np.random.default_rng(0)
    b, _, _, R = random_blocks(rng)
    oracle = recurrent.decompose_covariance(recurrent.full_observe(b.assemble(), R), b.P_theta.shape[0])
    pre = b.G - np.linalg.solve(R, b.W) @ b.G
    assert np.abs(pre - oracle.G).max() > 1e-3
    assert np.abs(recurrent.block_observe(b, R).G - oracle.G).max() <= 1e-9


def test_block_step_w0_matches_general_path():
    rng = np.random.default_rng(8)
    b, d_theta, d_state, R = random_blocks(rng)
    b = BlockCovariance(b.P_theta, b.G, np.zeros_like(b.W))
    two_step = recurrent.block_observe(recurrent.block_transition(b, d_theta, d_state), R)
    blocks_close(recurrent.block_step_w0(b, d_theta, d_state, R), two_step, 1e-10)


def test_structured_covariance_has_zero_w():
    J = np.array([[2.0, 0.5], [0.5, 1.0]])
    G = np.array([[1.0, -1.0]])
    P = recurrent.structured_covariance(J, G, 0.25)
    b = recurrent.decompose_covariance(P, 2)
    assert np.abs(b.W).max() <= 1e-15
    np.testing.assert_allclose(b.G, G, atol=1e-14)
    np.testing.assert_allclose(b.P_theta, 0.25 * np.linalg.inv(J), atol=1e-15)


# --- properties -----------------------------------------------------------

def test_w_preserved_over_long_run():
    m = models.LinearRNN(1, 2, observed=(0, 2))
    rng = np.random.default_rng(3)
    theta = m.pack(stable_matrix(rng, 2, 0.6), rng.standard_normal((2, 1)))
    state = recurrent.build_joint(m, theta, np.zeros(2), 0.1 * np.eye(m.dim_theta))
    system, fam = recurrent.JointSystem(m), expfam.gaussian(np.eye(2))
    worst = 0.0
    for _ in range(1000):
        u = rng.standard_normal(1)
        y = m.step(state.s[m.dim_theta:], theta, u) + rng.standard_normal(2)
        state, _ = ekf.step(state, system, fam, u, y)
        b = recurrent.decompose_covariance(state.P, m.dim_theta, tol=1e-8)
        worst = max(worst, np.abs(b.W).max() / np.abs(state.P).max())
    assert worst <= 1e-10


def test_geometric_forgetting():
    rng = np.random.default_rng(5)
    A = stable_matrix(rng, 3, 0.7)
    A *= 0.7 / np.linalg.norm(A, 2)   # operator norm 0.7
    b = BlockCovariance(np.eye(2), rng.standard_normal((3, 2)), np.eye(3))
    W0 = np.linalg.norm(b.W, 2)
    for t in range(1, 30):
        b = recurrent.block_transition(b, rng.standard_normal((3, 2)), A)
        assert np.linalg.norm(b.W, 2) <= 0.7 ** (2 * t) * W0 * (1 + 1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_block_full_equivalence_property(seed):
    rng = np.random.default_rng(seed)
    b, d_theta, d_state, R = random_blocks(rng)
    p = b.P_theta.shape[0]
    P = recurrent.full_observe(recurrent.full_transition(b.assemble(), d_theta, d_state), R)
    blocks_close(recurrent.block_observe(recurrent.block_transition(b, d_theta, d_state), R),
                 recurrent.decompose_covariance(P, p), 1e-9)
    assert np.linalg.eigvalsh(recurrent.block_observe(b, R).W).min() >= -1e-10

"""Recurrent models: RTRL, natural-gradient RTRL, and the joint filter over (theta, state).

The joint filter is the generic EKF of :mod:`ngkalman.ekf` run on the stacked
vector ``s = (theta, y_hat)`` with transition ``(Id, Phi)``.  Its covariance
is tracked a second way through the blocks ``(P_theta, G, W)``::

    P = [[P_theta,      (G P_theta)^T         ],
         [G P_theta,    W + G P_theta G^T     ]]

where ``G`` plays the role of the RTRL sensitivity ``d y_hat / d theta``
and ``W`` is the part of the state covariance not explained by ``theta``.
The block updates are kept as an independent cross-check of the full-matrix
filter.
"""

from dataclasses import dataclass

import numpy as np

from . import expfam
from ._linalg import max_abs, spd_inv, spd_solve, symmetrize
from .ekf import EkfState
from .errors import ContractError, DecompositionError
from .natgrad import FisherEstimator, fisher_term


@dataclass(frozen=True, eq=False)
class RtrlState:
    theta: np.ndarray
    y_state: np.ndarray
    G: np.ndarray
    J: np.ndarray | None = None
    t: int = 0


def init_rtrl(model, theta0, y0, J0=None, G0=None):
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    if theta0.shape != (model.dim_theta,) or y0.shape != (model.dim_y,):
        raise ContractError("theta0 / y0 do not match the model dimensions")
    G0 = np.zeros((model.dim_y, model.dim_theta)) if G0 is None else np.asarray(G0, dtype=float)
    return RtrlState(theta0, y0, G0, None if J0 is None else np.asarray(J0, dtype=float), 0)


def _full_loss_grad(model, family, y, y_state):
    """Loss gradient w.r.t. the whole state, zero outside the observed slice."""
    obs = model.observed_slice
    grad = np.zeros(model.dim_y)
    grad[obs] = expfam.loss_grad_mean(family, y, y_state[obs])
    return grad


def _advance(state, model, u):
    d_theta, d_state = model.jacobians(state.y_state, state.theta, u)
    y_new = model.step(state.y_state, state.theta, u)
    return y_new, d_theta + d_state @ state.G


def rtrl_step(state, model, family, u, y, eta):
    """Plain RTRL: advance state and sensitivity, then ``theta -= eta g^T``."""
    y_new, G = _advance(state, model, u)
    g = _full_loss_grad(model, family, y, y_new) @ G
    return RtrlState(state.theta - eta * g, y_new, G, state.J, state.t + 1)


def natgrad_rtrl_step(state, model, family, u, y, eta, est=FisherEstimator.EXACT, rng=None):
    """RTRL with a natural-gradient parameter step and the matching state correction."""
    if state.J is None:
        raise ContractError("natural-gradient RTRL needs a Fisher estimate J")
    y_new, G = _advance(state, model, u)
    obs = model.observed_slice
    J = (1.0 - eta) * state.J + eta * fisher_term(family, y_new[obs], G[obs], est, y=y, rng=rng)
    g = _full_loss_grad(model, family, y, y_new) @ G
    delta = spd_solve(J, g, "Fisher estimate")
    return RtrlState(state.theta - eta * delta, y_new - eta * (G @ delta), G, J, state.t + 1)


# ---------------------------------------------------------------------------
# joint filter

class JointSystem:
    """EKF system for the stacked state ``(theta, y_hat)``; observes the model's slice of ``y_hat``."""

    mode = "recurrent"

    def __init__(self, model):
        self.model = model
        self.p = model.dim_theta
        self.n = model.dim_y
        self.dim = self.p + self.n
        obs = model.observed_slice
        self.H = np.zeros((obs.stop - obs.start, self.dim))
        self.H[:, self.p + obs.start:self.p + obs.stop] = np.eye(obs.stop - obs.start)

    def transition(self, s, u):
        theta, y_prev = s[:self.p], s[self.p:]
        d_theta, d_state = self.model.jacobians(y_prev, theta, u)
        F = np.eye(self.dim)
        F[self.p:, :self.p] = d_theta
        F[self.p:, self.p:] = d_state
        return np.concatenate([theta, self.model.step(y_prev, theta, u)]), F

    def observation(self, s, u):
        return self.H @ s, self.H


def build_joint(model, theta0, y0, P0_theta, G0=None):
    """Initial joint state; covariance ``blockdiag(P0_theta, 0)`` unless ``G0`` is given."""
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    P0_theta = np.atleast_2d(np.asarray(P0_theta, dtype=float))
    p, n = model.dim_theta, model.dim_y
    if theta0.shape != (p,) or y0.shape != (n,) or P0_theta.shape != (p, p):
        raise ContractError("theta0, y0 or P0_theta do not match the model dimensions")
    G0 = np.zeros((n, p)) if G0 is None else np.asarray(G0, dtype=float)
    P0 = BlockCovariance(P0_theta, G0, np.zeros((n, n))).assemble()
    return EkfState(np.concatenate([theta0, y0]), P0)


class InitAugmented:
    """Recurrent model whose parameter also carries the initial state ``y_0``."""

    def __init__(self, model):
        self.base = model
        self.dim_u = model.dim_u
        self.dim_y = model.dim_y
        self.dim_theta = model.dim_theta + model.dim_y
        self.observed_slice = model.observed_slice

    def step(self, y_prev, theta, u):
        return self.base.step(y_prev, np.asarray(theta)[:self.base.dim_theta], u)

    def jacobians(self, y_prev, theta, u):
        d_theta, d_state = self.base.jacobians(y_prev, np.asarray(theta)[:self.base.dim_theta], u)
        return np.hstack([d_theta, np.zeros((self.dim_y, self.dim_y))]), d_state

    def fan_in(self):
        return np.concatenate([self.base.fan_in(), np.ones(self.dim_y)])


def augment_init_state(model, theta, y0):
    """Append ``y_0`` to the parameter; the initial sensitivity is ``(0, Id)``."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    G0 = np.hstack([np.zeros((model.dim_y, model.dim_theta)), np.eye(model.dim_y)])
    return np.concatenate([theta, y0]), G0


# ---------------------------------------------------------------------------
# block covariance

@dataclass(frozen=True, eq=False)
class BlockCovariance:
    P_theta: np.ndarray
    G: np.ndarray
    W: np.ndarray

    def assemble(self):
        PG = self.G @ self.P_theta
        return np.block([[self.P_theta, PG.T], [PG, self.W + PG @ self.G.T]])


def _pinv_psd(A, rtol=1e-12):
    w, V = np.linalg.eigh(symmetrize(A))
    cut = rtol * max(max_abs(A), np.finfo(float).tiny)
    inv = np.where(w > cut, 1.0 / np.where(w > cut, w, 1.0), 0.0)
    return (V * inv) @ V.T


def decompose_covariance(P, dim_theta, tol=1e-10):
    """Split a joint covariance into ``(P_theta, G, W)``."""
    P = np.asarray(P, dtype=float)
    p = dim_theta
    if P.ndim != 2 or P.shape[0] != P.shape[1] or not 0 < p <= P.shape[0]:
        raise ContractError(f"cannot split a {P.shape} matrix at {p}")
    P_theta, P_cross, P_y = P[:p, :p], P[p:, :p], P[p:, p:]
    G = P_cross @ _pinv_psd(P_theta)
    W = symmetrize(P_y - G @ P_cross.T)
    b = BlockCovariance(P_theta.copy(), G, W)
    err = max_abs(b.assemble() - P)
    if err > tol * max(max_abs(P), np.finfo(float).tiny):
        raise DecompositionError(f"block reassembly off by {err:.3g}; cross-covariance "
                                 "is not in the range of the parameter block")
    return b


def block_transition(b, d_theta, d_state):
    """Transition of the blocks: ``W -> D W D^T``, ``G -> dPhi/dtheta + D G``."""
    if d_state.shape != b.W.shape or d_theta.shape != b.G.shape:
        raise ContractError("Jacobian shapes do not match the block covariance")
    return BlockCovariance(b.P_theta, d_theta + d_state @ b.G, symmetrize(d_state @ b.W @ d_state.T))


def block_observe(b, R):
    """Observation of the full state with noise ``R``, applied to P_theta, then W, then G."""
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if R.shape != b.W.shape:
        raise ContractError("R must match the state block")
    GP = b.G @ b.P_theta
    S = b.W + R + GP @ b.G.T
    P_theta = symmetrize(b.P_theta - GP.T @ spd_solve(S, GP, "block innovation covariance"))
    W = symmetrize(b.W - b.W @ spd_solve(b.W + R, b.W, "W + R"))
    # G -> (Id - W_new R^-1) G, with W_new the block just updated
    G = b.G - spd_solve(R, W, "R").T @ b.G
    return BlockCovariance(P_theta, G, W)


def block_observe_information(b, R):
    """Inverse-form observation update; needs invertible ``P_theta``, ``W`` and ``R``."""
    R = np.atleast_2d(np.asarray(R, dtype=float))
    WR = b.W + R
    P_theta = spd_inv(spd_inv(b.P_theta, "P_theta") + b.G.T @ spd_solve(WR, b.G, "W + R"), "P_theta")
    W_inv = spd_inv(b.W, "W")
    W = spd_inv(W_inv + spd_inv(R, "R"), "W")
    return BlockCovariance(P_theta, W @ W_inv @ b.G, W)


def block_step_w0(b, d_theta, d_state, R):
    """Transition then observation when ``W = 0``: RTRL on G and additive information on P_theta."""
    G = d_theta + d_state @ b.G
    info = spd_inv(b.P_theta, "P_theta") + G.T @ spd_solve(R, G, "R")
    return BlockCovariance(spd_inv(info, "P_theta information"), G, np.zeros_like(b.W))


def full_transition(P, d_theta, d_state):
    """Reference full-matrix transition ``F P F^T`` for the stacked state."""
    n, p = d_theta.shape
    F = np.eye(p + n)
    F[p:, :p] = d_theta
    F[p:, p:] = d_state
    return F @ P @ F.T


def full_observe(P, R):
    """Reference full-matrix Kalman covariance update with ``H = (0, Id)``."""
    R = np.atleast_2d(R)
    n = R.shape[0]
    H = np.hstack([np.zeros((n, P.shape[0] - n)), np.eye(n)])
    S = H @ P @ H.T + R
    K = spd_solve(S, H @ P, "innovation covariance").T
    return symmetrize((np.eye(P.shape[0]) - K @ H) @ P)


def structured_covariance(J, G, eta):
    """``eta * [[J^-1, J^-1 G^T], [G J^-1, G J^-1 G^T]]``."""
    Jinv = spd_inv(J, "Fisher estimate")
    return eta * BlockCovariance(Jinv, G, np.zeros((G.shape[0], G.shape[0]))).assemble()


# functional aliases matching the model module naming
def observed_grad(model, family, y, y_state):
    return _full_loss_grad(model, family, y, np.asarray(y_state, dtype=float))

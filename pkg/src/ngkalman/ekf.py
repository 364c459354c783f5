"""Extended Kalman filter with exponential-family observations.

One filter step is ``fade`` (optional) -> ``transition`` -> ``observe``.
The innovation is ``T(y) - y_hat`` and the measurement covariance is the
covariance of the sufficient statistics at ``y_hat``, so Gaussian, Bernoulli
and categorical outputs all go through the same equations.

The state dynamics are supplied by a *system* object exposing

``transition(s, u) -> (s_pred, F)``
    next mean and the Jacobian of the transition at ``s``;
``observation(s, u) -> (y_hat, H)``
    predicted mean parameter and its Jacobian at ``s``.

:class:`StaticSystem` wraps a static prediction model for parameter
estimation (identity transition, no process noise).
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from . import expfam
from ._linalg import cho_factor_spd, max_abs, spd_inv, symmetrize
from .errors import ContractError, SingularityError


@dataclass(frozen=True, eq=False)
class EkfState:
    """Posterior ``N(s, P)`` after ``t`` observations; ``Q`` is the process noise (None = 0)."""

    s: np.ndarray
    P: np.ndarray
    Q: np.ndarray | None = None
    t: int = 0

    def __post_init__(self):
        s = np.atleast_1d(np.asarray(self.s, dtype=float))
        P = np.atleast_2d(np.asarray(self.P, dtype=float))
        if P.shape != (s.size, s.size):
            raise ContractError(f"P must be {s.size}x{s.size}, got {P.shape}")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "P", P)


@dataclass(frozen=True, eq=False)
class Prediction:
    """Output of the transition step: ``s_{t|t-1}``, ``P_{t|t-1}`` and the linearization."""

    s: np.ndarray
    P: np.ndarray
    F: np.ndarray
    y_hat: np.ndarray
    H: np.ndarray
    Q: np.ndarray | None
    t: int


@dataclass(frozen=True, eq=False)
class StepTrace:
    t: int
    F: np.ndarray
    H: np.ndarray
    E: np.ndarray
    R: np.ndarray
    K: np.ndarray
    y_hat: np.ndarray
    P_pred: np.ndarray
    s_pred: np.ndarray
    s: np.ndarray
    P: np.ndarray
    grad_mean: np.ndarray
    y: object


class StaticSystem:
    """Parameter estimation: the state is ``theta`` and never moves between observations."""

    mode = "static"

    def __init__(self, model):
        self.model = model
        self.dim = model.dim_theta

    def transition(self, s, u):
        return np.array(s, dtype=float), np.eye(self.dim)

    def observation(self, s, u):
        return self.model.predict(s, u), self.model.jacobian_theta(s, u)


def _system(system):
    return StaticSystem(system) if hasattr(system, "predict") else system


def transition(state, system, u):
    """Propagate mean and covariance through the dynamics and predict ``y_hat``."""
    system = _system(system)
    s_pred, F = system.transition(state.s, u)
    if F.shape != state.P.shape:
        raise ContractError(f"transition Jacobian has shape {F.shape}, state covariance {state.P.shape}")
    P_pred = F @ state.P @ F.T
    if state.Q is not None:
        P_pred = P_pred + state.Q
    y_hat, H = system.observation(s_pred, u)
    return Prediction(s_pred, symmetrize(P_pred), F, y_hat, H, state.Q, state.t + 1)


def observe(pred, family, y):
    """Kalman observation update; returns ``(EkfState, StepTrace)``."""
    H, P_pred = pred.H, pred.P
    E = expfam.sufficient_stats(family, y) - pred.y_hat
    try:
        R = expfam.stat_covariance(family, pred.y_hat)
        c = cho_factor_spd(H @ P_pred @ H.T + R, "innovation covariance")
    except SingularityError as exc:
        exc.step = pred.t
        raise
    K = linalg.cho_solve(c, H @ P_pred, check_finite=False).T
    P = symmetrize((np.eye(P_pred.shape[0]) - K @ H) @ P_pred)
    s = pred.s + K @ E
    grad = expfam.loss_grad_mean(family, y, pred.y_hat)
    trace = StepTrace(pred.t, pred.F, H, E, R, K, pred.y_hat, P_pred, pred.s, s, P, grad, y)
    return EkfState(s, P, pred.Q, pred.t), trace


def observe_information_form(pred, family, y):
    """Same update computed on the inverse covariance, with a preconditioned-gradient mean step."""
    H = pred.H
    R = expfam.stat_covariance(family, pred.y_hat)
    try:
        info = spd_inv(pred.P, "predicted covariance") + H.T @ expfam.fisher_wrt_mean(family, pred.y_hat) @ H
        P = spd_inv(info, "posterior information")
    except SingularityError as exc:
        exc.step = pred.t
        raise
    grad = expfam.loss_grad_mean(family, y, pred.y_hat)
    s = pred.s - P @ (grad @ H)
    K = P @ H.T @ spd_inv(R, "statistic covariance")
    E = expfam.sufficient_stats(family, y) - pred.y_hat
    trace = StepTrace(pred.t, pred.F, H, E, R, K, pred.y_hat, pred.P, pred.s, s, P, grad, y)
    return EkfState(s, P, pred.Q, pred.t), trace


def fade(state, lam):
    """Fading memory: inflate the covariance by ``1 / (1 - lam)``."""
    if not 0.0 <= lam < 1.0:
        raise ContractError(f"decay factor must lie in [0, 1), got {lam}")
    if lam == 0.0:
        return state
    return EkfState(state.s, state.P / (1.0 - lam), state.Q, state.t)


def step(state, system, family, u, y, lam=0.0, information_form=False):
    """fade -> transition -> observe, as one call."""
    pred = transition(fade(state, lam), system, u)
    update = observe_information_form if information_form else observe
    return update(pred, family, y)


def grad_form_check(trace, state_before, state_after, family, y):
    """Residual of ``s_t = s_{t|t-1} - P_t (dl/ds)^T`` in max norm."""
    grad = expfam.loss_grad_mean(family, y, trace.y_hat)
    return max_abs(state_after.s - state_before.s + state_after.P @ (grad @ trace.H))


def gain_identity_residual(trace):
    """Scaled residual of ``K R = P H^T``."""
    scale = 1.0 + max_abs(trace.P) * max_abs(trace.H)
    return max_abs(trace.K @ trace.R - trace.P @ trace.H.T) / scale


def information_route_residual(trace, family):
    """Compare a covariance-route step with the information route on the same prediction.

    Returns ``(P deviation / |P|, s deviation / max(|s|, 1))``.
    """
    pred = Prediction(trace.s_pred, trace.P_pred, trace.F, trace.y_hat, trace.H, None, trace.t)
    alt, _ = observe_information_form(pred, family, trace.y)
    dP = max_abs(alt.P - trace.P) / max(max_abs(trace.P), np.finfo(float).tiny)
    ds = max_abs(alt.s - trace.s) / max(max_abs(trace.s), 1.0)
    return dP, ds


def is_psd(P, rtol=1e-10):
    w = np.linalg.eigvalsh(symmetrize(P))
    return bool(w.min() >= -rtol * max(max_abs(P), np.finfo(float).tiny))

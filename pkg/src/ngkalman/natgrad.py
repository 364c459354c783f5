"""Online natural gradient with a running Fisher estimate.

Each step first mixes the Fisher estimate,

    J_t = (1 - gamma_t) J_{t-1} + gamma_t E_y[(dl(y)/dtheta)^T (dl(y)/dtheta)],

and then takes the preconditioned step ``theta -= eta_t J_t^-1 (dl(y_t)/dtheta)^T``.
The order matters: updating the metric after the parameter gives a
different trajectory.

Rate schedules convert to fading-memory decay factors through
``1 - lambda_t = eta_{t-1} / eta_t - eta_{t-1}``.
"""

import enum
from dataclasses import dataclass, replace

import numpy as np

from . import expfam
from ._linalg import spd_inv, spd_solve, symmetrize
from .errors import ContractError


class FisherEstimator(enum.Enum):
    EXACT = "exact"                  # full expectation over y ~ p(y | y_hat)
    MONTE_CARLO = "monte_carlo"      # one synthetic sample per step
    OUTER_PRODUCT = "outer_product"  # the observed y_t itself (biased)


@dataclass(frozen=True, eq=False)
class NatGradState:
    theta: np.ndarray
    J: np.ndarray
    t: int = 0

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        J = np.atleast_2d(np.asarray(self.J, dtype=float))
        if J.shape != (theta.size, theta.size):
            raise ContractError(f"J must be {theta.size}x{theta.size}, got {J.shape}")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "J", J)


@dataclass(frozen=True)
class RateSchedule:
    """Learning-rate schedule ``eta_t`` for ``t >= 0``.

    kinds: ``one_over_t_plus_c`` (``1/(t+c)``), ``constant`` (``eta``),
    ``power_law`` (``(t+c)^-alpha``).  ``eta0`` overrides the value at ``t = 0``.
    """

    kind: str
    c: float = 1.0
    eta: float = 0.1
    alpha: float = 0.5
    eta0: float | None = None

    def __post_init__(self):
        if self.kind not in ("one_over_t_plus_c", "constant", "power_law"):
            raise ContractError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "constant" and not 0.0 < self.eta <= 1.0:
            raise ContractError(f"constant rate must lie in (0, 1], got {self.eta}")
        if self.kind != "constant" and self.c < 0:
            raise ContractError(f"schedule offset c must be >= 0, got {self.c}")

    @classmethod
    def one_over_t_plus_c(cls, c=1.0):
        return cls("one_over_t_plus_c", c=float(c))

    @classmethod
    def constant(cls, eta):
        return cls("constant", eta=float(eta))

    @classmethod
    def power_law(cls, alpha, c=1.0):
        return cls("power_law", c=float(c), alpha=float(alpha))

    def rate(self, t):
        if t == 0 and self.eta0 is not None:
            return self.eta0
        if self.kind == "constant":
            return self.eta
        base = t + self.c
        if base <= 0:
            return np.inf
        return base ** -1.0 if self.kind == "one_over_t_plus_c" else base ** -self.alpha

    def anchored(self):
        """Copy with ``eta_0 := eta_1``, the convention of the prior-regularized filter."""
        return replace(self, eta0=self.rate(1))

    def decay(self, t):
        return rate_to_decay(self, t)


@dataclass(frozen=True, eq=False)
class PriorSpec:
    """Gaussian prior ``N(theta_prior, sigma0)`` weighted as ``n_prior`` observations."""

    theta_prior: np.ndarray
    sigma0: np.ndarray
    n_prior: float = 1.0

    def __post_init__(self):
        th = np.atleast_1d(np.asarray(self.theta_prior, dtype=float))
        S = np.atleast_2d(np.asarray(self.sigma0, dtype=float))
        if S.shape != (th.size, th.size):
            raise ContractError(f"sigma0 must be {th.size}x{th.size}, got {S.shape}")
        if self.n_prior < 0:
            raise ContractError("n_prior must be >= 0")
        object.__setattr__(self, "theta_prior", th)
        object.__setattr__(self, "sigma0", S)
        object.__setattr__(self, "precision", spd_inv(S, "prior covariance"))


# ---------------------------------------------------------------------------
# schedules

def rate_to_decay(schedule, t):
    """Fading-memory factor ``lambda_t`` matching the rates ``eta_{t-1}, eta_t``."""
    if t < 1:
        raise ContractError("decay factors are defined for t >= 1")
    if schedule.kind == "one_over_t_plus_c" and (t > 1 or schedule.eta0 is None) and t - 1 + schedule.c > 0:
        return 0.0   # exact; the generic formula leaves a rounding residue of either sign
    prev, cur = schedule.rate(t - 1), schedule.rate(t)
    if not np.isfinite(prev):
        raise ContractError(f"eta_{t - 1} is undefined for this schedule; set eta0")
    keep = prev / cur - prev
    if keep <= 0:
        raise ContractError(f"schedule decays too fast at t={t}: 1 - lambda = {keep}")
    return 1.0 - keep


def decay_to_rate(lambdas, eta0, t):
    """Learning rate ``eta_t`` from decay factors via the cumulated weight ``S_t``."""
    S = 1.0 / eta0
    for lam in list(lambdas)[:t]:
        S = (1.0 - lam) * S + 1.0
    return 1.0 / S


def schedule_from_config(cfg):
    kind = cfg.get("kind")
    if kind == "one_over_t_plus_c":
        sched = RateSchedule.one_over_t_plus_c(cfg.get("c", 1.0))
    elif kind == "constant":
        if "eta" not in cfg:
            raise ContractError("schedule.eta is required for a constant schedule")
        sched = RateSchedule.constant(cfg["eta"])
    elif kind == "power_law":
        sched = RateSchedule.power_law(cfg.get("alpha", 0.5), cfg.get("c", 1.0))
    else:
        raise ContractError(f"schedule.kind must be one_over_t_plus_c, constant or power_law; got {kind!r}")
    if cfg.get("eta0") is not None:
        sched = replace(sched, eta0=float(cfg["eta0"]))
    return sched


# ---------------------------------------------------------------------------
# Fisher estimate and parameter step

def default_J0(model):
    """``diag(fan-in)`` for networks, identity for linear models."""
    if type(model).__name__ in ("LinearModel", "LinearRNN"):
        return np.eye(model.dim_theta)
    return np.diag(model.fan_in())


def loss_grad_theta(model, family, theta, u, y):
    y_hat = model.predict(theta, u)
    return expfam.loss_grad_mean(family, y, y_hat) @ model.jacobian_theta(theta, u)


def fisher_term(family, y_hat, H, est=FisherEstimator.EXACT, y=None, rng=None):
    """One-step Fisher contribution for outputs with mean ``y_hat`` and Jacobian ``H``."""
    est = FisherEstimator(est)
    if est is FisherEstimator.EXACT:
        return symmetrize(H.T @ expfam.fisher_wrt_mean(family, y_hat) @ H)
    if est is FisherEstimator.MONTE_CARLO:
        if rng is None:
            raise ContractError("the Monte Carlo Fisher estimator needs an rng")
        y = expfam.sample(family, y_hat, rng)
    elif y is None:
        raise ContractError("the outer-product Fisher estimator needs the observation y")
    g = expfam.loss_grad_mean(family, y, y_hat) @ H
    return np.outer(g, g)


def fisher_update(state, model, family, u, gamma, est=FisherEstimator.EXACT, y=None, rng=None):
    """Mix the Fisher estimate; advances the step counter."""
    if not 0.0 < gamma <= 1.0:
        raise ContractError(f"gamma must lie in (0, 1], got {gamma}")
    y_hat = model.predict(state.theta, u)
    H = model.jacobian_theta(state.theta, u)
    G = fisher_term(family, y_hat, H, est, y=y, rng=rng)
    return NatGradState(state.theta, (1.0 - gamma) * state.J + gamma * G, state.t + 1)


def param_update(state, model, family, u, y, eta):
    """Preconditioned step ``theta -= eta J^-1 grad^T`` with the current J."""
    grad = loss_grad_theta(model, family, state.theta, u, y)
    if eta == 0.0 or not np.any(grad):
        return state
    step = spd_solve(state.J, grad, "Fisher estimate")
    return NatGradState(state.theta - eta * step, state.J, state.t)


def regularized_step(state, model, family, u, y, schedule, prior, t):
    """Parameter step with Tikhonov-regularized metric and a pull toward the prior mean.

    ``schedule`` is used with ``eta_0 := eta_1``.  With ``n_prior == 0`` this is
    exactly :func:`param_update`.
    """
    sched = schedule.anchored()
    eta = sched.rate(t)
    if prior.n_prior == 0:
        return param_update(state, model, family, u, y, eta)
    lam = rate_to_decay(sched, t)
    grad = loss_grad_theta(model, family, state.theta, u, y)
    pull = lam * prior.n_prior * (prior.precision @ (state.theta - prior.theta_prior))
    M = state.J + eta * prior.n_prior * prior.precision
    step = spd_solve(M, grad + pull, "regularized Fisher estimate")
    return NatGradState(state.theta - eta * step, state.J, state.t)


def natgrad_step(state, model, family, u, y, eta, gamma=None, est=FisherEstimator.EXACT, rng=None):
    """Fisher update followed by the parameter update (``gamma`` defaults to ``eta``)."""
    gamma = eta if gamma is None else gamma
    state = fisher_update(state, model, family, u, gamma, est, y=y, rng=rng)
    return param_update(state, model, family, u, y, eta)


def weighted_objective(model, family, data, schedule, thetas, theta0=None, P0_inv=None):
    """Evaluate the decayed log-likelihood ``L_t`` on a grid of parameters (diagnostic).

    ``L_0`` is the Gaussian prior term when ``theta0`` and ``P0_inv`` are given,
    zero otherwise.  Returns the values after the last observation.
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    if theta0 is not None:
        d = thetas - np.asarray(theta0, dtype=float)
        L = -0.5 * np.einsum("ni,ij,nj->n", d, np.atleast_2d(P0_inv), d)
    else:
        L = np.zeros(len(thetas))
    for t, (u, y) in enumerate(data, start=1):
        keep = 1.0 - rate_to_decay(schedule, t)
        ll = np.array([-expfam.log_likelihood(family, y, model.predict(th, u)) for th in thetas])
        L = ll + keep * L
    return L

"""Lockstep harness: run a Kalman filter and its natural-gradient counterpart on
the same data and record how far apart they drift at every step.

Deviations are relative with a +1 floor in the denominator:

* ``theta``: ``|theta_t - s_t| / (1 + |s_t|)``
* ``metric``: ``|J_t - eta_t P_t^-1| / (1 + eta_t |P_t^-1|)``
  (for the prior-regularized pair the natural-gradient side is
  ``J_t + eta_t n_prior Sigma0^-1``)
* recurrent runs add the state deviation, the distance of ``P_t`` from
  ``eta_t [[J^-1, J^-1 G^T], [G J^-1, G J^-1 G^T]]`` relative to ``|P_t|``,
  the reconstructed ``W`` relative to ``|P_t|``, and the gap between the
  filter's ``G`` and the RTRL sensitivity.

``|.|`` is the largest absolute entry throughout.  Every run also probes three
filter identities on each step: ``K R = P H^T`` (``gain``), the gradient form
of the mean update (``grad_form``) and agreement with the information-form update
(``info_form``, only where the predicted covariance is invertible).
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import ekf
from ._linalg import max_abs, spd_inv, spd_solve, symmetrize
from .errors import SingularityError
from .natgrad import (FisherEstimator, NatGradState, RateSchedule, fisher_update,
                      param_update, rate_to_decay, regularized_step)
from .recurrent import (InitAugmented, JointSystem, augment_init_state, build_joint,
                        decompose_covariance, init_rtrl, natgrad_rtrl_step, structured_covariance)

PROBES = ("gain", "grad_form", "info_form")


@dataclass
class EquivReport:
    steps: int = 0
    max_theta_dev: float = 0.0
    max_metric_dev: float = 0.0
    max_structure_dev: float = 0.0
    max_state_dev: float = 0.0
    max_w_dev: float = 0.0
    max_g_dev: float = 0.0
    probe_devs: dict = field(default_factory=lambda: dict.fromkeys(PROBES, 0.0))
    rows: list = field(default_factory=list, repr=False)

    def record(self, row):
        self.rows.append(row)
        self.steps = row["t"]
        for key in ("theta_dev", "metric_dev", "structure_dev", "state_dev", "w_dev", "g_dev"):
            if key in row:
                attr = "max_" + key
                setattr(self, attr, max(getattr(self, attr), row[key]))
        for key in PROBES:
            if row.get(key) is not None:
                self.probe_devs[key] = max(self.probe_devs[key] or 0.0, row[key])

    def skip_probe(self, name):
        self.probe_devs[name] = None

    @property
    def max_deviation(self):
        return max(self.max_theta_dev, self.max_metric_dev, self.max_structure_dev,
                   self.max_state_dev, self.max_g_dev)

    def to_dict(self):
        return {
            "steps": self.steps,
            "max_theta_dev": self.max_theta_dev,
            "max_metric_dev": self.max_metric_dev,
            "max_structure_dev": self.max_structure_dev,
            "max_state_dev": self.max_state_dev,
            "max_w_dev": self.max_w_dev,
            "max_g_dev": self.max_g_dev,
            "probe_devs": dict(self.probe_devs),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


class LockstepAbort(RuntimeError):
    def __init__(self, step, cause):
        super().__init__(f"step {step}: {cause}")
        self.step = step
        self.cause = cause


def _rel(a, b):
    return max_abs(a - b) / (1.0 + max_abs(b))


def _metric_dev(J, eta, P):
    P_inv = spd_inv(P, "filter covariance")
    return max_abs(J - eta * P_inv) / (1.0 + eta * max_abs(P_inv))


def probe_trace(trace, pred_state, post_state, family, information=True):
    """Residuals of the three filter identities for one step."""
    grad = trace.grad_mean @ trace.H
    scale = 1.0 + max_abs(post_state.P @ grad)
    row = {
        "gain": ekf.gain_identity_residual(trace),
        "grad_form": ekf.grad_form_check(trace, pred_state, post_state, family, trace.y) / scale,
        "info_form": None,
    }
    if information:
        row["info_form"] = max(ekf.information_route_residual(trace, family))
    return row


def invariant_probe(traces, family, information=True):
    """Per-step maxima of the probe residuals over a list of :class:`ekf.StepTrace`."""
    out = dict.fromkeys(PROBES, 0.0)
    for tr in traces:
        pred = ekf.EkfState(tr.s_pred, tr.P_pred)
        post = ekf.EkfState(tr.s, tr.P)
        for k, v in probe_trace(tr, pred, post, family, information).items():
            if v is None:
                out[k] = None
            elif out[k] is not None:
                out[k] = max(out[k], v)
    return out


def _prior_information(pred, prior, lam):
    """Fold ``lam * n_prior`` copies of the prior's information into the predicted covariance."""
    if lam == 0.0 or prior.n_prior == 0:
        return pred
    P = pred.P
    C = P + prior.sigma0 / (lam * prior.n_prior)
    K = spd_solve(C, P, "prior pseudo-observation covariance").T
    P_new = symmetrize(P - K @ P)
    return ekf.Prediction(pred.s, P_new, pred.F, pred.y_hat, pred.H, pred.Q, pred.t)


def _run_static(model, family, data, theta0, J0, schedule, steps, prior=None,
                est=FisherEstimator.EXACT, rng=None, keep_traces=False):
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    J0 = np.atleast_2d(np.asarray(J0, dtype=float))
    data = list(data)[:steps] if steps is not None else list(data)
    sched = schedule.anchored() if prior is not None else schedule
    regularize = prior is not None and prior.n_prior > 0

    if prior is not None:
        eta1 = sched.rate(1)
        P0 = eta1 / (1.0 + prior.n_prior * eta1) * prior.sigma0
    else:
        P0 = sched.rate(0) * spd_inv(J0, "initial Fisher estimate")
    filt = ekf.EkfState(theta0, P0)
    ng = NatGradState(theta0, J0)
    system = ekf.StaticSystem(model)
    report = EquivReport()
    traces = []

    for t, (u, y) in enumerate(data, start=1):
        try:
            eta = sched.rate(t)
            lam = rate_to_decay(sched, t)
            # filter side
            pred = ekf.transition(ekf.fade(filt, lam), system, u)
            if regularize:
                pred = _prior_information(pred, prior, lam)
            filt, trace = ekf.observe(pred, family, y)
            probes = probe_trace(trace, ekf.EkfState(pred.s, pred.P), filt, family)
            if regularize:
                pull = lam * prior.n_prior * (prior.precision @ (pred.s - prior.theta_prior))
                filt = ekf.EkfState(filt.s - filt.P @ pull, filt.P, filt.Q, filt.t)
            # natural-gradient side
            ng = fisher_update(ng, model, family, u, eta, est, y=y, rng=rng)
            if prior is not None:
                ng = regularized_step(ng, model, family, u, y, schedule, prior, t)
                J_side = ng.J + eta * prior.n_prior * prior.precision
            else:
                ng = param_update(ng, model, family, u, y, eta)
                J_side = ng.J
            row = {"t": t, "eta": eta, "lambda": lam,
                   "theta_dev": _rel(ng.theta, filt.s),
                   "metric_dev": _metric_dev(J_side, eta, filt.P)}
        except SingularityError as exc:
            raise LockstepAbort(t, exc) from exc
        row.update(probes)
        report.record(row)
        if keep_traces:
            traces.append(trace)
    return (report, traces) if keep_traces else report


def lockstep_static(model, family, data, theta0, J0, steps=None, **kw):
    """Static EKF vs online natural gradient with ``eta_t = gamma_t = 1/(t+1)``."""
    return _run_static(model, family, data, theta0, J0, RateSchedule.one_over_t_plus_c(1.0), steps, **kw)


def lockstep_fading(model, family, data, theta0, J0, schedule, steps=None, **kw):
    """Fading-memory EKF (``P <- P/(1-lambda_t)`` before each transition) vs natural gradient."""
    return _run_static(model, family, data, theta0, J0, schedule, steps, **kw)


def lockstep_regularized(model, family, data, prior, schedule, steps=None, theta0=None, **kw):
    """Prior-preserving fading filter vs the regularized natural gradient (starts at ``J0 = Sigma0^-1``)."""
    theta0 = prior.theta_prior if theta0 is None else theta0
    return _run_static(model, family, data, theta0, prior.precision, schedule, steps, prior=prior, **kw)


def lockstep_recurrent(model, family, data, theta0, P0_theta, y0, steps=None, schedule=None,
                       augment=False, P0_init=None, est=FisherEstimator.EXACT, rng=None):
    """Joint EKF over (theta, state) vs natural-gradient RTRL with state correction.

    With ``augment`` the initial state is appended to the parameter; ``P0_init`` is
    then its prior covariance (default: identity).  A ``schedule`` other than
    ``1/(t+1)`` runs the fading-memory variant of the pair.
    """
    sched = RateSchedule.one_over_t_plus_c(1.0) if schedule is None else schedule
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    P0_theta = np.atleast_2d(np.asarray(P0_theta, dtype=float))
    G0 = None
    if augment:
        theta0, G0 = augment_init_state(model, theta0, y0)
        P0_init = np.eye(model.dim_y) if P0_init is None else np.atleast_2d(P0_init)
        P0_theta = np.block([[P0_theta, np.zeros((P0_theta.shape[0], model.dim_y))],
                             [np.zeros((model.dim_y, P0_theta.shape[0])), P0_init]])
        model = InitAugmented(model)
    p = model.dim_theta
    data = list(data)[:steps] if steps is not None else list(data)

    filt = build_joint(model, theta0, y0, P0_theta, G0)
    system = JointSystem(model)
    rt = init_rtrl(model, theta0, y0, J0=sched.rate(0) * spd_inv(P0_theta, "P0_theta"), G0=G0)
    report = EquivReport()
    report.skip_probe("info_form")   # the joint covariance is rank-deficient by construction

    for t, (u, y) in enumerate(data, start=1):
        try:
            eta = sched.rate(t)
            lam = rate_to_decay(sched, t)
            pred = ekf.transition(ekf.fade(filt, lam), system, u)
            filt, trace = ekf.observe(pred, family, y)
            probes = probe_trace(trace, ekf.EkfState(pred.s, pred.P), filt, family, information=False)
            rt = natgrad_rtrl_step(rt, model, family, u, y, eta, est, rng)

            blocks = decompose_covariance(filt.P, p, tol=1e-8)
            Pnorm = max(max_abs(filt.P), np.finfo(float).tiny)
            row = {"t": t, "eta": eta, "lambda": lam,
                   "theta_dev": _rel(rt.theta, filt.s[:p]),
                   "state_dev": _rel(rt.y_state, filt.s[p:]),
                   "metric_dev": _metric_dev(rt.J, eta, blocks.P_theta),
                   "structure_dev": max_abs(filt.P - structured_covariance(rt.J, rt.G, eta)) / Pnorm,
                   "w_dev": max_abs(blocks.W) / Pnorm,
                   "g_dev": _rel(rt.G, blocks.G)}
        except SingularityError as exc:
            raise LockstepAbort(t, exc) from exc
        row.update(probes)
        report.record(row)
    return report

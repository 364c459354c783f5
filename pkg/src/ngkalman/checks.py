"""Self-contained numerical checks with independent oracles.

Each suite returns a dict of worst-case residuals.  The oracles never reuse
the code path they check: Fisher matrices are compared with explicit sums
over outcomes, derivatives with central finite differences, block covariance
updates with the full-matrix Kalman recursion.
"""

import numpy as np

from . import expfam, models
from ._linalg import max_abs
from .natgrad import RateSchedule, decay_to_rate, rate_to_decay
from .recurrent import (BlockCovariance, block_observe, block_observe_information, block_step_w0,
                        block_transition, decompose_covariance, full_observe, full_transition,
                        init_rtrl, rtrl_step)


def _spd(rng, n, floor=0.5):
    A = rng.standard_normal((n, n))
    return A @ A.T / n + floor * np.eye(n)


def _rel(a, b):
    return max_abs(np.asarray(a) - np.asarray(b)) / max(max_abs(b), 1.0)


# ---------------------------------------------------------------------------
# exponential families

def random_mean(family, rng):
    """A mean parameter comfortably inside the domain."""
    if family.kind == expfam.GAUSSIAN:
        return rng.standard_normal(family.stat_dim)
    if family.kind == expfam.BERNOULLI:
        return rng.uniform(0.05, 0.95, size=1)
    p = rng.dirichlet(np.full(family.n_classes, 2.0))
    p = 0.9 * p + 0.1 / family.n_classes
    return p[:-1]


def _fd_grad(f, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def expfam_suite(rng, n_pairs=100, families=None):
    """Residuals of the exponential-family identities.

    ``innovation``: ``|T(y) - mean + R grad|`` scaled by ``1 + |R| |grad|``;
    ``fisher``: gap to the outcome sum of ``grad grad^T``;
    ``grad_fd``: relative gap to central differences of the log-loss;
    ``score``: largest entry of ``sum_y p(y) grad(y)``;
    ``cov_identity``: Bernoulli ``Cov(f, T)`` vs ``R (dE f / dmean)`` for ``f(y) = y^2``.
    """
    if families is None:
        families = [expfam.gaussian(_spd(rng, 2)), expfam.bernoulli(), expfam.categorical(3)]
    out = dict.fromkeys(("innovation", "fisher", "grad_fd", "score", "cov_identity"), 0.0)
    for fam in families:
        for _ in range(n_pairs):
            mean = random_mean(fam, rng)
            if fam.is_discrete:
                y = expfam.outcomes(fam)[rng.integers(len(expfam.outcomes(fam)))]
            else:
                y = mean + rng.standard_normal(fam.stat_dim)
            R = expfam.stat_covariance(fam, mean)
            g = expfam.loss_grad_mean(fam, y, mean)
            E = expfam.sufficient_stats(fam, y) - mean
            out["innovation"] = max(out["innovation"], max_abs(E + R @ g) / (1.0 + max_abs(R) * max_abs(g)))
            fd = _fd_grad(lambda m: expfam.log_likelihood(fam, y, m), mean)
            out["grad_fd"] = max(out["grad_fd"], max_abs(g - fd) / max(max_abs(fd), 1e-12))
            if fam.is_discrete:
                fisher = sum(expfam.probability(fam, o, mean) *
                             np.outer(expfam.loss_grad_mean(fam, o, mean), expfam.loss_grad_mean(fam, o, mean))
                             for o in expfam.outcomes(fam))
                F = expfam.fisher_wrt_mean(fam, mean)
                out["fisher"] = max(out["fisher"], max_abs(F - fisher) / max(max_abs(F), 1.0))
                score = sum(expfam.probability(fam, o, mean) * expfam.loss_grad_mean(fam, o, mean)
                            for o in expfam.outcomes(fam))
                out["score"] = max(out["score"], max_abs(score))
        if fam.kind == expfam.BERNOULLI:
            for _ in range(n_pairs):
                p = random_mean(fam, rng)

                def mean_f(m):
                    return sum(expfam.probability(fam, o, m) * o ** 2 for o in (0, 1))

                def cov_fT(m):
                    Ef = mean_f(m)
                    return sum(expfam.probability(fam, o, m) * (o ** 2 - Ef) * (o - m[0]) for o in (0, 1))

                lhs = cov_fT(p)
                rhs = (expfam.stat_covariance(fam, p) @ _fd_grad(mean_f, p))[0]
                out["cov_identity"] = max(out["cov_identity"], float(abs(lhs - rhs)))
    return out


# ---------------------------------------------------------------------------
# model Jacobians and RTRL

def random_recurrent_point(model, rng, scale=0.5):
    theta = scale * rng.standard_normal(model.dim_theta)
    return theta, rng.standard_normal(model.dim_y), rng.standard_normal(model.dim_u)


def jacobian_suite(rng, n_configs=50, dim_u=2, dim_y=3):
    """Model Jacobians vs central differences on random points, relative max error per kind."""
    out = {}
    for name, cls in models.RECURRENT_KINDS.items():
        m = cls(dim_u, dim_y)
        worst = 0.0
        for _ in range(n_configs):
            theta, y, u = random_recurrent_point(m, rng)
            d_theta, d_state = m.jacobians(y, theta, u)
            fd_t = models.fd_jacobian(lambda th: m.step(y, th, u), theta)
            fd_s = models.fd_jacobian(lambda yy: m.step(yy, theta, u), y)
            worst = max(worst, _rel(d_theta, fd_t), _rel(d_state, fd_s))
        out[name] = worst
    for name, m in (("linear", models.LinearModel(3, 2, bias=True)),
                    ("one_hidden_layer", models.OneHiddenLayerNet(3, 4, 2))):
        worst = 0.0
        for _ in range(n_configs):
            theta, u = 0.5 * rng.standard_normal(m.dim_theta), rng.standard_normal(m.dim_u)
            worst = max(worst, _rel(m.jacobian_theta(theta, u),
                                    models.fd_jacobian(lambda th: m.predict(th, u), theta)))
        out[name] = worst
    return out


def rtrl_fd_suite(rng, steps=20, dim_u=2, dim_y=3):
    """Frozen-parameter RTRL sensitivity vs finite differences through the whole trajectory."""
    out = {}
    fam = expfam.gaussian(np.eye(dim_y))
    for name, cls in models.RECURRENT_KINDS.items():
        m = cls(dim_u, dim_y)
        theta, y0, _ = random_recurrent_point(m, rng)
        if name == "linear_rnn":
            A, B = m.unpack(theta)
            theta = m.pack(A * 0.8 / max(np.abs(np.linalg.eigvals(A)).max(), 1e-12), B)
        U = rng.standard_normal((steps, dim_u))

        def trajectory(th):
            y, ys = y0, []
            for u in U:
                y = m.step(y, th, u)
                ys.append(y)
            return np.concatenate(ys)

        fd = models.fd_jacobian(trajectory, theta).reshape(steps, dim_y, m.dim_theta)
        state = init_rtrl(m, theta, y0)
        worst = 0.0
        for t, u in enumerate(U):
            state = rtrl_step(state, m, fam, u, np.zeros(dim_y), eta=0.0)
            worst = max(worst, _rel(state.G, fd[t]))
        out[name] = worst
    return out


# ---------------------------------------------------------------------------
# block covariance forms

def random_blocks(rng, dim_theta=4, dim_y=3, w_zero=False):
    P = _spd(rng, dim_theta)
    G = rng.standard_normal((dim_y, dim_theta))
    W = np.zeros((dim_y, dim_y)) if w_zero else _spd(rng, dim_y, 0.2)
    return BlockCovariance(P, G, W)


def block_suite(rng, n_instances=100, dim_theta=4, dim_y=3):
    """Block updates vs the full-matrix route, relative to ``|P|``.

    ``transition`` and ``observe`` compare reassembled covariances and the
    re-decomposed blocks; ``information`` checks the inverse forms;
    ``w0`` checks the zero-residual specialization against the general path.
    """
    out = dict.fromkeys(("transition", "observe", "information", "w0"), 0.0)
    for _ in range(n_instances):
        b = random_blocks(rng, dim_theta, dim_y)
        R = _spd(rng, dim_y)
        d_theta = rng.standard_normal((dim_y, dim_theta))
        d_state = 0.8 * rng.standard_normal((dim_y, dim_y)) / np.sqrt(dim_y)

        P = b.assemble()
        P_tr = full_transition(P, d_theta, d_state)
        bt = block_transition(b, d_theta, d_state)
        out["transition"] = max(out["transition"], max_abs(bt.assemble() - P_tr) / max_abs(P_tr))

        P_obs = full_observe(P_tr, R)
        bo = block_observe(bt, R)
        ref = decompose_covariance(P_obs, dim_theta)
        dev = max(max_abs(bo.assemble() - P_obs) / max_abs(P_obs),
                  _rel(bo.P_theta, ref.P_theta), _rel(bo.G, ref.G), _rel(bo.W, ref.W))
        out["observe"] = max(out["observe"], dev)

        bi = block_observe_information(bt, R)
        out["information"] = max(out["information"], max_abs(bi.assemble() - P_obs) / max_abs(P_obs))

        b0 = random_blocks(rng, dim_theta, dim_y, w_zero=True)
        fast = block_step_w0(b0, d_theta, d_state, R)
        ref0 = full_observe(full_transition(b0.assemble(), d_theta, d_state), R)
        out["w0"] = max(out["w0"], max_abs(fast.assemble() - ref0) / max_abs(ref0))
    return out


# ---------------------------------------------------------------------------
# schedules

DEFAULT_SCHEDULES = (RateSchedule.one_over_t_plus_c(1.0), RateSchedule.constant(0.1),
                     RateSchedule.power_law(0.5, 1.0))


def roundtrip_suite(steps=1000, schedules=DEFAULT_SCHEDULES):
    """``decay_to_rate`` applied to ``rate_to_decay`` recovers every ``eta_t``; max abs error."""
    worst = 0.0
    for sched in schedules:
        lambdas = [rate_to_decay(sched, t) for t in range(1, steps + 1)]
        eta0 = sched.rate(0)
        for t in range(1, steps + 1):
            worst = max(worst, abs(decay_to_rate(lambdas, eta0, t) - sched.rate(t)))
    return {"roundtrip": worst}

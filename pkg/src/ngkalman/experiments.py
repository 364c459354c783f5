"""Experiment configurations and their runners.

A configuration is a JSON object.  Top-level keys:

``experiment``
    one of :data:`EXPERIMENTS`.
``model``
    ``{"kind": "linear" | "one_hidden_layer" | "linear_rnn" | "tanh_rnn",
    "dim_u", "dim_y", "hidden", "bias", "observed_slice"}``.
``family``
    ``{"kind": "gaussian" | "bernoulli" | "categorical", "fixed_cov", "n_classes"}``.
``schedule``
    ``{"kind": "one_over_t_plus_c" | "constant" | "power_law", "c", "eta", "alpha", "eta0"}``.
``prior``
    ``{"theta_prior", "sigma0", "n_prior"}``; scalars broadcast, a 1-d ``sigma0`` is a diagonal.
``steps``, ``seed``
    run length and master seed.
``theta_star``
    ground-truth parameter, a list or ``"random"`` (drawn from the ``truth`` stream).
``truth``
    how ``"random"`` is drawn: ``scale``, ``spectral_radius``, ``sign`` (``"mixed"`` or
    ``"positive"``), ``b_range`` (uniform range for input weights), ``bias``.
``inputs``
    ``{"dist": "normal" | "uniform", "low", "high", "scale"}``.
``init``
    ``theta0`` (``"zeros"``, ``"star"``, ``"perturbed"`` or a list), ``perturb``,
    ``J0`` (``"default"``, a scalar times identity, or a matrix), ``P0_theta``, ``y0``,
    ``augment``, ``P0_init``.
``estimator``
    ``"exact"`` (default), ``"monte_carlo"`` or ``"outer_product"``.
``gamma``
    constant Fisher mixing rate; omitted means ``gamma_t = eta_t``.
``suite``, ``n``
    for ``probes``: ``"filter"`` (default), ``"expfam"``, ``"blocks"``, ``"rtrl_oracle"``, ``"roundtrip"``.
``tolerances``
    overrides of :data:`DEFAULT_TOLERANCES` entries.
``output``
    ``{"trace": file name, "report": file name}``, relative to the output directory.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import checks, data, ekf, equiv, expfam, models
from ._linalg import max_abs, spd_inv
from .errors import ConfigError, ContractError
from .natgrad import (FisherEstimator, NatGradState, PriorSpec, RateSchedule, default_J0,
                      fisher_update, param_update, rate_to_decay, regularized_step,
                      schedule_from_config)
from .recurrent import (InitAugmented, JointSystem, augment_init_state, build_joint, init_rtrl,
                        natgrad_rtrl_step, rtrl_step)

EXPERIMENTS = {
    "static_ekf": "extended Kalman filter estimating a static model's parameter",
    "natgrad": "online natural gradient (optionally prior-regularized)",
    "lockstep_static": "EKF vs natural gradient with eta_t = 1/(t+1)",
    "lockstep_fading": "fading-memory EKF vs natural gradient under a rate schedule",
    "lockstep_regularized": "prior-preserving fading EKF vs regularized natural gradient",
    "rtrl": "real-time recurrent learning with plain gradient steps",
    "natgrad_rtrl": "natural-gradient RTRL with state correction",
    "lockstep_recurrent": "joint EKF over (theta, state) vs natural-gradient RTRL",
    "probes": "filter identities and oracle suites",
}

REQUIRED = {
    "static_ekf": ("model", "family", "steps", "seed", "theta_star"),
    "natgrad": ("model", "family", "schedule", "steps", "seed", "theta_star"),
    "lockstep_static": ("model", "family", "steps", "seed", "theta_star"),
    "lockstep_fading": ("model", "family", "schedule", "steps", "seed", "theta_star"),
    "lockstep_regularized": ("model", "family", "schedule", "prior", "steps", "seed", "theta_star"),
    "rtrl": ("model", "family", "schedule", "steps", "seed", "theta_star"),
    "natgrad_rtrl": ("model", "family", "schedule", "steps", "seed", "theta_star"),
    "lockstep_recurrent": ("model", "family", "steps", "seed", "theta_star"),
    "probes": ("seed",),
}

OPTIONAL = ("schedule", "prior", "truth", "inputs", "init", "estimator", "gamma", "suite", "n",
            "tolerances", "output", "steps", "theta_star", "model", "family", "description")

_STATIC_TOL = {"theta": 1e-8, "metric": 1e-8, "gain": 1e-10, "grad_form": 1e-10, "info_form": 1e-9}
DEFAULT_TOLERANCES = {
    "lockstep_static": _STATIC_TOL,
    "lockstep_fading": _STATIC_TOL,
    "lockstep_regularized": _STATIC_TOL,
    "lockstep_recurrent": {"theta": 1e-9, "state": 1e-9, "structure": 1e-9, "w": 1e-10,
                           "gain": 1e-10, "grad_form": 1e-10},
    "probes:filter": {"gain": 1e-10, "grad_form": 1e-10, "info_form": 1e-9},
    "probes:expfam": {"innovation": 1e-12, "fisher": 1e-12, "grad_fd": 1e-5, "score": 1e-12,
                      "cov_identity": 1e-6},
    "probes:blocks": {"transition": 1e-9, "observe": 1e-9, "information": 1e-9, "w0": 1e-9},
    "probes:rtrl_oracle": {"jacobian": 1e-5, "rtrl_fd": 1e-5},
    "probes:roundtrip": {"roundtrip": 1e-12},
}
SUITES = ("filter", "expfam", "blocks", "rtrl_oracle", "roundtrip")


# ---------------------------------------------------------------------------
# configuration

def parse_config(text, source="<config>"):
    """Parse JSON text; syntax errors carry line and column."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    return raw


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), str(path))


def _section(raw, key):
    value = raw.get(key) or {}
    if not isinstance(value, dict):
        raise ConfigError("must be an object", key)
    return value


def _nonneg_int(raw, key):
    value = raw.get(key)
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise ConfigError(f"must be a non-negative integer, got {value!r}", key)
    return value


def _wrap(key, fn, *args):
    try:
        return fn(*args)
    except ConfigError:
        raise
    except (ContractError, ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc), key) from None


def _square(value, n, key):
    """Scalar -> scalar * I, vector -> diagonal, else an n x n matrix."""
    a = np.asarray(value, dtype=float)
    if a.ndim == 0:
        return float(a) * np.eye(n)
    if a.ndim == 1:
        if a.size != n:
            raise ConfigError(f"expected {n} diagonal entries, got {a.size}", key)
        return np.diag(a)
    if a.shape != (n, n):
        raise ConfigError(f"expected a {n}x{n} matrix, got shape {a.shape}", key)
    return a


def _vector(value, n, key):
    a = np.asarray(value, dtype=float)
    if a.ndim == 0:
        return np.full(n, float(a))
    if a.shape != (n,):
        raise ConfigError(f"expected {n} values, got shape {a.shape}", key)
    return a


@dataclass
class Config:
    raw: dict
    experiment: str
    steps: int
    seed: int
    model: object = None
    family: object = None
    schedule: RateSchedule | None = None
    prior: PriorSpec | None = None
    suite: str = "filter"
    tolerances: dict = field(default_factory=dict)

    @property
    def init(self):
        return self.raw.get("init") or {}


def validate(raw):
    """Check a parsed configuration and build its typed parts."""
    exp = raw.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"must be one of {', '.join(EXPERIMENTS)}; got {exp!r}", "experiment")
    unknown = sorted(set(raw) - set(REQUIRED[exp]) - set(OPTIONAL) - {"experiment"})
    if unknown:
        raise ConfigError(f"unknown key(s) {', '.join(unknown)}", unknown[0])
    for key in REQUIRED[exp]:
        if key not in raw:
            raise ConfigError(f"required for experiment {exp}", key)

    suite = raw.get("suite", "filter")
    if exp == "probes":
        if suite not in SUITES:
            raise ConfigError(f"must be one of {', '.join(SUITES)}; got {suite!r}", "suite")
        if suite == "filter":
            for key in ("model", "family", "steps", "theta_star"):
                if key not in raw:
                    raise ConfigError("required for the filter probe suite", key)

    steps = _nonneg_int(raw, "steps") if "steps" in raw else 0
    seed = _nonneg_int(raw, "seed")
    cfg = Config(raw, exp, steps, seed, suite=suite)

    if "model" in raw:
        cfg.model = _wrap("model", models.from_config, _section(raw, "model"))
    if "family" in raw:
        cfg.family = _wrap("family", expfam.from_config, _section(raw, "family"))
    if cfg.model is not None and cfg.family is not None:
        out_dim = models.observed_dim(cfg.model) if models.is_recurrent(cfg.model) else cfg.model.dim_y
        if out_dim != cfg.family.stat_dim:
            raise ConfigError(f"family statistic dimension {cfg.family.stat_dim} does not match "
                              f"model output dimension {out_dim}", "family")
        recurrent_exp = exp in ("rtrl", "natgrad_rtrl", "lockstep_recurrent")
        if recurrent_exp and not models.is_recurrent(cfg.model):
            raise ConfigError(f"experiment {exp} needs a recurrent model kind", "model.kind")
        if exp not in ("probes",) and not recurrent_exp and models.is_recurrent(cfg.model):
            raise ConfigError(f"experiment {exp} needs a static model kind", "model.kind")
    if raw.get("schedule") is not None:
        cfg.schedule = _wrap("schedule", schedule_from_config, _section(raw, "schedule"))
    if raw.get("prior") is not None:
        cfg.prior = _prior(_section(raw, "prior"), cfg.model)
    if "theta_star" in raw and raw["theta_star"] != "random" and cfg.model is not None:
        _vector(raw["theta_star"], cfg.model.dim_theta, "theta_star")
    est = raw.get("estimator", "exact")
    _wrap("estimator", FisherEstimator, est)
    if raw.get("gamma") is not None and not 0.0 < float(raw["gamma"]) <= 1.0:
        raise ConfigError(f"must lie in (0, 1], got {raw['gamma']}", "gamma")
    if raw.get("inputs") is not None and _section(raw, "inputs").get("dist", "normal") not in ("normal", "uniform"):
        raise ConfigError("dist must be normal or uniform", "inputs.dist")

    key = f"probes:{suite}" if exp == "probes" else exp
    tol = dict(DEFAULT_TOLERANCES.get(key, {}))
    for name, value in _section(raw, "tolerances").items():
        if name not in tol:
            raise ConfigError(f"unknown tolerance {name!r}; known: {', '.join(sorted(tol))}", f"tolerances.{name}")
        tol[name] = float(value)
    cfg.tolerances = tol
    return cfg


def _prior(sec, model):
    if model is None:
        raise ConfigError("a prior needs a model", "prior")
    p = model.dim_theta
    theta_prior = _vector(sec.get("theta_prior", 0.0), p, "prior.theta_prior")
    sigma0 = _square(sec.get("sigma0", 1.0), p, "prior.sigma0")
    return _wrap("prior", PriorSpec, theta_prior, sigma0, float(sec.get("n_prior", 1.0)))


# ---------------------------------------------------------------------------
# set-up: ground truth, data, initial values

def random_theta_star(model, rng, truth=None):
    """Draw a ground-truth parameter for ``model`` from the ``truth`` stream."""
    truth = truth or {}
    scale = float(truth.get("scale", 1.0))
    if not models.is_recurrent(model):
        return scale * rng.standard_normal(model.dim_theta)
    n, m = model.dim_y, model.dim_u
    radius = float(truth.get("spectral_radius", 0.7))
    A = rng.standard_normal((n, n))
    if truth.get("sign", "mixed") == "positive":
        A = np.abs(A)
    A *= radius / max(np.abs(np.linalg.eigvals(A)).max(), 1e-12)
    if truth.get("b_range") is not None:
        lo, hi = truth["b_range"]
        B = rng.uniform(lo, hi, (n, m))
    else:
        B = scale * rng.standard_normal((n, m))
    if isinstance(model, models.TanhRNN):
        return model.pack(A, B, np.full(n, float(truth.get("bias", 0.0))))
    return model.pack(A, B)


@dataclass
class Setup:
    theta_star: np.ndarray
    stream: list
    theta0: np.ndarray
    y0: np.ndarray | None
    rngs: dict


def build_setup(cfg):
    raw = cfg.raw
    streams = data.rngs(cfg.seed)
    model = cfg.model
    if raw["theta_star"] == "random":
        theta_star = random_theta_star(model, streams["truth"], _section(raw, "truth"))
    else:
        theta_star = _vector(raw["theta_star"], model.dim_theta, "theta_star")
    inputs = _section(raw, "inputs")
    init = cfg.init
    theta0 = _theta0(init, theta_star, streams["truth"])
    y0 = None
    if models.is_recurrent(model):
        y0 = _vector(init.get("y0", 0.0), model.dim_y, "init.y0")
        stream = data.recurrent_stream(model, cfg.family, theta_star, y0, cfg.steps, streams["data"], **inputs)
    else:
        stream = data.static_stream(model, cfg.family, theta_star, cfg.steps, streams["data"], **inputs)
    return Setup(theta_star, stream, theta0, y0, streams)


def _theta0(init, theta_star, rng):
    spec = init.get("theta0", "zeros")
    if spec == "zeros":
        return np.zeros_like(theta_star)
    if spec == "star":
        return theta_star.copy()
    if spec == "perturbed":
        return theta_star + float(init.get("perturb", 0.1)) * rng.standard_normal(theta_star.size)
    return _vector(spec, theta_star.size, "init.theta0")


def _J0(cfg):
    spec = cfg.init.get("J0", "default")
    if spec == "default":
        return cfg.prior.precision if cfg.prior is not None else default_J0(cfg.model)
    return _square(spec, cfg.model.dim_theta, "init.J0")


def _P0_theta(cfg, sched):
    if "P0_theta" in cfg.init:
        return _square(cfg.init["P0_theta"], cfg.model.dim_theta, "init.P0_theta")
    return sched.rate(0) * spd_inv(_J0(cfg), "initial Fisher estimate")


# ---------------------------------------------------------------------------
# results

@dataclass
class Result:
    columns: list
    rows: list
    report: dict
    breaches: list = field(default_factory=list)

    @property
    def passed(self):
        return not self.breaches


def _check(values, tolerances):
    """Names whose value exceeds its tolerance (``None`` values are skipped)."""
    return sorted(k for k, tol in tolerances.items() if values.get(k) is not None and values[k] > tol)


def _loss(family, y, y_hat):
    return -expfam.log_likelihood(family, y, y_hat)


def _estimator(cfg):
    return FisherEstimator(cfg.raw.get("estimator", "exact"))


def _schedule(cfg, default=None):
    return cfg.schedule if cfg.schedule is not None else (default or RateSchedule.one_over_t_plus_c(1.0))


def _indexed(prefix, n):
    return [f"{prefix}{i}" for i in range(n)]


# ---------------------------------------------------------------------------
# runners

def run_static_ekf(cfg):
    s = build_setup(cfg)
    sched = _schedule(cfg)
    p = cfg.model.dim_theta
    state = ekf.EkfState(s.theta0, sched.rate(0) * spd_inv(_J0(cfg), "initial Fisher estimate"))
    rows = []
    for t, (u, y) in enumerate(s.stream, start=1):
        lam = rate_to_decay(sched, t)
        state, trace = ekf.step(state, cfg.model, cfg.family, u, y, lam)
        rows.append([t, *state.s, *np.diag(state.P), lam, _loss(cfg.family, y, trace.y_hat)])
    report = {"final_s": state.s, "theta_star": s.theta_star, "param_error": max_abs(state.s - s.theta_star)}
    return Result(["t", *_indexed("s", p), *_indexed("P", p), "lambda", "loss"], rows, report)


def run_natgrad(cfg):
    s = build_setup(cfg)
    sched = cfg.schedule.anchored() if cfg.prior is not None else cfg.schedule
    est, gamma = _estimator(cfg), cfg.raw.get("gamma")
    p = cfg.model.dim_theta
    state = NatGradState(s.theta0, _J0(cfg))
    rows = []
    for t, (u, y) in enumerate(s.stream, start=1):
        eta = sched.rate(t)
        lam = rate_to_decay(sched, t)
        loss = _loss(cfg.family, y, cfg.model.predict(state.theta, u))
        state = fisher_update(state, cfg.model, cfg.family, u, eta if gamma is None else float(gamma),
                              est, y=y, rng=s.rngs["fisher"])
        if cfg.prior is not None:
            state = regularized_step(state, cfg.model, cfg.family, u, y, cfg.schedule, cfg.prior, t)
        else:
            state = param_update(state, cfg.model, cfg.family, u, y, eta)
        rows.append([t, *state.theta, *np.diag(state.J), eta, lam, loss])
    report = {"final_theta": state.theta, "theta_star": s.theta_star,
              "param_error": max_abs(state.theta - s.theta_star)}
    return Result(["t", *_indexed("theta", p), *_indexed("J", p), "eta", "lambda", "loss"], rows, report)


def _run_rtrl(cfg, natural):
    s = build_setup(cfg)
    sched = cfg.schedule
    model, fam = cfg.model, cfg.family
    obs = model.observed_slice
    state = init_rtrl(model, s.theta0, s.y0, J0=_J0(cfg) if natural else None)
    est = _estimator(cfg)
    rows = []
    p, n = model.dim_theta, model.dim_y
    for t, (u, y) in enumerate(s.stream, start=1):
        eta = sched.rate(t)
        loss = _loss(fam, y, model.step(state.y_state, state.theta, u)[obs])
        if natural:
            state = natgrad_rtrl_step(state, model, fam, u, y, eta, est, s.rngs["fisher"])
            extra = list(np.diag(state.J))
        else:
            state = rtrl_step(state, model, fam, u, y, eta)
            extra = []
        rows.append([t, *state.theta, *state.y_state, *extra, eta, loss, float(np.linalg.norm(state.G))])
    cols = ["t", *_indexed("theta", p), *_indexed("y", n), *(_indexed("J", p) if natural else []),
            "eta", "loss", "G_norm"]
    report = {"final_theta": state.theta, "final_state": state.y_state, "theta_star": s.theta_star,
              "param_error": max_abs(state.theta - s.theta_star)}
    return Result(cols, rows, report)


def run_rtrl(cfg):
    return _run_rtrl(cfg, natural=False)


def run_natgrad_rtrl(cfg):
    return _run_rtrl(cfg, natural=True)


_STATIC_DEV = ("theta_dev", "metric_dev")
_RECURRENT_DEV = ("theta_dev", "state_dev", "metric_dev", "structure_dev", "w_dev", "g_dev")


def _lockstep_result(cfg, rep, dev_keys):
    cols = ["t", "eta", "lambda", *dev_keys, *equiv.PROBES]
    rows = [[r["t"], r["eta"], r["lambda"], *(r[k] for k in dev_keys), *(r.get(k) for k in equiv.PROBES)]
            for r in rep.rows]
    summary = {k: v for k, v in rep.to_dict().items()
               if not k.startswith("max_") or k[4:] in dev_keys}
    values = {k[:-4]: summary["max_" + k] for k in dev_keys}
    values.update(summary["probe_devs"])
    report = dict(summary, tolerances=cfg.tolerances)
    return Result(cols, rows, report, _check(values, cfg.tolerances))


def _lockstep(cfg, fn):
    try:
        return fn()
    except equiv.LockstepAbort:
        raise
    except np.linalg.LinAlgError as exc:
        raise equiv.LockstepAbort(getattr(exc, "step", None), exc) from exc


def run_lockstep_static(cfg):
    s = build_setup(cfg)
    rep = _lockstep(cfg, lambda: equiv.lockstep_static(cfg.model, cfg.family, s.stream, s.theta0, _J0(cfg)))
    return _lockstep_result(cfg, rep, _STATIC_DEV)


def run_lockstep_fading(cfg):
    s = build_setup(cfg)
    rep = _lockstep(cfg, lambda: equiv.lockstep_fading(cfg.model, cfg.family, s.stream, s.theta0, _J0(cfg),
                                                       cfg.schedule))
    return _lockstep_result(cfg, rep, _STATIC_DEV)


def run_lockstep_regularized(cfg):
    s = build_setup(cfg)
    theta0 = s.theta0 if "theta0" in cfg.init else None
    rep = _lockstep(cfg, lambda: equiv.lockstep_regularized(cfg.model, cfg.family, s.stream, cfg.prior,
                                                            cfg.schedule, theta0=theta0))
    return _lockstep_result(cfg, rep, _STATIC_DEV)


def run_lockstep_recurrent(cfg):
    s = build_setup(cfg)
    sched = _schedule(cfg)
    init = cfg.init
    P0_init = _square(init["P0_init"], cfg.model.dim_y, "init.P0_init") if "P0_init" in init else None
    rep = _lockstep(cfg, lambda: equiv.lockstep_recurrent(
        cfg.model, cfg.family, s.stream, s.theta0, _P0_theta(cfg, sched), s.y0,
        schedule=cfg.schedule, augment=bool(init.get("augment", False)), P0_init=P0_init))
    return _lockstep_result(cfg, rep, _RECURRENT_DEV)


def _filter_probes(cfg):
    s = build_setup(cfg)
    sched = _schedule(cfg)
    model, fam = cfg.model, cfg.family
    if models.is_recurrent(model):
        theta0, G0, m = s.theta0, None, model
        if cfg.init.get("augment"):
            theta0, G0 = augment_init_state(model, s.theta0, s.y0)
            m = InitAugmented(model)
        P0 = _P0_theta(cfg, sched)
        if G0 is not None:
            P0 = np.block([[P0, np.zeros((P0.shape[0], model.dim_y))],
                           [np.zeros((model.dim_y, P0.shape[0])), np.eye(model.dim_y)]])
        state, system, information = build_joint(m, theta0, s.y0, P0, G0), JointSystem(m), False
    else:
        P0 = sched.rate(0) * spd_inv(_J0(cfg), "initial Fisher estimate")
        state, system, information = ekf.EkfState(s.theta0, P0), ekf.StaticSystem(model), True
    rows, worst = [], dict.fromkeys(equiv.PROBES, 0.0)
    for t, (u, y) in enumerate(s.stream, start=1):
        try:
            pred = ekf.transition(ekf.fade(state, rate_to_decay(sched, t)), system, u)
            state, trace = ekf.observe(pred, fam, y)
            row = equiv.probe_trace(trace, ekf.EkfState(pred.s, pred.P), state, fam, information)
        except np.linalg.LinAlgError as exc:
            raise equiv.LockstepAbort(t, exc) from exc
        rows.append([t, *(row[k] for k in equiv.PROBES)])
        for k in equiv.PROBES:
            worst[k] = None if row[k] is None else max(worst[k], row[k])
    report = {"steps": cfg.steps, "probe_devs": worst, "tolerances": cfg.tolerances}
    return Result(["t", *equiv.PROBES], rows, report, _check(worst, cfg.tolerances))


def run_probes(cfg):
    if cfg.suite == "filter":
        return _filter_probes(cfg)
    rng = data.rngs(cfg.seed)["truth"]
    n = int(cfg.raw.get("n", 100))
    if cfg.suite == "expfam":
        values = checks.expfam_suite(rng, n)
    elif cfg.suite == "blocks":
        values = checks.block_suite(rng, n)
    elif cfg.suite == "rtrl_oracle":
        jac = checks.jacobian_suite(rng, n)
        fd = checks.rtrl_fd_suite(rng)
        values = {"jacobian": max(jac.values()), "rtrl_fd": max(fd.values())}
        values.update({f"jacobian.{k}": v for k, v in jac.items()})
        values.update({f"rtrl_fd.{k}": v for k, v in fd.items()})
    else:
        values = checks.roundtrip_suite(cfg.steps or 1000)
    breaches = _check(values, cfg.tolerances)
    rows = [[k, v, cfg.tolerances.get(k), "" if k not in cfg.tolerances else int(k not in breaches)]
            for k, v in values.items()]
    report = {"suite": cfg.suite, "values": values, "tolerances": cfg.tolerances}
    return Result(["check", "value", "tolerance", "passed"], rows, report, breaches)


RUNNERS = {
    "static_ekf": run_static_ekf,
    "natgrad": run_natgrad,
    "lockstep_static": run_lockstep_static,
    "lockstep_fading": run_lockstep_fading,
    "lockstep_regularized": run_lockstep_regularized,
    "rtrl": run_rtrl,
    "natgrad_rtrl": run_natgrad_rtrl,
    "lockstep_recurrent": run_lockstep_recurrent,
    "probes": run_probes,
}


def run(cfg):
    """Execute a validated :class:`Config`."""
    return RUNNERS[cfg.experiment](cfg)


# ---------------------------------------------------------------------------
# serialization

def format_value(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def to_csv(result):
    lines = [",".join(result.columns)]
    lines += [",".join(format_value(v) for v in row) for row in result.rows]
    return "\n".join(lines) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def to_json(cfg, result):
    doc = {"experiment": cfg.experiment, "seed": cfg.seed, "steps": cfg.steps,
           "config": cfg.raw, "report": result.report,
           "passed": result.passed, "breaches": result.breaches}
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"


def describe():
    """Machine-readable listing of experiments and their fields."""
    return {name: {"description": EXPERIMENTS[name], "required": list(REQUIRED[name]),
                   "tolerances": DEFAULT_TOLERANCES.get(name, {})}
            for name in EXPERIMENTS} | {"probes": {
                "description": EXPERIMENTS["probes"], "required": list(REQUIRED["probes"]),
                "suites": {s: {"tolerances": DEFAULT_TOLERANCES[f"probes:{s}"],
                               "required": ["model", "family", "steps", "theta_star"] if s == "filter" else []}
                           for s in SUITES}}}

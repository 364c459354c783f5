"""One test per acceptance criterion, each run from the shipped configs at the required tolerance.

Every test records a PASS/FAIL line that is printed in the terminal summary.
"""

import time
from pathlib import Path

from ngkalman import cli, experiments

from conftest import ACCEPTANCE_LINES

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

RECURRENT = [f"c5_{kind}_{fam}{aug}" for kind in ("linear_rnn", "tanh_rnn")
             for fam in ("gaussian", "bernoulli") for aug in ("", "_augmented")]
LOCKSTEP = ["c1_lockstep_static_linear", "c2_lockstep_static_net", "c3_lockstep_fading_constant",
            "c3_lockstep_fading_power", "c4_lockstep_regularized", "c4_lockstep_regularized_n0", *RECURRENT]
ALL_ACCEPTANCE = [*LOCKSTEP, "c3_roundtrip", "c6_probes_static", "c6_probes_recurrent",
                  "c7_blocks", "c8_expfam", "c9_rtrl_oracle"]

_cache = {}


def run(name):
    if name not in _cache:
        cfg = experiments.validate(experiments.load_config(CONFIGS / f"{name}.json"))
        start = time.perf_counter()
        result = experiments.run(cfg)
        _cache[name] = (cfg, result, time.perf_counter() - start)
    return _cache[name]


def record(number, title, checks):
    """``checks`` maps a label to ``(value, bound)``; value None means not applicable."""
    live = {k: vb for k, vb in checks.items() if vb[0] is not None}
    failed = [k for k, (v, bound) in live.items() if not v <= bound]
    # report the check closest to its bound
    key = max(live, key=lambda k: live[k][0] / live[k][1] if live[k][1] else (0.0 if live[k][0] == 0 else 1e300))
    v, b = live[key]
    status = "FAIL" if failed else "PASS"
    skipped = len(checks) - len(live)
    note = f", {skipped} not applicable" if skipped else ""
    ACCEPTANCE_LINES.append(f"{status} criterion {number}: {title} "
                            f"({len(live)} checks{note}; tightest {key} = {v:.3g} vs bound {b:g})")
    assert not failed, f"criterion {number} exceeds bound on {failed}"


def static_checks(name, tol=1e-8):
    rep = run(name)[1].report
    return {f"{name}.theta": (rep["max_theta_dev"], tol), f"{name}.metric": (rep["max_metric_dev"], tol)}


def test_criterion_1_static_linear():
    _, _, seconds = run("c1_lockstep_static_linear")
    checks = static_checks("c1_lockstep_static_linear")
    checks["runtime_s"] = (seconds, 1.0)
    record(1, "static EKF = online natural gradient, linear regression", checks)


def test_criterion_2_static_network():
    record(2, "static EKF = online natural gradient, one-hidden-layer net", static_checks("c2_lockstep_static_net"))


def test_criterion_3_fading():
    checks = {**static_checks("c3_lockstep_fading_constant"), **static_checks("c3_lockstep_fading_power")}
    checks["roundtrip"] = (run("c3_roundtrip")[1].report["values"]["roundtrip"], 1e-12)
    record(3, "fading-memory EKF = natural gradient with schedule", checks)


def test_criterion_4_regularized():
    checks = static_checks("c4_lockstep_regularized")
    same = experiments.to_csv(run("c4_lockstep_regularized_n0")[1]) == \
        experiments.to_csv(run("c3_lockstep_fading_constant")[1])
    checks["n_prior=0 bit mismatch"] = (0.0 if same else 1.0, 0.0)
    record(4, "prior-regularized pair; no prior weight reduces to criterion 3", checks)


def test_criterion_5_recurrent():
    checks = {}
    for name in RECURRENT:
        rep = run(name)[1].report
        short = name[3:]
        checks[f"{short}.theta"] = (rep["max_theta_dev"], 1e-9)
        checks[f"{short}.state"] = (rep["max_state_dev"], 1e-9)
        checks[f"{short}.structure"] = (rep["max_structure_dev"], 1e-9)
        checks[f"{short}.W/|P|"] = (rep["max_w_dev"], 1e-10)
    record(5, "joint EKF over (theta, state) = natural-gradient RTRL", checks)


def test_criterion_6_probes():
    bounds = {"gain": 1e-10, "grad_form": 1e-10, "info_form": 1e-9}
    checks = {}
    for name in LOCKSTEP:
        for probe, value in run(name)[1].report["probe_devs"].items():
            # None: the information route needs an invertible covariance, joint runs are singular by design
            checks[f"{name}.{probe}"] = (value, bounds[probe])
    for name in ("c6_probes_static", "c6_probes_recurrent"):
        for probe, value in run(name)[1].report["probe_devs"].items():
            checks[f"{name}.{probe}"] = (value, bounds[probe])
    record(6, "filter identity probes on every lockstep run", checks)


def test_criterion_7_blocks():
    values = run("c7_blocks")[1].report["values"]
    assert run("c7_blocks")[0].raw.get("n", 100) >= 100
    record(7, "block covariance updates = full-matrix filter", {k: (v, 1e-9) for k, v in values.items()})


def test_criterion_8_expfam():
    values = run("c8_expfam")[1].report["values"]
    bounds = {"innovation": 1e-12, "fisher": 1e-12, "grad_fd": 1e-5, "score": 1e-12, "cov_identity": 1e-6}
    record(8, "exponential-family identities", {k: (values[k], b) for k, b in bounds.items()})


def test_criterion_9_rtrl_oracle():
    values = run("c9_rtrl_oracle")[1].report["values"]
    record(9, "RTRL and model Jacobians vs finite differences", {k: (v, 1e-5) for k, v in values.items()})


def test_criterion_10_determinism(tmp_path):
    paths = [str(CONFIGS / f"{n}.json") for n in ALL_ACCEPTANCE]
    start = time.perf_counter()
    codes = [cli.main(["run", *paths, "--out-dir", str(tmp_path / d)]) for d in ("a", "b")]
    seconds = time.perf_counter() - start
    mismatched = [f.name for f in (tmp_path / "a").iterdir()
                  if f.read_bytes() != (tmp_path / "b" / f.name).read_bytes()]
    n_files = len(list((tmp_path / "a").iterdir()))
    record(10, f"byte-identical reruns of {n_files} output files", {
        "exit code": (max(codes), 0),
        "mismatched files": (len(mismatched), 0),
        "missing outputs": (2 * len(paths) - n_files, 0),
        "two full runs, s": (seconds, 60.0),
    })

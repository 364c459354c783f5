"""Command-line front end.

::

    ngkalman run CONFIG [CONFIG ...] [--seed N] [--steps N] [--out-dir DIR] [--jobs N]
    ngkalman list [--json]

Each run writes ``<name>.csv`` (per-step trace) and ``<name>.json`` (report)
into the output directory, where ``<name>`` is the config file stem unless the
config's ``output`` section says otherwise.  The output directory is
``--out-dir`` if given, else ``$NGKALMAN_OUT_DIR``, else ``./runs``.

Exit status: 0 on success, 2 if a lockstep or probe run exceeds a tolerance,
1 on any error (bad arguments, invalid config, numerical abort).
"""

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import experiments
from .equiv import LockstepAbort
from .errors import ConfigError, ContractError, DomainError

OUT_DIR_ENV = "NGKALMAN_OUT_DIR"
DEFAULT_OUT_DIR = "runs"

EXIT_OK, EXIT_ERROR, EXIT_BREACH = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="ngkalman", description="Kalman filter / natural gradient experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run = sub.add_parser("run", help="run one or more experiment configs")
    run.add_argument("configs", nargs="+", metavar="CONFIG")
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--steps", type=int, help="override the config step count")
    run.add_argument("--out-dir", help=f"output directory (default: ${OUT_DIR_ENV} or ./{DEFAULT_OUT_DIR})")
    run.add_argument("--jobs", type=int, default=1, help="run independent configs in parallel")
    lst = sub.add_parser("list", help="list experiment kinds and their required fields")
    lst.add_argument("--json", action="store_true", help="machine-readable schema")
    return parser


def resolve_out_dir(flag):
    return Path(flag or os.environ.get(OUT_DIR_ENV) or DEFAULT_OUT_DIR)


def run_config(path, out_dir, seed=None, steps=None):
    """Run one config file; returns ``(exit code, message)``."""
    path = Path(path)
    try:
        raw = experiments.load_config(path)
        if seed is not None:
            raw["seed"] = seed
        if steps is not None:
            raw["steps"] = steps
        cfg = experiments.validate(raw)
        result = experiments.run(cfg)
    except OSError as exc:
        return EXIT_ERROR, f"{path}: {exc.strerror or exc}"
    except ConfigError as exc:
        return EXIT_ERROR, f"{path}: invalid config: {exc}"
    except LockstepAbort as exc:
        return EXIT_ERROR, f"{path}: numerical abort at step {exc.step}: {exc.cause}"
    except (ContractError, DomainError, np.linalg.LinAlgError) as exc:
        step = getattr(exc, "step", None)
        where = f" at step {step}" if step is not None else ""
        return EXIT_ERROR, f"{path}: error{where}: {exc}"

    output = raw.get("output") or {}
    out_dir.mkdir(parents=True, exist_ok=True)
    trace = out_dir / output.get("trace", f"{path.stem}.csv")
    report = out_dir / output.get("report", f"{path.stem}.json")
    trace.write_text(experiments.to_csv(result), encoding="utf-8")
    report.write_text(experiments.to_json(cfg, result), encoding="utf-8")
    if result.passed:
        return EXIT_OK, f"{path}: ok ({cfg.experiment}, {cfg.steps} steps) -> {trace}, {report}"
    return EXIT_BREACH, f"{path}: tolerance exceeded: {', '.join(result.breaches)} -> {report}"


def _run_all(args):
    out_dir = resolve_out_dir(args.out_dir)
    if args.jobs < 1:
        print("ngkalman: error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_ERROR
    jobs = [(c, out_dir, args.seed, args.steps) for c in args.configs]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(run_config, *zip(*jobs)))
    else:
        results = [run_config(*j) for j in jobs]
    for code, msg in results:
        print(msg, file=sys.stderr if code == EXIT_ERROR else sys.stdout)
    codes = {code for code, _ in results}
    if EXIT_ERROR in codes:
        return EXIT_ERROR
    return EXIT_BREACH if EXIT_BREACH in codes else EXIT_OK


def list_experiments(as_json=False):
    if as_json:
        return json.dumps(experiments.describe(), indent=2, sort_keys=True)
    width = max(map(len, experiments.EXPERIMENTS))
    lines = []
    for name, desc in experiments.EXPERIMENTS.items():
        lines.append(f"{name:<{width}}  {desc}")
        lines.append(f"{'':<{width}}  required: {', '.join(experiments.REQUIRED[name])}")
    lines.append(f"probes suites: {', '.join(experiments.SUITES)}")
    return "\n".join(lines)


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "list":
        print(list_experiments(args.json))
        return EXIT_OK
    return _run_all(args)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``budgetmab {run,sweep,calibrate,bound}``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 runtime error.
``BUDGETMAB_OUT`` and ``BUDGETMAB_WORKERS`` override the output directory and
worker count of the experiment file; explicit flags win over both.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, seeding
from .analysis import CALIBRATION_POLICIES, DEFAULT_CALIBRATION_POLICIES, calibrate, regret_bound
from .config import ConfigError, build_run_configs, load_experiment
from .environments import BanditInstance, DatasetError
from .policies import PolicyConfig
from .simulator import RegretCurve, RunConfig, instance_for_repetition, run_experiment

log = logging.getLogger("budgetmab")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME = 0, 2, 3, 4
DEFAULT_RHO_GRID = (0.125, 0.25, 0.5, 1.0, 2.0)

RESULT_COLUMNS = ("setting_id", "policy", "rho", "repetition", "checkpoint_normalized_budget",
                  "pseudo_regret")
SUMMARY_COLUMNS = ("setting_id", "policy", "rho", "checkpoint_normalized_budget",
                   "mean_pseudo_regret", "stderr_pseudo_regret", "repetitions")


def _num(x) -> str:
    """Shortest round-trip decimal representation."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


class OutputSet:
    """Collects output files in memory so nothing is written on failure."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.files = {}

    def add(self, name: str, text: str):
        self.files[name] = text

    def write(self, manifest: dict):
        manifest = dict(manifest)
        manifest["files"] = {
            name: hashlib.sha256(text.encode("utf-8")).hexdigest()
            for name, text in sorted(self.files.items())
        }
        self.out_dir.mkdir(parents=True, exist_ok=True)
        for name, text in sorted(self.files.items()):
            (self.out_dir / name).write_text(text, encoding="utf-8")
        (self.out_dir / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return sorted(self.files) + ["manifest.json"]


def _policy_cells(pc: PolicyConfig):
    return pc.kind, (_num(pc.rho) if pc.uses_rho else "")


def curve_tables(curve: RegretCurve):
    """Rows of the per-repetition results table and the summary table."""
    results, summary = [], []
    mean, se = curve.mean(), curve.stderr()
    reps = curve.regret.shape[1]
    for p, pc in enumerate(curve.policies):
        kind, rho = _policy_cells(pc)
        for r in range(reps):
            for c, cp in enumerate(curve.checkpoints):
                results.append((curve.setting_id, kind, rho, r, _num(cp),
                                _num(curve.regret[p, r, c])))
        for c, cp in enumerate(curve.checkpoints):
            summary.append((curve.setting_id, kind, rho, _num(cp), _num(mean[p, c]),
                            _num(se[p, c]), reps))
    return results, summary


def _config_digest(configs) -> str:
    canon = json.dumps([asdict(c) for c in configs], sort_keys=True, default=str)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _manifest(command: str, configs) -> dict:
    return {
        "tool": "budgetmab",
        "version": __version__,
        "command": command,
        "config_sha256": _config_digest(configs),
        "runs": [
            {
                "setting_id": c.label,
                "master_seed": c.master_seed,
                "repetitions": c.repetitions,
                "budget_multiplier": c.budget_multiplier,
                "checkpoints": c.checkpoints,
                "policies": [p.label for p in c.policies],
            }
            for c in configs
        ],
    }


def _safe_name(label: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in label)


def _resolve(args, exp):
    out = args.out or os.environ.get("BUDGETMAB_OUT") or exp.output_dir
    workers = args.workers or os.environ.get("BUDGETMAB_WORKERS") or exp.workers
    try:
        workers = int(workers)
    except ValueError:
        raise ConfigError(f"invalid worker count {workers!r}") from None
    if workers < 1:
        raise ConfigError("worker count must be >= 1")
    return Path(out), workers


def _overrides(args) -> dict:
    return {
        "master_seed": args.seed,
        "repetitions": args.reps,
        "budget_multiplier": args.budget_multiplier,
        "checkpoints": args.checkpoints,
    }


def _check_datasets(configs):
    for c in configs:
        if c.dataset is not None and not Path(c.dataset.path).is_file():
            raise DatasetError(f"dataset not found: {c.dataset.path}")


def _experiment_setup(args, policies=None):
    exp = load_experiment(args.config)
    base = Path(args.config).resolve().parent
    configs = build_run_configs(exp, base, _overrides(args), policies)
    out_dir, workers = _resolve(args, exp)
    _check_datasets(configs)
    return configs, out_dir, workers


def cmd_run(args) -> int:
    configs, out_dir, workers = _experiment_setup(args)
    outputs = OutputSet(out_dir)
    for cfg in configs:
        log.info("running %s: %d policies x %d repetitions", cfg.label, len(cfg.policies),
                 cfg.repetitions)
        curve = run_experiment(cfg, workers)
        results, summary = curve_tables(curve)
        name = _safe_name(cfg.label)
        outputs.add(f"{name}_results.csv", _csv_text(RESULT_COLUMNS, results))
        outputs.add(f"{name}_summary.csv", _csv_text(SUMMARY_COLUMNS, summary))
    for name in outputs.write(_manifest("run", configs)):
        print(out_dir / name)
    return EXIT_OK


def sweep_policies(rhos) -> list:
    return [PolicyConfig(kind, rho=float(rho))
            for kind in ("omega_ucb", "omega_star_ucb") for rho in rhos]


def cmd_sweep(args) -> int:
    rhos = args.rho or list(DEFAULT_RHO_GRID)
    if any(r <= 0 for r in rhos):
        raise ConfigError("--rho values must be > 0")
    configs, out_dir, workers = _experiment_setup(args, sweep_policies(rhos))
    outputs = OutputSet(out_dir)
    final_rows = []
    for cfg in configs:
        curve = run_experiment(cfg, workers)
        results, summary = curve_tables(curve)
        name = _safe_name(cfg.label)
        outputs.add(f"{name}_sweep_results.csv", _csv_text(RESULT_COLUMNS, results))
        outputs.add(f"{name}_sweep_summary.csv", _csv_text(SUMMARY_COLUMNS, summary))
        final = curve.final()
        reps = final.shape[1]
        for p, pc in enumerate(curve.policies):
            se = final[p].std(ddof=1) / np.sqrt(reps) if reps > 1 else 0.0
            final_rows.append((curve.setting_id, pc.kind, _num(pc.rho), _num(final[p].mean()),
                               _num(se), reps))
    outputs.add("sweep_final_regret.csv", _csv_text(
        ("setting_id", "policy", "rho", "mean_final_regret", "stderr_final_regret",
         "repetitions"), final_rows))
    for name in outputs.write(_manifest("sweep", configs)):
        print(out_dir / name)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    bad = [p for p in policies if p not in CALIBRATION_POLICIES]
    if bad or not policies:
        raise ConfigError(f"--policies: unknown {bad}; choose from {list(CALIBRATION_POLICIES)}")
    if args.trials < 1 or args.n < 1 or not 0.0 < args.confidence < 1.0:
        raise ConfigError("need --trials >= 1, --n >= 1 and 0 < --confidence < 1")
    rng = seeding.stream(args.seed, seeding.ROLE_CALIBRATION)
    report = calibrate(args.trials, args.n, args.confidence, policies, rng)
    rows = [(p, _num(report.violation_rate[p]), _num(report.looseness[p]),
             _num(report.infinite_share[p]), report.trials, report.samples_per_trial,
             _num(report.confidence), _num(report.z)) for p in report.policies]
    out_dir = Path(args.out or os.environ.get("BUDGETMAB_OUT") or "results")
    outputs = OutputSet(out_dir)
    outputs.add("calibration.csv", _csv_text(
        ("policy", "violation_rate", "looseness", "infinite_ucb_share", "trials",
         "samples_per_trial", "confidence", "z"), rows))
    manifest = {"tool": "budgetmab", "version": __version__, "command": "calibrate",
                "seed": args.seed, "trials": args.trials, "samples_per_trial": args.n,
                "confidence": args.confidence, "policies": policies}
    for name in outputs.write(manifest):
        print(out_dir / name)
    return EXIT_OK


def _parse_means(text: str) -> BanditInstance:
    try:
        pairs = [tuple(float(v) for v in item.split(":")) for item in text.split(",")]
        if any(len(p) != 2 for p in pairs):
            raise ValueError("each arm needs reward:cost")
        return BanditInstance.bernoulli([p[0] for p in pairs], [p[1] for p in pairs], "custom")
    except ValueError as exc:
        raise ConfigError(f"--means: {exc}") from None


def cmd_bound(args) -> int:
    if (args.means is None) == (args.setting is None):
        raise ConfigError("give exactly one of --means or --setting")
    if args.means is not None:
        instance = _parse_means(args.means)
    else:
        try:
            cfg = RunConfig(args.setting, (PolicyConfig("omega_ucb"),), n_arms=args.arms,
                            master_seed=args.seed,
                            budget_multiplier=args.budget_multiplier or 1.0)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if cfg.family.startswith("FB"):
            raise ConfigError("bound supports synthetic settings or explicit --means")
        instance = instance_for_repetition(cfg, args.repetition)
    if args.budget is not None:
        budget = args.budget
    elif args.budget_multiplier is not None:
        budget = args.budget_multiplier * float(instance.mu_c.min())
    else:
        raise ConfigError("give --budget or --budget-multiplier")
    if not budget > 0 or not args.rho > 0:
        raise ConfigError("budget and rho must be > 0")
    report = regret_bound(instance, budget, args.rho)
    arm_rows = [(k, _num(instance.mu_r[k]), _num(instance.mu_c[k]), _num(report.gaps[k]),
                 _num(report.deltas[k]), _num(report.n_stars[k]))
                for k in range(instance.n_arms)]
    summary_rows = [
        ("setting_id", instance.setting_id), ("budget", _num(report.budget)),
        ("rho", _num(report.rho)), ("tau_b", report.tau_b), ("xi", _num(report.xi)),
        ("best_arm", report.best_arm), ("best_ratio_term", _num(report.best_ratio_term)),
        ("bound_total_excluding_X(B)", _num(report.bound_total)),
        ("asymptotic_class", report.asymptotic_class),
    ]
    out_dir = Path(args.out or os.environ.get("BUDGETMAB_OUT") or "results")
    outputs = OutputSet(out_dir)
    outputs.add("bound_arms.csv", _csv_text(("arm", "mu_r", "mu_c", "gap", "delta", "n_star"),
                                            arm_rows))
    outputs.add("bound_summary.csv", _csv_text(("quantity", "value"), summary_rows))
    manifest = {"tool": "budgetmab", "version": __version__, "command": "bound",
                "setting": args.setting, "means": args.means, "seed": args.seed,
                "repetition": args.repetition}
    for name in outputs.write(manifest):
        print(out_dir / name)
    return EXIT_OK


def _add_experiment_flags(p):
    p.add_argument("config", help="experiment file (YAML)")
    p.add_argument("--seed", type=int, help="override every run's master_seed")
    p.add_argument("--reps", type=int, help="override every run's repetitions")
    p.add_argument("--budget-multiplier", type=float, help="budget as a multiple of min cost")
    p.add_argument("--checkpoints", type=int, help="number of log-spaced checkpoints")
    p.add_argument("--workers", type=int, help="worker processes for repetitions")
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="budgetmab",
                                     description="Budgeted multi-armed bandit experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment file")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="rho sensitivity sweep of omega-UCB and omega*-UCB")
    _add_experiment_flags(p)
    p.add_argument("--rho", type=float, nargs="+", help="rho grid (default 1/8 1/4 1/2 1 2)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("calibrate", help="violation rate and looseness of ratio UCBs")
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--n", type=int, default=100, help="samples per trial")
    p.add_argument("--confidence", type=float, default=0.99)
    p.add_argument("--policies", default=",".join(DEFAULT_CALIBRATION_POLICIES),
                   help=f"comma-separated subset of {','.join(CALIBRATION_POLICIES)}")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("bound", help="worst-case regret bound of omega-UCB")
    p.add_argument("--means", help="explicit arms as reward:cost,reward:cost,...")
    p.add_argument("--setting", help="synthetic setting id, e.g. S-Br-10")
    p.add_argument("--arms", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repetition", type=int, default=0)
    p.add_argument("--budget", type=float)
    p.add_argument("--budget-multiplier", type=float)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bound)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DatasetError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

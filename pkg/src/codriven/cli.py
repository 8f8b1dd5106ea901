"""Command-line front end.

    codriven validate --config run.toml
    codriven run --config run.toml [--out DIR] [--repeat N] [--resume]
    codriven report --out DIR

Output layout under ``out``::

    config.json            resolved configuration
    run_000/report.json    one report per repeat (deterministic payload)
    run_000/meta.json      wall time and library versions
    run_000/history.csv    learning history
    run_000/scatter.csv    training points: y, y_p, y_hat, sigma
    run_000/checkpoint/    learner state, used by --resume
    summary.csv            quartiles across repeats
    summary.json
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from .benchmarks import REGISTRY, get_problem
from .errors import CodrivenError, ConfigError, ZeroOverlapError
from .estimator import CorrectionConfig, EstimatorConfig, estimate_rare_event
from .learner import LearnerConfig, load_checkpoint
from .sampler import SmcConfig
from .stochastic_input import derive_seed

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("codriven")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OVERLAP = 0, 2, 3, 4

_TOP_KEYS = {"problem", "seed", "repeat", "out", "union", "options",
             "learner", "smc", "correction"}
_SECTIONS = {
    "learner": {"n0", "delta", "eta", "k_consec", "max_iters", "n_candidates", "calib_restarts"},
    "smc": {f.name for f in fields(SmcConfig) if f.name != "seed"},
    "correction": {f.name for f in fields(CorrectionConfig) if f.name != "seed"},
}


class RunConfig:
    """Validated run configuration loaded from a TOML file."""

    def __init__(self, problem, seed, repeat=1, out="runs", union=False, options=None,
                 learner=None, smc=None, correction=None):
        self.problem = problem
        self.seed = seed
        self.repeat = repeat
        self.out = out
        self.union = union
        self.options = options if options is not None else {}
        self.learner = dict(learner or {})
        self.smc = dict(smc or {})
        self.correction = dict(correction or {})
        self._check()

    def _check(self):
        errs = []
        if self.problem not in REGISTRY:
            errs.append(f"problem: unknown {self.problem!r}, choose from {sorted(REGISTRY)}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            errs.append("seed: required non-negative integer")
        if isinstance(self.repeat, bool) or not isinstance(self.repeat, int) or self.repeat < 1:
            errs.append("repeat: must be a positive integer")
        if not isinstance(self.union, bool):
            errs.append("union: must be true or false")
        for name, allowed in _SECTIONS.items():
            for key in set(getattr(self, name)) - allowed:
                errs.append(f"{name}.{key}: unknown key")
        try:
            smc = SmcConfig(**self.smc)
        except (TypeError, ValueError) as exc:
            errs.append(f"smc: {exc}")
            smc = SmcConfig()
        try:
            LearnerConfig(**self.learner, smc=smc)
        except (TypeError, ValueError) as exc:
            errs.append(f"learner: {exc}")
        try:
            CorrectionConfig(**self.correction)
        except (TypeError, ValueError) as exc:
            errs.append(f"correction: {exc}")
        if self.problem in REGISTRY and not isinstance(self.options, dict):
            errs.append("options: must be a table")
        elif self.problem in REGISTRY:
            try:
                get_problem(self.problem, **self.options)
            except (TypeError, ValueError, CodrivenError) as exc:
                errs.append(f"options: {exc}")
        if errs:
            raise ConfigError("invalid configuration:\n  " + "\n  ".join(errs))

    @classmethod
    def from_file(cls, path):
        path = Path(path)
        try:
            data = tomllib.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        unknown = set(data) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
        if "problem" not in data or "seed" not in data:
            raise ConfigError(f"{path}: 'problem' and 'seed' are required")
        return cls(**data)

    def to_dict(self):
        return {k: getattr(self, k) for k in sorted(_TOP_KEYS)}

    def estimator_config(self, run_index, checkpoint_dir=None):
        seed = derive_seed(self.seed, run_index)
        smc = SmcConfig(**self.smc)
        learner = LearnerConfig(**self.learner, smc=smc, checkpoint_dir=checkpoint_dir)
        return EstimatorConfig(learner=learner, smc=smc,
                               correction=CorrectionConfig(**self.correction),
                               union=self.union, seed=seed)


# -- outputs --------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None if np.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def _write_json(path, payload):
    Path(path).write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def write_run(directory, report, elapsed):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    d = report.to_dict()
    _write_json(directory / "report.json", d)
    _write_json(directory / "meta.json", {"elapsed_s": elapsed, "numpy": np.__version__})
    hist = d["history"]
    _write_csv(directory / "history.csv",
               ["iteration", "n_train", "rho", "p_mean", "p_plus", "p_minus", "p_delta"],
               [[h["iteration"], h["n_train"], h["rho"], h["p_mean"], h["p_plus"],
                 h["p_minus"], h["p_delta"]] for h in hist])
    sc = d["scatter"]
    _write_csv(directory / "scatter.csv", ["y", "y_p", "y_hat", "sigma"],
               zip(sc["y"], sc["y_p"], sc["y_hat"], sc["sigma"]))


SUMMARY_FIELDS = ("p_surrogate", "p_plus", "p_minus", "c_p", "p_final", "rho",
                  "n_added", "original_calls_learning", "original_calls_correction")


def _summary_value(report, key):
    if key == "c_p":
        return report["correction"]["c_p"]
    return report[key]


def aggregate(out):
    """Quartile table over every ``run_*/report.json`` below ``out``."""
    out = Path(out)
    reports = [json.loads(p.read_text()) for p in sorted(out.glob("run_*/report.json"))]
    if not reports:
        raise FileNotFoundError(f"no run reports under {out}")
    table = {}
    for key in SUMMARY_FIELDS:
        v = np.array([_summary_value(r, key) for r in reports], dtype=float)
        q1, med, q3 = np.percentile(v, [25, 50, 75])
        table[key] = {"first_quartile": q1, "median": med, "third_quartile": q3}
    summary = {"n_runs": len(reports), "problem": reports[0]["problem"], "quantities": table}
    _write_json(out / "summary.json", summary)
    _write_csv(out / "summary.csv", ["quantity", "first_quartile", "median", "third_quartile"],
               [[k, t["first_quartile"], t["median"], t["third_quartile"]] for k, t in table.items()])
    return summary


def format_table(summary):
    lines = [f"{summary['problem']}: {summary['n_runs']} runs",
             f"{'quantity':<26}{'first quartile':>16}{'median':>16}{'third quartile':>16}"]
    for k, t in summary["quantities"].items():
        lines.append(f"{k:<26}{t['first_quartile']:>16.4g}{t['median']:>16.4g}"
                     f"{t['third_quartile']:>16.4g}")
    return "\n".join(lines)


# -- commands -------------------------------------------------------------------

def run_one(cfg, index, out, resume=False):
    """Execute repeat ``index``; returns its report payload as a dict."""
    rdir = Path(out) / f"run_{index:03d}"
    if resume and (rdir / "report.json").exists():
        log.info("run %d already complete, skipping", index)
        return json.loads((rdir / "report.json").read_text())
    ckpt = rdir / "checkpoint"
    state = load_checkpoint(ckpt) if resume and (ckpt / "state.json").exists() else None
    ecfg = cfg.estimator_config(index, checkpoint_dir=str(ckpt))
    pair = get_problem(cfg.problem, **cfg.options)
    t0 = time.perf_counter()
    report = estimate_rare_event(pair, ecfg, state=state)
    write_run(rdir, report, time.perf_counter() - t0)
    return report.to_dict()


def cmd_validate(args):
    RunConfig.from_file(args.config)
    print(f"{args.config}: ok")
    return EXIT_OK


def cmd_run(args):
    cfg = RunConfig.from_file(args.config)
    if args.repeat is not None:
        if args.repeat < 1:
            raise ConfigError("--repeat must be positive")
        cfg.repeat = args.repeat
    out = Path(args.out or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "config.json", cfg.to_dict())
    for i in range(cfg.repeat):
        rep = run_one(cfg, i, out, resume=args.resume)
        log.info("run %d: P_hat=%.3e c_P=%.3f P=%.3e", i, rep["p_surrogate"],
                 rep["correction"]["c_p"], rep["p_final"])
    print(format_table(aggregate(out)))
    return EXIT_OK


def cmd_report(args):
    try:
        summary = aggregate(args.out)
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from None
    print(format_table(summary))
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="codriven", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    v = sub.add_parser("validate", help="check a configuration file")
    v.add_argument("--config", required=True)
    v.set_defaults(func=cmd_validate)
    r = sub.add_parser("run", help="run repeated rare-event estimates")
    r.add_argument("--config", required=True)
    r.add_argument("--out")
    r.add_argument("--repeat", type=int)
    r.add_argument("--resume", action="store_true", help="continue from existing checkpoints")
    r.set_defaults(func=cmd_run)
    a = sub.add_parser("report", help="re-aggregate quartiles from run directories")
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ZeroOverlapError as exc:
        print(f"correction failed: {exc}", file=sys.stderr)
        return EXIT_OVERLAP
    except (CodrivenError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

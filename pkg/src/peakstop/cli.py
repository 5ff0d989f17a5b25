"""Batch front door: JSON configs in, JSON/CSV/SVG reports out.

One config file describes one run: a model (lattice walk or Levy triplet),
a reward, a horizon and a task.  Everything stochastic flows from a single
64-bit root seed through named substreams, so rerunning a config reproduces
every output byte for byte.

Exit codes: 0 all assertions passed, 1 an assertion failed, 2 config or
usage error, 3 a resource guard tripped.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from . import duality, lattice, levy, montecarlo, rewards, rules, svgplot
from .errors import PreconditionError, ResourceLimitError

TASKS = ("classify", "solve", "verify", "suite", "simulate", "battery", "reversal")


class ConfigError(ValueError):
    """Schema violation; the message carries the offending config path."""


def _fail(path: str, msg: str):
    raise ConfigError(f"{path}: {msg}")


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------


def parse_reward(obj, path="reward") -> rewards.RewardSpec:
    if not isinstance(obj, dict) or "kind" not in obj:
        _fail(path, "expected an object with a 'kind' field")
    kind = obj["kind"]
    try:
        if kind == "indicator0":
            return rewards.Indicator0()
        if kind == "exponential":
            return rewards.Exponential(sigma=float(obj.get("sigma", 1.0)))
        if kind == "neg_power":
            return rewards.NegPower(alpha=float(obj.get("alpha", 1.0)))
        if kind == "linear":
            return rewards.Linear(slope=float(obj.get("slope", -1.0)))
        if kind == "piecewise_linear":
            knots = tuple((float(x), float(v)) for x, v in obj["knots"])
            return rewards.PiecewiseLinear(knots=knots)
    except (ValueError, KeyError, TypeError) as exc:
        _fail(path, str(exc))
    _fail(path, f"unknown reward kind {kind!r}")


def _as_mass(v):
    if isinstance(v, str):
        return Fraction(v)
    if isinstance(v, int):
        return Fraction(v)
    return float(v)


def parse_lattice(obj, path="model.lattice") -> lattice.LatticeStepDistribution:
    try:
        atoms = tuple((int(k), _as_mass(p)) for k, p in obj["atoms"])
        h = obj.get("h", 1.0)
        h = _as_mass(h) if isinstance(h, (str, int)) else float(h)
        return lattice.LatticeStepDistribution(h, atoms)
    except ConfigError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        _fail(path, str(exc))


def _endpoint(v, side: str, path: str) -> float:
    if v is None:
        return math.inf if side == "hi" else -math.inf
    if isinstance(v, str):
        if v in ("inf", "+inf"):
            return math.inf
        if v == "-inf":
            return -math.inf
        _fail(path, f"bad interval endpoint {v!r}")
    return float(v)


def parse_triplet(obj, path="model.levy") -> levy.LevyTriplet:
    try:
        nu_obj = obj.get("nu", {}) or {}
        atoms = tuple(
            levy.MeasureAtom(float(y), float(m)) for y, m in nu_obj.get("atoms", [])
        )
        pieces = []
        for i, p in enumerate(nu_obj.get("pieces", [])):
            ppath = f"{path}.nu.pieces[{i}]"
            lo = _endpoint(p["interval"][0], "lo", ppath)
            hi = _endpoint(p["interval"][1], "hi", ppath)
            form = p.get("form", "power")
            if form == "power":
                pieces.append(levy.PowerLawPiece(float(p["c"]), float(p["alpha"]), lo, hi))
            elif form == "constant":
                pieces.append(levy.ConstantPiece(float(p["c"]), lo, hi))
            else:
                _fail(ppath, f"unknown piece form {form!r}")
        return levy.LevyTriplet(
            gamma=float(obj.get("gamma", 0.0)),
            sigma2=float(obj.get("sigma2", 0.0)),
            nu=levy.LevyMeasure(atoms, tuple(pieces)),
        )
    except ConfigError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        _fail(path, str(exc))


def parse_rule(obj, path="rules[]") -> rules.StoppingRuleSpec:
    if not isinstance(obj, dict) or "kind" not in obj:
        _fail(path, "expected an object with a 'kind' field")
    kind = obj["kind"]
    try:
        if kind == "constant":
            return rules.ConstantRule(float(obj["t"]))
        if kind == "first_passage":
            return rules.FirstPassageAbove(float(obj["level"]))
        if kind == "drawdown":
            return rules.DrawdownTrigger(float(obj["threshold"]))
        if kind == "stop_at_new_max":
            return rules.StopAtNewMax(float(obj.get("after", 0.0)))
        if kind == "randomized_threshold":
            return rules.RandomizedThreshold(float(obj["lo"]), float(obj["hi"]))
    except (ValueError, KeyError, TypeError) as exc:
        _fail(path, str(exc))
    _fail(path, f"unknown rule kind {kind!r}")


def parse_scheme(obj, path="scheme") -> levy.SimScheme:
    try:
        return levy.SimScheme(
            mode=obj.get("mode", "auto"),
            dt=float(obj.get("dt", 0.01)),
            level=int(obj.get("level", 4)),
            eps_seed=float(obj.get("eps_seed", 0.5)),
            bridge_max_refinement=bool(obj.get("bridge_max_refinement", False)),
        )
    except (ValueError, TypeError) as exc:
        _fail(path, str(exc))


@dataclass
class ExperimentConfig:
    task: str
    model_kind: str                # "lattice" | "levy"
    model: object
    reward: rewards.RewardSpec
    horizon: float
    seed: Optional[int]
    paths: int
    scheme: levy.SimScheme
    rule_list: list
    z_levels: list[int]
    reversal_n: int
    dump_paths: int


def parse_config(raw: dict) -> ExperimentConfig:
    task = raw.get("task")
    if task not in TASKS:
        _fail("task", f"must be one of {TASKS}, got {task!r}")
    model_obj = raw.get("model")
    if not isinstance(model_obj, dict) or len(model_obj) != 1:
        _fail("model", "expected exactly one of {'lattice': ...} or {'levy': ...}")
    model_kind = next(iter(model_obj))
    if model_kind == "lattice":
        model = parse_lattice(model_obj["lattice"])
    elif model_kind == "levy":
        model = parse_triplet(model_obj["levy"])
    else:
        _fail("model", f"unknown model kind {model_kind!r}")

    if task == "solve" and model_kind != "lattice":
        _fail("task", "exact solver requires a lattice model")
    if task in ("verify", "suite") and model_kind != "lattice":
        _fail("task", f"task {task!r} requires a lattice model")

    reward = parse_reward(raw.get("reward", {"kind": "indicator0"}))
    horizon = raw.get("horizon")
    if horizon is None or not float(horizon) > 0:
        _fail("horizon", f"must be a positive number, got {horizon!r}")
    horizon = float(horizon)
    if model_kind == "lattice":
        if horizon != int(horizon):
            _fail("horizon", "lattice horizons are integer step counts")
        horizon = int(horizon)

    seed = raw.get("seed")
    stochastic = task in ("simulate", "battery") or (
        task == "reversal" and model_kind == "levy"
    )
    if stochastic and seed is None:
        _fail("seed", "stochastic tasks need an explicit seed")
    rule_list = [
        parse_rule(r, f"rules[{i}]") for i, r in enumerate(raw.get("rules", []))
    ]
    return ExperimentConfig(
        task=task,
        model_kind=model_kind,
        model=model,
        reward=reward,
        horizon=horizon,
        seed=None if seed is None else int(seed),
        paths=int(raw.get("paths", 100_000)),
        scheme=parse_scheme(raw.get("scheme", {})),
        rule_list=rule_list,
        z_levels=[int(z) for z in raw.get("z_levels", range(0, 13))],
        reversal_n=int(raw.get("reversal_n", 8)),
        dump_paths=int(raw.get("dump_paths", 5)),
    )


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return parse_config(raw)


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _write_json(path: str, obj: dict) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path: str, header: list[str], row_iter) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in row_iter:
            fh.write(",".join(_csv_cell(c) for c in row) + "\n")


def _csv_cell(c) -> str:
    if isinstance(c, bool):
        return "true" if c else "false"
    if isinstance(c, float):
        return repr(c)
    return str(c)


REQUIRED_KEYS = {
    "classify": ("task", "passed", "classification"),
    "solve": ("task", "passed", "value", "states", "stop_states"),
    "verify": ("task", "passed", "report"),
    "suite": ("task", "passed", "dominance", "reversal"),
    "simulate": ("task", "passed", "paths"),
    "battery": ("task", "passed", "battery"),
    "reversal": ("task", "passed", "report"),
}


def validate_report(report: dict) -> None:
    """Round-trip schema check on an emitted report."""
    task = report.get("task")
    if task not in REQUIRED_KEYS:
        raise ConfigError(f"report.task: unknown task {task!r}")
    for key in REQUIRED_KEYS[task]:
        if key not in report:
            raise ConfigError(f"report.{key}: missing for task {task!r}")
    if not isinstance(report.get("passed"), bool):
        raise ConfigError("report.passed: must be a boolean")


# ---------------------------------------------------------------------------
# tasks
# ---------------------------------------------------------------------------


def _task_classify(cfg: ExperimentConfig, out: str) -> dict:
    if cfg.model_kind == "lattice":
        skew = lattice.classify_skew(cfg.model)
        cls = {"kind": "lattice", "skew": skew.value}
    else:
        cls = {"kind": "levy", **levy.classify(cfg.model).to_dict()}
    return {"task": "classify", "passed": True, "classification": cls}


def _task_solve(cfg: ExperimentConfig, out: str) -> dict:
    problem = lattice.PredictionProblem(cfg.model, cfg.horizon, cfg.reward)
    sol = lattice.snell_solve(problem)
    _write_csv(
        os.path.join(out, "value_table.csv"),
        ["n", "z", "V", "stop"],
        (
            (n, z, float(v), (n, z) in sol.stop_region)
            for (n, z), v in sorted(sol.V.items())
        ),
    )
    svgplot.value_heatmap(
        {k: float(v) for k, v in sol.V.items()},
        os.path.join(out, "value_heatmap.svg"),
    )
    svgplot.stop_region_raster(
        sol.stop_region, sol.V.keys(), os.path.join(out, "stop_region.svg")
    )
    return {
        "task": "solve",
        "passed": True,
        "value": float(sol.value),
        "states": len(sol.V),
        "stop_states": len(sol.stop_region),
        "policy": sol.policy,
    }


def _task_verify(cfg: ExperimentConfig, out: str) -> dict:
    problem = lattice.PredictionProblem(cfg.model, cfg.horizon, cfg.reward)
    rep = lattice.verify_bang_bang(problem)
    return {"task": "verify", "passed": rep.passed, "report": rep.to_dict()}


def _task_suite(cfg: ExperimentConfig, out: str) -> dict:
    dom = lattice.dominance_report(cfg.model, cfg.reward, cfg.horizon, cfg.z_levels)
    _write_csv(
        os.path.join(out, "dominance.csv"),
        ["k", "z", "G", "D", "slack"],
        dom.to_rows(),
    )
    reversal = [
        duality.time_reversal_check_exact(cfg.model, n).to_dict()
        for n in range(cfg.reversal_n + 1)
    ]
    skew = lattice.classify_skew(cfg.model)
    if skew in (lattice.SkewClass.RIGHT_SKEW, lattice.SkewClass.SYMMETRIC):
        law = duality.dominating_coupling(cfg.model)
        _write_csv(
            os.path.join(out, "coupling.csv"),
            ["step", "dual_step", "p"],
            ((k, kd, float(p)) for k, kd, p in law.joint_atoms),
        )
    passed = dom.passed and all(r["passed"] for r in reversal)
    return {
        "task": "suite",
        "passed": passed,
        "dominance": {"min_slack": dom.min_slack, "passed": dom.passed},
        "reversal": reversal,
    }


def _task_simulate(cfg: ExperimentConfig, out: str) -> dict:
    n_dump = min(cfg.dump_paths, cfg.paths)
    rows = []
    first = None
    if cfg.model_kind == "levy":
        paths = levy.simulate_paths(
            cfg.model, cfg.horizon, cfg.scheme, n_dump, cfg.seed
        )
        for pid, p in enumerate(paths):
            rows.extend(
                (pid, float(t), float(x), float(m))
                for t, x, m in zip(p.times, p.values, p.running_max)
            )
        first = paths[0]
        calib = levy.empirical_cf_check(
            cfg.model, cfg.horizon, cfg.scheme, cfg.paths, cfg.seed
        )
        passed = calib.passed
        calib_dict = calib.to_dict()
    else:
        import numpy as np

        for pid, (times, x) in enumerate(
            montecarlo._lattice_chunks(cfg.model, cfg.horizon, n_dump, cfg.seed)
        ):
            for r in range(x.shape[0]):
                m = np.maximum.accumulate(x[r])
                rows.extend(
                    (pid * x.shape[0] + r, float(t), float(v), float(mm))
                    for t, v, mm in zip(times, x[r], m)
                )
        passed = True
        calib_dict = None
    _write_csv(os.path.join(out, "paths.csv"), ["path", "t", "X", "M"], rows)
    if first is not None:
        svgplot.path_plot(
            first.times, first.values, first.running_max,
            os.path.join(out, "path.svg"),
        )
    return {
        "task": "simulate",
        "passed": passed,
        "paths": cfg.paths,
        "dumped": n_dump,
        "calibration": calib_dict,
    }


def _task_battery(cfg: ExperimentConfig, out: str) -> dict:
    rep = montecarlo.bangbang_battery(
        cfg.model,
        cfg.reward,
        cfg.horizon,
        rule_list=cfg.rule_list or None,
        count=cfg.paths,
        seed=cfg.seed,
        scheme=cfg.scheme,
    )
    _write_csv(
        os.path.join(out, "battery.csv"),
        ["rule", "mean_diff", "se_diff", "beaten"],
        ((r.rule, r.mean_diff, r.se_diff, r.beaten) for r in rep.rows),
    )
    svgplot.ci_bars(
        [r.to_dict() for r in rep.rows], os.path.join(out, "battery.svg")
    )
    return {"task": "battery", "passed": rep.passed, "battery": rep.to_dict()}


def _task_reversal(cfg: ExperimentConfig, out: str) -> dict:
    if cfg.model_kind == "lattice":
        rep = duality.time_reversal_check_exact(cfg.model, cfg.reversal_n)
    else:
        rep = duality.time_reversal_check_mc(
            cfg.model, cfg.horizon, cfg.paths, cfg.seed, cfg.scheme
        )
    return {"task": "reversal", "passed": rep.passed, "report": rep.to_dict()}


_TASK_FNS = {
    "classify": _task_classify,
    "solve": _task_solve,
    "verify": _task_verify,
    "suite": _task_suite,
    "simulate": _task_simulate,
    "battery": _task_battery,
    "reversal": _task_reversal,
}


def run(cfg: ExperimentConfig, out_dir: str, quiet: bool = False) -> int:
    """Execute one config; write reports; return the process exit code."""
    os.makedirs(out_dir, exist_ok=True)
    try:
        report = _TASK_FNS[cfg.task](cfg, out_dir)
    except ConfigError:
        raise
    except ResourceLimitError as exc:
        if not quiet:
            print(f"resource guard: {exc}", file=sys.stderr)
        return 3
    except PreconditionError as exc:
        raise ConfigError(f"task {cfg.task!r}: {exc}") from exc
    report["seed"] = cfg.seed
    validate_report(report)
    _write_json(os.path.join(out_dir, "report.json"), report)
    if not quiet:
        print(f"{cfg.task}: {'pass' if report['passed'] else 'FAIL'}")
        if not report["passed"]:
            print(json.dumps(report, indent=2, sort_keys=True))
    return 0 if report["passed"] else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="peakstop",
        description="optimal prediction of the running maximum: exact solvers and MC batteries",
    )
    sub = parser.add_subparsers(dest="task", required=True)
    for task in TASKS:
        p = sub.add_parser(task)
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--paths", type=int, default=None, help="override config path count")
        p.add_argument("--quiet", action="store_true")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if cfg.task != args.task:
            raise ConfigError(
                f"task: config says {cfg.task!r} but subcommand is {args.task!r}"
            )
        if args.seed is not None:
            cfg.seed = args.seed
        if args.paths is not None:
            cfg.paths = args.paths
        return run(cfg, args.out, args.quiet)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ResourceLimitError as exc:
        print(f"resource guard: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

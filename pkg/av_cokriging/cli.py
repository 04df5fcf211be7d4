# av_cokriging/cli.py
# Command-line entry: fit / predict / estimate-prob / design-next / reproduce /
# export-scenario.
#
# Usage:
#   python run_cokriging.py fit builtin:exp1 --out model.json
#   python run_cokriging.py predict model.json --grid 201 --level 3 --out pred.csv
#   python run_cokriging.py estimate-prob model.json --env builtin:exp1 --gamma 0.8
#   python run_cokriging.py design-next model.json --candidates cand.csv --gamma 0.8
#   python run_cokriging.py reproduce exp1 --seed 7 --out exp1.json
#   python run_cokriging.py reproduce exp2 --runs 20
#   python run_cokriging.py export-scenario exp2 --seed 3 --out bundles/exp2
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from av_cokriging.config import RunConfig, load_config
from av_cokriging.dataset import as_points, point_columns, read_points_csv
from av_cokriging.doe import CandidateSet, CostModel, select_next
from av_cokriging.errors import EXIT_OK, CoKrigingError, InvalidArgumentError
from av_cokriging.experiments import EXPERIMENTS, reproduce_exp1, reproduce_exp2
from av_cokriging.level_sources import BUILTIN_PREFIX, load_bundle, write_bundle
from av_cokriging.multifidelity import MultiFidelityModel, fit_multifidelity, mf_interval
from av_cokriging.rare_event import (
    DIRECTIONS,
    EXCEED,
    EnvironmentDistribution,
    EventSpec,
    combined_std_error,
    crude_mc_oracle,
    event_probability,
)
from av_cokriging.reports import (
    ensure_dir,
    export_csv,
    export_json,
    render_choice,
    render_estimate,
    render_exp1,
    render_exp2,
    render_fit,
)
from av_cokriging.scenarios import SplitSpec, build_lane_change_split, builtin_truth, design_1d

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(name)s %(asctime)s %(levelname)s %(message)s"
GRID_MAX_POINTS = 1_000_000


def _parse_floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise InvalidArgumentError(f"expected a comma-separated list of numbers, got {text!r}") from e


def _parse_ints(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise InvalidArgumentError(f"expected a comma-separated list of integers, got {text!r}") from e


def load_env(spec: Optional[str], model: MultiFidelityModel) -> EnvironmentDistribution:
    """--env: a JSON document, `builtin:<name>`, or (absent) uniform over the model's bounds."""
    if spec is None:
        b = model.bounds
        return EnvironmentDistribution(b.lower, b.upper, "uniform over the design space")
    if spec.startswith(BUILTIN_PREFIX):
        env = builtin_truth(spec[len(BUILTIN_PREFIX):])[1]
    else:
        try:
            doc = json.loads(Path(spec).read_text(encoding="utf-8"))
        except OSError as e:
            raise InvalidArgumentError(f"cannot read environment config {spec}: {e}") from e
        except json.JSONDecodeError as e:
            raise InvalidArgumentError(f"environment config {spec} is not valid JSON: {e}") from e
        if not isinstance(doc, dict):
            raise InvalidArgumentError(f"environment config {spec} must hold a JSON object")
        env = EnvironmentDistribution.from_dict(doc)
    if env.dim != model.dim:
        raise InvalidArgumentError(f"environment has {env.dim} coordinates, model has {model.dim}")
    return env


def grid_points(model: MultiFidelityModel, n: int) -> np.ndarray:
    """n evenly spaced values per coordinate across the model bounds, first coordinate slowest."""
    if n < 1:
        raise InvalidArgumentError(f"--grid must be >= 1, got {n}")
    if n ** model.dim > GRID_MAX_POINTS:
        raise InvalidArgumentError(f"--grid {n} gives {n ** model.dim} points in {model.dim}D; too many")
    unit = np.linspace(0.0, 1.0, n)
    mesh = np.meshgrid(*([unit] * model.dim), indexing="ij")
    return model.bounds.denormalize(np.column_stack([m.ravel() for m in mesh]))


def read_points(path: str, dim: int) -> np.ndarray:
    df = read_points_csv(path)
    cols = point_columns(df)
    try:
        X = df[cols].to_numpy(dtype=float)
    except ValueError as e:
        raise InvalidArgumentError(f"{path}: non-numeric values: {e}") from e
    if len(cols) != dim:
        raise InvalidArgumentError(f"{path}: {len(cols)} coordinates, model has {dim}")
    return as_points(X, dim)


def _emit(text: str, out: Optional[str], payload) -> None:
    print(text)
    if out:
        export_json(out, payload)
        logger.info("wrote %s", out)


# ----------------------------
# Subcommands
# ----------------------------
def cmd_fit(args, config: RunConfig) -> int:
    data = load_bundle(args.bundle, seed=config.seed, config=config.lane_change)
    model = fit_multifidelity(data, config.fit)
    print(render_fit(model, args.bundle))
    if args.out:
        model.save(args.out)
        logger.info("wrote model %s", args.out)
    return EXIT_OK


def cmd_predict(args, config: RunConfig) -> int:
    model = MultiFidelityModel.load(args.model)
    t = model.check_level(args.level if args.level is not None else model.T)
    if (args.points is None) == (args.grid is None):
        raise InvalidArgumentError("give exactly one of --points or --grid")
    X = read_points(args.points, model.dim) if args.points else grid_points(model, args.grid)

    mean, var = model.predict(X, t)
    df = pd.DataFrame({f"x{i + 1}": X[:, i] for i in range(model.dim)})
    df["mean"] = mean
    df["variance"] = var
    if args.band is not None:
        lower, upper = mf_interval(model, X, t, args.band)
        df["lower"] = lower
        df["upper"] = upper

    if args.out:
        export_csv(args.out, df)
        print(f"Wrote {len(df)} predictions (level {t}) to {args.out}")
    else:
        sys.stdout.write(df.to_csv(index=False, float_format="%.17g"))
    return EXIT_OK


def cmd_estimate_prob(args, config: RunConfig) -> int:
    model = MultiFidelityModel.load(args.model)
    t = model.check_level(args.level) if args.level is not None else None
    env = load_env(args.env, model)
    spec = EventSpec(args.gamma, args.direction)
    n_mc = args.n_mc or config.monte_carlo.n_mc

    est = event_probability(model, env, spec, n_mc, config.seed, t)
    payload = est.to_dict()
    text = render_estimate(payload)
    if args.oracle:
        fn, _ = builtin_truth(args.oracle)
        ref = crude_mc_oracle(fn, env, spec, n_mc, config.seed)
        se = combined_std_error(est, ref)
        payload = {
            "estimate": est.to_dict(),
            "oracle": ref.to_dict(),
            "combined_std_error": se,
            "within_3se": bool(abs(est.value - ref.value) <= 3.0 * se),
        }
        text += "\n\n" + render_estimate(ref.to_dict(), "CRUDE MONTE CARLO (" + args.oracle + ")")
        text += f"\n\n|difference| = {abs(est.value - ref.value):.6g}  (3 SE = {3.0 * se:.6g})"
    _emit(text, args.out, payload)
    return EXIT_OK


def cmd_design_next(args, config: RunConfig) -> int:
    model = MultiFidelityModel.load(args.model)
    env = load_env(args.env, model)
    spec = EventSpec(args.gamma, args.direction)
    levels = _parse_ints(args.levels) if args.levels else list(range(1, model.T + 1))
    candidates = CandidateSet(read_points(args.candidates, model.dim), tuple(levels))

    if args.costs:
        cost = CostModel(_parse_floats(args.costs))
    elif config.costs:
        cost = CostModel(config.costs)
    else:
        cost = CostModel.default(model.T)

    mc = config.monte_carlo
    choice, table = select_next(
        model,
        env,
        spec,
        candidates,
        cost,
        n_y=args.n_y or mc.n_y,
        n_mc=args.n_mc or mc.n_mc_ig,
        seed=config.seed,
    )
    _emit(render_choice(choice.to_dict(), table), args.out, choice.to_dict())
    if args.table:
        export_csv(args.table, table)
        logger.info("wrote candidate table %s", args.table)
    return EXIT_OK


def cmd_reproduce(args, config: RunConfig) -> int:
    if args.experiment == "exp1":
        report = reproduce_exp1(config.seed, config.fit)
        text = render_exp1(report)
    else:
        report = reproduce_exp2(config.seed, config, runs=args.runs)
        text = render_exp2(report)
    _emit(text, args.out, report)
    return EXIT_OK


def cmd_export_scenario(args, config: RunConfig) -> int:
    ensure_dir(args.out)
    if args.scenario == "exp1":
        mpath = write_bundle(design_1d(), args.out)
    else:
        split = build_lane_change_split(SplitSpec.from_config(config.seed, config.lane_change), config.lane_change)
        mpath = write_bundle(split.data, args.out, extra={"test.csv": split.test})
    print(f"Wrote {args.scenario} bundle to {mpath}")
    return EXIT_OK


COMMANDS = {
    "fit": cmd_fit,
    "predict": cmd_predict,
    "estimate-prob": cmd_estimate_prob,
    "design-next": cmd_design_next,
    "reproduce": cmd_reproduce,
    "export-scenario": cmd_export_scenario,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config (seed, fit, monte_carlo, lane_change, costs).")
    common.add_argument("--seed", type=int, help="Override the config seed.")
    common.add_argument("--out", help="Output file (or directory for export-scenario).")
    common.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    ap = argparse.ArgumentParser(prog="av_cokriging", description="Multi-fidelity co-Kriging toolkit.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", parents=[common], help="Fit a co-Kriging model to a nested bundle.")
    p.add_argument("bundle", help="Bundle directory, manifest.json, or builtin:exp1 / builtin:exp2.")

    p = sub.add_parser("predict", parents=[common], help="Posterior mean/variance at points.")
    p.add_argument("model")
    p.add_argument("--points", help="CSV with columns x1..xd.")
    p.add_argument("--grid", type=int, help="Evenly spaced values per coordinate over the model bounds.")
    p.add_argument("--level", type=int, help="Fidelity level t (default: top).")
    p.add_argument("--band", type=float, nargs="?", const=0.95, help="Add lower/upper columns (coverage, default 0.95).")

    def event_args(p):
        p.add_argument("--env", help="Environment JSON or builtin:exp1 / builtin:exp2 (default: uniform over bounds).")
        p.add_argument("--gamma", type=float, required=True, help="Event threshold.")
        p.add_argument("--direction", choices=list(DIRECTIONS), default=EXCEED)
        p.add_argument("--n-mc", type=int, help="Monte Carlo sample size.")

    p = sub.add_parser("estimate-prob", parents=[common], help="Event probability from a fitted model.")
    p.add_argument("model")
    event_args(p)
    p.add_argument("--level", type=int, help="Fidelity level t (default: top).")
    p.add_argument("--oracle", choices=list(EXPERIMENTS), help="Compare with crude Monte Carlo on a built-in truth.")

    p = sub.add_parser("design-next", parents=[common], help="Pick the next (point, level) by IG per cost.")
    p.add_argument("model")
    p.add_argument("--candidates", required=True, help="CSV with columns x1..xd.")
    p.add_argument("--levels", help="Comma-separated candidate levels (default: all).")
    p.add_argument("--costs", help="Comma-separated per-level costs (default: config costs or 1,10,100,...).")
    p.add_argument("--n-y", type=int, help="Quadrature nodes for the hypothetical observation.")
    p.add_argument("--table", help="Also write the scored candidate table (CSV).")
    event_args(p)

    p = sub.add_parser("reproduce", parents=[common], help="Re-run a built-in experiment.")
    p.add_argument("experiment", choices=list(EXPERIMENTS))
    p.add_argument("--runs", type=int, default=1, help="exp2: number of seeds, starting at --seed.")

    p = sub.add_parser("export-scenario", parents=[common], help="Write a built-in scenario as a bundle.")
    p.add_argument("scenario", choices=list(EXPERIMENTS))
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT, stream=sys.stderr)
    if args.command == "export-scenario" and not args.out:
        print("error: export-scenario needs --out <directory>", file=sys.stderr)
        return InvalidArgumentError.exit_code

    try:
        config = load_config(args.config).with_seed(args.seed)
        return COMMANDS[args.command](args, config)
    except CoKrigingError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    raise SystemExit(main())

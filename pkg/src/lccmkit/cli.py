"""Command-line interface: ``lccmkit {design,simulate,estimate,analyze,predict}``.

Exit codes: 0 success, 1 domain error (JSON on stderr), 2 usage error.
Every run writes a manifest next to its outputs.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np
import pandas as pd

from .analysis import (CROWDING_PERSONS, INFECTION_LEVELS, class_profile, descriptive_shares,
                       opt_out_table, posterior_membership, scaled_impacts,
                       uncrowded_vs_crowded_wait, value_of_crowding)
from .core import AttributeSchema, format_level, paper_schema
from .data import read_dataset_csv, write_dataset_csv
from .design import DesignConfig, blocks_from_frame, blocks_to_frame, generate_design
from .estimation import FitResult, fit
from .exceptions import EstimationError, LCCMError
from .simulate import SimulationConfig, simulate_dataset
from .spec import load_model_spec

logger = logging.getLogger("lccmkit")


def _tool_version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


def _sha256(path) -> str | None:
    p = Path(path)
    if not p.is_file():
        return None
    return hashlib.sha256(p.read_bytes()).hexdigest()


@dataclass
class RunManifest:
    subcommand: str
    inputs: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    seed: int | None = None
    options: dict = field(default_factory=dict)
    tool_version: str = field(default_factory=_tool_version)

    def add_input(self, path) -> None:
        self.inputs[str(path)] = _sha256(path)

    def write(self, path) -> None:
        body = {
            "subcommand": self.subcommand,
            "inputs": [{"path": k, "sha256": v} for k, v in self.inputs.items()],
            "outputs": self.outputs,
            "seed": self.seed,
            "options": self.options,
            "tool_version": self.tool_version,
        }
        Path(path).write_text(json.dumps(body, indent=2, default=str) + "\n", encoding="utf-8")


def _write_csv(df: pd.DataFrame, path) -> None:
    df.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _threads(value) -> int:
    if value is not None:
        return value
    env = os.environ.get("LCCMKIT_THREADS")
    return int(env) if env else 1


# ----------------------------------------------------------------------
# subcommands

def cmd_design(args) -> list[str]:
    cfg = {}
    if args.config:
        cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
    schema = paper_schema()
    if "schema" in cfg:
        schema = {a["name"]: AttributeSchema.from_dict(a) for a in cfg["schema"]}
    config = DesignConfig(
        schema=schema,
        n_blocks=args.blocks if args.blocks is not None else cfg.get("n_blocks", 4),
        block_size=args.block_size if args.block_size is not None else cfg.get("block_size", 15),
        rng_seed=args.seed if args.seed is not None else cfg.get("seed", 0),
    )
    args.manifest.seed = config.rng_seed
    args.manifest.options = {"n_blocks": config.n_blocks, "block_size": config.block_size}
    _write_csv(blocks_to_frame(generate_design(config)), args.out)
    return [args.out]


def cmd_simulate(args) -> list[str]:
    spec = load_model_spec(args.model)
    blocks = None
    if args.design:
        blocks = blocks_from_frame(pd.read_csv(args.design))
        args.manifest.add_input(args.design)
    cfg = SimulationConfig(spec, n_respondents=args.n, rng_seed=args.seed, blocks=blocks,
                           design=DesignConfig(rng_seed=args.design_seed))
    args.manifest.seed = args.seed
    args.manifest.options = {"n": args.n, "design_seed": args.design_seed}
    write_dataset_csv(simulate_dataset(cfg), args.out)
    return [args.out]


def cmd_estimate(args) -> list[str]:
    spec = load_model_spec(args.model)
    data = read_dataset_csv(args.data)
    args.manifest.add_input(args.data)
    args.manifest.seed = args.seed
    args.manifest.options = {"starts": args.starts, "tol": args.tol, "rule": args.rule,
                             "max_iter": args.max_iter, "robust": args.robust,
                             "initial_ll": args.initial_ll, "threads": args.threads}
    from ._validation import check_panel
    data = check_panel(data, spec)
    try:
        result = fit(data, spec, starts=args.starts, seed=args.seed, tol=args.tol,
                     max_iter=args.max_iter, rule=args.rule, initial_ll=args.initial_ll,
                     robust=args.robust, n_jobs=args.threads)
    except EstimationError as exc:
        if exc.best is not None:
            exc.best.save(args.out)
        raise
    result.save(args.out)
    return [args.out]


def _crowding_rows(result: FitResult):
    crowd_rows, summary = [], []
    for s in range(result.spec.n_classes):
        params = result.class_parameters(s)
        roles = {p.name: p.role for p in result.spec.taste if p.class_index == s}
        skip = [x for x in CROWDING_PERSONS[1:-1] if roles.get(f"crowd:{format_level(x)}") == "fixed"]
        table = value_of_crowding(params, interpolate=skip)
        for seg in table.segments:
            crowd_rows.append({"class": s + 1, **seg._asdict()})
        summary.append({"class": s + 1, "class_size": result.class_sizes[s],
                        "value_of_crowding": table.average,
                        "wait_not_crowded_vs_almost_full": uncrowded_vs_crowded_wait(params, 23, 36)})
    return pd.DataFrame(crowd_rows), pd.DataFrame(summary)


def _scaled_rows(result: FitResult) -> pd.DataFrame:
    rows = []
    spec = result.spec
    for s in range(spec.n_classes):
        params = result.class_parameters(s)
        for name, v in scaled_impacts(params, "wt").items():
            rows.append({"class": s + 1, "block": "taste", "parameter": name,
                         "coefficient": params[name], "scaled": v})
    for s in range(1, spec.n_classes):
        params = result.membership_parameters(s)
        if params["intercept"] != 0:
            for name, v in scaled_impacts(params, "intercept").items():
                rows.append({"class": s + 1, "block": "membership", "parameter": name,
                             "coefficient": params[name], "scaled": v})
    return pd.DataFrame(rows)


def cmd_analyze(args) -> list[str]:
    result = FitResult.load(args.fit)
    args.manifest.add_input(args.fit)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def emit(df, name):
        _write_csv(df, out / name)
        written.append(str(out / name))

    segments, summary = _crowding_rows(result)
    emit(segments, "crowding_values.csv")
    emit(summary, "class_summary.csv")
    emit(_scaled_rows(result), "scaled.csv")
    emit(result.table(), "parameters.csv")
    emit(opt_out_table(result), "opt_out_curves.csv")
    if args.data:
        data = read_dataset_csv(args.data)
        args.manifest.add_input(args.data)
        post = posterior_membership(result, data)
        cols = {f"class{s + 1}": post[:, s] for s in range(post.shape[1])}
        emit(pd.DataFrame({"respondent_id": data.respondent_ids, **cols}), "posterior.csv")
        names = sorted({n for r in data.respondents for n in r.covariates})
        prof_rows = []
        for n in names:
            prof = class_profile(post, data, n)
            for level, row in prof.histogram.iterrows():
                for s, (col, share) in enumerate(row.items()):
                    prof_rows.append({"covariate": n, "value": level, "class": s + 1,
                                      "share": share, "class_mean": prof.means[s]})
        emit(pd.DataFrame(prof_rows), "class_profiles.csv")
        desc = descriptive_shares(data)
        emit(pd.DataFrame([{"always_opt_out": desc.always_opt_out,
                            "never_opt_out": desc.never_opt_out,
                            "always_less_crowded": desc.always_less_crowded,
                            "always_more_crowded": desc.always_more_crowded}]),
             "descriptives.csv")
        emit(desc.crowded_curve, "crowded_train_curve.csv")
    return written


def cmd_predict(args) -> list[str]:
    result = FitResult.load(args.fit)
    args.manifest.add_input(args.fit)
    args.manifest.options = {"wt": args.wt, "grid": args.grid, "crowd": args.crowd, "ivt": args.ivt}
    table = opt_out_table(result, wt=args.wt, infection_grid=args.grid,
                          crowding_levels=args.crowd, ivt=args.ivt)
    _write_csv(table, args.out)
    return [args.out]


# ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lccmkit", description="Latent class choice models for ranked stated-choice data.")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: $LCCMKIT_THREADS or 1)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("design", help="generate blocked choice situations")
    p.add_argument("--config", help="JSON with n_blocks, block_size, seed, schema")
    p.add_argument("--seed", type=int)
    p.add_argument("--blocks", type=int)
    p.add_argument("--block-size", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("simulate", help="simulate a ranked-choice panel")
    p.add_argument("--model", default="paper-2class", help="spec JSON or built-in name")
    p.add_argument("--n", type=int, default=513, help="respondents")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--design", help="design CSV (default: generate one)")
    p.add_argument("--design-seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="fit a latent class model")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True, help="spec JSON or built-in name")
    p.add_argument("--starts", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--rule", choices=("top", "rank"), default="top")
    p.add_argument("--initial-ll", type=float)
    p.add_argument("--robust", action="store_true", help="sandwich standard errors")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("analyze", help="post-estimation tables")
    p.add_argument("--fit", required=True)
    p.add_argument("--data", help="dataset CSV for posteriors and descriptives")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("predict", help="opt-out probability curves")
    p.add_argument("--fit", required=True)
    p.add_argument("--wt", type=float, default=12.0)
    p.add_argument("--grid", type=_float_list, default=list(INFECTION_LEVELS))
    p.add_argument("--crowd", type=_float_list, default=list(CROWDING_PERSONS))
    p.add_argument("--ivt", type=float, default=25.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args.threads = _threads(args.threads)
    args.manifest = RunManifest(args.command)
    for attr in ("model", "config"):
        val = getattr(args, attr, None)
        if val:
            args.manifest.add_input(val)
    try:
        outputs = args.func(args)
    except (LCCMError, OSError, ValueError, KeyError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        sys.stderr.write(json.dumps(err) + "\n")
        return 1
    args.manifest.outputs = outputs
    target = Path(args.out_dir) / "manifest.json" if args.command == "analyze" \
        else Path(str(args.out) + ".manifest.json")
    args.manifest.write(target)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

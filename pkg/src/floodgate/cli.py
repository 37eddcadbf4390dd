"""Command-line entry point: ``floodgate <subcommand> [options]``.

Every run writes ``manifest.json`` into ``--out`` next to its results.
Usage errors exit with status 2; validation failures print one JSON line
``{"error": ..., "message": ...}`` to stderr and exit with status 1.
``floodgate rerun <out>/manifest.json --out <dir>`` replays a run.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional

from floodgate.dataset import EvaluatedDataset, load_dataset, save_dataset
from floodgate.errors import DegenerateInputError, FormatError, NumericalError
from floodgate.estimators import build_paired_dataset, panin_all_inputs, spf_jansen, spf_surrogate
from floodgate.harness import (
    BudgetPlan,
    ExperimentConfig,
    apply_to_existing_dataset,
    ground_truth,
    make_model,
    run_coverage_experiment,
    train_surrogate,
    width_table,
)
from floodgate.io import (
    RunManifest,
    dump_json,
    load_config,
    relative_outputs,
    write_coverage,
    write_ground_truth,
    write_intervals,
    write_width_curve,
)
from floodgate.models import CountingModel
from floodgate.rng import derive_seed
from floodgate.space import sample_iid, sample_lhs_batches
from floodgate.surrogate import fit_krr, tune_lengthscales

log = logging.getLogger("floodgate")


COMMANDS = ("sample", "evaluate", "train-surrogate", "floodgate", "spf", "spf-surrogate", "panin", "coverage",
            "width-curve", "ground-truth")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config JSON")
    common.add_argument("--seed", type=int, help="master seed (default: config seed or 0)")
    common.add_argument("--alpha", type=float, help="miscoverage level, default 0.05")
    common.add_argument("--K", type=int, help="conditional redraws per row for floodgate")
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--model", help="built-in model: ishigami, additive_linear, synthetic_highdim, constant, hymod")
    common.add_argument("--budget", type=int, help="model-evaluation budget N")
    common.add_argument("--trials", type=int, help="number of repeated trials")
    common.add_argument("--data", help="dataset file (CSV or .json)")
    common.add_argument("--surrogate", help="surrogate JSON file from train-surrogate")
    common.add_argument("--n-jobs", type=int, help="worker processes for trials")
    common.add_argument("--quiet", action="store_true", help="log warnings only")

    p = argparse.ArgumentParser(prog="floodgate", description="Total-order sensitivity intervals with surrogates.")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("sample", parents=[common], help="draw an input design")
    s.add_argument("--design", choices=("iid", "lhs"), help="default: config design or iid")
    s.add_argument("--batch-size", type=int, help="rows per Latin hypercube batch")
    sub.add_parser("evaluate", parents=[common], help="run a built-in model over --data")
    t = sub.add_parser("train-surrogate", parents=[common], help="fit a KRR surrogate")
    t.add_argument("--tier", choices=("high", "low"))
    t.add_argument("--train-size", type=int)
    for name, text in (("floodgate", "floodgate intervals"), ("spf", "pick-freeze intervals from model pairs"),
                       ("spf-surrogate", "pick-freeze intervals from surrogate pairs"),
                       ("panin", "surrogate estimate widened by the Panin bound")):
        sub.add_parser(name, parents=[common], help=text)
    sub.add_parser("coverage", parents=[common], help="repeated-trial coverage study")
    sub.add_parser("width-curve", parents=[common], help="mean widths against budget")
    g = sub.add_parser("ground-truth", parents=[common], help="large-sample pick-freeze indices")
    g.add_argument("--n-large", type=int)
    g.add_argument("--cache-dir")
    r = sub.add_parser("rerun", help="replay the run recorded in a manifest")
    r.add_argument("manifest")
    r.add_argument("--out", required=True)
    return p


def resolve_config(args) -> ExperimentConfig:
    if args.config:
        doc = load_config(args.config).to_dict()
    elif args.model:
        doc = {"model": {"name": args.model}}
    else:
        raise ValueError("need --config or --model")
    if args.model and args.model != doc["model"]["name"]:
        doc["model"] = {"name": args.model}
    for key, val in (("seed", args.seed), ("alpha", args.alpha), ("K", args.K), ("trials", args.trials),
                     ("n_jobs", args.n_jobs)):
        if val is not None:
            doc[key] = val
    if args.budget is not None:
        doc["budgets"] = [args.budget]
    if args.data:
        doc["dataset"] = str(args.data)
    if getattr(args, "surrogate", None):
        doc["surrogate"] = {"kind": "file", "path": str(args.surrogate)}
    doc.setdefault("surrogate", {"kind": "krr", "tier": "high"})
    if getattr(args, "tier", None):
        doc["surrogate"] = {k: v for k, v in doc["surrogate"].items() if k not in ("train_size", "target_rel_mse")}
        doc["surrogate"].update(kind="krr", tier=args.tier)
    if getattr(args, "train_size", None):
        doc["surrogate"] = {k: v for k, v in doc["surrogate"].items() if k not in ("tier", "target_rel_mse")}
        doc["surrogate"].update(kind="krr", train_size=args.train_size)
    if getattr(args, "design", None):
        doc["design"] = {"kind": args.design}
    if getattr(args, "batch_size", None):
        doc["design"] = {"kind": "lhs", "batch_size": args.batch_size}
    return ExperimentConfig.from_dict(doc)


def _budget(cfg: ExperimentConfig) -> int:
    return int(cfg.budgets[-1])


def _design(cfg, space, N, seed):
    if cfg.design.get("kind") == "lhs":
        B = cfg.design["batch_size"]
        return sample_lhs_batches(space, B, N // B, seed)
    return sample_iid(space, N, seed)


def _surrogate(cfg, model, ctx):
    bundle = train_surrogate(model, cfg.surrogate, derive_seed(cfg.seed, "surrogate"))
    ctx.evaluations["surrogate_training"] = bundle.info.get("training_evaluations", 0)
    ctx.seeds["surrogate"] = derive_seed(cfg.seed, "surrogate")
    ctx.extra["surrogate"] = bundle.info
    return bundle.surrogate


def _evaluated_data(cfg, model, ctx) -> EvaluatedDataset:
    if cfg.dataset:
        data = load_dataset(cfg.dataset)
        if data.d != model.d:
            raise ValueError(f"dataset has {data.d} inputs, model {model.name} has {model.d}")
        ctx.evaluations["model"] = 0
        return data
    N = _budget(cfg)
    seed = derive_seed(cfg.seed, "data")
    ctx.seeds["data"] = seed
    sm = _design(cfg, model.space, N, seed)
    counter = CountingModel(model)
    data = EvaluatedDataset(sm.values, counter(sm.values), batch_ids=sm.batch_ids, names=model.space.names)
    ctx.evaluations["model"] = counter.count
    log.info("budget ledger: %s used %d model evaluations (plan N=%d)", ctx.command, counter.count, N)
    return data


class _Context:
    def __init__(self, command, out):
        self.command = command
        self.out = Path(out)
        self.seeds = {}
        self.evaluations = {}
        self.outputs = []
        self.extra = {}


def cmd_sample(cfg, args, ctx):
    model = make_model(cfg.model)
    N = _budget(cfg)
    ctx.seeds["data"] = derive_seed(cfg.seed, "data")
    sm = _design(cfg, model.space, N, ctx.seeds["data"])
    prov = {"model": model.name, "seed": cfg.seed, "design": cfg.design}
    data = EvaluatedDataset(sm.values, batch_ids=sm.batch_ids, names=model.space.names, provenance=prov)
    ctx.evaluations["model"] = 0
    ctx.outputs.append(save_dataset(data, ctx.out / "dataset.csv"))


def cmd_evaluate(cfg, args, ctx):
    if not cfg.dataset:
        raise ValueError("evaluate needs --data")
    model = make_model(cfg.model)
    data = load_dataset(cfg.dataset, require_outputs=False)
    if data.d != model.d:
        raise ValueError(f"dataset has {data.d} inputs, model {model.name} has {model.d}")
    if not model.space.contains(data.inputs):
        raise ValueError(f"dataset rows fall outside the {model.name} input box")
    counter = CountingModel(model)
    out = data.with_outputs(counter(data.inputs), model=model.name)
    ctx.evaluations["model"] = counter.count
    ctx.outputs.append(save_dataset(out, ctx.out / "dataset.csv"))


def cmd_train_surrogate(cfg, args, ctx):
    model = make_model(cfg.model)
    if cfg.dataset:
        data = load_dataset(cfg.dataset)
        spec = cfg.surrogate
        gamma, ridge = spec.get("gamma", 0.5), spec.get("ridge", 1e-6)
        ls = None
        if spec.get("lengthscales", "grid") == "grid":
            ls, _ = tune_lengthscales(data.inputs, data.outputs, model.space.bounds, gamma=gamma, ridge=ridge)
        krr = fit_krr(data, gamma=gamma, ridge=ridge, max_centers=spec.get("max_centers", 4000),
                      bounds=model.space.bounds, lengthscales=ls, seed=cfg.seed)
        krr.metadata.update({"kind": "krr", "train_size": data.n, "source": str(cfg.dataset)})
        ctx.evaluations["surrogate_training"] = 0
        info = dict(krr.metadata)
    else:
        krr = _surrogate(cfg, model, ctx)
        info = ctx.extra.pop("surrogate")
    if not hasattr(krr, "save"):
        raise ValueError("only KRR surrogates can be written to file")
    krr.metadata["model"] = model.name
    ctx.outputs.append(krr.save(ctx.out / "surrogate.json"))
    ctx.outputs.append(dump_json(dict(info, format_version=1), ctx.out / "surrogate_report.json"))


def cmd_floodgate(cfg, args, ctx):
    model = make_model(cfg.model)
    data = _evaluated_data(cfg, model, ctx)
    surrogate = _surrogate(cfg, model, ctx)
    ctx.seeds["floodgate"] = derive_seed(cfg.seed, "floodgate")
    res = apply_to_existing_dataset(data, surrogate, model.space, cfg.alpha, cfg.K, ctx.seeds["floodgate"])
    ctx.outputs += write_intervals(res, ctx.out)


def cmd_panin(cfg, args, ctx):
    model = make_model(cfg.model)
    data = _evaluated_data(cfg, model, ctx)
    surrogate = _surrogate(cfg, model, ctx)
    ctx.seeds["panin"] = derive_seed(cfg.seed, "panin")
    res = panin_all_inputs(data, surrogate, model.space, ctx.seeds["panin"], cfg.alpha)
    ctx.outputs += write_intervals(res, ctx.out)


def cmd_spf(cfg, args, ctx):
    model = make_model(cfg.model)
    plan = BudgetPlan(_budget(cfg), model.d)
    n = plan.n("spf")
    if n < 2:
        raise ValueError(f"budget N={plan.N} gives {n} pick-freeze pairs for d={model.d}; need N >= {2 * (model.d + 1)}")
    counter = CountingModel(model)
    ctx.seeds["spf"] = derive_seed(cfg.seed, "spf")
    pairs = build_paired_dataset(counter, model.space, n, ctx.seeds["spf"])
    if counter.count != plan.model_evaluations("spf"):
        raise AssertionError("budget ledger mismatch")
    log.info("budget ledger: spf N=%d d=%d -> n=%d pairs, %d model evaluations", plan.N, model.d, n, counter.count)
    ctx.evaluations["model"] = counter.count
    ctx.extra["pairs"] = n
    res = [spf_jansen(pairs, j, cfg.alpha, model.space.names[j]) for j in range(model.d)]
    ctx.outputs += write_intervals(res, ctx.out)


def cmd_spf_surrogate(cfg, args, ctx):
    model = make_model(cfg.model)
    surrogate = _surrogate(cfg, model, ctx)
    N = _budget(cfg)
    ctx.seeds["spf-surrogate"] = derive_seed(cfg.seed, "spf-surrogate")
    pairs = build_paired_dataset(surrogate, model.space, N, ctx.seeds["spf-surrogate"])
    ctx.evaluations["model"] = 0
    res = [spf_surrogate(pairs, j, cfg.alpha, model.space.names[j]) for j in range(model.d)]
    ctx.outputs += write_intervals(res, ctx.out)


def _report(cfg, args, ctx):
    model = make_model(cfg.model)
    report = run_coverage_experiment(cfg, model=model, cache_dir=getattr(args, "cache_dir", None))
    ctx.seeds["truth"] = derive_seed(cfg.seed, "truth")
    ctx.seeds["surrogate"] = derive_seed(cfg.seed, "surrogate")
    ctx.evaluations["model"] = {m: int(v.sum()) for m, v in report.model_evals.items()}
    ctx.evaluations["surrogate_training"] = report.surrogate_info.get("training_evaluations", 0)
    if getattr(model, "total_indices", lambda: None)() is None:
        ctx.evaluations["ground_truth"] = cfg.ground_truth_n * (model.d + 1)
    return report


def cmd_coverage(cfg, args, ctx):
    ctx.outputs += write_coverage(_report(cfg, args, ctx), ctx.out)


def cmd_width_curve(cfg, args, ctx):
    curve = width_table(_report(cfg, args, ctx))
    ctx.outputs += write_width_curve(curve, ctx.out)


def cmd_ground_truth(cfg, args, ctx):
    model = make_model(cfg.model)
    n_large = args.n_large or cfg.ground_truth_n
    ctx.seeds["truth"] = derive_seed(cfg.seed, "truth")
    truth = ground_truth(model, n_large, ctx.seeds["truth"], cache_dir=args.cache_dir)
    ctx.evaluations["model"] = truth.evaluations
    ctx.outputs += write_ground_truth(truth, model.space.names, ctx.out)


HANDLERS = {
    "sample": cmd_sample, "evaluate": cmd_evaluate, "train-surrogate": cmd_train_surrogate,
    "floodgate": cmd_floodgate, "spf": cmd_spf, "spf-surrogate": cmd_spf_surrogate, "panin": cmd_panin,
    "coverage": cmd_coverage, "width-curve": cmd_width_curve, "ground-truth": cmd_ground_truth,
}


class _StderrHandler(logging.StreamHandler):
    """Writes to whatever ``sys.stderr`` is at emit time."""

    @property
    def stream(self):
        return sys.stderr

    @stream.setter
    def stream(self, value):
        pass


def _configure_logging(quiet: bool):
    pkg = logging.getLogger("floodgate")
    if not any(isinstance(h, _StderrHandler) for h in pkg.handlers):
        handler = _StderrHandler()
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        pkg.addHandler(handler)
    pkg.setLevel(logging.WARNING if quiet else logging.INFO)


def _run(argv: list) -> int:
    args = _parser().parse_args(argv)
    if args.command == "rerun":
        manifest = RunManifest.load(args.manifest)
        replay = list(manifest.argv)
        if "--out" in replay:
            i = replay.index("--out")
            del replay[i:i + 2]
        return _run(replay + ["--out", args.out])
    _configure_logging(args.quiet)
    cfg = resolve_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ctx = _Context(args.command, out)
    manifest = RunManifest(command=args.command, argv=list(argv), config=cfg.to_dict(), config_hash=cfg.digest(),
                           seeds={"master": cfg.seed})
    HANDLERS[args.command](cfg, args, ctx)
    manifest.seeds.update(ctx.seeds)
    manifest.evaluations = ctx.evaluations
    manifest.outputs = relative_outputs(ctx.outputs, out)
    manifest.finish().save(out)
    return 0


def cli_main(argv: Optional[list] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        return _run(argv)
    except SystemExit as exc:  # argparse usage errors and --help
        return int(exc.code or 0)
    except (FormatError, DegenerateInputError, NumericalError, ValueError, FileNotFoundError, KeyError,
            IsADirectoryError, PermissionError) as exc:
        msg = str(exc) if not isinstance(exc, KeyError) else f"missing key {exc}"
        print(json.dumps({"error": type(exc).__name__, "message": msg}), file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()

"""Command line entry points.

Subcommands cover the full workflow: sample hidden weights, generate
datasets, train output weights, evaluate a saved model, and run the
packaged experiments. Exit codes: 0 on success, 1 for validation and
usage problems, 2 for I/O failures (missing or unreadable files).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .data import gen_basket_put_dataset, gen_pde_dataset, load_dataset, save_dataset
from .experiments import (
    EXPERIMENT_KINDS,
    ExperimentSpec,
    lognormal_from_dict,
    run_experiment,
    triplet_from_dict,
)
from .levy import payoff_from_dict
from .network import (
    RandomFeatureNet,
    WeightDistributionSpec,
    design_matrix,
    load_model,
    sample_hidden_weights,
    save_model,
)
from .train import METHODS, TrainConfig, empirical_risk, fit

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on bad flags; we reserve 2 for I/O."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _load_json(path) -> dict:
    p = Path(path)
    text = p.read_text()  # FileNotFoundError carries the path to the handler
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"invalid JSON in {p}: {exc}") from exc


def _weight_spec(args) -> WeightDistributionSpec:
    return WeightDistributionSpec(nu=args.nu, b_dof=args.b_dof)


def _cmd_sample_weights(args) -> int:
    hidden = sample_hidden_weights(_weight_spec(args), args.N, args.d, args.seed)
    net = RandomFeatureNet(hidden=hidden, W=np.zeros(args.N))
    save_model(net, args.out)
    print(f"wrote {args.N} hidden features (d={args.d}, seed={args.seed}) to {args.out}")
    return 0


def _cmd_gen_data(args) -> int:
    doc = _load_json(args.config)
    seed = args.seed if args.seed is not None else int(doc.get("seed", 0))
    out = args.out or doc.get("output")
    if out is None:
        raise ValueError("no output path: pass --out or set \"output\" in the config")
    kind = doc.get("kind", "pde")
    if kind == "basket_put":
        sampler = lognormal_from_dict(doc["model"])
        weights = doc.get("weights")
        weights = (
            np.asarray(weights, dtype=float)
            if weights is not None
            else np.full(sampler.m, 1.0 / sampler.m)
        )
        ds = gen_basket_put_dataset(
            sampler, weights, float(doc.get("M", 1.0)), int(doc["n"]),
            noise_std=float(doc.get("noise_std", 0.0)), seed=seed,
            paths=int(doc.get("paths", 100)),
        )
    elif kind == "pde":
        triplet = triplet_from_dict(doc["model"])
        payoff = payoff_from_dict(doc["payoff"])
        ds = gen_pde_dataset(
            triplet, payoff, float(doc.get("M", 1.0)), float(doc.get("T", 1.0)),
            int(doc["n"]), label_kind=doc.get("label_kind", "single_draw"),
            seed=seed, paths=int(doc.get("paths", 1000)),
            noise_std=float(doc.get("noise_std", 0.0)),
        )
    else:
        raise ValueError(f"unknown data kind {kind!r} (expected 'pde' or 'basket_put')")
    save_dataset(ds, out)
    print(f"wrote {ds.n} rows (d={ds.d}, labels={ds.label_kind}, seed={seed}) to {out}")
    return 0


def _cmd_train(args) -> int:
    ds = load_dataset(args.data)
    if args.hidden is not None:
        hidden = load_model(args.hidden).hidden
        if hidden.d != ds.d:
            raise ValueError(
                f"hidden weights expect d={hidden.d} but the data has d={ds.d}"
            )
    else:
        if args.N is None:
            raise ValueError("pass --hidden FILE or --N to sample hidden weights")
        hidden = sample_hidden_weights(_weight_spec(args), args.N, ds.d, args.weights_seed)
    if args.method == "constrained" and args.lam is None:
        raise ValueError("--lambda is required for --method constrained (norm-ball radius)")
    cfg = TrainConfig(
        method=args.method, lam=args.lam, eta0=args.eta0, batch=args.batch,
        steps=args.steps, seed=args.seed, cap=args.cap, average=args.average,
    )
    design = design_matrix(hidden, ds.X)
    W, diag = fit(design, ds.Y, cfg)
    net = RandomFeatureNet(hidden=hidden, W=W, cap=args.cap)
    save_model(net, args.out)
    diag_doc = diag.to_dict()
    Path(str(args.out) + ".diag.json").write_text(json.dumps(diag_doc, indent=2) + "\n")
    print(json.dumps({"model": str(args.out), **diag_doc}))
    return 0


def _cmd_evaluate(args) -> int:
    net = load_model(args.model)
    ds = load_dataset(args.data)
    risk = empirical_risk(net, ds)
    result = {
        "n": ds.n,
        "d": ds.d,
        "empirical_risk": risk,
        "e_hat": math.sqrt(risk),
    }
    if args.out:
        Path(args.out).write_text(json.dumps(result, indent=2) + "\n")
    print(json.dumps(result))
    return 0


def _cmd_experiment(args) -> int:
    doc = _load_json(args.config)
    kind = args.kind.replace("-", "_")
    config_kind = str(doc.get("kind", kind)).replace("-", "_")
    if config_kind != kind:
        raise ValueError(
            f"config declares kind {config_kind!r} but the command line asked for {kind!r}"
        )
    doc["kind"] = kind
    if args.seed is not None:
        doc["master_seed"] = args.seed
    if args.out is not None:
        doc["output"] = args.out
    spec = ExperimentSpec.from_dict(doc)
    report = run_experiment(spec)
    summary = {
        "kind": report.kind,
        "rows": len(report.rows),
        "slope": report.slope,
        "e0": report.e0,
        "seed": report.seed,
        "config_hash": report.config_hash,
        **{k: v for k, v in report.extras.items() if not isinstance(v, (list, dict))},
    }
    if spec.output_path:
        summary["output"] = str(Path(spec.output_path).with_suffix(".csv"))
    print(json.dumps(summary))
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="kolmo-rfn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample-weights", parents=[], help="sample and save hidden weights")
    p.add_argument("--N", type=int, required=True, help="number of features")
    p.add_argument("--d", type=int, required=True, help="input dimension")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--nu", type=float, default=5.0, help="t dof for the A rows")
    p.add_argument("--b-dof", type=float, default=2.0, help="t dof for the biases")
    p.add_argument("--out", required=True, help="model JSON path")
    p.set_defaults(func=_cmd_sample_weights)

    p = sub.add_parser("gen-data", help="generate a labeled dataset from a JSON config")
    p.add_argument("--config", required=True, help="JSON config path")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", default=None, help="CSV output path")
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("train", help="fit output weights on a dataset")
    p.add_argument("--data", required=True, help="dataset CSV from gen-data")
    p.add_argument("--hidden", default=None, help="model JSON holding hidden weights")
    p.add_argument("--N", type=int, default=None, help="sample this many features instead")
    p.add_argument("--weights-seed", type=int, default=0)
    p.add_argument("--nu", type=float, default=5.0)
    p.add_argument("--b-dof", type=float, default=2.0)
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="norm-ball radius")
    p.add_argument("--eta0", type=float, default=None, help="sgd step-size scale")
    p.add_argument("--batch", type=int, default=None, help="sgd minibatch size")
    p.add_argument("--steps", type=int, default=None, help="sgd iterate count")
    p.add_argument("--seed", type=int, default=0, help="sgd sampling seed")
    p.add_argument("--cap", type=float, default=None, help="clip predictions to [-cap, cap]")
    p.add_argument("--average", action="store_true", help="return the sgd iterate average")
    p.add_argument("--out", required=True, help="model JSON path")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="empirical risk of a model on a dataset")
    p.add_argument("--model", required=True, help="model JSON path")
    p.add_argument("--data", required=True, help="dataset CSV path")
    p.add_argument("--out", default=None, help="optional JSON result path")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("experiment", help="run a packaged experiment from a JSON config")
    p.add_argument(
        "kind", choices=[k.replace("_", "-") for k in EXPERIMENT_KINDS] + list(EXPERIMENT_KINDS)
    )
    p.add_argument("--config", required=True, help="experiment JSON config")
    p.add_argument("--seed", type=int, default=None, help="override master_seed")
    p.add_argument("--out", default=None, help="override the report output path")
    p.set_defaults(func=_cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        missing = exc.filename if exc.filename else exc
        print(f"error: cannot read {missing}", file=sys.stderr)
        return 2
    except IsADirectoryError as exc:
        print(f"error: {exc.filename} is a directory", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

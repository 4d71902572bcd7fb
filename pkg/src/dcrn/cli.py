"""Command-line interface.

Subcommands: train, ablate, sweep-k, gradcheck, gen-synth. Exit codes:
0 success, 1 verification failure, 2 configuration error, 3 training
divergence or numeric failure, 4 I/O failure.
"""
from __future__ import annotations

import argparse
import contextlib
import json
import logging
import os
import sys
from pathlib import Path

from .config import (
    DEFAULT_RUNS,
    PRESETS,
    load_json,
    load_run_config,
    build_train_config,
    resolve_dataset,
    validate_sbm_spec,
)
from .data import SbmSpec, dump_embedding, generate_sbm, save_graph
from .errors import (
    ConfigError,
    ContractError,
    DegenerateRowError,
    DivergenceError,
    DomainError,
    EmptyClusterError,
    ManifestError,
    ParseError,
)
from .gradcheck import LOSS_NAMES, TOLERANCE, run_gradient_checks
from .losses import ABLATIONS, LossReport
from .metrics import aggregate_reports
from .model import save_params
from .optim import config_for_seed, run_pipeline

logger = logging.getLogger("dcrn")

ABLATION_ORDER = ("none", "P", "D", "P-D", "F", "S", "F-S")
METRIC_COLUMNS = ("acc_mean", "acc_std", "nmi_mean", "nmi_std",
                  "ari_mean", "ari_std", "f1_mean", "f1_std")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dcrn",
        description="Deep graph clustering via dual cross-view correlation reduction",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="run configuration JSON")
        p.add_argument("--preset", choices=sorted(PRESETS),
                       help="apply a benchmark learning-rate preset")
        p.add_argument("--seed", type=int, help="override the base seed")
        p.add_argument("--runs", type=int, help="override the number of repeated runs")
        p.add_argument("--out", help="override the output directory")
        p.add_argument("--serial", action="store_true",
                       help="force fully serial execution (single BLAS thread)")

    p_train = sub.add_parser("train", help="train and evaluate on one dataset")
    add_common(p_train)
    p_train.add_argument("--ablation", choices=ABLATION_ORDER,
                         help="override the ablation gate")
    p_train.set_defaults(func=cmd_train)

    p_ablate = sub.add_parser("ablate", help="run every ablation variant")
    add_common(p_ablate)
    p_ablate.set_defaults(func=cmd_ablate)

    p_sweep = sub.add_parser("sweep-k", help="rerun training over readout widths")
    add_common(p_sweep)
    p_sweep.add_argument("--k", type=int, nargs="+", required=True,
                         help="readout widths to sweep")
    p_sweep.set_defaults(func=cmd_sweep_k)

    p_grad = sub.add_parser("gradcheck",
                            help="finite-difference check of every loss gradient")
    p_grad.add_argument("--seed", type=int, default=0)
    p_grad.add_argument("--graphs", type=int, default=20,
                        help="number of random graphs per loss")
    p_grad.add_argument("--serial", action="store_true")
    p_grad.set_defaults(func=cmd_gradcheck)

    p_gen = sub.add_parser("gen-synth", help="generate a synthetic dataset directory")
    p_gen.add_argument("--spec", required=True, help="block-model spec JSON")
    p_gen.add_argument("--out", required=True, help="dataset output directory")
    p_gen.add_argument("--serial", action="store_true")
    p_gen.set_defaults(func=cmd_gen_synth)
    return parser


def _thread_limit(args):
    env = os.environ.get("DCRN_THREADS")
    limit = None
    if env is not None:
        try:
            limit = int(env)
        except ValueError:
            raise ConfigError(f"DCRN_THREADS must be an integer, got {env!r}") from None
        if limit < 1:
            raise ConfigError(f"DCRN_THREADS must be positive, got {limit}")
    if getattr(args, "serial", False):
        limit = 1
    return limit


def _fmt(value: float) -> str:
    return repr(float(value))


def _dataset_summary(graph):
    out = {
        "n_nodes": graph.n_nodes,
        "n_edges": graph.n_edges,
        "feature_dim": graph.feature_dim,
    }
    if graph.labels is not None:
        out["n_classes"] = graph.n_classes
    return out


def _write_epoch_log(path, cfg, history, reports):
    lines = ["phase\tepoch\t" + "\t".join(LossReport.FIELDS)]
    for i, value in enumerate(history):
        fields = {"l_n": 0.0, "l_f": 0.0, "l_r": 0.0, "l_rec": value,
                  "l_kl": 0.0, "total": value}
        lines.append("pretrain\t{}\t{}".format(
            i, "\t".join(_fmt(fields[f]) for f in LossReport.FIELDS)))
    for i, rep in enumerate(reports):
        phase = "init" if i < cfg.init_epochs else "joint"
        epoch = i if i < cfg.init_epochs else i - cfg.init_epochs
        lines.append("{}\t{}\t{}".format(
            phase, epoch, "\t".join(_fmt(getattr(rep, f)) for f in LossReport.FIELDS)))
    Path(path).write_text("\n".join(lines) + "\n")


def _write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _run_variant(graph, cfg_base, base_seed, n_runs, variant_dir):
    """Train n_runs seeds of one configuration; writes per-run artifacts.

    Returns the list of (seed, MetricsReport).
    """
    variant_dir.mkdir(parents=True, exist_ok=True)
    runs_data = []
    for i in range(n_runs):
        seed = base_seed + i
        cfg = config_for_seed(cfg_base, seed)
        result = run_pipeline(graph, cfg)
        run_dir = variant_dir / f"run_{i:02d}"
        run_dir.mkdir(exist_ok=True)
        _write_epoch_log(run_dir / "epochs.tsv", cfg, result.pretrain_history,
                         result.reports)
        summary = {
            "seed": seed,
            "epochs": {
                "pretrain": cfg.pretrain_epochs,
                "init": cfg.init_epochs,
                "joint": cfg.train_epochs,
            },
            "final_losses": result.reports[-1].to_dict() if result.reports else None,
            "metrics": result.metrics.to_dict() if result.metrics else None,
        }
        _write_json(run_dir / "summary.json", summary)
        save_params(result.params, run_dir / "checkpoint.bin")
        dump_embedding(result.embedding, run_dir / "embedding.tsv")
        if result.metrics is None:
            raise ContractError("training dataset must be labeled for evaluation")
        runs_data.append((seed, result.metrics))
        logger.info("seed %d: acc=%.4f nmi=%.4f ari=%.4f f1=%.4f", seed,
                    result.metrics.acc, result.metrics.nmi, result.metrics.ari,
                    result.metrics.f1)
    return runs_data


def _variant_entry(name, runs_data, **extra):
    mean, std = aggregate_reports([m for _, m in runs_data])
    entry = {
        "name": name,
        "per_run": [{"seed": seed, **m.to_dict()} for seed, m in runs_data],
        "mean": mean.to_dict(),
        "std": std.to_dict(),
    }
    entry.update(extra)
    return entry


def _metric_row(entry):
    mean, std = entry["mean"], entry["std"]
    values = []
    for col in METRIC_COLUMNS:
        metric, kind = col.rsplit("_", 1)
        values.append(_fmt((mean if kind == "mean" else std)[metric]))
    return values


def _prepare(args):
    doc = load_run_config(args.config, preset=args.preset)
    graph = resolve_dataset(doc, Path(args.config).resolve().parent)
    if graph.labels is None:
        raise ConfigError("dataset has no labels; evaluation is impossible")
    base_seed = args.seed if args.seed is not None else doc.get("seed", 0)
    n_runs = args.runs if args.runs is not None else doc.get("runs", DEFAULT_RUNS)
    if n_runs < 1:
        raise ConfigError(f"runs must be positive, got {n_runs}")
    out = args.out if args.out is not None else doc.get("out_dir")
    if out is None:
        raise ConfigError("no output directory: set out_dir in the config or pass --out")
    return doc, graph, base_seed, n_runs, Path(out)


def cmd_train(args) -> int:
    doc, graph, base_seed, n_runs, out = _prepare(args)
    ablation = args.ablation
    cfg = build_train_config(doc, graph.feature_dim, graph.n_classes,
                             base_seed, ablation=ablation)
    out.mkdir(parents=True, exist_ok=True)
    runs_data = _run_variant(graph, cfg, base_seed, n_runs, out)
    entry = _variant_entry(cfg.ablation, runs_data, ablation=cfg.ablation,
                           readout_k=cfg.model.resolved_k)
    metrics_doc = {
        "command": "train",
        "dataset": _dataset_summary(graph),
        "base_seed": base_seed,
        "runs": n_runs,
        "variants": [entry],
    }
    _write_json(out / "metrics.json", metrics_doc)
    mean, std = entry["mean"], entry["std"]
    print(f"acc {mean['acc']:.4f}±{std['acc']:.4f}  nmi {mean['nmi']:.4f}±{std['nmi']:.4f}  "
          f"ari {mean['ari']:.4f}±{std['ari']:.4f}  f1 {mean['f1']:.4f}±{std['f1']:.4f}")
    return 0


def cmd_ablate(args) -> int:
    doc, graph, base_seed, n_runs, out = _prepare(args)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for variant in ABLATION_ORDER:
        cfg = build_train_config(doc, graph.feature_dim, graph.n_classes,
                                 base_seed, ablation=variant)
        logger.info("ablation variant %s", variant)
        runs_data = _run_variant(graph, cfg, base_seed, n_runs,
                                 out / f"variant_{variant}")
        entries.append(_variant_entry(variant, runs_data, ablation=variant,
                                      readout_k=cfg.model.resolved_k))
    metrics_doc = {
        "command": "ablate",
        "dataset": _dataset_summary(graph),
        "base_seed": base_seed,
        "runs": n_runs,
        "variants": entries,
    }
    _write_json(out / "metrics.json", metrics_doc)
    lines = ["variant\t" + "\t".join(METRIC_COLUMNS)]
    for entry in entries:
        lines.append(entry["name"] + "\t" + "\t".join(_metric_row(entry)))
    (out / "ablation.tsv").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0


def cmd_sweep_k(args) -> int:
    doc, graph, base_seed, n_runs, out = _prepare(args)
    for k in args.k:
        if k < 1:
            raise ConfigError(f"--k values must be positive, got {k}")
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for k in args.k:
        section = dict(doc.get("train", {}))
        section["readout_k"] = k
        doc_k = {**doc, "train": section}
        cfg = build_train_config(doc_k, graph.feature_dim, graph.n_classes, base_seed)
        logger.info("readout width %d", k)
        runs_data = _run_variant(graph, cfg, base_seed, n_runs, out / f"k_{k}")
        entries.append(_variant_entry(f"K={k}", runs_data, readout_k=k,
                                      default=(k == graph.n_classes)))
    metrics_doc = {
        "command": "sweep-k",
        "dataset": _dataset_summary(graph),
        "base_seed": base_seed,
        "runs": n_runs,
        "variants": entries,
    }
    _write_json(out / "metrics.json", metrics_doc)
    lines = ["k\tdefault\t" + "\t".join(METRIC_COLUMNS)]
    for entry in entries:
        flag = "yes" if entry["default"] else "no"
        lines.append(f"{entry['readout_k']}\t{flag}\t" + "\t".join(_metric_row(entry)))
    (out / "sweep.tsv").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0


def cmd_gradcheck(args) -> int:
    report = run_gradient_checks(seed=args.seed, n_graphs=args.graphs)
    ok = True
    for name in LOSS_NAMES:
        err = report[name]
        passed = err <= TOLERANCE
        ok = ok and passed
        print(f"{name}\tmax_rel_err={err:.6e}\t{'PASS' if passed else 'FAIL'}")
    return 0 if ok else 1


def cmd_gen_synth(args) -> int:
    doc = load_json(args.spec, "sbm spec")
    validate_sbm_spec(doc)
    graph = generate_sbm(SbmSpec(**doc))
    manifest_path = save_graph(graph, args.out, name=Path(args.out).name or "synthetic")
    print(str(manifest_path))
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        limit = _thread_limit(args)
        if limit is None:
            ctx = contextlib.nullcontext()
        else:
            from threadpoolctl import threadpool_limits
            ctx = threadpool_limits(limits=limit)
        with ctx:
            return args.func(args)
    except (ConfigError, ContractError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DivergenceError, DegenerateRowError, EmptyClusterError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ParseError, ManifestError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())

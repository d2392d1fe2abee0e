"""Command-line surface: synth, label, augment, train, predict, select,
eval, ablate and report subcommands, each mapping onto one library
operation.  Exit code 0 on success; 1 with a structured error listing on
failure (argparse itself exits 2 on bad flags)."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import augment as augment_mod
from . import dataset_io, labels as labels_mod, predictor, report as report_mod, selection, synth
from .dataset_io import DatasetValidationError


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DatasetValidationError as err:
        print("error: dataset validation failed", file=sys.stderr)
        for issue in err.issues:
            print(f"  - {issue}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trackselect",
        description="Tracker-portfolio evaluation and best-tracker selection toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset with tracker results")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--preset", choices=("separable", "graded"), default="separable")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--sequences", type=int, default=None)
    p.add_argument("--trackers", type=int, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("label", help="generate best-tracker labels from results")
    _dataset_args(p, results=True)
    p.add_argument("--metric", default="auc", choices=("auc", "ao", "sr50", "sr75"))
    p.add_argument("--split", default="all", choices=("all", "train", "test"))
    p.add_argument(
        "--relabel-augmented",
        action="store_true",
        help="re-score augmented copies instead of reusing the base video's label",
    )
    p.add_argument("--out", required=True, help="label file to write (JSON lines)")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("augment", help="expand a dataset with annotation-level transforms")
    _dataset_args(p, results=False)
    p.add_argument("--out", required=True, help="directory for the expanded dataset")
    p.add_argument(
        "--specs",
        default=None,
        help="comma list of transform tags (default: the stock ten-fold set)",
    )
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("train", help="train the built-in selection classifier")
    _dataset_args(p, results=False)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--split", default="train", choices=("all", "train", "test"))
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--window", type=int, default=5)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="export predictions in the interchange format")
    _dataset_args(p, results=False)
    p.add_argument("--results", default=None, help="needed for frame-level windows")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="test", choices=("all", "train", "test"))
    p.add_argument("--level", default="video", choices=("video", "frame"))
    p.add_argument("--interval", type=int, default=5)
    p.add_argument("--pool", default=None, help="comma list of tracker ids")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("select", help="build selection plans for a policy")
    _policy_args(p)
    p.add_argument("--out", required=True, help="plan file to write (JSON lines)")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("eval", help="evaluate a selection policy")
    _policy_args(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--eao-lo", type=int, default=None)
    p.add_argument("--eao-hi", type=int, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="pool-size study over nested pools")
    _dataset_args(p, results=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ranks", default=None, help="comma list, best first (default: manifest order)")
    p.add_argument("--sizes", default="3,6,9,12,15,17")
    p.add_argument("--metric", default="auc", choices=("auc", "ao", "sr50", "sr75"))
    p.add_argument("--interval", type=int, default=5)
    p.add_argument("--split", default="test", choices=("all", "train", "test"))
    p.add_argument("--no-figures", dest="figures", action="store_false")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("report", help="full report bundle with curves and figures")
    _policy_args(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--labels", default=None, help="label file (computed if omitted)")
    p.add_argument("--no-baselines", dest="baselines", action="store_false")
    p.add_argument("--no-figures", dest="figures", action="store_false")
    p.add_argument("--eao-lo", type=int, default=None)
    p.add_argument("--eao-hi", type=int, default=None)
    p.set_defaults(func=cmd_report)
    return parser


def _dataset_args(p: argparse.ArgumentParser, results: bool) -> None:
    p.add_argument("--manifest", required=True, help="path to manifest.txt")
    if results:
        p.add_argument("--results", required=True, help="results root directory")


def _policy_args(p: argparse.ArgumentParser) -> None:
    _dataset_args(p, results=True)
    p.add_argument("--policy", default="oracle", choices=("oracle", "fixed", "random", "predicted"))
    p.add_argument("--tracker", default=None, help="tracker id for --policy fixed")
    p.add_argument("--seed", type=int, default=0, help="seed for --policy random")
    p.add_argument("--model", default=None, help="model file for --policy predicted")
    p.add_argument("--predictions", default=None, help="interchange file for --policy predicted")
    p.add_argument("--pool", default=None, help="comma list of tracker ids (default: all)")
    p.add_argument("--level", default="video", choices=("video", "frame"))
    p.add_argument("--interval", type=int, default=5, help="frames per selection interval")
    p.add_argument("--metric", default="auc", choices=("auc", "ao", "sr50", "sr75"))
    p.add_argument("--split", default="test", choices=("all", "train", "test"))


def _load(args, results: bool = True):
    manifest = dataset_io.load_manifest(args.manifest)
    all_sequences = dataset_io.load_sequences(manifest)
    sequences = all_sequences
    if getattr(args, "split", "all") != "all":
        sequences = [s for s in all_sequences if s.split == args.split]
        if not sequences:
            raise ValueError(f"no sequences in split {args.split!r}")
    if results and getattr(args, "results", None):
        # Derived (augmented) sequences never have stored tracker outputs;
        # their labels come from the base video's results.
        base = [s for s in all_sequences if "#" not in s.id]
        result_sets = dataset_io.load_results(manifest, args.results, sequences=base)
        return manifest, sequences, result_sets
    return manifest, sequences, None


def _build_policy(args, manifest) -> selection.Policy:
    if args.policy == "oracle":
        return selection.OraclePolicy(metric=args.metric)
    if args.policy == "fixed":
        if not args.tracker:
            raise ValueError("--policy fixed needs --tracker")
        return selection.FixedPolicy(tracker_id=args.tracker)
    if args.policy == "random":
        return selection.RandomPolicy(seed=args.seed)
    if args.model:
        return selection.PredictedPolicy(model=predictor.ClassifierModel.load(args.model))
    if args.predictions:
        records = predictor.load_external_predictions(args.predictions, manifest.trackers)
        return selection.PredictedPolicy(
            predictions={(r.sequence_id, r.frame_index): r for r in records}
        )
    raise ValueError("--policy predicted needs --model or --predictions")


def cmd_synth(args) -> int:
    if args.preset == "separable":
        fixture = synth.separable_scenario(
            n_sequences=args.sequences or 240,
            n_trackers=args.trackers or 6,
            seed=args.seed if args.seed is not None else 7,
        )
    else:
        fixture = synth.graded_scenario(
            n_sequences=args.sequences or 80,
            n_trackers=args.trackers or 17,
            seed=args.seed if args.seed is not None else 11,
        )
    manifest, results_root = synth.generate_benchmark(fixture, args.out)
    print(f"wrote {len(manifest.sequences)} sequences, {len(manifest.trackers)} trackers")
    print(f"manifest: {manifest.root / 'manifest.txt'}")
    print(f"results:  {results_root}")
    return 0


def cmd_label(args) -> int:
    manifest, sequences, result_sets = _load(args)
    labels = labels_mod.build_label_set(
        sequences, result_sets, metric=args.metric, relabel_augmented=args.relabel_augmented
    )
    labels_mod.write_labels(args.out, labels, manifest.trackers)
    degenerate = sum(1 for lab in labels if lab.degenerate)
    print(f"labeled {len(labels)} videos ({degenerate} degenerate) -> {args.out}")
    return 0


def cmd_augment(args) -> int:
    manifest, sequences, _ = _load(args, results=False)
    specs = (
        tuple(augment_mod.AugmentSpec.from_tag(t.strip()) for t in args.specs.split(","))
        if args.specs
        else augment_mod.DEFAULT_SPECS
    )
    expanded = augment_mod.expand_training_set(sequences, specs)
    out_manifest = dataset_io.write_dataset(
        name=f"{manifest.name}-augmented",
        records=expanded,
        attributes=manifest.attributes,
        out_dir=args.out,
        trackers=manifest.trackers,
        frame_costs=manifest.frame_costs,
    )
    print(f"expanded {len(sequences)} -> {len(expanded)} sequences")
    print(f"manifest: {out_manifest.root / 'manifest.txt'}")
    return 0


def cmd_train(args) -> int:
    manifest, sequences, _ = _load(args, results=False)
    labels, label_trackers = labels_mod.read_labels(args.labels)
    if tuple(label_trackers) != manifest.trackers:
        raise ValueError("label file tracker order does not match the manifest")
    by_id = {lab.video_id: lab for lab in labels}
    usable = [s for s in sequences if s.id in by_id]
    if not usable:
        raise ValueError("no labeled sequences in the selected split")
    featurizer = predictor.Featurizer(attributes=manifest.attributes, window=args.window)
    features = np.stack([featurizer.features(s) for s in usable])
    config = predictor.TrainingConfig(epochs=args.epochs, lr=args.lr, l2=args.l2, seed=args.seed)
    model = predictor.train(
        features, [by_id[s.id] for s in usable], manifest.trackers, featurizer, config
    )
    model.save(args.out)
    final_loss = f"{model.loss_curve[-1]:.6f}" if model.loss_curve else "n/a"
    print(f"trained on {len(usable)} videos, final loss {final_loss} -> {args.out}")
    return 0


def cmd_predict(args) -> int:
    manifest, sequences, _ = _load(args, results=False)
    model = predictor.ClassifierModel.load(args.model)
    pool = selection.pool_from_manifest(manifest, args.pool)
    result_sets = None
    if args.level == "frame":
        if not args.results:
            raise ValueError("--level frame needs --results for prediction windows")
        result_sets = dataset_io.load_results(manifest, args.results)
    records = predictor.export_predictions(
        model, sequences, result_sets, level=args.level, k=args.interval, pool=pool
    )
    predictor.write_predictions(args.out, records)
    print(f"wrote {len(records)} prediction record(s) -> {args.out}")
    return 0


def cmd_select(args) -> int:
    manifest, sequences, result_sets = _load(args)
    policy = _build_policy(args, manifest)
    pool = selection.pool_from_manifest(manifest, args.pool)
    plans = []
    for seq in sorted(sequences, key=lambda s: s.id):
        if args.level == "video":
            plans.append(selection.select_video_level(seq, result_sets, pool, policy))
        else:
            plans.append(
                selection.select_frame_level(seq, result_sets, pool, policy, k=args.interval)
            )
    selection.write_plans(args.out, plans)
    total = sum(p.overhead_s for p in plans)
    print(f"wrote {len(plans)} plan(s), total overhead {total:.2f}s -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    manifest, sequences, result_sets = _load(args)
    policy = _build_policy(args, manifest)
    pool = selection.pool_from_manifest(manifest, args.pool)
    eao_interval = None
    if args.eao_lo is not None and args.eao_hi is not None:
        eao_interval = (args.eao_lo, args.eao_hi)
    evaluation = selection.evaluate_policy(
        sequences,
        result_sets,
        pool,
        policy,
        level=args.level,
        k=args.interval,
        frame_costs=manifest.frame_costs,
        eao_interval=eao_interval,
    )
    out = Path(args.out)
    bundle = report_mod.build_bundle(evaluation, _run_metadata(args, manifest, pool))
    report_mod.emit(bundle, out, formats=("json", "csv"), figures=False)
    selection.write_plans(out / "plans.jsonl", evaluation.plans)
    r = evaluation.report
    print(
        f"auc {r.auc:.4f}  precision {r.precision:.4f}  ao {r.ao:.4f}  "
        f"sr50 {r.sr50:.4f}  eao_simplified {r.eao:.4f}  fps {evaluation.fps:.2f}"
    )
    print(f"outputs -> {out}")
    return 0


def cmd_ablate(args) -> int:
    manifest, sequences, result_sets = _load(args)
    ranks = (
        [t.strip() for t in args.ranks.split(",")] if args.ranks else list(manifest.trackers)
    )
    sizes = [int(s) for s in args.sizes.split(",")]
    rows = selection.ablate_pool_size(
        sequences,
        result_sets,
        ranks,
        sizes=sizes,
        metric=args.metric,
        k=args.interval,
        frame_costs=manifest.frame_costs,
    )
    written = report_mod.write_ablation(rows, args.out, args.metric, figures=args.figures)
    for row in rows:
        print(f"pool {row.pool_size:3d}: video {row.video:.4f}  frame {row.frame:.4f}")
    print(f"outputs -> {', '.join(str(w) for w in written)}")
    return 0


def cmd_report(args) -> int:
    manifest, sequences, result_sets = _load(args)
    policy = _build_policy(args, manifest)
    pool = selection.pool_from_manifest(manifest, args.pool)
    eao_interval = None
    if args.eao_lo is not None and args.eao_hi is not None:
        eao_interval = (args.eao_lo, args.eao_hi)
    evaluation = selection.evaluate_policy(
        sequences,
        result_sets,
        pool,
        policy,
        level=args.level,
        k=args.interval,
        frame_costs=manifest.frame_costs,
        eao_interval=eao_interval,
    )
    if args.labels:
        labels, _ = labels_mod.read_labels(args.labels)
    else:
        labels = labels_mod.build_label_set(sequences, result_sets, metric=args.metric)
    baselines = {}
    if args.baselines:
        for tracker in pool:
            baselines[tracker] = selection.evaluate_policy(
                sequences,
                result_sets,
                pool,
                selection.FixedPolicy(tracker),
                level="video",
                frame_costs=manifest.frame_costs,
                eao_interval=eao_interval,
            ).report
    bundle = report_mod.build_bundle(
        evaluation,
        _run_metadata(args, manifest, pool),
        labels=labels,
        sequences=sequences,
        baselines=baselines,
    )
    written = report_mod.emit(bundle, args.out, figures=args.figures)
    selection.write_plans(Path(args.out) / "plans.jsonl", evaluation.plans)
    print(f"wrote {len(written) + 1} file(s) -> {args.out}")
    return 0


def _run_metadata(args, manifest, pool) -> dict:
    return {
        "dataset": manifest.name,
        "manifest_sha256": manifest.digest,
        "pool": list(pool),
        "policy": args.policy,
        "metric": args.metric,
        "level": args.level,
        "interval": args.interval if args.level == "frame" else None,
        "split": args.split,
        "seed": args.seed,
    }


if __name__ == "__main__":
    raise SystemExit(main())

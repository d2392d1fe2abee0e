"""Probe command line: render frames, train a probe, export predictions."""

from __future__ import annotations

import argparse
import sys

from .probe import ProbeConfig, export_predictions, train_probe, write_interchange
from .render import render_dataset


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="trackprobe", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="rasterize an annotation tree into frame images")
    p.add_argument("--dataset", required=True, help="dataset root (contains sequences/)")
    p.add_argument("--frames", required=True, help="output frames root")
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--extent", default="640x480", help="annotation coordinate extent, WxH")
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("run", help="train a probe and export interchange predictions")
    p.add_argument("--labels", required=True, help="labeled-dataset file")
    p.add_argument("--frames", required=True, help="frames root")
    p.add_argument("--out", required=True, help="interchange file to write")
    p.add_argument("--backbone", default="tiny")
    p.add_argument("--mode", choices=("linear", "finetune"), default="linear")
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--level", choices=("video", "frame"), default="video")
    p.add_argument("--interval", type=int, default=5)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--videos", default=None, help="comma list (default: all with frames)")
    p.set_defaults(func=_cmd_run)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


def _cmd_render(args) -> int:
    try:
        w, h = (float(v) for v in args.extent.lower().split("x"))
    except ValueError:
        raise ValueError(f"bad --extent {args.extent!r}, expected WxH") from None
    counts = render_dataset(args.dataset, args.frames, size=args.size, image_extent=(w, h))
    print(f"rendered {sum(counts.values())} frames over {len(counts)} sequences -> {args.frames}")
    return 0


def _cmd_run(args) -> int:
    config = ProbeConfig(
        label_file=args.labels,
        frames_root=args.frames,
        backbone=args.backbone,
        mode=args.mode,
        window=args.window,
        epochs=args.epochs,
        lr=args.lr,
        seed=args.seed,
    )
    model = train_probe(config)
    frozen = model.backbone_checksums["before"] == model.backbone_checksums["after"]
    videos = [v.strip() for v in args.videos.split(",")] if args.videos else None
    records = export_predictions(model, videos, level=args.level, k=args.interval)
    write_interchange(args.out, records)
    final_loss = model.loss_curve[-1] if model.loss_curve else float("nan")
    print(
        f"trained {args.mode} probe (backbone frozen: {frozen}), "
        f"final loss {final_loss:.4f}; wrote {len(records)} record(s) -> {args.out}"
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

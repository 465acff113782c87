"""Unified command line: train, inpaint, eval, genmask, serve.

A JSON config file can pre-fill any train option; explicit flags win. The
CLI and the HTTP service call the same underlying functions, so a run from
either surface with identical config and seed yields an identical checkpoint.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time

from . import checkpoint as ckpt_mod
from .image_data import (
    apply_mask,
    load_image,
    load_map_stack,
    load_mask,
    save_image,
    save_map_stack,
    save_mask,
    stack_maps,
)
from .mask_gen import BrushConfig, generate_mask
from .sampler import inpaint_batch, inpaint_svbrdf
from .trainer import TrainConfig, train


def _train_config(args) -> TrainConfig:
    base = {}
    if args.config:
        with open(args.config) as f:
            base = json.load(f)
    overrides = {
        "iterations": args.iters,
        "crop": args.crop,
        "batch": args.batch,
        "seed": args.seed,
        "mode": args.mode,
        "loss_reduction": args.loss_reduction,
    }
    for key, value in overrides.items():
        if value is not None:
            base[key] = value
    allowed = {f.name for f in dataclasses.fields(TrainConfig)}
    unknown = set(base) - allowed
    if unknown:
        raise SystemExit(f"unknown config fields: {sorted(unknown)}")
    return TrainConfig(**base)


def cmd_train(args):
    if args.svbrdf:
        sources = [stack_maps(load_map_stack(args.svbrdf))]
    else:
        sources = [load_image(p) for p in args.image]
    test_mask = load_mask(args.mask) if args.mask else None
    cfg = _train_config(args)
    smallest = min(min(s.height, s.width) for s in sources)
    if cfg.crop > smallest:
        cfg = dataclasses.replace(cfg, crop=smallest, mode="dual_mask")
        print(f"crop reduced to {smallest} (smallest source); dual-mask mode", file=sys.stderr)

    def sink(e):
        print(
            f"iter {e['iteration']:6d}/{e['iterations']}  loss {e['loss']:.5f}  "
            f"ema {e['loss_ema']:.5f}  lr {e['lr']:g}  {e['elapsed_s']:.0f}s",
            file=sys.stderr,
        )

    train(sources, cfg, test_mask=test_mask, progress_sink=sink, out_path=args.out)
    print(args.out)


def cmd_inpaint(args):
    os.makedirs(args.out, exist_ok=True)
    mask = load_mask(args.mask)
    start = time.time()
    if args.svbrdf:
        maps = load_map_stack(args.svbrdf)
        model, sched, _ = ckpt_mod.load_checkpoint(args.ckpt, expect_channels=10)
        for i in range(args.n):
            result = inpaint_svbrdf(model, sched, maps, mask, seed=args.seed + i)
            save_map_stack(result, os.path.join(args.out, f"sample_{i:03d}"))
        names = [f"sample_{i:03d}/" for i in range(args.n)]
    else:
        img = load_image(args.image)
        model, sched, _ = ckpt_mod.load_checkpoint(args.ckpt, expect_channels=img.channels)
        y = apply_mask(img, mask)
        samples = inpaint_batch(model, sched, y, mask, args.n, seed=args.seed)
        names = []
        for i, s in enumerate(samples):
            name = f"sample_{i:03d}.png"
            save_image(s, os.path.join(args.out, name))
            names.append(name)
    manifest = {
        "seed": args.seed,
        "n": args.n,
        "T": sched.T,
        "checkpoint": args.ckpt,
        "outputs": names,
        "wall_s": time.time() - start,
    }
    with open(os.path.join(args.out, "run.json"), "w") as f:
        json.dump(manifest, f, indent=1)
    print(args.out)


def cmd_eval(args):
    from .metrics import evaluate_many

    names = sorted(os.listdir(args.pred))
    triples = []
    for name in names:
        if not name.endswith(".png"):
            continue
        pred = load_image(os.path.join(args.pred, name))
        gt = load_image(os.path.join(args.gt, name))
        hole = None
        if args.masks:
            mask_path = os.path.join(args.masks, name)
            if os.path.isfile(mask_path):
                hole = load_mask(mask_path)
        triples.append((name, pred, gt, hole))
    if not triples:
        raise SystemExit(f"no PNG pairs found under {args.pred}")
    report = evaluate_many(triples)
    report.write_csv(args.out)
    summary = report.aggregates()
    with open(args.out + ".summary.json", "w") as f:
        json.dump(summary, f, indent=1)
    for metric, agg in summary.items():
        print(f"{metric:10s} mean {agg['mean']:.4f}  std {agg['std']:.4f}")


def cmd_genmask(args):
    cfg = BrushConfig(target_size=args.size)
    save_mask(generate_mask(cfg, args.seed), args.out)
    print(args.out)


def cmd_serve(args):
    from .service import serve

    serve(port=args.port, workdir=args.workdir, static_dir=args.static)


def build_parser():
    p = argparse.ArgumentParser(prog="inpaint-forge", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a denoiser on one image (or a few)")
    t.add_argument("--image", action="append", default=[], help="source PNG; repeatable")
    t.add_argument("--svbrdf", help="material directory with {diffuse,normals,roughness,specular}.png")
    t.add_argument("--mask", help="test mask PNG (pixels excluded from the loss)")
    t.add_argument("--out", required=True, help="checkpoint output path")
    t.add_argument("--config", help="JSON file with TrainConfig fields")
    t.add_argument("--iters", type=int)
    t.add_argument("--crop", type=int)
    t.add_argument("--batch", type=int)
    t.add_argument("--seed", type=int)
    t.add_argument("--mode", choices=["subregion", "dual_mask"])
    t.add_argument("--loss-reduction", dest="loss_reduction", choices=["mean", "sum"])
    t.set_defaults(func=cmd_train)

    i = sub.add_parser("inpaint", help="sample inpaintings from a checkpoint")
    i.add_argument("--ckpt", required=True)
    i.add_argument("--image", help="input PNG")
    i.add_argument("--svbrdf", help="material directory instead of --image")
    i.add_argument("--mask", required=True, help="hole mask PNG (white = hole)")
    i.add_argument("--n", type=int, default=1)
    i.add_argument("--seed", type=int, default=0)
    i.add_argument("--out", required=True, help="output directory")
    i.set_defaults(func=cmd_inpaint)

    e = sub.add_parser("eval", help="score predictions against ground truth")
    e.add_argument("--pred", required=True)
    e.add_argument("--gt", required=True)
    e.add_argument("--masks", help="optional hole masks, matched by filename")
    e.add_argument("--out", required=True, help="CSV report path")
    e.set_defaults(func=cmd_eval)

    g = sub.add_parser("genmask", help="generate a brushstroke mask")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--size", type=int, default=256)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_genmask)

    s = sub.add_parser("serve", help="run the HTTP service for the studio UI")
    s.add_argument("--port", type=int, default=8765)
    s.add_argument("--workdir", default=None)
    s.add_argument("--static", default=None, help="directory of built studio assets")
    s.set_defaults(func=cmd_serve)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "train" and not args.image and not args.svbrdf:
        raise SystemExit("train needs --image or --svbrdf")
    if args.command == "inpaint" and not args.image and not args.svbrdf:
        raise SystemExit("inpaint needs --image or --svbrdf")
    args.func(args)


if __name__ == "__main__":
    main()

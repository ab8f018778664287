"""Command-line interface.

Subcommands: skin fit/segment/bootstrap, fuse, ga-train, mlp-train,
mlp-fuse, fcn convert/heatmap, smooth, evaluate.  All structured-file
errors exit with a nonzero status and a one-line message on stderr.
"""

import argparse
import json
import os
import sys

import numpy as np

from fusionkit import active, blobs, ensemble, fcn, ga, harness, images, mlp, skin, temporal
from fusionkit.errors import FusionkitError


def _parse_min_area(text, image_shape):
    if text == "auto":
        return blobs.default_min_area(image_shape)
    return int(text)


def _parse_grid(text):
    try:
        start, step, stop = (float(v) for v in text.split(":"))
    except ValueError:
        raise FusionkitError(f"bad grid {text!r}, expected start:step:stop") from None
    if step <= 0 or stop < start:
        raise FusionkitError(f"bad grid {text!r}")
    return np.arange(start, stop + step / 2.0, step)


def _parse_fusion(text, records):
    if text == "majority":
        return "majority"
    kind, _, arg = text.partition(":")
    if kind == "weights" and arg:
        weights, names = ga.load_weights(arg)
        if records and names is not None and names != tuple(records[0].outputs):
            raise FusionkitError(
                f"weights file classifiers {names} do not match the log"
            )
        return ("weights", weights)
    if kind == "mlp" and arg:
        return ("mlp", mlp.load_mlp(arg))
    raise FusionkitError(f"unknown fusion {text!r}")


def _cmd_skin_fit(args):
    features, labels = skin.load_pixel_file(args.pixels, variant=args.variant)
    model = skin.fit(features, labels)
    skin.save_model(model, args.out)
    print(f"fitted {model.variant} model on {features.shape[0]} pixels -> {args.out}")
    return 0


def _cmd_skin_segment(args):
    model = skin.load_model(args.model)
    image = images.read_ppm(args.image)
    heat, mask = skin.segment(model, image)
    min_area = _parse_min_area(args.min_area, image.shape)
    if min_area > 0 and mask.any():
        mask = blobs.filter_small(blobs.label_components(mask), min_area)
    images.write_pgm(args.heatmap, skin.heatmap_to_u8(heat))
    images.write_pgm(args.mask, skin.mask_to_u8(mask))
    print(
        f"segmented {args.image}: {int(mask.sum())}/{mask.size} skin pixels "
        f"(min blob area {min_area})"
    )
    return 0


def _cmd_skin_bootstrap(args):
    v1_model = skin.load_model(args.v1_model)
    mask_set = active.load_manifest(args.manifest, pixels_per_image=args.pixels_per_image)
    model = active.bootstrap(v1_model, mask_set, fraction=args.fraction, seed=args.seed)
    skin.save_model(model, args.out)
    print(f"bootstrapped v2 model from {len(mask_set.entries)} images -> {args.out}")
    return 0


def _cmd_fuse(args):
    records = harness.load_log(args.log)
    outputs, truths, _ = ensemble.stack_outputs(records)
    if args.mode == "majority":
        fused = ensemble.majority_vote(outputs)
    else:
        if not args.weights:
            raise FusionkitError("--weights is required with --mode weighted")
        weights, _ = ga.load_weights(args.weights)
        fused = ensemble.weighted_vote(outputs, weights)
    fused_records = [
        ensemble.PredictionRecord(
            frame_id=rec.frame_id,
            session_id=rec.session_id,
            timestamp_s=rec.timestamp_s,
            true_class=rec.true_class,
            outputs={"fused": fused[i]},
        )
        for i, rec in enumerate(records)
    ]
    if args.out:
        harness.save_log(args.out, fused_records)
    else:
        sys.stdout.write(harness.log_to_string(fused_records))
    print(
        f"{args.mode} fusion: NLL {ensemble.nll(fused, truths):.4f}, "
        f"accuracy {ensemble.accuracy(fused, truths):.2f}%"
    )
    return 0


def _cmd_ga_train(args):
    records = harness.load_log(args.log)
    overrides = {}
    if args.config:
        with open(args.config) as f:
            overrides = json.load(f)
    overrides["seed"] = args.seed
    cfg = ga.GAConfig(**overrides)
    names = tuple(records[0].outputs)
    best = ga.evolve(cfg, records, len(names))
    ga.save_weights(args.out, best.genes, names)
    print(f"evolved weights (full-data NLL {-best.fitness:.4f}) -> {args.out}")
    return 0


def _cmd_mlp_train(args):
    records = harness.load_log(args.log)
    fuser = mlp.train(records, seed=args.seed, reg_lambda=args.reg_lambda,
                      hidden=args.hidden)
    mlp.save_mlp(fuser, args.out)
    inputs, truths, _ = mlp.records_to_inputs(records)
    print(
        f"trained MLP fuser (train loss {mlp.loss(fuser, inputs, truths):.4f}) "
        f"-> {args.out}"
    )
    return 0


def _cmd_mlp_fuse(args):
    records = harness.load_log(args.log)
    fuser = mlp.load_mlp(args.model)
    fused = mlp.predict(fuser, records)
    truths = np.array([rec.true_class for rec in records])
    fused_records = [
        ensemble.PredictionRecord(
            frame_id=rec.frame_id,
            session_id=rec.session_id,
            timestamp_s=rec.timestamp_s,
            true_class=rec.true_class,
            outputs={"fused": fused[i]},
        )
        for i, rec in enumerate(records)
    ]
    if args.out:
        harness.save_log(args.out, fused_records)
    else:
        sys.stdout.write(harness.log_to_string(fused_records))
    print(
        f"mlp fusion: NLL {ensemble.nll(fused, truths):.4f}, "
        f"accuracy {ensemble.accuracy(fused, truths):.2f}%"
    )
    return 0


def _parse_canonical(text):
    try:
        h, w, c = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise FusionkitError(f"bad canonical shape {text!r}, expected HxWxC") from None
    return h, w, c


def _cmd_fcn_convert(args):
    net = fcn.load_net(args.net)
    converted = fcn.fc_to_conv(net, _parse_canonical(args.canonical))
    fcn.save_net(converted, args.out)
    print(f"converted {args.net} at canonical {args.canonical} -> {args.out}")
    return 0


def _cmd_fcn_heatmap(args):
    net = fcn.load_net(args.net)
    image = images.read_ppm(args.image).astype(np.float64)
    heat = fcn.heatmap(net, image)
    for channel in (0, 1):
        path = f"{args.out}_c{channel}.pgm"
        images.write_pgm(path, skin.heatmap_to_u8(heat[:, :, channel]))
    print(f"heatmap {heat.shape[0]}x{heat.shape[1]} -> {args.out}_c0.pgm/_c1.pgm")
    return 0


def _cmd_smooth(args):
    records = harness.load_log(args.log)
    if args.weights == "majority":
        fusion = "majority"
    else:
        fusion = ("weights", ga.load_weights(args.weights)[0])
    fused, _, _ = harness.fuse_records(records, fusion)
    grid = _parse_grid(args.m_grid)
    points = temporal.sweep(records, fused, grid, fps=args.fps)
    lines = ["window_s,accuracy_pct"]
    lines += [f"{m:g},{acc:.4f}" for m, acc in points]
    try:
        fit = temporal.fit_gaussian(points)
        lines.append(
            f"# gaussian_fit amplitude={fit.amplitude!r} mean={fit.mean!r} "
            f"sigma={fit.sigma!r} offset={fit.offset!r}"
        )
        print(f"best window near {fit.mean:.2f} s (fitted curve mean)")
    except (FusionkitError, ValueError) as exc:
        lines.append(f"# gaussian_fit failed: {exc}")
        print(f"gaussian fit failed: {exc}")
    with open(args.report, "w") as f:
        f.write("\n".join(lines) + "\n")
    print(f"sweep over {len(points)} windows -> {args.report}")
    return 0


def _parse_split(text):
    kind, _, rest = text.partition(":")
    if kind == "random":
        fraction_text, _, seed_text = rest.partition(":")
        return harness.SplitSpec(
            mode="random",
            test_fraction=float(fraction_text),
            seed=int(seed_text) if seed_text else 0,
        )
    if kind == "sessions":
        with open(rest) as f:
            sessions = tuple(ln.strip() for ln in f if ln.strip())
        return harness.SplitSpec(mode="by_session", test_sessions=sessions)
    raise FusionkitError(f"unknown split {text!r}")


def _cmd_evaluate(args):
    records = harness.load_log(args.log)
    train, test = harness.split(records, _parse_split(args.split))
    if not test:
        raise FusionkitError("split produced an empty test set")
    fusion = _parse_fusion(args.fusion, test)
    rep = harness.report(test, fusion)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "metrics.csv"), "w") as f:
        f.write(rep.metrics_csv())
    with open(os.path.join(args.out, "confusion.csv"), "w") as f:
        f.write(rep.confusion_csv())
    with open(os.path.join(args.out, "report.txt"), "w") as f:
        f.write(rep.text())
    print(f"train {len(train)} / test {len(test)} records")
    print(rep.text())
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="fusionkit")
    sub = parser.add_subparsers(dest="command", required=True)

    skin_p = sub.add_parser("skin", help="skin segmentation models")
    skin_sub = skin_p.add_subparsers(dest="subcommand", required=True)
    p = skin_sub.add_parser("fit", help="fit a model from a labeled pixel file")
    p.add_argument("--pixels", required=True)
    p.add_argument("--variant", choices=("v1", "v2"), default="v1")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_skin_fit)
    p = skin_sub.add_parser("segment", help="segment a PPM image")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--heatmap", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--min-area", default="auto",
                   help="drop skin blobs below this pixel count (int or 'auto')")
    p.set_defaults(func=_cmd_skin_segment)
    p = skin_sub.add_parser("bootstrap",
                            help="retrain with coordinates from curated masks")
    p.add_argument("--v1-model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--pixels-per-image", type=int, default=100)
    p.add_argument("--fraction", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_skin_bootstrap)

    p = sub.add_parser("fuse", help="fuse classifier outputs in a log")
    p.add_argument("--log", required=True)
    p.add_argument("--mode", choices=("majority", "weighted"), required=True)
    p.add_argument("--weights")
    p.add_argument("--out", help="fused log path (default: stdout)")
    p.set_defaults(func=_cmd_fuse)

    p = sub.add_parser("ga-train", help="evolve ensemble weights")
    p.add_argument("--log", required=True)
    p.add_argument("--config", help="JSON file of search parameters")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ga_train)

    p = sub.add_parser("mlp-train", help="train the MLP fuser")
    p.add_argument("--log", required=True)
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--lambda", dest="reg_lambda", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_mlp_train)

    p = sub.add_parser("mlp-fuse", help="fuse a log with a trained MLP")
    p.add_argument("--log", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", help="fused log path (default: stdout)")
    p.set_defaults(func=_cmd_mlp_fuse)

    fcn_p = sub.add_parser("fcn", help="dense nets and sliding-window heatmaps")
    fcn_sub = fcn_p.add_subparsers(dest="subcommand", required=True)
    p = fcn_sub.add_parser("convert", help="rewrite FC layers as convolutions")
    p.add_argument("--net", required=True)
    p.add_argument("--canonical", required=True, help="design input size, HxWxC")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fcn_convert)
    p = fcn_sub.add_parser("heatmap", help="two-channel detection heatmap")
    p.add_argument("--net", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True, help="output PGM path prefix")
    p.set_defaults(func=_cmd_fcn_heatmap)

    p = sub.add_parser("smooth", help="window-accuracy sweep with curve fit")
    p.add_argument("--log", required=True)
    p.add_argument("--weights", default="majority",
                   help="weights file, or 'majority'")
    p.add_argument("--fps", type=float, default=30.0)
    p.add_argument("--m-grid", default="0:0.25:10", help="start:step:stop seconds")
    p.add_argument("--report", required=True, help="output CSV path")
    p.set_defaults(func=_cmd_smooth)

    p = sub.add_parser("evaluate", help="split, fuse, and report metrics")
    p.add_argument("--log", required=True)
    p.add_argument("--split", required=True,
                   help="random:FRACTION:SEED or sessions:FILE")
    p.add_argument("--fusion", default="majority",
                   help="majority, weights:FILE, or mlp:FILE")
    p.add_argument("--out", required=True, help="report directory")
    p.set_defaults(func=_cmd_evaluate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FusionkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line surface: train, colorize, transfer, sample, eval.

Exit codes: 0 success, 1 usage error, 2 runtime error.  All randomness
flows from --seed; identical invocations produce byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import (
    checkpoint,
    colorspace,
    config as config_mod,
    decode,
    figures,
    imageio,
    metrics,
    net,
    transfer,
)

_IMAGE_EXTS = (".png", ".ppm", ".pgm")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="histocolor", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("train", help="train a model on a directory of color images")
    p.add_argument("--config", required=True, help="key=value pipeline config file")
    p.add_argument("--data", required=True, help="directory of training images")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=None, help="override config epochs")

    p = sub.add_parser("colorize", help="colorize a grayscale image")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dump-field", default=None, help="also dump the histogram field")
    p.add_argument(
        "--policy",
        choices=decode.METHODS,
        default=None,
        help="decode method (default: circular-expectation hue, median chroma)",
    )
    p.add_argument("--no-fading", action="store_true", help="disable chromatic fading")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("transfer", help="colorize biased toward a target's histogram")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--target", required=True, help="reference color image")
    p.add_argument("--method", choices=("quantile", "energy"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0,
                   help="histogram matching weight (energy method)")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("sample", help="draw diverse colorizations and an uncertainty map")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--n", type=int, required=True, help="number of samples")
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--uncertainty", required=True, help="uncertainty map output path")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("eval", help="score predictions against references")
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--gt-dir", required=True)
    p.add_argument("--report", required=True, help="report file; curve and figures "
                   "are written alongside")
    return parser


def _list_images(directory) -> list[str]:
    if not os.path.isdir(directory):
        raise RuntimeError(f"{directory}: not a directory")
    names = sorted(
        n for n in os.listdir(directory) if n.lower().endswith(_IMAGE_EXTS)
    )
    if not names:
        raise RuntimeError(f"{directory}: no images found")
    return [os.path.join(directory, n) for n in names]


def _load_gray(path) -> np.ndarray:
    img = imageio.load_image(path)
    return colorspace.desaturate(img) if img.ndim == 3 else img


def _load_rgb(path) -> np.ndarray:
    img = imageio.load_image(path)
    if img.ndim != 3:
        raise RuntimeError(f"{path}: expected a color image")
    return img


def _policy_from_args(args) -> decode.DecodePolicy:
    fading = not args.no_fading
    if args.policy is None:
        return decode.DecodePolicy(fading=fading, rng_seed=args.seed)
    return decode.DecodePolicy.from_name(args.policy, fading=fading, seed=args.seed)


def _cmd_train(args) -> int:
    cfg = config_mod.with_epochs(config_mod.load_config(args.config), args.epochs)
    paths = _list_images(args.data)
    pairs = []
    for path in paths:
        rgb = _load_rgb(path)
        pairs.append((colorspace.desaturate(rgb), rgb))

    net_cfg = config_mod.build_net_config(cfg)
    tables = config_mod.build_tables(cfg)
    loss_cfg = config_mod.build_loss_config(cfg)
    model = net.init_model(net_cfg, seed=args.seed)

    if cfg.rebalance:
        probe = [gray for gray, _ in pairs[: min(8, len(pairs))]]
        net.rebalance(model, net.compute_tap_moments(model, probe))

    seeds = np.random.SeedSequence(args.seed)
    perm_rng = np.random.default_rng(seeds.spawn(1)[0])
    for epoch in range(cfg.epochs):
        order = perm_rng.permutation(len(pairs))
        losses = []
        for start in range(0, len(order), cfg.batch_size):
            batch = [pairs[i] for i in order[start : start + cfg.batch_size]]
            step_seed = seeds.spawn(1)[0]
            model, loss = net.train_step(
                model, batch, loss_cfg, tables, cfg.lr, step_seed
            )
            losses.append(loss)
        print(f"epoch {epoch + 1}/{cfg.epochs}: loss {float(np.mean(losses)):.6f}")
    checkpoint.save_checkpoint(model, cfg, args.out)
    print(f"saved checkpoint to {args.out}")
    return 0


def _cmd_colorize(args) -> int:
    model, cfg = checkpoint.load_checkpoint(args.ckpt)
    gray = _load_gray(args.input)
    if cfg.loss == "lab_l2":
        if args.dump_field is not None:
            raise RuntimeError(
                "this checkpoint regresses values directly; it has no "
                "histogram field to dump"
            )
        values = net.predict_values(model, gray)["ab_values"]
        rgb = decode.render_regression(values, gray)
    else:
        field = net.predict_field(model, gray)
        tables = config_mod.build_tables(cfg)
        if args.dump_field is not None:
            checkpoint.save_field(field, tables, args.dump_field)
        rgb = decode.render(field, gray, tables, _policy_from_args(args))
    imageio.save_image(rgb, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_transfer(args) -> int:
    model, cfg = checkpoint.load_checkpoint(args.ckpt)
    gray = _load_gray(args.input)
    target = _load_rgb(args.target)
    if cfg.loss == "lab_l2":
        raise RuntimeError("histogram transfer needs a histogram-predicting checkpoint")
    tables = config_mod.build_tables(cfg)
    policy = decode.DecodePolicy(rng_seed=args.seed)
    if args.method == "quantile":
        field = net.predict_field(model, gray)
        source = decode.render(field, gray, tables, policy)
        rgb = transfer.quantile_match(source, target)
    else:
        field = net.predict_field(model, gray)
        targets = transfer.image_histograms(target, tables)
        tcfg = transfer.TransferConfig(lam=args.lam)
        posterior, _, energy = transfer.energy_minimize(field, targets, tcfg)
        print(f"final energy {energy:.6f}")
        rgb = decode.render(posterior, gray, tables, policy)
    imageio.save_image(rgb, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_sample(args) -> int:
    if args.n < 1:
        raise RuntimeError("--n must be at least 1")
    model, cfg = checkpoint.load_checkpoint(args.ckpt)
    if cfg.loss == "lab_l2":
        raise RuntimeError("sampling needs a histogram-predicting checkpoint")
    gray = _load_gray(args.input)
    tables = config_mod.build_tables(cfg)
    field = net.predict_field(model, gray)
    biases = transfer.rotation_biases(tables, args.n)
    policy = decode.DecodePolicy(rng_seed=args.seed)
    images = transfer.biased_samples(field, biases, gray, tables, policy, args.seed)
    for i, img in enumerate(images):
        path = f"{args.out_prefix}{i:03d}.png"
        imageio.save_image(img, path)
        print(f"wrote {path}")
    umap = transfer.uncertainty_map(field, tables, policy)
    imageio.save_image(np.clip(umap, 0.0, 1.0), args.uncertainty)
    print(f"wrote {args.uncertainty}")
    return 0


def _cmd_eval(args) -> int:
    pred_paths = _list_images(args.pred_dir)
    preds, gts = [], []
    for path in pred_paths:
        name = os.path.basename(path)
        gt_path = os.path.join(args.gt_dir, name)
        if not os.path.exists(gt_path):
            raise RuntimeError(f"{gt_path}: no matching reference image")
        preds.append(_load_rgb(path))
        gts.append(_load_rgb(gt_path))
    report = metrics.evaluate(preds, gts)
    with open(args.report, "w", encoding="utf-8") as fh:
        fh.write(metrics.format_report(report))
    curve_path = args.report + ".curve"
    with open(curve_path, "w", encoding="utf-8") as fh:
        fh.write(metrics.format_curve(report))
    figures.save_cumulative_curve(report.cumulative_curve, args.report + ".curve.png")
    figures.save_psnr_histogram(report.per_image_psnr, args.report + ".psnr.png")
    print(f"rmse_ab = {report.rmse_ab:.6f}")
    print(f"psnr_mean_db = {report.psnr_mean_db:.6f}")
    print(f"wrote {args.report}")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "colorize": _cmd_colorize,
    "transfer": _cmd_transfer,
    "sample": _cmd_sample,
    "eval": _cmd_eval,
}


def execute(argv) -> int:
    """Run one CLI invocation; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except (
        ValueError,
        RuntimeError,
        OSError,
        net.TrainingError,
        checkpoint.CheckpointError,
        imageio.ImageFormatError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(execute(sys.argv[1:]))


if __name__ == "__main__":
    main()

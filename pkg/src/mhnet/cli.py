"""Command-line interface.

Subcommands: restore, train, gradcheck, complexity, metrics, degrade.
Exit codes: 0 success, 1 usage, 2 IO/format, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_NUMERIC = 3

GRADCHECK_TOLERANCE = 1e-4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> _Parser:
    parser = _Parser(prog="mhnet", description="mixed-hierarchy image restoration")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("restore", help="restore one image with a trained checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ref", help="clean reference; prints psnr/ssim when given")

    p = sub.add_parser("train", help="train from a config file and a paired corpus")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True,
                   help="directory with degraded/ and clean/ PPM pairs")
    p.add_argument("--out", required=True, help="checkpoint output path")

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p.add_argument("--module", default=None,
                   help="restrict to one module or op (default: everything)")

    p = sub.add_parser("complexity", help="parameter/MAC accounting report")
    p.add_argument("--width", type=int, choices=(32, 64), required=True)
    p.add_argument("--size", required=True, help="input size as HxW, e.g. 256x256")
    p.add_argument("--csv", default=None, help="write the per-layer table here")

    p = sub.add_parser("metrics", help="PSNR/SSIM between two images")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--y", action="store_true", help="evaluate on the luma channel")

    p = sub.add_parser("degrade", help="apply a synthetic degradation spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the spec seed")
    return parser


def _compare_images(test_img, ref_img, use_y: bool):
    from .metrics import MetricReport, psnr, rgb_to_y, ssim
    from .ppm import to_model_tensor
    from .tensor import ShapeError

    if (test_img.width, test_img.height) != (ref_img.width, ref_img.height):
        raise ShapeError("metrics: image dimensions differ")
    t01 = to_model_tensor(test_img).data
    r01 = to_model_tensor(ref_img).data
    if use_y:
        t01 = rgb_to_y(t01)
        r01 = rgb_to_y(r01)
        mode = "y"
    else:
        mode = "rgb"
    psnr_db = psnr(t01 * 255.0, r01 * 255.0, n=8)
    ssim_val = ssim(t01, r01, data_range=1.0)
    return MetricReport(psnr_db=psnr_db, ssim=ssim_val, channel_mode=mode)


def _cmd_restore(args) -> int:
    from .checkpoint import load_checkpoint
    from .metrics import PSNR_CAP_DB
    from .ppm import crop_to, from_model_tensor, pad_reflect_to_multiple, read_ppm, \
        to_model_tensor, write_ppm

    model = load_checkpoint(args.ckpt)
    img = read_ppm(args.input)
    x = to_model_tensor(img)
    padded, dims = pad_reflect_to_multiple(x, 16)
    restored = crop_to(model.forward(padded), dims)
    out_img = from_model_tensor(restored)
    write_ppm(out_img, args.out)
    if args.ref:
        report = _compare_images(out_img, read_ppm(args.ref), use_y=False)
        print(report.line())
    return EXIT_OK


def _cmd_train(args) -> int:
    from .config import load_kv
    from .model import MHNet, ModelConfig
    from .train import TrainConfig, load_corpus, trace_line, train

    kv = load_kv(args.config)
    model_kv = {k[len("model."):]: v for k, v in kv.items() if k.startswith("model.")}
    train_kv = {k: v for k, v in kv.items() if not k.startswith("model.")}
    model_cfg = ModelConfig.from_kv(model_kv)
    train_cfg = TrainConfig.from_kv(train_kv)
    corpus = load_corpus(args.data, patch=train_cfg.patch)
    model = MHNet(model_cfg, seed=train_cfg.seed)
    _, trace = train(model, train_cfg, corpus, ckpt_path=args.out)
    for entry in trace:
        print(trace_line(entry))
    return EXIT_OK


def _cmd_gradcheck(args) -> int:
    from .gradcheck_suite import run_suite

    worst = 0.0
    try:
        for name, err in run_suite(args.module):
            status = "PASS" if err < GRADCHECK_TOLERANCE else "FAIL"
            print(f"{name}: max_rel_err={err:.3e} {status}")
            worst = max(worst, err)
    except KeyError as e:
        print(f"mhnet gradcheck: {e.args[0]}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK if worst < GRADCHECK_TOLERANCE else EXIT_NUMERIC


def _cmd_complexity(args) -> int:
    from .complexity import check_against_reference, report_from_config
    from .model import ModelConfig
    from .tensor import ShapeError

    try:
        h_str, w_str = args.size.lower().split("x")
        h, w = int(h_str), int(w_str)
    except ValueError:
        raise ShapeError(f"--size must look like 256x256, got {args.size!r}")
    report = report_from_config(ModelConfig(width=args.width), h, w)
    print(f"params={report.total_params} ({report.total_params / 1e6:.2f}M)")
    print(f"macs={report.total_macs} ({report.total_macs / 1e9:.2f}G)")
    for key, value in report.attention_formulas.items():
        print(f"{key}={value}")
    for problem in check_against_reference(report, args.width):
        print(f"warning: {problem}", file=sys.stderr)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(report.csv())
    return EXIT_OK


def _cmd_metrics(args) -> int:
    from .ppm import read_ppm

    report = _compare_images(read_ppm(args.test), read_ppm(args.ref), use_y=args.y)
    print(report.line())
    return EXIT_OK


def _cmd_degrade(args) -> int:
    from .config import load_kv
    from .degrade import DegradeSpec, apply
    from .ppm import from_model_tensor, read_ppm, to_model_tensor, write_ppm
    from .tensor import Tensor

    spec = DegradeSpec.from_kv(load_kv(args.spec))
    if args.seed is not None:
        spec.seed = args.seed
    x = to_model_tensor(read_ppm(args.input))
    degraded = apply(spec, x)
    write_ppm(from_model_tensor(Tensor(degraded)), args.out)
    return EXIT_OK


_COMMANDS = {
    "restore": _cmd_restore,
    "train": _cmd_train,
    "gradcheck": _cmd_gradcheck,
    "complexity": _cmd_complexity,
    "metrics": _cmd_metrics,
    "degrade": _cmd_degrade,
}


def cli_main(argv) -> int:
    from .checkpoint import CheckpointError
    from .config import ConfigError
    from .degrade import DegradeSpecError
    from .ppm import PPMError
    from .tensor import NumericalError, ShapeError

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (PPMError, CheckpointError, ConfigError, DegradeSpecError, ShapeError,
            OSError) as e:
        print(f"mhnet {args.command}: {e}", file=sys.stderr)
        return EXIT_IO
    except NumericalError as e:
        print(f"mhnet {args.command}: {e}", file=sys.stderr)
        return EXIT_NUMERIC


def main():
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()

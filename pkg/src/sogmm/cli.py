"""Command-line front end: ``sogmm fit | modes | reconstruct | eval``.

Exit codes: 0 success, 1 usage or parameter error, 2 I/O error,
3 numerical failure.  Data goes to files (or stdout for the fit summary);
logs go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from pathlib import Path

from .core import (
    CameraIntrinsics,
    EmConfig,
    MeanShiftConfig,
    depth_to_pointcloud,
    extract_depth_intensity,
)
from .exceptions import (
    NumericalFailureError,
    OutOfSupportError,
    ParameterError,
    SogmmError,
    SogmmIOError,
)
from .fit import fit_sogmm
from .io import export_ply, load_image_pair, load_model, save_model
from .meanshift import run_mean_shift
from .metrics import (
    REPORT_FIELDS,
    mean_reconstruction_error,
    model_memory_bytes,
    psnr,
    write_report,
)
from .recon import reconstruct
from .regress import regress_image

logger = logging.getLogger("sogmm")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3
MODES_FIELDS = ("sigma", "M", "iterations", "wall_ms")

_REPORT_HELP = "CSV columns: " + ",".join(REPORT_FIELDS)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _intrinsics(text):
    try:
        return CameraIntrinsics.from_string(text)
    except ParameterError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _float_list(text):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from exc
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _add_images(p, with_intrinsics=True):
    p.add_argument("--depth", required=True, type=Path, help="16-bit depth PNG/PGM")
    p.add_argument("--gray", required=True, type=Path, help="8/16-bit gray PNG/PGM")
    p.add_argument("--depth-scale", type=float, default=1000.0,
                   help="raw depth units per meter (default 1000)")
    if with_intrinsics:
        p.add_argument("--intrinsics", required=True, type=_intrinsics,
                       metavar="FX,FY,CX,CY")


def _add_mean_shift(p):
    p.add_argument("--kernel", choices=("flat", "gaussian"), default="flat")
    p.add_argument("--variant", choices=("gbms", "gms"), default="gbms")
    p.add_argument("--stride", type=int, default=1,
                   help="pixel stride for mode seeking (default 1)")
    p.add_argument("--max-iter", type=int, default=100, help="mean-shift iteration cap")


def build_parser():
    parser = _Parser(prog="sogmm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit a model to an image pair",
                       description="Fit a model and print one summary row. " + _REPORT_HELP)
    _add_images(p)
    p.add_argument("--sigma", type=float, default=0.01, help="bandwidth (default 0.01)")
    _add_mean_shift(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--name", help="dataset label for the summary (default: depth file stem)")
    p.add_argument("--out", required=True, type=Path, help="model file to write")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("modes", help="component count over a bandwidth grid",
                       description="CSV columns: " + ",".join(MODES_FIELDS)
                       + ". One row per grid entry, duplicates kept.")
    _add_images(p, with_intrinsics=False)
    p.add_argument("--sigma-grid", required=True, type=_float_list, metavar="S1,S2,...")
    _add_mean_shift(p)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_modes)

    p = sub.add_parser("reconstruct", help="sample a colored point cloud from a model")
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--samples", required=True, type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--binary", action="store_true", help="binary little-endian PLY")
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("eval", help="PSNR, MRE and memory of a model on an image pair",
                       description="Evaluate a model. " + _REPORT_HELP)
    p.add_argument("--model", required=True, type=Path)
    _add_images(p)
    p.add_argument("--samples", type=int, help="reconstruction size (default 3x valid pixels)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--symmetric-mre", action="store_true",
                   help="average both nearest-neighbour directions")
    p.add_argument("--name", help="dataset label (default: depth file stem)")
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_eval)
    return parser


def _ms_config(args, sigma):
    return MeanShiftConfig(bandwidth=sigma, kernel=args.kernel, variant=args.variant,
                           max_iterations=args.max_iter, stride=args.stride)


def cmd_fit(args):
    pair = load_image_pair(args.depth, args.gray, args.depth_scale)
    start = time.perf_counter()
    model = fit_sogmm(pair, args.intrinsics, _ms_config(args, args.sigma),
                      EmConfig(rng_seed=args.seed))
    fit_ms = (time.perf_counter() - start) * 1e3
    save_model(model, args.sigma, args.out)
    write_report([{
        "dataset": args.name or args.depth.stem,
        "sigma": args.sigma,
        "M": model.n_components,
        "mem_bytes": model_memory_bytes(model.n_components),
        "fit_ms": round(fit_ms, 3),
    }], sys.stdout)


def cmd_modes(args):
    pair = load_image_pair(args.depth, args.gray, args.depth_scale)
    rows = []
    for sigma in args.sigma_grid:
        cfg = _ms_config(args, sigma)
        data = extract_depth_intensity(pair.subsample(cfg.stride))
        start = time.perf_counter()
        modes = run_mean_shift(data, cfg)
        wall_ms = (time.perf_counter() - start) * 1e3
        logger.info("sigma=%g: %d modes in %d iterations", sigma, modes.count, modes.n_iter)
        rows.append((repr(sigma), modes.count, modes.n_iter, round(wall_ms, 3)))
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MODES_FIELDS)
        writer.writerows(rows)


def cmd_reconstruct(args):
    model, _ = load_model(args.model)
    cloud = reconstruct(model, args.samples, args.seed)
    export_ply(cloud, args.out, binary=args.binary)


def cmd_eval(args):
    model, sigma = load_model(args.model)
    pair = load_image_pair(args.depth, args.gray, args.depth_scale)
    truth = depth_to_pointcloud(pair, args.intrinsics)
    regressed = regress_image(model, args.intrinsics, pair.depth)
    n = args.samples if args.samples is not None else 3 * truth.shape[0]
    recon = reconstruct(model, n, args.seed)
    row = {
        "dataset": args.name or args.depth.stem,
        "sigma": sigma,
        "M": model.n_components,
        "psnr_db": psnr(pair.gray, regressed, pair.valid_mask),
        "mre_m": mean_reconstruction_error(recon, truth, symmetric=args.symmetric_mre),
        "mem_bytes": model_memory_bytes(model.n_components),
    }
    with open(args.out, "w", newline="") as fh:
        write_report([row], fh)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        print(parser.format_usage(), end="", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        args.func(args)
    except (SogmmIOError, OSError) as exc:
        print(f"sogmm {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericalFailureError, OutOfSupportError) as exc:
        print(f"sogmm {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SogmmError as exc:
        print(f"sogmm {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

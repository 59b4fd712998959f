"""Command-line entry point.

Exit codes: 0 success (for ``complete``: fit reached, or any fixed-rank
run), 2 usage or input error, 3 stopped at the rank cap, 4 stopped at the
iteration cap.
"""

import argparse
import csv
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from . import datagen, io, metrics
from .fr_spc import FrSpcConfig, fr_spc_solve
from .spc import FIT_REACHED, MAX_ITERS, MAX_RANK, SpcConfig, spc_solve, spc_solve_simple

logger = logging.getLogger("spcomplete")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MAX_RANK = 3
EXIT_MAX_ITERS = 4
_EXIT_FOR_REASON = {FIT_REACHED: EXIT_OK, MAX_RANK: EXIT_MAX_RANK, MAX_ITERS: EXIT_MAX_ITERS}

TRACE_COLUMNS = ["iter", "mu", "R", "switched"]
EXPERIMENT_COLUMNS = [
    "input", "ratio", "method", "seed", "psnr_all", "psnr_missing", "ssim", "sdr",
    "final_R", "iters", "seconds",
]
METRICS = ("psnr", "ssim", "sdr", "mse")


class UsageError(Exception):
    pass


def _int_list(text):
    try:
        vals = [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    return vals


def _float_list(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _is_image(path):
    return Path(path).suffix.lower() == ".png"


def load_input(path):
    """Read an SPCT tensor or a PNG image."""
    if _is_image(path):
        return io.png_to_tensor(path)
    return io.read_tensor(path)


def _write_csv(path_or_file, header, rows):
    if hasattr(path_or_file, "write"):
        w = csv.writer(path_or_file, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return
    with open(path_or_file, "w", newline="") as f:
        _write_csv(f, header, rows)


# ---------------------------------------------------------------- commands


def cmd_synth(args):
    if any(d < 1 for d in args.dims) or len(args.dims) < 2:
        raise UsageError(f"--dims must list at least two positive extents, got {args.dims}")
    T = datagen.phantom(tuple(args.dims), seed=args.seed, value_scale=args.scale)
    io.write_tensor(args.out, T)
    return EXIT_OK


def cmd_mask(args):
    T = load_input(args.input)
    if args.mask_image:
        mask = io.mask_from_image(args.mask_image, T.shape, rule=args.rule)
    else:
        if args.ratio is None:
            raise UsageError("one of --ratio or --mask-image is required")
        if not 0 <= args.ratio < 1:
            raise UsageError(f"--ratio must lie in [0, 1), got {args.ratio}")
        if args.dead_pixels:
            if T.ndim != 3:
                raise UsageError("--dead-pixels needs an H x W x C input")
            mask = datagen.dead_pixel_mask(*T.shape, args.ratio, seed=args.seed)
        else:
            mask = datagen.random_mask(T.shape, args.ratio, seed=args.seed)
    io.write_mask(args.out, mask)
    logger.info("wrote mask with %d of %d entries observed", mask.sum(), mask.size)
    return EXIT_OK


def _smoothness(spec, ndim):
    if spec is None:
        return None
    parts = spec.split(",")
    if len(parts) == 1:
        parts = parts * ndim
    if len(parts) != ndim:
        raise UsageError(f"--smooth needs 1 or {ndim} entries, got {len(parts)}")
    return parts


def cmd_complete(args):
    T = load_input(args.input)
    mask = io.read_mask(args.mask)
    if mask.shape != T.shape:
        raise UsageError(f"mask shape {mask.shape} does not match input {T.shape}")
    if len(args.rho) != T.ndim:
        raise UsageError(f"--rho needs {T.ndim} entries, got {len(args.rho)}")
    ops = _smoothness(args.smooth, T.ndim)
    code = EXIT_OK
    if args.fixed_rank is not None:
        config = FrSpcConfig(n_components=args.fixed_rank, p=args.p, rho=args.rho, operators=ops,
                             max_sweeps=args.max_iter or 500, seed=args.seed)
        res = fr_spc_solve(T, mask, config)
        rows = [(t, mu, args.fixed_rank, 0) for t, mu in enumerate(res.trace)]
        X = res.X
    else:
        config = SpcConfig(p=args.p, rho=args.rho, operators=ops, sdr=args.sdr, nu=args.nu,
                           max_rank=args.max_rank, max_iter=args.max_iter or 10000,
                           strict_switch=not args.inclusive_switch, seed=args.seed)
        solve = spc_solve_simple if args.simple else spc_solve
        res = solve(T, mask, config)
        rows = res.trace.rows()
        X = res.X
        code = _EXIT_FOR_REASON[res.trace.reason]
        logger.info("stopped: %s at R=%d after %d iterations",
                    res.trace.reason, res.trace.final_rank, res.trace.n_iter)
    io.write_tensor(args.out, X)
    if _is_image(args.input):
        io.tensor_to_png(X, Path(args.out).with_suffix(".png"))
    if args.trace_csv:
        _write_csv(args.trace_csv, TRACE_COLUMNS, rows)
    return code


def evaluate(truth, estimate, mask, names, region):
    """Rows of ``(metric, region, value)``."""
    if region == "missing":
        if mask is None:
            raise UsageError("--region missing requires --mask")
        subset = ~mask
        if not subset.any():
            raise UsageError("evaluation region is empty: the mask has no missing entries")
    else:
        subset = None
    rows = []
    for name in names:
        if name == "psnr":
            val = metrics.psnr(truth, estimate, subset)
        elif name == "mse":
            val = metrics.mse(truth, estimate, subset)
        elif name == "sdr":
            val = metrics.sdr(truth, estimate, subset)
        elif name == "ssim":
            # windowed; always computed over the whole image
            val = metrics.ssim(truth, estimate)
        else:
            raise UsageError(f"unknown metric {name!r}")
        rows.append((name, "all" if name == "ssim" else region, val))
    return rows


def cmd_eval(args):
    truth = load_input(args.truth)
    est = load_input(args.estimate)
    if truth.shape != est.shape:
        raise UsageError(f"shape mismatch: {truth.shape} vs {est.shape}")
    mask = io.read_mask(args.mask) if args.mask else None
    if mask is not None and mask.shape != truth.shape:
        raise UsageError(f"mask shape {mask.shape} does not match {truth.shape}")
    rows = evaluate(truth, est, mask, [m.strip() for m in args.metrics.split(",")], args.region)
    _write_csv(sys.stdout, ["metric", "region", "value"], [(n, r, repr(float(v))) for n, r, v in rows])
    return EXIT_OK


# ---------------------------------------------------------- experiments

_DEFAULT_RHO = {"tv": 0.05, "qv": 1.0}


def load_experiment_config(path):
    with open(path) as f:
        cfg = yaml.safe_load(f)
    if not isinstance(cfg, dict):
        raise UsageError("experiment config must be a mapping")
    for key in ("inputs", "ratios", "methods", "seeds"):
        if not isinstance(cfg.get(key), list) or not cfg[key]:
            raise UsageError(f"experiment config needs a non-empty list {key!r}")
    for m in cfg["methods"]:
        if m not in ("tv", "qv"):
            raise UsageError(f"unknown method {m!r} (expected tv or qv)")
    for r in cfg["ratios"]:
        if not isinstance(r, (int, float)) or not 0 <= r < 1:
            raise UsageError(f"invalid missing ratio {r!r}")
    rho = dict(_DEFAULT_RHO)
    rho.update(cfg.get("rho") or {})
    cfg["rho"] = rho
    base = Path(path).parent
    cfg["inputs"] = [
        s if str(s).startswith("phantom") else str((base / s).resolve()) for s in cfg["inputs"]
    ]
    out = Path(cfg.get("output_dir", "results"))
    cfg["output_dir"] = str(out if out.is_absolute() else (base / out).resolve())
    return cfg


def _load_experiment_input(spec):
    """``phantom`` or ``phantom:SEED`` gives a 30^3 phantom scaled to 0..255."""
    if spec.startswith("phantom"):
        seed = int(spec.split(":", 1)[1]) if ":" in spec else 0
        return datagen.phantom((30, 30, 30), seed=seed, value_scale=255.0), False
    return load_input(spec), _is_image(spec)


def run_cell(cfg, spec, ratio, method, seed):
    T, is_image = _load_experiment_input(spec)
    if is_image and cfg.get("dead_pixels", False):
        mask = datagen.dead_pixel_mask(*T.shape, ratio, seed=seed)
    else:
        mask = datagen.random_mask(T.shape, ratio, seed=seed)
    rho_val = float(cfg["rho"][method])
    rho = [rho_val] * T.ndim
    if is_image:
        rho[-1] = 0.0
    config = SpcConfig(p=1 if method == "tv" else 2, rho=rho, sdr=cfg.get("sdr", 25.0),
                       nu=cfg.get("nu", 0.01), max_rank=cfg.get("max_rank", 3000),
                       max_iter=cfg.get("max_iter", 10000), seed=seed)
    t0 = time.perf_counter()
    res = spc_solve(T, mask, config)
    seconds = time.perf_counter() - t0
    missing = ~mask
    if is_image:
        stem = Path(spec).stem
        io.tensor_to_png(res.X, Path(cfg["output_dir"]) / f"{stem}_{ratio:g}_{method}_{seed}.png")
    ssim = metrics.ssim(T, res.X) if min(T.shape[:2]) >= metrics.SSIM_WINDOW else float("nan")
    return {
        "input": spec,
        "ratio": ratio,
        "method": method,
        "seed": seed,
        "psnr_all": metrics.psnr(T, res.X),
        "psnr_missing": metrics.psnr(T, res.X, missing) if missing.any() else float("inf"),
        "ssim": ssim,
        "sdr": metrics.sdr(T, res.X, missing) if missing.any() else float("inf"),
        "final_R": res.trace.final_rank,
        "iters": res.trace.n_iter,
        "seconds": round(seconds, 3),
    }


def run_experiment(cfg, jobs=1):
    """Run every (input, ratio, method, seed) cell; rows in config order."""
    Path(cfg["output_dir"]).mkdir(parents=True, exist_ok=True)
    cells = [
        (spec, float(ratio), method, int(seed))
        for spec in cfg["inputs"] for ratio in cfg["ratios"]
        for method in cfg["methods"] for seed in cfg["seeds"]
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(run_cell, cfg, *c) for c in cells]
            return [f.result() for f in futures]
    return [run_cell(cfg, *c) for c in cells]


def cmd_run_experiment(args):
    cfg = load_experiment_config(args.config)
    rows = run_experiment(cfg, jobs=args.jobs)
    out = Path(cfg.get("csv") or Path(cfg["output_dir"]) / "results.csv")
    _write_csv(out, EXPERIMENT_COLUMNS, [[row[c] for c in EXPERIMENT_COLUMNS] for row in rows])
    logger.info("wrote %d rows to %s", len(rows), out)
    return EXIT_OK


# ----------------------------------------------------------------- parser


def build_parser():
    parser = argparse.ArgumentParser(prog="spcomplete", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write the seeded Gaussian phantom")
    p.add_argument("--dims", type=_int_list, default=[30, 30, 30])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("mask", help="write an observation mask")
    p.add_argument("--input", required=True, help="SPCT tensor or PNG the mask applies to")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--ratio", type=float, help="fraction of missing entries")
    src.add_argument("--mask-image", help="image whose black pixels mark missing entries")
    p.add_argument("--rule", choices=[io.ZERO_IS_MISSING, io.NONZERO_IS_MISSING],
                   default=io.ZERO_IS_MISSING)
    p.add_argument("--dead-pixels", action="store_true",
                   help="drop all channels of a pixel together")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("complete", help="fill the missing entries of a tensor")
    p.add_argument("--input", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--p", type=int, choices=[1, 2], default=2)
    p.add_argument("--rho", type=_float_list, required=True, help="one weight per mode")
    p.add_argument("--smooth", help="per-mode chain, grid:HxW or none (comma-separated)")
    p.add_argument("--sdr", type=float, default=25.0)
    p.add_argument("--nu", type=float, default=0.01)
    p.add_argument("--max-rank", type=int, default=3000)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--inclusive-switch", action="store_true",
                   help="switch rank when the stall ratio is <= nu instead of < nu")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--trace-csv")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--fixed-rank", type=int, metavar="R")
    mode.add_argument("--simple", action="store_true", help="restart at every rank (slow)")
    p.set_defaults(func=cmd_complete)

    p = sub.add_parser("eval", help="print quality metrics as CSV")
    p.add_argument("--truth", required=True)
    p.add_argument("--estimate", required=True)
    p.add_argument("--mask")
    p.add_argument("--metrics", default="psnr,ssim,sdr,mse")
    p.add_argument("--region", choices=["all", "missing"], default="all")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("run-experiment", help="batch of completions from a YAML/JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_run_experiment)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (ValueError, OSError) as exc:
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

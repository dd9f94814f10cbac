"""Command line interface: ``simulate``, ``conceal`` and ``evaluate``.

Masks are stored one file per inter frame as ``mask_NNNN.txt``; concealed
frames go to ``<output>/<method>/frame_NNNN.pgm``.
"""

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .concealment import METHODS, ConcealmentReport, damage_frame, grid_shape, simulate_loss
from .estimators import MotionConcealer
from .exceptions import ConcealmentError, DomainError, FormatError
from .fileio import (
    SequenceSource,
    quantize,
    read_mask,
    read_pgm,
    write_mask,
    write_pgm,
    write_report,
)
from .metrics import psnr

log = logging.getLogger("bregconceal")

MASK_NAME = "mask_{:04d}.txt"
FRAME_NAME = "frame_{:04d}.pgm"


def _raw_size(text):
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}") from None


def _common(p):
    p.add_argument("--config", help="JSON file of option defaults")
    p.add_argument("--input", help="directory of P5 PGM frames, or a raw 4:2:0 file with --raw")
    p.add_argument("--raw", type=_raw_size, metavar="WxH", help="input is raw YUV 4:2:0 of this size")
    p.add_argument("--frames", type=int, metavar="N", help="number of frames to use")
    p.add_argument("--output", help="output directory")
    p.add_argument("--mb-size", type=int, default=16)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--loss-rate", type=float, default=0.05)
    p.add_argument("--mask-in", metavar="DIR", help="read loss masks from DIR")
    p.add_argument("--mask-out", metavar="DIR", help="write loss masks to DIR")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="bregconceal",
        description="Macroblock loss simulation and motion-compensated concealment.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write seeded per-frame loss masks")
    _common(p)

    p = sub.add_parser("conceal", help="damage, conceal and report PSNR")
    _common(p)
    p.add_argument("--method", choices=METHODS + ("all",), default="bregman")
    p.add_argument("--q", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=0.8)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--alpha-mode", choices=("fixed", "search"), default="fixed")
    p.add_argument("--d-max", type=float, default=15.0)
    p.add_argument("--window-half", type=int, default=2)
    p.add_argument("--outer-tol", type=float, default=1e-6)
    p.add_argument("--inner-tol", type=float, default=1e-8)
    p.add_argument("--outer-max", type=int, default=100)
    p.add_argument("--inner-max", type=int, default=200)
    p.add_argument("--report", help="CSV report path (default <output>/report.csv)")

    p = sub.add_parser("evaluate", help="per-frame PSNR of concealed sequences")
    _common(p)
    p.add_argument("--concealed", required=False,
                   help="directory with one sub-directory of PGM frames per method")
    p.add_argument("--method", choices=METHODS + ("all",), default="all")
    p.add_argument("--report", help="CSV report path (default <concealed>/evaluation.csv)")
    p.add_argument("--parallel-eval", action="store_true")
    return parser


def parse_args(argv=None):
    """Parse with precedence command line > ``--config`` file > defaults."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            overrides = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            raise FormatError(f"cannot read config {args.config}: {exc}") from None
        overrides = {k.replace("-", "_"): v for k, v in overrides.items()}
        if "raw" in overrides and isinstance(overrides["raw"], str):
            overrides["raw"] = _raw_size(overrides["raw"])
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(overrides) - known
        if unknown:
            raise FormatError(f"unknown config keys: {sorted(unknown)}")
        sub.set_defaults(**overrides)
        args = parser.parse_args(argv)
    return args


def _source(args):
    if not args.input:
        raise DomainError("--input is required")
    return SequenceSource.from_path(args.input, args.raw, args.frames)


def _load_masks(args, n_frames, shape):
    """Masks for frames 1..n-1, from ``--mask-in`` or simulated."""
    rows, cols = grid_shape(shape, args.mb_size)
    masks = {}
    if args.mask_in:
        first = Path(args.mask_in) / MASK_NAME.format(0)
        if first.exists() and read_mask(first).lost_count:
            raise DomainError("frame 0 is the intra reference and cannot carry losses")
        for k in range(1, n_frames):
            path = Path(args.mask_in) / MASK_NAME.format(k)
            if not path.exists():
                raise FormatError(f"missing mask file {path}")
            mask = read_mask(path)
            if (mask.mb_rows, mask.mb_cols, mask.mb_size) != (rows, cols, args.mb_size):
                raise FormatError(f"{path}: mask geometry does not match the frames")
            masks[k] = mask
    else:
        for k in range(1, n_frames):
            masks[k] = simulate_loss(rows, cols, args.loss_rate, args.seed + k, args.mb_size)
    return masks


def _write_masks(masks, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for k, mask in sorted(masks.items()):
        write_mask(mask, directory / MASK_NAME.format(k))


def cmd_simulate(args):
    if args.input:
        source = _source(args)
        frames = source.read()
        n, shape = len(frames), frames[0].shape
    else:
        if args.raw is None or args.frames is None:
            raise DomainError("simulate needs --input, or --raw WxH with --frames N")
        n, shape = args.frames, (args.raw[1], args.raw[0])
    out = args.mask_out or args.output
    if not out:
        raise DomainError("simulate needs --output or --mask-out")
    if not 0 <= args.loss_rate <= 1:
        raise DomainError(f"--loss-rate must lie in [0, 1], got {args.loss_rate}")
    args.mask_in = None
    masks = _load_masks(args, n, shape)
    _write_masks(masks, out)
    total = sum(m.lost.size for m in masks.values())
    lost = sum(m.lost_count for m in masks.values())
    print(f"frames={n} masks={len(masks)} total_mbs={total} lost_mbs={lost}")
    return 0


def cmd_conceal(args):
    if not args.output:
        raise DomainError("conceal needs --output")
    originals = [quantize(f).astype(np.float64) for f in _source(args).read()]
    if len(originals) < 2:
        raise DomainError("need at least two frames")
    masks = _load_masks(args, len(originals), originals[0].shape)
    if args.mask_out:
        _write_masks(masks, args.mask_out)
    methods = list(METHODS) if args.method == "all" else [args.method]
    out = Path(args.output)
    reports = []
    for method in methods:
        est = MotionConcealer(
            method=method, alpha=args.alpha, q=args.q, gamma=args.gamma,
            alpha_mode=args.alpha_mode, window_half=args.window_half, d_max=args.d_max,
            outer_max=args.outer_max, inner_max=args.inner_max,
            outer_tol=args.outer_tol, inner_tol=args.inner_tol, seed=args.seed,
        )
        frame_dir = out / method
        frame_dir.mkdir(parents=True, exist_ok=True)
        write_pgm(originals[0], frame_dir / FRAME_NAME.format(0))
        reference = originals[0]
        for k in range(1, len(originals)):
            mask = masks[k]
            damaged = damage_frame(originals[k], mask)
            concealed = quantize(est.fit_predict(damaged, reference, mask)).astype(np.float64)
            if est.refinement_ is not None and not est.refinement_.converged:
                log.warning("frame %d: %s solver hit outer_max without converging", k, method)
            write_pgm(concealed, frame_dir / FRAME_NAME.format(k))
            reports.append(ConcealmentReport(
                frame_index=k, method=method, psnr_db=psnr(originals[k], concealed),
                lost_mb_count=mask.lost_count, solver_outer_iters=est.n_iter_,
                final_q=est.final_q_,
            ))
            log.info("frame %d %s psnr=%.3f", k, method, reports[-1].psnr_db)
            reference = concealed
    write_report(reports, args.report or out / "report.csv")
    return 0


def cmd_evaluate(args):
    if not args.concealed:
        raise DomainError("evaluate needs --concealed")
    originals = [quantize(f).astype(np.float64) for f in _source(args).read()]
    root = Path(args.concealed)
    if args.method == "all":
        methods = sorted(m for m in METHODS if (root / m).is_dir())
        if not methods and list(root.glob("*.pgm")):
            methods = [None]
    else:
        methods = [args.method]
    if not methods:
        raise FormatError(f"{root}: no concealed sequences found")
    masks = _load_masks(args, len(originals), originals[0].shape) if args.mask_in else {}

    def rows_for(method):
        directory = root if method is None else root / method
        files = sorted(directory.glob("*.pgm"))
        if len(files) != len(originals):
            raise FormatError(
                f"{directory}: {len(files)} frames, originals have {len(originals)}"
            )
        rows = []
        for k, (orig, path) in enumerate(zip(originals, files)):
            frame = read_pgm(path)
            if frame.shape != orig.shape:
                raise FormatError(f"{path}: geometry {frame.shape} != {orig.shape}")
            lost = masks[k].lost_count if k in masks else 0
            rows.append(ConcealmentReport(k, method or "input", psnr(orig, frame), lost))
        return rows

    if args.parallel_eval:
        with ThreadPoolExecutor() as pool:
            results = list(pool.map(rows_for, methods))
    else:
        results = [rows_for(m) for m in methods]
    report = args.report or root / "evaluation.csv"
    write_report([r for rows in results for r in rows], report)
    return 0


COMMANDS = {"simulate": cmd_simulate, "conceal": cmd_conceal, "evaluate": cmd_evaluate}


def main(argv=None):
    try:
        args = parse_args(argv)
        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING,
            format="%(levelname)s: %(message)s",
        )
        return COMMANDS[args.command](args)
    except (ConcealmentError, OSError) as exc:
        msg = " ".join(str(exc).split())
        print(f"bregconceal: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

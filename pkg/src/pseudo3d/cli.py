"""Command-line entry point.

Three subcommands:

* ``gen-cloud``  -- depth file -> normalize -> invert -> back-project ->
  binary PLY, with a key=value summary on stdout.
* ``verify``     -- run the seeded property suite; exit 2 when any
  property fails.
* ``fuse-bench`` -- time the fusion strategies on seeded random inputs
  and fingerprint their outputs.

Exit codes: 0 success, 1 input or configuration error, 2 property
failure.  Diagnostics go to stderr and name the failing stage.  The
``PSEUDO3D_SEED`` environment variable supplies the default seed; an
explicit ``--seed`` wins over it.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .cloud import cloud_from_depth, local_continuity
from .camera import load_intrinsics
from .depth import DepthKind, pipeline_relative_to_dr, reciprocal_depth
from .depth_io import load_depth_map
from .errors import Pseudo3dError
from .fusion import ALL_STRATEGIES, Strategy, fusion_bench
from .ply import export_ply
from .verification import ALL_PROPS, render_report, render_report_json, run_properties

ENV_SEED = "PSEUDO3D_SEED"


def _diag(command: str, stage: str, message: str) -> None:
    print(f"{command}: stage={stage}: {message}", file=sys.stderr)


def _resolve_seed(command: str, flag_value: int | None) -> int:
    if flag_value is not None:
        return flag_value
    env = os.environ.get(ENV_SEED)
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise ValueError(f"{ENV_SEED} must be an integer, got {env!r}") from None


def _split_tokens(raw: list[str]) -> list[str]:
    """Flatten ["a,b", "c"] into ["a", "b", "c"]."""
    out: list[str] = []
    for item in raw:
        out.extend(token for token in item.split(",") if token)
    return out


# ---------------------------------------------------------------------------
# gen-cloud


def cmd_gen_cloud(args: argparse.Namespace) -> int:
    command = "gen-cloud"
    try:
        depth = load_depth_map(args.depth, args.format, DepthKind.PREDICTED_RELATIVE)
    except Pseudo3dError as exc:
        _diag(command, "read", str(exc))
        return 1

    try:
        intrinsics = load_intrinsics(args.intrinsics)
    except Pseudo3dError as exc:
        _diag(command, "intrinsics", str(exc))
        return 1

    try:
        if args.naive_reciprocal:
            d_r = reciprocal_depth(depth)
        else:
            d_r = pipeline_relative_to_dr(depth)
    except Pseudo3dError as exc:
        stage = "reciprocal" if args.naive_reciprocal else "normalize"
        _diag(command, stage, str(exc))
        return 1

    try:
        cloud = cloud_from_depth(d_r, intrinsics)
        stats = local_continuity(cloud)
    except Pseudo3dError as exc:
        _diag(command, "backproject", str(exc))
        return 1

    try:
        export_ply(args.out, cloud)
    except Pseudo3dError as exc:
        _diag(command, "export", str(exc))
        return 1

    h, w = cloud.grid_shape
    summary = {
        "width": w,
        "height": h,
        "points": h * w,
        "dr_min": float(d_r.values.min()),
        "dr_max": float(d_r.values.max()),
        "mean_step": stats.mean_step,
        "max_step": stats.max_step,
        "out": args.out,
    }
    if args.json:
        print(json.dumps(summary, sort_keys=True))
    else:
        fields = " ".join(
            f"{k}={v:.6e}" if isinstance(v, float) else f"{k}={v}"
            for k, v in summary.items()
        )
        print(fields)
    return 0


# ---------------------------------------------------------------------------
# verify


def cmd_verify(args: argparse.Namespace) -> int:
    command = "verify"
    try:
        seed = _resolve_seed(command, args.seed)
        names = _split_tokens(args.props) if args.props else list(ALL_PROPS)
        results = run_properties(names, seed, break_shift=args.break_shift)
    except (ValueError, Pseudo3dError) as exc:
        _diag(command, "config", str(exc))
        return 1
    if args.json:
        sys.stdout.write(render_report_json(results, seed))
    else:
        sys.stdout.write(render_report(results, seed))
    return 0 if all(r.passed for r in results) else 2


# ---------------------------------------------------------------------------
# fuse-bench

_STRATEGY_BY_NAME = {s.value: s for s in ALL_STRATEGIES}


def _parse_shape(text: str) -> tuple[int, int, int]:
    parts = text.lower().split("x")
    if len(parts) != 3:
        raise ValueError(f"shape must look like HxWxC, got {text!r}")
    try:
        h, w, c = (int(p) for p in parts)
    except ValueError:
        raise ValueError(f"shape must be three integers, got {text!r}") from None
    if h < 1 or w < 1 or c < 1:
        raise ValueError(f"shape dimensions must be positive, got {text!r}")
    return h, w, c


def cmd_fuse_bench(args: argparse.Namespace) -> int:
    command = "fuse-bench"
    try:
        seed = _resolve_seed(command, args.seed)
        h, w, c = _parse_shape(args.shape)
        if args.fusion:
            tokens = _split_tokens(args.fusion)
            unknown = [t for t in tokens if t not in _STRATEGY_BY_NAME]
            if unknown:
                raise ValueError(
                    f"unknown fusion strategies: {', '.join(unknown)}; "
                    f"expected from {', '.join(_STRATEGY_BY_NAME)}"
                )
            wanted = {_STRATEGY_BY_NAME[t] for t in tokens}
            strategies = tuple(s for s in ALL_STRATEGIES if s in wanted)
        else:
            strategies = ALL_STRATEGIES
        if args.reps < 0:
            raise ValueError(f"--reps must be >= 0, got {args.reps}")
        needs_heads = {Strategy.CROSS_ATTENTION, Strategy.SELF_ATTENTION} & set(strategies)
        if needs_heads and c % args.heads != 0:
            raise ValueError(
                f"channel count {c} must be divisible by --heads {args.heads} "
                "for the attention strategies"
            )
        results = fusion_bench(h, w, c, strategies=strategies, reps=args.reps,
                               seed=seed, heads=args.heads)
    except (ValueError, Pseudo3dError) as exc:
        _diag(command, "config", str(exc))
        return 1

    if args.json:
        payload = {
            "seed": seed,
            "shape": [h, w, c],
            "results": [
                {
                    "strategy": r.strategy.value,
                    "checksum": r.checksum,
                    "reps": len(r.timings_s),
                    "timings_ms": [t * 1e3 for t in r.timings_s],
                }
                for r in results
            ],
        }
        print(json.dumps(payload, sort_keys=True))
    else:
        print(f"seed={seed} shape={h}x{w}x{c}")
        for r in results:
            line = f"strategy={r.strategy.value} checksum={r.checksum} reps={len(r.timings_s)}"
            if r.timings_s:
                ms = np.array(r.timings_s) * 1e3
                line += (f" mean_ms={ms.mean():.3f} min_ms={ms.min():.3f}"
                         f" max_ms={ms.max():.3f}")
            print(line)
    return 0


# ---------------------------------------------------------------------------
# parser


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; our contract reserves 2 for
    property failures, so usage problems are remapped to exit 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="pseudo3d",
        description="Pseudo point clouds from monocular relative depth maps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser(
        "gen-cloud",
        help="convert a relative depth file into a binary PLY point cloud",
    )
    gen.add_argument("--depth", required=True, help="input depth file")
    gen.add_argument("--format", required=True, choices=("pfm", "pgm", "csv"),
                     help="depth file format")
    gen.add_argument("--intrinsics", required=True,
                     help="camera intrinsics config (key = value lines)")
    gen.add_argument("--out", required=True, help="output PLY path")
    gen.add_argument("--naive-reciprocal", action="store_true",
                     help="skip normalization and back-project 1/d instead "
                          "(demonstrates shift distortion)")
    gen.add_argument("--json", action="store_true", help="JSON summary")
    gen.set_defaults(func=cmd_gen_cloud)

    ver = sub.add_parser("verify", help="run the seeded property suite")
    ver.add_argument("--props", nargs="+", metavar="NAME",
                     help=f"subset of properties ({', '.join(ALL_PROPS)})")
    ver.add_argument("--seed", type=int, default=None,
                     help=f"seed (default: ${ENV_SEED} or 0)")
    ver.add_argument("--break-shift", action="store_true",
                     help="inject a shift-after-normalize fault (negative control)")
    ver.add_argument("--json", action="store_true", help="JSON report")
    ver.set_defaults(func=cmd_verify)

    bench = sub.add_parser("fuse-bench", help="time the fusion strategies")
    bench.add_argument("--shape", required=True, metavar="HxWxC",
                       help="feature-map shape, e.g. 16x16x8")
    bench.add_argument("--fusion", nargs="+", metavar="NAME",
                       help="subset of strategies (add, concat, xattn, sattn)")
    bench.add_argument("--reps", type=int, default=3,
                       help="timing repetitions per strategy (default 3)")
    bench.add_argument("--seed", type=int, default=None,
                       help=f"seed (default: ${ENV_SEED} or 0)")
    bench.add_argument("--heads", type=int, default=4,
                       help="attention heads; must divide C (default 4)")
    bench.add_argument("--json", action="store_true", help="JSON report")
    bench.set_defaults(func=cmd_fuse_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

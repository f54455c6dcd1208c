"""Command-line harness: fuse, decompose, profile and bench.

Pairs for ``bench`` are matched by filename convention: ``IR<name>.<ext>``
and ``VIS<name>.<ext>`` (prefix matched case-insensitively) form one pair.
Reports are RFC-4180 CSV by default with an optional JSON mirror; both embed
the full effective configuration so results are self-describing.

Exit codes: 0 success, 1 usage or input error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import imgio
from .decompose import ImageDecomposition, decompose, row_profile
from .errors import InvalidInputError, NumericalError
from .fusion import FusionWeights, FusedResult, fuse_pipeline, fuse_saliency
from .metrics import MetricsReport, evaluate
from .solver import SolverConfig

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NUMERICAL = 2

_IMAGE_SUFFIXES = {".png", ".pgm", ".ppm", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}


@dataclass
class RunConfig:
    """Effective settings of one CLI invocation."""

    solver: SolverConfig = field(default_factory=SolverConfig)
    weights: FusionWeights = field(default_factory=FusionWeights)
    max_dim: int | None = None
    output_format: str | None = None  # None: infer from output suffix, else png8
    report_format: str = "csv"

    def echo(self) -> dict:
        """Flat mapping embedded in every report."""
        return {
            "lambda": self.solver.lam,
            "w1": self.weights.w1,
            "w2": self.weights.w2,
            "s1": self.weights.s1,
            "s2": self.weights.s2,
            "mu0": self.solver.mu0,
            "rho": self.solver.rho,
            "mu_max": self.solver.mu_max,
            "tol": self.solver.tol,
            "max_iter": self.solver.max_iter,
            "max_dim": self.max_dim,
        }


@dataclass
class BenchRow:
    pair_id: str
    qabf: float
    scd: float
    ssim_a: float
    nabf: float
    iterations: int  # solver sweeps summed over both decompositions
    runtime_s: float


@dataclass
class BenchReport:
    rows: list[BenchRow]
    mean: dict[str, float]
    config: dict


# ---------------------------------------------------------------------------
# shared helpers


def _load_pair(ir_path, vis_path, cfg: RunConfig):
    ir = imgio.load_image(ir_path)
    vis = imgio.load_image(vis_path)
    if ir.shape != vis.shape:
        raise InvalidInputError(
            f"source images must be registered and equal-sized, got "
            f"{ir.shape[0]}x{ir.shape[1]} ({ir_path}) vs "
            f"{vis.shape[0]}x{vis.shape[1]} ({vis_path})"
        )
    if cfg.max_dim is not None:
        ir = imgio.resize_max_dim(ir, cfg.max_dim)
        vis = imgio.resize_max_dim(vis, cfg.max_dim)
    return ir, vis


def _warn_unconverged(name, dec: ImageDecomposition | None) -> None:
    if dec is not None and not dec.converged:
        print(
            f"warning: decomposition of {name} did not converge "
            f"(best sweep {dec.iterations})",
            file=sys.stderr,
        )


def _warn_result(result: FusedResult, ir_name, vis_name) -> None:
    _warn_unconverged(ir_name, result.ir_decomposition)
    _warn_unconverged(vis_name, result.vis_decomposition)


def _config_header_lines(cfg_echo: dict) -> list[str]:
    return [f"# {key}={value}" for key, value in cfg_echo.items()]


def _minmax_normalize(part: np.ndarray) -> np.ndarray:
    lo = float(part.min())
    hi = float(part.max())
    if hi <= lo:
        return np.zeros_like(part)
    return np.clip((part - lo) / (hi - lo), 0.0, 1.0)


def _write_matrix_csv(path, matrix: np.ndarray) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        for row in matrix:
            writer.writerow(f"{v:.17g}" for v in row)


# ---------------------------------------------------------------------------
# fuse


def cmd_fuse(ir_path, vis_path, out_path, cfg: RunConfig) -> MetricsReport:
    """Fuse one registered pair, write the image, report metrics on stdout."""
    ir, vis = _load_pair(ir_path, vis_path, cfg)
    result = fuse_pipeline(ir, vis, cfg.solver, cfg.weights)
    _warn_result(result, ir_path, vis_path)
    fmt = cfg.output_format or imgio.format_for_path(out_path)
    imgio.save_image(result.fused, out_path, fmt)
    report = evaluate(result.fused, ir, vis)
    if cfg.report_format == "json":
        payload = {
            "config": cfg.echo(),
            "output": str(out_path),
            "metrics": {
                "qabf": round(report.qabf, 5),
                "scd": round(report.scd, 5),
                "ssim_a": round(report.ssim_a, 5),
                "nabf": round(report.nabf, 5),
            },
        }
        print(json.dumps(payload, indent=2))
    else:
        for line in _config_header_lines(cfg.echo()):
            print(line)
        print("qabf,scd,ssim_a,nabf")
        print(
            f"{report.qabf:.5f},{report.scd:.5f},"
            f"{report.ssim_a:.5f},{report.nabf:.5f}"
        )
    return report


# ---------------------------------------------------------------------------
# decompose


def cmd_decompose(img_path, out_dir, cfg: RunConfig) -> None:
    """Write the three parts of one image, as display images and raw CSVs.

    Images are min-max normalized per part for display; the CSV matrices hold
    the raw values at full precision for exact analysis.
    """
    img = imgio.load_image(img_path)
    if cfg.max_dim is not None:
        img = imgio.resize_max_dim(img, cfg.max_dim)
    dec = decompose(img, cfg.solver)
    _warn_unconverged(img_path, dec)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(img_path).stem
    fmt = cfg.output_format or "png8"
    suffix = imgio.suffix_for_format(fmt)
    for name, part in (
        ("low_rank", dec.low_rank),
        ("saliency", dec.saliency),
        ("residual", dec.residual),
    ):
        imgio.save_image(_minmax_normalize(part), out / f"{stem}_{name}{suffix}", fmt)
        _write_matrix_csv(out / f"{stem}_{name}.csv", part)


# ---------------------------------------------------------------------------
# profile


def cmd_profile(ir_path, vis_path, row: int, out_csv, cfg: RunConfig) -> None:
    """Export saliency values along one row of both sources and their fusion.

    Columns: column index, infrared saliency, visible saliency, fused
    saliency (the weighted sum of the first two).
    """
    ir, vis = _load_pair(ir_path, vis_path, cfg)
    if not 0 <= int(row) < ir.shape[0]:
        raise InvalidInputError(
            f"row index {row} out of range for images with {ir.shape[0]} rows"
        )
    d_ir = decompose(ir, cfg.solver)
    d_vis = decompose(vis, cfg.solver)
    _warn_unconverged(ir_path, d_ir)
    _warn_unconverged(vis_path, d_vis)
    fused_sal = fuse_saliency(d_ir.saliency, d_vis.saliency, cfg.weights)

    ir_row = row_profile(d_ir.saliency, row)
    vis_row = row_profile(d_vis.saliency, row)
    fused_row = row_profile(fused_sal, row)
    with open(out_csv, "w", newline="", encoding="ascii") as fh:
        for line in _config_header_lines(cfg.echo()):
            fh.write(line + "\r\n")
        writer = csv.writer(fh)
        writer.writerow(["column", "ir_saliency", "vis_saliency", "fused_saliency"])
        for col in range(ir_row.shape[0]):
            writer.writerow(
                [
                    str(col),
                    f"{ir_row[col]:.17g}",
                    f"{vis_row[col]:.17g}",
                    f"{fused_row[col]:.17g}",
                ]
            )


# ---------------------------------------------------------------------------
# bench


def _bench_workers() -> int:
    raw = os.environ.get("LATFUSE_THREADS", "").strip()
    if raw:
        try:
            n = int(raw)
        except ValueError as exc:
            raise InvalidInputError(
                f"LATFUSE_THREADS must be a positive integer, got {raw!r}"
            ) from exc
        if n < 1:
            raise InvalidInputError(f"LATFUSE_THREADS must be >= 1, got {n}")
        return n
    return os.cpu_count() or 1


def find_pairs(pairs_dir):
    """Match IR*/VIS* files in a directory into (pair_id, ir, vis) triples.

    Returns the sorted pair list and the list of image files that had no
    partner.  Matching is case-insensitive; leading ``_``/``-``/space after
    the prefix is dropped from the pair id.
    """
    root = Path(pairs_dir)
    if not root.is_dir():
        raise InvalidInputError(f"pairs directory not found: {root}")
    irs: dict[str, Path] = {}
    viss: dict[str, Path] = {}
    unmatched: list[Path] = []
    for p in sorted(root.iterdir()):
        if not p.is_file() or p.suffix.lower() not in _IMAGE_SUFFIXES:
            continue
        low = p.stem.lower()
        if low.startswith("ir"):
            bucket, key = irs, low[2:].lstrip("_- ")
        elif low.startswith("vis"):
            bucket, key = viss, low[3:].lstrip("_- ")
        else:
            unmatched.append(p)
            continue
        if key in bucket:
            raise InvalidInputError(
                f"ambiguous pair name {key!r}: both {bucket[key].name} and {p.name}"
            )
        bucket[key] = p
    pairs = []
    for key in sorted(set(irs) & set(viss)):
        ir = irs[key]
        pair_id = ir.stem[2:].lstrip("_- ") or ir.stem
        pairs.append((pair_id, ir, viss[key]))
    unmatched.extend(irs[k] for k in sorted(set(irs) - set(viss)))
    unmatched.extend(viss[k] for k in sorted(set(viss) - set(irs)))
    return pairs, sorted(unmatched)


def _bench_mean(rows: list[BenchRow]) -> dict[str, float]:
    n = len(rows)
    return {
        "qabf": sum(r.qabf for r in rows) / n,
        "scd": sum(r.scd for r in rows) / n,
        "ssim_a": sum(r.ssim_a for r in rows) / n,
        "nabf": sum(r.nabf for r in rows) / n,
        "iterations": sum(r.iterations for r in rows) / n,
        "runtime_s": sum(r.runtime_s for r in rows) / n,
    }


def _write_bench_csv(path, report: BenchReport, include_timings: bool) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        for line in _config_header_lines(report.config):
            fh.write(line + "\r\n")
        writer = csv.writer(fh)
        header = ["pair", "qabf", "scd", "ssim_a", "nabf", "iterations"]
        if include_timings:
            header.append("runtime_s")
        writer.writerow(header)
        for r in report.rows:
            row = [
                r.pair_id,
                f"{r.qabf:.5f}",
                f"{r.scd:.5f}",
                f"{r.ssim_a:.5f}",
                f"{r.nabf:.5f}",
                str(r.iterations),
            ]
            if include_timings:
                row.append(f"{r.runtime_s:.3f}")
            writer.writerow(row)
        mean_row = [
            "mean",
            f"{report.mean['qabf']:.5f}",
            f"{report.mean['scd']:.5f}",
            f"{report.mean['ssim_a']:.5f}",
            f"{report.mean['nabf']:.5f}",
            f"{report.mean['iterations']:.1f}",
        ]
        if include_timings:
            mean_row.append(f"{report.mean['runtime_s']:.3f}")
        writer.writerow(mean_row)


def _write_bench_json(path, report: BenchReport, include_timings: bool) -> None:
    def row_payload(r: BenchRow) -> dict:
        d = {
            "pair": r.pair_id,
            "qabf": round(r.qabf, 5),
            "scd": round(r.scd, 5),
            "ssim_a": round(r.ssim_a, 5),
            "nabf": round(r.nabf, 5),
            "iterations": r.iterations,
        }
        if include_timings:
            d["runtime_s"] = round(r.runtime_s, 3)
        return d

    mean = {
        "qabf": round(report.mean["qabf"], 5),
        "scd": round(report.mean["scd"], 5),
        "ssim_a": round(report.mean["ssim_a"], 5),
        "nabf": round(report.mean["nabf"], 5),
        "iterations": round(report.mean["iterations"], 1),
    }
    if include_timings:
        mean["runtime_s"] = round(report.mean["runtime_s"], 3)
    payload = {
        "config": report.config,
        "rows": [row_payload(r) for r in report.rows],
        "mean": mean,
    }
    with open(path, "w", encoding="ascii") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def cmd_bench(
    pairs_dir,
    out_report,
    cfg: RunConfig,
    fused_dir=None,
    include_timings: bool = False,
) -> BenchReport:
    """Fuse every pair in a directory and write per-pair metrics plus means.

    Pairs run concurrently (capped by LATFUSE_THREADS); rows are emitted in
    lexicographic pair-id order regardless of completion order, and the
    fused images are written alongside the report.  Wall-clock runtimes are
    kept out of the written report unless ``include_timings`` is set, so
    repeat runs produce byte-identical files.
    """
    pairs, unmatched = find_pairs(pairs_dir)
    for p in unmatched:
        print(f"warning: skipping unmatched file {p.name}", file=sys.stderr)
    if not pairs:
        raise InvalidInputError(f"no IR*/VIS* pairs found in {pairs_dir}")
    pairs.sort(key=lambda item: item[0])

    out_report = Path(out_report)
    if out_report.parent != Path(""):
        out_report.parent.mkdir(parents=True, exist_ok=True)
    fused_out = Path(fused_dir) if fused_dir is not None else out_report.parent / "fused"
    fused_out.mkdir(parents=True, exist_ok=True)
    fmt = cfg.output_format or "png8"
    suffix = imgio.suffix_for_format(fmt)

    def run_one(item):
        pair_id, ir_path, vis_path = item
        start = time.perf_counter()
        ir, vis = _load_pair(ir_path, vis_path, cfg)
        result = fuse_pipeline(ir, vis, cfg.solver, cfg.weights)
        metrics = evaluate(result.fused, ir, vis)
        elapsed = time.perf_counter() - start
        iters = (
            result.ir_decomposition.iterations + result.vis_decomposition.iterations
        )
        row = BenchRow(
            pair_id=pair_id,
            qabf=metrics.qabf,
            scd=metrics.scd,
            ssim_a=metrics.ssim_a,
            nabf=metrics.nabf,
            iterations=iters,
            runtime_s=elapsed,
        )
        return row, result

    workers = min(_bench_workers(), len(pairs))
    rows: list[BenchRow] = []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for (row, result), (pair_id, ir_path, vis_path) in zip(
            pool.map(run_one, pairs), pairs
        ):
            _warn_result(result, ir_path.name, vis_path.name)
            imgio.save_image(result.fused, fused_out / f"{pair_id}{suffix}", fmt)
            rows.append(row)

    report = BenchReport(rows=rows, mean=_bench_mean(rows), config=cfg.echo())
    if cfg.report_format == "json":
        _write_bench_json(out_report, report, include_timings)
    else:
        _write_bench_csv(out_report, report, include_timings)
    print(
        f"benchmarked {len(rows)} pairs -> {out_report} "
        f"(fused images in {fused_out})",
        file=sys.stderr,
    )
    return report


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    # usage errors must exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _add_common_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model")
    g.add_argument(
        "--lambda",
        dest="lam",
        type=float,
        default=0.8,
        metavar="L",
        help="balance weight of the sparse term (default: 0.8)",
    )
    g.add_argument("--w1", type=float, default=0.5, help="low-rank weight of the IR image (default: 0.5)")
    g.add_argument("--w2", type=float, default=0.5, help="low-rank weight of the VIS image (default: 0.5)")
    g.add_argument("--s1", type=float, default=1.0, help="saliency weight of the IR image (default: 1)")
    g.add_argument("--s2", type=float, default=1.0, help="saliency weight of the VIS image (default: 1)")
    s = p.add_argument_group("solver")
    s.add_argument("--tol", type=float, default=1e-7, help="max-abs constraint tolerance (default: 1e-7)")
    s.add_argument("--max-iter", type=int, default=2000, help="iteration cap (default: 2000)")
    s.add_argument("--mu0", type=float, default=1e-6, help="initial penalty (default: 1e-6)")
    s.add_argument("--rho", type=float, default=1.1, help="penalty growth factor (default: 1.1)")
    s.add_argument("--mu-max", type=float, default=1e10, help="penalty cap (default: 1e10)")
    io = p.add_argument_group("input/output")
    io.add_argument(
        "--max-dim",
        type=int,
        default=None,
        metavar="N",
        help="bilinearly downscale inputs so the longer side is at most N pixels",
    )
    io.add_argument(
        "--format",
        choices=imgio.OUTPUT_FORMATS,
        default=None,
        help="image output format (default: inferred from suffix, else png8)",
    )


def config_from_args(args) -> RunConfig:
    solver = SolverConfig(
        lam=args.lam,
        mu0=args.mu0,
        rho=args.rho,
        mu_max=args.mu_max,
        tol=args.tol,
        max_iter=args.max_iter,
    )
    weights = FusionWeights(w1=args.w1, w2=args.w2, s1=args.s1, s2=args.s2)
    max_dim = args.max_dim
    if max_dim is not None and max_dim < 2:
        raise InvalidInputError(f"--max-dim must be >= 2, got {max_dim}")
    return RunConfig(
        solver=solver,
        weights=weights,
        max_dim=max_dim,
        output_format=args.format,
        report_format="json" if getattr(args, "json", False) else "csv",
    )


def _run_fuse(args) -> None:
    cmd_fuse(args.ir, args.vis, args.output, config_from_args(args))


def _run_decompose(args) -> None:
    cmd_decompose(args.image, args.output, config_from_args(args))


def _run_profile(args) -> None:
    cmd_profile(args.ir, args.vis, args.row, args.output, config_from_args(args))


def _run_bench(args) -> None:
    cmd_bench(
        args.pairs,
        args.output,
        config_from_args(args),
        fused_dir=args.fused_dir,
        include_timings=args.timings,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="latfuse",
        description=(
            "Fuse registered infrared/visible grayscale image pairs by latent "
            "low-rank decomposition and score the results."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fuse = sub.add_parser(
        "fuse",
        help="fuse one registered IR/VIS pair into a single image",
        description="Fuse one registered IR/VIS pair; metrics print on stdout.",
    )
    p_fuse.add_argument("--ir", required=True, help="infrared image path")
    p_fuse.add_argument("--vis", required=True, help="visible image path")
    p_fuse.add_argument("-o", "--output", required=True, help="fused image path")
    p_fuse.add_argument("--json", action="store_true", help="print the metrics report as JSON")
    _add_common_options(p_fuse)
    p_fuse.set_defaults(run=_run_fuse)

    p_dec = sub.add_parser(
        "decompose",
        help="split one image into low-rank, saliency and residual parts",
        description=(
            "Write the three parts of one image: display-normalized images "
            "plus raw CSV matrices."
        ),
    )
    p_dec.add_argument("image", help="input image path")
    p_dec.add_argument("-o", "--output", required=True, help="output directory")
    _add_common_options(p_dec)
    p_dec.set_defaults(run=_run_decompose)

    p_prof = sub.add_parser(
        "profile",
        help="export saliency values along one image row as CSV plot data",
        description=(
            "Decompose both images and export one row of the two saliency "
            "parts and of their fused sum."
        ),
    )
    p_prof.add_argument("--ir", required=True, help="infrared image path")
    p_prof.add_argument("--vis", required=True, help="visible image path")
    p_prof.add_argument("--row", type=int, required=True, help="row index to export")
    p_prof.add_argument("-o", "--output", required=True, help="output CSV path")
    _add_common_options(p_prof)
    p_prof.set_defaults(run=_run_profile)

    p_bench = sub.add_parser(
        "bench",
        help="fuse and score every IR*/VIS* pair in a directory",
        description=(
            "Fuse every pair matched by the IR<name>/VIS<name> filename "
            "convention, score it, and write per-pair rows plus column means. "
            "LATFUSE_THREADS caps concurrency (default: machine parallelism)."
        ),
    )
    p_bench.add_argument("--pairs", required=True, help="directory holding IR*/VIS* images")
    p_bench.add_argument("-o", "--output", required=True, help="report path (.csv or .json)")
    p_bench.add_argument("--json", action="store_true", help="write the report as JSON")
    p_bench.add_argument(
        "--fused-dir",
        default=None,
        help="directory for fused images (default: <report dir>/fused)",
    )
    p_bench.add_argument(
        "--timings",
        action="store_true",
        help="include per-pair wall-clock runtimes (makes reports non-reproducible)",
    )
    _add_common_options(p_bench)
    p_bench.set_defaults(run=_run_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.run(args)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 I/O error, 4 generation failure,
5 evaluation failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from . import metrics
from .augment import AugmentProfile
from .dataset import (DatasetManifest, TilingSpec, build_selfsup_split,
                      build_synthetic_split, occlusion_filter, resolve_threads,
                      stitch, tile_and_downsample)
from .grid import GridGeometry, compose, mask_from_grid, read_grid, write_grid
from .inpaint import METHODS, InpaintConfig, inpaint
from .raycast import cast
from .sampler import SamplerConfig
from .terrain import TERRAIN_KINDS, TerrainSpec, sample_scene

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_GENERATION = 4
EXIT_EVAL = 5


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="demforge",
                                description="occluded elevation-map dataset toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate a synthetic terrain split")
    synth.add_argument("--terrain", choices=TERRAIN_KINDS, required=True)
    synth.add_argument("--count", type=int, required=True)
    synth.add_argument("--split", choices=("train", "val", "test"), default="train")
    synth.add_argument("--augment", type=Path, default=None,
                       help="augmentation profile JSON")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--threads", type=int, default=None)
    synth.add_argument("--rows", type=int, default=64)
    synth.add_argument("--cols", type=int, default=64)
    synth.add_argument("--resolution", type=float, default=0.04)
    synth.add_argument("--out", type=Path, required=True)

    selfsup = sub.add_parser("selfsup", help="derive a self-supervised split")
    selfsup.add_argument("--in", dest="manifest", type=Path, required=True)
    selfsup.add_argument("--rmin", type=float, default=0.001)
    selfsup.add_argument("--rmax", type=float, default=0.5)
    selfsup.add_argument("--max-iters", type=int, default=15)
    selfsup.add_argument("--seed", type=int, default=0)
    selfsup.add_argument("--threads", type=int, default=None)
    selfsup.add_argument("--out", type=Path, required=True)

    inp = sub.add_parser("inpaint", help="fill occluded grids with a baseline")
    inp.add_argument("--in", dest="manifest", type=Path, required=True)
    inp.add_argument("--method", choices=METHODS, default="diffusion")
    inp.add_argument("--radius", type=int, default=3)
    inp.add_argument("--threads", type=int, default=None)
    inp.add_argument("--out", type=Path, required=True)

    ev = sub.add_parser("eval", help="score reconstructions against a manifest")
    ev.add_argument("--pred", type=Path, required=True)
    ev.add_argument("--manifest", type=Path, required=True)
    ev.add_argument("--out", type=Path, default=None)
    ev.add_argument("--pretty", action="store_true")
    ev.add_argument("--plot", type=Path, default=None,
                    help="directory for static sample images")

    bench = sub.add_parser("bench", help="time the full-map inpainting scenario")
    bench.add_argument("--size", type=int, default=300)
    bench.add_argument("--tiles", type=int, default=4)
    bench.add_argument("--tile-px", type=int, default=75)
    bench.add_argument("--out-px", type=int, default=64)
    bench.add_argument("--method", choices=METHODS, default="diffusion")
    bench.add_argument("--repeat", type=int, default=10)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--out", type=Path, default=None)
    return p


def _emit(payload: dict, out: Path | None, pretty: bool = False) -> None:
    text = json.dumps(payload, indent=2 if pretty else None)
    if out is None:
        print(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n")


def cmd_synth(args) -> int:
    profile = None
    if args.augment is not None:
        try:
            profile = AugmentProfile.from_json(args.augment)
        except OSError as e:
            print(f"error: cannot read augment profile: {e}", file=sys.stderr)
            return EXIT_IO
        except (ValueError, TypeError) as e:
            print(f"error: bad augment profile: {e}", file=sys.stderr)
            return EXIT_USAGE
    if args.count < 1:
        print("error: --count must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    geometry = GridGeometry(args.rows, args.cols, args.resolution, args.resolution)
    try:
        manifest = build_synthetic_split(
            args.out, args.terrain, args.count, args.seed, split=args.split,
            geometry=geometry, augment_profile=profile,
            threads=resolve_threads(args.threads))
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {len(manifest.records)} records to {args.out / 'manifest.jsonl'}")
    return EXIT_OK


def cmd_selfsup(args) -> int:
    if not (0.0 <= args.rmin < args.rmax <= 1.0) or args.max_iters < 1:
        print("error: require 0 <= rmin < rmax <= 1 and max-iters >= 1",
              file=sys.stderr)
        return EXIT_USAGE
    try:
        source = DatasetManifest.read(args.manifest)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    cfg = SamplerConfig(r_occ_min=args.rmin, r_occ_max=args.rmax,
                        max_iters=args.max_iters)
    try:
        manifest, failures = build_selfsup_split(
            source, cfg, args.seed, args.out,
            threads=resolve_threads(args.threads))
    except RuntimeError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_GENERATION
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    print(f"emitted {len(manifest.records)} records, {failures} failures")
    return EXIT_OK


def cmd_inpaint(args) -> int:
    try:
        source = DatasetManifest.read(args.manifest)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    cfg = InpaintConfig(method=args.method, radius_px=args.radius)
    out_dir = args.out
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        records = []
        for rec in source.records:
            role = "input" if "input" in rec["grids"] else "occ"
            occ = source.load_grid(rec, role)
            recon = inpaint(occ, cfg)
            comp = compose(occ, recon, mask_from_grid(occ))
            rec_rel = f"{rec['id']}_rec.dgm"
            comp_rel = f"{rec['id']}_comp.dgm"
            write_grid(recon, out_dir / rec_rel)
            write_grid(comp, out_dir / comp_rel)
            new = dict(rec)
            new_grids = dict(rec["grids"])
            new_grids["rec"] = rec_rel
            new_grids["comp"] = comp_rel
            for k in ("gt", "occ", "target", "input", "amask"):
                if k in new_grids and not Path(new_grids[k]).is_absolute():
                    new_grids[k] = os.path.relpath(source.grid_path(rec, k), out_dir)
            new["grids"] = new_grids
            new["provenance"] = {**rec.get("provenance", {}),
                                 "inpaint": {"method": cfg.method,
                                             "radius_px": cfg.radius_px,
                                             "tol": cfg.tol}}
            records.append(new)
        manifest = DatasetManifest(split=source.split, records=records,
                                   config={**source.config,
                                           "inpaint_method": args.method},
                                   root=out_dir)
        manifest.write(out_dir / "manifest.jsonl")
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    print(f"inpainted {len(records)} grids with {args.method}")
    return EXIT_OK


def _mean_std(values) -> dict:
    if not values:
        return {"mean": None, "std": None, "n": 0}
    return {
        "mean": statistics.fmean(values),
        "std": statistics.stdev(values) if len(values) > 1 else 0.0,
        "n": len(values),
    }


def cmd_eval(args) -> int:
    try:
        manifest = DatasetManifest.read(args.manifest)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO

    missing_preds = []
    samples = []
    gt_role = None
    for rec in manifest.records:
        gt_role = "gt" if "gt" in rec["grids"] else "target"
        rec_path = args.pred / f"{rec['id']}_rec.dgm"
        if not rec_path.exists():
            missing_preds.append(rec["id"])
            continue
        samples.append((rec, rec_path))
    if missing_preds:
        print("error: missing predictions for: " + ", ".join(missing_preds),
              file=sys.stderr)
        return EXIT_EVAL

    try:
        L = metrics.dynamic_range(
            manifest.load_grid(rec, gt_role) for rec in manifest.records).L
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_EVAL
    if L <= 0:
        print("warning: degenerate dynamic range, using L=1", file=sys.stderr)
        L = 1.0

    per_sample = []
    skipped_empty = 0
    for rec, rec_path in samples:
        try:
            gt = manifest.load_grid(rec, "gt" if "gt" in rec["grids"] else "target")
            occ_role = "input" if "input" in rec["grids"] else "occ"
            occ = manifest.load_grid(rec, occ_role)
            recon = read_grid(rec_path)
            if "amask" in rec["grids"]:
                amask = manifest.load_grid(rec, "amask")
                mask = mask_from_grid(occ).__class__(
                    occ.geometry, (amask.cells > 0.5).astype(np.uint8))
            else:
                mask = mask_from_grid(occ)
            if not (mask.bits.astype(bool) & ~gt.missing).any():
                skipped_empty += 1
                continue
            comp = compose(occ, recon, mask_from_grid(occ))
            rep = metrics.report(gt, recon, mask, L, comp=comp)
        except ValueError as e:
            print(f"error: sample {rec['id']}: {e}", file=sys.stderr)
            return EXIT_EVAL
        per_sample.append((rec["id"], rep))

    finite_psnr = [r.psnr_occ for _, r in per_sample if math.isfinite(r.psnr_occ)]
    report = {
        "n_samples": len(per_sample),
        "n_skipped_empty_mask": skipped_empty,
        "dynamic_range_L": L,
        "l1_occ": _mean_std([r.l1_occ for _, r in per_sample]),
        "mse_occ": _mean_std([r.mse_occ for _, r in per_sample]),
        "psnr_occ": _mean_std(finite_psnr),
        "psnr_occ_infinite": len(per_sample) - len(finite_psnr),
        "ssim_rec": _mean_std([r.ssim_rec for _, r in per_sample
                               if r.ssim_rec is not None]),
        "ssim_comp": _mean_std([r.ssim_comp for _, r in per_sample
                                if r.ssim_comp is not None]),
    }
    _emit(report, args.out, args.pretty)
    if args.plot is not None:
        _plot_samples(manifest, samples[:4], args.plot)
    return EXIT_OK


def _plot_samples(manifest, samples, plot_dir: Path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plot_dir.mkdir(parents=True, exist_ok=True)
    for rec, rec_path in samples:
        gt = manifest.load_grid(rec, "gt" if "gt" in rec["grids"] else "target")
        occ_role = "input" if "input" in rec["grids"] else "occ"
        occ = manifest.load_grid(rec, occ_role)
        recon = read_grid(rec_path)
        fig, axes = plt.subplots(1, 3, figsize=(10, 3.2))
        for ax, (title, g) in zip(axes, [("ground truth", gt),
                                         ("occluded", occ),
                                         ("reconstruction", recon)]):
            im = ax.imshow(g.cells)
            ax.set_title(title)
            ax.axis("off")
            fig.colorbar(im, ax=ax, fraction=0.046)
        fig.savefig(plot_dir / f"{rec['id']}.png", dpi=100, bbox_inches="tight")
        plt.close(fig)


def cmd_bench(args) -> int:
    size = args.size
    if args.tiles * args.tile_px != size:
        print("error: --tiles * --tile-px must equal --size", file=sys.stderr)
        return EXIT_USAGE
    geometry = GridGeometry(size, size, 0.04, 0.04)
    spec = TerrainSpec(kind="hills", geometry=geometry, seed=args.seed)
    terrain, vp = sample_scene(spec)
    occluded = cast(terrain, vp).occluded_grid
    tiling = TilingSpec(args.tiles, args.tile_px, args.out_px)
    cfg = InpaintConfig(method=args.method)

    runs = []
    for _ in range(args.repeat):
        t0 = time.perf_counter()
        tiles = tile_and_downsample(occluded, tiling)
        t1 = time.perf_counter()
        kept = occlusion_filter(tiles, 0.85)
        kept_set = {id(t) for t in kept}
        t2 = time.perf_counter()
        filled = [inpaint(t, cfg) if id(t) in kept_set else t for t in tiles]
        t3 = time.perf_counter()
        stitch(filled, args.tiles)
        t4 = time.perf_counter()
        runs.append({"tile_s": t1 - t0, "filter_s": t2 - t1,
                     "inpaint_s": t3 - t2, "stitch_s": t4 - t3,
                     "total_s": t4 - t0})

    totals = sorted(r["total_s"] for r in runs)
    mean_total = statistics.fmean(totals)
    p95 = totals[min(len(totals) - 1, math.ceil(0.95 * len(totals)) - 1)]
    report = {
        "scenario": {"size": size, "tiles": args.tiles, "tile_px": args.tile_px,
                     "out_px": args.out_px, "method": args.method,
                     "repeat": args.repeat},
        "occlusion_ratio": occluded.missing_ratio(),
        "hz_mean": 1.0 / mean_total,
        "hz_p95": 1.0 / p95,
        "stages_mean_s": {
            k: statistics.fmean(r[k] for r in runs)
            for k in ("tile_s", "filter_s", "inpaint_s", "stitch_s", "total_s")
        },
    }
    _emit(report, args.out, pretty=True)
    return EXIT_OK


_COMMANDS = {
    "synth": cmd_synth,
    "selfsup": cmd_selfsup,
    "inpaint": cmd_inpaint,
    "eval": cmd_eval,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())

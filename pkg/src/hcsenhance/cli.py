"""Command-line pipeline driver.

Every subcommand reads one YAML config (run identity, output root, global
seed, per-stage sections), writes its artifacts under
``output_root/run_id``, and stamps each artifact directory with a
provenance record. Exit codes: 0 success, 2 configuration error, 3 data
error, 4 runtime failure or training divergence.
"""

import argparse
import logging
import sys
from pathlib import Path

from .config import (RunConfig, incomplete_guard, load_config,
                     snapshot_config, train_config_from, write_provenance)
from .errors import (ConfigError, DataError, HcsEnhanceError,
                     TrainingDivergedError)

log = logging.getLogger("hcsenhance")


def _cfg_or_arg(value, cfg: RunConfig, section: str, key: str, default=None):
    if value is not None:
        return value
    return cfg.get(section, key, default)


def _require(value, what: str):
    if value is None:
        raise ConfigError(f"{what} must be given on the command line or in "
                          "the config")
    return value


def _load_dataset(cfg: RunConfig, path_like):
    from .patches import load_manifest
    return load_manifest(cfg.resolve(path_like))


def cmd_extract_patches(cfg: RunConfig, args) -> int:
    from .ingest import MIN_NUCLEUS_AREA, ingest_directory

    input_dir = _require(_cfg_or_arg(args.input_dir, cfg, "ingest",
                                     "input_dir"), "ingest input directory")
    out = cfg.resolve(_cfg_or_arg(args.out, cfg, "ingest", "out", "clean"))
    with incomplete_guard(out):
        manifest = ingest_directory(
            Path(input_dir), out,
            patch_size=_cfg_or_arg(args.patch_size, cfg, "ingest",
                                   "patch_size", 128),
            nucleus_suffix=cfg.get("ingest", "nucleus_suffix", "_nucleus"),
            tubule_suffix=cfg.get("ingest", "tubule_suffix", "_tubule"),
            min_area=cfg.get("ingest", "min_nucleus_area",
                             MIN_NUCLEUS_AREA))
        write_provenance(cfg, out, "extract-patches")
    print(f"extracted {len(manifest.entries)} patches -> {out}")
    return 0


def cmd_split(cfg: RunConfig, args) -> int:
    from .ingest import assign_splits

    dataset = cfg.resolve(_cfg_or_arg(args.dataset, cfg, "ingest", "out",
                                      "clean"))
    ratios = cfg.get("ingest", "split_ratios", [0.45, 0.45, 0.10])
    if args.ratios is not None:
        ratios = [float(r) for r in args.ratios.split(",")]
    manifest = assign_splits(dataset, tuple(ratios), cfg.seed)
    counts = {}
    for entry in manifest.entries:
        counts[entry.split] = counts.get(entry.split, 0) + 1
    print(f"split {dataset}: " +
          ", ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    return 0


def cmd_simulate(cfg: RunConfig, args) -> int:
    from .degrade import (DEGRADED_SIDE, build_simulation_suite,
                          spec_for_tag, standard_suite)

    dataset = _load_dataset(cfg, _cfg_or_arg(args.dataset, cfg, "simulate",
                                             "dataset", "clean"))
    tags = _cfg_or_arg(args.cases and args.cases.split(","), cfg,
                       "simulate", "cases")
    specs = standard_suite() if tags is None \
        else [spec_for_tag(t) for t in tags]
    out_root = cfg.resolve(_cfg_or_arg(args.out, cfg, "simulate", "out",
                                       "degraded"))
    target_side = cfg.get("simulate", "target_side", DEGRADED_SIDE)
    with incomplete_guard(out_root):
        manifests = build_simulation_suite(dataset, specs, cfg.seed,
                                           out_root, target_side)
        for m in manifests:
            write_provenance(cfg, m.root, "simulate")
        write_provenance(cfg, out_root, "simulate")
    for spec, m in zip(specs, manifests):
        print(f"case {spec.tag}: {len(m.entries)} patches -> {m.root}")
    return 0


def _run_training(cfg: RunConfig, args, trainer, kind: str) -> int:
    source = _load_dataset(cfg, _require(args.source, f"{kind} source"))
    target = _load_dataset(cfg, _require(args.target, f"{kind} target"))
    out = cfg.resolve(args.out or f"models/{kind}")
    train_cfg = train_config_from(cfg)
    split = cfg.get("train", "split", "train")
    resume = cfg.resolve(args.resume) if args.resume else None
    with incomplete_guard(out):
        written = trainer(source, target, train_cfg, out, split=split,
                          resume_from=resume, max_steps=args.max_steps)
        write_provenance(cfg, out, kind)
    print(f"{kind}: wrote {len(written)} checkpoints -> {out}")
    return 0


def cmd_train_cyclegan(cfg: RunConfig, args) -> int:
    from .neural.train import train_cyclegan
    return _run_training(cfg, args, train_cyclegan, "train-cyclegan")


def cmd_train_pix2pix(cfg: RunConfig, args) -> int:
    from .neural.train import train_pix2pix
    return _run_training(cfg, args, train_pix2pix, "train-pix2pix")


def cmd_restore(cfg: RunConfig, args) -> int:
    method = _require(_cfg_or_arg(args.method, cfg, "restore", "method"),
                      "restore method")
    dataset = _load_dataset(cfg, _require(args.input, "restore input"))
    out = cfg.resolve(args.out or f"restored/{method}")
    split = args.split or cfg.get("restore", "split")
    with incomplete_guard(out):
        if method == "rl":
            from .classical import (RL_DEFAULT_ITERATIONS,
                                    richardson_lucy_manifest)
            iterations = _cfg_or_arg(args.iterations, cfg, "restore",
                                     "iterations", RL_DEFAULT_ITERATIONS)
            psf_sigma = cfg.get("restore", "psf_sigma", 1.0)
            manifest = richardson_lucy_manifest(dataset, out, psf_sigma,
                                                iterations, split)
        elif method in ("cyclegan", "pix2pix"):
            from .neural.infer import enhance_manifest
            ckpt = cfg.resolve(_require(args.checkpoint,
                                        f"{method} checkpoint"))
            direction = cfg.get("restore", "direction", "ab")
            manifest = enhance_manifest(dataset, ckpt, out, direction, split)
        else:
            raise ConfigError(f"restore method must be rl, cyclegan, or "
                              f"pix2pix, got {method!r}")
        write_provenance(cfg, out, "restore")
    print(f"restored {len(manifest.entries)} patches ({method}) -> {out}")
    return 0


def cmd_evaluate(cfg: RunConfig, args) -> int:
    from .metrics import evaluate_testset, write_metric_csv

    restored = _load_dataset(cfg, _require(args.restored, "restored dataset"))
    gt = _load_dataset(cfg, _require(args.ground_truth,
                                     "ground-truth dataset"))
    out = cfg.resolve(args.out or "reports")
    split = args.split or cfg.get("evaluate", "split")
    with incomplete_guard(out):
        report = evaluate_testset(restored, gt, method=args.method or "",
                                  case=args.case or "", split=split)
        path = write_metric_csv(out / "metrics.csv", [report])
        write_provenance(cfg, out, "evaluate")
    print(f"{report.method or 'restored'} case {report.case or '-'} "
          f"(n={report.n_patches}): "
          f"ssim {report.ssim_mean:.1f}+/-{report.ssim_std:.1f}, "
          f"msssim {report.msssim_mean:.1f}+/-{report.msssim_std:.1f}, "
          f"auc {report.auc_mean:.1f}+/-{report.auc_std:.1f} -> {path}")
    return 0


def cmd_track(cfg: RunConfig, args) -> int:
    from .metrics import track_training
    from .neural.train import list_checkpoints

    ckpt_dir = cfg.resolve(_require(args.checkpoints,
                                    "checkpoint directory"))
    checkpoints = list_checkpoints(ckpt_dir)
    degraded = _load_dataset(cfg, _require(args.degraded,
                                           "degraded dataset"))
    gt = _load_dataset(cfg, _require(args.ground_truth,
                                     "ground-truth dataset"))
    out = cfg.resolve(args.out or "curves")
    split = args.split or "val"
    with incomplete_guard(out):
        rows = track_training(checkpoints, degraded, gt,
                              case=args.case or "-", out_dir=out,
                              split=split)
        write_provenance(cfg, out, "track")
    print(f"tracked {len(rows)} epochs -> {out}")
    return 0


def cmd_segment(cfg: RunConfig, args) -> int:
    import numpy as np
    from PIL import Image

    from .classical import sobel_otsu_segment
    from .errors import DegenerateImageError
    from .patches import load_patch
    from .quantify import segment_microtubules

    dataset = _load_dataset(cfg, _require(args.input, "segment input"))
    out = cfg.resolve(args.out or "masks")
    with incomplete_guard(out):
        out.mkdir(parents=True, exist_ok=True)
        written = skipped = 0
        for entry in sorted(dataset.entries, key=lambda e: e.patch_id):
            patch = load_patch(dataset.root, entry)
            try:
                if args.mode == "sobel":
                    mask = sobel_otsu_segment(patch.tubule)
                else:
                    mask = segment_microtubules(patch)
            except DegenerateImageError:
                skipped += 1
                continue
            img = (mask.astype(np.uint8)) * 255
            Image.fromarray(img).save(out / f"{entry.patch_id}_mask.png")
            written += 1
        write_provenance(cfg, out, "segment")
    print(f"segmented {written} patches ({skipped} degenerate skipped) "
          f"-> {out}")
    return 0


def cmd_quantify(cfg: RunConfig, args) -> int:
    from .quantify import (PERINUCLEAR_RADIUS_PX, compute_densities,
                           write_density_csv)

    dataset = _load_dataset(cfg, _require(args.input, "quantify input"))
    out = cfg.resolve(args.out or "densities")
    radius = _cfg_or_arg(args.radius, cfg, "quantify", "radius_px",
                         PERINUCLEAR_RADIUS_PX)
    split = args.split or cfg.get("quantify", "split")
    with incomplete_guard(out):
        records = compute_densities(dataset, radius, split)
        path = write_density_csv(out / "density.csv", records)
        write_provenance(cfg, out, "quantify")
    print(f"quantified {len(records)} cells -> {path}")
    return 0


def cmd_dose_response(cfg: RunConfig, args) -> int:
    from .quantify import (dose_response, plot_dose_response,
                           read_density_csv, write_dose_response_csv)

    records = read_density_csv(cfg.resolve(_require(args.densities,
                                                    "density table")))
    baseline = read_density_csv(cfg.resolve(_require(args.baseline,
                                                     "baseline table")))
    out = cfg.resolve(args.out or "dose_response")
    per_combo = _cfg_or_arg(args.per_combo, cfg, "quantify", "per_combo_n",
                            200)
    baseline_n = _cfg_or_arg(args.baseline_n, cfg, "quantify", "baseline_n",
                             1000)
    with incomplete_guard(out):
        rows = dose_response(records, baseline, cfg.seed, per_combo,
                             baseline_n)
        path = write_dose_response_csv(out / "dose_response.csv", rows)
        plots = plot_dose_response(rows, out)
        write_provenance(cfg, out, "dose-response")
    print(f"dose-response over {len(rows)} combinations, {len(plots)} "
          f"plots -> {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hcsenhance",
        description="Microscopy image enhancement and quantification "
                    "pipeline")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add(name, func, configure):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML run config")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        configure(p)
        p.set_defaults(func=func)
        return p

    add("extract-patches", cmd_extract_patches, lambda p: [
        p.add_argument("--input-dir"),
        p.add_argument("--patch-size", type=int),
        p.add_argument("--out"),
    ])
    add("split", cmd_split, lambda p: [
        p.add_argument("--dataset"),
        p.add_argument("--ratios", help="comma-separated train,val,test"),
    ])
    add("simulate", cmd_simulate, lambda p: [
        p.add_argument("--dataset"),
        p.add_argument("--cases", help="comma-separated case tags"),
        p.add_argument("--out"),
    ])
    for name, func in (("train-cyclegan", cmd_train_cyclegan),
                       ("train-pix2pix", cmd_train_pix2pix)):
        add(name, func, lambda p: [
            p.add_argument("--source", help="source-domain dataset"),
            p.add_argument("--target", help="target-domain dataset"),
            p.add_argument("--out"),
            p.add_argument("--resume", help="checkpoint to resume from"),
            p.add_argument("--max-steps", type=int, default=None),
        ])
    add("restore", cmd_restore, lambda p: [
        p.add_argument("--method", choices=("rl", "cyclegan", "pix2pix")),
        p.add_argument("--input"),
        p.add_argument("--checkpoint"),
        p.add_argument("--iterations", type=int),
        p.add_argument("--split"),
        p.add_argument("--out"),
    ])
    add("evaluate", cmd_evaluate, lambda p: [
        p.add_argument("--restored"),
        p.add_argument("--ground-truth"),
        p.add_argument("--method"),
        p.add_argument("--case"),
        p.add_argument("--split"),
        p.add_argument("--out"),
    ])
    add("track", cmd_track, lambda p: [
        p.add_argument("--checkpoints"),
        p.add_argument("--degraded"),
        p.add_argument("--ground-truth"),
        p.add_argument("--case"),
        p.add_argument("--split"),
        p.add_argument("--out"),
    ])
    add("segment", cmd_segment, lambda p: [
        p.add_argument("--input"),
        p.add_argument("--mode", choices=("otsu", "sobel"), default="otsu"),
        p.add_argument("--out"),
    ])
    add("quantify", cmd_quantify, lambda p: [
        p.add_argument("--input"),
        p.add_argument("--radius", type=int),
        p.add_argument("--split"),
        p.add_argument("--out"),
    ])
    add("dose-response", cmd_dose_response, lambda p: [
        p.add_argument("--densities"),
        p.add_argument("--baseline"),
        p.add_argument("--per-combo", type=int),
        p.add_argument("--baseline-n", type=int),
        p.add_argument("--out"),
    ])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.seed)
        snapshot_config(cfg)
        return args.func(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except TrainingDivergedError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 4
    except HcsEnhanceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()

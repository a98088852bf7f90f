"""Restoration quality metrics and their aggregation into reports.

Three per-patch metrics on the tubule channel: single-scale structural
similarity with an 11-tap Gaussian window, its four-scale variant, and a
pixelwise AUC-ROC that treats above-mean ground-truth pixels as positives
and reconstruction intensities as scores. Reports aggregate per-patch
values as mean +/- population std, scaled by 100.
"""

from dataclasses import dataclass
from pathlib import Path

import csv
import numpy as np

from . import imaging
from .errors import DataError, DegenerateImageError
from .kernels import separable_convolve
from .patches import DatasetManifest, load_patch

SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_RANGE = 255.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
MSSSIM_SCALES = 4
# standard five-scale weights; a run uses the first `scales`, renormalized
MSSSIM_BASE_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)

METRIC_NAMES = ("ssim", "msssim", "auc")


def _window_taps() -> np.ndarray:
    return imaging.gaussian_kernel1d(SSIM_SIGMA, radius=SSIM_WINDOW // 2)


def _ssim_maps(a: np.ndarray, b: np.ndarray) -> tuple:
    """Per-pixel luminance and contrast-structure maps."""
    a = imaging.as_float(a)
    b = imaging.as_float(b)
    if a.shape != b.shape:
        raise DataError(f"metric inputs differ in shape: {a.shape} vs "
                        f"{b.shape}")
    taps = _window_taps()
    mu_a = separable_convolve(a, taps)
    mu_b = separable_convolve(b, taps)
    var_a = separable_convolve(a * a, taps) - mu_a * mu_a
    var_b = separable_convolve(b * b, taps) - mu_b * mu_b
    cov = separable_convolve(a * b, taps) - mu_a * mu_b
    c1 = (SSIM_K1 * SSIM_RANGE) ** 2
    c2 = (SSIM_K2 * SSIM_RANGE) ** 2
    lum = (2 * mu_a * mu_b + c1) / (mu_a * mu_a + mu_b * mu_b + c1)
    cs = (2 * cov + c2) / (var_a + var_b + c2)
    return lum, cs


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean local structural similarity, in [-1, 1]."""
    lum, cs = _ssim_maps(a, b)
    return float(np.mean(lum * cs))


def _halve(img: np.ndarray) -> np.ndarray:
    """2x2 average pooling; trailing odd row/column is dropped."""
    h, w = (img.shape[0] // 2) * 2, (img.shape[1] // 2) * 2
    c = img[:h, :w]
    return (c[0::2, 0::2] + c[1::2, 0::2] + c[0::2, 1::2]
            + c[1::2, 1::2]) / 4.0


def msssim(a: np.ndarray, b: np.ndarray, scales: int = MSSSIM_SCALES) -> float:
    """Multi-scale structural similarity.

    Contrast-structure means enter at every scale, luminance only at the
    coarsest; each is clamped at 0 before the weighted geometric
    combination, so the result lands in [0, 1].
    """
    a = imaging.as_float(a)
    b = imaging.as_float(b)
    if not 1 <= scales <= len(MSSSIM_BASE_WEIGHTS):
        raise ValueError(f"scales must be in 1..{len(MSSSIM_BASE_WEIGHTS)}")
    need = SSIM_WINDOW * 2 ** (scales - 1)
    if min(a.shape) < need or a.shape != b.shape:
        raise DataError(
            f"multi-scale similarity at {scales} scales needs matching "
            f"sides >= {need}, got {a.shape} vs {b.shape}")
    weights = np.asarray(MSSSIM_BASE_WEIGHTS[:scales], dtype=np.float64)
    weights = weights / weights.sum()
    result = 1.0
    for level in range(scales):
        lum, cs = _ssim_maps(a, b)
        if level < scales - 1:
            term = max(float(np.mean(cs)), 0.0)
            a, b = _halve(a), _halve(b)
        else:
            term = max(float(np.mean(lum * cs)), 0.0)
        result *= term ** weights[level]
    return float(result)


def _average_ranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their group's average rank."""
    order = np.argsort(scores, kind="stable")
    sorted_scores = scores[order]
    n = scores.size
    starts = np.flatnonzero(
        np.r_[True, sorted_scores[1:] != sorted_scores[:-1]])
    counts = np.diff(np.r_[starts, n])
    group_rank = starts + (counts + 1) / 2.0
    ranks = np.empty(n, dtype=np.float64)
    ranks[order] = np.repeat(group_rank, counts)
    return ranks


def auc_roc(ground_truth: np.ndarray, reconstruction: np.ndarray) -> float:
    """Pixel-ranking AUC of the reconstruction against the ground truth.

    Positives are ground-truth pixels above the ground-truth mean; the
    reconstruction intensity is the score. Ties share average ranks,
    which matches counting half a success per tied pair.
    """
    gt = imaging.as_float(ground_truth)
    rec = imaging.as_float(reconstruction)
    if gt.shape != rec.shape:
        raise DataError(f"metric inputs differ in shape: {gt.shape} vs "
                        f"{rec.shape}")
    positives = (gt > gt.mean()).ravel()
    n_pos = int(positives.sum())
    n_neg = positives.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateImageError(
            "ground truth has a single class; AUC undefined")
    ranks = _average_ranks(rec.ravel())
    pos_rank_sum = float(ranks[positives].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


@dataclass
class MetricReport:
    """Aggregated test-set metrics, scaled by 100 with population stds."""

    method: str
    case: str
    ssim_mean: float
    ssim_std: float
    msssim_mean: float
    msssim_std: float
    auc_mean: float
    auc_std: float
    n_patches: int

    def __post_init__(self):
        if not (-100 <= self.ssim_mean <= 100
                and -100 <= self.msssim_mean <= 100
                and 0 <= self.auc_mean <= 100):
            raise ValueError("metric means out of range")
        if min(self.ssim_std, self.msssim_std, self.auc_std) < 0:
            raise ValueError("stds must be non-negative")

    def value(self, metric: str) -> tuple:
        return {"ssim": (self.ssim_mean, self.ssim_std),
                "msssim": (self.msssim_mean, self.msssim_std),
                "auc": (self.auc_mean, self.auc_std)}[metric]


def evaluate_pair(ground_truth: np.ndarray,
                  restored: np.ndarray) -> tuple:
    """(ssim, msssim, auc) for one tubule pair; restored is resized to
    the ground-truth grid first when sizes differ."""
    gt = imaging.as_float(ground_truth)
    rec = imaging.as_float(restored)
    if rec.shape != gt.shape:
        rec = imaging.resize(rec, gt.shape[0], gt.shape[1])
    return ssim(gt, rec), msssim(gt, rec), auc_roc(gt, rec)


def evaluate_testset(restored_manifest: DatasetManifest,
                     groundtruth_manifest: DatasetManifest,
                     method: str = "", case: str = "",
                     split: str | None = None) -> MetricReport:
    """Tubule-channel metrics over paired datasets, aggregated x100.

    Patches pair by id; both manifests must cover the same ids (within
    the chosen split). Stds are population stds over patches.
    """
    restored = restored_manifest if split is None \
        else restored_manifest.filter_split(split)
    gt = groundtruth_manifest if split is None \
        else groundtruth_manifest.filter_split(split)
    gt_by_id = gt.by_patch_id()
    rest_by_id = restored.by_patch_id()
    if set(gt_by_id) != set(rest_by_id):
        only_gt = sorted(set(gt_by_id) - set(rest_by_id))[:3]
        only_rest = sorted(set(rest_by_id) - set(gt_by_id))[:3]
        raise DataError(f"patch ids do not pair up (ground-truth only: "
                        f"{only_gt}, restored only: {only_rest})")
    if not gt_by_id:
        raise DataError("nothing to evaluate")
    values = {name: [] for name in METRIC_NAMES}
    for patch_id in sorted(gt_by_id):
        gt_patch = load_patch(gt.root, gt_by_id[patch_id])
        rest_patch = load_patch(restored.root, rest_by_id[patch_id])
        s, ms, auc = evaluate_pair(gt_patch.tubule, rest_patch.tubule)
        values["ssim"].append(s)
        values["msssim"].append(ms)
        values["auc"].append(auc)
    agg = {}
    for name, vals in values.items():
        arr = np.asarray(vals)
        agg[name] = (float(arr.mean() * 100), float(arr.std() * 100))
    return MetricReport(method, case,
                        agg["ssim"][0], agg["ssim"][1],
                        agg["msssim"][0], agg["msssim"][1],
                        agg["auc"][0], agg["auc"][1],
                        len(values["ssim"]))


def write_metric_csv(path: Path, reports: list) -> Path:
    """Long-form report CSV: method, case, metric, mean, std, n."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method", "case", "metric", "mean", "std", "n"])
        for report in reports:
            for metric in METRIC_NAMES:
                mean, std = report.value(metric)
                writer.writerow([report.method, report.case, metric,
                                 f"{mean:.6f}", f"{std:.6f}",
                                 report.n_patches])
    return path


def _enhanced_in_memory(gen, manifest: DatasetManifest, target_side: int,
                        gt_by_id: dict, gt_root: Path) -> tuple:
    """Per-metric values of a generator applied to a degraded dataset."""
    from .neural.infer import enhance

    values = {name: [] for name in METRIC_NAMES}
    for entry in sorted(manifest.entries, key=lambda e: e.patch_id):
        patch = load_patch(manifest.root, entry)
        restored = enhance(patch, gen, target_side)
        gt_patch = load_patch(gt_root, gt_by_id[entry.patch_id])
        s, ms, auc = evaluate_pair(gt_patch.tubule, restored.tubule)
        values["ssim"].append(s)
        values["msssim"].append(ms)
        values["auc"].append(auc)
    agg = {name: (float(np.mean(v) * 100), float(np.std(v) * 100))
           for name, v in values.items()}
    return agg, len(values["ssim"])


def track_training(checkpoint_paths: list, degraded_manifest: DatasetManifest,
                   groundtruth_manifest: DatasetManifest, case: str,
                   out_dir: Path | None = None, split: str | None = "val",
                   direction: str = "ab",
                   include_untrained: bool = True) -> list:
    """Validation metrics per training epoch, for learning curves.

    Returns [(epochs_completed, MetricReport), ...], one row per
    checkpoint plus (by default) an epoch-0 row from the untrained
    generator, which is reconstructible from the run config alone. When
    out_dir is given, writes ``curve_<case>.csv`` and one
    ``curve_<case>_<metric>.png`` per metric.
    """
    from .neural.infer import load_generator
    from .neural.train import load_checkpoint, config_from_dict, \
        untrained_generator

    if not checkpoint_paths:
        raise DataError("need at least one checkpoint to track")
    degraded = degraded_manifest if split is None \
        else degraded_manifest.filter_split(split)
    gt = groundtruth_manifest if split is None \
        else groundtruth_manifest.filter_split(split)
    gt_by_id = gt.by_patch_id()
    missing = [e.patch_id for e in degraded.entries
               if e.patch_id not in gt_by_id]
    if missing or not degraded.entries:
        raise DataError(f"degraded/ground-truth ids do not pair up "
                        f"(missing: {missing[:3]})")

    rows = []
    if include_untrained:
        cfg = config_from_dict(load_checkpoint(checkpoint_paths[0])["config"])
        gen = untrained_generator(cfg, direction)
        agg, n = _enhanced_in_memory(gen, degraded, cfg.target_side,
                                     gt_by_id, gt.root)
        rows.append((0, _report_from_agg("untrained", case, agg, n)))
    for path in checkpoint_paths:
        gen, cfg = load_generator(path, direction)
        epochs_done = load_checkpoint(path)["epoch"] + 1
        agg, n = _enhanced_in_memory(gen, degraded, cfg.target_side,
                                     gt_by_id, gt.root)
        rows.append((epochs_done,
                     _report_from_agg(f"epoch-{epochs_done}", case, agg, n)))
    rows.sort(key=lambda r: r[0])
    if out_dir is not None:
        write_curve_outputs(rows, case, Path(out_dir))
    return rows


def _report_from_agg(method: str, case: str, agg: dict,
                     n: int) -> MetricReport:
    return MetricReport(method, case,
                        agg["ssim"][0], agg["ssim"][1],
                        agg["msssim"][0], agg["msssim"][1],
                        agg["auc"][0], agg["auc"][1], n)


def write_curve_outputs(rows: list, case: str, out_dir: Path) -> None:
    """CSV plus one epoch-vs-metric PNG per metric."""
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / f"curve_{case}.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "case", "metric", "mean", "std", "n"])
        for epoch, report in rows:
            for metric in METRIC_NAMES:
                mean, std = report.value(metric)
                writer.writerow([epoch, case, metric, f"{mean:.6f}",
                                 f"{std:.6f}", report.n_patches])
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    epochs = [r[0] for r in rows]
    for metric in METRIC_NAMES:
        means = np.array([r[1].value(metric)[0] for r in rows])
        stds = np.array([r[1].value(metric)[1] for r in rows])
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.plot(epochs, means, marker="o")
        ax.fill_between(epochs, means - stds, means + stds, alpha=0.2)
        ax.set_xlabel("epochs completed")
        ax.set_ylabel(f"{metric} x100")
        ax.set_title(f"case {case}")
        fig.tight_layout()
        fig.savefig(out_dir / f"curve_{case}_{metric}.png", dpi=120)
        plt.close(fig)

"""
Evaluation Metrics
Neighbourhood-tolerant confusion counts and the ODS/OIS/AC/ACL/SSIM scores built on them
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage
from skimage.metrics import structural_similarity
from skimage.morphology import skeletonize

logger = logging.getLogger(__name__)

WINDOW = 5
TP_MIN_COUNT = 3
TP_MAX_COUNT = 12
FP_MIN_COUNT = 12

SSIM_SIGMA = 1.5
SSIM_MIN_SIDE = 11

_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other: 'ConfusionCounts') -> 'ConfusionCounts':
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    def to_dict(self) -> Dict:
        return {'tp': self.tp, 'fp': self.fp, 'fn': self.fn}


@dataclass
class MetricsReport:
    """Dataset-level scores plus the per-image rows they came from"""

    ods: float = 0.0
    ois: float = 0.0
    ac: float = 0.0
    acl: float = 0.0
    ssim: float = 0.0
    thickness: float = 0.0
    per_image: List[Dict] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            'ods': self.ods,
            'ois': self.ois,
            'ac': self.ac,
            'acl': self.acl,
            'ssim': self.ssim,
            'thickness': self.thickness,
            'per_image': self.per_image,
        }


def _check_pair(pred: np.ndarray, gt: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"Prediction shape {pred.shape} != ground truth shape {gt.shape}")
    return pred > 0, gt > 0


def window_counts(pred: np.ndarray) -> np.ndarray:
    """Number of prediction edge pixels in the 5x5 window around every pixel"""
    return ndimage.convolve(
        (np.asarray(pred) > 0).astype(np.int32),
        np.ones((WINDOW, WINDOW), dtype=np.int32),
        mode='constant',
        cval=0,
    )


def count_confusion(pred: np.ndarray, gt: np.ndarray) -> ConfusionCounts:
    """
    Confusion counts with a 5x5 tolerance window

    A ground-truth edge pixel is a true positive when its window holds
    3..12 predicted edge pixels, otherwise a false negative. A non-edge
    ground-truth pixel is a false positive when its window holds 12 or more.
    """
    pred_mask, gt_mask = _check_pair(pred, gt)
    counts = window_counts(pred_mask)

    matched = gt_mask & (counts >= TP_MIN_COUNT) & (counts <= TP_MAX_COUNT)
    tp = int(matched.sum())
    fn = int(gt_mask.sum()) - tp
    fp = int((~gt_mask & (counts >= FP_MIN_COUNT)).sum())
    return ConfusionCounts(tp=tp, fp=fp, fn=fn)


def precision_recall(c: ConfusionCounts) -> Tuple[float, float]:
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp else 0.0
    recall = c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0
    return precision, recall


def f_measure(c: ConfusionCounts) -> float:
    precision, recall = precision_recall(c)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def optimal_scales(per_image_sweep: Sequence[Sequence[Tuple[float, ConfusionCounts]]]) -> Dict:
    """
    Best dataset-wide and per-image operating points of a threshold sweep

    Args:
        per_image_sweep: For each image, (threshold, counts) over a shared grid

    Returns:
        Dict with ods, ois, ods_threshold and per-image best thresholds and F
    """
    if not per_image_sweep:
        raise ValueError("Cannot compute ODS/OIS of an empty sweep")

    thresholds = [t for t, _ in per_image_sweep[0]]
    for index, sweep in enumerate(per_image_sweep):
        if [t for t, _ in sweep] != thresholds:
            raise ValueError(f"Image {index} was swept over a different threshold grid")

    totals = [ConfusionCounts() for _ in thresholds]
    per_image_best = []
    for sweep in per_image_sweep:
        scores = [f_measure(c) for _, c in sweep]
        best = int(np.argmax(scores))
        per_image_best.append({'threshold': thresholds[best], 'f': scores[best]})
        for i, (_, counts) in enumerate(sweep):
            totals[i] = totals[i] + counts

    dataset_scores = [f_measure(c) for c in totals]
    best_index = int(np.argmax(dataset_scores))

    return {
        'ods': dataset_scores[best_index],
        'ods_threshold': thresholds[best_index],
        'ods_index': best_index,
        'ois': float(np.mean([b['f'] for b in per_image_best])),
        'per_image': per_image_best,
        'dataset_counts': totals,
    }


def ods_ois(per_image_sweep: Sequence[Sequence[Tuple[float, ConfusionCounts]]]) -> Tuple[float, float]:
    scales = optimal_scales(per_image_sweep)
    return scales['ods'], scales['ois']


def _components(edge_map: np.ndarray) -> Tuple[np.ndarray, int]:
    return ndimage.label(np.asarray(edge_map) > 0, structure=_EIGHT)


def average_contour_length(edge_map: np.ndarray) -> float:
    """Mean pixel count of 8-connected edge components"""
    labels, count = _components(edge_map)
    if count == 0:
        return 0.0
    sizes = np.bincount(labels.ravel())[1:]
    return float(sizes.mean())


def edge_thickness(edge_map: np.ndarray) -> float:
    """Mean over components of pixel count divided by skeleton length"""
    labels, count = _components(edge_map)
    if count == 0:
        return 0.0

    skeleton = skeletonize(labels > 0)
    sizes = np.bincount(labels.ravel(), minlength=count + 1)[1:]
    skeleton_sizes = np.bincount(labels[skeleton], minlength=count + 1)[1:]
    ratios = sizes / np.maximum(skeleton_sizes, 1)
    return float(ratios.mean())


def ssim(pred: np.ndarray, gt: np.ndarray) -> float:
    """Gaussian-window SSIM over {0, 255} maps"""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError(f"Prediction shape {pred.shape} != ground truth shape {gt.shape}")
    if min(pred.shape) < SSIM_MIN_SIDE:
        raise ValueError(f"SSIM needs maps of at least {SSIM_MIN_SIDE}x{SSIM_MIN_SIDE}, got {pred.shape}")

    return float(structural_similarity(
        pred, gt,
        data_range=255.0,
        gaussian_weights=True,
        sigma=SSIM_SIGMA,
        use_sample_covariance=False,
        K1=0.01,
        K2=0.03,
    ))


def area_coverage(pred: np.ndarray, gt: np.ndarray, counts: Optional[ConfusionCounts] = None) -> float:
    """Matched ground-truth pixels per predicted edge pixel"""
    pred_mask, _ = _check_pair(pred, gt)
    predicted = int(pred_mask.sum())
    if predicted == 0:
        return 0.0
    counts = counts or count_confusion(pred, gt)
    return counts.tp / predicted


def evaluate_edge_map(pred: np.ndarray, gt: Optional[np.ndarray] = None) -> Dict:
    """
    Per-image metrics row

    Args:
        pred: Predicted binary edge map
        gt: Ground-truth binary edge map, if available

    Returns:
        Dict of edge_pixels, acl, thickness and, with gt, tp/fp/fn, f, ssim, ac
    """
    row = {
        'edge_pixels': int((np.asarray(pred) > 0).sum()),
        'acl': average_contour_length(pred),
        'thickness': edge_thickness(pred),
    }
    if gt is None:
        return row

    counts = count_confusion(pred, gt)
    row.update(counts.to_dict())
    row['f'] = f_measure(counts)
    row['ac'] = area_coverage(pred, gt, counts)
    if min(np.shape(pred)) >= SSIM_MIN_SIDE:
        row['ssim'] = ssim(pred, gt)
    else:
        logger.warning(f"Map of shape {np.shape(pred)} too small for SSIM; skipped")
    return row


def summarize(rows: List[Dict]) -> MetricsReport:
    """Dataset report for maps evaluated at a single operating point"""
    report = MetricsReport(per_image=rows)
    if not rows:
        return report

    report.acl = float(np.mean([r['acl'] for r in rows]))
    report.thickness = float(np.mean([r['thickness'] for r in rows]))

    scored = [r for r in rows if 'tp' in r]
    if scored:
        total = sum((ConfusionCounts(r['tp'], r['fp'], r['fn']) for r in scored), ConfusionCounts())
        report.ods = f_measure(total)
        report.ois = float(np.mean([r['f'] for r in scored]))
        predicted = sum(r['edge_pixels'] for r in scored)
        report.ac = total.tp / predicted if predicted else 0.0
        with_ssim = [r['ssim'] for r in scored if 'ssim' in r]
        report.ssim = float(np.mean(with_ssim)) if with_ssim else 0.0
    return report

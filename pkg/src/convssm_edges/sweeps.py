"""
Parameter Sweeps
Threshold sweep for ODS/OIS, recurrence-weight search and flip/kernel ablations
"""

import itertools
import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .cache import GradientCache
from .config import PipelineConfig
from .dataset import DatasetError
from .metrics import (
    ConfusionCounts,
    count_confusion,
    evaluate_edge_map,
    f_measure,
    optimal_scales,
    summarize,
)
from .pipeline import cached_gradients, run_pipeline, suppressed_magnitude
from .postprocess import HysteresisParams, hysteresis_threshold
from .saim import SaimWeights, degenerate_kernel_set, effective_weights

logger = logging.getLogger(__name__)

# Index 50 is exactly 127.5
THRESHOLD_GRID = np.arange(101) * 255.0 / 100.0
WEIGHT_GRID = tuple(round(0.1 * i, 1) for i in range(21))
WEIGHT_NAMES = ('a', 'b', 'c', 'd')
WEIGHT_PROTOCOLS = ('coordinate', 'grid', 'consensus', 'paper')
# Alternative names accepted on the command line
PROTOCOL_ALIASES = {'paper': 'consensus'}

# (stem, image, ground truth or None)
Sample = Tuple[str, np.ndarray, Optional[np.ndarray]]
ImageCallback = Optional[Callable[[str], None]]


@dataclass
class SweepResult:
    """Per-image confusion counts over the threshold grid and the best operating points"""

    thresholds: np.ndarray
    per_image: Dict[str, List[ConfusionCounts]] = field(default_factory=dict)
    predicted: Dict[str, List[int]] = field(default_factory=dict)
    ods: float = 0.0
    ois: float = 0.0
    ods_threshold: float = 0.0
    ac: float = 0.0
    per_image_best: Dict[str, Dict] = field(default_factory=dict)

    def rows(self) -> List[Dict]:
        """One row per image and threshold, then dataset totals under stem 'ALL'"""
        rows = []
        for stem, counts in self.per_image.items():
            for threshold, c in zip(self.thresholds, counts):
                rows.append({'stem': stem, 'threshold': float(threshold), **c.to_dict(), 'f': f_measure(c)})

        for index, threshold in enumerate(self.thresholds):
            total = sum((counts[index] for counts in self.per_image.values()), ConfusionCounts())
            rows.append({'stem': 'ALL', 'threshold': float(threshold), **total.to_dict(), 'f': f_measure(total)})
        return rows

    def to_dict(self) -> Dict:
        return {
            'ods': self.ods,
            'ois': self.ois,
            'ods_threshold': self.ods_threshold,
            'ac': self.ac,
            'per_image_best': self.per_image_best,
            'thresholds': [float(t) for t in self.thresholds],
        }


@dataclass
class WeightSweepResult:
    """
    Outcome of a weight search

    best_weights are the nominal grid values; effective_weights are what
    the scanner ran with once the stability guard rescaled a.
    """

    best_weights: SaimWeights
    best_f: float
    protocol: str
    evaluations: List[Dict] = field(default_factory=list)
    per_image: Dict[str, Dict] = field(default_factory=dict)
    effective_weights: Optional[SaimWeights] = None

    def to_dict(self) -> Dict:
        effective = self.effective_weights or self.best_weights
        return {
            'best_weights': self.best_weights.to_dict(),
            'effective_weights': effective.to_dict(),
            'best_f': self.best_f,
            'protocol': self.protocol,
            'evaluations': len(self.evaluations),
            'per_image': self.per_image,
        }


def sweep_image(suppressed: np.ndarray, gt: np.ndarray,
                thresholds: Sequence[float] = THRESHOLD_GRID) -> Tuple[List[ConfusionCounts], List[int]]:
    """Confusion counts and predicted pixel counts at every high threshold (low = 0.95 * high)"""
    counts, predicted = [], []
    for threshold in thresholds:
        edge_map = hysteresis_threshold(suppressed, HysteresisParams.coupled(float(threshold)))
        counts.append(count_confusion(edge_map, gt))
        predicted.append(int((edge_map > 0).sum()))
    return counts, predicted


def sweep_threshold_samples(samples: Iterable[Sample], config: PipelineConfig,
                            cache: Optional[GradientCache] = None,
                            thresholds: Sequence[float] = THRESHOLD_GRID,
                            on_image: ImageCallback = None) -> SweepResult:
    """
    Sweep hysteresis thresholds with Wind Erosion off

    Args:
        samples: (stem, image, gt) triples; entries without gt are skipped
        config: Pipeline configuration (thresholds and erosion are ignored)
        cache: Gradient cache
        thresholds: High-threshold grid
        on_image: Called with each stem once it is swept

    Returns:
        SweepResult
    """
    result = SweepResult(thresholds=np.asarray(thresholds, dtype=np.float64))

    for stem, image, gt in samples:
        if gt is None:
            logger.warning(f"Skipping {stem}: no ground truth")
            continue
        suppressed = suppressed_magnitude(cached_gradients(image, config, cache), config)
        result.per_image[stem], result.predicted[stem] = sweep_image(suppressed, gt, result.thresholds)
        if on_image is not None:
            on_image(stem)

    if not result.per_image:
        raise DatasetError("Threshold sweep needs at least one image with ground truth")

    sweeps = [list(zip(result.thresholds, counts)) for counts in result.per_image.values()]
    scales = optimal_scales(sweeps)
    result.ods = scales['ods']
    result.ois = scales['ois']
    result.ods_threshold = float(scales['ods_threshold'])
    result.per_image_best = dict(zip(result.per_image, scales['per_image']))

    index = scales['ods_index']
    predicted = sum(p[index] for p in result.predicted.values())
    result.ac = scales['dataset_counts'][index].tp / predicted if predicted else 0.0

    logger.info(f"Threshold sweep: ODS {result.ods:.4f} at H={result.ods_threshold:.2f}, OIS {result.ois:.4f}")
    return result


def _with_weights(config: PipelineConfig, weights: SaimWeights) -> PipelineConfig:
    return replace(config, scan=replace(config.scan, weights=weights))


def _weight_result(best: SaimWeights, best_f: float, protocol: str, config: PipelineConfig,
                   **details) -> WeightSweepResult:
    effective = effective_weights(_with_weights(config, best).scan)
    if effective != best:
        logger.debug(f"Stability guard runs a={best.a} as a={effective.a:.6f}")
    return WeightSweepResult(best_weights=best, best_f=best_f, protocol=protocol,
                             effective_weights=effective, **details)


def resolve_protocol(protocol: str) -> str:
    """Canonical protocol name; raises ValueError for unknown names"""
    if protocol not in WEIGHT_PROTOCOLS:
        raise ValueError(f"Unknown weight protocol {protocol!r} (expected one of {WEIGHT_PROTOCOLS})")
    return PROTOCOL_ALIASES.get(protocol, protocol)


def _search(score: Callable[[SaimWeights], float], start: SaimWeights,
            protocol: str, grid: Sequence[float]) -> Tuple[SaimWeights, float, List[Dict]]:
    """Maximise score over the weight grid; ties keep the earlier candidate"""
    memo: Dict[Tuple[float, ...], float] = {}
    evaluations: List[Dict] = []

    def evaluate(weights: SaimWeights) -> float:
        key = weights.as_tuple()
        if key not in memo:
            memo[key] = score(weights)
            evaluations.append({**weights.to_dict(), 'f': memo[key]})
        return memo[key]

    if protocol == 'grid':
        best, best_f = start, evaluate(start)
        for values in itertools.product(grid, repeat=len(WEIGHT_NAMES)):
            candidate = SaimWeights(*values)
            f = evaluate(candidate)
            if f > best_f:
                best, best_f = candidate, f
        return best, best_f, evaluations

    best, best_f = start, evaluate(start)
    for name in WEIGHT_NAMES:
        current = best
        for value in grid:
            candidate = replace(current, **{name: float(value)})
            f = evaluate(candidate)
            if f > best_f:
                best, best_f = candidate, f
    return best, best_f, evaluations


def sweep_weights(image: np.ndarray, gt: np.ndarray, config: PipelineConfig,
                  protocol: str = 'coordinate', grid: Sequence[float] = WEIGHT_GRID) -> WeightSweepResult:
    """
    Search the recurrence weights that maximise F on one image

    Args:
        image: Grayscale image
        gt: Ground-truth edge map
        config: Pipeline configuration; its weights are the starting point
        protocol: 'coordinate' (one weight at a time) or 'grid' (full product)
        grid: Values tried per weight

    Returns:
        WeightSweepResult
    """
    if gt is None:
        raise DatasetError("Weight sweep needs ground truth")
    if protocol not in ('coordinate', 'grid'):
        raise ValueError(f"Per-image weight search supports 'coordinate' or 'grid', got {protocol!r}")

    def score(weights: SaimWeights) -> float:
        result = run_pipeline(image, _with_weights(config, weights))
        return f_measure(count_confusion(result.edge_map, gt))

    best, best_f, evaluations = _search(score, config.scan.weights, protocol, grid)
    logger.debug(f"Best weights {best.as_tuple()} with F={best_f:.4f} after {len(evaluations)} runs")
    return _weight_result(best, best_f, protocol, config, evaluations=evaluations)


def _mode(values: Sequence[float]) -> float:
    counts = Counter(values)
    top = max(counts.values())
    return min(v for v, n in counts.items() if n == top)


def sweep_weights_dataset(samples: Sequence[Sample], config: PipelineConfig,
                          protocol: str = 'coordinate', grid: Sequence[float] = WEIGHT_GRID,
                          on_image: ImageCallback = None) -> WeightSweepResult:
    """
    Choose one weight set for a dataset

    'coordinate' and 'grid' maximise F on dataset-summed counts. 'consensus'
    (also accepted as 'paper') searches each image separately and takes, per
    weight, the most frequent per-image optimum.
    """
    protocol = resolve_protocol(protocol)

    scored = [(stem, image, gt) for stem, image, gt in samples if gt is not None]
    if not scored:
        raise DatasetError("Weight sweep needs at least one image with ground truth")

    if protocol == 'consensus':
        per_image = {}
        for stem, image, gt in scored:
            found = sweep_weights(image, gt, config, 'coordinate', grid)
            per_image[stem] = {**found.best_weights.to_dict(), 'f': found.best_f}
            if on_image is not None:
                on_image(stem)

        chosen = SaimWeights(*[_mode([row[name] for row in per_image.values()]) for name in WEIGHT_NAMES])
        f = _dataset_f(scored, _with_weights(config, chosen))
        return _weight_result(chosen, f, protocol, config, per_image=per_image)

    def score(weights: SaimWeights) -> float:
        return _dataset_f(scored, _with_weights(config, weights))

    best, best_f, evaluations = _search(score, config.scan.weights, protocol, grid)
    return _weight_result(best, best_f, protocol, config, evaluations=evaluations)


def _dataset_f(samples: Sequence[Sample], config: PipelineConfig) -> float:
    total = ConfusionCounts()
    for _, image, gt in samples:
        total = total + count_confusion(run_pipeline(image, config).edge_map, gt)
    return f_measure(total)


def ablation_variants(config: PipelineConfig) -> List[Tuple[str, PipelineConfig]]:
    """Flip variants plus the fixed-convolution kernel variant"""
    variants = []
    for name, flips in (('no_flip', ()), ('h_flip', ('horizontal',)),
                        ('v_flip', ('vertical',)), ('hv_flip', ('horizontal', 'vertical'))):
        variants.append((name, replace(config, scan=replace(config.scan, flips=flips))))

    fixed = replace(config.scan, kernels=degenerate_kernel_set(config.scan.kernels))
    variants.append(('fixed_kernels', replace(config, scan=fixed)))
    return variants


def run_ablation(samples: Sequence[Sample], config: PipelineConfig,
                 cache: Optional[GradientCache] = None,
                 on_variant: ImageCallback = None) -> List[Dict]:
    """
    Score each ablation variant on the same images

    Returns:
        One row per variant with ACL, thickness and, when ground truth
        exists, F (summed counts), SSIM and AC
    """
    rows = []
    for name, variant in ablation_variants(config):
        evaluated = []
        for stem, image, gt in samples:
            result = run_pipeline(image, variant, cache=cache)
            evaluated.append({'stem': stem, **evaluate_edge_map(result.edge_map, gt)})

        report = summarize(evaluated)
        row = {'variant': name, 'acl': report.acl, 'thickness': report.thickness}
        if any('tp' in r for r in evaluated):
            row.update({'f': report.ods, 'ssim': report.ssim, 'ac': report.ac})
        rows.append(row)
        logger.info(f"Ablation {name}: ACL {report.acl:.2f}")
        if on_variant is not None:
            on_variant(name)
    return rows

"""
Edge Detection Pipeline
Scanner -> magnitude/direction -> NMS -> hysteresis -> optional Wind Erosion
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .accelerator.crossbar import CrossbarSimulator
from .cache import GradientCache
from .config import PipelineConfig
from .postprocess import (
    gradient_direction,
    gradient_magnitude,
    hysteresis_threshold,
    non_max_suppress,
    normalize_magnitude,
)
from .saim import GradientField, scan_with_flips
from .wind_erosion import ErosionTrace, wind_erosion

logger = logging.getLogger(__name__)


@dataclass
class PipelineResult:
    edge_map: np.ndarray
    gradients: GradientField
    trace: Optional[ErosionTrace] = None
    intermediates: Dict[str, np.ndarray] = field(default_factory=dict)


def compute_gradients(image: np.ndarray, config: PipelineConfig,
                      simulator: Optional[CrossbarSimulator] = None) -> GradientField:
    """
    Scan an image, through the crossbar backend when enabled

    Args:
        image: Grayscale image
        config: Pipeline configuration
        simulator: Crossbar backend to reuse (built from config.crossbar when None)

    Returns:
        Fused GradientField
    """
    if not config.crossbar_enabled:
        return scan_with_flips(image, config.scan)

    simulator = simulator or CrossbarSimulator(config.crossbar)
    return scan_with_flips(
        image,
        config.scan,
        convolver=simulator.convolve,
        programmer=simulator.programmed_kernel,
    )


def cached_gradients(image: np.ndarray, config: PipelineConfig,
                     cache: Optional[GradientCache] = None,
                     simulator: Optional[CrossbarSimulator] = None) -> GradientField:
    """compute_gradients through the cache; crossbar runs are never cached"""
    if cache is None or config.crossbar_enabled:
        return compute_gradients(image, config, simulator)

    gradients = cache.get_gradients(image, config.scan)
    if gradients is None:
        gradients = compute_gradients(image, config)
        cache.set_gradients(image, config.scan, gradients)
    return gradients


def suppressed_magnitude(gradients: GradientField, config: PipelineConfig) -> np.ndarray:
    """Normalized magnitude after non-maximum suppression"""
    magnitude = normalize_magnitude(gradient_magnitude(gradients), config.normalize)
    return non_max_suppress(magnitude, gradient_direction(gradients))


def edges_from_gradients(gradients: GradientField, config: PipelineConfig,
                         keep_intermediates: bool = False) -> PipelineResult:
    """Post-process a gradient field into the final edge map"""
    intermediates: Dict[str, np.ndarray] = {}

    magnitude = normalize_magnitude(gradient_magnitude(gradients), config.normalize)
    direction = gradient_direction(gradients)
    suppressed = non_max_suppress(magnitude, direction)
    edge_map = hysteresis_threshold(suppressed, config.hysteresis)

    if keep_intermediates:
        intermediates.update({
            'magnitude': magnitude,
            'direction': direction,
            'suppressed': suppressed,
            'hysteresis': edge_map.copy(),
        })

    trace = None
    if config.erosion_enabled:
        edge_map, trace = wind_erosion(edge_map, config.erosion)

    return PipelineResult(edge_map=edge_map, gradients=gradients, trace=trace, intermediates=intermediates)


def run_pipeline(image: np.ndarray, config: Optional[PipelineConfig] = None,
                 keep_intermediates: bool = False,
                 simulator: Optional[CrossbarSimulator] = None,
                 cache: Optional[GradientCache] = None) -> PipelineResult:
    """
    Detect edges in one image

    Args:
        image: Grayscale image on [0, 255]
        config: Pipeline configuration (defaults when None)
        keep_intermediates: Retain magnitude, direction and pre-erosion maps
        simulator: Crossbar backend to reuse across images
        cache: Gradient cache

    Returns:
        PipelineResult
    """
    config = config or PipelineConfig()
    gradients = cached_gradients(image, config, cache, simulator)
    result = edges_from_gradients(gradients, config, keep_intermediates)

    logger.debug(f"Pipeline produced {int((result.edge_map > 0).sum())} edge pixels")
    return result

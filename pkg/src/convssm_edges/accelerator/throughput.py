"""
Throughput Model
Frame-time estimates for the crossbar accelerator, calibrated to reference timings
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

logger = logging.getLogger(__name__)

# (resolution, pixels, seconds per frame, reported FPS)
REFERENCE_TIMINGS: Tuple[Tuple[str, int, float, float], ...] = (
    ('640x480', 307200, 0.0005, 1887.1),
    ('1280x720', 921600, 0.0014, 695.6),
    ('1600x900', 1440000, 0.0024, 421.1),
    ('1920x1080', 2073600, 0.0034, 295.3),
    ('2560x1440', 3686400, 0.0063, 159.3),
    ('2560x2048', 5242880, 0.0116, 86.5),
    ('3840x2160', 8294400, 0.0177, 56.4),
    ('4068x3072', 12496896, 0.0290, 34.4),
    ('5120x2880', 14745600, 0.0314, 31.9),
    ('6524x4353', 28398972, 0.0587, 17.0),
    ('8000x4500', 36000000, 0.0746, 13.4),
    ('9000x4651', 41859000, 0.0901, 11.1),
    ('9396x5960', 56000160, 0.1181, 8.5),
    ('9376x6336', 59406336, 0.1225, 8.2),
    ('10922x6000', 65532000, 0.1376, 7.3),
    ('11245x6604', 74261980, 0.1722, 5.8),
    ('12000x7300', 87600000, 0.1835, 5.4),
    ('10000x10000', 100000000, 0.22907, 4.5),
    ('19944x6309', 125826696, 0.2932, 3.4),
    ('16877x13107', 221206839, 0.5225, 1.9),
)


def _reference_anchors() -> List[Tuple[int, float]]:
    return [(pixels, seconds) for _, pixels, seconds, _ in REFERENCE_TIMINGS]


@dataclass
class ThroughputModel:
    """
    Piecewise-linear frame time over pixel count

    The hardware fields describe the array the anchors were measured on and
    do not enter the interpolation.
    """

    anchors: List[Tuple[int, float]] = field(default_factory=_reference_anchors)
    crossbar_count: int = 2000
    memristors_per_crossbar: int = 4000
    cycle_seconds: float = 1e-5
    duty: float = 0.5

    def __post_init__(self):
        if len(self.anchors) < 2:
            raise ValueError("ThroughputModel needs at least two anchors")
        pixels = np.array([p for p, _ in self.anchors], dtype=np.float64)
        seconds = np.array([s for _, s in self.anchors], dtype=np.float64)
        if np.any(np.diff(pixels) <= 0) or np.any(np.diff(seconds) <= 0):
            raise ValueError("Anchors must be strictly increasing in pixels and seconds")

    @property
    def pixels(self) -> np.ndarray:
        return np.array([p for p, _ in self.anchors], dtype=np.float64)

    @property
    def seconds(self) -> np.ndarray:
        return np.array([s for _, s in self.anchors], dtype=np.float64)


def estimate_throughput(pixel_count: float, model: ThroughputModel) -> Tuple[float, float]:
    """
    Frame time and frame rate for an image size

    Args:
        pixel_count: Pixels per frame
        model: Calibrated model

    Returns:
        (seconds per frame, frames per second)
    """
    if pixel_count <= 0:
        raise ValueError(f"pixel_count must be positive, got {pixel_count}")

    xs, ys = model.pixels, model.seconds
    if pixel_count < xs[0]:
        slope = (ys[1] - ys[0]) / (xs[1] - xs[0])
        seconds = ys[0] + slope * (pixel_count - xs[0])
    elif pixel_count > xs[-1]:
        slope = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])
        seconds = ys[-1] + slope * (pixel_count - xs[-1])
    else:
        seconds = float(np.interp(pixel_count, xs, ys))

    if seconds <= 0:
        raise ValueError(f"Extrapolated frame time is not positive for {pixel_count} pixels")
    return float(seconds), 1.0 / float(seconds)


def leave_one_out_errors(model: ThroughputModel) -> List[Dict]:
    """Relative error at each interior anchor when it is withheld from the model"""
    rows = []
    for index in range(1, len(model.anchors) - 1):
        reduced = ThroughputModel(anchors=model.anchors[:index] + model.anchors[index + 1:])
        pixels, seconds = model.anchors[index]
        estimate, _ = estimate_throughput(pixels, reduced)
        rows.append({
            'index': index,
            'pixels': pixels,
            'seconds': seconds,
            'estimate': estimate,
            'rel_error': abs(estimate - seconds) / seconds,
        })
    return rows


def hardware_summary(model: ThroughputModel) -> Dict:
    return {
        'crossbars': model.crossbar_count,
        'memristors_per_crossbar': model.memristors_per_crossbar,
        'total_memristors': model.crossbar_count * model.memristors_per_crossbar,
        'cycle_seconds': model.cycle_seconds,
        'duty': model.duty,
        'sampling_window_seconds': model.cycle_seconds * model.duty,
    }

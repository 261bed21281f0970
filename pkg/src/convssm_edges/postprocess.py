"""
Gradient Post-processing
Magnitude, direction, non-maximum suppression and hysteresis thresholding
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
from scipy import ndimage

from .saim import GradientField

logger = logging.getLogger(__name__)

EDGE = 255
WEAK = 50
LOW_RATIO = 0.95
NORMALIZE_MODES = ('max', 'none')

# Neighbour offsets per direction bin. Direction is arctan(gx / gy), so
# bin 0 (gx ~ 0) is a vertical gradient and compares the pixels above and below.
_BIN_OFFSETS = {
    0: ((-1, 0), (1, 0)),
    1: ((1, 1), (-1, -1)),
    2: ((0, -1), (0, 1)),
    3: ((1, -1), (-1, 1)),
}


@dataclass
class HysteresisParams:
    """High/low thresholds on the [0, 255] magnitude scale"""

    high: float = 127.5
    low: Optional[float] = None

    def __post_init__(self):
        self.high = float(self.high)
        self.low = LOW_RATIO * self.high if self.low is None else float(self.low)

        for name, value in (('high', self.high), ('low', self.low)):
            if not 0.0 <= value <= 255.0:
                raise ValueError(f"Threshold {name}={value} outside [0, 255]")
        if self.low > self.high:
            raise ValueError(f"Low threshold {self.low} exceeds high threshold {self.high}")

    @classmethod
    def coupled(cls, high: float) -> 'HysteresisParams':
        """Thresholds with low = 0.95 * high"""
        return cls(high=high, low=LOW_RATIO * high)

    def to_dict(self) -> Dict:
        return {'high': self.high, 'low': self.low}


def gradient_magnitude(field: GradientField) -> np.ndarray:
    return np.hypot(field.gx, field.gy)


def gradient_direction(field: GradientField) -> np.ndarray:
    """arctan(gx / gy) in (-pi/2, pi/2], with gy == 0 mapped to pi/2"""
    gx, gy = field.gx, field.gy
    direction = np.full(gx.shape, np.pi / 2)
    nonzero = gy != 0
    direction[nonzero] = np.arctan(gx[nonzero] / gy[nonzero])
    return direction


def normalize_magnitude(mag: np.ndarray, mode: str = 'max') -> np.ndarray:
    """
    Rescale a magnitude map onto the threshold scale

    Args:
        mag: Non-negative magnitude map
        mode: 'max' maps the image peak to 255, 'none' returns mag unchanged

    Returns:
        Rescaled magnitude map
    """
    mag = np.asarray(mag, dtype=np.float64)
    if mode == 'none':
        return mag
    if mode == 'max':
        peak = float(mag.max()) if mag.size else 0.0
        # Floor keeps rounding residue on flat images from being stretched to 255
        return mag * (255.0 / max(peak, 1e-6))
    raise ValueError(f"Unknown normalization mode: {mode!r}")


def quantize_direction(direction: np.ndarray) -> np.ndarray:
    """Bin index 0..3 for directions 0, pi/4, pi/2, 3pi/4"""
    folded = np.mod(direction, np.pi)
    return np.rint(folded / (np.pi / 4)).astype(np.int64) % 4


def _shifted(values: np.ndarray, offset, fill: float) -> np.ndarray:
    """values[r + dr, c + dc] at every (r, c), fill where out of bounds"""
    dr, dc = offset
    padded = np.pad(values, 1, mode='constant', constant_values=fill)
    rows, cols = values.shape
    return padded[1 + dr:1 + dr + rows, 1 + dc:1 + dc + cols]


def non_max_suppress(mag: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """
    Keep pixels that are >= both neighbours along the binned gradient direction

    Out-of-bounds neighbours are ignored.
    """
    mag = np.asarray(mag, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    if mag.shape != direction.shape:
        raise ValueError(f"Magnitude shape {mag.shape} != direction shape {direction.shape}")

    bins = quantize_direction(direction)
    keep = np.zeros(mag.shape, dtype=bool)

    for index, (first, second) in _BIN_OFFSETS.items():
        selected = bins == index
        if not selected.any():
            continue
        local_max = (mag >= _shifted(mag, first, -np.inf)) & (mag >= _shifted(mag, second, -np.inf))
        keep |= selected & local_max

    return np.where(keep, mag, 0.0)


def label_levels(mag: np.ndarray, params: HysteresisParams) -> np.ndarray:
    """Three-level map: 255 above high, 50 in between, 0 below low"""
    levels = np.zeros(mag.shape, dtype=np.uint8)
    levels[mag >= params.low] = WEAK
    levels[mag > params.high] = EDGE
    return levels


def hysteresis_threshold(mag: np.ndarray, params: HysteresisParams) -> np.ndarray:
    """
    Binarize with a single promotion pass

    Weak pixels become edges only when one of their 8 neighbours was strong
    in the initial labeling; promoted pixels do not promote further.
    """
    levels = label_levels(np.asarray(mag, dtype=np.float64), params)
    strong = levels == EDGE
    weak = levels == WEAK

    near_strong = ndimage.binary_dilation(strong, structure=np.ones((3, 3), dtype=bool))
    edges = strong | (weak & near_strong)

    logger.debug(f"Hysteresis: {int(strong.sum())} strong, {int(weak.sum())} weak, "
                 f"{int((weak & near_strong).sum())} promoted")
    return np.where(edges, EDGE, 0).astype(np.uint8)

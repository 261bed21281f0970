"""
Crossbar Simulator
Numerical model of the memristor-crossbar convolution: value mapping, output law,
conductance quantization and sampled-average noisy readout
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..saim import as_kernel3, build_kernel_set, valid_convolve

logger = logging.getLogger(__name__)

MIN_TRIALS = 100
TILE_SHAPE = (7, 7)


@dataclass
class CrossbarConfig:
    """
    Algorithm-to-circuit mapping and readout settings

    Attributes:
        p_v: Volts per intensity unit
        p_g: Siemens per kernel unit
        r_k1: Feedback resistance in ohms
        conductance_levels: Number of programmable conductance levels
        quantize: Snap conductances to the level grid
        noise_level: Output noise amplitude as a fraction of full scale
        samples_per_pulse: Readings averaged per output
        rng_seed: Seed of the noise generator
    """

    p_v: float = 1e-2
    p_g: float = 1e-4
    r_k1: float = 1e5
    conductance_levels: int = 256
    quantize: bool = True
    noise_level: float = 0.0
    samples_per_pulse: int = 1
    rng_seed: int = 0

    def __post_init__(self):
        for name in ('p_v', 'p_g', 'r_k1'):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.conductance_levels < 3:
            raise ValueError(f"conductance_levels must be >= 3, got {self.conductance_levels}")
        if self.noise_level < 0:
            raise ValueError(f"noise_level must be >= 0, got {self.noise_level}")
        if self.samples_per_pulse < 1:
            raise ValueError(f"samples_per_pulse must be >= 1, got {self.samples_per_pulse}")

    @property
    def gain(self) -> float:
        """Coefficient between decoded values and output volts"""
        return -self.r_k1 * self.p_v * self.p_g

    def to_dict(self) -> Dict:
        return {
            'p_v': self.p_v,
            'p_g': self.p_g,
            'r_k1': self.r_k1,
            'conductance_levels': self.conductance_levels,
            'quantize': self.quantize,
            'noise_level': self.noise_level,
            'samples_per_pulse': self.samples_per_pulse,
            'rng_seed': self.rng_seed,
        }


@dataclass
class ReadoutError:
    mean_rel_error: float
    max_rel_error: float
    std_error: float
    trials: int

    def to_dict(self) -> Dict:
        return {
            'mean_rel_error': self.mean_rel_error,
            'max_rel_error': self.max_rel_error,
            'std_error': self.std_error,
            'trials': self.trials,
        }


def map_to_voltages(x: np.ndarray, cfg: CrossbarConfig) -> np.ndarray:
    return np.asarray(x, dtype=np.float64) * cfg.p_v


def quantize_conductances(g: np.ndarray, levels: int) -> np.ndarray:
    """
    Snap to a signed uniform grid symmetric about zero

    The grid spans [-max|g|, +max|g|] with step max|g| / ((levels - 1) // 2),
    so zero is exact and an even level count leaves its top code unused.
    """
    g = np.asarray(g, dtype=np.float64)
    g_max = float(np.max(np.abs(g)))
    if g_max == 0.0:
        return np.zeros_like(g)
    step = g_max / ((levels - 1) // 2)
    return np.round(g / step) * step


def map_to_conductances(k: np.ndarray, cfg: CrossbarConfig) -> np.ndarray:
    g = as_kernel3(k) * cfg.p_g
    if cfg.quantize:
        g = quantize_conductances(g, cfg.conductance_levels)
    return g


def _add_readout_noise(y_volts: np.ndarray, cfg: CrossbarConfig, rng: np.random.Generator) -> np.ndarray:
    """Average samples_per_pulse readings, each with uniform noise scaled to full scale"""
    full_scale = np.max(np.abs(y_volts), axis=(-2, -1), keepdims=True)
    amplitude = cfg.noise_level * full_scale

    total = np.zeros_like(y_volts)
    for _ in range(cfg.samples_per_pulse):
        total += y_volts + amplitude * rng.uniform(-1.0, 1.0, size=y_volts.shape)
    return total / cfg.samples_per_pulse


def crossbar_convolve(x: np.ndarray, k: np.ndarray, cfg: CrossbarConfig,
                      rng: Optional[np.random.Generator] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Valid 3x3 convolution as computed by the crossbar

    Args:
        x: Input grid(s), shape (..., rows, cols)
        k: 3x3 kernel
        cfg: Crossbar configuration
        rng: Noise generator (a fresh one seeded from cfg when None)

    Returns:
        (output volts, decoded output in algorithm units)
    """
    voltages = map_to_voltages(x, cfg)
    conductances = map_to_conductances(k, cfg)
    y_volts = -cfg.r_k1 * valid_convolve(voltages, conductances)

    if cfg.noise_level > 0:
        rng = rng if rng is not None else np.random.default_rng(cfg.rng_seed)
        y_volts = _add_readout_noise(y_volts, cfg, rng)

    return y_volts, y_volts / cfg.gain


class CrossbarSimulator:
    """Stateful crossbar backend holding the seeded noise generator"""

    def __init__(self, cfg: Optional[CrossbarConfig] = None):
        """
        Args:
            cfg: Crossbar configuration
        """
        self.cfg = cfg or CrossbarConfig()
        self.rng = np.random.default_rng(self.cfg.rng_seed)

    def convolve(self, grid: np.ndarray, kernel: np.ndarray) -> np.ndarray:
        """Decoded valid convolution, usable as a scanner convolver"""
        _, decoded = crossbar_convolve(grid, kernel, self.cfg, self.rng)
        return decoded

    def programmed_kernel(self, kernel: np.ndarray) -> np.ndarray:
        """Kernel actually realised by the programmed conductances"""
        return map_to_conductances(kernel, self.cfg) / self.cfg.p_g


def readout_error(cfg: CrossbarConfig, trials: int, kernel: Optional[np.ndarray] = None) -> ReadoutError:
    """
    Monte-Carlo error of decoded outputs on random 7x7 tiles

    Errors are relative to each tile's exact full-scale output.

    Args:
        cfg: Crossbar configuration (noise, sampling, quantization)
        trials: Number of random tiles, at least 100
        kernel: Kernel under test (B_x by default)

    Returns:
        ReadoutError with mean, max and standard deviation of the relative error
    """
    if trials < MIN_TRIALS:
        raise ValueError(f"readout_error needs at least {MIN_TRIALS} trials, got {trials}")

    kernel = build_kernel_set().b_x if kernel is None else as_kernel3(kernel)
    rng = np.random.default_rng(cfg.rng_seed)

    tiles = rng.uniform(0.0, 255.0, size=(trials,) + TILE_SHAPE)
    exact = valid_convolve(tiles, kernel)
    _, decoded = crossbar_convolve(tiles, kernel, cfg, rng)

    full_scale = np.max(np.abs(exact), axis=(-2, -1), keepdims=True)
    relative = (decoded - exact) / np.maximum(full_scale, np.finfo(np.float64).tiny)

    return ReadoutError(
        mean_rel_error=float(np.mean(np.abs(relative))),
        max_rel_error=float(np.max(np.abs(relative))),
        std_error=float(np.std(relative)),
        trials=trials,
    )


def noise_study(cfg: CrossbarConfig, noise_levels: Sequence[float],
                samples: Sequence[int], trials: int = 1000) -> List[Dict]:
    """
    Readout error across noise levels and sampling counts

    Args:
        cfg: Base configuration (noise_level and samples_per_pulse are overridden)
        noise_levels: Noise fractions to test
        samples: Sampling counts to test
        trials: Monte-Carlo trials per cell

    Returns:
        Rows with noise and error expressed in percent
    """
    rows = []
    for samples_per_pulse in samples:
        for noise in noise_levels:
            run_cfg = CrossbarConfig(**{**cfg.to_dict(), 'noise_level': noise,
                                        'samples_per_pulse': samples_per_pulse})
            result = readout_error(run_cfg, trials)
            rows.append({
                'noise_pct': 100.0 * noise,
                'samples': samples_per_pulse,
                'mean_error_pct': 100.0 * result.mean_rel_error,
                'max_error_pct': 100.0 * result.max_rel_error,
                'std_error_pct': 100.0 * result.std_error,
            })
            logger.debug(f"noise={noise} samples={samples_per_pulse}: "
                         f"mean {rows[-1]['mean_error_pct']:.4f}%")
    return rows

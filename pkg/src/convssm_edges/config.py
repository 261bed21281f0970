"""
Pipeline Configuration
Dataclass configuration tree with YAML/JSON loading and CLI overrides
"""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import yaml

from .accelerator.crossbar import CrossbarConfig
from .postprocess import NORMALIZE_MODES, HysteresisParams
from .saim import ScanConfig, SaimWeights, build_kernel_set, kernel_set_from_dict
from .wind_erosion import ErosionParams

logger = logging.getLogger(__name__)

FLIP_CHOICES = {
    'none': (),
    'h': ('horizontal',),
    'v': ('vertical',),
    'hv': ('horizontal', 'vertical'),
}


class ConfigError(ValueError):
    """Invalid configuration file or override"""
    pass


@dataclass
class PipelineConfig:
    """Everything a pipeline run depends on"""

    scan: ScanConfig = field(default_factory=ScanConfig)
    hysteresis: HysteresisParams = field(default_factory=HysteresisParams)
    normalize: str = 'max'
    erosion: ErosionParams = field(default_factory=ErosionParams)
    erosion_enabled: bool = True
    crossbar: CrossbarConfig = field(default_factory=CrossbarConfig)
    crossbar_enabled: bool = False
    out_dir: str = './edges_out'
    workers: int = 1

    def __post_init__(self):
        if self.normalize not in NORMALIZE_MODES:
            raise ConfigError(f"Unknown normalization mode: {self.normalize!r}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")

    def to_dict(self) -> Dict:
        return {
            'scan': self.scan.to_dict(),
            'hysteresis': self.hysteresis.to_dict(),
            'normalize': self.normalize,
            'erosion': {'enabled': self.erosion_enabled, **self.erosion.to_dict()},
            'crossbar': {'enabled': self.crossbar_enabled, **self.crossbar.to_dict()},
            'out_dir': self.out_dir,
            'workers': self.workers,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'PipelineConfig':
        """Build a config from a (possibly partial) dict mirroring to_dict()"""
        data = dict(data or {})
        allowed = {'scan', 'hysteresis', 'normalize', 'erosion', 'crossbar', 'out_dir', 'workers'}
        unknown = set(data) - allowed
        if unknown:
            raise ConfigError(f"Unknown config keys: {sorted(unknown)}")

        try:
            scan = _scan_from_dict(data.get('scan', {}))

            hysteresis_data = dict(data.get('hysteresis', {}))
            hysteresis = HysteresisParams(**hysteresis_data)

            erosion_data = dict(data.get('erosion', {}))
            erosion_enabled = bool(erosion_data.pop('enabled', True))
            erosion = ErosionParams(**erosion_data)

            crossbar_data = dict(data.get('crossbar', {}))
            crossbar_enabled = bool(crossbar_data.pop('enabled', False))
            crossbar = CrossbarConfig(**crossbar_data)

            return cls(
                scan=scan,
                hysteresis=hysteresis,
                normalize=data.get('normalize', 'max'),
                erosion=erosion,
                erosion_enabled=erosion_enabled,
                crossbar=crossbar,
                crossbar_enabled=crossbar_enabled,
                out_dir=str(data.get('out_dir', './edges_out')),
                workers=int(data.get('workers', 1)),
            )
        except ConfigError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid configuration: {e}") from e


def _scan_from_dict(data: Dict) -> ScanConfig:
    data = dict(data)
    allowed = {'weights', 'kernels', 'flips', 'border_policy', 'fusion', 'state_radius'}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"Unknown scan keys: {sorted(unknown)}")

    weights = SaimWeights(**data.get('weights', {}))
    kernels = kernel_set_from_dict(data.get('kernels', {})) if 'kernels' in data else build_kernel_set()
    return ScanConfig(
        weights=weights,
        kernels=kernels,
        flips=tuple(data.get('flips', ())),
        border_policy=data.get('border_policy', 'reflect'),
        fusion=data.get('fusion', 'max_magnitude'),
        state_radius=data.get('state_radius', 0.9),
    )


def load_config(path: Optional[str] = None) -> PipelineConfig:
    """
    Load a pipeline config file

    Args:
        path: YAML or JSON file; None returns the defaults

    Returns:
        PipelineConfig
    """
    if path is None:
        return PipelineConfig()

    config_path = Path(path)
    if not config_path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")

    try:
        with open(config_path) as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"Could not parse {path}: {e}") from e

    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must contain a mapping")

    logger.debug(f"Loaded config from {path}")
    return PipelineConfig.from_dict(data)


def parse_float_list(text: str, expected: Optional[int] = None, name: str = 'value') -> Sequence[float]:
    try:
        values = [float(v) for v in text.split(',') if v.strip()]
    except ValueError as e:
        raise ConfigError(f"Could not parse {name} list {text!r}: {e}") from e
    if expected is not None and len(values) != expected:
        raise ConfigError(f"Expected {expected} comma-separated {name}s, got {text!r}")
    return values


def parse_weights(text: str) -> SaimWeights:
    a, b, c, d = parse_float_list(text, 4, 'weight')
    try:
        return SaimWeights(a=a, b=b, c=c, d=d)
    except ValueError as e:
        raise ConfigError(str(e)) from e


def parse_erosion_params(text: str) -> ErosionParams:
    """'long_ratio,min_length,max_cuts,cut_ratio,boundary_band'"""
    long_ratio, min_length, max_cuts, cut_ratio, band = parse_float_list(text, 5, 'erosion parameter')
    try:
        return ErosionParams(
            long_ratio=long_ratio,
            min_length=int(min_length),
            max_cuts=int(max_cuts),
            cut_ratio=cut_ratio,
            boundary_band=int(band),
        )
    except ValueError as e:
        raise ConfigError(str(e)) from e


def apply_overrides(config: PipelineConfig, overrides: Dict[str, Any]) -> PipelineConfig:
    """
    Return a copy of config with CLI values applied

    Keys left as None are ignored. Recognised keys: high, low, weights,
    flips, erosion, erosion_params, crossbar, noise, samples, seed,
    normalize, out_dir, workers.
    """
    values = {k: v for k, v in overrides.items() if v is not None}

    try:
        scan = config.scan
        if 'weights' in values:
            scan = replace(scan, weights=parse_weights(values['weights']))
        if 'flips' in values:
            if values['flips'] not in FLIP_CHOICES:
                raise ConfigError(f"Unknown flips {values['flips']!r} (expected one of {sorted(FLIP_CHOICES)})")
            scan = replace(scan, flips=FLIP_CHOICES[values['flips']])

        hysteresis = config.hysteresis
        if 'high' in values or 'low' in values:
            high = float(values.get('high', hysteresis.high))
            low = values.get('low')
            hysteresis = HysteresisParams.coupled(high) if low is None else HysteresisParams(high, float(low))

        erosion = config.erosion
        if 'erosion_params' in values:
            erosion = parse_erosion_params(values['erosion_params'])

        crossbar = config.crossbar
        crossbar_updates = {}
        if 'noise' in values:
            crossbar_updates['noise_level'] = float(values['noise'])
        if 'samples' in values:
            crossbar_updates['samples_per_pulse'] = int(values['samples'])
        if 'seed' in values:
            crossbar_updates['rng_seed'] = int(values['seed'])
        if crossbar_updates:
            crossbar = replace(crossbar, **crossbar_updates)

        return replace(
            config,
            scan=scan,
            hysteresis=hysteresis,
            erosion=erosion,
            erosion_enabled=_switch(values['erosion']) if 'erosion' in values else config.erosion_enabled,
            crossbar=crossbar,
            crossbar_enabled=_switch(values['crossbar']) if 'crossbar' in values else config.crossbar_enabled,
            normalize=values.get('normalize', config.normalize),
            out_dir=str(values.get('out_dir', config.out_dir)),
            workers=int(values.get('workers', config.workers)),
        )
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(str(e)) from e


def _switch(value) -> bool:
    if isinstance(value, bool):
        return value
    if value in ('on', 'true', 'yes', '1'):
        return True
    if value in ('off', 'false', 'no', '0'):
        return False
    raise ConfigError(f"Expected on/off, got {value!r}")

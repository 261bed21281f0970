"""
Memristor-crossbar accelerator models
"""

from .crossbar import (
    CrossbarConfig,
    CrossbarSimulator,
    ReadoutError,
    crossbar_convolve,
    map_to_conductances,
    map_to_voltages,
    noise_study,
    readout_error,
)
from .throughput import ThroughputModel, estimate_throughput, hardware_summary

__all__ = [
    'CrossbarConfig',
    'CrossbarSimulator',
    'ReadoutError',
    'crossbar_convolve',
    'map_to_conductances',
    'map_to_voltages',
    'noise_study',
    'readout_error',
    'ThroughputModel',
    'estimate_throughput',
    'hardware_summary',
]

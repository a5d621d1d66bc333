"""Simulation of on-chip training with memristive devices.

Device models (PCM, RRAM, perovskite), differential crossbars, LIF networks
trained with e-prop and memristor-aware weight-update schemes, drift-based
eligibility traces, Mosaic routing analytics and the benchmark tasks.
"""
from .crossbar import CrossbarArray, Telemetry
from .device import ConfigurationError, PcmModelParams, PerfModeParams
from .updates import PrecisionAccumulator, SchemeConfig, apply_update

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError", "CrossbarArray", "PcmModelParams", "PerfModeParams", "PrecisionAccumulator",
    "SchemeConfig", "Telemetry", "apply_update", "__version__",
]

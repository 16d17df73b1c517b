"""Electro-thermal simulator and fitting toolkit for VO2 spiking oscillators."""

from .device import DeviceParams, DeviceState, paper_fit_device
from .hysteresis import (
    BUILTIN_PARAMS,
    PAPER_FIT_2023,
    BranchState,
    HysteresisParams,
    insulating_fraction,
    proximity_weight,
    resistance,
    reversal_update,
)
from .network import NetworkConfig, network_derivatives, single_device_network, validate_coupling
from .solver import (
    Mode,
    NoiseSpec,
    OperatingMode,
    SpikeEvent,
    SpikeTrain,
    Trace,
    classify_mode,
    detect_spikes,
    integrate,
    spike_energy,
)
from .sources import DC, Pulse, PulseTrain, Waveform, sample

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_PARAMS",
    "PAPER_FIT_2023",
    "BranchState",
    "DC",
    "DeviceParams",
    "DeviceState",
    "HysteresisParams",
    "Mode",
    "NetworkConfig",
    "NoiseSpec",
    "OperatingMode",
    "Pulse",
    "PulseTrain",
    "SpikeEvent",
    "SpikeTrain",
    "Trace",
    "Waveform",
    "classify_mode",
    "detect_spikes",
    "insulating_fraction",
    "integrate",
    "network_derivatives",
    "paper_fit_device",
    "proximity_weight",
    "resistance",
    "reversal_update",
    "sample",
    "single_device_network",
    "spike_energy",
    "validate_coupling",
]

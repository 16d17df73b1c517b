"""Single-oscillator electro-thermal state equations.

The device is a temperature-dependent resistor in parallel with a parasitic
capacitance, fed through a series load resistor; heat balance is lumped with
a single thermal conductance to the environment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .hysteresis import PAPER_FIT_2023, BranchState, HysteresisParams, resistance

__all__ = ["DeviceParams", "DeviceState", "paper_fit_device", "device_derivatives", "observable_currents"]


@dataclass(frozen=True)
class DeviceParams:
    """Circuit and thermal constants of one oscillator.

    c      : parasitic capacitance (farad)
    k      : metallic-channel resistance factor, >= 1 (dimensionless)
    s_th   : thermal conductance to the environment (watt/kelvin)
    c_th   : thermal capacitance (joule/kelvin)
    r_load : series load resistance (ohm); 0 selects the degenerate
             zero-load mode where the device voltage is pinned to the input
    hparams: resistance-temperature loop constants
    """

    c: float
    k: float
    s_th: float
    c_th: float
    r_load: float
    hparams: HysteresisParams = field(default=PAPER_FIT_2023)

    def __post_init__(self) -> None:
        for name in ("c", "s_th", "c_th"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"{name} must be finite and positive, got {value!r}")
        if self.k < 1.0:
            raise ValueError("k must be >= 1")
        if self.r_load < 0.0:
            raise ValueError("r_load must be >= 0")


@dataclass(frozen=True)
class DeviceState:
    """Dynamic state: device voltage, temperature, and branch memory."""

    v1: float
    t: float
    branch: BranchState

    def __post_init__(self) -> None:
        if not (self.t > 0.0 and math.isfinite(self.t)):
            raise ValueError(f"temperature must be finite and positive, got {self.t!r}")


def paper_fit_device(r_load: float = 12e3, hparams: HysteresisParams = PAPER_FIT_2023) -> DeviceParams:
    """Constants fitted to the measured spike features of the reference device."""
    return DeviceParams(c=145e-12, k=4.90, s_th=0.206e-3, c_th=49.6e-12, r_load=r_load, hparams=hparams)


def device_derivatives(
    state: DeviceState,
    v_in: float,
    t0: float,
    p: DeviceParams,
) -> tuple[float, float]:
    """Time derivatives (dv1/dt, dT/dt) of the coupled circuit-thermal system.

    With ``r_load == 0`` the device voltage is pinned to ``v_in`` (there is no
    series element to separate them): dv1/dt is reported as 0 and the Joule
    term uses ``v_in`` directly, leaving only the thermal equation dynamic.
    """
    r = resistance(state.t, state.branch, p.hparams, k=p.k, mode="dynamic")
    if p.r_load > 0.0:
        dv1 = v_in / (p.r_load * p.c) - state.v1 * (1.0 / (r * p.c) + 1.0 / (p.r_load * p.c))
        joule = state.v1 * state.v1 / (r * p.c_th)
    else:
        dv1 = 0.0
        joule = v_in * v_in / (r * p.c_th)
    dtt = joule - p.s_th * (state.t - t0) / p.c_th
    return dv1, dtt


def observable_currents(state: DeviceState, v_in: float, p: DeviceParams) -> tuple[float, float]:
    """Currents (through the device, through the load) in ampere.

    With ``r_load == 0`` the load current is not separately defined; the
    device current is reported for both.
    """
    r = resistance(state.t, state.branch, p.hparams, k=p.k, mode="dynamic")
    i_device = state.v1 / r
    if p.r_load > 0.0:
        i_load = (v_in - state.v1) / p.r_load
    else:
        i_load = i_device
    return i_device, i_load

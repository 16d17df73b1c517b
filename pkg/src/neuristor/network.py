"""Thermal coupling of N oscillators through the substrate.

Each device keeps its own electrical equation; temperatures exchange heat
through a symmetric coupling-strength matrix eta.  Row i of eta diverts the
fraction sum_j eta[i][j] of device i's thermal conductance from the
environment to its neighbours, so the per-device conductance budget is fixed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .device import DeviceParams, DeviceState, device_derivatives
from .hysteresis import resistance

__all__ = ["NetworkConfig", "validate_coupling", "network_derivatives", "single_device_network"]


@dataclass(frozen=True)
class NetworkConfig:
    """Devices, symmetric coupling matrix, and shared ambient temperature."""

    devices: tuple[DeviceParams, ...]
    eta: np.ndarray
    t0: float = 325.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "devices", tuple(self.devices))
        object.__setattr__(self, "eta", np.asarray(self.eta, dtype=float))
        report = validate_coupling(self)
        if report:
            raise ValueError("invalid network config: " + "; ".join(report))

    @property
    def n_devices(self) -> int:
        return len(self.devices)

    def env_conductances(self) -> np.ndarray:
        """Per-device conductance to the environment after coupling diversion."""
        s_th = np.array([d.s_th for d in self.devices])
        return (1.0 - self.eta.sum(axis=1)) * s_th


def validate_coupling(cfg: NetworkConfig) -> list[str]:
    """Return one message per violated invariant; empty iff the config is valid."""
    report: list[str] = []
    n = len(cfg.devices)
    if n == 0:
        report.append("device list is empty")
    if not (math.isfinite(cfg.t0) and cfg.t0 > 0.0):
        report.append(f"t0 must be finite and positive, got {cfg.t0!r}")
    eta = np.asarray(cfg.eta, dtype=float)
    if eta.shape != (n, n):
        report.append(f"eta must be {n}x{n}, got shape {eta.shape}")
        return report
    if not np.all(np.isfinite(eta)):
        report.append("eta contains non-finite entries")
        return report
    for i in range(n):
        if eta[i, i] != 0.0:
            report.append(f"eta[{i}][{i}] must be 0, got {eta[i, i]!r}")
        for j in range(i + 1, n):
            if eta[i, j] != eta[j, i]:
                report.append(f"eta[{i}][{j}] != eta[{j}][{i}] ({eta[i, j]!r} vs {eta[j, i]!r})")
    if np.any(eta < 0.0) or np.any(eta >= 1.0):
        bad = np.argwhere((eta < 0.0) | (eta >= 1.0))
        for i, j in bad:
            report.append(f"eta[{i}][{j}] = {eta[i, j]!r} outside [0, 1)")
    row_sums = eta.sum(axis=1)
    for i in range(n):
        if row_sums[i] >= 1.0:
            report.append(f"row {i} coupling sum {row_sums[i]!r} >= 1 (environment conductance would vanish)")
    return report


def single_device_network(device: DeviceParams, t0: float = 325.0) -> NetworkConfig:
    return NetworkConfig(devices=(device,), eta=np.zeros((1, 1)), t0=t0)


def network_derivatives(
    states: Sequence[DeviceState],
    v_ins: Sequence[float],
    cfg: NetworkConfig,
) -> list[tuple[float, float]]:
    """Per-device (dv1/dt, dT/dt) including substrate heat exchange.

    The voltage equations are the uncoupled single-device ones; each thermal
    equation swaps the environment conductance for its coupling-reduced value
    and adds pairwise exchange terms eta[i][j] * s_th_i * (T_i - T_j) / c_th_i.
    """
    n = cfg.n_devices
    if len(states) != n or len(v_ins) != n:
        raise ValueError(f"expected {n} states and inputs, got {len(states)} and {len(v_ins)}")
    s_env = cfg.env_conductances()
    out: list[tuple[float, float]] = []
    for i, (state, v_in, p) in enumerate(zip(states, v_ins, cfg.devices)):
        dv1, dtt = device_derivatives(state, v_in, cfg.t0, p)
        # Replace the full-environment leak with the reduced one.
        dtt += (p.s_th - s_env[i]) * (state.t - cfg.t0) / p.c_th
        for j in range(n):
            if cfg.eta[i, j] != 0.0:
                dtt -= cfg.eta[i, j] * p.s_th * (state.t - states[j].t) / p.c_th
        out.append((dv1, dtt))
    return out


def dynamic_resistance(state: DeviceState, p: DeviceParams) -> float:
    """Device resistance at the state's temperature and branch (ohm)."""
    return resistance(state.t, state.branch, p.hparams, k=p.k, mode="dynamic")

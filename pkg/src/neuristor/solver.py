"""Time integration, spike extraction, mode classification, energy accounting.

Integration is classical fixed-step 4th-order Runge-Kutta over the continuous
variables (device voltages, temperatures).  The hysteresis branch memory is a
discrete hybrid state: frozen inside integrator stages, advanced once per
completed step.  Optional per-step Gaussian perturbation of each temperature
derivative provides a seeded, reproducible stochastic extension.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from . import _kernel
from .device import DeviceState
from .hysteresis import DEFAULT_REVERSAL_EPS, BranchState, ReversalForm
from .network import NetworkConfig, validate_coupling
from .sources import Waveform, encode

__all__ = [
    "DEFAULT_DT",
    "NoiseSpec",
    "Trace",
    "SpikeEvent",
    "SpikeTrain",
    "Mode",
    "OperatingMode",
    "NonFiniteStateError",
    "integrate",
    "detect_spikes",
    "classify_mode",
    "spike_energy",
]

# ~340 steps per fast time constant of the reference device constants.
DEFAULT_DT = 0.5e-9

# Sustained device current above this marks a metallic plateau (ampere).
DEFAULT_PLATEAU_FLOOR = 0.2e-3


class NonFiniteStateError(RuntimeError):
    """Integration produced a non-finite (or non-physical) state."""

    def __init__(self, step: int, time: float):
        super().__init__(f"non-finite state at step {step} (t = {time:.6g} s)")
        self.step = step
        self.time = time


@dataclass(frozen=True)
class NoiseSpec:
    """Additive Gaussian perturbation of each dT/dt, std in kelvin/second."""

    temp_rate_std: float

    def __post_init__(self) -> None:
        if self.temp_rate_std < 0.0:
            raise ValueError("temp_rate_std must be >= 0")


@dataclass(frozen=True)
class Trace:
    """Sampled trajectory of an N-device simulation.

    Channel arrays have shape (n_samples, N): input voltage, device voltage,
    temperature, resistance, device current, load current.
    """

    dt: float
    t_start: float
    v_in: np.ndarray
    v1: np.ndarray
    temperature: np.ndarray
    resistance: np.ndarray
    i_device: np.ndarray
    i_load: np.ndarray

    def __post_init__(self) -> None:
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        shape = self.v1.shape
        for name in ("v_in", "temperature", "resistance", "i_device", "i_load"):
            if getattr(self, name).shape != shape:
                raise ValueError("all channels must share one shape")

    @property
    def n_samples(self) -> int:
        return self.v1.shape[0]

    @property
    def n_devices(self) -> int:
        return self.v1.shape[1]

    @property
    def time(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_samples)

    @property
    def duration(self) -> float:
        return self.dt * (self.n_samples - 1)

    def save_csv(self, path) -> None:
        header = ["time_s"]
        for i in range(self.n_devices):
            header += [
                f"dev{i}_vin_V",
                f"dev{i}_v1_V",
                f"dev{i}_T_K",
                f"dev{i}_R_ohm",
                f"dev{i}_Idev_A",
                f"dev{i}_Iload_A",
            ]
        time = self.time
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in range(self.n_samples):
                record = [repr(time[row])]
                for i in range(self.n_devices):
                    record += [
                        repr(self.v_in[row, i]),
                        repr(self.v1[row, i]),
                        repr(self.temperature[row, i]),
                        repr(self.resistance[row, i]),
                        repr(self.i_device[row, i]),
                        repr(self.i_load[row, i]),
                    ]
                writer.writerow(record)

    @classmethod
    def load_csv(cls, path) -> "Trace":
        data = np.genfromtxt(path, delimiter=",", names=True)
        names = data.dtype.names
        if names is None or names[0] != "time_s":
            raise ValueError(f"{path}: not a trace CSV (missing time_s column)")
        n_dev = sum(1 for name in names if re.fullmatch(r"dev\d+_v1_V", name))
        if n_dev == 0 or len(names) != 1 + 6 * n_dev:
            raise ValueError(f"{path}: unexpected trace columns {names}")
        time = np.atleast_1d(data["time_s"])
        if time.size < 2:
            raise ValueError(f"{path}: trace needs at least two samples")
        stack = lambda fmt: np.column_stack(
            [np.atleast_1d(data[fmt.format(i)]) for i in range(n_dev)]
        )
        return cls(
            dt=float(time[1] - time[0]),
            t_start=float(time[0]),
            v_in=stack("dev{}_vin_V"),
            v1=stack("dev{}_v1_V"),
            temperature=stack("dev{}_T_K"),
            resistance=stack("dev{}_R_ohm"),
            i_device=stack("dev{}_Idev_A"),
            i_load=stack("dev{}_Iload_A"),
        )


@dataclass(frozen=True)
class SpikeEvent:
    peak_time: float
    amplitude: float
    width_fwhm: float


@dataclass(frozen=True)
class SpikeTrain:
    """Spike events extracted from one current channel."""

    events: tuple[SpikeEvent, ...]
    channel: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "events", tuple(self.events))
        times = [e.peak_time for e in self.events]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("peak times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.events)

    @property
    def peak_times(self) -> np.ndarray:
        return np.array([e.peak_time for e in self.events])

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([e.amplitude for e in self.events])

    def after(self, t: float) -> "SpikeTrain":
        return SpikeTrain(tuple(e for e in self.events if e.peak_time >= t), self.channel)

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["peak_time_s", "amplitude_A", "width_s"])
            for e in self.events:
                writer.writerow([repr(e.peak_time), repr(e.amplitude), repr(e.width_fwhm)])

    @classmethod
    def load_csv(cls, path, channel: str = "") -> "SpikeTrain":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != ["peak_time_s", "amplitude_A", "width_s"]:
                raise ValueError(f"{path}: not a spike-train CSV")
            events = tuple(SpikeEvent(float(a), float(b), float(c)) for a, b, c in reader)
        return cls(events=events, channel=channel)


class Mode(Enum):
    QUIESCENT = "quiescent"
    SPIKING = "spiking"
    TRAPPED_METALLIC = "trapped_metallic"


@dataclass(frozen=True)
class OperatingMode:
    """Classification of a trace plus its summary statistics.

    ``confident`` is False for ambiguous traces (e.g. a single spike right at
    the end, or a sustained plateau that was never preceded by a detected
    spike) where the label is the nearest match rather than a clean call.
    """

    label: Mode
    spike_count: int
    mean_frequency: float
    final_current: float
    confident: bool = True


def integrate(
    cfg: NetworkConfig,
    sources: Sequence[Waveform],
    horizon: float,
    dt: float = DEFAULT_DT,
    *,
    noise: NoiseSpec | None = None,
    seed: int = 0,
    initial: Sequence[DeviceState] | None = None,
    record_stride: int = 1,
    reversal_eps: float = DEFAULT_REVERSAL_EPS,
    reversal_form: ReversalForm = "artanh",
) -> Trace:
    """Integrate the network ODEs and return the sampled trace.

    Deterministic for fixed inputs and seed: the noise stream is drawn up
    front from a seeded generator, so reruns are bit-identical.
    """
    report = validate_coupling(cfg)
    if report:
        raise ValueError("invalid network config: " + "; ".join(report))
    n = cfg.n_devices
    if len(sources) != n:
        raise ValueError(f"expected {n} sources, got {len(sources)}")
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    n_steps = int(round(horizon / dt))
    if n_steps < 1:
        raise ValueError("horizon must cover at least one step")
    if record_stride < 1 or n_steps % record_stride != 0:
        raise ValueError("record_stride must be >= 1 and divide the step count")

    if initial is None:
        initial = [DeviceState(v1=0.0, t=cfg.t0, branch=BranchState.major(cfg.t0)) for _ in range(n)]
    if len(initial) != n:
        raise ValueError(f"expected {n} initial states, got {len(initial)}")

    v1 = np.array([s.v1 for s in initial])
    temp = np.array([s.t for s in initial])
    delta = np.array([s.branch.delta for s in initial])
    t_r = np.array([s.branch.t_r for s in initial])
    t_pr = np.array([s.branch.t_pr for s in initial])
    t_last = np.array([s.branch.t_last for s in initial])
    dev = np.empty((n, 12))
    for i, p in enumerate(cfg.devices):
        dev[i] = (p.c, p.k, p.s_th, p.c_th, p.r_load, p.hparams.r0, p.hparams.rm,
                  p.hparams.ea, p.hparams.beta, p.hparams.w, p.hparams.tc, p.hparams.gamma)
    wf = np.vstack([encode(w) for w in sources])
    s_env = cfg.env_conductances()

    noise_std = 0.0 if noise is None else noise.temp_rate_std
    if noise_std > 0.0:
        draws = np.random.default_rng(seed).standard_normal((n_steps, n))
    else:
        draws = np.zeros((0, n))

    n_rec = n_steps // record_stride + 1
    out = np.empty((n_rec, 6, n))
    status = _kernel.run_rk4(
        n_steps, dt, 0.0,
        v1, temp, delta, t_r, t_pr, t_last,
        dev, np.ascontiguousarray(cfg.eta), s_env, cfg.t0, wf,
        reversal_eps, reversal_form == "artanh",
        noise_std, draws, record_stride, out,
    )
    if status >= 0:
        raise NonFiniteStateError(step=status, time=status * dt)
    return Trace(
        dt=dt * record_stride,
        t_start=0.0,
        v_in=out[:, 0, :].copy(),
        v1=out[:, 1, :].copy(),
        temperature=out[:, 2, :].copy(),
        resistance=out[:, 3, :].copy(),
        i_device=out[:, 4, :].copy(),
        i_load=out[:, 5, :].copy(),
    )


def _half_crossing(time: np.ndarray, values: np.ndarray, peak_idx: int, half: float, step: int) -> float:
    """Interpolated time where the signal crosses ``half`` walking from the peak."""
    i = peak_idx
    limit = values.shape[0] - 1 if step > 0 else 0
    while i != limit and values[i + step] > half:
        i += step
    if i == limit:
        return time[i]
    a, b = (i, i + step) if step > 0 else (i + step, i)
    frac = (values[a] - half) / (values[a] - values[b])
    return time[a] + frac * (time[b] - time[a])


def detect_spikes(time: np.ndarray, current: np.ndarray, hi: float, lo: float, channel: str = "") -> SpikeTrain:
    """Schmitt-trigger event detection on a sampled current channel.

    An event opens on an upward crossing of ``hi`` and closes on a downward
    crossing of ``lo``; an event still open at the end of the record is
    discarded (its peak and width are not yet defined).  Per closed event the
    peak time, peak amplitude and the full width at half the peak amplitude
    (linear interpolation) are reported.
    """
    if not hi > lo > 0.0:
        raise ValueError("need hi > lo > 0")
    time = np.asarray(time, dtype=float)
    current = np.asarray(current, dtype=float)
    if time.shape != current.shape or time.ndim != 1:
        raise ValueError("time and current must be matching 1-D arrays")
    events: list[SpikeEvent] = []
    open_at: int | None = None
    peak_idx = 0
    for i, value in enumerate(current):
        if open_at is None:
            if value >= hi:
                open_at = i
                peak_idx = i
        else:
            if value > current[peak_idx]:
                peak_idx = i
            if value < lo:
                half = 0.5 * current[peak_idx]
                left = _half_crossing(time, current, peak_idx, half, -1)
                right = _half_crossing(time, current, peak_idx, half, +1)
                events.append(
                    SpikeEvent(
                        peak_time=float(time[peak_idx]),
                        amplitude=float(current[peak_idx]),
                        width_fwhm=float(right - left),
                    )
                )
                open_at = None
    return SpikeTrain(events=tuple(events), channel=channel)


def classify_mode(
    trace: Trace,
    train: SpikeTrain,
    settle: float | None = None,
    *,
    device: int = 0,
    plateau_floor: float = DEFAULT_PLATEAU_FLOOR,
    tail_fraction: float = 0.2,
) -> OperatingMode:
    """Label a trace as quiescent, spiking, or trapped in the metallic state.

    Spiking requires events persisting into the final ``tail_fraction`` of the
    record; a trace whose events die out is trapped when the device current
    settles above ``plateau_floor`` (metallic filament) and quiescent when it
    settles below.  Combinations outside the three clean patterns are given
    the nearest label with ``confident=False``.
    """
    end_time = trace.t_start + trace.duration
    if settle is None:
        settle = max(2e-6, 0.1 * trace.duration)
    if settle >= trace.duration:
        raise ValueError("settle must be shorter than the trace")
    events_after = [e for e in train.events if e.peak_time >= trace.t_start + settle]
    tail_start = end_time - tail_fraction * trace.duration
    tail_events = [e for e in events_after if e.peak_time >= tail_start]

    n_tail_samples = max(2, int(round(0.02 * trace.n_samples)))
    final_current = float(np.mean(np.abs(trace.i_device[-n_tail_samples:, device])))
    window = trace.duration - settle
    count = len(events_after)
    frequency = count / window if window > 0 else 0.0

    if tail_events:
        confident = count >= 2
        return OperatingMode(Mode.SPIKING, count, frequency, final_current, confident)
    if count == 0:
        if final_current <= plateau_floor:
            return OperatingMode(Mode.QUIESCENT, count, frequency, final_current, True)
        # Plateau without any detected spike (e.g. direct-current switch-on).
        return OperatingMode(Mode.TRAPPED_METALLIC, count, frequency, final_current, False)
    if final_current > plateau_floor:
        return OperatingMode(Mode.TRAPPED_METALLIC, count, frequency, final_current, True)
    # Transient burst that died out with the device back in the insulating state.
    return OperatingMode(Mode.QUIESCENT, count, frequency, final_current, False)


def spike_energy(trace: Trace, window: tuple[float, float], device: int = 0) -> float:
    """Energy dissipated in the device over ``window`` (joule).

    Trapezoidal integral of v1 * i_device between the window bounds.
    """
    a, b = window
    time = trace.time
    if a < time[0] - 1e-15 or b > time[-1] + 1e-15 or b < a:
        raise ValueError("window must lie within the trace")
    mask = (time >= a) & (time <= b)
    if mask.sum() < 2:
        return 0.0
    power = trace.v1[mask, device] * trace.i_device[mask, device]
    return float(np.trapezoid(power, time[mask]))

"""Scenario drivers and sweep analytics over the simulator.

Rate-coding curves, pairwise synchronization statistics, coupling and drive
sweeps, cascaded two-stage runs, and the stochastic integrate-and-fire
histogram.  Sweep points are independent; assembly is order-deterministic.
"""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .device import DeviceParams
from .network import NetworkConfig, single_device_network
from .solver import (
    DEFAULT_DT,
    Mode,
    NoiseSpec,
    OperatingMode,
    SpikeTrain,
    Trace,
    classify_mode,
    detect_spikes,
    integrate,
)
from .sources import DC, PulseTrain, Waveform

__all__ = [
    "DEFAULT_SPIKE_HI",
    "DEFAULT_SPIKE_LO",
    "RatePoint",
    "RateCodingCurve",
    "SyncReport",
    "CouplingPoint",
    "DrivePoint",
    "CascadeResult",
    "spike_train",
    "rate_coding_sweep",
    "sync_ratio",
    "coupling_sweep",
    "drive_response_map",
    "cascade_scenario",
    "stochastic_lif_histogram",
    "pair_network",
    "save_rate_curve",
    "save_points_csv",
]

# Schmitt-trigger defaults for the reference device constants: spikes peak at
# several mA, the recharge baseline stays below ~0.3 mA, and the trapped
# plateau sits near 1 mA, so the release level must stay above the
# post-transition settle minimum (~0.5 mA) for the last event to close.
DEFAULT_SPIKE_HI = 2.0e-3
DEFAULT_SPIKE_LO = 0.6e-3


def spike_train(
    trace: Trace,
    device: int = 0,
    hi: float = DEFAULT_SPIKE_HI,
    lo: float = DEFAULT_SPIKE_LO,
) -> SpikeTrain:
    """Detect spikes on one device's current channel of a trace."""
    return detect_spikes(trace.time, trace.i_device[:, device], hi, lo, channel=f"dev{device}_Idev_A")


@dataclass(frozen=True)
class RatePoint:
    v_in: float
    frequency: float
    mode: OperatingMode


@dataclass(frozen=True)
class RateCodingCurve:
    """Spiking frequency versus drive voltage, with refined regime boundaries.

    ``threshold_low`` is the quiescent-to-spiking onset, ``cutoff_high`` the
    spiking-to-trapped upper edge; both are bisection-refined midpoints and
    None when the corresponding transition is absent from the sweep range.
    """

    points: tuple[RatePoint, ...]
    threshold_low: float | None
    cutoff_high: float | None

    def modes(self) -> list[Mode]:
        return [p.mode.label for p in self.points]


def _classify_at(
    device: DeviceParams,
    t0: float,
    v: float,
    horizon: float,
    dt: float,
    settle: float | None,
    hi: float,
    lo: float,
) -> RatePoint:
    cfg = single_device_network(device, t0=t0)
    trace = integrate(cfg, [DC(v)], horizon=horizon, dt=dt)
    train = spike_train(trace, 0, hi, lo)
    mode = classify_mode(trace, train, settle)
    return RatePoint(v_in=v, frequency=mode.mean_frequency, mode=mode)


def _bisect_boundary(
    probe: Callable[[float], Mode],
    lo_v: float,
    hi_v: float,
    upper_side: Callable[[Mode], bool],
    tol_v: float,
) -> float:
    while hi_v - lo_v > 2.0 * tol_v:
        mid = 0.5 * (lo_v + hi_v)
        if upper_side(probe(mid)):
            hi_v = mid
        else:
            lo_v = mid
    return 0.5 * (lo_v + hi_v)


def rate_coding_sweep(
    device: DeviceParams,
    t0: float,
    v_range: tuple[float, float],
    step: float,
    *,
    horizon: float = 40e-6,
    dt: float = DEFAULT_DT,
    settle: float | None = None,
    hi: float = DEFAULT_SPIKE_HI,
    lo: float = DEFAULT_SPIKE_LO,
    refine_tol: float = 0.05,
    threads: int = 1,
) -> RateCodingCurve:
    """Sweep the drive voltage, classify each point, refine the mode boundaries.

    Frequency is the post-settle spike count over the counting window.  The
    regime boundaries adjacent to the spiking interval are bisected to
    +-``refine_tol`` volt.
    """
    v_lo, v_hi = v_range
    if not (v_hi > v_lo and step > 0.0):
        raise ValueError("need v_range[1] > v_range[0] and step > 0")
    n = int(math.floor((v_hi - v_lo) / step + 1e-9)) + 1
    volts = [v_lo + i * step for i in range(n)]

    def job(v: float) -> RatePoint:
        return _classify_at(device, t0, v, horizon, dt, settle, hi, lo)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            points = list(pool.map(job, volts))
    else:
        points = [job(v) for v in volts]

    labels = [p.mode.label for p in points]
    probe = lambda v: job(v).mode.label

    threshold_low = None
    for i in range(1, n):
        if labels[i - 1] == Mode.QUIESCENT and labels[i] != Mode.QUIESCENT:
            threshold_low = _bisect_boundary(
                probe, volts[i - 1], volts[i], lambda m: m != Mode.QUIESCENT, refine_tol
            )
            break
    cutoff_high = None
    for i in range(1, n):
        if labels[i - 1] == Mode.SPIKING and labels[i] == Mode.TRAPPED_METALLIC:
            cutoff_high = _bisect_boundary(
                probe, volts[i - 1], volts[i], lambda m: m == Mode.TRAPPED_METALLIC, refine_tol
            )
            break
    return RateCodingCurve(points=tuple(points), threshold_low=threshold_low, cutoff_high=cutoff_high)


@dataclass(frozen=True)
class SyncReport:
    """Synchronization statistics between two spike trains.

    ``ratio`` is the small-integer spike-count ratio (a:b) when one matches
    within 5%, otherwise the reduced raw counts with ``mixed=True``.
    ``lock_fraction`` is the share of b-spikes whose lag to the nearest
    preceding a-spike stays within 10% of a's mean period of the median lag.
    """

    ratio: tuple[int, int]
    lock_fraction: float
    mean_lag: float
    mixed: bool = False
    valid: bool = True


def _match_small_ratio(n_a: int, n_b: int, max_term: int = 5, tol: float = 0.05) -> tuple[int, int] | None:
    if n_a == 0 or n_b == 0:
        return None
    target = n_a / n_b
    best: tuple[int, int] | None = None
    best_err = tol
    for p in range(1, max_term + 1):
        for q in range(1, max_term + 1):
            if math.gcd(p, q) != 1:
                continue
            err = abs(target - p / q) / (p / q)
            if err <= best_err:
                best_err = err
                best = (p, q)
    return best


def sync_ratio(a: SpikeTrain, b: SpikeTrain, window: float) -> SyncReport:
    """Spike-count ratio and phase statistics over the trailing ``window``.

    The window ends at the latest spike seen on either train.  An empty train
    inside the window yields a zero ratio component and an invalid report.
    """
    if len(a) == 0 or len(b) == 0:
        return SyncReport(ratio=(len(a), len(b)), lock_fraction=0.0, mean_lag=math.nan, mixed=False, valid=False)
    t_end = max(a.events[-1].peak_time, b.events[-1].peak_time)
    t_begin = t_end - window
    a_times = a.peak_times[a.peak_times >= t_begin]
    b_times = b.peak_times[b.peak_times >= t_begin]
    n_a, n_b = len(a_times), len(b_times)
    if n_a == 0 or n_b == 0:
        return SyncReport(ratio=(n_a, n_b), lock_fraction=0.0, mean_lag=math.nan, mixed=False, valid=False)

    matched = _match_small_ratio(n_a, n_b)
    if matched is not None:
        ratio, mixed = matched, False
    else:
        frac = Fraction(n_a, n_b)
        ratio, mixed = (frac.numerator, frac.denominator), True

    lags = []
    for t_b in b_times:
        preceding = a_times[a_times <= t_b]
        if preceding.size:
            lags.append(t_b - preceding[-1])
    if not lags:
        return SyncReport(ratio=ratio, lock_fraction=0.0, mean_lag=math.nan, mixed=mixed, valid=False)
    lags_arr = np.array(lags)
    period_a = float(np.mean(np.diff(a_times))) if n_a >= 2 else window
    spread_ok = np.abs(lags_arr - np.median(lags_arr)) <= 0.1 * period_a
    return SyncReport(
        ratio=ratio,
        lock_fraction=float(np.mean(spread_ok)),
        mean_lag=float(np.mean(lags_arr)),
        mixed=mixed,
        valid=True,
    )


def pair_network(dev_a: DeviceParams, dev_b: DeviceParams, eta: float, t0: float = 325.0) -> NetworkConfig:
    """Two devices coupled symmetrically with strength ``eta``."""
    return NetworkConfig(devices=(dev_a, dev_b), eta=np.array([[0.0, eta], [eta, 0.0]]), t0=t0)


@dataclass(frozen=True)
class CouplingPoint:
    eta: float
    mode_a: OperatingMode
    mode_b: OperatingMode
    sync: SyncReport


def coupling_sweep(
    dev_a: DeviceParams,
    dev_b: DeviceParams,
    v_a: float,
    v_b: float,
    etas: Sequence[float],
    *,
    t0: float = 325.0,
    horizon: float = 60e-6,
    dt: float = DEFAULT_DT,
    settle: float | None = None,
    sync_window: float | None = None,
    hi: float = DEFAULT_SPIKE_HI,
    lo: float = DEFAULT_SPIKE_LO,
    threads: int = 1,
) -> list[CouplingPoint]:
    """One coupled simulation per coupling strength; reports modes and sync."""
    if sync_window is None:
        sync_window = 0.75 * horizon

    def job(eta: float) -> CouplingPoint:
        cfg = pair_network(dev_a, dev_b, eta, t0=t0)
        trace = integrate(cfg, [DC(v_a), DC(v_b)], horizon=horizon, dt=dt)
        train_a = spike_train(trace, 0, hi, lo)
        train_b = spike_train(trace, 1, hi, lo)
        return CouplingPoint(
            eta=eta,
            mode_a=classify_mode(trace, train_a, settle, device=0),
            mode_b=classify_mode(trace, train_b, settle, device=1),
            sync=sync_ratio(train_a, train_b, sync_window),
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(job, etas))
    return [job(eta) for eta in etas]


@dataclass(frozen=True)
class DrivePoint:
    v_a: float
    mode_a: OperatingMode
    mode_b: OperatingMode
    sync: SyncReport

    @property
    def regime_b(self) -> str:
        """Compact label of b's response: quiescent | trapped | n:m | mixed."""
        if self.mode_b.label is Mode.QUIESCENT:
            return "quiescent"
        if self.mode_b.label is Mode.TRAPPED_METALLIC:
            return "trapped"
        if not self.sync.valid or self.sync.mixed:
            return "mixed"
        return f"{self.sync.ratio[0]}:{self.sync.ratio[1]}"


def drive_response_map(
    dev_a: DeviceParams,
    dev_b: DeviceParams,
    v_b: float,
    v_a_range: tuple[float, float],
    step: float,
    eta: float,
    *,
    t0: float = 325.0,
    horizon: float = 60e-6,
    dt: float = DEFAULT_DT,
    settle: float | None = None,
    sync_window: float | None = None,
    hi: float = DEFAULT_SPIKE_HI,
    lo: float = DEFAULT_SPIKE_LO,
    threads: int = 1,
) -> list[DrivePoint]:
    """Classify b's response while sweeping a's drive voltage upward."""
    v_lo, v_hi = v_a_range
    if not (v_hi > v_lo and step > 0.0):
        raise ValueError("need v_a_range[1] > v_a_range[0] and step > 0")
    if sync_window is None:
        sync_window = 0.75 * horizon
    n = int(math.floor((v_hi - v_lo) / step + 1e-9)) + 1
    volts = [v_lo + i * step for i in range(n)]

    def job(v_a: float) -> DrivePoint:
        cfg = pair_network(dev_a, dev_b, eta, t0=t0)
        trace = integrate(cfg, [DC(v_a), DC(v_b)], horizon=horizon, dt=dt)
        train_a = spike_train(trace, 0, hi, lo)
        train_b = spike_train(trace, 1, hi, lo)
        return DrivePoint(
            v_a=v_a,
            mode_a=classify_mode(trace, train_a, settle, device=0),
            mode_b=classify_mode(trace, train_b, settle, device=1),
            sync=sync_ratio(train_a, train_b, sync_window),
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(job, volts))
    return [job(v) for v in volts]


@dataclass(frozen=True)
class CascadeResult:
    """Two-stage cascade run: pulse-driven first device, DC-biased second."""

    trace: Trace
    train_a: SpikeTrain
    train_b: SpikeTrain
    pulses_per_a_spike: tuple[int, ...]
    a_spikes_per_b_spike: tuple[int, ...]


def _counts_between(marks: np.ndarray, events: np.ndarray) -> tuple[int, ...]:
    """Number of ``marks`` in each half-open interval between consecutive events."""
    counts = []
    for prev, cur in zip(events[:-1], events[1:]):
        counts.append(int(np.sum((marks > prev) & (marks <= cur))))
    return tuple(counts)


def cascade_scenario(
    duty: float,
    amplitude: float,
    *,
    dev_a: DeviceParams,
    dev_b: DeviceParams,
    eta: float,
    v_b: float = 5.7,
    period: float = 1e-6,
    t0: float = 325.0,
    horizon: float = 60e-6,
    dt: float = DEFAULT_DT,
    hi: float = DEFAULT_SPIKE_HI,
    lo: float = DEFAULT_SPIKE_LO,
) -> CascadeResult:
    """Drive a with a pulse train and b with subthreshold DC; count transfer.

    Returns per-interval statistics: drive pulses integrated per a-spike and
    a-spikes integrated per b-spike.
    """
    if not 0.0 < duty < 1.0:
        raise ValueError("duty must be in (0, 1)")
    cfg = pair_network(dev_a, dev_b, eta, t0=t0)
    drive = PulseTrain(high=amplitude, low=0.0, period=period, duty=duty)
    trace = integrate(cfg, [drive, DC(v_b)], horizon=horizon, dt=dt)
    train_a = spike_train(trace, 0, hi, lo)
    train_b = spike_train(trace, 1, hi, lo)
    n_pulses = int(math.floor(horizon / period)) + 1
    pulse_onsets = drive.start + period * np.arange(n_pulses)
    pulse_onsets = pulse_onsets[pulse_onsets <= horizon]
    return CascadeResult(
        trace=trace,
        train_a=train_a,
        train_b=train_b,
        pulses_per_a_spike=_counts_between(pulse_onsets, train_a.peak_times),
        a_spikes_per_b_spike=_counts_between(train_a.peak_times, train_b.peak_times),
    )


def stochastic_lif_histogram(
    dev_a: DeviceParams,
    dev_b: DeviceParams,
    v_a: float,
    v_b_list: Sequence[float],
    eta: float,
    noise: NoiseSpec,
    trials: int,
    seed: int,
    *,
    t0: float = 325.0,
    horizon: float = 60e-6,
    dt: float = DEFAULT_DT,
    settle: float | None = None,
    hi: float = DEFAULT_SPIKE_HI,
    lo: float = DEFAULT_SPIKE_LO,
) -> dict[float, Counter]:
    """Histogram of a-spikes integrated per b-spike, per b bias level.

    Seeded and reproducible: each (bias, trial) pair derives its own child
    seed from the master seed.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if settle is None:
        settle = max(2e-6, 0.1 * horizon)
    out: dict[float, Counter] = {}
    for i_vb, v_b in enumerate(v_b_list):
        hist: Counter = Counter()
        cfg = pair_network(dev_a, dev_b, eta, t0=t0)
        for trial in range(trials):
            child = int(np.random.SeedSequence([seed, i_vb, trial]).generate_state(1)[0])
            trace = integrate(cfg, [DC(v_a), DC(v_b)], horizon=horizon, dt=dt, noise=noise, seed=child)
            train_a = spike_train(trace, 0, hi, lo).after(settle)
            train_b = spike_train(trace, 1, hi, lo).after(settle)
            if len(train_a) and len(train_b):
                hist.update(_counts_between(train_a.peak_times, train_b.peak_times))
        out[v_b] = hist
    return out


def save_rate_curve(curve: RateCodingCurve, csv_path, json_path=None) -> None:
    """Persist a rate curve as long-format CSV (one row per point) + JSON summary."""
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["v_in_V", "frequency_Hz", "mode", "spike_count", "final_current_A", "confident"])
        for p in curve.points:
            writer.writerow(
                [p.v_in, p.frequency, p.mode.label.value, p.mode.spike_count, p.mode.final_current, p.mode.confident]
            )
    if json_path is not None:
        doc = {
            "threshold_low_V": curve.threshold_low,
            "cutoff_high_V": curve.cutoff_high,
            "points": [
                {"v_in_V": p.v_in, "frequency_Hz": p.frequency, "mode": p.mode.label.value}
                for p in curve.points
            ],
        }
        with open(json_path, "w") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")


def save_points_csv(rows: Sequence[dict], path) -> None:
    """Write a list of flat dicts as CSV with the union of keys as header."""
    if not rows:
        raise ValueError("no rows to save")
    keys: list[str] = []
    for row in rows:
        for key in row:
            if key not in keys:
                keys.append(key)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=keys)
        writer.writeheader()
        writer.writerows(rows)

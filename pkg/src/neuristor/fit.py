"""Global parameter fitting: differential evolution plus the two objectives.

The optimizer is rand/1/bin differential evolution with binomial crossover,
greedy synchronous selection and bound clamping.  The two shipped objectives
fit (a) the seven resistance-loop constants against branch-labeled R-T scans
in log-resistance space, and (b) the four circuit-thermal constants against
extracted spike features.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .device import DeviceParams
from .hysteresis import PAPER_FIT_2023, HysteresisParams, RTSeries, replay_quasistatic
from .network import single_device_network
from .solver import DEFAULT_DT, NonFiniteStateError, SpikeTrain, Trace, detect_spikes, integrate
from .sources import DC

__all__ = [
    "DESettings",
    "DEResult",
    "SpikeFeatures",
    "InsufficientSpikesError",
    "differential_evolution",
    "extract_spike_features",
    "fit_hysteresis",
    "fit_device",
    "HysteresisFit",
    "DeviceFit",
    "load_rt_csv",
    "save_fit_json",
]

_PENALTY = 1e6


@dataclass(frozen=True)
class DESettings:
    """Differential-evolution controls.

    bounds holds one (low, high) pair per parameter; mutation factor ``f`` and
    crossover rate ``cr`` follow the usual rand/1/bin conventions.  The run
    stops at ``max_generations`` or when the population's objective spread
    falls below ``tol``.
    """

    bounds: tuple[tuple[float, float], ...]
    pop_size: int
    f: float = 0.5
    cr: float = 0.9
    max_generations: int = 600
    tol: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "bounds", tuple((float(a), float(b)) for a, b in self.bounds))
        if not self.bounds:
            raise ValueError("bounds must not be empty")
        for low, high in self.bounds:
            if not (math.isfinite(low) and math.isfinite(high) and low < high):
                raise ValueError(f"invalid bound ({low}, {high})")
        if not 0.0 < self.f <= 2.0:
            raise ValueError("f must be in (0, 2]")
        if not 0.0 <= self.cr <= 1.0:
            raise ValueError("cr must be in [0, 1]")
        if self.pop_size < 4:
            raise ValueError("pop_size must be >= 4")
        if self.max_generations < 1:
            raise ValueError("max_generations must be >= 1")
        if self.tol < 0.0:
            raise ValueError("tol must be >= 0")

    @property
    def n_dim(self) -> int:
        return len(self.bounds)

    @classmethod
    def for_dimension(cls, bounds: Sequence[tuple[float, float]], **kwargs) -> "DESettings":
        """Population sized at 15x dimension unless overridden."""
        kwargs.setdefault("pop_size", 15 * len(bounds))
        return cls(bounds=tuple(bounds), **kwargs)


@dataclass(frozen=True)
class DEResult:
    best_x: np.ndarray
    best_value: float
    history: tuple[float, ...]
    n_generations: int
    converged: bool


def differential_evolution(
    objective: Callable[[np.ndarray], float],
    settings: DESettings,
) -> DEResult:
    """Minimize ``objective`` over the bounded box; deterministic per seed.

    Per generation every member produces one trial: mutate three distinct
    other members (x_r1 + f * (x_r2 - x_r3), clamped to bounds), binomially
    cross with the parent at rate ``cr`` with one forced dimension, then keep
    the better of parent and trial.  Selection is synchronous: all trials are
    judged against the current generation.
    """
    rng = np.random.default_rng(settings.seed)
    dim = settings.n_dim
    lows = np.array([b[0] for b in settings.bounds])
    highs = np.array([b[1] for b in settings.bounds])
    pop = lows + (highs - lows) * rng.random((settings.pop_size, dim))
    values = np.array([float(objective(x)) for x in pop])

    history = [float(values.min())]
    converged = False
    generation = 0
    for generation in range(1, settings.max_generations + 1):
        new_pop = pop.copy()
        new_values = values.copy()
        for i in range(settings.pop_size):
            choices = [j for j in range(settings.pop_size) if j != i]
            r1, r2, r3 = rng.choice(choices, size=3, replace=False)
            mutant = pop[r1] + settings.f * (pop[r2] - pop[r3])
            np.clip(mutant, lows, highs, out=mutant)
            cross = rng.random(dim) < settings.cr
            cross[rng.integers(dim)] = True
            trial = np.where(cross, mutant, pop[i])
            trial_value = float(objective(trial))
            if trial_value <= values[i]:
                new_pop[i] = trial
                new_values[i] = trial_value
        pop, values = new_pop, new_values
        history.append(float(values.min()))
        if values.max() - values.min() <= settings.tol:
            converged = True
            break

    best = int(values.argmin())
    return DEResult(
        best_x=pop[best].copy(),
        best_value=float(values[best]),
        history=tuple(history),
        n_generations=generation,
        converged=converged,
    )


# --- resistance-loop fitting -------------------------------------------------

_H_NAMES = ("r0", "rm", "ea", "beta", "w", "tc", "gamma")


@dataclass(frozen=True)
class HysteresisFit:
    params: HysteresisParams
    residual: float
    result: DEResult
    warnings: tuple[str, ...] = ()


def _loop_objective(series: Sequence[RTSeries]) -> Callable[[np.ndarray], float]:
    logs = [np.log10(leg.resistances) for leg in series]

    def objective(x: np.ndarray) -> float:
        try:
            params = HysteresisParams(**dict(zip(_H_NAMES, map(float, x))))
        except ValueError:
            return _PENALTY
        try:
            model = replay_quasistatic(series, params)
        except (ValueError, FloatingPointError, OverflowError):
            return _PENALTY
        sse = 0.0
        count = 0
        for model_r, log_data in zip(model, logs):
            if np.any(~np.isfinite(model_r)) or np.any(model_r <= 0.0):
                return _PENALTY
            diff = np.log10(model_r) - log_data
            sse += float(diff @ diff)
            count += diff.size
        return sse / count

    return objective


def default_hysteresis_bounds(
    reference: HysteresisParams = PAPER_FIT_2023,
    span: float = 10.0,
) -> tuple[tuple[float, float], ...]:
    """Per-parameter box [ref/span, ref*span] around a reference constant set."""
    ref = reference.as_array()
    return tuple((value / span, value * span) for value in ref)


def fit_hysteresis(
    rt_data: Sequence[RTSeries],
    settings: DESettings | None = None,
    bounds: Sequence[tuple[float, float]] | None = None,
    seed: int = 0,
) -> HysteresisFit:
    """Fit the seven loop constants to branch-labeled R-T scans.

    The residual is the mean squared error in log10-resistance, accumulated
    by replaying the labeled protocol through the branch machine (reversals at
    leg boundaries).  Data must contain at least one heating and one cooling
    leg for the loop width to be identifiable; single-branch data still fits
    but flags ``w`` as low-confidence.
    """
    if not rt_data:
        raise ValueError("rt_data must not be empty")
    for leg in rt_data:
        if leg.resistances is None:
            raise ValueError("every series needs measured resistances")
    branches = {leg.branch for leg in rt_data}
    warnings: tuple[str, ...] = ()
    if branches != {"heat", "cool"}:
        warnings = ("w is low-confidence: loop width is not identifiable from a single branch",)
    if settings is None:
        box = tuple(bounds) if bounds is not None else default_hysteresis_bounds()
        settings = DESettings.for_dimension(box, max_generations=800, seed=seed)
    result = differential_evolution(_loop_objective(rt_data), settings)
    params = HysteresisParams(**dict(zip(_H_NAMES, map(float, result.best_x))))
    return HysteresisFit(params=params, residual=result.best_value, result=result, warnings=warnings)


# --- spike-feature fitting ---------------------------------------------------


class InsufficientSpikesError(ValueError):
    """Raised when a trace does not contain enough spikes for feature extraction."""


@dataclass(frozen=True)
class SpikeFeatures:
    """Waveform features used as the device-fitting target.

    Amplitudes and peak times of the first three spikes, the mean full width
    at half maximum over all spikes, and the mean spiking frequency.
    """

    amplitudes: tuple[float, float, float]
    peak_times: tuple[float, float, float]
    mean_width: float
    mean_frequency: float

    def __post_init__(self) -> None:
        if not (self.peak_times[0] < self.peak_times[1] < self.peak_times[2]):
            raise ValueError("peak times must be increasing")
        values = (*self.amplitudes, *self.peak_times, self.mean_width, self.mean_frequency)
        if any(not (math.isfinite(v) and v > 0.0) for v in values):
            raise ValueError("all features must be finite and positive")

    def as_array(self) -> np.ndarray:
        return np.array([*self.amplitudes, *self.peak_times, self.mean_width, self.mean_frequency])


def features_from_train(train: SpikeTrain) -> SpikeFeatures:
    if len(train) < 3:
        raise InsufficientSpikesError(f"need at least 3 spikes, got {len(train)}")
    events = train.events
    first = events[0].peak_time
    last = events[-1].peak_time
    return SpikeFeatures(
        amplitudes=(events[0].amplitude, events[1].amplitude, events[2].amplitude),
        peak_times=(events[0].peak_time, events[1].peak_time, events[2].peak_time),
        mean_width=float(np.mean([e.width_fwhm for e in events])),
        mean_frequency=(len(events) - 1) / (last - first),
    )


def extract_spike_features(
    trace: Trace,
    device: int = 0,
    hi: float = 2.0e-3,
    lo: float = 0.6e-3,
) -> SpikeFeatures:
    """Detect spikes on the device-current channel and summarize them."""
    train = detect_spikes(trace.time, trace.i_device[:, device], hi, lo)
    return features_from_train(train)


@dataclass(frozen=True)
class DeviceFit:
    c: float
    k: float
    s_th: float
    c_th: float
    residual: float
    result: DEResult


def _feature_error(sim: SpikeFeatures, target: np.ndarray) -> float:
    rel = (sim.as_array() - target) / target
    return float(rel @ rel) / target.size


def fit_device(
    target: SpikeFeatures,
    hparams: HysteresisParams,
    drive: tuple[float, float, float],
    settings: DESettings | None = None,
    bounds: Sequence[tuple[float, float]] | None = None,
    seed: int = 0,
    *,
    horizon: float = 20e-6,
    dt: float = DEFAULT_DT,
    hi: float = 2.0e-3,
    lo: float = 0.6e-3,
) -> DeviceFit:
    """Fit (c, k, s_th, c_th) so simulated spike features match ``target``.

    ``drive`` is (input voltage, load resistance, ambient temperature).  The
    objective is the mean squared relative feature error; simulations that
    blow up or fail to spike score a large penalty instead of aborting.
    """
    v_in, r_load, t0 = drive
    target_vec = target.as_array()
    if bounds is None:
        # [0.1x, 10x] around the reference constants, with k floored at its
        # physical minimum of 1.
        ref = (145e-12, 4.90, 0.206e-3, 49.6e-12)
        bounds = (
            (ref[0] / 10, ref[0] * 10),
            (max(1.0, ref[1] / 10), ref[1] * 10),
            (ref[2] / 10, ref[2] * 10),
            (ref[3] / 10, ref[3] * 10),
        )
    if settings is None:
        settings = DESettings.for_dimension(tuple(bounds), max_generations=120, seed=seed)

    def objective(x: np.ndarray) -> float:
        c, k, s_th, c_th = map(float, x)
        try:
            dev = DeviceParams(c=c, k=k, s_th=s_th, c_th=c_th, r_load=r_load, hparams=hparams)
            cfg = single_device_network(dev, t0=t0)
            trace = integrate(cfg, [DC(v_in)], horizon=horizon, dt=dt)
            sim = extract_spike_features(trace, 0, hi, lo)
        except (ValueError, NonFiniteStateError, InsufficientSpikesError):
            return _PENALTY
        return _feature_error(sim, target_vec)

    result = differential_evolution(objective, settings)
    c, k, s_th, c_th = map(float, result.best_x)
    return DeviceFit(c=c, k=k, s_th=s_th, c_th=c_th, residual=result.best_value, result=result)


# --- persistence ---------------------------------------------------------------


def load_rt_csv(path) -> list[RTSeries]:
    """Read branch-labeled R-T data: columns T_K, R_ohm, branch[, series].

    Rows sharing a series id form one leg; without a series column, a new leg
    starts whenever the branch label changes.
    """
    legs: list[RTSeries] = []
    temps: list[float] = []
    res: list[float] = []
    current_key: tuple | None = None

    def flush(branch: str) -> None:
        if temps:
            legs.append(RTSeries(np.array(temps), branch, np.array(res)))
            temps.clear()
            res.clear()

    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        required = {"T_K", "R_ohm", "branch"}
        if not required.issubset(fields):
            raise ValueError(f"{path}: expected columns {sorted(required)}, got {fields}")
        has_series = "series" in fields
        prev_branch = None
        for row in reader:
            branch = row["branch"].strip()
            key = row["series"].strip() if has_series else branch
            if current_key is not None and key != current_key:
                flush(prev_branch)
            current_key = key
            prev_branch = branch
            temps.append(float(row["T_K"]))
            res.append(float(row["R_ohm"]))
        if prev_branch is not None:
            flush(prev_branch)
    if not legs:
        raise ValueError(f"{path}: no data rows")
    return legs


def save_fit_json(path, *, parameters: dict, residual: float, result: DEResult, seed: int, warnings=()) -> None:
    doc = {
        "parameters": parameters,
        "residual": residual,
        "generations": result.n_generations,
        "converged": result.converged,
        "seed": seed,
        "warnings": list(warnings),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")

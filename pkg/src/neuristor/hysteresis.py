"""Hysteretic resistance-temperature model for VO2 with minor-loop memory.

The insulating-phase volume fraction follows a tanh transition whose center
shifts between heating and cooling branches.  A direction reversal inside the
transition region spawns a minor loop, tracked by a single pair (reversal
temperature, proximity temperature); the proximity influence decays through a
smooth window function so minor branches rejoin the enclosing major branch a
few loop-widths past the reversal point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Literal, Sequence

import numpy as np

__all__ = [
    "HEATING",
    "COOLING",
    "DEFAULT_REVERSAL_EPS",
    "HysteresisParams",
    "BranchState",
    "RTSeries",
    "BUILTIN_PARAMS",
    "PAPER_FIT_2023",
    "proximity_weight",
    "insulating_fraction",
    "reversal_update",
    "resistance",
    "replay_quasistatic",
]

HEATING = 1.0
COOLING = -1.0

# Sub-millikelvin wiggles from solver rounding must not flip the branch.
DEFAULT_REVERSAL_EPS = 1e-4

# Keeps artanh finite when a reversal lands on a fully saturated branch.
_F_CLIP = 1e-12

ReversalForm = Literal["artanh", "linear"]


@dataclass(frozen=True)
class HysteresisParams:
    """Constants of the resistance-temperature loop model.

    r0    : insulating-phase resistance prefactor (ohm)
    rm    : metallic residual resistance (ohm)
    ea    : activation temperature (kelvin)
    beta  : transition sharpness (1/kelvin)
    w     : loop width between heating and cooling branches (kelvin)
    tc    : critical temperature at the loop center (kelvin)
    gamma : proximity-window shape factor (dimensionless)
    """

    r0: float
    rm: float
    ea: float
    beta: float
    w: float
    tc: float
    gamma: float

    def __post_init__(self) -> None:
        for name in ("r0", "rm", "ea", "beta", "w", "tc", "gamma"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"{name} must be finite and positive, got {value!r}")
        if self.tc - self.w / 2.0 <= 0.0:
            raise ValueError("tc - w/2 must be positive")

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.r0, self.rm, self.ea, self.beta, self.w, self.tc, self.gamma]
        )


@dataclass(frozen=True)
class BranchState:
    """Mutable branch memory of the loop: direction plus last-reversal record.

    delta  : +1 on the heating branch, -1 on the cooling branch
    t_r    : temperature of the most recent interior reversal (kelvin)
    t_pr   : proximity temperature stored at that reversal; 0 on the major loop
    t_last : most recent temperature fed to the state machine (kelvin)
    """

    delta: float
    t_r: float
    t_pr: float
    t_last: float

    def __post_init__(self) -> None:
        if self.delta not in (HEATING, COOLING):
            raise ValueError(f"delta must be +1 or -1, got {self.delta!r}")

    @classmethod
    def major(cls, t_start: float, delta: float = HEATING) -> "BranchState":
        """Fresh state on the major loop with no reversal memory."""
        return cls(delta=delta, t_r=t_start, t_pr=0.0, t_last=t_start)

    @property
    def on_major_loop(self) -> bool:
        return self.t_pr == 0.0


#: Loop constants fitted to a 100 x 500 nm2 VO2 nanodevice (quasi-static scan).
PAPER_FIT_2023 = HysteresisParams(
    r0=5.359e-3,
    rm=262.5,
    ea=5220.0,
    beta=0.253,
    w=7.193,
    tc=332.8,
    gamma=0.956,
)

BUILTIN_PARAMS: dict[str, HysteresisParams] = {
    "paper-fit-2023": PAPER_FIT_2023,
}


def proximity_weight(x: float, gamma: float) -> float:
    """Smooth window weighting the minor-loop shift, 1 near x=0, 0 for x >~ 2.

    Monotonically decreasing over the open window; the tanh factor closes the
    window entirely a couple of units past the reversal.
    """
    return 0.5 * (1.0 - math.sin(gamma * x)) * (1.0 + math.tanh(math.pi**2 - 2.0 * math.pi * x))


def _fraction_raw(
    t: float,
    delta: float,
    t_r: float,
    t_pr: float,
    beta: float,
    w: float,
    tc: float,
    gamma: float,
) -> float:
    shift = 0.0
    if t_pr != 0.0:
        shift = t_pr * proximity_weight((t - t_r) / t_pr, gamma)
    return 0.5 + 0.5 * math.tanh(beta * (delta * w / 2.0 + tc - (t + shift)))


def insulating_fraction(t: float, branch: BranchState, p: HysteresisParams) -> float:
    """Volume fraction of the insulating phase at temperature ``t``, in [0, 1].

    On the major loop (``t_pr == 0``) the proximity term vanishes and the
    fraction is the plain branch sigmoid; on a minor branch the evaluation
    temperature is shifted by the decaying proximity correction.
    """
    if not (t > 0.0 and math.isfinite(t)):
        raise ValueError(f"temperature must be finite and positive, got {t!r}")
    return _fraction_raw(t, branch.delta, branch.t_r, branch.t_pr, p.beta, p.w, p.tc, p.gamma)


def _proximity_at_reversal(
    f_rev: float,
    t_rev: float,
    new_delta: float,
    p: HysteresisParams,
    form: ReversalForm,
) -> float:
    f_rev = min(max(f_rev, _F_CLIP), 1.0 - _F_CLIP)
    if form == "artanh":
        inv = math.atanh(2.0 * f_rev - 1.0) / p.beta
    elif form == "linear":
        inv = (2.0 * f_rev - 1.0) / p.beta
    else:
        raise ValueError(f"unknown reversal form {form!r}")
    t_pr = new_delta * p.w / 2.0 + p.tc - inv - t_rev
    # |t_pr| <= w is the model's valid range (distance to the far major branch).
    return min(max(t_pr, -p.w), p.w)


def reversal_update(
    branch: BranchState,
    t_new: float,
    p: HysteresisParams,
    eps: float = DEFAULT_REVERSAL_EPS,
    form: ReversalForm = "artanh",
) -> BranchState:
    """Advance the branch state machine to temperature ``t_new``.

    A reversal fires when the temperature moves against the current branch
    direction by more than ``eps``; the branch flips, the turning point
    ``t_r`` is recorded, and the proximity temperature is computed from the
    pre-flip branch's fraction at the turning point.  Otherwise only the
    last-seen temperature advances.

    ``form`` selects how the branch sigmoid is inverted when computing the
    proximity temperature: ``"artanh"`` (default, exact inverse, makes minor
    branches continuous at the reversal) or ``"linear"`` (first-order inverse).
    """
    if not (t_new > 0.0 and math.isfinite(t_new)):
        raise ValueError(f"temperature must be finite and positive, got {t_new!r}")
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    move = t_new - branch.t_last
    direction = math.copysign(1.0, move) if move != 0.0 else branch.delta
    if abs(move) <= eps or direction == branch.delta:
        return replace(branch, t_last=t_new)
    f_rev = insulating_fraction(branch.t_last, branch, p)
    new_delta = -branch.delta
    t_pr = _proximity_at_reversal(f_rev, branch.t_last, new_delta, p, form)
    return BranchState(delta=new_delta, t_r=branch.t_last, t_pr=t_pr, t_last=t_new)


def resistance(
    t: float,
    branch: BranchState,
    p: HysteresisParams,
    k: float = 1.0,
    mode: Literal["quasistatic", "dynamic"] = "quasistatic",
) -> float:
    """Device resistance at temperature ``t`` on the current branch (ohm).

    ``k`` scales the metallic residual to account for the partial metallic
    channel formed during fast spiking; quasistatic mode (slow thermal scans)
    forces the fully transformed value ``k = 1``.
    """
    if k < 1.0:
        raise ValueError("k must be >= 1")
    if mode == "quasistatic":
        k = 1.0
    elif mode != "dynamic":
        raise ValueError(f"unknown mode {mode!r}")
    f = insulating_fraction(t, branch, p)
    return p.r0 * math.exp(p.ea / t) * f + k * p.rm


@dataclass(frozen=True)
class RTSeries:
    """One monotone leg of a quasi-static resistance-temperature protocol."""

    temperatures: np.ndarray
    branch: Literal["heat", "cool"]
    resistances: np.ndarray | None = None

    def __post_init__(self) -> None:
        temps = np.asarray(self.temperatures, dtype=float)
        object.__setattr__(self, "temperatures", temps)
        if self.branch not in ("heat", "cool"):
            raise ValueError(f"branch must be 'heat' or 'cool', got {self.branch!r}")
        if temps.ndim != 1 or temps.size == 0:
            raise ValueError("temperatures must be a non-empty 1-D array")
        if np.any(temps <= 0.0) or not np.all(np.isfinite(temps)):
            raise ValueError("temperatures must be finite and positive")
        if self.resistances is not None:
            res = np.asarray(self.resistances, dtype=float)
            object.__setattr__(self, "resistances", res)
            if res.shape != temps.shape:
                raise ValueError("resistances must match temperatures in shape")
            if np.any(res <= 0.0) or not np.all(np.isfinite(res)):
                raise ValueError("resistances must be finite and positive")

    @property
    def delta(self) -> float:
        return HEATING if self.branch == "heat" else COOLING


def _fraction_array(temps: np.ndarray, branch: BranchState, p: HysteresisParams) -> np.ndarray:
    shift = 0.0
    if branch.t_pr != 0.0:
        x = (temps - branch.t_r) / branch.t_pr
        shift = branch.t_pr * (
            0.5 * (1.0 - np.sin(p.gamma * x)) * (1.0 + np.tanh(math.pi**2 - 2.0 * math.pi * x))
        )
    return 0.5 + 0.5 * np.tanh(p.beta * (branch.delta * p.w / 2.0 + p.tc - (temps + shift)))


def replay_quasistatic(
    series: Sequence[RTSeries],
    p: HysteresisParams,
    form: ReversalForm = "artanh",
) -> list[np.ndarray]:
    """Replay a labeled protocol through the branch machine; return R per leg.

    Reversals are driven by the leg labels: whenever the label direction flips
    relative to the current branch, the turn-around is anchored at the last
    temperature of the preceding leg.  Within a leg the branch state is
    constant, so the evaluation vectorizes.
    """
    if not series:
        raise ValueError("series must not be empty")
    branch = BranchState.major(float(series[0].temperatures[0]), delta=series[0].delta)
    out: list[np.ndarray] = []
    for leg in series:
        if leg.delta != branch.delta:
            f_rev = insulating_fraction(branch.t_last, branch, p)
            t_pr = _proximity_at_reversal(f_rev, branch.t_last, leg.delta, p, form)
            branch = BranchState(delta=leg.delta, t_r=branch.t_last, t_pr=t_pr, t_last=branch.t_last)
        f = _fraction_array(leg.temperatures, branch, p)
        out.append(p.r0 * np.exp(p.ea / leg.temperatures) * f + p.rm)
        branch = replace(branch, t_last=float(leg.temperatures[-1]))
    return out

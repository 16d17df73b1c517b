"""Compiled fixed-step integration core.

Mirrors the scalar reference semantics in :mod:`hysteresis`, :mod:`device`,
:mod:`network` and :mod:`sources`; equality between this kernel and the
reference path is pinned by tests.  Branch memory is hybrid discrete state:
resistance is evaluated per integrator stage on the branch frozen at the step
start, and the reversal machine advances once per completed step.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

# dev parameter column layout
_C, _K, _STH, _CTH, _RLOAD, _R0, _RM, _EA, _BETA, _W, _TC, _GAMMA = range(12)

_F_CLIP = 1e-12
_PI = math.pi


@njit(cache=True, nogil=True, inline="always")
def _wf_sample(wf: np.ndarray, t: float) -> float:
    kind = wf[0]
    if kind == 0.0:  # DC(level)
        return wf[1]
    if kind == 1.0:  # Pulse(level, start, width, baseline)
        if wf[2] <= t < wf[2] + wf[3]:
            return wf[1]
        return wf[4]
    # PulseTrain(high, low, period, duty, start, count)
    if t < wf[5]:
        return wf[2]
    n = math.floor((t - wf[5]) / wf[3])
    if wf[6] >= 0.0 and n >= wf[6]:
        return wf[2]
    phase = t - wf[5] - n * wf[3]
    if phase < wf[4] * wf[3]:
        return wf[1]
    return wf[2]


@njit(cache=True, nogil=True, inline="always")
def _fraction(t: float, delta: float, t_r: float, t_pr: float, beta: float, w: float, tc: float, gamma: float) -> float:
    shift = 0.0
    if t_pr != 0.0:
        x = (t - t_r) / t_pr
        shift = t_pr * 0.5 * (1.0 - math.sin(gamma * x)) * (1.0 + math.tanh(_PI * _PI - 2.0 * _PI * x))
    return 0.5 + 0.5 * math.tanh(beta * (delta * w / 2.0 + tc - (t + shift)))


@njit(cache=True, nogil=True, inline="always")
def _resistance(t: float, delta: float, t_r: float, t_pr: float, dev: np.ndarray) -> float:
    f = _fraction(t, delta, t_r, t_pr, dev[_BETA], dev[_W], dev[_TC], dev[_GAMMA])
    return dev[_R0] * math.exp(dev[_EA] / t) * f + dev[_K] * dev[_RM]


@njit(cache=True, nogil=True)
def _derivs(
    t_abs: float,
    v1: np.ndarray,
    temp: np.ndarray,
    delta: np.ndarray,
    t_r: np.ndarray,
    t_pr: np.ndarray,
    dev: np.ndarray,
    eta: np.ndarray,
    s_env: np.ndarray,
    t_amb: float,
    wf: np.ndarray,
    dv: np.ndarray,
    dt_: np.ndarray,
) -> None:
    n = v1.shape[0]
    for i in range(n):
        r = _resistance(temp[i], delta[i], t_r[i], t_pr[i], dev[i])
        vin = _wf_sample(wf[i], t_abs)
        if dev[i, _RLOAD] > 0.0:
            rc = dev[i, _RLOAD] * dev[i, _C]
            dv[i] = vin / rc - v1[i] * (1.0 / (r * dev[i, _C]) + 1.0 / rc)
            joule = v1[i] * v1[i] / (r * dev[i, _CTH])
        else:
            dv[i] = 0.0
            joule = vin * vin / (r * dev[i, _CTH])
        dt_[i] = joule - s_env[i] * (temp[i] - t_amb) / dev[i, _CTH]
    for i in range(n):
        acc = 0.0
        for j in range(n):
            if eta[i, j] != 0.0:
                acc += eta[i, j] * (temp[i] - temp[j])
        dt_[i] -= acc * dev[i, _STH] / dev[i, _CTH]


@njit(cache=True, nogil=True)
def run_rk4(
    n_steps: int,
    dt: float,
    t_begin: float,
    v1: np.ndarray,
    temp: np.ndarray,
    delta: np.ndarray,
    t_r: np.ndarray,
    t_pr: np.ndarray,
    t_last: np.ndarray,
    dev: np.ndarray,
    eta: np.ndarray,
    s_env: np.ndarray,
    t_amb: float,
    wf: np.ndarray,
    eps_rev: float,
    use_artanh: bool,
    noise_std: float,
    noise: np.ndarray,
    record_stride: int,
    out: np.ndarray,
) -> int:
    """Integrate in place; fill ``out`` (n_rec, 6, N). Returns -1 on success,
    else the 0-based step index at which the state became non-finite."""
    n = v1.shape[0]
    k1v = np.empty(n)
    k1t = np.empty(n)
    k2v = np.empty(n)
    k2t = np.empty(n)
    k3v = np.empty(n)
    k3t = np.empty(n)
    k4v = np.empty(n)
    k4t = np.empty(n)
    sv = np.empty(n)
    st = np.empty(n)

    _record(0, t_begin, v1, temp, delta, t_r, t_pr, dev, wf, out)

    rec = 1
    for step in range(n_steps):
        t_now = t_begin + step * dt
        _derivs(t_now, v1, temp, delta, t_r, t_pr, dev, eta, s_env, t_amb, wf, k1v, k1t)
        for i in range(n):
            sv[i] = v1[i] + 0.5 * dt * k1v[i]
            st[i] = temp[i] + 0.5 * dt * k1t[i]
        _derivs(t_now + 0.5 * dt, sv, st, delta, t_r, t_pr, dev, eta, s_env, t_amb, wf, k2v, k2t)
        for i in range(n):
            sv[i] = v1[i] + 0.5 * dt * k2v[i]
            st[i] = temp[i] + 0.5 * dt * k2t[i]
        _derivs(t_now + 0.5 * dt, sv, st, delta, t_r, t_pr, dev, eta, s_env, t_amb, wf, k3v, k3t)
        for i in range(n):
            sv[i] = v1[i] + dt * k3v[i]
            st[i] = temp[i] + dt * k3t[i]
        _derivs(t_now + dt, sv, st, delta, t_r, t_pr, dev, eta, s_env, t_amb, wf, k4v, k4t)

        t_next = t_now + dt
        for i in range(n):
            if dev[i, _RLOAD] > 0.0:
                v1[i] += dt / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i])
            else:
                v1[i] = _wf_sample(wf[i], t_next)
            temp[i] += dt / 6.0 * (k1t[i] + 2.0 * k2t[i] + 2.0 * k3t[i] + k4t[i])
            if noise_std > 0.0:
                temp[i] += noise_std * dt * noise[step, i]
            if not (math.isfinite(v1[i]) and math.isfinite(temp[i]) and temp[i] > 0.0):
                return step
            # branch reversal machine, once per completed step
            move = temp[i] - t_last[i]
            if move != 0.0:
                direction = 1.0 if move > 0.0 else -1.0
            else:
                direction = delta[i]
            if abs(move) > eps_rev and direction != delta[i]:
                f_rev = _fraction(t_last[i], delta[i], t_r[i], t_pr[i], dev[i, _BETA], dev[i, _W], dev[i, _TC], dev[i, _GAMMA])
                f_rev = min(max(f_rev, _F_CLIP), 1.0 - _F_CLIP)
                if use_artanh:
                    inv = math.atanh(2.0 * f_rev - 1.0) / dev[i, _BETA]
                else:
                    inv = (2.0 * f_rev - 1.0) / dev[i, _BETA]
                new_delta = -delta[i]
                pr = new_delta * dev[i, _W] / 2.0 + dev[i, _TC] - inv - t_last[i]
                pr = min(max(pr, -dev[i, _W]), dev[i, _W])
                t_r[i] = t_last[i]
                t_pr[i] = pr
                delta[i] = new_delta
            t_last[i] = temp[i]

        if (step + 1) % record_stride == 0:
            _record(rec, t_next, v1, temp, delta, t_r, t_pr, dev, wf, out)
            rec += 1
    return -1


@njit(cache=True, nogil=True, inline="always")
def _record(
    row: int,
    t_abs: float,
    v1: np.ndarray,
    temp: np.ndarray,
    delta: np.ndarray,
    t_r: np.ndarray,
    t_pr: np.ndarray,
    dev: np.ndarray,
    wf: np.ndarray,
    out: np.ndarray,
) -> None:
    n = v1.shape[0]
    for i in range(n):
        vin = _wf_sample(wf[i], t_abs)
        r = _resistance(temp[i], delta[i], t_r[i], t_pr[i], dev[i])
        i_dev = v1[i] / r
        if dev[i, _RLOAD] > 0.0:
            i_load = (vin - v1[i]) / dev[i, _RLOAD]
        else:
            i_load = i_dev
        out[row, 0, i] = vin
        out[row, 1, i] = v1[i]
        out[row, 2, i] = temp[i]
        out[row, 3, i] = r
        out[row, 4, i] = i_dev
        out[row, 5, i] = i_load

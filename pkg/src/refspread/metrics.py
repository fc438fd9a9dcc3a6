"""Post-processing of simulation logs: impact bookkeeping, torque windows, error decay."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import curve_fit

from .control import ControlMode
from .simlog import Event, SimLog


def contact_closures(log: SimLog) -> list[Event]:
    """Impact events that close a contact for the first time.

    A contact that separates and re-touches at near-zero speed shows up as
    another impact event; it is not a new closure.
    """
    seen: set[int] = set()
    out = []
    for e in log.impacts():
        new = [i for i in e.contacts if i not in seen]
        if new:
            out.append(e)
            seen.update(new)
    return out


def first_impact_time(log: SimLog) -> Optional[float]:
    imp = log.impacts()
    return imp[0].t if imp else None


def full_contact_time(log: SimLog) -> Optional[float]:
    """First instant at which both contacts are closed at the same time.

    Replays the event list: impacts and zero-speed closures add contacts,
    releases remove them.
    """
    closed: set[int] = set()
    for e in log.events:
        if e.kind in ("impact", "contact"):
            closed.update(e.contacts)
        elif e.kind == "release":
            closed.difference_update(e.contacts)
        if closed >= {0, 1}:
            return e.t
    return None


def mode_times(log: SimLog) -> dict:
    """Switch time per mode name; exact when recorded live, else first logged sample."""
    st = dict(log.meta.get("switch_times", {}))
    if st:
        return st
    mode, t = log["mode"], log["t"]
    for m, name in ((1, "INTERMEDIATE"), (2, "POST")):
        idx = np.flatnonzero(mode == m)
        if idx.size:
            st[name] = float(t[idx[0]])
    return st


def intermediate_duration(log: SimLog) -> float:
    st = mode_times(log)
    if "INTERMEDIATE" not in st:
        return 0.0
    return st.get("POST", float(log["t"][-1])) - st["INTERMEDIATE"]


def torque_inf(log: SimLog) -> np.ndarray:
    return np.abs(log.cols("tau1", "tau2", "tau3")).max(axis=1)


def window_mask(log: SimLog, t0: float, t1: float) -> np.ndarray:
    t = log["t"]
    return (t >= t0 - 1e-12) & (t <= t1 + 1e-12)


def window_max_torque(log: SimLog, t0: float, t1: float) -> float:
    m = window_mask(log, t0, t1)
    return float(torque_inf(log)[m].max()) if m.any() else 0.0


def window_peak_to_peak(log: SimLog, t0: float, t1: float) -> float:
    """Largest peak-to-peak excursion over the three torque channels."""
    m = window_mask(log, t0, t1)
    if not m.any():
        return 0.0
    tau = log.cols("tau1", "tau2", "tau3")[m]
    return float((tau.max(axis=0) - tau.min(axis=0)).max())


def inter_impact_window(log: SimLog, fallback: float = 0.05) -> tuple[float, float]:
    """[first impact, full contact]; open-ended runs get ``fallback`` seconds."""
    t0 = first_impact_time(log)
    if t0 is None:
        return (np.nan, np.nan)
    t1 = full_contact_time(log)
    return (t0, t0 + fallback if t1 is None or t1 <= t0 else t1)


def post_position_error(log: SimLog) -> tuple[np.ndarray, np.ndarray]:
    e = log.cols("post_px", "post_py") - log.cols("px", "py")
    return log["t"], e


def post_velocity_error(log: SimLog) -> tuple[np.ndarray, np.ndarray]:
    e = log.cols("post_vx", "post_vy") - log.cols("vx", "vy")
    return log["t"], e


def velocity_error_rms(log: SimLog, t0: float, t1: Optional[float] = None) -> float:
    t, e = post_velocity_error(log)
    m = (t >= t0) & (t <= (t[-1] if t1 is None else t1))
    return float(np.sqrt(np.mean(np.sum(e[m] ** 2, axis=1)))) if m.any() else np.nan


@dataclass(frozen=True)
class DecayFit:
    time_constant: float
    t0: float
    residual: float  # rms fit residual relative to the initial error norm


def _decay(t, a1, b1, a2, b2, T):
    # stacked (x, y) components sharing a double pole at -1/T
    n = t.size // 2
    s = t[:n]
    env = np.exp(-s / T)
    return np.concatenate([(a1 + b1 * s) * env, (a2 + b2 * s) * env])


def fit_post_decay(log: SimLog, t0: Optional[float] = None, horizon: float = 0.3) -> DecayFit:
    """Fit ``(a + b s) exp(-s/T)`` to the post-reference position error.

    A critically damped second-order error has exactly this shape, so T
    is the closed-loop time constant.
    """
    if t0 is None:
        t0 = mode_times(log).get("POST")
        if t0 is None:
            raise ValueError("log never entered Post mode")
    t, e = post_position_error(log)
    m = (t > t0) & (t <= t0 + horizon)
    s = t[m] - t0
    if s.size < 8:
        raise ValueError("not enough samples after the Post switch")
    y = np.concatenate([e[m, 0], e[m, 1]])
    p0 = (e[m][0, 0], 0.0, e[m][0, 1], 0.0, 0.05)
    popt, _ = curve_fit(_decay, np.concatenate([s, s]), y, p0=p0, maxfev=20000)
    scale = max(np.linalg.norm(e[m][0]), 1e-15)
    res = float(np.sqrt(np.mean((_decay(np.concatenate([s, s]), *popt) - y) ** 2)) / scale)
    return DecayFit(abs(float(popt[-1])), float(t0), res)


def energy_audit(log: SimLog) -> list[tuple[float, float]]:
    """(time, kinetic energy change) per impact event; each should be <= 0."""
    return [(e.t, e.dT) for e in log.impacts()]


def summary(log: SimLog) -> dict:
    win = inter_impact_window(log)
    out = {
        "strategy": log.meta.get("strategy"),
        "model": log.model,
        "impact_times": [e.t for e in log.impacts()],
        "contact_closures": [e.t for e in contact_closures(log)],
        "intermediate_duration": intermediate_duration(log),
        "inter_impact_max_torque": window_max_torque(log, *win) if np.isfinite(win[0]) else np.nan,
        "post_velocity_rms": np.nan,
        "energy_change": [dT for _, dT in energy_audit(log)],
        "error": log.error,
    }
    t_post = full_contact_time(log)
    if t_post is not None:
        out["post_velocity_rms"] = velocity_error_rms(log, t_post)
    return out


def mode_name(value: float) -> str:
    return ControlMode(int(round(value))).name

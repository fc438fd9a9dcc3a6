"""Event-driven simulation of the rigid arm/plank model.

Fixed-step RK4 between events.  Gap sign changes of open contacts are
localised by bisection on the cubic Hermite interpolant of the step; the
impact map is applied to the closing contacts together with those already
closed.  Closed contacts follow index-1 constrained dynamics with explicit
re-projection of gaps and normal velocities after every step; a contact
whose multiplier turns negative is released.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from itertools import combinations
from typing import Callable, Optional

import numpy as np

from .contact import contact_geometry, gaps as gap_values, impact_map, resolve_impact
from .control import ContactObservation, Controller, ControllerConfig, ControlOutput, Strategy
from .errors import NonFiniteState, SingularConstraintSystem
from .mechanics import _bias, kinetic_energy, mass_matrix, task_jacobians
from .params import ModelParams, State
from .reference import ReferenceBundle
from .simlog import RIGID_COLUMNS, Event, SimLog


@dataclass(frozen=True)
class SimConfig:
    t_end: Optional[float] = None  # defaults to the reference horizon
    step: float = 1e-4
    control_dt: float = 1e-3
    event_tol: float = 1e-9
    # open contacts this close (m) and closing join an impact as simultaneous
    simultaneity_tol: float = 1e-4
    plank_offset: float = 0.05
    seed: int = 0
    offset_jitter: float = 0.0  # std of a seeded random extra plank offset
    strategy: Strategy = Strategy.RS_WITH_INTERMEDIATE
    epsilon: float = 0.01
    # flexible model only
    fine_step: float = 1e-6
    contact_guard: float = 2e-4
    hc_rate: str = "penetration"  # "penetration" (-J_N qdot) or "gap" (J_N qdot)
    impact_law: str = "bilateral"  # or "unilateral" (impact LCP over closed + closing)

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy.parse(self.strategy))
        if self.step <= 0 or self.event_tol <= 0 or self.control_dt <= 0 or self.fine_step <= 0:
            raise ValueError("step sizes and event tolerance must be positive")
        ratio = self.control_dt / self.step
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("control period must be a multiple of the integrator step")
        if self.hc_rate not in ("penetration", "gap"):
            raise ValueError("hc_rate is 'penetration' or 'gap'")
        if self.impact_law not in ("bilateral", "unilateral"):
            raise ValueError("impact_law is 'bilateral' or 'unilateral'")

    def replace(self, **kw) -> "SimConfig":
        return replace(self, **kw)

    def controller_config(self) -> ControllerConfig:
        return ControllerConfig(strategy=self.strategy, dt=self.control_dt, epsilon=self.epsilon)

    def initial_plank_offset(self) -> float:
        if self.offset_jitter == 0.0:
            return self.plank_offset
        rng = np.random.default_rng(self.seed)
        return self.plank_offset + self.offset_jitter * float(rng.standard_normal())


# -- integration primitives ------------------------------------------------------

def _check(q, qdot):
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qdot))):
        raise NonFiniteState("integration produced non-finite state")


def free_accel(params: ModelParams, q, qdot, tau) -> np.ndarray:
    rhs = -_bias(params, q, qdot)
    rhs[:3] += tau
    return np.linalg.solve(mass_matrix(params, q), rhs)


def constrained_accel(params: ModelParams, q, qdot, tau, active) -> tuple[np.ndarray, np.ndarray]:
    """Solve ``[M -J^T; J 0][qddot; lam] = [S tau - h; -Jdot qdot]`` for the active rows."""
    rows = list(active)
    M = mass_matrix(params, q)
    rhs = -_bias(params, q, qdot)
    rhs[:3] += tau
    if not rows:
        return np.linalg.solve(M, rhs), np.zeros(0)
    geo = contact_geometry(params, State(q, qdot))
    J, Jd = geo.JN[rows], geo.JN_dot[rows]
    m = len(rows)
    K = np.block([[M, -J.T], [J, np.zeros((m, m))]])
    b = np.concatenate([rhs, -Jd @ qdot])
    if np.linalg.cond(K) > 1e12:
        raise SingularConstraintSystem(f"constraint system of contacts {rows} is singular")
    sol = np.linalg.solve(K, b)
    return sol[:4], sol[4:]


def _rk4(accel: Callable, q, qdot, dt):
    k1v = accel(q, qdot)
    k1q = qdot
    k2q = qdot + 0.5 * dt * k1v
    k2v = accel(q + 0.5 * dt * k1q, k2q)
    k3q = qdot + 0.5 * dt * k2v
    k3v = accel(q + 0.5 * dt * k2q, k3q)
    k4q = qdot + dt * k3v
    k4v = accel(q + dt * k3q, k4q)
    qn = q + dt / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q)
    qdn = qdot + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
    return qn, qdn


def step_free(params: ModelParams, state: State, tau, dt: float) -> State:
    """One classical RK4 step of ``M qddot = S tau - h``."""
    tau = np.asarray(tau, dtype=float)
    qn, qdn = _rk4(lambda q, v: free_accel(params, q, v, tau), state.q, state.qdot, dt)
    _check(qn, qdn)
    return State(qn, qdn)


def project_to_contacts(params: ModelParams, q, qdot, active, tol: float = 1e-13):
    """Mass-weighted projection of q onto ``gamma_act = 0`` and qdot onto ``J_act qdot = 0``."""
    rows = list(active)
    if not rows:
        return q, qdot
    q = q.copy()
    for _ in range(20):
        geo = contact_geometry(params, State(q, qdot))
        g = geo.gaps[rows]
        if np.abs(g).max() <= tol:
            break
        J = geo.JN[rows]
        MinvJT = np.linalg.solve(mass_matrix(params, q), J.T)
        q = q - MinvJT @ np.linalg.solve(J @ MinvJT, g)
    geo = contact_geometry(params, State(q, qdot))
    J = geo.JN[rows]
    MinvJT = np.linalg.solve(mass_matrix(params, q), J.T)
    qdot = qdot - MinvJT @ np.linalg.solve(J @ MinvJT, J @ qdot)
    return q, qdot


@dataclass
class ConstrainedStep:
    state: State
    lam: np.ndarray  # length 2, zero for open contacts
    active: tuple[int, ...]
    released: tuple[int, ...]


def contact_forces(params: ModelParams, state: State, tau, active) -> tuple[np.ndarray, tuple, tuple]:
    """Multipliers of the active set after releasing adhesive contacts.

    Solves the acceleration-level complementarity problem over ``active`` by
    enumeration (largest subsets first): kept contacts need ``lambda >= 0``,
    released ones need a non-negative normal acceleration.
    """
    act = tuple(sorted(active))
    if not act:
        return np.zeros(2), (), ()
    geo = contact_geometry(params, state)
    for size in range(len(act), -1, -1):
        for keep in combinations(act, size):
            qdd, lam = constrained_accel(params, state.q, state.qdot, tau, keep)
            if lam.size and lam.min() < 0.0:
                continue
            dropped = [i for i in act if i not in keep]
            if dropped and np.any(geo.JN[dropped] @ qdd + geo.JN_dot[dropped] @ state.qdot < -1e-12):
                continue
            full = np.zeros(2)
            full[list(keep)] = lam
            return full, keep, tuple(dropped)
    return np.zeros(2), (), act


def step_constrained(params: ModelParams, state: State, tau, active, dt: float) -> ConstrainedStep:
    """RK4 step with the active contacts held closed; releases contacts with lambda < 0."""
    tau = np.asarray(tau, dtype=float)
    lam, act, released = contact_forces(params, state, tau, active)
    if not act:
        return ConstrainedStep(step_free(params, state, tau, dt), lam, (), released)
    qn, qdn = _rk4(lambda q, v: constrained_accel(params, q, v, tau, act)[0], state.q, state.qdot, dt)
    _check(qn, qdn)
    qn, qdn = project_to_contacts(params, qn, qdn, act)
    return ConstrainedStep(State(qn, qdn), lam, act, released)


def advance(params, state, tau, active, dt):
    if active:
        return step_constrained(params, state, tau, active, dt)
    return ConstrainedStep(step_free(params, state, tau, dt), np.zeros(2), (), ())


# -- event detection -------------------------------------------------------------

def hermite_positions(state_before: State, state_after: State, dt: float, s: float) -> np.ndarray:
    """Cubic Hermite interpolant of q at time ``s`` in ``[0, dt]``."""
    u = s / dt
    h00 = 2 * u**3 - 3 * u**2 + 1
    h10 = u**3 - 2 * u**2 + u
    h01 = -2 * u**3 + 3 * u**2
    h11 = u**3 - u**2
    return (h00 * state_before.q + h10 * dt * state_before.qdot
            + h01 * state_after.q + h11 * dt * state_after.qdot)


def detect_event(params: ModelParams, state_before: State, state_after: State, dt: float,
                 tol: float = 1e-9, candidates=(0, 1), gap_fn: Optional[Callable] = None):
    """Earliest gap crossing of the candidate contacts within the step.

    Returns ``None`` or ``(indices, s)`` with ``s`` in ``[0, dt]`` such that
    every returned gap lies in ``[-tol, tol]`` at ``s`` (the first-crossing gap
    in ``[0, tol]``).  Crossings within tolerance of each other come back
    together.
    """
    gap_fn = gap_fn or (lambda q: gap_values(params, q))
    g0 = gap_fn(state_before.q)
    g1 = gap_fn(state_after.q)
    crossing = {}
    for i in candidates:
        if g1[i] > 0.0:
            continue
        if g0[i] <= 0.0:
            if g1[i] < g0[i]:
                crossing[i] = 0.0
            continue
        lo, hi = 0.0, dt
        glo = g0[i]
        for _ in range(200):
            if glo <= tol or hi - lo <= 1e-16 * max(1.0, dt):
                break
            mid = 0.5 * (lo + hi)
            gm = gap_fn(hermite_positions(state_before, state_after, dt, mid))[i]
            if gm > 0.0:
                lo, glo = mid, gm
            else:
                hi = mid
        crossing[i] = lo
    if not crossing:
        return None
    s = min(crossing.values())
    g_at = gap_fn(hermite_positions(state_before, state_after, dt, s))
    hits = tuple(sorted(i for i in candidates if crossing.get(i) == s or g_at[i] <= tol))
    return hits, s


# -- closed loop -----------------------------------------------------------------

def observation(params: ModelParams, state: State, active) -> ContactObservation:
    geo = contact_geometry(params, state)
    g = geo.gaps.copy()
    r = geo.JN @ state.qdot
    for i in active:
        g[i] = min(g[i], 0.0)
    return ContactObservation(gaps=g, rates=r)


def log_row(params: ModelParams, refs: ReferenceBundle, t: float, state: State, lam, out: ControlOutput,
            extra=()) -> list:
    kin = task_jacobians(params, state.q, state.qdot)
    geo = contact_geometry(params, state)
    v = kin.Jp @ state.qdot
    thd = float((kin.Jtheta @ state.qdot)[0])
    pa, va, _ = refs.ante(t)
    tha, thda, _ = refs.ante_theta(t)
    pp, vp, _ = refs.post(t)
    return [t, *state.q, *state.qdot, *kin.p, kin.theta, *v, thd,
            *geo.gaps, *(geo.JN @ state.qdot), *lam, *out.tau_star,
            float(int(out.mode)), out.cost, out.qp.kkt_residual,
            *pa, *va, tha, thda, *pp, *vp, *extra]


def initial_state(refs: ReferenceBundle, config: SimConfig) -> State:
    q0 = refs.q_start.copy()
    q0[3] = refs.plank_nominal[0] + config.initial_plank_offset()
    return State(q0, np.zeros(4))


def run_rigid(params: ModelParams, config: SimConfig, refs: ReferenceBundle,
              controller: Optional[Controller] = None, raise_errors: bool = True) -> SimLog:
    """Closed-loop rigid simulation.

    On failure the partial log is kept; it is returned with ``log.error`` set
    when ``raise_errors`` is False, otherwise the exception propagates.
    """
    controller = controller or Controller(params, refs, config.controller_config())
    t_end = refs.t_end if config.t_end is None else config.t_end
    log = SimLog(model="rigid", columns=RIGID_COLUMNS,
                 meta={"strategy": controller.strategy.value, "plank_offset": config.initial_plank_offset(),
                       "step": config.step, "control_dt": config.control_dt})
    state = initial_state(refs, config)
    active: tuple[int, ...] = ()
    n_ctrl = int(round(t_end / config.control_dt))
    n_sub = int(round(config.control_dt / config.step))
    try:
        if np.any(gap_values(params, state.q) <= 0):
            raise ValueError("initial configuration is already in contact")
        for k in range(n_ctrl + 1):
            t = k * config.control_dt
            out = controller.command(t, state, observation(params, state, active))
            tau = out.tau_star
            lam, active_now, released = contact_forces(params, state, tau, active)
            for i in released:
                log.events.append(Event(t, "release", (i,)))
            active = active_now
            log.append(log_row(params, refs, t, state, lam, out))
            if k == n_ctrl:
                break
            for j in range(n_sub):
                t0 = t + j * config.step
                state, active = _substep(params, config, controller, log, state, tau, active, t0, config.step)
    except Exception as exc:  # keep what was simulated
        log.error = f"{type(exc).__name__}: {exc}"
        if raise_errors:
            raise
    finally:
        log.meta["switch_times"] = {m.name: v for m, v in controller.switch_times.items()}
        log.meta["max_kkt"] = controller.max_kkt
    return log


def _substep(params, config, controller, log, state, tau, active, t0, dt):
    remaining, elapsed = dt, 0.0
    for _ in range(16):
        res = advance(params, state, tau, active, remaining)
        for i in res.released:
            log.events.append(Event(t0 + elapsed, "release", (i,)))
        active = res.active
        open_ = tuple(i for i in (0, 1) if i not in active)
        ev = detect_event(params, state, res.state, remaining, config.event_tol, open_) if open_ else None
        if ev is None:
            return res.state, active
        hits, s = ev
        if s > 0.0:
            part = advance(params, state, tau, active, s)
            state, active = part.state, part.active
        t_ev = t0 + elapsed + s
        closing = tuple(i for i in hits if i not in active)
        geo = contact_geometry(params, state)
        rates = geo.JN @ state.qdot
        closing += tuple(i for i in open_ if i not in closing
                         and geo.gaps[i] <= config.simultaneity_tol and rates[i] < 0.0)
        closing = tuple(sorted(closing))
        # resting re-contacts (not approaching) join without an impulse
        resting = tuple(i for i in closing if rates[i] >= 0.0)
        if resting:
            active = tuple(sorted(set(active) | set(resting)))
            log.events.append(Event(t_ev, "contact", resting))
            closing = tuple(i for i in closing if i not in resting)
            if not closing:
                controller.observe(t_ev, observation(params, state, active))
                elapsed += s
                remaining -= s
                if remaining <= 1e-15:
                    return state, active
                continue
        if config.impact_law == "unilateral":
            imp = resolve_impact(params, state, active, closing)
        else:
            imp = impact_map(params, state, tuple(active) + closing)
        T_minus = kinetic_energy(params, state.q, state.qdot)
        new_active = tuple(sorted(imp.active))
        q, qdot = project_to_contacts(params, state.q, imp.qdot_post, new_active)
        state = State(q, qdot)
        impulse = np.zeros(2)
        impulse[list(imp.active)] = imp.impulse
        log.events.append(Event(t_ev, "impact", closing, impulse, T_minus,
                                kinetic_energy(params, state.q, state.qdot)))
        active = new_active
        controller.observe(t_ev, observation(params, state, active))
        elapsed += s
        remaining -= s
        if remaining <= 1e-15:
            return state, active
    raise RuntimeError("too many events within one integrator step")

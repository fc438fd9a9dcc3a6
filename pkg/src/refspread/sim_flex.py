"""Flexible-joint arm with compliant contact, driven by the same controllers.

Per joint the drive is a motor inertia B coupled to the link through a
spring-damper (K, D).  The low-level law shapes the motor torque so that the
transmission torque follows the QP command tau* as if the motor inertia were
B_theta.  Contact forces come from the exponentially extended Hunt-Crossley
law, evaluated at every right-hand-side call.

The right-hand side is written with scalar arithmetic in absolute link angles
(see ``mechanics``); at 1 us steps the simulation makes a few million calls,
so avoiding small-array numpy overhead is what keeps a run near a minute.
"""
from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .contact import contact_geometry, hunt_crossley_force
from .control import ContactObservation, Controller
from .errors import NonFiniteState
from .mechanics import _bias, gravity_vector, mass_matrix
from .params import FlexState, ModelParams, State
from .reference import ReferenceBundle
from .sim_rigid import SimConfig, initial_state, log_row
from .simlog import FLEX_COLUMNS, Event, SimLog


def low_level_torque(params: ModelParams, fstate: FlexState, tau_star) -> np.ndarray:
    """``tau = B B_theta^-1 tau* + (I - B B_theta^-1)(tau_flex + D K^-1 tau_flex_dot)``."""
    ratio = np.asarray(params.motor_inertia) / np.asarray(params.desired_motor_inertia)
    trans = fstate.tau_flex(params) + np.asarray(params.joint_damping) * (fstate.thetadot_rob - fstate.qdot[:3])
    return ratio * np.asarray(tau_star, dtype=float) + (1.0 - ratio) * trans


def contact_forces(params: ModelParams, state: State, hc_rate: str = "penetration") -> np.ndarray:
    """Hunt-Crossley force of each corner.

    ``hc_rate='gap'`` passes the gap rate ``J_N qdot`` to the force law;
    ``'penetration'`` passes its negative, so compression uses the damped
    linear branch.
    """
    geo = contact_geometry(params, state)
    rates = geo.JN @ state.qdot
    sign = -1.0 if hc_rate == "penetration" else 1.0
    return np.array([hunt_crossley_force(params, g, sign * r) for g, r in zip(geo.gaps, rates)])


def flex_dynamics(params: ModelParams, fstate: FlexState, tau_command, lam) -> FlexState:
    """Time derivative of the flexible state for a motor torque and contact forces.

    Link side: ``M qddot + h = S (tau_flex + D K^-1 tau_flex_dot) + J_N^T lam``;
    motor side: ``B thetaddot = -(tau_flex + D K^-1 tau_flex_dot) + tau``.
    """
    q, qdot = fstate.q, fstate.qdot
    trans = fstate.tau_flex(params) + np.asarray(params.joint_damping) * (fstate.thetadot_rob - qdot[:3])
    rhs = -_bias(params, q, qdot)
    rhs[:3] += trans
    lam = np.asarray(lam, dtype=float)
    if np.any(lam != 0.0):
        rhs += contact_geometry(params, State(q, qdot)).JN.T @ lam
    qddot = np.linalg.solve(mass_matrix(params, q), rhs)
    thddot = (np.asarray(tau_command, dtype=float) - trans) / np.asarray(params.motor_inertia)
    return FlexState(qdot, qddot, fstate.thetadot_rob, thddot)


class FlexRHS:
    """Closed-loop right-hand side with the low-level law and contact inside.

    ``self(x, tau_star)`` returns dx/dt for the 14-vector
    ``[q, qdot, theta_rob, thetadot_rob]``.
    """

    def __init__(self, params: ModelParams, hc_rate: str = "penetration"):
        A, G = params.chain_coefficients
        self.A = [[float(A[j, k]) for k in range(3)] for j in range(3)]
        self.G = [float(g) for g in G]
        self.Ig = [float(v) for v in params.link_inertias]
        self.L = [float(v) for v in params.link_lengths]
        self.g = float(params.gravity)
        self.I4 = float(params.plank_inertia_hinge)
        self.k4 = float(params.hinge_stiffness)
        self.d4 = float(params.hinge_damping)
        self.q4rest = float(params.plank_rest_angle)
        self.hx, self.hy = (float(v) for v in params.hinge_offset)
        self.half = 0.5 * float(params.ee_face_width)
        self.hw4 = 0.5 * float(params.plank_thickness)
        self.K = [float(v) for v in params.joint_stiffness]
        self.D = [float(v) for v in params.joint_damping]
        self.B = [float(v) for v in params.motor_inertia]
        self.ratio = [b / bt for b, bt in zip(params.motor_inertia, params.desired_motor_inertia)]
        self.kenv = float(params.contact_stiffness)
        self.denv = float(params.contact_damping)
        self.cexp = float(params.contact_exponent)
        self.rate_sign = -1.0 if hc_rate == "penetration" else 1.0
        self.last_lam = (0.0, 0.0)

    def _hc(self, gap, rate):
        if gap > 0.0:
            return 0.0
        r = self.rate_sign * rate
        if r >= 0.0:
            stiff = self.kenv + self.denv * r
        else:
            stiff = self.kenv * math.exp(self.denv / self.kenv * r)
        f = stiff * (-gap) ** self.cexp
        return f if f > 0.0 else 0.0

    def gaps_rates(self, x):
        """Corner gaps and gap rates ``J_N qdot`` (scalar path)."""
        q1, q2, q3, q4, v1, v2, v3, v4 = x[:8]
        L = self.L
        p2 = q1 + q2
        p3 = p2 + q3
        pd2 = v1 + v2
        pd3 = pd2 + v3
        c1, s1, c2, s2 = math.cos(q1), math.sin(q1), math.cos(p2), math.sin(p2)
        c3, s3, c4, s4 = math.cos(p3), math.sin(p3), math.cos(q4), math.sin(q4)
        px = L[0] * c1 + L[1] * c2 + L[2] * c3
        py = L[0] * s1 + L[1] * s2 + L[2] * s3
        vx = -L[0] * s1 * v1 - L[1] * s2 * pd2 - L[2] * s3 * pd3
        vy = L[0] * c1 * v1 + L[1] * c2 * pd2 + L[2] * c3 * pd3
        gaps, rates = [], []
        for s in (-1.0, 1.0):
            sh = s * self.half
            rx = px + sh * c3 - self.hx
            ry = py + sh * s3 - self.hy
            gaps.append(-s4 * rx + c4 * ry - self.hw4)
            rates.append(-s4 * (vx - sh * s3 * pd3) + c4 * (vy + sh * c3 * pd3) - (c4 * rx + s4 * ry) * v4)
        return gaps, rates

    def __call__(self, x, tau_star):
        q1, q2, q3, q4, v1, v2, v3, v4, th1, th2, th3, w1, w2, w3 = x
        A, L, G = self.A, self.L, self.G
        p1 = q1
        p2 = q1 + q2
        p3 = p2 + q3
        pd1 = v1
        pd2 = v1 + v2
        pd3 = pd2 + v3
        c1, s1 = math.cos(p1), math.sin(p1)
        c2, s2 = math.cos(p2), math.sin(p2)
        c3, s3 = math.cos(p3), math.sin(p3)

        # transmission torque, joint space
        t1 = self.K[0] * (th1 - q1) + self.D[0] * (w1 - v1)
        t2 = self.K[1] * (th2 - q2) + self.D[1] * (w2 - v2)
        t3 = self.K[2] * (th3 - q3) + self.D[2] * (w3 - v3)

        # contact
        c4, s4 = math.cos(q4), math.sin(q4)
        px = L[0] * c1 + L[1] * c2 + L[2] * c3
        py = L[0] * s1 + L[1] * s2 + L[2] * s3
        vx = -L[0] * s1 * pd1 - L[1] * s2 * pd2 - L[2] * s3 * pd3
        vy = L[0] * c1 * pd1 + L[1] * c2 * pd2 + L[2] * c3 * pd3
        nx, ny = -s4, c4
        Qc1 = Qc2 = Qc3 = Q4 = 0.0
        lams = []
        for s in (-1.0, 1.0):
            sh = s * self.half
            rx = px + sh * c3 - self.hx
            ry = py + sh * s3 - self.hy
            gap = nx * rx + ny * ry - self.hw4
            if gap > 0.0:
                lams.append(0.0)
                continue
            cvx = vx - sh * s3 * pd3
            cvy = vy + sh * c3 * pd3
            # d/dt (n4 . r) with n4dot = -t4 q4dot
            rate = nx * cvx + ny * cvy - (c4 * rx + s4 * ry) * v4
            lam = self._hc(gap, rate)
            lams.append(lam)
            fx, fy = lam * nx, lam * ny
            # generalized forces in absolute link angles
            Qc1 += L[0] * (-s1 * fx + c1 * fy)
            Qc2 += L[1] * (-s2 * fx + c2 * fy)
            Qc3 += (L[2] + sh) * (-s3 * fx + c3 * fy)
            Q4 += -lam * (c4 * rx + s4 * ry)
        self.last_lam = (lams[0], lams[1])

        # arm: Mphi phiddot = T^-T (tau_trans) + Qc - cor - grav
        c12 = math.cos(p1 - p2)
        c13 = math.cos(p1 - p3)
        c23 = math.cos(p2 - p3)
        s12 = math.sin(p1 - p2)
        s13 = math.sin(p1 - p3)
        s23 = math.sin(p2 - p3)
        m11 = A[0][0] + self.Ig[0]
        m22 = A[1][1] + self.Ig[1]
        m33 = A[2][2] + self.Ig[2]
        m12 = A[0][1] * c12
        m13 = A[0][2] * c13
        m23 = A[1][2] * c23
        w1s, w2s, w3s = pd1 * pd1, pd2 * pd2, pd3 * pd3
        cor1 = A[0][1] * s12 * w2s + A[0][2] * s13 * w3s
        cor2 = -A[0][1] * s12 * w1s + A[1][2] * s23 * w3s
        cor3 = -A[0][2] * s13 * w1s - A[1][2] * s23 * w2s
        g = self.g
        r1 = (t1 - t2) + Qc1 - cor1 - g * G[0] * c1
        r2 = (t2 - t3) + Qc2 - cor2 - g * G[1] * c2
        r3 = t3 + Qc3 - cor3 - g * G[2] * c3
        # symmetric 3x3 solve by cofactors
        a11 = m22 * m33 - m23 * m23
        a12 = m13 * m23 - m12 * m33
        a13 = m12 * m23 - m13 * m22
        a22 = m11 * m33 - m13 * m13
        a23 = m12 * m13 - m11 * m23
        a33 = m11 * m22 - m12 * m12
        det = m11 * a11 + m12 * a12 + m13 * a13
        f1 = (a11 * r1 + a12 * r2 + a13 * r3) / det
        f2 = (a12 * r1 + a22 * r2 + a23 * r3) / det
        f3 = (a13 * r1 + a23 * r2 + a33 * r3) / det
        a4 = (Q4 - self.k4 * (q4 - self.q4rest) - self.d4 * v4) / self.I4

        # motor side with the low-level law
        ts1, ts2, ts3 = tau_star
        rt = self.ratio
        u1 = rt[0] * ts1 + (1.0 - rt[0]) * t1
        u2 = rt[1] * ts2 + (1.0 - rt[1]) * t2
        u3 = rt[2] * ts3 + (1.0 - rt[2]) * t3
        return np.array((v1, v2, v3, v4, f1, f2 - f1, f3 - f2, a4,
                         w1, w2, w3,
                         (u1 - t1) / self.B[0], (u2 - t2) / self.B[1], (u3 - t3) / self.B[2]))


def rk4_step(rhs: FlexRHS, x: np.ndarray, tau_star, dt: float) -> np.ndarray:
    k1 = rhs(x, tau_star)
    k2 = rhs(x + 0.5 * dt * k1, tau_star)
    k3 = rhs(x + 0.5 * dt * k2, tau_star)
    k4 = rhs(x + dt * k3, tau_star)
    xn = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(xn)):
        raise NonFiniteState("flexible state became non-finite")
    return xn


def initial_flex_state(params: ModelParams, refs: ReferenceBundle, config: SimConfig) -> FlexState:
    """Rigid initial pose with the drives pre-deflected to carry gravity."""
    st = initial_state(refs, config)
    grav = gravity_vector(params, st.q)
    theta = st.q[:3] + grav / np.asarray(params.joint_stiffness)
    return FlexState(st.q, st.qdot, theta, np.zeros(3))


def run_flex(params: ModelParams, config: SimConfig, refs: ReferenceBundle,
             controller: Optional[Controller] = None, raise_errors: bool = True) -> SimLog:
    """Closed-loop flexible simulation with the step schedule of ``config``.

    The integrator uses ``config.fine_step`` whenever a corner is within
    ``config.contact_guard`` of the plank, else ``config.step``.  A coarse
    step that would end in contact is redone with fine steps.
    """
    controller = controller or Controller(params, refs, config.controller_config())
    t_end = refs.t_end if config.t_end is None else config.t_end
    log = SimLog(model="flexible", columns=FLEX_COLUMNS,
                 meta={"strategy": controller.strategy.value, "plank_offset": config.initial_plank_offset(),
                       "step": config.step, "fine_step": config.fine_step,
                       "control_dt": config.control_dt, "hc_rate": config.hc_rate})
    rhs = FlexRHS(params, config.hc_rate)
    fs = initial_flex_state(params, refs, config)
    x = fs.to_vector()
    n_ctrl = int(round(t_end / config.control_dt))
    n_coarse = int(round(config.control_dt / config.step))
    n_fine = int(round(config.control_dt / config.fine_step))
    fine_ratio = n_fine // n_coarse
    kstats = {"fine_steps": 0, "coarse_steps": 0}
    in_contact = [False, False]
    last_step = config.step
    try:
        for k in range(n_ctrl + 1):
            t = k * config.control_dt
            gaps, rates = rhs.gaps_rates(x)
            state = State(x[:4], x[4:8])
            out = controller.command(t, state, ContactObservation(np.array(gaps), np.array(rates)))
            tau_star = tuple(float(v) for v in out.tau_star)
            rhs(x, tau_star)
            lam = np.array(rhs.last_lam)
            fs = FlexState.from_vector(x)
            log.append(log_row(params, refs, t, state, lam, out,
                               extra=(*fs.theta_rob, *fs.tau_flex(params), last_step)))
            if k == n_ctrl:
                break
            for j in range(n_coarse):
                t0 = t + j * config.step
                if min(gaps) >= config.contact_guard:
                    xn = rk4_step(rhs, x, tau_star, config.step)
                    gn, _ = rhs.gaps_rates(xn)
                    if min(gn) > 0.0:
                        x, gaps = xn, gn
                        kstats["coarse_steps"] += 1
                        last_step = config.step
                        continue
                for i in range(fine_ratio):
                    x = rk4_step(rhs, x, tau_star, config.fine_step)
                    kstats["fine_steps"] += 1
                    gaps, rates = rhs.gaps_rates(x)
                    ts = t0 + (i + 1) * config.fine_step
                    for c in (0, 1):
                        closed = gaps[c] <= 0.0
                        if closed != in_contact[c]:
                            log.events.append(Event(ts, "impact" if closed else "release", (c,)))
                            in_contact[c] = closed
                    controller.observe(ts, ContactObservation(np.array(gaps), np.array(rates)))
                last_step = config.fine_step
    except Exception as exc:
        log.error = f"{type(exc).__name__}: {exc}"
        if raise_errors:
            raise
    finally:
        log.meta["switch_times"] = {m.name: v for m, v in controller.switch_times.items()}
        log.meta["max_kkt"] = controller.max_kkt
        log.meta.update(kstats)
    return log

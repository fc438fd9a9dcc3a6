"""Task-space QP controllers for the ante-impact, intermediate and post-impact
phases, the mode supervisor, and the two comparison strategies.

Decision vector layout: ``x = [qddot (4), tau (3)]`` for the ante and
intermediate QPs, ``x = [qddot (4), tau (3), lambda (2)]`` for the post QP.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Optional

import numpy as np

from .contact import contact_geometry
from .errors import Infeasible, SingularTaskJacobian
from .mechanics import _bias, actuation_matrix, forward_kinematics, mass_matrix, task_jacobians
from .params import ModelParams, State
from .qpsolve import ActiveSetSolver, QpProblem, QpSolution
from .reference import IK_COND_MAX, ReferenceBundle

_S = actuation_matrix()


class ControlMode(IntEnum):
    ANTE = 0
    INTERMEDIATE = 1
    POST = 2


class Strategy(str, Enum):
    RS_WITH_INTERMEDIATE = "rs_intermediate"
    RS_NO_INTERMEDIATE = "rs_no_intermediate"
    NO_RS = "no_rs"

    @classmethod
    def parse(cls, value) -> "Strategy":
        if isinstance(value, cls):
            return value
        aliases = {
            "rs_with_intermediate": cls.RS_WITH_INTERMEDIATE,
            "rs_intermediate": cls.RS_WITH_INTERMEDIATE,
            "rs_no_intermediate": cls.RS_NO_INTERMEDIATE,
            "no_rs": cls.NO_RS,
        }
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown strategy {value!r}; choose from {sorted(aliases)}") from None


ALL_STRATEGIES = (Strategy.RS_WITH_INTERMEDIATE, Strategy.RS_NO_INTERMEDIATE, Strategy.NO_RS)


@dataclass(frozen=True)
class ControllerConfig:
    strategy: Strategy = Strategy.RS_WITH_INTERMEDIATE
    dt: float = 1e-3
    epsilon: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy.parse(self.strategy))
        if self.dt <= 0 or self.epsilon <= 0:
            raise ValueError("dt and epsilon must be positive")


@dataclass
class ContactObservation:
    gaps: np.ndarray
    rates: np.ndarray


@dataclass
class ControlOutput:
    tau_star: np.ndarray
    qddot_star: np.ndarray
    lambda_star: np.ndarray
    mode: ControlMode
    qp: QpSolution
    cost: float
    form: str = ""


# -- QP assembly ---------------------------------------------------------------

def _task_error_offset(kin, qdot, target, gain, velocity_feedback=True):
    """eta in ``e = J qddot + eta`` for a critically damped PD task."""
    p_d, v_d, a_d = target
    eta = kin[1] @ qdot - a_d - gain**2 * (p_d - kin[0])
    if velocity_feedback:
        eta = eta - 2.0 * gain * (v_d - kin[2] @ qdot)
    return eta


def _quadratic_task(n, J, eta, w, cols=slice(0, 4)):
    """``w ||J x[cols] + eta||^2`` as ``(H, f, const)`` in the 0.5 x'Hx + f'x form."""
    H = np.zeros((n, n))
    f = np.zeros(n)
    H[cols, cols] = 2.0 * w * J.T @ J
    f[cols] = 2.0 * w * J.T @ eta
    return H, f, w * float(eta @ eta)


def _ante_like_qp(params, q, qdot_used, pos_target, orient_target, velocity_feedback, solver, form,
                  mode=ControlMode.ANTE):
    kin = task_jacobians(params, q, qdot_used)
    th = np.array([kin.theta])
    eta_p = _task_error_offset((kin.p, kin.Jp_dot, kin.Jp), qdot_used, pos_target, params.k_p,
                               velocity_feedback)
    ot = tuple(np.atleast_1d(v) for v in orient_target)
    eta_th = _task_error_offset((th, kin.Jtheta_dot, kin.Jtheta), qdot_used, ot, params.k_theta,
                                velocity_feedback)
    Hp, fp, cp = _quadratic_task(7, kin.Jp, eta_p, params.w_p)
    Ht, ft, ct = _quadratic_task(7, kin.Jtheta, eta_th, params.w_theta)
    M = mass_matrix(params, q)
    h = _bias(params, q, qdot_used)
    Aeq = np.hstack([M, -_S])
    prob = QpProblem(Hp + Ht, fp + ft, Aeq, -h)
    sol = solver.solve(prob)
    x = sol.x
    return ControlOutput(tau_star=x[4:7].copy(), qddot_star=x[:4].copy(), lambda_star=np.zeros(2),
                         mode=mode, qp=sol, cost=sol.objective + cp + ct, form=form)


def ante_qp(params: ModelParams, state: State, refs: ReferenceBundle, t: float,
            solver: Optional[ActiveSetSolver] = None) -> ControlOutput:
    solver = solver or ActiveSetSolver()
    return _ante_like_qp(params, state.q, state.qdot, refs.ante(t), refs.ante_theta(t), True, solver,
                         "ante")


def intermediate_velocity(params: ModelParams, q, refs: ReferenceBundle, t: float) -> np.ndarray:
    """Joint velocity implied by the ante-impact reference at the measured q."""
    kin = task_jacobians(params, q, np.zeros(4))
    J = kin.J_task_rob
    if np.linalg.cond(J) > IK_COND_MAX:
        raise SingularTaskJacobian("stacked task Jacobian is singular")
    _, v_d, _ = refs.ante(t)
    _, thd_d, _ = refs.ante_theta(t)
    return np.append(np.linalg.solve(J, np.append(v_d, thd_d)), refs.plank_nominal[1])


def intermediate_qp(params: ModelParams, q, refs: ReferenceBundle, t: float,
                    solver: Optional[ActiveSetSolver] = None) -> ControlOutput:
    """Ante-impact QP with measured velocities replaced by reference velocities.

    Takes positions only; the velocity-feedback term vanishes identically so
    it is dropped from the task error.
    """
    solver = solver or ActiveSetSolver()
    q = np.asarray(q, dtype=float)
    qdot_itmd = intermediate_velocity(params, q, refs, t)
    return _ante_like_qp(params, q, qdot_itmd, refs.ante(t), refs.ante_theta(t), False, solver,
                         "intermediate", ControlMode.INTERMEDIATE)


def post_qp(params: ModelParams, state: State, refs: ReferenceBundle, t: float,
            solver: Optional[ActiveSetSolver] = None) -> ControlOutput:
    """Post-impact QP assuming both contacts closed; equal force sharing task."""
    solver = solver or ActiveSetSolver()
    q, qdot = state.q, state.qdot
    kin = task_jacobians(params, q, qdot)
    geo = contact_geometry(params, state)
    eta_p = _task_error_offset((kin.p, kin.Jp_dot, kin.Jp), qdot, refs.post(t), params.k_p)
    Hp, fp, cp = _quadratic_task(9, kin.Jp, eta_p, params.w_p)
    Hl = np.zeros((9, 9))
    Hl[7:, 7:] = 2.0 * params.w_lambda * np.array([[1.0, -1.0], [-1.0, 1.0]])
    M = mass_matrix(params, q)
    h = _bias(params, q, qdot)
    Aeq = np.vstack([
        np.hstack([M, -_S, -geo.JN.T]),
        np.hstack([geo.JN, np.zeros((2, 5))]),
    ])
    beq = np.concatenate([-h, -geo.JN_dot @ qdot])
    Aineq = np.hstack([np.zeros((2, 7)), np.eye(2)])
    sol = solver.solve(QpProblem(Hp + Hl, fp, Aeq, beq, Aineq, np.zeros(2)))
    x = sol.x
    return ControlOutput(tau_star=x[4:7].copy(), qddot_star=x[:4].copy(), lambda_star=x[7:9].copy(),
                         mode=ControlMode.POST, qp=sol, cost=sol.objective + cp, form="post")


def post_tracking_qp(params: ModelParams, state: State, refs: ReferenceBundle, t: float,
                     solver: Optional[ActiveSetSolver] = None) -> ControlOutput:
    """Fallback: post-impact position PD without contact constraints.

    The ante orientation reference keeps the allocation unique.
    """
    solver = solver or ActiveSetSolver()
    out = _ante_like_qp(params, state.q, state.qdot, refs.post(t), refs.ante_theta(t), True, solver,
                        "post_fallback", ControlMode.POST)
    return out


# -- supervision ---------------------------------------------------------------

def supervise(config: ControllerConfig, previous_mode: ControlMode,
              observation: ContactObservation) -> ControlMode:
    """Monotone Ante -> Intermediate -> Post switching on gap observations."""
    gaps = np.asarray(observation.gaps)
    rates = np.asarray(observation.rates)
    mode = ControlMode(previous_mode)
    if mode == ControlMode.ANTE and np.any(gaps <= 0.0):
        mode = ControlMode.INTERMEDIATE
    if mode == ControlMode.INTERMEDIATE and np.all((gaps <= 0.0) & (np.abs(rates) <= config.epsilon)):
        mode = ControlMode.POST
    return mode


def baseline_mode(config: ControllerConfig, previous_mode: ControlMode, refs: ReferenceBundle,
                  t: float, observation: Optional[ContactObservation]) -> ControlMode:
    """Two-mode switching of the comparison strategies."""
    if previous_mode == ControlMode.POST:
        return ControlMode.POST
    if config.strategy == Strategy.NO_RS:
        return ControlMode.POST if t >= refs.t_imp else ControlMode.ANTE
    if observation is not None and np.any(np.asarray(observation.gaps) <= 0.0):
        return ControlMode.POST
    return ControlMode.ANTE


def baseline_controller(params: ModelParams, config: ControllerConfig, state: State,
                        refs: ReferenceBundle, t: float, mode: ControlMode,
                        solver: Optional[ActiveSetSolver] = None) -> ControlOutput:
    """Ante QP in Ante mode, post QP (with full velocity feedback) otherwise."""
    solver = solver or ActiveSetSolver()
    if mode == ControlMode.ANTE:
        return ante_qp(params, state, refs, t, solver)
    try:
        return post_qp(params, state, refs, t, solver)
    except Infeasible:
        return post_tracking_qp(params, state, refs, t, solver)


class Controller:
    """Stateful controller: current mode plus a warm-started QP solver.

    ``observe`` is the supervisor notification (called at control samples and
    at impact events); ``command`` computes the torque for the current mode.
    """

    def __init__(self, params: ModelParams, refs: ReferenceBundle, config: ControllerConfig):
        self.params = params
        self.refs = refs
        self.config = config
        self.mode = ControlMode.ANTE
        self.switch_times: dict[ControlMode, float] = {ControlMode.ANTE: 0.0}
        self.solver = ActiveSetSolver()
        self.max_kkt = 0.0
        self.calls = 0

    @property
    def strategy(self) -> Strategy:
        return self.config.strategy

    def observe(self, t: float, observation: Optional[ContactObservation]) -> ControlMode:
        if self.strategy == Strategy.RS_WITH_INTERMEDIATE:
            new = self.mode if observation is None else supervise(self.config, self.mode, observation)
        else:
            new = baseline_mode(self.config, self.mode, self.refs, t, observation)
        if new != self.mode:
            # baselines jump Ante -> Post without an Intermediate phase
            passed = [m for m in ControlMode if self.mode < m <= new]
            if self.strategy != Strategy.RS_WITH_INTERMEDIATE:
                passed = [new]
            for m in passed:
                self.switch_times.setdefault(m, t)
            self.mode = new
        return self.mode

    def command(self, t: float, state: State, observation: Optional[ContactObservation] = None) -> ControlOutput:
        self.observe(t, observation)
        p, refs, solver = self.params, self.refs, self.solver
        if self.strategy == Strategy.RS_WITH_INTERMEDIATE:
            if self.mode == ControlMode.ANTE:
                out = ante_qp(p, state, refs, t, solver)
            elif self.mode == ControlMode.INTERMEDIATE:
                out = intermediate_qp(p, state.q, refs, t, solver)
            else:
                try:
                    out = post_qp(p, state, refs, t, solver)
                except Infeasible:
                    out = post_tracking_qp(p, state, refs, t, solver)
        else:
            out = baseline_controller(p, self.config, state, refs, t, self.mode, solver)
        self.calls += 1
        self.max_kkt = max(self.max_kkt, out.qp.kkt_residual)
        return out

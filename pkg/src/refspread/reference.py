"""Impact-consistent extended ante-/post-impact task references.

The ante-impact position and orientation references are quintics from the
start pose (at rest) to the nominal impact pose, reached at ``t_imp`` with the
approach velocity.  The post-impact position reference is a quintic from the
impact pose, leaving with the task velocity that the impact map produces, to a
rest pose on the plank.  Extension past (before) ``t_imp`` is plain
continuation of the ante (post) polynomial, so both are C2 everywhere.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import IO, NamedTuple

import numpy as np

from .contact import contact_geometry, impact_map
from .errors import NearSingular, SingularTaskJacobian, Unreachable
from .mechanics import forward_kinematics, task_jacobians
from .params import ModelParams, State

IK_COND_MAX = 1e8


class FacePose(NamedTuple):
    p: np.ndarray
    theta: float


class Quintic:
    """Vector quintic on ``[t0, t0 + T]`` with value/velocity/acceleration.

    Outside the interval the polynomial is continued, except on a side where
    ``hold_before``/``hold_after`` is set: there the boundary value is held
    (only sensible where the boundary velocity and acceleration are zero).
    """

    def __init__(self, t0, T, p0, v0, a0, p1, v1, a1, hold_before=False, hold_after=False):
        if T <= 0:
            raise ValueError("quintic duration must be positive")
        self.t0, self.T = float(t0), float(T)
        p0, v0, a0, p1, v1, a1 = (np.atleast_1d(np.asarray(x, dtype=float)) for x in (p0, v0, a0, p1, v1, a1))
        h = p1 - p0
        c = np.zeros((6, p0.size))
        c[0], c[1], c[2] = p0, v0, 0.5 * a0
        c[3] = (20 * h - (8 * v1 + 12 * v0) * T - (3 * a0 - a1) * T**2) / (2 * T**3)
        c[4] = (-30 * h + (14 * v1 + 16 * v0) * T + (3 * a0 - 2 * a1) * T**2) / (2 * T**4)
        c[5] = (12 * h - 6 * (v1 + v0) * T + (a1 - a0) * T**2) / (2 * T**5)
        self.coeffs = c
        self.hold_before, self.hold_after = hold_before, hold_after

    @property
    def t1(self) -> float:
        return self.t0 + self.T

    def __call__(self, t) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        s = float(t) - self.t0
        if self.hold_before and s < 0.0:
            s = 0.0
        if self.hold_after and s > self.T:
            s = self.T
        c = self.coeffs
        pos = c[0] + s * (c[1] + s * (c[2] + s * (c[3] + s * (c[4] + s * c[5]))))
        vel = c[1] + s * (2 * c[2] + s * (3 * c[3] + s * (4 * c[4] + s * 5 * c[5])))
        acc = 2 * c[2] + s * (6 * c[3] + s * (12 * c[4] + s * 20 * c[5]))
        if (self.hold_before and float(t) < self.t0) or (self.hold_after and float(t) > self.t1):
            vel, acc = np.zeros_like(vel), np.zeros_like(acc)
        return pos, vel, acc


def flush_pose(params: ModelParams, distance: float, plank_angle: float) -> FacePose:
    """Face pose lying flat on the plank, midpoint ``distance`` along it from the hinge."""
    t4 = np.array([np.cos(plank_angle), np.sin(plank_angle)])
    n4 = np.array([-np.sin(plank_angle), np.cos(plank_angle)])
    p = params.hinge + distance * t4 + 0.5 * params.plank_thickness * n4
    return FacePose(p, float(plank_angle))


def inverse_kinematics(params: ModelParams, pose: FacePose, elbow_up: bool = True) -> np.ndarray:
    """Closed-form planar 3R inverse kinematics.

    Elbow-up means ``q2 <= 0``: with the wrist to the upper right of the base
    the elbow sits above the base-wrist line.
    """
    L1, L2, L3 = params.link_lengths
    p = np.asarray(pose.p, dtype=float)
    th = float(pose.theta)
    w = p - L3 * np.array([np.cos(th), np.sin(th)])
    c2 = (w @ w - L1**2 - L2**2) / (2 * L1 * L2)
    if abs(c2) > 1.0:
        raise Unreachable(f"pose {p} / {th} is outside the workspace")
    q2 = -np.arccos(c2) if elbow_up else np.arccos(c2)
    q1 = np.arctan2(w[1], w[0]) - np.arctan2(L2 * np.sin(q2), L1 + L2 * np.cos(q2))
    q3 = th - q1 - q2
    q_rob = np.array([q1, q2, q3])
    J = task_jacobians(params, np.append(q_rob, 0.0), np.zeros(4)).J_task_rob
    if np.linalg.cond(J) > IK_COND_MAX:
        raise NearSingular("IK solution is (near) singular")
    return q_rob


def nominal_impact_configuration(params: ModelParams, target: FacePose, plank_nominal,
                                 elbow_up: bool = True) -> np.ndarray:
    q4 = float(plank_nominal[0])
    q = np.append(inverse_kinematics(params, target, elbow_up), q4)
    g = contact_geometry(params, State(q, np.zeros(4))).gaps
    if np.abs(g).max() > 1e-10:
        raise ValueError(f"target pose is not flush with the plank (gaps {g})")
    return q


def nominal_post_velocity(params: ModelParams, q_minus, ante_task_velocity, plank_rate):
    """Ante-impact joint velocity by inverse velocity kinematics, and its impact image."""
    pdot, thetadot = ante_task_velocity
    q_minus = np.asarray(q_minus, dtype=float)
    J = task_jacobians(params, q_minus, np.zeros(4)).J_task_rob
    if np.linalg.cond(J) > IK_COND_MAX:
        raise SingularTaskJacobian("stacked task Jacobian is singular at q-")
    qdot_minus = np.append(np.linalg.solve(J, np.append(pdot, thetadot)), plank_rate)
    qdot_plus = impact_map(params, State(q_minus, qdot_minus), (0, 1)).qdot_post
    return qdot_minus, qdot_plus


@dataclass(frozen=True)
class Scenario:
    """Nominal task of the experiment; only ``t_imp`` comes from the source study."""

    t_imp: float = 1.0
    t_end: float = 1.5
    impact_distance: float = 0.25
    plank_angle: float = 0.0
    plank_rate: float = 0.0
    approach_speed: float = 0.5
    start_offset: tuple[float, float] = (-0.05, 0.2)
    start_orientation_offset: float = 0.3
    post_duration: float = 1.0
    rest_plank_angle: float = -0.1
    rest_distance: float = 0.25
    elbow_up: bool = True

    def __post_init__(self):
        if not 0.0 < self.t_imp < self.t_end:
            raise ValueError("need 0 < t_imp < t_end")
        if self.approach_speed < 0 or self.post_duration <= 0:
            raise ValueError("approach speed must be >= 0 and post duration > 0")


@dataclass(frozen=True)
class ReferenceBundle:
    t_imp: float
    t_end: float
    ante_pos: Quintic
    ante_orient: Quintic
    post_pos: Quintic
    q_minus: np.ndarray
    qdot_minus: np.ndarray
    qdot_plus: np.ndarray
    plank_nominal: tuple[float, float]
    q_start: np.ndarray
    extras: dict = field(default_factory=dict)

    def ante(self, t):
        return self.ante_pos(t)

    def ante_theta(self, t):
        th, thd, thdd = self.ante_orient(t)
        return float(th[0]), float(thd[0]), float(thdd[0])

    def post(self, t):
        return self.post_pos(t)


def build_reference(params: ModelParams, start_pose: FacePose, impact_pose: FacePose,
                    approach_velocity, t_imp: float, t_end: float, plank_nominal,
                    rest_pose: FacePose, post_duration: float, elbow_up: bool = True) -> ReferenceBundle:
    """Assemble the extended references around ``t_imp``.

    ``approach_velocity`` is ``(pdot, thetadot)`` at the impact pose.
    """
    if not 0.0 < t_imp < t_end:
        raise ValueError("need 0 < t_imp < t_end")
    pdot_imp = np.asarray(approach_velocity[0], dtype=float)
    thdot_imp = float(approach_velocity[1])
    q_minus = nominal_impact_configuration(params, impact_pose, plank_nominal, elbow_up)
    qdot_minus, qdot_plus = nominal_post_velocity(params, q_minus, (pdot_imp, thdot_imp), plank_nominal[1])
    v_plus = task_jacobians(params, q_minus, qdot_plus).Jp @ qdot_plus

    z2, z1 = np.zeros(2), np.zeros(1)
    ante_pos = Quintic(0.0, t_imp, start_pose.p, z2, z2, impact_pose.p, pdot_imp, z2, hold_before=True)
    ante_orient = Quintic(0.0, t_imp, [start_pose.theta], z1, z1, [impact_pose.theta], [thdot_imp], z1,
                          hold_before=True)
    post_pos = Quintic(t_imp, post_duration, impact_pose.p, v_plus, z2, rest_pose.p, z2, z2, hold_after=True)
    q_start = np.append(inverse_kinematics(params, start_pose, elbow_up), plank_nominal[0])
    return ReferenceBundle(
        t_imp=float(t_imp), t_end=float(t_end), ante_pos=ante_pos, ante_orient=ante_orient,
        post_pos=post_pos, q_minus=q_minus, qdot_minus=qdot_minus, qdot_plus=qdot_plus,
        plank_nominal=(float(plank_nominal[0]), float(plank_nominal[1])), q_start=q_start,
        extras={"start_pose": start_pose, "impact_pose": impact_pose, "rest_pose": rest_pose},
    )


def scenario_reference(params: ModelParams, scenario: Scenario = Scenario()) -> ReferenceBundle:
    """Reference for a :class:`Scenario`: approach along the plank normal."""
    sc = scenario
    impact = flush_pose(params, sc.impact_distance, sc.plank_angle)
    n4 = np.array([-np.sin(sc.plank_angle), np.cos(sc.plank_angle)])
    # contact midpoint moves with the plank plus the normal approach
    rel = impact.p - params.hinge
    pdot = -sc.approach_speed * n4 + sc.plank_rate * np.array([-rel[1], rel[0]])
    start = FacePose(impact.p + np.asarray(sc.start_offset), impact.theta + sc.start_orientation_offset)
    rest = flush_pose(params, sc.rest_distance, sc.rest_plank_angle)
    return build_reference(params, start, impact, (pdot, sc.plank_rate), sc.t_imp, sc.t_end,
                           (sc.plank_angle, sc.plank_rate), rest, sc.post_duration, sc.elbow_up)


REFERENCE_COLUMNS = (
    "t",
    "ante_px", "ante_py", "ante_theta",
    "ante_vx", "ante_vy", "ante_thetadot",
    "ante_ax", "ante_ay", "ante_thetaddot",
    "post_px", "post_py", "post_vx", "post_vy", "post_ax", "post_ay",
)


def export_reference_csv(bundle: ReferenceBundle, fh: IO[str], dt: float = 1e-3) -> None:
    """Write both extended references on a uniform grid over ``[0, t_end]``."""
    n = int(round(bundle.t_end / dt))
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(REFERENCE_COLUMNS)
    for k in range(n + 1):
        t = k * dt
        pa, va, aa = bundle.ante(t)
        th, thd, thdd = bundle.ante_theta(t)
        pp, vp, ap = bundle.post(t)
        row = [t, pa[0], pa[1], th, va[0], va[1], thd, aa[0], aa[1], thdd,
               pp[0], pp[1], vp[0], vp[1], ap[0], ap[1]]
        w.writerow(["%.12e" % v for v in row])

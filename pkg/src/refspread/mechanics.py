"""Kinematics and smooth dynamics of the 3-link arm and the hinged plank.

Coordinates: ``q = [q1, q2, q3, q4]`` with q1..q3 relative joint angles of
the arm (base at the origin, gravity along -y) and q4 the plank hinge angle.
The end-effector frame sits at the tip of link 3 (midpoint of the contact
face) with orientation ``theta = q1 + q2 + q3``.

The arm is written in absolute link angles ``phi = T q_rob`` (T lower
triangular ones).  In those coordinates the inertia matrix has the closed form
``A_jk cos(phi_j - phi_k) + I_j delta_jk`` and the Coriolis/centrifugal
vector is ``sum_k A_jk sin(phi_j - phi_k) phidot_k^2``; both are mapped back
with T.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .params import ModelParams, State

_T = np.tril(np.ones((3, 3)))
_S = np.vstack([np.eye(3), np.zeros((1, 3))])
_S.flags.writeable = False


@dataclass
class TaskKinematics:
    p: np.ndarray
    theta: float
    Jp: Optional[np.ndarray] = None
    Jtheta: Optional[np.ndarray] = None
    Jp_dot: Optional[np.ndarray] = None
    Jtheta_dot: Optional[np.ndarray] = None

    @property
    def Jp_rob(self) -> np.ndarray:
        return self.Jp[:, :3]

    @property
    def Jtheta_rob(self) -> np.ndarray:
        return self.Jtheta[:, :3]

    @property
    def J_task_rob(self) -> np.ndarray:
        """Stacked 3x3 ``[Jp_rob; Jtheta_rob]``."""
        return np.vstack([self.Jp[:, :3], self.Jtheta[:, :3]])


def actuation_matrix() -> np.ndarray:
    """Constant selection matrix ``S = [I3; 0]``."""
    return _S.copy()


def link_angles(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return np.cumsum(q[:3])


def forward_kinematics(params: ModelParams, q) -> TaskKinematics:
    phi = link_angles(q)
    L = np.asarray(params.link_lengths)
    p = np.array([L @ np.cos(phi), L @ np.sin(phi)])
    return TaskKinematics(p=p, theta=float(phi[2]))


def task_jacobians(params: ModelParams, q, qdot) -> TaskKinematics:
    """Task pose with J_p, J_theta and their time derivatives."""
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    phi = link_angles(q)
    phidot = np.cumsum(qdot[:3])
    L = np.asarray(params.link_lengths)
    c, s = np.cos(phi), np.sin(phi)
    p = np.array([L @ c, L @ s])

    # columns in phi coordinates, then chain rule through T
    Jphi = np.vstack([-L * s, L * c])
    Jphi_dot = np.vstack([-L * c * phidot, -L * s * phidot])
    Jp = np.zeros((2, 4))
    Jp[:, :3] = Jphi @ _T
    Jp_dot = np.zeros((2, 4))
    Jp_dot[:, :3] = Jphi_dot @ _T
    Jtheta = np.array([[1.0, 1.0, 1.0, 0.0]])
    return TaskKinematics(p=p, theta=float(phi[2]), Jp=Jp, Jtheta=Jtheta,
                          Jp_dot=Jp_dot, Jtheta_dot=np.zeros((1, 4)))


def mass_matrix(params: ModelParams, q) -> np.ndarray:
    A, _ = params.chain_coefficients
    phi = link_angles(q)
    Mphi = A * np.cos(phi[:, None] - phi[None, :]) + np.diag(params.link_inertias)
    M = np.zeros((4, 4))
    M[:3, :3] = _T.T @ Mphi @ _T
    M[3, 3] = params.plank_inertia_hinge
    return M


def _bias(params: ModelParams, q, qdot) -> np.ndarray:
    A, G = params.chain_coefficients
    phi = link_angles(q)
    phidot = np.cumsum(qdot[:3])
    cor = (A * np.sin(phi[:, None] - phi[None, :])) @ (phidot * phidot)
    grav = params.gravity * G * np.cos(phi)
    h = np.empty(4)
    h[:3] = _T.T @ (cor + grav)
    h[3] = params.hinge_stiffness * (q[3] - params.plank_rest_angle) + params.hinge_damping * qdot[3]
    return h


def bias_vector(params: ModelParams, state: State) -> np.ndarray:
    """Gravity, Coriolis/centrifugal and hinge spring-damper terms ``h(q, qdot)``."""
    return _bias(params, state.q, state.qdot)


def gravity_vector(params: ModelParams, q) -> np.ndarray:
    """Static part of h for the arm (zero velocity, plank spring excluded)."""
    _, G = params.chain_coefficients
    phi = link_angles(q)
    return _T.T @ (params.gravity * G * np.cos(phi))


def kinetic_energy(params: ModelParams, q, qdot) -> float:
    qdot = np.asarray(qdot, dtype=float)
    return 0.5 * float(qdot @ mass_matrix(params, q) @ qdot)


def potential_energy(params: ModelParams, q) -> float:
    """Link gravity plus plank hinge spring."""
    _, G = params.chain_coefficients
    phi = link_angles(q)
    return float(params.gravity * G @ np.sin(phi) + 0.5 * params.hinge_stiffness * (q[3] - params.plank_rest_angle) ** 2)


def forward_dynamics(params: ModelParams, q, qdot, tau, JN=None, lam=None) -> np.ndarray:
    """Solve ``M qddot + h = S tau + JN^T lam`` for qddot."""
    rhs = -_bias(params, q, qdot)
    rhs[:3] += tau
    if JN is not None and lam is not None:
        rhs += JN.T @ lam
    return np.linalg.solve(mass_matrix(params, q), rhs)

"""Model constants and state containers."""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from functools import cached_property

import numpy as np

from .errors import NonFiniteState


@dataclass(frozen=True)
class ModelParams:
    """Physical, controller and contact constants.

    Defaults are the simulation values of the reference experiment. Hinge
    stiffness and damping act on the plank angle, so they are torsional
    (N m/rad, N m s/rad).
    """

    link_masses: tuple[float, float, float] = (8.0, 8.0, 4.0)
    link_inertias: tuple[float, float, float] = (0.03, 0.03, 0.005)
    plank_inertia_hinge: float = 4.5
    link_lengths: tuple[float, float, float] = (0.3, 0.3, 0.15)
    ee_face_width: float = 0.15
    plank_thickness: float = 0.04
    hinge_offset: tuple[float, float] = (0.1, 0.35)
    hinge_stiffness: float = 40.0
    hinge_damping: float = 40.0
    plank_rest_angle: float = 0.0  # neutral angle of the hinge spring, rad
    gravity: float = 9.81
    task_gains: tuple[float, float] = (20.0, 20.0)
    task_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    joint_stiffness: tuple[float, float, float] = (30e3, 30e3, 15e3)
    joint_damping: tuple[float, float, float] = (10.0, 10.0, 5.0)
    motor_inertia: tuple[float, float, float] = (0.24, 0.24, 0.08)
    desired_motor_inertia: tuple[float, float, float] = (0.012, 0.012, 0.004)
    contact_exponent: float = 1.5
    contact_stiffness: float = 3.2e8
    contact_damping: float = 3.2e11
    # fraction of each link length at which its centre of mass sits
    com_fraction: float = 0.5

    def __post_init__(self):
        positive = (
            list(self.link_masses) + list(self.link_inertias) + [self.plank_inertia_hinge]
            + list(self.link_lengths) + list(self.task_gains) + list(self.task_weights)
            + list(self.joint_stiffness) + list(self.joint_damping)
            + list(self.motor_inertia) + list(self.desired_motor_inertia)
        )
        if not all(np.isfinite(v) and v > 0 for v in positive):
            raise ValueError("masses, inertias, lengths, gains, weights and K, D, B, B_theta must be > 0")
        if self.ee_face_width <= 0 or self.plank_thickness < 0:
            raise ValueError("face width must be > 0 and plank thickness >= 0")
        if self.hinge_stiffness < 0 or self.hinge_damping < 0 or self.gravity < 0:
            raise ValueError("hinge stiffness/damping and gravity must be >= 0")
        if self.contact_exponent <= 0 or self.contact_stiffness <= 0 or self.contact_damping < 0:
            raise ValueError("invalid contact parameters")
        if not 0.0 <= self.com_fraction <= 1.0:
            raise ValueError("com_fraction must lie in [0, 1]")

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    @property
    def k_p(self) -> float:
        return self.task_gains[0]

    @property
    def k_theta(self) -> float:
        return self.task_gains[1]

    @property
    def w_p(self) -> float:
        return self.task_weights[0]

    @property
    def w_theta(self) -> float:
        return self.task_weights[1]

    @property
    def w_lambda(self) -> float:
        return self.task_weights[2]

    @cached_property
    def K(self) -> np.ndarray:
        return np.diag(self.joint_stiffness)

    @cached_property
    def D(self) -> np.ndarray:
        return np.diag(self.joint_damping)

    @cached_property
    def B(self) -> np.ndarray:
        return np.diag(self.motor_inertia)

    @cached_property
    def B_theta(self) -> np.ndarray:
        return np.diag(self.desired_motor_inertia)

    @cached_property
    def hinge(self) -> np.ndarray:
        return np.array(self.hinge_offset, dtype=float)

    @cached_property
    def chain_coefficients(self) -> tuple[np.ndarray, np.ndarray]:
        """Constant inertia coefficients of the chain in absolute link angles.

        Returns ``(A, G)`` with ``A[j, k] = sum_i m_i r_ij r_ik`` and
        ``G[k] = sum_i m_i r_ik``, where ``r_ik`` is the lever arm of link k
        as seen from the centre of mass of body i.
        """
        L = np.asarray(self.link_lengths, dtype=float)
        m = np.asarray(self.link_masses, dtype=float)
        r = np.zeros((3, 3))
        for i in range(3):
            r[i, :i] = L[:i]
            r[i, i] = self.com_fraction * L[i]
        A = np.einsum("i,ij,ik->jk", m, r, r)
        G = m @ r
        return A, G

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


DEFAULT_PARAMS = ModelParams()


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFiniteState("state contains non-finite entries")


@dataclass(frozen=True)
class State:
    """Generalized positions and velocities ``q = [q1 q2 q3 q4]``."""

    q: np.ndarray
    qdot: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float).reshape(4)
        qdot = np.array(self.qdot, dtype=float).reshape(4)
        _check_finite(q, qdot)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "qdot", qdot)

    @property
    def q_rob(self) -> np.ndarray:
        return self.q[:3]

    @property
    def qdot_rob(self) -> np.ndarray:
        return self.qdot[:3]


@dataclass(frozen=True)
class FlexState:
    """Link-side state plus motor-side positions/velocities of the 3 drives."""

    q: np.ndarray
    qdot: np.ndarray
    theta_rob: np.ndarray
    thetadot_rob: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        vals = []
        for name, n in (("q", 4), ("qdot", 4), ("theta_rob", 3), ("thetadot_rob", 3)):
            a = np.array(getattr(self, name), dtype=float).reshape(n)
            object.__setattr__(self, name, a)
            vals.append(a)
        _check_finite(*vals)

    @property
    def link(self) -> State:
        return State(self.q, self.qdot)

    def tau_flex(self, params: ModelParams) -> np.ndarray:
        return np.asarray(params.joint_stiffness) * (self.theta_rob - self.q[:3])

    def tau_flex_dot(self, params: ModelParams) -> np.ndarray:
        return np.asarray(params.joint_stiffness) * (self.thetadot_rob - self.qdot[:3])

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.q, self.qdot, self.theta_rob, self.thetadot_rob])

    @classmethod
    def from_vector(cls, x) -> "FlexState":
        x = np.asarray(x, dtype=float)
        return cls(x[0:4], x[4:8], x[8:11], x[11:14])

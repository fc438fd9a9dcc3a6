"""Contact geometry, the inelastic impact map, and compliant contact forces.

Face corners sit at ``p +/- (w3/2) (cos theta, sin theta)`` (index 0 is the
``-`` corner).  The plank is a slab of thickness w4 whose mid-line passes
through the hinge with direction ``(cos q4, sin q4)``; its top surface has
normal ``n4 = (-sin q4, cos q4)``.  Gaps are signed distances of the corners
above that surface.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable

import numpy as np

from .errors import SingularImpactGeometry
from .mechanics import kinetic_energy, mass_matrix, task_jacobians
from .params import ModelParams, State

CORNER_SIGNS = (-1.0, 1.0)
DELASSUS_COND_MAX = 1e12


@dataclass
class ContactGeometry:
    gaps: np.ndarray
    JN: np.ndarray
    JN_dot: np.ndarray
    contact_points: np.ndarray  # (2, 2), one row per corner


@dataclass
class ImpactResult:
    qdot_post: np.ndarray
    impulse: np.ndarray
    energy_loss: float
    active: tuple[int, ...]


def contact_geometry(params: ModelParams, state: State) -> ContactGeometry:
    q, qdot = state.q, state.qdot
    kin = task_jacobians(params, q, qdot)
    th, thdot = kin.theta, float((kin.Jtheta @ qdot)[0])
    q4, q4dot = q[3], qdot[3]
    e_th = np.array([np.cos(th), np.sin(th)])
    eperp_th = np.array([-np.sin(th), np.cos(th)])
    t4 = np.array([np.cos(q4), np.sin(q4)])
    n4 = np.array([-np.sin(q4), np.cos(q4)])
    half = 0.5 * params.ee_face_width
    hinge = params.hinge

    gaps = np.empty(2)
    JN = np.zeros((2, 4))
    JN_dot = np.zeros((2, 4))
    points = np.empty((2, 2))
    pdot = kin.Jp @ qdot
    for i, s in enumerate(CORNER_SIGNS):
        pc = kin.p + s * half * e_th
        points[i] = pc
        rel = pc - hinge
        gaps[i] = n4 @ rel - 0.5 * params.plank_thickness
        # corner Jacobian and its derivative
        Jc = kin.Jp + s * half * np.outer(eperp_th, kin.Jtheta[0])
        Jc_dot = kin.Jp_dot - s * half * thdot * np.outer(e_th, kin.Jtheta[0])
        pcdot = pdot + s * half * thdot * eperp_th
        JN[i, :3] = n4 @ Jc[:, :3]
        JN[i, 3] = -t4 @ rel
        n4dot = -t4 * q4dot
        t4dot = n4 * q4dot
        JN_dot[i, :3] = n4dot @ Jc[:, :3] + n4 @ Jc_dot[:, :3]
        JN_dot[i, 3] = -t4dot @ rel - t4 @ pcdot
    return ContactGeometry(gaps=gaps, JN=JN, JN_dot=JN_dot, contact_points=points)


def gaps(params: ModelParams, q) -> np.ndarray:
    """Gap values only (cheap path for event localisation)."""
    q = np.asarray(q, dtype=float)
    phi = np.cumsum(q[:3])
    L = np.asarray(params.link_lengths)
    p = np.array([L @ np.cos(phi), L @ np.sin(phi)])
    th, q4 = phi[2], q[3]
    e_th = np.array([np.cos(th), np.sin(th)])
    n4 = np.array([-np.sin(q4), np.cos(q4)])
    half = 0.5 * params.ee_face_width
    base = n4 @ (p - params.hinge) - 0.5 * params.plank_thickness
    d = half * (n4 @ e_th)
    return np.array([base - d, base + d])


def _active_rows(active: Iterable[int]) -> list[int]:
    rows = sorted(set(int(i) for i in active))
    if not rows:
        raise ValueError("impact map needs a nonempty active set")
    if any(i not in (0, 1) for i in rows):
        raise ValueError("contact indices are 0 and 1")
    return rows


def impact_map(params: ModelParams, state: State, active: Iterable[int],
               geometry: ContactGeometry | None = None) -> ImpactResult:
    """Inelastic impact map restricted to the contacts in ``active``.

    ``qdot+ = (I - M^-1 J^T (J M^-1 J^T)^-1 J) qdot-`` with J the stacked
    normal-Jacobian rows of the active contacts.
    """
    rows = _active_rows(active)
    geo = geometry if geometry is not None else contact_geometry(params, state)
    J = geo.JN[rows]
    M = mass_matrix(params, state.q)
    MinvJT = np.linalg.solve(M, J.T)
    delassus = J @ MinvJT
    if np.linalg.cond(delassus) > DELASSUS_COND_MAX:
        raise SingularImpactGeometry(f"Delassus matrix of contacts {rows} is singular")
    qdot_minus = state.qdot
    impulse = -np.linalg.solve(delassus, J @ qdot_minus)
    qdot_plus = qdot_minus + MinvJT @ impulse
    loss = kinetic_energy(params, state.q, qdot_minus) - kinetic_energy(params, state.q, qdot_plus)
    return ImpactResult(qdot_post=qdot_plus, impulse=impulse, energy_loss=float(loss),
                        active=tuple(rows))


def resolve_impact(params: ModelParams, state: State, closed: Iterable[int],
                   closing: Iterable[int]) -> ImpactResult:
    """Impact over already-closed plus newly-closing contacts with unilateral check.

    Enumerates candidate active sets (largest first, then lowest indices) and
    returns the first with nonnegative impulses whose excluded contacts
    separate (``J_i qdot+ >= 0``).  With two contacts this is an exact
    solution of the impact LCP.
    """
    cand = sorted(set(closed) | set(closing))
    geo = contact_geometry(params, state)
    for size in range(len(cand), 0, -1):
        for subset in combinations(cand, size):
            res = impact_map(params, state, subset, geo)
            if np.any(res.impulse < -1e-12):
                continue
            others = [i for i in cand if i not in subset]
            if others and np.any(geo.JN[others] @ res.qdot_post < -1e-12):
                continue
            return res
    # no consistent subset: fall back to the full set
    return impact_map(params, state, cand, geo)


def hunt_crossley_force(params: ModelParams, gap: float, gap_rate: float) -> float:
    """Exponentially extended Hunt-Crossley normal force.

    ``lambda = K(rate) |gap|^c`` for ``gap <= 0`` (else 0), with
    ``K = k_env + d_env rate`` for ``rate >= 0`` and
    ``K = k_env exp(d_env / k_env * rate)`` for ``rate < 0``.
    """
    if gap > 0.0:
        return 0.0
    k, d = params.contact_stiffness, params.contact_damping
    if gap_rate >= 0.0:
        stiff = k + d * gap_rate
    else:
        stiff = k * np.exp(d / k * gap_rate)
    return max(0.0, float(stiff * abs(gap) ** params.contact_exponent))

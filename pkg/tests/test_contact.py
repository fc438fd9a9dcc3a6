import numpy as np
import pytest

from refspread.contact import (
    contact_geometry, gaps, hunt_crossley_force, impact_map, resolve_impact,
)
from refspread.errors import SingularImpactGeometry
from refspread.mechanics import kinetic_energy, mass_matrix
from refspread.params import State

from conftest import random_state

ACTIVE_SETS = ((0,), (1,), (0, 1))


def impulse_oracle(M, J, qdot_minus):
    """Solve impulse balance plus zero post-impact contact speed as one linear system."""
    n, m = M.shape[0], J.shape[0]
    K = np.block([[M, -J.T], [J, np.zeros((m, m))]])
    sol = np.linalg.solve(K, np.concatenate([M @ qdot_minus, np.zeros(m)]))
    return sol[:n], sol[n:]


def test_impact_map_matches_linear_system(params, rng):
    for _ in range(50):
        q, qdot = random_state(rng)
        s = State(q, qdot)
        geo = contact_geometry(params, s)
        M = mass_matrix(params, q)
        for act in ACTIVE_SETS:
            res = impact_map(params, s, act)
            v, P = impulse_oracle(M, geo.JN[list(act)], qdot)
            np.testing.assert_allclose(res.qdot_post, v, rtol=1e-10, atol=1e-10 * np.abs(v).max())
            np.testing.assert_allclose(res.impulse, P, rtol=1e-9, atol=1e-10)
            np.testing.assert_allclose(geo.JN[list(act)] @ res.qdot_post, 0.0, atol=1e-10)
            assert res.energy_loss >= -1e-12


def test_impact_map_is_a_projection(params, rng):
    q, qdot = random_state(rng)
    once = impact_map(params, State(q, qdot), (0, 1)).qdot_post
    twice = impact_map(params, State(q, once), (0, 1))
    np.testing.assert_allclose(twice.qdot_post, once, atol=1e-12)
    np.testing.assert_allclose(twice.impulse, 0.0, atol=1e-10)


def test_impact_map_rejects_bad_sets(params, rng):
    s = State(*random_state(rng))
    with pytest.raises(ValueError):
        impact_map(params, s, ())
    with pytest.raises(ValueError):
        impact_map(params, s, (2,))


def test_parallel_contacts_are_singular(params):
    # the two corners coincide when the face width is tiny
    p = params.replace(ee_face_width=1e-14)
    s = State([1.9, -1.6, -0.3, 0.0], [0.1, 0.0, 0.0, 0.0])
    with pytest.raises(SingularImpactGeometry):
        impact_map(p, s, (0, 1))


def test_unilateral_impact_keeps_impulses_nonnegative(params, rng):
    done = 0
    while done < 50:
        q, qdot = random_state(rng)
        s = State(q, qdot)
        geo = contact_geometry(params, s)
        if np.any(geo.JN @ qdot >= 0):
            continue  # only states where both corners approach
        done += 1
        res = resolve_impact(params, s, (), (0, 1))
        assert np.all(res.impulse >= -1e-12)
        np.testing.assert_array_less(-1e-9, geo.JN @ res.qdot_post)
        assert kinetic_energy(params, q, res.qdot_post) <= kinetic_energy(params, q, qdot) + 1e-12


def test_gap_jacobians_match_finite_differences(params, rng):
    h = 1e-6
    for _ in range(25):
        q, qdot = random_state(rng)
        geo = contact_geometry(params, State(q, qdot))
        np.testing.assert_allclose(geo.gaps, gaps(params, q), atol=1e-14)
        fd = np.column_stack([(gaps(params, q + h * e) - gaps(params, q - h * e)) / (2 * h) for e in np.eye(4)])
        np.testing.assert_allclose(geo.JN, fd, atol=1e-6)
        JN_dot = (contact_geometry(params, State(q + h * qdot, qdot)).JN
                  - contact_geometry(params, State(q - h * qdot, qdot)).JN) / (2 * h)
        np.testing.assert_allclose(geo.JN_dot, JN_dot, atol=1e-6)


def test_face_is_flush_at_the_nominal_impact_pose(params, refs):
    np.testing.assert_allclose(gaps(params, refs.q_minus), 0.0, atol=1e-12)
    geo = contact_geometry(params, State(refs.q_minus, refs.qdot_minus))
    # both corners approach at the same normal speed
    rates = geo.JN @ refs.qdot_minus
    assert rates[0] == pytest.approx(rates[1], abs=1e-12)
    assert rates[0] < 0


class TestHuntCrossley:
    def test_open_contact_has_no_force(self, params):
        assert hunt_crossley_force(params, 1e-6, -1.0) == 0.0

    def test_static_penetration(self, params):
        # lambda = k |gap|^1.5 at zero rate
        assert hunt_crossley_force(params, -1e-4, 0.0) == pytest.approx(3.2e8 * 1e-6)

    def test_damped_branch_is_linear_in_rate(self, params):
        f = hunt_crossley_force(params, -1e-4, 1e-3)
        assert f == pytest.approx((3.2e8 + 3.2e11 * 1e-3) * 1e-6)

    def test_negative_rate_decays_exponentially_and_stays_positive(self, params):
        f = hunt_crossley_force(params, -1e-4, -1e-3)
        assert f == pytest.approx(3.2e8 * np.exp(-1.0) * 1e-6)
        assert hunt_crossley_force(params, -1e-4, -10.0) >= 0.0

    def test_continuous_at_zero_rate(self, params):
        a = hunt_crossley_force(params, -1e-4, 1e-15)
        b = hunt_crossley_force(params, -1e-4, -1e-15)
        assert a == pytest.approx(b, rel=1e-9)

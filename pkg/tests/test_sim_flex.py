import numpy as np
import pytest

from refspread.mechanics import gravity_vector
from refspread.params import FlexState, State
from refspread.sim_flex import (
    FlexRHS, contact_forces, flex_dynamics, initial_flex_state, low_level_torque, rk4_step, run_flex,
)
from refspread.sim_rigid import SimConfig


def _random_fstate(refs, rng, near_contact=False):
    q = refs.q_minus + rng.normal(0, 1e-4 if near_contact else 0.05, 4)
    return FlexState(q, rng.normal(0, 0.3, 4), q[:3] + rng.normal(0, 1e-3, 3), rng.normal(0, 0.3, 3))


class TestLowLevelLaw:
    def test_gain_from_inertia_ratio(self, params, refs, rng):
        fs = _random_fstate(refs, rng)
        tau_star = rng.normal(0, 5, 3)
        trans = fs.tau_flex(params) + np.asarray(params.joint_damping) * (fs.thetadot_rob - fs.qdot[:3])
        np.testing.assert_allclose(low_level_torque(params, fs, tau_star), 20 * tau_star - 19 * trans, rtol=1e-12)

    def test_fixed_point(self, params):
        q = np.array([1.9, -1.6, -0.3, 0.0])
        tau_star = np.array([3.0, -1.0, 0.5])
        theta = q[:3] + tau_star / np.asarray(params.joint_stiffness)
        fs = FlexState(q, np.zeros(4), theta, np.zeros(3))
        np.testing.assert_allclose(low_level_torque(params, fs, tau_star), tau_star, rtol=1e-10)


def test_no_deflection_means_no_transmission(params):
    q = np.array([1.9, -1.6, -0.3, 0.0])
    fs = FlexState(q, np.zeros(4), q[:3], np.zeros(3))
    d = flex_dynamics(params, fs, np.zeros(3), np.zeros(2))
    # link side falls freely under gravity, motors stay put
    g = gravity_vector(params, q)
    assert np.all(np.abs(d.qdot[:3]) > 0)
    np.testing.assert_allclose(d.thetadot_rob, 0.0)
    assert np.abs(g).max() > 0


def test_static_deflection_holds_the_arm(params, refs):
    fs = initial_flex_state(params, refs, SimConfig(plank_offset=0.0))
    tau = gravity_vector(params, fs.q)
    d = flex_dynamics(params, fs, tau, np.zeros(2))
    np.testing.assert_allclose(d.qdot[:3], 0.0, atol=1e-9)
    np.testing.assert_allclose(d.thetadot_rob, 0.0, atol=1e-9)


def test_scalar_rhs_matches_reference_dynamics(params, refs, rng):
    for hc in ("penetration", "gap"):
        rhs = FlexRHS(params, hc)
        for near in (False, True):
            for _ in range(20):
                fs = _random_fstate(refs, rng, near)
                tau_star = rng.normal(0, 5, 3)
                lam = contact_forces(params, fs.link, hc)
                expect = flex_dynamics(params, fs, low_level_torque(params, fs, tau_star), lam).to_vector()
                got = rhs(fs.to_vector(), tuple(tau_star))
                np.testing.assert_allclose(got, expect, rtol=1e-9, atol=1e-9 * max(1.0, np.abs(expect).max()))
                np.testing.assert_allclose(rhs.last_lam, lam, rtol=1e-10)


def test_contact_forces_are_nonnegative(params, refs, rng):
    for _ in range(100):
        fs = _random_fstate(refs, rng, near_contact=True)
        for hc in ("penetration", "gap"):
            assert np.all(contact_forces(params, fs.link, hc) >= 0)


def test_transmission_vibration_decays(params, refs):
    # no contact, torque reference = gravity of the start pose: the drive oscillation dies out
    fs = initial_flex_state(params, refs, SimConfig(plank_offset=0.0))
    fs = FlexState(fs.q, fs.qdot, fs.theta_rob, np.array([0.5, -0.5, 0.5]))
    rhs = FlexRHS(params)
    tau_star = tuple(gravity_vector(params, fs.q))
    x = fs.to_vector()

    def vib(x):
        return np.abs(x[11:14] - x[4:7]).max()

    v0 = vib(x)
    for _ in range(2000):
        x = rk4_step(rhs, x, tau_star, 2e-5)
    assert vib(x) < 0.05 * v0


def test_contact_free_run_uses_coarse_steps(params, refs):
    log = run_flex(params, SimConfig(t_end=0.05), refs)
    assert log.error is None and not log.events
    assert log.meta["fine_steps"] == 0 and log.meta["coarse_steps"] == 500
    assert np.all(log["mode"] == 0)
    # tau_flex column is K times the deflection
    defl = log.cols("theta_rob1", "theta_rob2", "theta_rob3") - log.cols("q1", "q2", "q3")
    np.testing.assert_allclose(log.cols("tau_flex1", "tau_flex2", "tau_flex3"),
                               defl * np.asarray(params.joint_stiffness), rtol=1e-9, atol=1e-9)


def test_flex_state_round_trip(rng):
    x = rng.normal(size=14)
    np.testing.assert_array_equal(FlexState.from_vector(x).to_vector(), x)
    with pytest.raises(Exception):
        FlexState(np.full(4, np.nan), np.zeros(4), np.zeros(3))
    assert isinstance(FlexState.from_vector(x).link, State)

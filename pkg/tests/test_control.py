import numpy as np
import pytest

from refspread.contact import contact_geometry
from refspread.control import (
    ContactObservation, Controller, ControllerConfig, ControlMode, Strategy, ante_qp, baseline_controller,
    baseline_mode, intermediate_qp, post_qp, supervise,
)
from refspread.mechanics import _bias, mass_matrix
from refspread.params import State

CFG = ControllerConfig()


def obs(gaps, rates=(0.0, 0.0)):
    return ContactObservation(np.array(gaps, float), np.array(rates, float))


class TestSupervisor:
    def test_open_contacts_stay_ante(self):
        assert supervise(CFG, ControlMode.ANTE, obs([0.01, 0.02])) == ControlMode.ANTE

    def test_first_contact_enters_intermediate(self):
        assert supervise(CFG, ControlMode.ANTE, obs([-1e-6, 0.005])) == ControlMode.INTERMEDIATE

    def test_sustained_contact_enters_post(self):
        m = supervise(CFG, ControlMode.INTERMEDIATE, obs([0.0, -1e-7], [0.001, -0.002]))
        assert m == ControlMode.POST

    def test_fast_closing_contact_is_not_sustained(self):
        m = supervise(CFG, ControlMode.INTERMEDIATE, obs([0.0, 0.0], [0.0, -0.3]))
        assert m == ControlMode.INTERMEDIATE

    def test_mode_never_goes_back(self):
        assert supervise(CFG, ControlMode.POST, obs([1.0, 1.0])) == ControlMode.POST
        assert supervise(CFG, ControlMode.INTERMEDIATE, obs([1.0, 1.0])) == ControlMode.INTERMEDIATE

    def test_baseline_modes(self, refs):
        no_rs = ControllerConfig(strategy=Strategy.NO_RS)
        rs0 = ControllerConfig(strategy=Strategy.RS_NO_INTERMEDIATE)
        assert baseline_mode(no_rs, ControlMode.ANTE, refs, refs.t_imp - 1e-3, obs([-1, -1])) == ControlMode.ANTE
        assert baseline_mode(no_rs, ControlMode.ANTE, refs, refs.t_imp, obs([1, 1])) == ControlMode.POST
        assert baseline_mode(rs0, ControlMode.ANTE, refs, 2.0, obs([1, 1])) == ControlMode.ANTE
        assert baseline_mode(rs0, ControlMode.ANTE, refs, 0.0, obs([1, -1e-9])) == ControlMode.POST


def test_config_validation():
    with pytest.raises(ValueError):
        ControllerConfig(epsilon=0.0)
    with pytest.raises(ValueError):
        Strategy.parse("bogus")
    assert Strategy.parse("RS_with_intermediate") is Strategy.RS_WITH_INTERMEDIATE


def _near_impact_state(refs, rng, scale=0.01):
    return State(refs.q_minus + rng.normal(0, scale, 4), refs.qdot_minus + rng.normal(0, 0.1, 4))


def _dynamics_residual(params, state, out, lam=np.zeros(2)):
    geo = contact_geometry(params, state)
    rhs = np.append(out.tau_star, 0.0) + geo.JN.T @ lam
    return np.abs(mass_matrix(params, state.q) @ out.qddot_star + _bias(params, state.q, state.qdot) - rhs).max()


def test_intermediate_output_ignores_measured_velocity(params, refs, rng):
    for _ in range(20):
        s = _near_impact_state(refs, rng)
        t = refs.t_imp + rng.uniform(-0.02, 0.02)
        base = intermediate_qp(params, s.q, refs, t)
        for _ in range(3):
            c = Controller(params, refs, CFG)
            c.mode = ControlMode.INTERMEDIATE
            other = State(s.q, rng.normal(0, 5.0, 4))
            out = c.command(t, other)
            assert out.tau_star.tobytes() == base.tau_star.tobytes()
            assert out.qddot_star.tobytes() == base.qddot_star.tobytes()


def test_ante_qp_satisfies_dynamics(params, refs, rng):
    for _ in range(20):
        s = _near_impact_state(refs, rng)
        out = ante_qp(params, s, refs, 0.9)
        assert _dynamics_residual(params, s, out) <= 1e-9
        assert out.qp.kkt_residual <= 1e-8
        assert out.mode == ControlMode.ANTE


def test_post_qp_constraints(params, refs, rng):
    for _ in range(20):
        s = State(refs.q_minus, refs.qdot_plus + rng.normal(0, 1e-3, 4))
        out = post_qp(params, s, refs, refs.t_imp + 0.01)
        geo = contact_geometry(params, s)
        assert _dynamics_residual(params, s, out, out.lambda_star) <= 1e-9
        np.testing.assert_allclose(geo.JN @ out.qddot_star + geo.JN_dot @ s.qdot, 0.0, atol=1e-9)
        assert np.all(out.lambda_star >= -1e-12)


def test_post_qp_shares_force_at_rest(params, refs):
    s = State(refs.q_minus, np.zeros(4))
    out = post_qp(params, s, refs, refs.t_end + 10.0)
    assert out.lambda_star[0] == pytest.approx(out.lambda_star[1], rel=1e-6)


def test_baselines_equal_ante_before_impact(params, refs, rng):
    s = _near_impact_state(refs, rng)
    t = refs.t_imp - 0.05
    ante = ante_qp(params, s, refs, t)
    for strat in (Strategy.NO_RS, Strategy.RS_NO_INTERMEDIATE):
        cfg = ControllerConfig(strategy=strat)
        out = baseline_controller(params, cfg, s, refs, t, ControlMode.ANTE)
        np.testing.assert_array_equal(out.tau_star, ante.tau_star)
        c = Controller(params, refs, cfg)
        np.testing.assert_array_equal(c.command(t, s, obs([0.01, 0.01])).tau_star, ante.tau_star)


def test_baseline_falls_back_when_post_qp_is_infeasible(params, refs, monkeypatch):
    import refspread.control as control
    from refspread.errors import Infeasible

    def infeasible(*a, **k):
        raise Infeasible("contact not established")

    monkeypatch.setattr(control, "post_qp", infeasible)
    s = State(refs.q_minus, refs.qdot_minus)
    out = baseline_controller(params, ControllerConfig(strategy=Strategy.NO_RS), s, refs, refs.t_imp + 0.01,
                              ControlMode.POST)
    assert out.form == "post_fallback"
    assert out.mode == ControlMode.POST
    assert np.all(np.isfinite(out.tau_star))
    assert _dynamics_residual(params, s, out) <= 1e-9


def test_controller_records_switch_times(params, refs):
    c = Controller(params, refs, CFG)
    c.observe(0.5, obs([0.1, 0.1]))
    c.observe(0.9, obs([0.0, 0.1]))
    c.observe(0.95, obs([0.0, 0.0], [0.0, 0.0]))
    assert c.switch_times == {ControlMode.ANTE: 0.0, ControlMode.INTERMEDIATE: 0.9, ControlMode.POST: 0.95}
    base = Controller(params, refs, ControllerConfig(strategy=Strategy.RS_NO_INTERMEDIATE))
    base.observe(0.9, obs([0.0, 0.1]))
    assert ControlMode.INTERMEDIATE not in base.switch_times

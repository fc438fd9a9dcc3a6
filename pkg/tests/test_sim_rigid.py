import io

import numpy as np
import pytest

from refspread.contact import contact_geometry
from refspread.errors import SchemaMismatch
from refspread.mechanics import gravity_vector
from refspread.params import State
from refspread.sim_rigid import (
    SimConfig, contact_forces, detect_event, project_to_contacts, run_rigid, step_constrained,
)
from refspread.simlog import RIGID_COLUMNS, Event, SimLog


def _linear(q0, v):
    return State(np.array([q0, 0, 0, 0.0]), np.array([v, 0, 0, 0.0]))


class TestDetectEvent:
    # gap_i = q1 - c_i moves linearly, so the Hermite interpolant is exact
    def test_no_crossing(self, params):
        fn = lambda q: np.array([q[0] - 0.5, q[0] - 0.7])  # noqa: E731
        assert detect_event(params, _linear(1.0, -1.0), _linear(0.9, -1.0), 0.1, gap_fn=fn) is None

    def test_locates_linear_crossing(self, params):
        fn = lambda q: np.array([q[0] - 0.93, q[0] + 1.0])  # noqa: E731
        hits, s = detect_event(params, _linear(1.0, -1.0), _linear(0.9, -1.0), 0.1, tol=1e-12, gap_fn=fn)
        assert hits == (0,)
        assert s == pytest.approx(0.07, abs=1e-11)

    def test_simultaneous_crossings_come_together(self, params):
        fn = lambda q: np.array([q[0] - 0.95, q[0] - 0.95 - 5e-13])  # noqa: E731
        hits, s = detect_event(params, _linear(1.0, -1.0), _linear(0.9, -1.0), 0.1, tol=1e-9, gap_fn=fn)
        assert hits == (0, 1)
        assert s == pytest.approx(0.05, abs=1e-8)

    def test_earliest_crossing_wins(self, params):
        fn = lambda q: np.array([q[0] - 0.92, q[0] - 0.97])  # noqa: E731
        hits, s = detect_event(params, _linear(1.0, -1.0), _linear(0.9, -1.0), 0.1, tol=1e-12, gap_fn=fn)
        assert hits == (1,)
        assert s == pytest.approx(0.03, abs=1e-11)


def _resting(refs):
    return State(refs.q_minus, np.zeros(4))


def test_contact_forces_solve_the_release_problem(params, refs, rng):
    from refspread.sim_rigid import constrained_accel
    s = _resting(refs)
    geo = contact_geometry(params, s)
    g = gravity_vector(params, s.q)[:3]
    seen = set()
    for _ in range(200):
        tau = g + rng.normal(0, 20.0, 3)
        lam, keep, dropped = contact_forces(params, s, tau, (0, 1))
        seen.add(keep)
        assert set(keep) | set(dropped) == {0, 1}
        assert np.all(lam >= 0)
        np.testing.assert_array_equal(lam[list(dropped)], 0.0)
        qdd, _ = constrained_accel(params, s.q, s.qdot, tau, keep)
        gap_acc = geo.JN @ qdd + geo.JN_dot @ s.qdot
        np.testing.assert_allclose(gap_acc[list(keep)], 0.0, atol=1e-9)
        assert np.all(gap_acc[list(dropped)] >= -1e-12)
    # pushing, pivoting and lifting all occur
    assert {(0, 1), ()} <= seen and len(seen) >= 3


def test_constrained_step_keeps_contacts_closed(params, refs):
    s = State(refs.q_minus, refs.qdot_plus)
    tau = gravity_vector(params, s.q)[:3] - np.array([5.0, 0.0, 0.0])
    for _ in range(100):
        res = step_constrained(params, s, tau, (0, 1), 1e-4)
        s = res.state
        if res.active != (0, 1):
            break
        geo = contact_geometry(params, s)
        np.testing.assert_allclose(geo.gaps, 0.0, atol=1e-12)
        np.testing.assert_allclose(geo.JN @ s.qdot, 0.0, atol=1e-10)
        assert np.all(res.lam >= 0)


def test_projection_is_idempotent(params, refs, rng):
    q = refs.q_minus + rng.normal(0, 1e-4, 4)
    qdot = rng.normal(0, 0.1, 4)
    q1, v1 = project_to_contacts(params, q, qdot, (0, 1))
    q2, v2 = project_to_contacts(params, q1, v1, (0, 1))
    np.testing.assert_allclose(q2, q1, atol=1e-14)
    np.testing.assert_allclose(v2, v1, atol=1e-12)


class TestSimConfig:
    def test_rejects_bad_steps(self):
        with pytest.raises(ValueError):
            SimConfig(step=0.0)
        with pytest.raises(ValueError):
            SimConfig(step=3e-4, control_dt=1e-3)
        with pytest.raises(ValueError):
            SimConfig(impact_law="elastic")

    def test_jitter_is_seeded(self):
        a = SimConfig(offset_jitter=0.01, seed=3).initial_plank_offset()
        b = SimConfig(offset_jitter=0.01, seed=3).initial_plank_offset()
        c = SimConfig(offset_jitter=0.01, seed=4).initial_plank_offset()
        assert a == b != c


def test_approach_phase_is_contact_free(params, refs):
    log = run_rigid(params, SimConfig(t_end=0.2), refs)
    assert log.error is None
    assert log.data.shape == (201, len(RIGID_COLUMNS))
    assert not log.events
    assert np.all(log["mode"] == 0)
    assert np.all(log["gamma1"] > 0) and np.all(log["gamma2"] > 0)
    assert log["kkt_residual"].max() <= 1e-8
    # tracks the ante reference closely
    err = np.abs(log.cols("px", "py") - log.cols("ante_px", "ante_py")).max()
    assert err < 5e-3


def test_partial_log_survives_a_failure(params, refs):
    # plank rotated up into the arm's start pose
    cfg = SimConfig(t_end=0.1, plank_offset=1.2)
    log = run_rigid(params, cfg, refs, raise_errors=False)
    assert log.error is not None and "contact" in log.error
    with pytest.raises(ValueError):
        run_rigid(params, cfg, refs)


def test_csv_round_trip(params, refs, tmp_path):
    log = run_rigid(params, SimConfig(t_end=0.05), refs)
    log.events.append(Event(0.01, "impact", (0, 1), np.array([0.5, 0.25]), 2.0, 1.5))
    path, ev = tmp_path / "r_rs_intermediate.csv", tmp_path / "r_rs_intermediate_events.csv"
    with open(path, "w") as fh:
        log.write_csv(fh)
    with open(ev, "w") as fh:
        log.write_events(fh)
    back = SimLog.read_csv(path, ev)
    np.testing.assert_allclose(back.data, log.data, rtol=1e-11, atol=1e-300)
    assert back.events[0].contacts == (0, 1)
    assert back.events[0].dT == pytest.approx(-0.5)


def test_csv_schema_is_checked(tmp_path):
    bad = tmp_path / "x.csv"
    bad.write_text("t,q1\n0,0\n")
    with pytest.raises(SchemaMismatch):
        SimLog.read_csv(bad)
    buf = io.StringIO()
    with pytest.raises(SchemaMismatch):
        SimLog("rigid", RIGID_COLUMNS).append([0.0])
    assert buf.getvalue() == ""

import io

import numpy as np
import pytest

from refspread.errors import Infeasible
from refspread.qpsolve import ActiveSetSolver, QpProblem, kkt_residuals, solve

from qp_oracle import brute_force, random_problem


@pytest.mark.parametrize("semidefinite", [False, True])
def test_agrees_with_exhaustive_oracle(rng, semidefinite):
    for _ in range(100):
        p = random_problem(rng, semidefinite=semidefinite)
        ref = brute_force(p)
        assert ref is not None
        sol = solve(p)
        assert sol.kkt_residual <= 1e-8
        assert sol.objective == pytest.approx(ref[1], rel=1e-8, abs=1e-8)
        np.testing.assert_allclose(sol.x, ref[0], atol=1e-6)


def test_unconstrained_minimum():
    H = np.diag([2.0, 4.0])
    sol = solve(QpProblem(H, [-2.0, -4.0]))
    np.testing.assert_allclose(sol.x, [1.0, 1.0], atol=1e-12)
    assert sol.active_set == ()


def test_bound_becomes_active():
    # min (x-1)^2 s.t. x <= 0.5  ->  x = 0.5, multiplier 1
    sol = solve(QpProblem([[2.0]], [-2.0], Aineq=[[-1.0]], bineq=[-0.5]))
    assert sol.x[0] == pytest.approx(0.5)
    assert sol.ineq_multipliers[0] == pytest.approx(1.0)
    assert sol.active_set == (0,)


def test_infeasible_constraints_raise():
    with pytest.raises(Infeasible):
        solve(QpProblem(np.eye(2), np.zeros(2), Aineq=[[1.0, 0.0], [-1.0, 0.0]], bineq=[1.0, 0.0]))


def test_asymmetric_hessian_rejected():
    with pytest.raises(ValueError):
        QpProblem([[1.0, 2.0], [0.0, 1.0]], [0.0, 0.0])


def test_warm_start_gives_the_same_answer(rng):
    solver = ActiveSetSolver(warm_start=True)
    for _ in range(30):
        p = random_problem(rng, n=4, me=1, mi=4)
        a, b = solver.solve(p), solve(p)
        np.testing.assert_allclose(a.x, b.x, atol=1e-8)


def test_kkt_residuals_of_exact_solution_vanish():
    p = QpProblem([[2.0]], [-2.0], Aineq=[[-1.0]], bineq=[-0.5])
    res = kkt_residuals(p, np.array([0.5]), np.zeros(0), np.array([1.0]))
    assert max(res.values()) == pytest.approx(0.0, abs=1e-15)


def test_dump_load_round_trip(rng):
    p = random_problem(rng, n=4, me=1, mi=3)
    buf = io.StringIO()
    p.dump(buf)
    buf.seek(0)
    q = QpProblem.load(buf)
    for name in ("H", "f", "Aeq", "beq", "Aineq", "bineq"):
        np.testing.assert_array_equal(getattr(p, name), getattr(q, name))


def test_solver_is_deterministic(rng):
    p = random_problem(rng, n=5, me=2, mi=5)
    a, b = solve(p), solve(p)
    assert a.x.tobytes() == b.x.tobytes()
    assert a.active_set == b.active_set

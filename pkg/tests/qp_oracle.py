"""Exhaustive active-set oracle for small convex QPs."""
from itertools import combinations

import numpy as np

from refspread.qpsolve import QpProblem


def random_problem(rng, n=None, me=None, mi=None, semidefinite=False) -> QpProblem:
    """Feasible QP, strictly convex on the equality null space.

    With ``semidefinite`` H loses rank but stays positive on null(Aeq).
    """
    n = n or int(rng.integers(2, 7))
    me = int(rng.integers(0, min(3, n))) if me is None else me
    mi = int(rng.integers(1, 7)) if mi is None else mi
    Aeq = rng.normal(size=(me, n))
    if semidefinite and me:
        # H = Aeq^T Aeq-like null on range(Aeq^T), identity on null(Aeq)
        _, _, vt = np.linalg.svd(Aeq)
        Z = vt[me:].T
        H = Z @ np.diag(rng.uniform(0.5, 3.0, n - me)) @ Z.T
    else:
        R = rng.normal(size=(n, n))
        H = R @ R.T + 0.1 * np.eye(n)
    x0 = rng.normal(size=n)
    Aineq = rng.normal(size=(mi, n))
    bineq = Aineq @ x0 - rng.uniform(0.0, 1.0, mi) * (rng.random(mi) < 0.6)
    return QpProblem(H, rng.normal(size=n) * 3, Aeq if me else None, Aeq @ x0 if me else None, Aineq, bineq)


def brute_force(p: QpProblem, tol=1e-9):
    """Return ``(x, objective)`` of the best KKT point over all working sets."""
    n, me, mi = p.n, p.Aeq.shape[0], p.Aineq.shape[0]
    best = None
    for k in range(0, min(mi, n - me) + 1):
        for W in combinations(range(mi), k):
            A = np.vstack([p.Aeq, p.Aineq[list(W)]])
            b = np.concatenate([p.beq, p.bineq[list(W)]])
            m = A.shape[0]
            K = np.block([[p.H, -A.T], [A, np.zeros((m, m))]])
            try:
                sol = np.linalg.solve(K, np.concatenate([-p.f, b]))
            except np.linalg.LinAlgError:
                continue
            if np.linalg.cond(K) > 1e12:
                continue
            x, y = sol[:n], sol[n:]
            if np.any(p.Aineq @ x - p.bineq < -tol) or np.any(y[me:] < -tol):
                continue
            obj = p.objective(x)
            if best is None or obj < best[1] - 1e-12:
                best = (x, obj)
    return best

"""Dense primal active-set solver for small convex QPs.

Problem convention::

    minimize    0.5 x^T H x + f^T x
    subject to  Aeq x = beq
                Aineq x >= bineq

Equality constraints stay in every working set.  Ties in the pivoting rules
(blocking constraint, constraint to drop) go to the lowest index, so the
solver is deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import IO, Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from .errors import Infeasible, MaxIterations, Unbounded

REGULARIZATION = 1e-10


@dataclass
class QpProblem:
    H: np.ndarray
    f: np.ndarray
    Aeq: Optional[np.ndarray] = None
    beq: Optional[np.ndarray] = None
    Aineq: Optional[np.ndarray] = None
    bineq: Optional[np.ndarray] = None

    def __post_init__(self):
        self.H = np.atleast_2d(np.asarray(self.H, dtype=float))
        n = self.H.shape[0]
        self.f = np.asarray(self.f, dtype=float).reshape(n)
        if self.H.shape != (n, n):
            raise ValueError("H must be square")
        if not np.allclose(self.H, self.H.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(self.H).max())):
            raise ValueError("H must be symmetric")
        self.H = 0.5 * (self.H + self.H.T)
        self.Aeq, self.beq = self._pair(self.Aeq, self.beq, n, "eq")
        self.Aineq, self.bineq = self._pair(self.Aineq, self.bineq, n, "ineq")

    @staticmethod
    def _pair(A, b, n, name):
        if A is None:
            return np.zeros((0, n)), np.zeros(0)
        A = np.asarray(A, dtype=float).reshape(-1, n)
        b = np.asarray(b, dtype=float).reshape(-1)
        if A.shape[0] != b.shape[0]:
            raise ValueError(f"A{name} and b{name} disagree in row count")
        return A, b

    @property
    def n(self) -> int:
        return self.H.shape[0]

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.H @ x + self.f @ x)

    def dump(self, fh: IO[str]) -> None:
        """Write the problem as plain text, row-major, ``%.17g``."""
        for name in ("H", "f", "Aeq", "beq", "Aineq", "bineq"):
            a = np.atleast_2d(getattr(self, name))
            if name in ("f", "beq", "bineq"):
                a = a.reshape(1, -1)
            fh.write(f"{name} {a.shape[0]} {a.shape[1]}\n")
            for row in a:
                fh.write(" ".join("%.17g" % v for v in row) + "\n")

    @classmethod
    def load(cls, fh: IO[str]) -> "QpProblem":
        parts = {}
        lines = iter(fh.read().splitlines())
        for header in lines:
            if not header.strip():
                continue
            name, r, c = header.split()
            r, c = int(r), int(c)
            rows = [np.array(next(lines).split(), dtype=float) if c else np.zeros(0) for _ in range(r)]
            parts[name] = np.array(rows).reshape(r, c)
        return cls(parts["H"], parts["f"].ravel(), parts["Aeq"], parts["beq"].ravel(),
                   parts["Aineq"], parts["bineq"].ravel())


@dataclass
class QpSolution:
    x: np.ndarray
    eq_multipliers: np.ndarray
    ineq_multipliers: np.ndarray
    active_set: tuple[int, ...]
    kkt_residual: float
    objective: float
    iterations: int = 0
    regularization: float = 0.0
    residuals: dict = field(default_factory=dict)


def kkt_residuals(problem: QpProblem, x, mu, nu) -> dict:
    """Stationarity, primal/dual feasibility and complementarity (inf-norms)."""
    p = problem
    stat = p.H @ x + p.f - p.Aeq.T @ mu - p.Aineq.T @ nu
    slack = p.Aineq @ x - p.bineq
    return {
        "stationarity": float(np.abs(stat).max(initial=0.0)),
        "primal_eq": float(np.abs(p.Aeq @ x - p.beq).max(initial=0.0)),
        "primal_ineq": float(np.maximum(-slack, 0.0).max(initial=0.0)),
        "dual": float(np.maximum(-nu, 0.0).max(initial=0.0)),
        "complementarity": float(np.abs(nu * slack).max(initial=0.0)),
    }


def _null_space(A: np.ndarray, n: int) -> np.ndarray:
    if A.shape[0] == 0:
        return np.eye(n)
    _, s, vt = np.linalg.svd(A)
    tol = max(A.shape) * np.finfo(float).eps * (s[0] if s.size else 1.0)
    rank = int((s > tol).sum())
    return vt[rank:].T


def _independent(A: np.ndarray, row: np.ndarray) -> bool:
    if A.shape[0] == 0:
        return bool(np.linalg.norm(row) > 0)
    M = np.vstack([A, row])
    return np.linalg.matrix_rank(M) > np.linalg.matrix_rank(A)


class ActiveSetSolver:
    """Primal active-set QP solver.

    One instance per thread; it remembers the last optimal working set and
    tries it first on the next call (warm start).
    """

    def __init__(self, max_iter: int = 200, tol: float = 1e-11, warm_start: bool = True):
        self.max_iter = max_iter
        self.tol = tol
        self.warm_start = warm_start
        self._last_active: tuple[int, ...] = ()

    def solve(self, problem: QpProblem, working_set: Sequence[int] | None = None) -> QpSolution:
        p = problem
        n = p.n
        scale = max(1.0, np.abs(p.H).max(initial=0.0), np.abs(p.f).max(initial=0.0))
        feas_tol = 1e-9 * max(1.0, np.abs(p.bineq).max(initial=0.0))
        self._reg = 0.0

        x, W = None, []
        if working_set is None and self.warm_start:
            working_set = self._last_active
        for guess in ([] if working_set is None else [sorted(working_set)]) + [[]]:
            if guess and (max(guess) >= p.Aineq.shape[0]):
                continue
            cand = self._eqp_point(p, guess)
            if cand is not None and np.all(p.Aineq @ cand - p.bineq >= -feas_tol):
                x, W = cand, list(guess)
                break
        if x is None:
            x = self._phase_one(p, feas_tol)
            slack = p.Aineq @ x - p.bineq
            W = []
            for i in np.argsort(slack, kind="stable"):
                if slack[i] > feas_tol:
                    break
                if _independent(np.vstack([p.Aeq, p.Aineq[W]]), p.Aineq[i]):
                    W.append(int(i))
            W.sort()

        for it in range(1, self.max_iter + 1):
            g = p.H @ x + p.f
            A_act = np.vstack([p.Aeq, p.Aineq[W]])
            step, ray = self._eqp_step(p.H, g, A_act, n, scale)
            if not ray and np.linalg.norm(step, np.inf) <= self.tol * max(1.0, np.linalg.norm(x, np.inf)):
                y = np.linalg.lstsq(A_act.T, g, rcond=None)[0] if A_act.shape[0] else np.zeros(0)
                nu_w = y[p.Aeq.shape[0]:]
                if nu_w.size == 0 or nu_w.min() >= -1e-10 * scale:
                    return self._finish(p, x, W, it)
                W.pop(int(np.argmin(nu_w)))
                continue
            # ratio test
            alpha, block = (np.inf if ray else 1.0), None
            for i in range(p.Aineq.shape[0]):
                if i in W:
                    continue
                ap = p.Aineq[i] @ step
                if ap < -1e-14 * max(1.0, np.linalg.norm(step)):
                    ai = max(0.0, (p.bineq[i] - p.Aineq[i] @ x) / ap)
                    if ai < alpha:
                        alpha, block = ai, i
            if block is None and ray:
                raise Unbounded("objective is unbounded below on the feasible set")
            x = x + alpha * step
            if block is not None:
                W.append(block)
                W.sort()
        raise MaxIterations(f"active-set solver did not converge in {self.max_iter} iterations")

    # -- internals ----------------------------------------------------------
    def _eqp_point(self, p: QpProblem, W: list[int]) -> Optional[np.ndarray]:
        """Minimiser with Aeq and the rows W held as equalities, or None."""
        A = np.vstack([p.Aeq, p.Aineq[W]])
        b = np.concatenate([p.beq, p.bineq[W]])
        m = A.shape[0]
        K = np.block([[p.H, A.T], [A, np.zeros((m, m))]])
        try:
            sol = np.linalg.solve(K, np.concatenate([-p.f, b]))
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(sol)) or np.linalg.cond(K) > 1e14:
            return None
        x = sol[: p.n]
        if np.abs(A @ x - b).max(initial=0.0) > 1e-9 * max(1.0, np.abs(b).max(initial=0.0)):
            return None
        return x

    def _eqp_step(self, H, g, A, n, scale):
        Z = _null_space(A, n)
        if Z.shape[1] == 0:
            return np.zeros(n), False
        Hz = Z.T @ H @ Z
        gz = Z.T @ g
        w, V = np.linalg.eigh(Hz)
        tiny = 1e-12 * scale
        if w[0] > tiny:
            return -Z @ np.linalg.solve(Hz, gz), False
        # zero-curvature directions: descend along them if g has a component
        flat = V[:, w <= tiny]
        d = Z @ (flat @ (flat.T @ gz))
        if np.linalg.norm(d) > 1e-9 * max(1.0, np.linalg.norm(g)):
            return -d / np.linalg.norm(d), True
        self._reg = REGULARIZATION
        return -Z @ np.linalg.solve(Hz + REGULARIZATION * np.eye(Hz.shape[0]), gz), False

    def _phase_one(self, p: QpProblem, feas_tol: float) -> np.ndarray:
        n, mi = p.n, p.Aineq.shape[0]
        c = np.zeros(n + 1)
        c[-1] = 1.0
        A_ub = np.hstack([-p.Aineq, -np.ones((mi, 1))])
        A_eq = np.hstack([p.Aeq, np.zeros((p.Aeq.shape[0], 1))]) if p.Aeq.shape[0] else None
        res = linprog(c, A_ub=A_ub, b_ub=-p.bineq, A_eq=A_eq,
                      b_eq=p.beq if A_eq is not None else None,
                      bounds=[(None, None)] * n + [(0, None)], method="highs")
        if res.status != 0 or res.x[-1] > feas_tol:
            raise Infeasible("no point satisfies the constraints")
        return res.x[:n]

    def _finish(self, p: QpProblem, x, W, iterations) -> QpSolution:
        me = p.Aeq.shape[0]
        A = np.vstack([p.Aeq, p.Aineq[W]])
        b = np.concatenate([p.beq, p.bineq[W]])
        m = A.shape[0]
        # polish: one exact KKT solve on the final working set
        K = np.block([[p.H + self._reg * np.eye(p.n), A.T], [A, np.zeros((m, m))]])
        try:
            sol = np.linalg.solve(K, np.concatenate([-p.f, b]))
            x_pol, y = sol[: p.n], -sol[p.n:]
            if np.all(np.isfinite(sol)) and np.linalg.cond(K) < 1e14:
                x = x_pol
            else:
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            g = p.H @ x + p.f
            y = np.linalg.lstsq(A.T, g, rcond=None)[0] if m else np.zeros(0)
        mu = y[:me]
        nu = np.zeros(p.Aineq.shape[0])
        nu[W] = y[me:]
        res = kkt_residuals(p, x, mu, nu)
        self._last_active = tuple(W)
        return QpSolution(x=x, eq_multipliers=mu, ineq_multipliers=nu, active_set=tuple(W),
                          kkt_residual=max(res.values()), objective=p.objective(x),
                          iterations=iterations, regularization=self._reg, residuals=res)


def solve(problem: QpProblem) -> QpSolution:
    """Solve with a fresh (cold-start) solver instance."""
    return ActiveSetSolver(warm_start=False).solve(problem)

"""Invariant audit of a logged run (the ``check`` command)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .simlog import SimLog

GAP_TOL = 1e-9
FORCE_TOL = 1e-9
COMPL_TOL = 1e-9
KKT_TOL = 1e-8
ENERGY_TOL = 1e-9


@dataclass
class AuditReport:
    checks: dict = field(default_factory=dict)  # name -> (passed, detail)

    def add(self, name: str, passed: bool, detail: str) -> None:
        self.checks[name] = (bool(passed), detail)

    @property
    def ok(self) -> bool:
        return all(p for p, _ in self.checks.values())

    def lines(self) -> list[str]:
        return [f"{'PASS' if p else 'FAIL'} {name}: {d}" for name, (p, d) in self.checks.items()]


def audit_log(log: SimLog) -> AuditReport:
    rep = AuditReport()
    data = log.data
    rep.add("finite", bool(np.all(np.isfinite(data))), f"{data.shape[0]} samples")
    t = log["t"]
    rep.add("time_monotone", bool(np.all(np.diff(t) > 0)), f"t in [{t[0]:.6g}, {t[-1]:.6g}]")

    lam = log.cols("lambda1", "lambda2")
    if log.model == "rigid":
        gap = log.cols("gamma1", "gamma2")
        rep.add("gap_nonnegative", gap.min() >= -GAP_TOL, f"min gap {gap.min():.3e} m")
        rep.add("force_nonnegative", lam.min() >= -FORCE_TOL, f"min force {lam.min():.3e} N")
        comp = np.abs(gap * lam).max()
        rep.add("complementarity", comp <= COMPL_TOL, f"max |gap*force| {comp:.3e}")
    else:
        rep.add("force_nonnegative", lam.min() >= 0.0, f"min force {lam.min():.3e} N")

    kkt = log["kkt_residual"]
    rep.add("qp_kkt", kkt.max() <= KKT_TOL, f"max KKT residual {kkt.max():.3e}")
    mode = log["mode"]
    rep.add("mode_monotone", bool(np.all(np.diff(mode) >= 0)), f"modes seen {sorted({int(m) for m in mode})}")
    impacts = [e for e in log.events if e.kind == "impact" and (e.T_minus or e.T_plus)]
    if impacts:
        worst = max(e.dT - ENERGY_TOL * max(e.T_minus, 1.0) for e in impacts)
        rep.add("impact_energy", worst <= 0.0, f"{len(impacts)} impacts, max dT {max(e.dT for e in impacts):.3e} J")
    return rep

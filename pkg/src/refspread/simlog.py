"""Simulation log container and its CSV serialisation.

Main file: one row per control period, fixed column order, ``%.12e``
formatting, first line ``# schema: refspread-simlog/1 <model>``.  Side-car
event file: one row per impact or release event.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import IO, Optional

import numpy as np

from .errors import SchemaMismatch

SCHEMA_VERSION = "refspread-simlog/1"

RIGID_COLUMNS = (
    "t",
    "q1", "q2", "q3", "q4",
    "qd1", "qd2", "qd3", "qd4",
    "px", "py", "theta", "vx", "vy", "thetadot",
    "gamma1", "gamma2", "gammadot1", "gammadot2", "lambda1", "lambda2",
    "tau1", "tau2", "tau3",
    "mode", "qp_cost", "kkt_residual",
    "ante_px", "ante_py", "ante_vx", "ante_vy", "ante_theta", "ante_thetadot",
    "post_px", "post_py", "post_vx", "post_vy",
)
FLEX_COLUMNS = RIGID_COLUMNS + (
    "theta_rob1", "theta_rob2", "theta_rob3",
    "tau_flex1", "tau_flex2", "tau_flex3",
    "step",
)
EVENT_COLUMNS = ("t", "kind", "contacts", "impulse1", "impulse2", "T_minus", "T_plus", "dT")


@dataclass
class Event:
    t: float
    kind: str  # "impact", "contact" (zero-speed closure) or "release"
    contacts: tuple[int, ...]
    impulse: np.ndarray = field(default_factory=lambda: np.zeros(2))
    T_minus: float = 0.0
    T_plus: float = 0.0

    @property
    def dT(self) -> float:
        return self.T_plus - self.T_minus


@dataclass
class SimLog:
    model: str
    columns: tuple[str, ...]
    rows: list = field(default_factory=list)
    events: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    error: Optional[str] = None
    _arr: Optional[np.ndarray] = field(default=None, repr=False)

    def append(self, row) -> None:
        if len(row) != len(self.columns):
            raise SchemaMismatch(f"row has {len(row)} entries, schema has {len(self.columns)}")
        self.rows.append(row)
        self._arr = None

    @property
    def data(self) -> np.ndarray:
        if self._arr is None or len(self._arr) != len(self.rows):
            self._arr = np.array(self.rows, dtype=float).reshape(-1, len(self.columns))
        return self._arr

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.data[:, self.columns.index(name)]
        except ValueError:
            raise KeyError(name) from None

    def cols(self, *names) -> np.ndarray:
        return np.column_stack([self[n] for n in names])

    def impacts(self) -> list[Event]:
        return [e for e in self.events if e.kind == "impact"]

    # -- serialisation ----------------------------------------------------
    def write_csv(self, fh: IO[str]) -> None:
        fh.write(f"# schema: {SCHEMA_VERSION} {self.model}\n")
        fh.write(",".join(self.columns) + "\n")
        for row in self.rows:
            fh.write(",".join("%.12e" % v for v in row) + "\n")

    def write_events(self, fh: IO[str]) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVENT_COLUMNS)
        for e in self.events:
            contacts = ";".join(str(i + 1) for i in e.contacts)
            w.writerow(["%.12e" % e.t, e.kind, contacts, "%.12e" % e.impulse[0], "%.12e" % e.impulse[1],
                        "%.12e" % e.T_minus, "%.12e" % e.T_plus, "%.12e" % e.dT])

    @classmethod
    def read_csv(cls, path, events_path=None) -> "SimLog":
        with open(path) as fh:
            first = fh.readline().strip()
            if not first.startswith("# schema:"):
                raise SchemaMismatch(f"{path}: missing schema line")
            parts = first.split()
            if len(parts) < 3 or parts[2] != SCHEMA_VERSION:
                raise SchemaMismatch(f"{path}: unsupported schema {first!r}")
            model = parts[3] if len(parts) > 3 else "rigid"
            header = tuple(fh.readline().strip().split(","))
            expected = FLEX_COLUMNS if model == "flexible" else RIGID_COLUMNS
            if header != expected:
                raise SchemaMismatch(f"{path}: column layout does not match schema")
            rows = [[float(v) for v in line.split(",")] for line in fh if line.strip()]
        log = cls(model=model, columns=header, rows=rows)
        if events_path is not None:
            with open(events_path) as fh:
                r = csv.DictReader(fh)
                for rec in r:
                    contacts = tuple(int(c) - 1 for c in rec["contacts"].split(";") if c)
                    log.events.append(Event(float(rec["t"]), rec["kind"], contacts,
                                            np.array([float(rec["impulse1"]), float(rec["impulse2"])]),
                                            float(rec["T_minus"]), float(rec["T_plus"])))
        return log

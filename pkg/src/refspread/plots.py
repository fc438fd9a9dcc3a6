"""Static comparison figures from simulation CSVs (SVG via matplotlib)."""
from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from . import metrics  # noqa: E402
from .errors import SchemaMismatch  # noqa: E402
from .simlog import SimLog  # noqa: E402

STRATEGY_STYLE = {
    "rs_intermediate": ("RS with intermediate", "C0"),
    "rs_no_intermediate": ("RS without intermediate", "C1"),
    "no_rs": ("No RS", "C2"),
}


def load_run(csv_path) -> SimLog:
    """Read a run CSV (and its side-car events file when present)."""
    csv_path = Path(csv_path)
    ev = csv_path.with_name(csv_path.stem + "_events.csv")
    log = SimLog.read_csv(csv_path, ev if ev.exists() else None)
    stem = csv_path.stem
    for key in STRATEGY_STYLE:
        if stem.endswith("_" + key):
            log.meta["strategy"] = key
    if "strategy" not in log.meta:
        raise SchemaMismatch(f"{csv_path}: cannot infer the strategy from the file name")
    return log


def plot_velocities(log: SimLog, path, title: str = "") -> Path:
    """End-effector velocities and contact forces of one run."""
    t = log["t"]
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(7, 5.5))
    ax1.plot(t, log["vx"], label=r"$\dot x$")
    ax1.plot(t, log["vy"], label=r"$\dot y$")
    ax1.plot(t, log["thetadot"], label=r"$\dot\theta$")
    ax1.plot(t, log["post_vx"], "k:", lw=0.8)
    ax1.plot(t, log["post_vy"], "k:", lw=0.8, label="post reference")
    ax1.set_ylabel("velocity [m/s, rad/s]")
    ax1.legend(loc="best", fontsize=8)
    ax2.plot(t, log["lambda1"], label=r"$\lambda_1$")
    ax2.plot(t, log["lambda2"], label=r"$\lambda_2$")
    ax2.set_ylabel("contact force [N]")
    ax2.set_xlabel("t [s]")
    ax2.legend(loc="best", fontsize=8)
    _shade_modes(ax1, log)
    _shade_modes(ax2, log)
    if title:
        ax1.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return Path(path)


def _shade_modes(ax, log: SimLog):
    st = metrics.mode_times(log)
    if "INTERMEDIATE" in st:
        ax.axvspan(st["INTERMEDIATE"], st.get("POST", log["t"][-1]), color="0.9", zorder=0)


def plot_torques(logs: Sequence[SimLog], nominal: Optional[SimLog], path, title: str = "",
                 window: Optional[tuple[float, float]] = None) -> Path:
    """Commanded torque per joint for each strategy, with the nominal trace."""
    fig, axes = plt.subplots(3, 1, sharex=True, figsize=(7, 7))
    for j, ax in enumerate(axes):
        name = f"tau{j + 1}"
        if nominal is not None:
            ax.plot(nominal["t"], nominal[name], "k--", lw=1.0, label="nominal")
        for log in logs:
            label, color = STRATEGY_STYLE.get(log.meta.get("strategy"), (log.meta.get("strategy"), None))
            ax.plot(log["t"], log[name], color=color, lw=1.0, label=label)
        ax.set_ylabel(rf"$\tau^*_{j + 1}$ [Nm]")
        if window is not None:
            ax.set_xlim(*window)
    axes[0].legend(loc="best", fontsize=8)
    axes[-1].set_xlabel("t [s]")
    if title:
        axes[0].set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return Path(path)


def emit_plots(csv_paths: Sequence, outdir, nominal: Optional[dict] = None, nominal_factory=None,
               window: Optional[tuple[float, float]] = None) -> list[Path]:
    """Velocity/force and torque panels for every model found in ``csv_paths``.

    ``nominal`` maps model name to a zero-offset RS-with-intermediate log.
    Missing entries are produced by ``nominal_factory(model)`` when given.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    by_model: dict[str, list[SimLog]] = {}
    for p in csv_paths:
        log = load_run(p)
        by_model.setdefault(log.model, []).append(log)
    nominal = dict(nominal or {})
    written = []
    for model, logs in sorted(by_model.items()):
        if model not in nominal and nominal_factory is not None:
            nominal[model] = nominal_factory(model)
        rs = [lg for lg in logs if lg.meta["strategy"] == "rs_intermediate"]
        if rs:
            written.append(plot_velocities(rs[0], outdir / f"{model}_velocities.svg",
                                           f"{model}: RS with intermediate"))
        written.append(plot_torques(logs, nominal.get(model), outdir / f"{model}_torques.svg",
                                    f"{model}: commanded torque", window))
    return written

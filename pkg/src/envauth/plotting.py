"""Figure rendering for the CLI report paths.

Figures are written next to the delimited outputs; the CSVs stay the
authoritative record and the plots are a convenience view of them.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .simulate import MetricsReport

FIG_SIZE = (7.0, 4.2)
DPI = 150


def _new_axes():
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    ax.grid(True, alpha=0.3)
    return fig, ax


def save_distance_figure(report: MetricsReport, path: str | Path) -> Path:
    """Per-window mean distances for legit and attacker streams, both pipelines."""
    path = Path(path)
    rows = report.per_window
    windows = sorted({row["window"] for row in rows})

    def series(attacker: bool, key: str) -> list[float] | None:
        values = []
        for w in windows:
            picked = [
                row[key]
                for row in rows
                if row["window"] == w and row["object_id"].endswith("#attacker") == attacker
            ]
            if not picked:
                return None
            values.append(float(np.mean(picked)))
        return values

    fig, ax = _new_axes()
    ax.plot(windows, series(False, "delta"), "o-", label="legitimate, no estimation")
    ax.plot(windows, series(False, "delta_hat"), "s-", label="legitimate, env estimation")
    attacker_delta = series(True, "delta")
    if attacker_delta is not None:
        ax.plot(windows, attacker_delta, "^--", label="attacker, no estimation")
        ax.plot(windows, series(True, "delta_hat"), "v--", label="attacker, env estimation")
    ax.axhline(report.tau_prime, color="gray", linestyle=":", label="threshold (no estimation)")
    ax.axhline(report.tau, color="black", linestyle=":", label="threshold (env estimation)")
    ax.set_xlabel("window")
    ax.set_ylabel("distance to reference")
    ax.set_yscale("symlog", linthresh=1e-3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def save_sweep_figure(
    sweep: list[tuple[float, float, float]], path: str | Path
) -> Path:
    """Verdict accuracy against the threshold for both pipelines."""
    path = Path(path)
    taus = [point[0] for point in sweep]
    acc_base = [point[1] for point in sweep]
    acc_env = [point[2] for point in sweep]
    fig, ax = _new_axes()
    ax.plot(taus, acc_base, "o-", label="no estimation")
    ax.plot(taus, acc_env, "s-", label="env estimation")
    ax.set_xlabel("threshold")
    ax.set_ylabel("fraction of correct verdicts")
    ax.set_ylim(-0.02, 1.02)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def save_transfer_figure(rows: list[dict], path: str | Path) -> Path:
    """Mean corrected distance per relatedness class for each transfer weight."""
    path = Path(path)
    classes = [row["class"] for row in rows]
    fig, ax = _new_axes()
    ax.plot(classes, [row["no_transfer"] for row in rows], "k--", label="no transfer")
    for key in rows[0]:
        if key.startswith("alpha_"):
            label = f"transfer weight {key.removeprefix('alpha_')}"
            ax.plot(classes, [row[key] for row in rows], "o-", label=label)
    ax.set_xlabel("source relatedness class (1 = most related)")
    ax.set_ylabel("mean corrected distance")
    ax.set_xticks(classes)
    ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path

"""Static figures of the daily profiles and regret curves."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .metrics import SummaryRow  # noqa: E402

STYLE = {"bcomd": ("C0", "o"), "3gpp-tn": ("C1", "s"), "3gpp-ntn": ("C2", "^")}
LABELS = {"bcomd": "BCOMD", "3gpp-tn": "3GPP-TN", "3gpp-ntn": "3GPP-NTN"}

PROFILES = {
    "satisfied": ("Satisfied UE proportion", lambda m: 1.0 - m["unsatisfied_fraction"],
                  "unsatisfied_fraction", 1.0),
    "throughput": ("Sum throughput [Mbit/s]", lambda m: m["sum_throughput_bps"],
                   "sum_throughput_bps", 1e-6),
    "energy": ("TN energy [kWh]", lambda m: m["tn_energy_wh"], "tn_energy_wh", 1e-3),
}


def _series(summary: Sequence[SummaryRow], setting: str, key: str):
    rows = sorted((s for s in summary if s.setting == setting), key=lambda s: s.hour)
    _, value, ci_key, scale = PROFILES[key]
    hours = np.array([s.hour for s in rows])
    y = np.array([value(s.mean) for s in rows]) * scale
    ci = np.array([s.ci_half_width[ci_key] for s in rows]) * scale
    return hours, y, ci


def plot_profile(summary: Sequence[SummaryRow], key: str, path: str | Path) -> Path:
    label = PROFILES[key][0]
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    for setting in sorted({s.setting for s in summary}):
        hours, y, ci = _series(summary, setting, key)
        color, marker = STYLE.get(setting, (None, "."))
        ax.plot(hours, y, marker=marker, ms=4, color=color, label=LABELS.get(setting, setting))
        if np.any(ci > 0):
            ax.fill_between(hours, y - ci, y + ci, color=color, alpha=0.2, lw=0)
    ax.set_xlabel("Hour of day")
    ax.set_ylabel(label)
    ax.set_xlim(0, 23)
    ax.set_xticks(range(0, 24, 3))
    ax.grid(alpha=0.3)
    ax.legend(frameon=False)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_daily_profiles(summary: Sequence[SummaryRow], out_dir: str | Path,
                        fmt: str = "pdf") -> list[Path]:
    out = Path(out_dir)
    return [plot_profile(summary, key, out / f"daily_{key}.{fmt}") for key in PROFILES]


def plot_regret(curves: dict[str, tuple[np.ndarray, np.ndarray]], path: str | Path) -> Path:
    fig, (ax_r, ax_v) = plt.subplots(1, 2, figsize=(8.0, 3.2))
    for name, (r, v) in curves.items():
        steps = np.arange(1, len(r) + 1)
        ax_r.plot(steps, r, label=name)
        ax_v.plot(steps, v, label=name)
    ax_r.set_ylabel("Cumulative regret")
    ax_v.set_ylabel("Cumulative violation")
    for ax in (ax_r, ax_v):
        ax.set_xlabel("Step")
        ax.grid(alpha=0.3)
    ax_r.legend(frameon=False)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    plt.close(fig)
    return path

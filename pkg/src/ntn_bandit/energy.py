"""Terrestrial MBS power model and TN energy aggregation.

The satellite runs on solar power and never contributes to TN energy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PowerModel:
    p0_w: float = 100.0  # baseline, drawn even when shut down
    psi_w: float = 200.0  # static, drawn while transmitting
    p_tx_per_re_w: float = 10 ** (17.7 / 10) / 1000.0

    def __post_init__(self):
        if min(self.p0_w, self.psi_w, self.p_tx_per_re_w) < 0:
            raise ValueError("power components must be >= 0")

    def tx_power(self, used_res) -> np.ndarray:
        """Dynamic power for a number of occupied resource elements."""
        return self.p_tx_per_re_w * np.asarray(used_res, dtype=float)


def mbs_power(model: PowerModel, active: bool, tx_power_w: float) -> float:
    """Q = P0 + p + psi * 1{p > 0}; an inactive MBS draws P0 only."""
    if not active:
        return model.p0_w
    if tx_power_w < 0:
        raise ValueError("tx power must be >= 0")
    return model.p0_w + tx_power_w + (model.psi_w if tx_power_w > 0 else 0.0)


def mbs_powers(model: PowerModel, tx_power_w: np.ndarray) -> np.ndarray:
    """Vectorised :func:`mbs_power`; zero dynamic power means inactive."""
    p = np.asarray(tx_power_w, dtype=float)
    return model.p0_w + p + np.where(p > 0, model.psi_w, 0.0)


def tn_energy(per_mbs_powers, slot_duration_s: float) -> float:
    """Energy of the terrestrial MBSs over one slot, in Wh."""
    if slot_duration_s <= 0:
        raise ValueError("slot duration must be > 0")
    return float(np.sum(per_mbs_powers)) * slot_duration_s / 3600.0

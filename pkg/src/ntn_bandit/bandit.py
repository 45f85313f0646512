"""Bandit-feedback constrained online mirror descent over a finite arm set.

One step of the learner:

* sample ``a ~ x``;
* observe cost ``f`` and violation ``g`` of arm ``a`` only;
* build the importance-weighted gradient ``b = (omega + f + lam * g) / x_a``
  on coordinate ``a``;
* exponentiated-gradient update ``y = x * exp(-eta * b)`` (negative-entropy
  mirror map);
* KL projection of ``y`` onto the clipped simplex ``{x : sum x = 1, x >= gamma}``;
* dual ascent ``lam <- max(0, lam + mu * g)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .heuristic import ThetaConfig

GRID_ORDER = ("epsilon", "tau_nu", "tau_rsrp_dbm", "alpha")
_EXP_CLIP = 700.0


class ArmSpace:
    """Cartesian product of the parameter grids, indexed row-major in
    ``GRID_ORDER`` (alpha varies fastest)."""

    def __init__(self, grids: dict[str, list[float]]):
        self.grids = {k: [float(v) for v in grids[k]] for k in GRID_ORDER}
        self.shape = tuple(len(self.grids[k]) for k in GRID_ORDER)
        self.arms = [ThetaConfig(*vals) for vals in itertools.product(*(self.grids[k] for k in GRID_ORDER))]

    @property
    def n(self) -> int:
        return len(self.arms)

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, index: int) -> ThetaConfig:
        return self.arms[index]

    def index(self, theta: ThetaConfig) -> int:
        idx = [self.grids[k].index(v) for k, v in zip(GRID_ORDER, theta.as_tuple())]
        return int(np.ravel_multi_index(idx, self.shape))

    def to_dict(self) -> dict[str, list[float]]:
        return {k: list(v) for k, v in self.grids.items()}


@dataclass(frozen=True)
class Hyperparameters:
    eta: float
    gamma: float
    omega: float
    mu: float

    @classmethod
    def defaults(cls, n: int, horizon: int, eta: float | None = None, gamma: float | None = None,
                 omega: float | None = None, mu: float | None = None) -> "Hyperparameters":
        """Horizon-scaled defaults; explicit values override each one."""
        t = max(int(horizon), 1)
        return cls(
            eta=math.sqrt(math.log(max(n, 2)) / (n * t)) if eta is None else float(eta),
            gamma=min(1.0 / (2 * n), t ** -0.5) if gamma is None else float(gamma),
            omega=t ** -0.5 if omega is None else float(omega),
            mu=t ** -0.25 if mu is None else float(mu),
        )

    def validate(self, n: int) -> None:
        if self.eta < 0:
            raise ValueError("eta must be >= 0")
        if not 0.0 <= self.gamma <= 1.0 / n + 1e-15:
            raise ValueError(f"gamma must lie in [0, 1/n] = [0, {1.0 / n}], got {self.gamma}")
        if self.omega < 0:
            raise ValueError("omega must be >= 0")
        if self.mu <= 0:
            raise ValueError("mu must be > 0")


@dataclass
class PolicyState:
    x: np.ndarray
    lam: float
    hyper: Hyperparameters
    t: int = 0

    @classmethod
    def initial(cls, n: int, hyper: Hyperparameters) -> "PolicyState":
        hyper.validate(n)
        return cls(np.full(n, 1.0 / n), 0.0, hyper, 0)

    def to_dict(self) -> dict:
        return {
            "x": self.x.tolist(),
            "lambda": self.lam,
            "t": self.t,
            "hyper": {"eta": self.hyper.eta, "gamma": self.hyper.gamma,
                      "omega": self.hyper.omega, "mu": self.hyper.mu},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PolicyState":
        return cls(np.asarray(data["x"], dtype=float), float(data["lambda"]),
                   Hyperparameters(**data["hyper"]), int(data["t"]))


@dataclass(frozen=True)
class FeedbackRecord:
    t: int
    arm: int
    cost: float
    violation: float
    x_at: float
    lam: float = 0.0


def sample_action(state: PolicyState, rng: np.random.Generator) -> int:
    """Draw an arm from the categorical distribution ``state.x``."""
    cdf = np.cumsum(state.x)
    u = rng.random() * cdf[-1]
    return int(min(np.searchsorted(cdf, u, side="right"), len(cdf) - 1))


def gradient_estimates(record: FeedbackRecord, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Importance-weighted one-hot estimates of the cost and violation vectors."""
    if record.x_at <= 0:
        raise ValueError("sampled arm must have positive probability")
    f = np.zeros(n)
    g = np.zeros(n)
    f[record.arm] = record.cost / record.x_at
    g[record.arm] = record.violation / record.x_at
    return f, g


def combined_gradient(record: FeedbackRecord, state: PolicyState) -> np.ndarray:
    """Bias plus Lagrangian gradient estimate, nonzero at the sampled arm only."""
    f, g = gradient_estimates(record, len(state.x))
    b = f + state.lam * g
    b[record.arm] += state.hyper.omega / record.x_at
    return b


def omd_step(state: PolicyState, b: np.ndarray) -> np.ndarray:
    """Unnormalised exponentiated-gradient iterate ``x * exp(-eta * b)``."""
    expo = np.clip(-state.hyper.eta * np.asarray(b, dtype=float), -_EXP_CLIP, _EXP_CLIP)
    return state.x * np.exp(expo)


def project_clipped_simplex(y: np.ndarray, gamma: float) -> np.ndarray:
    """KL projection onto ``{x : sum x = 1, x_a >= gamma}``.

    The minimiser has the form ``x_a = max(gamma, c * y_a)``. Coordinates are
    scanned from the smallest ``y`` upward: clipping the ``k`` smallest gives
    ``c = (1 - k gamma) / sum(rest)``, valid once ``c * y`` at the first
    unclipped coordinate reaches ``gamma``.
    """
    y = np.asarray(y, dtype=float)
    n = len(y)
    if np.any(y <= 0):
        raise ValueError("projection needs a strictly positive point")
    if gamma * n > 1.0 + 1e-12:
        raise ValueError(f"gamma={gamma} exceeds 1/n for n={n}")
    if gamma <= 0:
        return y / y.sum()
    order = np.argsort(y)
    ys = y[order]
    tail = np.cumsum(ys[::-1])[::-1]  # tail[k] = sum(ys[k:])
    mass = 1.0 - gamma * np.arange(n)
    c = mass / tail
    valid = (mass > 0) & (c * ys >= gamma)
    if not valid.any():
        return np.full(n, 1.0 / n)
    return np.maximum(gamma, c[np.argmax(valid)] * y)


def dual_update(state: PolicyState, g_value: float) -> float:
    return max(0.0, state.lam + state.hyper.mu * g_value)


class BCOMD:
    """Stateful learner wrapping the step functions above."""

    def __init__(self, n_arms: int, hyper: Hyperparameters, state: PolicyState | None = None):
        self.n = n_arms
        self.state = state if state is not None else PolicyState.initial(n_arms, hyper)

    def select(self, rng: np.random.Generator) -> int:
        return sample_action(self.state, rng)

    def update(self, arm: int, cost: float, violation: float) -> FeedbackRecord:
        st = self.state
        record = FeedbackRecord(st.t, arm, float(cost), float(violation), float(st.x[arm]), st.lam)
        b = combined_gradient(record, st)
        y = omd_step(st, b)
        x_next = project_clipped_simplex(y, st.hyper.gamma)
        lam_next = dual_update(st, record.violation)
        self.state = PolicyState(x_next, lam_next, st.hyper, st.t + 1)
        return record


@dataclass
class OracleResult:
    losses: np.ndarray  # (T,)
    arms: np.ndarray  # (T,)
    infeasible: np.ndarray = field(default_factory=lambda: np.zeros(0, bool))  # (T,)


def oracle_policy(losses: np.ndarray, violations: np.ndarray) -> OracleResult:
    """Per-step best arm among zero-violation arms.

    When no arm is feasible at a step, the minimum-violation arms are used
    instead and the step is flagged.
    """
    f = np.atleast_2d(np.asarray(losses, dtype=float))
    g = np.atleast_2d(np.asarray(violations, dtype=float))
    g_min = g.min(axis=1, keepdims=True)
    candidates = g <= g_min
    arm = np.argmin(np.where(candidates, f, np.inf), axis=1)
    t = np.arange(len(f))
    return OracleResult(f[t, arm], arm, g_min[:, 0] > 0)


def regret_and_violation(realized_costs, realized_violations,
                         oracle_losses) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative regret against the oracle and cumulative violation."""
    c = np.asarray(realized_costs, dtype=float)
    v = np.asarray(realized_violations, dtype=float)
    o = np.asarray(oracle_losses, dtype=float)
    if not len(c) == len(v) == len(o):
        raise ValueError("sequences must be aligned")
    return np.cumsum(c - o), np.cumsum(v)

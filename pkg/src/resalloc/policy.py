"""Admission policies for the original system.

Every ranked policy (the index policy and the two greedy baselines) is a
pattern priority order plus an integer ceiling per (pool, pattern).  A
decision pass walks the order, gives each request type the first pattern
that fits, and reserves that pattern's units before looking further down.
The Random baseline instead draws uniformly among patterns that fit at the
moment a request arrives, without reserving anything.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .model import SystemModel, state_space_sizes
from .relaxed import Ranking

KINDS = ("index", "max-reward", "min-cost", "random")


@dataclass
class EpsilonSchedule:
    """Reservation fractions eps_bar[j, i] per pool and pattern.

    Entries for pools a pattern does not use are 0 and never consulted.
    """

    table: np.ndarray
    eps_m: float
    clamped: bool = False

    def ceilings(self, C) -> np.ndarray:
        """ceil(C_j (1 - eps_bar[j, i])), guarded against round-up noise."""
        C = np.asarray(C, dtype=float)[:, None]
        return np.ceil(C * (1.0 - self.table) - 1e-9).astype(np.int64)


def epsilon_schedule(model: SystemModel, order, eps_m: float, C) -> EpsilonSchedule:
    """Linear reservation ramp along each pool's users in priority order.

    The base value (w_{j,i} - 1) / C_j makes the ceiling exactly C_j - w + 1,
    which with the unit increment used in the decision pass is the plain
    capacity check.  On top of it the k-th of the m users of pool j reserves
    eps_m k / (m - 1) of the pool, so the top user keeps the plain check, the
    last one leaves an extra eps_m C_j units free.  Entries are capped at 1;
    ``clamped`` records whether that happened.
    """
    if not 0.0 <= eps_m <= 1.0:
        raise ValueError("eps_m must lie in [0, 1]")
    C = np.asarray(C, dtype=float)
    W = model.weights
    table = np.where(W > 0, (W - 1) / C[:, None], 0.0)
    live = [int(i) for i in order if not model.dummy[i]]
    if eps_m > 0.0:
        for j in range(model.num_pools):
            users = [i for i in live if W[j, i] > 0]
            m = len(users)
            for k, i in enumerate(users[1:], start=1):
                table[j, i] += eps_m * k / (m - 1)
    clamped = bool(np.any(table > 1.0))
    if clamped:
        warnings.warn("reservation above the whole pool; capped at 1", RuntimeWarning)
        table = np.minimum(table, 1.0)
    return EpsilonSchedule(table, eps_m, clamped)


@dataclass
class PolicySpec:
    """A policy description that the simulator can compile.

    ``order`` is a pattern priority list (dummies may appear: a request type
    reaching its dummy is blocked).  Baseline orders are derived from the
    model when omitted.
    """

    kind: str
    order: list | None = None
    eps_m: float = 0.0
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.kind == "index" and self.order is None:
            raise ValueError("an index policy needs a ranking")
        if not self.label:
            self.label = f"index:eps={self.eps_m:g}" if self.kind == "index" else self.kind

    @classmethod
    def index(cls, ranking: Ranking | list, eps_m: float = 0.0, **meta) -> "PolicySpec":
        order = ranking.pattern_order() if isinstance(ranking, Ranking) else list(ranking)
        return cls("index", order, eps_m, meta=dict(meta, ramp="linear"))


def baseline_order(model: SystemModel, kind: str) -> list[int]:
    """Greedy priority orders; dummies are left out so they act as last resort."""
    live = [int(i) for i in np.flatnonzero(~model.dummy)]
    if kind == "max-reward":
        score = model.rewards[model.owner] * model.service_rates
        return sorted(live, key=lambda i: (-score[i], i))
    if kind == "min-cost":
        return sorted(live, key=lambda i: (model.pattern_cost[i], i))
    raise ValueError(f"no fixed order for {kind!r}")


@dataclass
class CompiledPolicy:
    """Integer arrays consumed by the simulation kernels."""

    mode: int                 # 0 ranked, 1 random
    order: np.ndarray         # pattern priority list
    ceil: np.ndarray          # (J, I) ceilings
    state_cap: np.ndarray     # (I,) max count per pattern at this scale
    schedule: EpsilonSchedule | None


def compile_policy(model: SystemModel, spec: PolicySpec, h: int) -> CompiledPolicy:
    C = model.capacities * h
    cap = (state_space_sizes(model) - 1) * h
    cap = np.where(model.dummy, 0, cap).astype(np.int64)
    if spec.kind == "random":
        return CompiledPolicy(1, np.zeros(0, dtype=np.int64),
                              np.zeros(model.weights.shape, dtype=np.int64), cap, None)
    order = spec.order if spec.kind == "index" else (spec.order or baseline_order(model, spec.kind))
    order = np.array(order, dtype=np.int64)
    eps = spec.eps_m if spec.kind == "index" else 0.0
    sched = epsilon_schedule(model, order, eps, C)
    return CompiledPolicy(0, order, sched.ceilings(C), cap, sched)


def ranked_decide(model: SystemModel, cp: CompiledPolicy, N) -> np.ndarray:
    """One decision pass; returns the chosen pattern per request type."""
    N = np.asarray(N)
    W = model.weights
    used = W @ N
    reserved = np.zeros(model.num_pools, dtype=np.int64)
    choice = np.full(model.num_request_types, -1, dtype=np.int64)
    for i in cp.order:
        rt = model.owner[i]
        if choice[rt] >= 0:
            continue
        if model.dummy[i]:
            choice[rt] = i
            continue
        if N[i] >= cp.state_cap[i]:
            continue
        js = model.pools_of(i)
        if np.all(used[js] + reserved[js] + 1 <= cp.ceil[js, i]):
            choice[rt] = i
            reserved += W[:, i]
    for rt in range(model.num_request_types):
        if choice[rt] < 0:
            choice[rt] = model.dummy_of(rt)
    return choice


def _actions(model: SystemModel, choice) -> np.ndarray:
    a = np.zeros(model.num_patterns, dtype=np.int64)
    a[choice] = 1
    return a


def _check_state(model: SystemModel, N, C):
    if np.any(model.weights @ np.asarray(N) > C):
        raise ValueError("state violates capacity")


def index_decide(model: SystemModel, spec: PolicySpec, N, h: int = 1) -> np.ndarray:
    """Action vector (one 1 per request type) of a ranked policy at counts N."""
    _check_state(model, N, model.capacities * h)
    return _actions(model, ranked_decide(model, compile_policy(model, spec, h), N))


def baseline_decide(model: SystemModel, kind: str, N, h: int = 1) -> np.ndarray:
    return index_decide(model, PolicySpec(kind), N, h)


def random_admit(model: SystemModel, rt: int, N, C, rng: np.random.Generator) -> int:
    """Uniform choice among the type's patterns that fit now; dummy if none."""
    N = np.asarray(N)
    C = np.asarray(C)
    used = model.weights @ N
    ok = [int(i) for i in model.patterns_of(rt)
          if not model.dummy[i] and np.all(used + model.weights[:, i] <= C)]
    if not ok:
        return model.dummy_of(rt)
    return ok[int(rng.integers(len(ok)))]


"""Discrete-event simulation of the scaled system under an admission policy.

The state is the vector of per-pattern counts N_i.  Requests of type l arrive
at rate h lam0_l, each instantiation of pattern i ends at rate mu_i, and pool
j holds h C0_j units.  Revenue accrues continuously at sum_i (r mu_i -
w_i.eps) N_i and is reported per unit time and per unit of scale h.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .model import SystemModel
from .policy import PolicySpec, compile_policy

try:
    from ._core import run_replication as _compiled
except ImportError:  # extension not built
    _compiled = None
from ._kernel_py import run_replication as _python

BACKEND = "compiled" if _compiled is not None else "python"

CAPACITY_VIOLATION, ACTION_VIOLATION = 1, 2


class SafetyViolation(RuntimeError):
    """A policy produced a state or action outside the feasible set."""


def get_kernel(backend: str | None = None):
    backend = backend or os.environ.get("RESALLOC_BACKEND") or BACKEND
    if backend == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernel not available; build the extension")
        return _compiled
    if backend == "python":
        return _python
    raise ValueError(f"unknown backend {backend!r}")


def default_horizon(model: SystemModel) -> float:
    """2000 time units of the slowest base rate."""
    rates = np.concatenate([model.arrival_rates, model.service_rates[~model.dummy]])
    return 2000.0 / float(rates.min())


@dataclass
class SimConfig:
    h: int = 1
    horizon: float | None = None
    warmup: float = 0.2
    reps_initial: int = 4
    reps_max: int = 64
    confidence: float = 0.95
    target: float = 0.03
    seed: int = 0
    threads: int | None = None
    backend: str | None = None

    def __post_init__(self):
        if self.h < 1 or int(self.h) != self.h:
            raise ValueError("h must be a positive integer")
        if self.horizon is not None and self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if not 0.0 <= self.warmup < 1.0:
            raise ValueError("warmup must lie in [0, 1)")
        if self.reps_initial < 2 or self.reps_max < self.reps_initial:
            raise ValueError("need 2 <= reps_initial <= reps_max")


@dataclass
class SimResult:
    """Aggregated replications.

    ``occupancy`` is the time-average N_i / h, ``blocking`` the fraction of
    arrivals of each type sent to its dummy pattern.
    """

    revenue: float
    half_width: float
    replications: int
    occupancy: np.ndarray
    blocking: np.ndarray
    events: int
    ci_met: bool
    per_rep: np.ndarray = field(repr=False, default=None)
    blocking_half_width: np.ndarray = field(repr=False, default=None)
    horizon: float = 0.0
    backend: str = ""

    @property
    def ci(self) -> tuple[float, float]:
        return self.revenue - self.half_width, self.revenue + self.half_width


def replication_seed(master: int, rep: int) -> np.ndarray:
    """Four 64-bit words of generator state from master seed XOR replication."""
    return np.random.SeedSequence(int(master) ^ int(rep)).generate_state(4, dtype=np.uint64)


def _csr(groups, n):
    ptr = np.zeros(n + 1, dtype=np.int64)
    for k, g in enumerate(groups):
        ptr[k + 1] = ptr[k] + len(g)
    idx = np.array([x for g in groups for x in g], dtype=np.int64)
    return ptr, idx


def _kernel_args(model: SystemModel, spec: PolicySpec, h: int):
    cp = compile_policy(model, spec, h)
    I, L = model.num_patterns, model.num_request_types
    pool_ptr, pool_idx = _csr([model.pools_of(i) for i in range(I)], I)
    rt_ptr, rt_pats = _csr([[int(i) for i in model.patterns_of(r) if not model.dummy[i]]
                            for r in range(L)], L)
    args = dict(
        W=np.ascontiguousarray(model.weights, dtype=np.int64),
        owner=np.ascontiguousarray(model.owner, dtype=np.int64),
        dummy=np.ascontiguousarray(model.dummy, dtype=np.uint8),
        mu=np.ascontiguousarray(model.service_rates, dtype=float),
        net=np.ascontiguousarray(model.net_rate, dtype=float),
        lam=np.ascontiguousarray(model.arrival_rates * h, dtype=float),
        C=np.ascontiguousarray(model.capacities * h, dtype=np.int64),
        mode=cp.mode,
        order=np.ascontiguousarray(cp.order, dtype=np.int64),
        ceil=np.ascontiguousarray(cp.ceil, dtype=np.int64),
        state_cap=np.ascontiguousarray(cp.state_cap, dtype=np.int64),
        pool_ptr=pool_ptr, pool_idx=pool_idx, rt_ptr=rt_ptr, rt_pats=rt_pats,
        dummy_of=np.array([model.dummy_of(r) for r in range(L)], dtype=np.int64),
    )
    return args


def _threads(cfg: SimConfig) -> int:
    if cfg.threads:
        return cfg.threads
    env = os.environ.get("RA_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def simulate(model: SystemModel, spec: PolicySpec, cfg: SimConfig) -> SimResult:
    """Replicate until the Student-t half-width is within ``target`` of the mean.

    Replications double from ``reps_initial`` up to ``reps_max``; if the
    target is still missed the result is returned with ``ci_met`` False.
    Raises SafetyViolation on any infeasible state or action.
    """
    kernel = get_kernel(cfg.backend)
    h = int(cfg.h)
    T = cfg.horizon or default_horizon(model)
    t_warm = cfg.warmup * T
    args = _kernel_args(model, spec, h)

    def one(rep):
        out = kernel(**args, horizon=T, t_warm=t_warm, seed=replication_seed(cfg.seed, rep))
        rev, occ, arr, blk, ev, status = out
        if status == CAPACITY_VIOLATION:
            raise SafetyViolation(f"capacity violated in replication {rep} ({spec.label}, h={h})")
        if status == ACTION_VIOLATION:
            raise SafetyViolation(f"action constraint violated in replication {rep} ({spec.label})")
        return rev, occ, arr, blk, ev

    span = (T - t_warm) * h
    results = []
    n = cfg.reps_initial
    with ThreadPoolExecutor(max_workers=_threads(cfg)) as pool:
        while True:
            results.extend(pool.map(one, range(len(results), n)))
            revs = np.array([r[0] for r in results]) / span
            mean = float(revs.mean())
            hw = _half_width(revs, cfg.confidence)
            met = hw <= cfg.target * abs(mean) or (hw == 0.0)
            if met or n >= cfg.reps_max:
                break
            n = min(2 * n, cfg.reps_max)

    occ = np.mean([r[1] for r in results], axis=0) / span
    arr = np.array([r[2] for r in results], dtype=float)
    blk = np.array([r[3] for r in results], dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_rep_block = np.where(arr > 0, blk / arr, 0.0)
        blocking = np.where(arr.sum(0) > 0, blk.sum(0) / arr.sum(0), 0.0)
    bhw = np.array([_half_width(per_rep_block[:, r], cfg.confidence)
                    for r in range(model.num_request_types)])
    return SimResult(revenue=mean, half_width=hw, replications=len(results),
                     occupancy=occ, blocking=blocking, events=int(sum(r[4] for r in results)),
                     ci_met=met, per_rep=revs, blocking_half_width=bhw, horizon=T,
                     backend=BACKEND if cfg.backend is None else cfg.backend)


def _half_width(x: np.ndarray, confidence: float) -> float:
    n = len(x)
    if n < 2:
        return float("inf")
    sd = float(np.std(x, ddof=1))
    return float(stats.t.ppf(0.5 + confidence / 2.0, n - 1) * sd / np.sqrt(n))


@dataclass
class SweepRow:
    policy: str
    eps_m: float
    h: int
    revenue: float
    ci_half: float
    ref_revenue: float
    rel_gap: float
    blocking: np.ndarray
    replications: int
    seed: int
    ci_met: bool


def sweep_h(model: SystemModel, policies: list[PolicySpec], hs: list[int], cfg: SimConfig,
            reference: float) -> list[SweepRow]:
    """Simulate each (policy, h) cell; relative gap (R_ref - R) / R_ref."""
    rows = []
    for spec in policies:
        for h in hs:
            c = SimConfig(**{**cfg.__dict__, "h": int(h)})
            res = simulate(model, spec, c)
            rows.append(SweepRow(spec.label, spec.eps_m, int(h), res.revenue, res.half_width,
                                 reference, (reference - res.revenue) / reference,
                                 res.blocking, res.replications, cfg.seed, res.ci_met))
    return rows


def occupancy_vs_attractor(model: SystemModel, spec: PolicySpec, cfg: SimConfig,
                           predicted: np.ndarray, min_mass: float = 1e-3):
    """Max relative deviation of simulated N_i / h from the attractor's occupancy.

    ``predicted`` is RelaxedSolution.occupancy(model).  Patterns whose
    predicted occupancy is below ``min_mass`` are ignored.
    """
    res = simulate(model, spec, cfg)
    mask = predicted > min_mass
    if not np.any(mask):
        return 0.0, res
    dev = np.abs(res.occupancy[mask] - predicted[mask]) / predicted[mask]
    return float(dev.max()), res

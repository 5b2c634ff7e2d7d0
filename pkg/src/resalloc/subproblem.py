"""Single-pattern mathematics: index values, birth-death stationary laws and
the threshold-optimal activation of each pattern's sub-problem."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import SystemModel, state_space_size

TIE_RTOL = 1e-9
LOG_SPACE_STATES = 30


def index_value(model: SystemModel, i: int, gamma, nu) -> float:
    """Marginal net revenue of activating pattern ``i`` under multipliers.

    lam (r - sum_j eps_j w_j / mu) - (1 + lam/mu) sum_j w_j gamma_j - nu_l,
    and -nu_l for a dummy pattern.
    """
    rt = model.owner[i]
    if model.dummy[i]:
        return -float(nu[rt])
    lam, mu = model.arrival_rates[rt], model.service_rates[i]
    w = model.weights[:, i]
    return float(lam * (model.rewards[rt] - (model.cost_rates @ w) / mu)
                 - (1.0 + lam / mu) * (w @ np.asarray(gamma, dtype=float)) - nu[rt])


def index_values(model: SystemModel, gamma, nu=None) -> np.ndarray:
    """Vectorised :func:`index_value` over all patterns."""
    gamma = np.asarray(gamma, dtype=float)
    nu = np.zeros(model.num_request_types) if nu is None else np.asarray(nu, dtype=float)
    lam = model.arrival_rates[model.owner]
    mu = model.service_rates
    x = (lam * (model.rewards[model.owner] - model.pattern_cost / mu)
         - (1.0 + lam / mu) * (gamma @ model.weights))
    x = np.where(model.dummy, 0.0, x)
    return x - nu[model.owner]


def tie_tolerance(model: SystemModel, i: int) -> float:
    rt = model.owner[i]
    return TIE_RTOL * (1.0 + abs(model.arrival_rates[rt] * model.rewards[rt]))


def birth_death_stationary(arrival: float, mu: float, alpha) -> np.ndarray:
    """Stationary law of a birth-death chain with births ``alpha(n) * arrival``
    in state n and deaths ``n * mu``.

    States beyond the first passive state are unreachable and get mass 0.
    Products are accumulated in log space for long chains.
    """
    alpha = np.asarray(alpha, dtype=float)
    K = len(alpha)
    pi = np.zeros(K)
    logw = np.full(K, -np.inf)
    logw[0] = 0.0
    for n in range(1, K):
        a = alpha[n - 1]
        if a <= 0.0 or not np.isfinite(logw[n - 1]):
            break
        logw[n] = logw[n - 1] + np.log(a * arrival) - np.log(n * mu)
    if K > LOG_SPACE_STATES:
        top = logw.max()
        pi = np.where(np.isfinite(logw), np.exp(logw - top), 0.0)
    else:
        pi = np.where(np.isfinite(logw), np.exp(logw), 0.0)
    return pi / pi.sum()


@dataclass
class ThresholdDecision:
    alpha: np.ndarray
    tie: bool
    index: float


def threshold_policy(model: SystemModel, i: int, gamma, nu) -> ThresholdDecision:
    """Optimal deterministic activation of pattern ``i``'s sub-problem.

    Active below the boundary when the index is positive, passive when it is
    negative.  A zero index (within tolerance) returns the active vector with
    ``tie`` set; any mixture is then optimal.
    """
    K = state_space_size(model, i)
    x = index_value(model, i, gamma, nu)
    if model.dummy[i]:
        tie = abs(x) <= tie_tolerance(model, i)
        return ThresholdDecision(np.array([1.0 if x >= 0 or tie else 0.0]), tie, x)
    tie = abs(x) <= tie_tolerance(model, i)
    alpha = np.zeros(K)
    if x > 0 or tie:
        alpha[:-1] = 1.0
    return ThresholdDecision(alpha, tie, x)


def subproblem_value(model: SystemModel, i: int, alpha, gamma, nu,
                     arrival: float | None = None) -> float:
    """Long-run Lagrangian value of pattern ``i`` under activation ``alpha``.

    (r mu - eps.w) E[N] - nu E[a] - gamma.w (E[N] + E[a]), with the stationary
    law of the birth-death chain.  ``arrival`` defaults to the owner's rate.
    """
    alpha = np.asarray(alpha, dtype=float)
    rt = model.owner[i]
    if model.dummy[i]:
        return -float(nu[rt]) * float(alpha[0])
    lam = model.arrival_rates[rt] if arrival is None else arrival
    mu = model.service_rates[i]
    pi = birth_death_stationary(lam, mu, alpha)
    occ = pi @ np.arange(len(pi))
    act = pi @ alpha
    w = model.weights[:, i]
    net = model.rewards[rt] * mu - model.cost_rates @ w
    return float(net * occ - nu[rt] * act - (np.asarray(gamma, dtype=float) @ w) * (occ + act))

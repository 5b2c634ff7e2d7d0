"""Capacity multipliers: the critical-pair linear system, the damped fixed-point
search over (gamma, ranking), decomposability checks and the closed form for
weakly coupled systems in heavy traffic."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .model import SystemModel, classify_rows, state_space_sizes, weak_coupling_check
from .relaxed import (Ranking, RelaxedSolution, priority_policy, rank_pairs,
                      ranking_from_patterns)
from .subproblem import TIE_RTOL, index_values


class NotWeaklyCoupled(ValueError):
    pass


def _coef(model: SystemModel, i: int) -> float:
    lam = model.arrival_rates[model.owner[i]]
    return 1.0 + lam / model.service_rates[i]


def gamma_from_solution(model: SystemModel, sol: RelaxedSolution) -> np.ndarray:
    """Solve index(i, gamma, 0) = nu_l for every critical pair, gamma = 0 elsewhere.

    A critical pair only uses its own pool and the pools of critical pairs
    ranked after it (earlier critical pools disable later users), so the
    system is triangular and is solved from the last critical pair backwards.
    """
    x0 = index_values(model, np.zeros(model.num_pools))
    W = model.weights
    gamma = np.zeros(model.num_pools)
    for _, i, _, j in reversed(sol.critical):
        assert W[j, i] > 0, "critical pool not used by its critical pattern"
        rhs = (x0[i] - sol.nu[model.owner[i]]) / _coef(model, i)
        rest = W[:, i] @ gamma - W[j, i] * gamma[j]
        gamma[j] = (rhs - rest) / W[j, i]
    return gamma


def solve_T(model: SystemModel, o: Ranking, gamma0) -> np.ndarray:
    """The map gamma0 -> T^o(gamma0); the result may have negative entries."""
    return gamma_from_solution(model, priority_policy(model, o, gamma0))


def ranking_consistent(model: SystemModel, o: Ranking, gamma, nu=None) -> bool:
    """Whether ``o`` orders patterns by non-increasing index at (gamma, nu)."""
    x = index_values(model, gamma, nu)
    tol = TIE_RTOL * (1.0 + np.abs(model.arrival_rates * model.rewards))[model.owner]
    order = o.pattern_order()
    return all(x[a] >= x[b] - max(tol[a], tol[b]) for a, b in zip(order, order[1:]))


def fixed_point_tolerance(gamma) -> float:
    return 1e-6 * (1.0 + float(np.max(np.abs(gamma), initial=0.0)))


def check_decomposable(model: SystemModel, gamma, o: Ranking) -> bool:
    """True when o is consistent with gamma and gamma is a fixed point of T^o."""
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma < 0) or not ranking_consistent(model, o, gamma):
        return False
    t = solve_T(model, o, gamma)
    return float(np.max(np.abs(t - gamma), initial=0.0)) <= fixed_point_tolerance(gamma)


def optimality_violations(model: SystemModel, gamma, o: Ranking) -> list[tuple[int, float]]:
    """Patterns where the fluid policy at (gamma, o) does not solve its own
    sub-problem at (gamma, nu(o, gamma)).

    A pattern with positive index must have all its mass at the boundary
    state, one with negative index must stay empty.  The two fixed-point
    conditions do not imply this: a pool filled by an earlier critical pair
    can shut out a later pattern whose index is still positive.  Returns
    (pattern, index) pairs; an empty list certifies relaxed optimality.
    The index tolerance adds the fixed-point tolerance on gamma propagated
    through each pattern's coefficients.
    """
    gamma = np.asarray(gamma, dtype=float)
    sol = priority_policy(model, o, gamma)
    x = index_values(model, gamma, sol.nu)
    K = state_space_sizes(model)
    I = model.num_patterns
    pos = o.position()
    occ = sol.occupancy(model)
    gtol = fixed_point_tolerance(gamma)
    out = []
    for i in np.flatnonzero(~model.dummy):
        rt = model.owner[i]
        tol = (TIE_RTOL * (1.0 + abs(model.arrival_rates[rt] * model.rewards[rt]))
               + _coef(model, i) * model.weights[:, i].sum() * gtol)
        if x[i] > tol and sol.z[pos[(int(i), int(K[i] - 1))]] < 1.0 / I - 1e-9:
            out.append((int(i), float(x[i])))
        elif x[i] < -tol and occ[i] > 1e-9:
            out.append((int(i), float(x[i])))
    return out


def decomposable_candidate(model: SystemModel, gamma, o: Ranking) -> np.ndarray | None:
    """One-step check: if t = T^o(gamma) is nonnegative and o is consistent
    with t, then t is itself a fixed point and is returned; otherwise None."""
    t = solve_T(model, o, gamma)
    if np.any(t < -fixed_point_tolerance(t)):
        return None
    t = np.maximum(t, 0.0)
    return t if ranking_consistent(model, o, t) else None


@dataclass
class FixedPointTrace:
    """Iterates of the damped search.

    ``residuals[k-1]`` is the Euclidean distance between iterates k-1 and k,
    so ``k_star`` indexes ``gammas`` and ``rankings`` directly.
    ``certified`` adds the pattern-level check of :func:`optimality_violations`
    to ``decomposable``.
    """

    gammas: list
    rankings: list
    residuals: np.ndarray
    revenues: np.ndarray
    clipped_reorder: list = field(default_factory=list)
    k_star: int = 1
    decomposable: bool = False
    candidate: np.ndarray | None = None
    certified: bool = False

    @property
    def gamma_star(self) -> np.ndarray:
        return self.gammas[self.k_star]

    @property
    def ranking_star(self) -> Ranking:
        return self.rankings[self.k_star]


def fixed_point_iteration(model: SystemModel, gamma0=None, c: float = 0.5,
                          U: int = 50) -> FixedPointTrace:
    """gamma_{k+1} = (c T^{o_k}(gamma_k) + (1 - c) gamma_k)^+, with o_{k+1} the
    index ranking at gamma_{k+1} that inherits ties from o_k."""
    if not 0.0 <= c <= 1.0:
        raise ValueError("damping must lie in [0, 1]")
    if U < 1:
        raise ValueError("U must be at least 1")
    g = np.zeros(model.num_pools) if gamma0 is None else np.asarray(gamma0, dtype=float)
    if np.any(g < 0):
        raise ValueError("gamma0 must be nonnegative")
    o = rank_pairs(model, g)
    gammas, rankings, res, revs, flagged = [g], [o], [], [], []
    for k in range(U):
        sol = priority_policy(model, o, g)
        revs.append(sol.revenue)
        raw = c * gamma_from_solution(model, sol) + (1.0 - c) * g
        g_new = np.maximum(raw, 0.0)
        o_new = rank_pairs(model, g_new, previous=o)
        if np.any(raw < 0) and not o_new.same_as(rank_pairs(model, raw, previous=o)):
            flagged.append(k + 1)
        res.append(float(np.linalg.norm(g - g_new)))
        g, o = g_new, o_new
        gammas.append(g)
        rankings.append(o)
    revs.append(priority_policy(model, o, g).revenue)
    res = np.array(res)
    k_star = int(np.argmin(res)) + 1
    trace = FixedPointTrace(gammas=gammas, rankings=rankings, residuals=res,
                            revenues=np.array(revs), clipped_reorder=flagged, k_star=k_star)
    trace.decomposable = check_decomposable(model, trace.gamma_star, trace.ranking_star)
    trace.certified = trace.decomposable and not optimality_violations(
        model, trace.gamma_star, trace.ranking_star)
    if not trace.decomposable:
        trace.candidate = decomposable_candidate(model, trace.gamma_star, trace.ranking_star)
    return trace


def _require_weak(model: SystemModel):
    ok, bad = weak_coupling_check(model)
    if not ok:
        raise NotWeaklyCoupled(f"patterns {bad} touch more than one shared pool")


def w_star(model: SystemModel, i: int) -> int:
    """Weight of pattern i on its shared pool, or on its tightest pool if none."""
    _require_weak(model)
    if model.dummy[i]:
        raise ValueError("dummy patterns have no weight")
    shared = classify_rows(model) == 2
    js = model.pools_of(i)
    sh = [j for j in js if shared[j]]
    if sh:
        return int(model.weights[sh[0], i])
    ratio = model.capacities[js] / model.weights[js, i]
    return int(model.weights[js[int(np.argmin(ratio))], i])


def xi_star(model: SystemModel, nu=None) -> np.ndarray:
    """Per-pattern normalised index (index(0,0) - nu) / (w* (1 + lam/mu)); 0 for dummies."""
    _require_weak(model)
    nu = np.zeros(model.num_request_types) if nu is None else np.asarray(nu, dtype=float)
    x0 = index_values(model, np.zeros(model.num_pools))
    out = np.zeros(model.num_patterns)
    for i in range(model.num_patterns):
        if not model.dummy[i]:
            out[i] = (x0[i] - nu[model.owner[i]]) / (w_star(model, i) * _coef(model, i))
    return out


def xi_star_ranking(model: SystemModel, nu=None) -> Ranking:
    x = xi_star(model, nu)
    order = sorted(range(model.num_patterns), key=lambda i: (-x[i], i))
    return ranking_from_patterns(model, order)


@dataclass
class ClosedForm:
    gamma: np.ndarray | None
    heavy_traffic: bool
    solution: RelaxedSolution
    cases: dict = field(default_factory=dict)


def closed_form_gamma(model: SystemModel, o: Ranking | None = None) -> ClosedForm:
    """Multipliers of a weakly coupled system in heavy traffic, pool by pool.

    Case (i): pool j is critical for pair p and no other critical pool lies
    in p's pattern.  Case (ii): pool j is critical for p and another pair's
    critical pool j' also lies in p's pattern.  Otherwise gamma_j = 0.
    ``gamma`` is None when nu(o, 0) is not zero (no heavy traffic).
    """
    _require_weak(model)
    o = xi_star_ranking(model) if o is None else o
    sol = priority_policy(model, o, np.zeros(model.num_pools))
    heavy = bool(np.all(sol.nu == 0.0))
    if not heavy:
        return ClosedForm(None, False, sol)
    x0 = index_values(model, np.zeros(model.num_pools))
    W = model.weights
    gamma = np.zeros(model.num_pools)
    cases = {}
    crit_pool = {i: j for _, i, _, j in sol.critical}
    for _, i, _, j in sol.critical:
        others = [(i2, j2) for i2, j2 in crit_pool.items() if i2 != i and W[j2, i] > 0]
        if not others:
            gamma[j] = (x0[i] - sol.nu[model.owner[i]]) / (W[j, i] * _coef(model, i))
            cases[j] = "i"
        else:
            i2, j2 = others[0]
            a = (x0[i] - sol.nu[model.owner[i]]) / (W[j2, i] * _coef(model, i))
            b = (x0[i2] - sol.nu[model.owner[i2]]) / (W[j2, i2] * _coef(model, i2))
            gamma[j] = W[j2, i] / W[j, i] * (a - b)
            cases[j] = "ii"
    if np.any(gamma < 0):
        warnings.warn("closed-form multipliers have negative entries", RuntimeWarning)
    return ClosedForm(gamma, True, sol, cases)

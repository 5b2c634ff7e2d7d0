"""Relaxed priority policy in fluid coordinates.

Given a ranking of pattern-state (PS) pairs, sub-process mass is pushed up
pair by pair until either a request type's arrival budget or a pool's
capacity is used up.  The result carries the action multipliers nu, the
critical pairs and pools, the limiting occupation vector z and the revenue
it earns, which bounds the revenue of any feasible policy for large h.

Units: a pattern has mass 1/I spread over its states, so I * sum_n n z_(i,n)
is the pattern's occupancy per unit of scale.  Moving mass d one state up
costs mu_i * I * d of its request type's arrival budget lam0 and
w_{j,i} * I * d of each pool's capacity C0_j.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import SystemModel, classify_rows, state_space_sizes
from .subproblem import index_values

EXHAUST_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Ranking:
    """Ordered PS pairs; boundary pairs of live patterns sit at the end.

    ``pairs`` is an (N, 2) int array of (pattern, state).
    """

    pairs: np.ndarray

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return ((int(i), int(n)) for i, n in self.pairs)

    def pattern_order(self) -> list[int]:
        """Patterns by first appearance, i.e. the runtime priority order."""
        seen, out = set(), []
        for i, _ in self.pairs:
            if i not in seen:
                seen.add(int(i))
                out.append(int(i))
        return out

    def first_position(self) -> dict[int, int]:
        pos = {}
        for p, (i, _) in enumerate(self.pairs):
            pos.setdefault(int(i), p)
        return pos

    def position(self) -> dict[tuple[int, int], int]:
        return {(int(i), int(n)): p for p, (i, n) in enumerate(self.pairs)}

    def same_as(self, other: "Ranking") -> bool:
        return np.array_equal(self.pairs, other.pairs)


def ranking_from_patterns(model: SystemModel, order) -> Ranking:
    """Expand a pattern order into a full pair ranking."""
    K = state_space_sizes(model)
    order = [int(i) for i in order]
    if sorted(order) != list(range(model.num_patterns)):
        raise ValueError("pattern order must be a permutation of all patterns")
    pairs = []
    for i in order:
        if model.dummy[i]:
            pairs.append((i, 0))
        else:
            pairs.extend((i, n) for n in range(K[i] - 1))
    pairs.extend((i, K[i] - 1) for i in range(model.num_patterns) if not model.dummy[i])
    return Ranking(np.array(pairs, dtype=np.int64))


def rank_pairs(model: SystemModel, gamma, nu=None, previous: Ranking | None = None) -> Ranking:
    """Sort pairs by descending index value.

    Ties keep the relative order of ``previous`` when given, and pattern
    index order otherwise.  Within a pattern states are ascending.
    """
    x = index_values(model, gamma, nu)
    if previous is None:
        tie = {i: i for i in range(model.num_patterns)}
    else:
        tie = previous.first_position()
    order = sorted(range(model.num_patterns), key=lambda i: (-x[i], tie[i]))
    return ranking_from_patterns(model, order)


def validate_ranking(model: SystemModel, o: Ranking):
    K = state_space_sizes(model)
    want = {(i, n) for i in range(model.num_patterns) for n in range(K[i])}
    got = list(o)
    if len(got) != len(want) or set(got) != want:
        raise ValueError("ranking does not cover every pattern-state pair exactly once")


@dataclass
class RelaxedSolution:
    """Output of :func:`priority_policy`.

    Attributes
    ----------
    ranking : Ranking
    activation : (N,) array
        Fraction of the mass present at pair p's state that was pushed up.
    nu : (L,) array
        Action multipliers nu(o, gamma).
    critical : list of (position, pattern, state, pool)
    z : (N,) array
        Limiting mass per pair, aligned with ``ranking.pairs``.
    revenue : float
        Normalised long-run revenue of z.
    pool_usage : (J,) array
        I * sum w n z, capacity used per unit of scale.
    throughput : (L,) array
        I * sum mu n z, served requests per unit time and unit of scale.
    """

    ranking: Ranking
    activation: np.ndarray
    nu: np.ndarray
    critical: list = field(default_factory=list)
    z: np.ndarray = None
    revenue: float = 0.0
    pool_usage: np.ndarray = None
    throughput: np.ndarray = None
    saturated: np.ndarray = None

    @property
    def critical_pools(self) -> dict[int, int]:
        return {p: j for p, _, _, j in self.critical}

    def occupancy(self, model: SystemModel) -> np.ndarray:
        """Per-pattern occupancy per unit of scale, I * sum_n n z."""
        occ = np.zeros(model.num_patterns)
        for (i, n), zz in zip(self.ranking, self.z):
            occ[i] += n * zz
        return occ * model.num_patterns

    def blocking(self, model: SystemModel) -> np.ndarray:
        """Fraction of each type's arrivals not served at the attractor."""
        return 1.0 - self.throughput / model.arrival_rates


def _pick_pool(sat: list[int], shared: np.ndarray) -> int:
    # shared pools first: a pool used by one pattern only fills when that
    # pattern reaches its own ceiling, which carries no coupling price
    return min(sat, key=lambda j: (not shared[j], j))


def priority_policy(model: SystemModel, o: Ranking, gamma, eps_bar=None,
                    tol: float = EXHAUST_TOL) -> RelaxedSolution:
    """Fluid water-filling along ranking ``o``.

    Parameters
    ----------
    gamma : (J,) array, nonnegative
        Used only for the nu values recorded at exhausted request types.
    eps_bar : (J, N) array, optional
        Reservation fractions per pool and ranking position; pair p may use
        capacity up to C0_j (1 - eps_bar[j, p]).
    """
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma < 0):
        raise ValueError("gamma must be nonnegative")
    validate_ranking(model, o)
    J, L, I = model.num_pools, model.num_request_types, model.num_patterns
    N = len(o)
    K = state_space_sizes(model)
    W = model.weights
    C = model.capacities.astype(float)
    mu = model.service_rates
    shared = classify_rows(model) == 2
    xi = index_values(model, gamma)

    mass = {(i, 0): 1.0 / I for i in range(I)}
    budget = model.arrival_rates.astype(float).copy()
    used = np.zeros(J)
    alive = np.ones(N, dtype=bool)
    activation = np.zeros(N)
    nu = np.zeros(L)
    done_rt = np.zeros(L, dtype=bool)
    saturated = np.zeros(J, dtype=bool)
    critical = []
    pairs = o.pairs

    def disable_after(p, pred):
        for q in range(p + 1, N):
            if alive[q] and pred(int(pairs[q, 0])):
                alive[q] = False

    for p in range(N):
        if not alive[p]:
            continue
        i, n = int(pairs[p, 0]), int(pairs[p, 1])
        rt = int(model.owner[i])
        if model.dummy[i]:
            # the blocking pair takes whatever budget is left at index -nu = 0
            activation[p] = 1.0
            nu[rt] = 0.0
            done_rt[rt] = True
            disable_after(p, lambda q: model.owner[q] == rt)
            continue
        if n >= K[i] - 1:
            continue
        avail = mass.get((i, n), 0.0)
        js = model.pools_of(i)
        cap = C[js] if eps_bar is None else C[js] * (1.0 - np.asarray(eps_bar)[js, p])
        d = min(avail, budget[rt] / (mu[i] * I),
                float(np.min((cap - used[js]) / (W[js, i] * I))))
        d = max(d, 0.0)
        if avail > 0:
            activation[p] = d / avail
        mass[(i, n)] = avail - d
        mass[(i, n + 1)] = mass.get((i, n + 1), 0.0) + d
        budget[rt] -= mu[i] * I * d
        used += W[:, i] * I * d
        sat = [int(j) for j, c in zip(js, cap) if c - used[j] <= tol]
        new_sat = [j for j in sat if not saturated[j]]
        saturated[sat] = True
        if budget[rt] <= tol:
            nu[rt] = xi[i]
            done_rt[rt] = True
            disable_after(p, lambda q: model.owner[q] == rt)
        elif sat:
            critical.append((p, i, n, _pick_pool(sat, shared)))
        if new_sat:
            disable_after(p, lambda q: bool(np.any(W[new_sat, q] > 0)))

    z = np.array([mass.get((int(i), int(n)), 0.0) for i, n in pairs])
    sol = RelaxedSolution(ranking=o, activation=activation, nu=nu, critical=critical, z=z,
                          saturated=saturated)
    occ = sol.occupancy(model)
    sol.revenue = asymptotic_revenue(model, o, z)
    sol.pool_usage = W @ occ
    sol.throughput = np.bincount(model.owner, weights=mu * occ, minlength=L)
    return sol


def asymptotic_revenue(model: SystemModel, o: Ranking, z) -> float:
    """I * sum over pairs of (r mu - w.eps) n z."""
    net = model.net_rate
    total = sum(net[i] * n * zz for (i, n), zz in zip(o, z))
    return float(model.num_patterns * total)

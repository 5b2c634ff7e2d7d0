"""Acceptance criteria 1-12, one test each.

Every test records a PASS/FAIL line (printed in the terminal summary) and then
asserts the same condition, so a failing criterion fails the run.
"""

import itertools
import json

import numpy as np
import pytest

from resalloc.cli import main
from resalloc.model import build_model, load_scenario, state_space_size
from resalloc.multipliers import (check_decomposable, fixed_point_iteration, solve_T,
                                  xi_star_ranking)
from resalloc.policy import PolicySpec
from resalloc.relaxed import priority_policy, ranking_from_patterns
from resalloc.simulator import SimConfig, occupancy_vs_attractor, simulate
from resalloc.subproblem import birth_death_stationary, subproblem_value, threshold_policy

from conftest import RESULTS, lp_bound, random_model
from test_multipliers import weakly_coupled_heavy
from test_relaxed import check_invariants
from test_subproblem import dense_stationary, random_single

SEED = 20240601


def record(n, ok, detail):
    RESULTS[n] = (bool(ok), detail)
    assert ok, f"criterion {n}: {detail}"


def fixed_point_meta(name, capsys):
    assert main(["fixed-point", name, "--gamma0", "0", "--damping", "0.5"]) == 0
    out = capsys.readouterr().out
    return {k: json.loads(v) for k, v in
            (l[2:].split(": ", 1) for l in out.splitlines() if l.startswith("# "))}


_STAR = {}


def star(name):
    """(model, index ranking at k*, R(o_k*)) of a bundled scenario."""
    if name not in _STAR:
        m = load_scenario(name)
        tr = fixed_point_iteration(m, np.zeros(m.num_pools), 0.5, 50)
        _STAR[name] = m, tr.ranking_star, priority_policy(m, tr.ranking_star, tr.gamma_star).revenue
    return _STAR[name]


def test_c01_fixed_point_fig1a(capsys):
    meta = fixed_point_meta("fig1a", capsys)
    g = np.array(meta["gamma_star"])
    ref = {0: 269.555, 5: 273.11, 7: 347.995}
    rel = {j: abs(g[j] - v) / v for j, v in ref.items()}
    rest = np.delete(g, list(ref))
    ok = max(rel.values()) <= 0.01 and np.all(np.abs(rest) < 1e-3) and meta["decomposable"]
    record(1, ok, f"gamma[1,6,8]={g[[0, 5, 7]].round(3).tolist()} max rel dev "
                  f"{max(rel.values()):.2%}, others max {np.abs(rest).max():.1e}, "
                  f"decomposable={meta['decomposable']}")


def test_c02_fixed_point_fig1b(capsys):
    # fails: at gamma = 0 the relaxation bound exceeds the fluid LP optimum,
    # so the zero vector cannot be a decomposable fixed point
    meta = fixed_point_meta("fig1b", capsys)
    g = np.array(meta["gamma_star"])
    ok = np.all(np.abs(g) <= 1e-6) and meta["decomposable"]
    record(2, ok, f"max |gamma| = {np.abs(g).max():.4g}, decomposable={meta['decomposable']}")


@pytest.mark.slow
@pytest.mark.parametrize("name", ["fig1a", "fig1b"])
def test_c03_near_optimality(name):
    m, o, R = star(name)
    parts, ok = [], True
    for h in (50, 100):
        res = simulate(m, PolicySpec.index(o, 0.01), SimConfig(h=h, seed=7))
        gap = (R - res.revenue) / R
        ok &= gap < 0.05 and res.half_width <= 0.03 * res.revenue
        parts.append(f"h={h} gap {gap:.2%} ci {res.half_width / res.revenue:.2%}")
    key = "3a" if name == "fig1a" else "3b"
    record(key, ok, f"{name}: " + ", ".join(parts))


@pytest.mark.slow
def test_c04_policy_ordering_fig2():
    m, o, _ = star("fig2")
    cfg = SimConfig(h=50, seed=7)
    res = {"INDEX(0.01)": simulate(m, PolicySpec.index(o, 0.01), cfg),
           "INDEX(0)": simulate(m, PolicySpec.index(o, 0.0), cfg)}
    base = {k: simulate(m, PolicySpec(k), cfg) for k in ("max-reward", "min-cost", "random")}
    ok = all(r.ci[0] > b.ci[1] for r in res.values() for b in base.values())
    record(4, ok, "; ".join(f"{k} {r.revenue:.1f}±{r.half_width:.1f}"
                            for k, r in {**res, **base}.items()))


@pytest.mark.slow
def test_c05_gap_shrinks_fig1a():
    m, o, R = star("fig1a")
    gaps = {h: (R - simulate(m, PolicySpec.index(o, 0.01), SimConfig(h=h, seed=7)).revenue) / R
            for h in (10, 100)}
    record(5, gaps[100] < gaps[10], f"gap h=10 {gaps[10]:.2%}, h=100 {gaps[100]:.2%}")


def test_c06_threshold_exhaustive():
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(200):
        m = random_single(rng)
        K = state_space_size(m, 0)
        g, nu = np.array([rng.uniform(0, 10)]), np.array([rng.uniform(-5, 30)])
        best = max(subproblem_value(m, 0, np.r_[a, 0.0], g, nu)
                   for a in itertools.product([0.0, 1.0], repeat=K - 1))
        got = subproblem_value(m, 0, threshold_policy(m, 0, g, nu).alpha, g, nu)
        worst = max(worst, (best - got) / (1 + abs(best)), 0.0)
    record(6, worst <= 1e-12, f"200 instances, worst shortfall {worst:.1e}")


def test_c07_stationary_oracle():
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(200):
        K = int(rng.integers(1, 9))
        alpha = rng.uniform(0, 1, K) * (rng.uniform(size=K) > 0.2)
        alpha[-1] = 0.0
        lam, mu = rng.uniform(0.1, 5), rng.uniform(0.1, 5)
        d = np.abs(birth_death_stationary(lam, mu, alpha) - dense_stationary(lam, mu, alpha))
        worst = max(worst, float(d.max()))
    record(7, worst <= 1e-10, f"200 instances, max abs dev {worst:.1e}")


def test_c08_critical_pairs_and_slackness():
    rng = np.random.default_rng(SEED)
    for k in range(100):
        m = random_model(rng)
        o = ranking_from_patterns(m, list(rng.permutation(m.num_patterns)))
        g = rng.uniform(0, 5, m.num_pools) * (rng.uniform(size=m.num_pools) < 0.5)
        sol = priority_policy(m, o, g)
        try:
            check_invariants(m, sol)
            assert sol.revenue <= lp_bound(m) + 1e-7 * (1 + abs(sol.revenue))
        except AssertionError as e:
            record(8, False, f"case {k}: {e}")
    record(8, True, "100 models: distinct critical patterns, capacity/throughput, slackness")


def test_c09_closed_form_fixed_point():
    rng = np.random.default_rng(SEED)
    worst, neg = 0.0, False
    for _ in range(50):
        m, cf = weakly_coupled_heavy(rng)
        neg |= bool(np.any(cf.gamma < 0))
        worst = max(worst, float(np.abs(solve_T(m, xi_star_ranking(m), cf.gamma) - cf.gamma).max()))
    record(9, worst <= 1e-6 and not neg, f"50 instances, max |T(g)-g| {worst:.1e}, negative={neg}")


def attractor_instance():
    return build_model([10, 8], [0.5, 0.2], [(7.0, 6.0), (6.0, 4.0)],
                       [(0, 1.0, {0: 1}), (0, 1.0, {1: 1}), (1, 1.0, {0: 1}), (1, 1.0, {1: 2})])


@pytest.mark.slow
def test_c10_attractor_occupancy():
    m = attractor_instance()
    tr = fixed_point_iteration(m)
    assert tr.decomposable and check_decomposable(m, tr.gamma_star, tr.ranking_star)
    pred = priority_policy(m, tr.ranking_star, tr.gamma_star).occupancy(m)
    dev, res = occupancy_vs_attractor(m, PolicySpec.index(tr.ranking_star, 0.01),
                                      SimConfig(h=200, seed=3), pred)
    record(10, dev <= 0.05, f"gamma*={tr.gamma_star.round(4).tolist()}, max rel dev {dev:.2%} "
                            f"over {res.replications} reps")


@pytest.mark.slow
def test_c11_safety_suite():
    m, o, _ = star("fig2")
    specs = [PolicySpec.index(o, 0.01), PolicySpec.index(o, 0.0), PolicySpec("max-reward"),
             PolicySpec("min-cost"), PolicySpec("random")]
    counts = {}
    for spec in specs:
        events, seed = 0, 0
        while events < 10**7:      # SafetyViolation propagates on any breach
            events += simulate(m, spec, SimConfig(h=50, seed=seed, reps_max=4)).events
            seed += 1
        counts[spec.label] = events
    record(11, all(v >= 10**7 for v in counts.values()),
           ", ".join(f"{k}: {v:.2e} events" for k, v in counts.items()))


def erlang_b(a, c):
    b = 1.0
    for k in range(1, c + 1):
        b = a * b / (k + a * b)
    return b


@pytest.mark.slow
def test_c12_erlang_b():
    lam, mu, C = 4.0, 1.0, 5
    m = build_model([C], [0.0], [(lam, 1.0)], [(0, mu, {0: 1})])
    res = simulate(m, PolicySpec("max-reward"),
                   SimConfig(horizon=20000.0, seed=1, reps_initial=16, reps_max=16))
    exact = erlang_b(lam / mu, C)
    diff = abs(res.blocking[0] - exact)
    record(12, diff <= res.blocking_half_width[0],
           f"simulated {res.blocking[0]:.4f} ± {res.blocking_half_width[0]:.4f}, "
           f"Erlang-B {exact:.4f}")

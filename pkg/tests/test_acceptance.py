"""Acceptance suite: one test (and one summary line) per criterion."""
import itertools
import math
import time

import numpy as np
import pytest

from morsdp import bandit, bellman, oracle, pomdp_reduce
from morsdp.core.model import ObservationPolicy
from morsdp.core.utility import SumOfExponentials
from morsdp.instances import (
    random_absorbing_mdp,
    random_discounted_mdp,
    random_distribution,
    random_mdp,
    random_pomdp,
)

pytestmark = pytest.mark.acceptance

GRID = (0.0, 0.25, 0.5, 0.75, 1.0)


def _rel(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def _criterion2_instances():
    out = []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        S, Y, A = (int(v) for v in rng.integers([1, 1, 1], [4, 4, 3]))
        k = int(rng.integers(1, 4))
        N = int(rng.integers(1, 4))
        p = random_pomdp(rng, S, Y, A, k)
        out.append((seed, p, random_distribution(rng, S), N))
    return out


def _random_observation_policies(p, N, seed, count=5):
    nodes = [ys for n in range(N) for ys in itertools.product(p.observations, repeat=n)]
    rng = np.random.default_rng(10_000 + seed)
    pols = []
    for _ in range(count):
        pols.append(ObservationPolicy({ys: p.actions[rng.integers(len(p.actions))] for ys in nodes},
                                      p.actions[0]))
    return pols


def test_criterion_1_bandit_closed_form(report):
    t0 = time.perf_counter()
    worst = 0.0
    for mu in (0.5, 1.0, 2.0):
        m = bandit.as_mdp(bandit.BanditParams(mu, 5))
        for n in range(1, 6):
            for g, s in itertools.product(GRID, GRID):
                v = bellman.solve_finite(m, N=n, x0="00", d0=(g, s)).value
                worst = max(worst, abs(v - bandit.analytic_value(n, g, s, mu)))
    m = bandit.as_mdp(bandit.BanditParams(1.0, 5))
    v1 = bellman.solve_finite(m, N=1, x0="00").value
    v2 = bellman.solve_finite(m, N=2, x0="00").value
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and abs(v1 - 0.375) <= 1e-10 and abs(v2 - 0.8125) <= 1e-10 and elapsed < 5
    report("C1 bandit closed form", ok,
           f"max abs err {worst:.1e}, V1={v1!r}, V2={v2!r}, {elapsed:.2f}s (limit 5s)")
    assert ok


def test_criterion_2_change_of_measure(report):
    t0 = time.perf_counter()
    worst, checks = 0.0, 0
    for seed, p, theta0, N in _criterion2_instances():
        for pol in _random_observation_policies(p, N, seed):
            hat = oracle.enumerate_pomdp(p, theta0, pol, N).per_term
            ref = pomdp_reduce.info_chain_expectations(p, theta0, pol, N)
            worst = max(worst, max(_rel(a, b) for a, b in zip(hat, ref)))
            checks += 1
    elapsed = time.perf_counter() - t0
    ok = checks == 100 and worst <= 1e-9 and elapsed < 30
    report("C2 change of measure", ok, f"{checks} policy checks, max rel err {worst:.1e}, {elapsed:.2f}s (limit 30s)")
    assert ok


def test_criterion_3_rspomdp_optimality(report):
    t0 = time.perf_counter()
    worst_value, worst_policy = 0.0, 0.0
    for seed in range(10):
        rng = np.random.default_rng(100 + seed)
        k = 1 + seed % 2
        p = random_pomdp(rng, 2, 2, 2, k)
        theta0 = random_distribution(rng, 2)
        best, _ = oracle.enumerate_pomdp_policies(p, theta0, 2)
        sol = pomdp_reduce.solve_rspomdp(p, theta0, 2)
        achieved = oracle.enumerate_pomdp(p, theta0, sol.policy, 2).value
        worst_value = max(worst_value, _rel(best, sol.value))
        worst_policy = max(worst_policy, _rel(best, achieved))
    elapsed = time.perf_counter() - t0
    ok = worst_value <= 1e-9 and worst_policy <= 1e-9 and elapsed < 60
    report("C3 RSPOMDP optimality", ok,
           f"value rel err {worst_value:.1e}, policy rel err {worst_policy:.1e}, {elapsed:.2f}s (limit 60s)")
    assert ok


def test_criterion_4_markov_sufficiency(report):
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(200 + seed)
        k = 1 + seed % 2
        m = random_mdp(rng, 2, 2, k, integer_costs=True)
        h = oracle.enumerate_mdp_policies(m, N=2, cls="history")
        mk = oracle.enumerate_mdp_policies(m, N=2, cls="markov")
        s = bellman.solve_finite(m, N=2).value
        scale = max(1.0, abs(h))
        worst = max(worst, abs(h - mk) / scale, abs(h - s) / scale)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 10
    report("C4 Markov sufficiency", ok, f"max err {worst:.1e} (relative to max(1,|V|)), {elapsed:.2f}s (limit 10s)")
    assert ok


def _criterion5_instances():
    out = []
    # five generic instances with fast discounting (one slow constant-cost
    # objective on odd seeds) and five absorbing instances with beta = 0.9
    for seed in range(5):
        rng = np.random.default_rng(300 + seed)
        k = 1 + seed % 2
        slow = (float(rng.uniform(0.5, 2.0)), 0.9) if seed % 2 else None
        out.append(random_discounted_mdp(rng, 2, 2, k, slow_constant=slow))
    for seed in range(5):
        rng = np.random.default_rng(350 + seed)
        out.append(random_absorbing_mdp(rng, 2, 2, 1 + seed % 2, beta=0.9))
    return out


@pytest.fixture(scope="module")
def criterion5_runs():
    t0 = time.perf_counter()
    models = _criterion5_instances()
    runs = [bellman.solve_infinite(m, tol=1e-6, max_iter=500) for m in models]
    return models, runs, time.perf_counter() - t0


def test_criterion_5_bracket(criterion5_runs, report):
    models, runs, elapsed = criterion5_runs
    mono = ordered = width = resid = inside = True
    max_beta = 0.0
    for sol, m in zip(runs, models):
        r = sol.records
        max_beta = max(max_beta, m.discount.beta_max)
        mono &= all(b.lower >= a.lower and b.upper <= a.upper for a, b in zip(r, r[1:]))
        # the ordering the operator actually satisfies: U <= b_lower pointwise
        ordered &= all(x.middle <= x.lower <= x.upper for x in r)
        width &= sol.certificate.gap <= 1e-6 and sol.certificate.iterations <= 500
        resid &= sol.certificate.residual <= sol.certificate.gap
        inside &= all(x.lower <= sol.lower and sol.upper <= x.upper for x in r)
    ok = mono and ordered and width and resid and inside and elapsed < 60
    report("C5 bracket monotone/width/residual", ok,
           f"monotone={mono} T^n[U]<=T^n[b_lo]<=T^n[b_hi]={ordered} width<=1e-6={width} "
           f"residual<=width={resid} max beta={max_beta}, {elapsed:.2f}s (limit 60s)")
    assert ok


def test_criterion_5_sandwich_as_stated(criterion5_runs, report):
    """The stated per-iteration ordering T^n[b_lower] <= T^n[U].

    Since U <= b_lower pointwise and T is monotone this cannot hold unless the
    bracket has collapsed; the check is kept as stated and is expected to fail.
    """
    _, runs, _ = criterion5_runs
    violations = sum(1 for sol in runs for x in sol.records if not (x.lower <= x.middle <= x.upper))
    total = sum(len(sol.records) for sol in runs)
    ok = violations == 0
    report("C5 sandwich T^n[b_lo] <= T^n[U] <= T^n[b_hi] (as stated)", ok,
           f"{violations}/{total} recorded iterations violate it")
    assert ok


def test_criterion_6_shift_invariance(report):
    worst, changed, shifted = 0.0, 0, 0
    for seed, p, theta0, N in _criterion2_instances():
        plain = pomdp_reduce.solve_rspomdp(p, theta0, N, shift=False)
        moved = pomdp_reduce.solve_rspomdp(p, theta0, N, shift=True)
        shifted += bool(np.any(moved.model.cost_offset > 0))
        worst = max(worst, _rel(plain.value, moved.value))
        changed += plain.policy.table != moved.policy.table
    ok = worst <= 1e-10 and changed == 0
    report("C6 shift invariance", ok,
           f"{shifted}/20 instances shifted, max rel change {worst:.1e}, {changed} argmin changes")
    assert ok


def _box_max_exp(lam, hi):
    return math.exp(lam * hi) if lam > 0 else 1.0


def test_criterion_7_eps_closeness(report):
    worst_v, worst_x, count = 0.0, 0.0, 0
    ok = True
    for eps in (1e-3, 1e-2):
        for seed in range(5):
            rng = np.random.default_rng(400 + seed)
            k = 1 + seed % 2
            N = 3
            m = random_mdp(rng, 2, 2, k)
            terms = list(m.utility.terms)
            j = seed % k
            w, lam = terms[j]
            delta = eps / _box_max_exp(lam, N * m.upper[j])
            terms[j] = (w + delta, lam)
            u2 = SumOfExponentials(tuple(terms))
            a = bellman.solve_finite(m, m.utility, N=N)
            b = bellman.solve_finite(m, u2, N=N)
            cross = bellman.evaluate_policy(a.layers, a.stages, u2)
            dv, dx = abs(a.value - b.value), cross - b.value
            worst_v, worst_x = max(worst_v, dv / eps), max(worst_x, dx / eps)
            ok &= dv <= eps and -1e-12 <= dx <= 2 * eps
            count += 1
    report("C7 eps-closeness", ok,
           f"{count} pairs, max |V-V'|/eps={worst_v:.3f} (<=1), max cross gap/eps={worst_x:.3f} (<=2)")
    assert ok

"""Acceptance criteria, one test each, at their stated tolerances.

Each test records a PASS/FAIL line (shown in the terminal summary) and then
asserts the same condition.
"""

import time

import numpy as np
import pytest

from fairdyn import config
from fairdyn.analysis import (ALL_CONSTRAINTS, find_utility_witness, prop1_suite, prop2_suite,
                              prop3_suite, random_scenario, theorem3_suite, theorem4_suite,
                              theorem5_suite)
from fairdyn.dist import Gaussian
from fairdyn.dynamics import group_step, simulate, step
from fairdyn.equilibrium import (cdf_sensitivity, check_uniqueness, corollary_epsilon,
                                 find_equilibria)
from fairdyn.gendyn import (GenModel, GenState, gen_equilibrium, gen_step, gen_threshold,
                            random_gen_model)
from fairdyn.highdim import GaussianClass, gaussian_group, raw_profile, reduce_to_1d, score
from fairdyn.model import GroupModel, QualState, Scenario, TransitionMatrix, expected_utility
from fairdyn.policy import optimal_thresholds, unconstrained_threshold
from oracles import agent_step, constraint_tail, grid_best_utility

pytestmark = pytest.mark.acceptance


def test_c01_reference_scenario(criterion):
    cfg = config.load("fig2")
    s = cfg.scenario
    t0 = time.perf_counter()
    worst_spread = worst_match = 0.0
    converged = unique = True
    for c in ALL_CONSTRAINTS:
        finals = []
        for init in cfg.initial_states:
            tr = simulate(s, c, init, cfg.max_steps, cfg.tol)
            converged &= tr.converged
            finals.append(tr.final)
        rep = find_equilibria(s, c)
        unique &= rep.unique
        worst_spread = max(worst_spread, max(f.distance(finals[0]) for f in finals))
        worst_match = max(worst_match, max(f.distance(rep.equilibria[0]) for f in finals))
    elapsed = time.perf_counter() - t0
    ok = (len(cfg.initial_states) == 6 and converged and unique and worst_spread <= 1e-6
          and worst_match <= 1e-6 and elapsed < 5.0)
    criterion(1, "reference scenario", ok,
              f"spread {worst_spread:.2e}, vs equilibrium {worst_match:.2e}, {elapsed:.2f}s")
    assert ok


def test_c02_threshold_optimality(criterion):
    rng = np.random.default_rng(202)
    solver_time, worst_u, worst_gap = 0.0, -np.inf, 0.0
    for i in range(50):
        s = random_scenario(rng, ("A", "B")[i % 2], shared_distributions=bool(i % 3))
        st_ = QualState(*rng.uniform(0.02, 0.98, 2))
        for c in ALL_CONSTRAINTS:
            t0 = time.perf_counter()
            pair = optimal_thresholds(s, st_, c)
            solver_time += time.perf_counter() - t0
            u = expected_utility(s, st_, pair)
            worst_u = max(worst_u, grid_best_utility(s, st_, c.value, n=2001) - u)
            if c.value != "UN":
                gap = abs(constraint_tail(s.group_a, st_.alpha_a, c.value, pair.theta_a)
                          - constraint_tail(s.group_b, st_.alpha_b, c.value, pair.theta_b))
                worst_gap = max(worst_gap, gap)
    ok = worst_u <= 1e-5 and worst_gap <= 1e-7 and solver_time < 30
    criterion(2, "threshold optimality", ok,
              f"grid excess {worst_u:.2e}, gap {worst_gap:.2e}, solver {solver_time:.2f}s")
    assert ok


def test_c03_dynamics_oracle(criterion):
    rng = np.random.default_rng(303)
    worst = 0.0
    for i in range(20):
        s = random_scenario(rng, ("A", "B")[i % 2], shared_distributions=bool(i % 2))
        st_ = QualState(*rng.uniform(0.02, 0.98, 2))
        pair = optimal_thresholds(s, st_, ALL_CONSTRAINTS[i % 3])
        mc, se = agent_step(s, st_, pair, 1_000_000, rng)
        z = np.abs(step(s, st_, pair).as_array() - mc) / se
        worst = max(worst, float(z.max()))
    ok = worst <= 3.0
    criterion(3, "dynamics oracle", ok, f"max |z| = {worst:.2f} over 20 scenarios")
    assert ok


def _suite_line(res):
    return f"{res.name} {res.passed}/{res.total} (skipped {res.skipped})"


def test_c04_shared_distribution_ordering(criterion):
    a = theorem4_suite(200, seed=0, condition="A")
    b = theorem4_suite(200, seed=0, condition="B")
    ok = a.ok and b.ok and a.total == 200 and b.total == 200
    criterion(4, "shared-distribution ordering", ok, f"{_suite_line(a)}; {_suite_line(b)}")
    assert ok, a.failures() + b.failures()


def test_c05_natural_equality(criterion):
    eq = theorem3_suite(50, seed=0, equal_distributions=True)
    sh = theorem3_suite(50, seed=0, equal_distributions=False)
    ok = eq.ok and sh.ok and eq.total == 50 and sh.total == 50
    criterion(5, "natural equality", ok, f"{_suite_line(eq)}; {_suite_line(sh)}")
    assert ok, eq.failures() + sh.failures()


def test_c06_eqopt_mitigation(criterion):
    res = theorem5_suite(50, seed=0)
    branches = {r["dp_branch"] for r in res.rows}
    ok = res.ok and res.total == 50 and branches <= {"mitigates", "flips"}
    criterion(6, "EqOpt mitigation", ok, f"{_suite_line(res)}, DP branches {sorted(branches)}")
    assert ok, res.failures()


def test_c07_interventions(criterion):
    p3 = prop3_suite(100, seed=0)
    p2 = prop2_suite(50, seed=0)
    p1 = prop1_suite(50, seed=0)
    wit = find_utility_witness(seed=0)
    has_witness = wit is not None and wit.alternative_utility > wit.optimal_utility
    ok = (p3.ok and p3.total == 100 and p2.ok and p2.total == 50 and p1.ok and p1.total == 50
          and has_witness)
    extra = (f"witness gain {wit.alternative_utility - wit.optimal_utility:.3g}"
             if has_witness else "no witness")
    criterion(7, "interventions", ok,
              f"{_suite_line(p3)}; {_suite_line(p2)}; {_suite_line(p1)}; {extra}")
    assert ok, p3.failures() + p2.failures() + p1.failures()


def _small_gap_scenario(rng, cond):
    """Random scenario with |T_y1 - T_y0| at half the computed bound."""
    base = random_scenario(rng, cond, shared_distributions=bool(rng.integers(2)))
    c = ALL_CONSTRAINTS[int(rng.integers(3))]
    # the thresholds, hence M_0 and M_1, do not depend on the transitions
    m0, m1 = cdf_sensitivity(base, c, grid=17)
    groups = []
    sign = -1 if cond == "A" else 1
    for g in base.groups:
        t00, t10 = float(rng.uniform(0.2, 0.8)), float(rng.uniform(0.2, 0.8))
        # for flat transitions both forms of the bound coincide
        eps = corollary_epsilon(g.with_transitions(TransitionMatrix(t00, t00, t10, t10)), m0, m1)
        d = 0.5
        while True:
            cand = TransitionMatrix(t00, t00 + sign * d * eps, t10, t10 + sign * d * eps)
            if d * eps < corollary_epsilon(g.with_transitions(cand), m0, m1):
                break
            d *= 0.5
        groups.append(g.with_transitions(cand))
    return Scenario(groups[0], groups[1], base.u_plus, base.u_minus), c


def test_c08_uniqueness_machinery(criterion):
    rng = np.random.default_rng(808)
    passes, osc = 0, 0
    n = 8
    for i in range(n):
        s, c = _small_gap_scenario(rng, ("A", "B")[i % 2])
        ok, _ = check_uniqueness(s, c)
        passes += ok
        for init in rng.uniform(0.02, 0.98, (3, 2)):
            tr = simulate(s, c, QualState(*init))
            osc += tr.termination.kind != "converged"
    cfg = config.load("oscillation")
    tr = simulate(cfg.scenario, "UN", cfg.initial_states[0], cfg.max_steps, cfg.tol)
    rep = find_equilibria(cfg.scenario, "UN")
    cycle = tr.termination.kind == "oscillating" and tr.termination.period == 2
    unstable = rep.stable_flags == [False]
    ok = passes == n and osc == 0 and cycle and unstable
    criterion(8, "uniqueness machinery", ok,
              f"check_uniqueness {passes}/{n}, non-converged runs {osc}, "
              f"oscillation.cfg {tr.termination}, fixed point stable={rep.stable_flags}")
    assert ok


def test_c09_highdim_reduction(criterion):
    k0 = GaussianClass([-1.0, 0.0], [[1.5, 0.4], [0.4, 1.0]])
    k1 = GaussianClass([1.0, 1.0], [[1.0, -0.2], [-0.2, 2.0]])
    t = TransitionMatrix(0.3, 0.5, 0.4, 0.9)
    g = gaussian_group(k0, k1, t, 0.5)
    model = reduce_to_1d(g, samples_per_class=100_000, seed=9)
    lr = np.log(model.g1.density) - np.log(model.g0.density)
    increasing = bool(np.all(np.diff(lr) > 0))
    alpha, up, um = 0.4, 1.0, 1.0
    theta = unconstrained_threshold(model, alpha, up, um)
    rng = np.random.default_rng(99)
    n = 400_000
    x0, x1 = k0.sample(rng, n), k1.sample(rng, n)

    def mc_utility(acc0, acc1):
        return alpha * up * acc1.mean() - (1 - alpha) * um * acc0.mean()

    u_score = mc_utility(score(g, x0) >= theta, score(g, x1) >= theta)
    p0, p1 = raw_profile(g, alpha, x0), raw_profile(g, alpha, x1)
    levels = np.linspace(0.0, 1.0, 2001)
    u_raw = max(mc_utility(p0 >= c, p1 >= c) for c in levels)
    ok = increasing and abs(u_score - u_raw) <= 1e-3
    criterion(9, "high-dim reduction", ok,
              f"score policy {u_score:.5f} vs raw search {u_raw:.5f}, LR increasing={increasing}")
    assert ok


def test_c10_generation(criterion):
    # reduction consistency: decision-independent features collapse to the base step
    m = GenModel(Gaussian(-2, 2), Gaussian(-2, 2), Gaussian(2, 2), Gaussian(2, 2),
                 TransitionMatrix(0.3, 0.5, 0.4, 0.9))
    base = GroupModel(m.g00, m.g10, m.transitions, 0.5)
    s, alpha, drift = GenState.product(0.15, 0.7), 0.15, 0.0
    for _ in range(100):
        th = gen_threshold(m, s)
        s = gen_step(m, s, th)
        alpha = group_step(base, alpha, th)
        drift = max(drift, abs(s.alpha - alpha))
    agree, total, infeasible, skipped = 0, 0, 0, 0
    for variant in ("unqualified", "qualified"):
        rng = np.random.default_rng([10, variant == "qualified"])
        count = 0
        while count < 20:
            model = random_gen_model(rng, variant)
            try:
                rep = gen_equilibrium(model, variant)
            except ArithmeticError:
                skipped += 1
                continue
            if rep.observed is None:
                skipped += 1
                continue
            count += 1
            total += 1
            agree += bool(rep.precondition and rep.consistent)
            for (a, z), f in zip(rep.equilibria, rep.feasible):
                if variant == "unqualified":
                    infeasible += not (f and a + z <= 1 + 1e-12)
                else:
                    infeasible += not (f and 0 <= 1 - a + z <= 1)
    ok = drift <= 1e-12 and agree == total == 40 and infeasible == 0
    criterion(10, "generation extension", ok,
              f"drift {drift:.1e}, ordering {agree}/{total}, infeasible {infeasible}, "
              f"skipped {skipped}")
    assert ok


def test_c11_credit_sweep(criterion):
    cfg = config.load("fico_beta")
    init = cfg.initial_states[0]
    rates = {c: [] for c in ALL_CONSTRAINTS}
    dp_le_eo = True
    for v in cfg.sweep.values:
        s = config.apply_sweep_value(cfg.scenario, cfg.sweep, v)
        d = {}
        for c in ALL_CONSTRAINTS:
            tr = simulate(s, c, init, cfg.max_steps, cfg.tol)
            eq = find_equilibria(s, c).equilibrium
            assert tr.converged and tr.final.distance(eq) <= 1e-6
            rates[c].append(eq.as_array())
            d[c.value] = eq.disparity
        large_t10 = min(s.group_a.transitions.t10, s.group_b.transitions.t10) >= 0.8
        if large_t10:
            dp_le_eo &= abs(d["DP"]) <= abs(d["EqOpt"]) + 1e-9
    mono = all(np.all(np.diff(np.array(r), axis=0) > 0) for r in rates.values())
    ok = mono and dp_le_eo and cfg.scenario.conditions == ("B", "B")
    criterion(11, "credit-style sweep", ok,
              f"monotone in T01={mono}, |DP| <= |EqOpt| at large T10={dp_le_eo}")
    assert ok


import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_scenario
from fairdyn.analysis import (SUITES, classify_effect, compare_impact, density_crossing,
                              equitable_policy, find_utility_witness, natural_equality_transitions,
                              perturb_transition, policy_intervention, project_transitions,
                              random_theorem5_scenario, run_suite, verify_theorem5,
                              with_transitions)
from fairdyn.dist import Gaussian
from fairdyn.equilibrium import find_equilibria
from fairdyn.model import Constraint, TransitionMatrix
from oracles import frozen


@pytest.mark.parametrize("d_un, d_c, label", [
    (0.0, 0.0, "equal"),
    (0.1, 0.05, "mitigates"),
    (0.1, 0.2, "exacerbates"),
    (0.1, -0.05, "flips"),
    (-0.1, -0.3, "exacerbates"),
])
def test_classify_effect(d_un, d_c, label):
    assert classify_effect(d_un, d_c) == label


def test_identical_groups_have_no_disparity():
    s = make_scenario((.3, .5, .6, .9), (.3, .5, .6, .9), ga=(-3, 3, 4), gb=(-3, 3, 4))
    comp = compare_impact(s)
    assert all(abs(v) <= 1e-7 for v in comp.disparities.values())


@settings(max_examples=40)
@given(st.lists(st.floats(0.01, 0.99), min_size=4, max_size=4), st.sampled_from("AB"))
def test_projection_lands_in_condition(vals, cond):
    t = project_transitions(vals, cond)
    assert t.condition == cond or (t.t00 == t.t01 or t.t10 == t.t11)
    assert sorted(t.as_tuple()[:2]) == sorted(vals[:2])


@pytest.mark.parametrize("cond", ["A", "B"])
def test_natural_equality_construction(cond):
    s = make_scenario((.5, .5, .5, .5), (.5, .5, .5, .5), ga=(-3, 3, 4), gb=(-1, 5, 3))
    ta, tb = natural_equality_transitions(s, 0.4, cond)
    assert ta.condition == cond and tb.condition == cond
    s2 = with_transitions(s, ta, tb)
    eq = find_equilibria(s2, "UN").equilibrium
    assert eq.alpha_a == pytest.approx(0.4, abs=1e-6) and eq.alpha_b == pytest.approx(0.4, abs=1e-6)
    comp = compare_impact(s2)
    assert abs(comp.disparity("DP")) > 1e-4 and abs(comp.disparity("EqOpt")) > 1e-4


def test_natural_equality_with_equal_distributions_stays_equal():
    s = make_scenario((.5, .5, .5, .5), (.5, .5, .5, .5), ga=(-2, 4, 3), gb=(-2, 4, 3), share=0.3)
    s2 = with_transitions(s, *natural_equality_transitions(s, 0.6, "B"))
    comp = compare_impact(s2)
    assert all(abs(v) <= 1e-6 for v in comp.disparities.values())


def test_natural_equality_rejects_bad_input():
    s = make_scenario((.5, .5, .5, .5), (.5, .5, .5, .5))
    with pytest.raises(ValueError):
        natural_equality_transitions(s, 1.0, "A")
    with pytest.raises(ValueError):
        natural_equality_transitions(s, 0.5, "C")


def test_density_crossing_equal_spread_midpoint():
    x = density_crossing(Gaussian(-1, 2), Gaussian(-4, 2))
    assert x == pytest.approx(-2.5, abs=1e-10)
    assert frozen(Gaussian(-1, 2)).pdf(x) == pytest.approx(frozen(Gaussian(-4, 2)).pdf(x), abs=1e-8)


def test_eqopt_mitigation_single_scenario():
    rng = np.random.default_rng(3)
    rep = verify_theorem5(random_theorem5_scenario(rng))
    assert rep.precondition and rep.holds
    d = rep.comparison.disparities
    assert 0 <= d[Constraint.EQOPT] < d[Constraint.UN]


def test_mitigation_check_rejects_different_qualified_distributions():
    s = make_scenario((.2, .5, .3, .9), (.2, .5, .3, .9), ga=(-1, 3, 2), gb=(-3, 4, 2))
    with pytest.raises(ValueError, match="qualified"):
        verify_theorem5(s)


def test_zero_offset_is_identity(fig2):
    res = policy_intervention(fig2, "DP", 0.0)
    assert res.optimal.distance(res.alternative) <= 1e-12


def test_lower_thresholds_raise_condition_b_rates(fig2):
    res = policy_intervention(fig2, "EqOpt", -0.02)
    assert res.improvement[0] > 0 and res.improvement[1] > 0


def test_equitable_policy_examples():
    t = TransitionMatrix(.3, .5, .4, .9)
    rec = equitable_policy(t, t)
    assert rec is not None and rec.interval_l[0] <= rec.interval_l[1]
    assert equitable_policy(TransitionMatrix(.05, .1, .05, .1),
                            TransitionMatrix(.8, .9, .8, .9)) is None
    with pytest.raises(ValueError):
        equitable_policy(TransitionMatrix(.3, .5, .9, .4), t)


def test_perturb_transition_touches_one_entry(fig2):
    s = perturb_transition(fig2, ("b", 0, 1), 0.1)
    assert s.group_b.transitions.t01 == pytest.approx(0.6)
    assert s.group_a == fig2.group_a


@pytest.mark.parametrize("name", sorted(SUITES))
def test_small_suites_pass(name):
    for res in run_suite(name, n=2, seed=1):
        assert res.total == 2 and res.ok, res.failures()


def test_unknown_suite():
    with pytest.raises(ValueError):
        run_suite("thm9")


def test_utility_witness_exists():
    res = find_utility_witness(attempts=60)
    assert res is not None
    assert res.alternative_utility > res.optimal_utility
    assert res.improvement[0] > 0 and res.improvement[1] > 0

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_scenario
from fairdyn.model import QualState, expected_utility
from fairdyn.policy import (fair_policy_residual, fair_thresholds, optimal_thresholds,
                            threshold_map, thresholds_at_mass, unconstrained_threshold)
from oracles import constraint_tail, grid_best_utility

interior = st.floats(0.02, 0.98)


def test_unconstrained_threshold_examples(fig2):
    a, b = fig2.groups
    assert unconstrained_threshold(a, 0.5) == pytest.approx(0.0, abs=1e-10)
    assert unconstrained_threshold(b, 0.5) == pytest.approx(0.0, abs=1e-10)
    assert unconstrained_threshold(a, 0.0) == math.inf
    assert unconstrained_threshold(a, 1.0) == -math.inf


@settings(max_examples=50, deadline=None)
@given(interior, st.floats(0.1, 10))
def test_unconstrained_threshold_closed_form(alpha, ratio):
    # equal-variance Gaussians: log(G0/G1) = -(m1 - m0)(x - (m0 + m1)/2)/s^2
    s = make_scenario((.4, .5, .5, .9), (.4, .5, .5, .9), ga=(-1, 3, 2))
    g = s.group_a
    lvl = math.log(ratio) + math.log(alpha / (1 - alpha))
    ref = 1.0 - lvl * 4 / 4
    assert unconstrained_threshold(g, alpha, ratio, 1.0) == pytest.approx(ref, abs=1e-9)


def test_fair_thresholds_beat_grid_at_midpoint(fig2):
    st_ = QualState(0.5, 0.5)
    for c in ("DP", "EqOpt"):
        pair = fair_thresholds(fig2, st_, c)
        u = expected_utility(fig2, st_, pair)
        assert u >= grid_best_utility(fig2, st_, c, n=401) - 1e-5
        assert pair.fairness_residual <= 1e-7


@settings(max_examples=12, deadline=None)
@given(interior, interior, st.sampled_from(["UN", "DP", "EqOpt"]))
def test_solver_not_beaten_by_grid(fig2, aa, ab, c):
    st_ = QualState(aa, ab)
    pair = optimal_thresholds(fig2, st_, c)
    u = expected_utility(fig2, st_, pair)
    assert u >= grid_best_utility(fig2, st_, c, n=1001) - 1e-5
    if c != "UN":
        gap = abs(constraint_tail(fig2.group_a, aa, c, pair.theta_a)
                  - constraint_tail(fig2.group_b, ab, c, pair.theta_b))
        assert gap <= 1e-7


def test_identical_groups_reduce_to_unconstrained():
    s = make_scenario((.3, .5, .6, .9), (.3, .5, .6, .9), ga=(-3, 3, 4), gb=(-3, 3, 4))
    st_ = QualState(0.4, 0.4)
    un = unconstrained_threshold(s.group_a, 0.4)
    for c in ("DP", "EqOpt"):
        pair = fair_thresholds(s, st_, c)
        assert pair.theta_a == pytest.approx(un, abs=1e-6)
        assert pair.theta_b == pytest.approx(un, abs=1e-6)
    foc, gap = fair_policy_residual(s, st_, optimal_thresholds(s, st_, "DP"))
    assert gap <= 1e-9 and foc <= 1e-6


def test_perturbed_pair_breaks_fairness(fig2):
    st_ = QualState(0.6, 0.3)
    pair = fair_thresholds(fig2, st_, "DP")
    foc, gap = fair_policy_residual(fig2, st_, pair)
    assert gap <= 1e-7
    bumped = type(pair)(pair.theta_a, pair.theta_b + 0.1, pair.constraint)
    assert fair_policy_residual(fig2, st_, bumped)[1] > 1e-4


def test_fair_thresholds_rejects_unconstrained(fig2):
    with pytest.raises(ValueError):
        fair_thresholds(fig2, QualState(.5, .5), "UN")


def test_threshold_map_is_continuous(fig2):
    tmap = threshold_map(fig2, "DP")
    p1 = tmap(QualState(0.41, 0.63))
    p2 = tmap(QualState(0.41 + 1e-9, 0.63))
    assert abs(p1.theta_a - p2.theta_a) < 1e-4 and abs(p1.theta_b - p2.theta_b) < 1e-4
    assert tmap(QualState(0.41, 0.63)) is p1


def _dp_sweep(fig2):
    tmap = threshold_map(fig2, "DP")
    return [tmap(QualState(float(aa), 0.4)) for aa in np.linspace(0.05, 0.95, 19)]


def test_dp_other_group_threshold_non_increasing_in_alpha_a(fig2):
    tb = [p.theta_b for p in _dp_sweep(fig2)]
    assert np.all(np.diff(tb) <= 1e-7)


@pytest.mark.xfail(strict=True, reason="theta_a rises then falls in alpha_a here; "
                   "the grid oracle confirms the solver, see the decisions ledger")
def test_dp_own_threshold_non_increasing_in_alpha_a(fig2):
    ta = [p.theta_a for p in _dp_sweep(fig2)]
    assert np.all(np.diff(ta) <= 1e-7)


def test_dp_sweep_matches_grid_oracle(fig2):
    qs = np.linspace(0, 1, 20001)
    for aa in (0.2, 0.5, 0.8):
        st_ = QualState(aa, 0.4)
        pair = fair_thresholds(fig2, st_, "DP")
        u = expected_utility(fig2, st_, pair)
        assert u >= grid_best_utility(fig2, st_, "DP", n=qs.size) - 1e-9


def test_unconstrained_decouples(fig2):
    p1 = optimal_thresholds(fig2, QualState(0.3, 0.2), "UN")
    p2 = optimal_thresholds(fig2, QualState(0.3, 0.9), "UN")
    assert p1.theta_a == p2.theta_a and p1.theta_b != p2.theta_b


@settings(max_examples=30, deadline=None)
@given(interior, interior, st.floats(0.01, 0.99), st.sampled_from(["DP", "EqOpt"]))
def test_thresholds_at_mass_hit_the_mass(fig2, aa, ab, q, c):
    ta, tb = thresholds_at_mass(fig2, QualState(aa, ab), c, q)
    assert constraint_tail(fig2.group_a, aa, c, ta) == pytest.approx(q, abs=1e-9)
    assert constraint_tail(fig2.group_b, ab, c, tb) == pytest.approx(q, abs=1e-9)

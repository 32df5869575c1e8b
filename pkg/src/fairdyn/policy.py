"""Optimal threshold policies, unconstrained and fairness constrained.

The fair solver works in the shared acceptance-mass coordinate q. For a
given q each group's threshold is the upper quantile of its constraint
distribution, so the fairness constraint holds by construction and only a
one-dimensional maximisation remains. The derivative of utility in q is

    dU/dq = sum_s p_s * w_s(theta_s(q)),
    w_s(theta) = (alpha u+ G1(theta) - (1 - alpha) u- G0(theta)) / P_C(theta),

which is scanned on a logit-spaced grid and then refined with Brent's method.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from ._validation import check_unit
from .model import (Constraint, GroupModel, QualState, Scenario, constraint_density,
                    constraint_sf, expected_utility, profile_from_llr)

SCAN_POINTS = 512
Q_MIN = 1e-13
Q_XTOL = 1e-13
_LLR_CAP = 700.0


@dataclass(frozen=True)
class ThresholdPair:
    theta_a: float
    theta_b: float
    constraint: Constraint
    fairness_residual: float = 0.0
    acceptance_mass: float | None = None
    boundary: bool = False
    local_optima: int = 1
    flat_warning: bool = False

    def __iter__(self):
        yield self.theta_a
        yield self.theta_b


def _check_table_monotone(group: GroupModel) -> None:
    llr = group.table.log_lr
    finite = llr[np.isfinite(llr)]
    if finite.size > 1 and np.any(np.diff(finite) > 1e-9 * (1.0 + np.abs(finite[1:]))):
        raise ValueError("qualification profile is not monotone: likelihood ratio "
                         "is not monotone on the support")


def unconstrained_threshold(group: GroupModel, alpha: float,
                            u_plus: float = 1.0, u_minus: float = 1.0) -> float:
    """Smallest theta where the profile reaches u-/(u+ + u-)."""
    alpha = check_unit(alpha, "alpha")
    if alpha == 0.0:
        return math.inf
    if alpha == 1.0:
        return -math.inf
    _check_table_monotone(group)
    # profile >= target  <=>  log(G0/G1) <= c
    c = math.log(u_plus / u_minus) + math.log(alpha) - math.log1p(-alpha)
    tab = group.table
    hit = np.flatnonzero(tab.log_lr <= c)
    if hit.size == 0:
        return math.inf
    k = int(hit[0])
    if k == 0:
        return -math.inf
    lo, hi = float(tab.x[k - 1]), float(tab.x[k])
    f_lo = float(group.log_lr(lo)) - c
    f_hi = float(group.log_lr(hi)) - c
    if not (math.isfinite(f_lo) and math.isfinite(f_hi)) or f_lo <= 0 or f_hi > 0:
        return hi
    if f_hi == 0.0:
        return hi
    return brentq(lambda t: float(group.log_lr(t)) - c, lo, hi, xtol=1e-13, rtol=1e-15)


def _constraint_isf(group: GroupModel, alpha: float, c: Constraint, q: float) -> float:
    """Smallest threshold with constraint acceptance mass q."""
    if q <= 0.0:
        return math.inf
    if q >= 1.0:
        return -math.inf
    if c is Constraint.EQOPT or alpha >= 1.0:
        return float(group.g1.isf(q))
    if alpha <= 0.0:
        return float(group.g0.isf(q))
    x0 = float(group.g0.isf(q))
    x1 = float(group.g1.isf(q))
    lo, hi = min(x0, x1), max(x0, x1)
    if hi - lo <= 1e-15 * (1.0 + abs(lo)):
        return lo
    a = 1.0 - alpha
    g0, g1 = group.g0, group.g1
    # safeguarded Newton; the mixture quantile lies between the component ones
    x = a * x0 + alpha * x1
    for _ in range(100):
        f = a * g0.sf(x) + alpha * g1.sf(x) - q
        if f > 0:
            lo = x
        elif f < 0:
            hi = x
        else:
            return x
        dens = a * g0.pdf(x) + alpha * g1.pdf(x)
        nxt = x + f / dens if dens > 0 else 0.5 * (lo + hi)
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        if abs(nxt - x) <= 1e-14 * (1.0 + abs(x)):
            return nxt
        x = nxt
    return x


def _weight(group: GroupModel, alpha: float, c: Constraint, llr,
            u_plus: float, u_minus: float):
    """Utility gain per unit of extra constraint acceptance mass."""
    if type(llr) is float:
        llr = min(max(llr, -_LLR_CAP), _LLR_CAP)
        if c is Constraint.EQOPT:
            return alpha * u_plus - (1.0 - alpha) * u_minus * math.exp(llr)
    else:
        llr = np.clip(llr, -_LLR_CAP, _LLR_CAP)
    if c is Constraint.EQOPT:
        return alpha * u_plus - (1.0 - alpha) * u_minus * np.exp(llr)
    return (u_plus + u_minus) * profile_from_llr(llr, alpha) - u_minus


def _llr_at(group: GroupModel, theta: float) -> float:
    v = float(group.log_lr(theta))
    if math.isnan(v):
        tab = group.table
        v = float(np.interp(theta, tab.x, np.clip(tab.log_lr, -_LLR_CAP, _LLR_CAP)))
    return v


def _scan_grid(n: int) -> np.ndarray:
    z = np.linspace(math.log(Q_MIN / (1 - Q_MIN)), math.log((1 - Q_MIN) / Q_MIN), n)
    return 1.0 / (1.0 + np.exp(-z))


_QGRID = _scan_grid(SCAN_POINTS)
_QGRID_COARSE = _scan_grid(128)


def _approx_theta(group: GroupModel, alpha: float, c: Constraint, q: np.ndarray):
    tab = group.table
    sf = tab.sf1 if c is Constraint.EQOPT else (1.0 - alpha) * tab.sf0 + alpha * tab.sf1
    theta = np.interp(q, sf[::-1], tab.x[::-1])
    llr = np.interp(theta, tab.x, np.clip(tab.log_lr, -_LLR_CAP, _LLR_CAP))
    return theta, llr


class _FairProblem:
    def __init__(self, scenario: Scenario, state: QualState, c: Constraint):
        self.s = scenario
        self.c = c
        self.alphas = (state.alpha_a, state.alpha_b)

    def thetas(self, q: float) -> tuple[float, float]:
        ga, gb = self.s.groups
        return (_constraint_isf(ga, self.alphas[0], self.c, q),
                _constraint_isf(gb, self.alphas[1], self.c, q))

    def derivative(self, q: float) -> float:
        s = self.s
        total = 0.0
        for g, a, th in zip(s.groups, self.alphas, self.thetas(q)):
            total += g.share * float(_weight(g, a, self.c, _llr_at(g, th), s.u_plus, s.u_minus))
        return total

    def scan(self, grid: np.ndarray = _QGRID) -> np.ndarray:
        s = self.s
        total = np.zeros_like(grid)
        for g, a in zip(s.groups, self.alphas):
            _, llr = _approx_theta(g, a, self.c, grid)
            total += g.share * _weight(g, a, self.c, llr, s.u_plus, s.u_minus)
        return total

    def utility(self, q: float) -> float:
        return expected_utility(self.s, QualState(*self.alphas), self.thetas(q))

    def refine(self, i: int) -> float:
        """Root of the exact derivative near the scan bracket [q_i, q_i+1]."""
        n = _QGRID.size
        lo_i, hi_i = i, i + 1
        f_lo, f_hi = self.derivative(_QGRID[lo_i]), self.derivative(_QGRID[hi_i])
        while f_lo < 0 and lo_i > 0:
            lo_i = max(lo_i - 4, 0)
            f_lo = self.derivative(_QGRID[lo_i])
        while f_hi > 0 and hi_i < n - 1:
            hi_i = min(hi_i + 4, n - 1)
            f_hi = self.derivative(_QGRID[hi_i])
        if f_lo < 0:
            return 0.0
        if f_hi > 0:
            return 1.0
        if f_lo == 0:
            return float(_QGRID[lo_i])
        if f_hi == 0:
            return float(_QGRID[hi_i])
        return brentq(self.derivative, _QGRID[lo_i], _QGRID[hi_i], xtol=Q_XTOL, rtol=1e-15)


def fair_thresholds(scenario: Scenario, state: QualState, c) -> ThresholdPair:
    """Utility-maximising threshold pair with equal constraint acceptance mass."""
    c = Constraint.parse(c)
    if c is Constraint.UN:
        raise ValueError("fair_thresholds needs DP or EqOpt; use unconstrained_threshold")
    prob = _FairProblem(scenario, state, c)
    d = prob.scan()
    candidates: list[float] = []
    if d[0] <= 0:
        candidates.append(0.0)
    crossings = np.flatnonzero((d[:-1] > 0) & (d[1:] <= 0))
    for i in crossings:
        candidates.append(prob.refine(int(i)))
    if d[-1] >= 0:
        candidates.append(1.0)
    if not candidates:
        candidates = [0.0, 1.0]
    best_q, best_u = candidates[0], -math.inf
    for q in candidates:
        u = prob.utility(q)
        if u > best_u + 1e-15:
            best_q, best_u = q, u
    ta, tb = prob.thetas(best_q)
    ga, gb = scenario.groups
    gap = _mass_gap(scenario, state, c, ta, tb)
    return ThresholdPair(ta, tb, c, fairness_residual=gap, acceptance_mass=best_q,
                         boundary=best_q in (0.0, 1.0), local_optima=len(candidates),
                         flat_warning=ga.has_flat_cdf or gb.has_flat_cdf)


def approx_thresholds(scenario: Scenario, state: QualState, c) -> tuple[float, float]:
    """Cheap table-interpolated optimal thresholds, used only to bracket roots."""
    c = Constraint.parse(c)
    s = scenario
    if c is Constraint.UN:
        out = []
        for g, a in zip(s.groups, state):
            if a <= 0.0 or a >= 1.0:
                out.append(math.inf if a <= 0.0 else -math.inf)
                continue
            tab = g.table
            lvl = math.log(s.u_plus / s.u_minus) + math.log(a) - math.log1p(-a)
            hit = np.flatnonzero(tab.log_lr <= lvl)
            if hit.size == 0:
                out.append(math.inf)
            elif hit[0] == 0:
                out.append(-math.inf)
            else:
                k = int(hit[0])
                y0, y1 = tab.log_lr[k - 1], tab.log_lr[k]
                w = (y0 - lvl) / (y0 - y1) if np.isfinite(y0 - y1) and y0 != y1 else 1.0
                out.append(float(tab.x[k - 1] + w * (tab.x[k] - tab.x[k - 1])))
        return out[0], out[1]
    prob = _FairProblem(scenario, state, c)
    grid = _QGRID_COARSE
    d = prob.scan(grid)
    cross = np.flatnonzero((d[:-1] > 0) & (d[1:] <= 0))
    if cross.size == 1 and not (d[0] <= 0 or d[-1] >= 0):
        i = int(cross[0])
        w = d[i] / (d[i] - d[i + 1])
        q = float(grid[i] + w * (grid[i + 1] - grid[i]))
        out = []
        for g, a in zip(s.groups, state):
            th, _ = _approx_theta(g, a, c, np.array([q]))
            out.append(float(th[0]))
        return out[0], out[1]
    pair = fair_thresholds(scenario, state, c)
    return pair.theta_a, pair.theta_b


def thresholds_at_mass(scenario: Scenario, state: QualState, c, q: float) -> tuple[float, float]:
    """Thresholds giving both groups constraint acceptance mass q."""
    c = Constraint.parse(c)
    return _FairProblem(scenario, state, c).thetas(check_unit(q, "q"))


def _tail(group: GroupModel, alpha: float, c: Constraint, theta: float) -> float:
    if theta == math.inf:
        return 0.0
    if theta == -math.inf:
        return 1.0
    return float(constraint_sf(group, alpha, c, theta))


def _mass_gap(scenario, state, c, ta, tb) -> float:
    return abs(_tail(scenario.group_a, state.alpha_a, c, ta)
               - _tail(scenario.group_b, state.alpha_b, c, tb))


def optimal_thresholds(scenario: Scenario, state: QualState, c) -> ThresholdPair:
    """Dispatch to the unconstrained or the fair solver."""
    c = Constraint.parse(c)
    if c is Constraint.UN:
        s = scenario
        return ThresholdPair(
            unconstrained_threshold(s.group_a, state.alpha_a, s.u_plus, s.u_minus),
            unconstrained_threshold(s.group_b, state.alpha_b, s.u_plus, s.u_minus),
            Constraint.UN)
    return fair_thresholds(scenario, state, c)


def fair_policy_residual(scenario: Scenario, state: QualState, pair) -> tuple[float, float]:
    """(first-order residual, fairness tail-mass gap) of a threshold pair.

    The first-order residual is sum_s p_s (gamma_s - t) P(theta_s|s)/P_C(theta_s)
    with t = u-/(u+ + u-). It is reported as 0 for boundary pairs, where
    the condition does not apply. For unconstrained pairs the residual is
    max_s |gamma_s(theta_s) - t| and the gap is 0.
    """
    ta, tb = pair
    c = getattr(pair, "constraint", Constraint.UN)
    t = scenario.gamma_target
    groups, alphas, thetas = scenario.groups, tuple(state), (ta, tb)
    if c is Constraint.UN:
        res = 0.0
        for g, a, th in zip(groups, alphas, thetas):
            if math.isfinite(th):
                res = max(res, abs(profile_from_llr(_llr_at(g, th), a) - t))
        return res, 0.0
    gap = _mass_gap(scenario, state, c, ta, tb)
    if not (math.isfinite(ta) and math.isfinite(tb)):
        return 0.0, gap
    foc = 0.0
    for g, a, th in zip(groups, alphas, thetas):
        dens = (1.0 - a) * g.g0.pdf(th) + a * g.g1.pdf(th)
        pc = constraint_density(g, a, c, th)
        if pc <= 0:
            continue
        foc += g.share * (profile_from_llr(_llr_at(g, th), a) - t) * dens / pc
    return abs(foc), gap


def threshold_map(scenario: Scenario, c, cache_size: int = 65536
                  ) -> Callable[[QualState], ThresholdPair]:
    """Deterministic, memoised map from state to optimal thresholds."""
    c = Constraint.parse(c)

    @lru_cache(maxsize=cache_size)
    def _solve(aa: float, ab: float) -> ThresholdPair:
        return optimal_thresholds(scenario, QualState(aa, ab), c)

    def tmap(state) -> ThresholdPair:
        aa, ab = state
        return _solve(float(aa), float(ab))

    tmap.constraint = c
    tmap.scenario = scenario
    tmap.cache_info = _solve.cache_info
    return tmap

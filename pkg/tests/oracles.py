"""Independent reference computations used by the tests.

Nothing here calls into the package's solvers; distributions come from
scipy.stats or mpmath and the dynamics are simulated agent by agent.
"""

from __future__ import annotations

import math

import mpmath
import numpy as np
from scipy import stats


def frozen(dist):
    """scipy.stats counterpart of a package distribution."""
    kind = dist.to_dict()["kind"]
    if kind == "gaussian":
        return stats.norm(dist.mean, dist.stddev)
    if kind == "beta":
        return stats.beta(dist.a, dist.b)
    raise TypeError(kind)


def mp_normal_cdf(x, mean, sd, dps=40):
    with mpmath.workdps(dps):
        z = (mpmath.mpf(x) - mean) / (sd * mpmath.sqrt(2))
        return float(mpmath.erfc(-z) / 2)


def mp_normal_sf(x, mean, sd, dps=40):
    with mpmath.workdps(dps):
        z = (mpmath.mpf(x) - mean) / (sd * mpmath.sqrt(2))
        return float(mpmath.erfc(z) / 2)


# ------------------------------------------------------------------ utility

def tail(f, theta):
    if theta == math.inf:
        return 0.0
    if theta == -math.inf:
        return 1.0
    return float(f.sf(theta))


def group_value(group, alpha, theta, up, um):
    f0, f1 = frozen(group.g0), frozen(group.g1)
    return alpha * up * tail(f1, theta) - (1 - alpha) * um * tail(f0, theta)


def utility(scenario, state, ta, tb):
    a, b = scenario.group_a, scenario.group_b
    up, um = scenario.u_plus, scenario.u_minus
    return (a.share * group_value(a, state[0], ta, up, um)
            + b.share * group_value(b, state[1], tb, up, um))


def constraint_tail(group, alpha, c, theta):
    f0, f1 = frozen(group.g0), frozen(group.g1)
    if c == "EqOpt":
        return tail(f1, theta)
    return (1 - alpha) * tail(f0, theta) + alpha * tail(f1, theta)


def _tails(group, alpha, c, theta):
    f0, f1 = frozen(group.g0), frozen(group.g1)
    if c == "EqOpt":
        return f1.sf(theta)
    return (1 - alpha) * f0.sf(theta) + alpha * f1.sf(theta)


def inverse_tails(group, alpha, c, qs, iters=80):
    """Thresholds whose constraint tail masses equal qs, by vectorised bisection."""
    qs = np.asarray(qs, dtype=float)
    f0, f1 = frozen(group.g0), frozen(group.g1)
    lo = np.full(qs.shape, min(f0.ppf(1e-300), f1.ppf(1e-300), -1e3))
    hi = np.full(qs.shape, max(f0.isf(1e-300), f1.isf(1e-300), 1e3))
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        above = _tails(group, alpha, c, mid) > qs
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    out = 0.5 * (lo + hi)
    out[qs <= 0] = np.inf
    out[qs >= 1] = -np.inf
    return out


def _values(group, alpha, thetas, up, um):
    f0, f1 = frozen(group.g0), frozen(group.g1)
    t = np.asarray(thetas, dtype=float)
    return alpha * up * f1.sf(t) - (1 - alpha) * um * f0.sf(t)


def grid_best_utility(scenario, state, c, n=2001):
    """Best utility over n matched acceptance masses (fair) or n thresholds per group (UN)."""
    up, um = scenario.u_plus, scenario.u_minus
    if c == "UN":
        best = 0.0
        for grp, alpha in ((scenario.group_a, state[0]), (scenario.group_b, state[1])):
            f0, f1 = frozen(grp.g0), frozen(grp.g1)
            lo = min(f0.ppf(1e-12), f1.ppf(1e-12))
            hi = max(f0.isf(1e-12), f1.isf(1e-12))
            vals = _values(grp, alpha, np.linspace(lo, hi, n), up, um)
            best += grp.share * max(float(vals.max()), 0.0)
        return best
    qs = np.linspace(0.0, 1.0, n)
    ua = _values(scenario.group_a, state[0], inverse_tails(scenario.group_a, state[0], c, qs),
                 up, um)
    ub = _values(scenario.group_b, state[1], inverse_tails(scenario.group_b, state[1], c, qs),
                 up, um)
    return float(np.max(scenario.group_a.share * ua + scenario.group_b.share * ub))


# ------------------------------------------------------------------ dynamics

def agent_step(scenario, state, thresholds, n_agents, rng):
    """Monte-Carlo next qualification rates from n_agents individuals per group.

    Returns the simulated rates and their standard errors.
    """
    out, se = [], []
    thresholds = tuple(thresholds)
    for grp, alpha, theta in ((scenario.group_a, state[0], thresholds[0]),
                              (scenario.group_b, state[1], thresholds[1])):
        y = rng.random(n_agents) < alpha
        x = np.where(y, frozen(grp.g1).rvs(n_agents, random_state=rng),
                     frozen(grp.g0).rvs(n_agents, random_state=rng))
        d = x >= theta
        t = grp.transitions
        p_next = np.select([~y & ~d, ~y & d, y & ~d, y & d], [t.t00, t.t01, t.t10, t.t11])
        y_next = rng.random(n_agents) < p_next
        m = y_next.mean()
        out.append(m)
        se.append(math.sqrt(max(m * (1 - m), 1e-300) / n_agents))
    return np.array(out), np.array(se)


def gen_agent_step(model, state, theta, n_agents, rng):
    """Monte-Carlo next joint state for the decision-dependent feature model."""
    probs = state.as_array()
    cells = rng.choice(4, size=n_agents, p=probs)
    order = ((1, 1), (1, 0), (0, 1), (0, 0))
    y = (cells < 2).astype(int)
    x = np.empty(n_agents)
    for k, (yy, dd) in enumerate(order):
        m = cells == k
        x[m] = frozen(model.dist(yy, dd)).rvs(int(m.sum()), random_state=rng)
    d = (x >= theta).astype(int)
    t = model.transitions
    p_next = np.select([(y == 0) & (d == 0), (y == 0) & (d == 1), (y == 1) & (d == 0)],
                       [t.t00, t.t01, t.t10], t.t11)
    y_next = (rng.random(n_agents) < p_next).astype(int)
    counts = np.array([np.mean((y_next == yy) & (d == dd)) for yy, dd in order])
    se = np.sqrt(counts * (1 - counts) / n_agents)
    return counts, se


def gen_profile_plugin(dists, zeta, x):
    """gamma(x) from plain density arithmetic; dists and zeta keyed by (y, d)."""
    num = sum(frozen(dists[(1, d)]).pdf(x) * zeta[(1, d)] for d in (0, 1))
    den = sum(frozen(dists[(0, d)]).pdf(x) * zeta[(0, d)] for d in (0, 1))
    return 1.0 / (1.0 + den / num)

"""Long-run impact comparisons, interventions and seeded property suites."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .dist import Gaussian, verify_mlr
from .dynamics import fmt, simulate
from .equilibrium import find_equilibria, h_func
from .model import (Constraint, GroupModel, QualState, Scenario, TransitionMatrix,
                    expected_utility)
from .policy import ThresholdPair, fair_thresholds, thresholds_at_mass, unconstrained_threshold

SLACK = 1e-6
ALL_CONSTRAINTS = (Constraint.UN, Constraint.EQOPT, Constraint.DP)


def _unique_equilibrium(scenario: Scenario, c, tmap=None, rows: int | None = None) -> QualState:
    kw = {"tmap": tmap} if tmap is not None else {}
    if rows:
        kw["rows"] = rows
    rep = find_equilibria(scenario, c, **kw)
    if not rep.unique:
        pts = ", ".join(f"({e.alpha_a:.6g}, {e.alpha_b:.6g})" for e in rep.equilibria)
        raise ValueError(f"multiple equilibria under {Constraint.parse(c).value}: {pts}")
    return rep.equilibria[0]


@dataclass
class ImpactComparison:
    equilibria: dict
    conditions: tuple[str, str]
    predicates: dict = field(default_factory=dict)

    @property
    def disparities(self) -> dict:
        return {c: e.alpha_a - e.alpha_b for c, e in self.equilibria.items()}

    def disparity(self, c) -> float:
        e = self.equilibria[Constraint.parse(c)]
        return e.alpha_a - e.alpha_b


def classify_effect(d_un: float, d_c: float, slack: float = SLACK) -> str:
    """Label how a constraint changes the unconstrained disparity."""
    if abs(d_un) <= slack and abs(d_c) <= slack:
        return "equal"
    if d_un * d_c < 0 and min(abs(d_un), abs(d_c)) > slack:
        return "flips"
    if abs(d_c) < abs(d_un):
        return "mitigates"
    return "exacerbates"


def compare_impact(scenario: Scenario, constraints=ALL_CONSTRAINTS,
                   rows: int | None = None) -> ImpactComparison:
    """Equilibria under each constraint and the resulting disparity labels."""
    eqs = {}
    for c in constraints:
        eqs[Constraint.parse(c)] = _unique_equilibrium(scenario, c, rows=rows)
    out = ImpactComparison(eqs, scenario.conditions)
    if Constraint.UN in eqs:
        d_un = out.disparity(Constraint.UN)
        for c in eqs:
            if c is not Constraint.UN:
                out.predicates[c] = classify_effect(d_un, out.disparity(c))
    return out


def _construct_pair(alpha: float, g_cdf: float, delta: float, up: bool):
    """Entries (t_y0, t_y1) with t_y0*G + t_y1*(1-G) = alpha.

    ``up`` puts the acceptance entry above alpha. Returns None if infeasible.
    """
    g_cdf = min(max(g_cdf, 0.0), 1.0)
    sign = 1.0 if up else -1.0
    if 0.0 < g_cdf < 1.0:
        t0 = alpha - sign * delta * (1.0 - g_cdf)
        t1 = alpha + sign * delta * g_cdf
    elif g_cdf <= 0.0:  # everyone accepted: t_y1 must equal alpha
        t0, t1 = alpha - sign * delta, alpha
    else:
        t0, t1 = alpha, alpha + sign * delta
    if 0.0 < t0 < 1.0 and 0.0 < t1 < 1.0:
        return t0, t1
    return None


def natural_equality_transitions(scenario: Scenario, alpha_target: float, condition: str,
                                 delta: float = 0.1, min_delta: float = 1e-3
                                 ) -> tuple[TransitionMatrix, TransitionMatrix]:
    """Transitions under which both groups' unconstrained equilibrium is alpha_target.

    At the group's own threshold theta the update reads
    alpha' = t00 G0 + t01 (1-G0) on the unqualified side and the same with
    t10, t11 on the qualified side (G_y is the CDF at theta). Setting both
    convex combinations equal to alpha_target makes it a fixed point.
    """
    if not 0.0 < alpha_target < 1.0:
        raise ValueError("alpha_target must lie strictly between 0 and 1")
    condition = condition.upper()
    if condition not in ("A", "B"):
        raise ValueError("condition must be 'A' or 'B'")
    up = condition == "B"
    out = []
    for g in scenario.groups:
        th = unconstrained_threshold(g, alpha_target, scenario.u_plus, scenario.u_minus)
        g0 = float(g.g0.cdf(th)) if math.isfinite(th) else (1.0 if th > 0 else 0.0)
        g1 = float(g.g1.cdf(th)) if math.isfinite(th) else (1.0 if th > 0 else 0.0)
        rows = []
        for gc in (g0, g1):
            d = delta
            pair = _construct_pair(alpha_target, gc, d, up)
            while pair is None and d >= min_delta:
                d *= 0.5
                pair = _construct_pair(alpha_target, gc, d, up)
            if pair is None:
                raise ValueError(f"no feasible margin for alpha_target={alpha_target}")
            rows.append(pair)
        (t00, t01), (t10, t11) = rows
        out.append(TransitionMatrix(t00, t01, t10, t11))
    return out[0], out[1]


def with_transitions(scenario: Scenario, ta: TransitionMatrix, tb: TransitionMatrix) -> Scenario:
    return replace(scenario, group_a=scenario.group_a.with_transitions(ta),
                   group_b=scenario.group_b.with_transitions(tb))


@dataclass
class Theorem5Report:
    x_hat: float
    precondition: bool
    ratio_bound: float
    comparison: ImpactComparison
    un_gap_positive: bool
    eqopt_mitigates: bool
    dp_branch: str

    @property
    def holds(self) -> bool:
        """Conclusions hold, or the utility precondition is not met."""
        if not self.precondition:
            return True
        return self.un_gap_positive and self.eqopt_mitigates and self.dp_branch != "violated"


def _same_distribution(d1, d2) -> bool:
    if d1 == d2:
        return True
    lo = max(d1.support[0], d2.support[0])
    hi = min(d1.support[1], d2.support[1])
    x = np.linspace(lo, hi, 513)
    return bool(np.allclose(d1.pdf(x), d2.pdf(x), rtol=1e-12, atol=1e-15))


def density_crossing(d_a, d_b) -> float:
    """Unique x where two densities with monotone ratio d_a/d_b cross."""
    lo = max(d_a.support[0], d_b.support[0])
    hi = min(d_a.support[1], d_b.support[1])
    f = lambda x: float(d_a.logpdf(x)) - float(d_b.logpdf(x))  # noqa: E731
    xs = np.linspace(lo, hi, 4097)
    with np.errstate(invalid="ignore"):
        v = np.asarray(d_a.logpdf(xs)) - np.asarray(d_b.logpdf(xs))
    ok = np.isfinite(v)
    idx = np.flatnonzero(ok[:-1] & ok[1:] & (v[:-1] < 0) & (v[1:] >= 0))
    if idx.size == 0:
        raise ValueError("densities do not cross on the common support")
    i = int(idx[0])
    if v[i + 1] == 0:
        return float(xs[i + 1])
    return brentq(f, xs[i], xs[i + 1], xtol=1e-14)


def verify_theorem5(scenario: Scenario, rows: int | None = None) -> Theorem5Report:
    ga, gb = scenario.groups
    if not _same_distribution(ga.g1, gb.g1):
        raise ValueError("Condition 2 violated: qualified feature distributions differ")
    mlr = verify_mlr(gb.g0, ga.g0)
    if not mlr.ok:
        raise ValueError(f"Condition 2 violated: G0a/G0b not strictly increasing "
                         f"near x={mlr.first_violation}")
    if ga.transitions != gb.transitions or ga.transitions.condition != "B":
        raise ValueError("transitions must be shared across groups and satisfy condition B")
    x_hat = density_crossing(ga.g0, gb.g0)
    t = ga.transitions
    bound = float(ga.g0.pdf(x_hat) / ga.g1.pdf(x_hat)) * (1.0 - t.t10) / t.t00
    pre = scenario.u_plus / scenario.u_minus >= bound
    comp = compare_impact(scenario, rows=rows)
    d_un = comp.disparity(Constraint.UN)
    d_eo = comp.disparity(Constraint.EQOPT)
    d_dp = comp.disparity(Constraint.DP)
    if d_un > d_dp >= -SLACK:
        branch = "mitigates"
    elif d_dp <= SLACK:
        branch = "flips"
    else:
        branch = "violated"
    return Theorem5Report(x_hat, pre, bound, comp, d_un > 0,
                          d_un > d_eo - SLACK and d_eo >= -SLACK and d_un - d_eo > -SLACK,
                          branch)


@dataclass
class PolicyInterventionResult:
    constraint: Constraint
    offset: float
    optimal: QualState
    alternative: QualState
    optimal_utility: float
    alternative_utility: float

    @property
    def improvement(self) -> tuple[float, float]:
        return (self.alternative.alpha_a - self.optimal.alpha_a,
                self.alternative.alpha_b - self.optimal.alpha_b)


class OffsetPolicy:
    """Optimal fair policy shifted by a constant in the acceptance-mass coordinate.

    A positive offset means fewer acceptances, i.e. higher thresholds for
    both groups, and the fairness constraint still holds exactly. For the
    unconstrained policy the offset is added to the thresholds directly.
    """

    def __init__(self, scenario: Scenario, c, offset: float):
        self.scenario = scenario
        self.c = Constraint.parse(c)
        self.offset = float(offset)
        self._cache: dict = {}

    def clamped(self, state) -> bool:
        return self(state).boundary and self.offset != 0

    def __call__(self, state) -> ThresholdPair:
        key = (float(state[0]), float(state[1]))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        st = QualState(*key)
        if self.c is Constraint.UN:
            s = self.scenario
            ta = unconstrained_threshold(s.group_a, st.alpha_a, s.u_plus, s.u_minus)
            tb = unconstrained_threshold(s.group_b, st.alpha_b, s.u_plus, s.u_minus)
            pair = ThresholdPair(ta + self.offset, tb + self.offset, self.c)
        else:
            base = fair_thresholds(self.scenario, st, self.c)
            q = base.acceptance_mass - self.offset
            qc = min(max(q, 0.0), 1.0)
            ta, tb = thresholds_at_mass(self.scenario, st, self.c, qc)
            pair = ThresholdPair(ta, tb, self.c, acceptance_mass=qc,
                                 boundary=(qc != q) or qc in (0.0, 1.0))
        self._cache[key] = pair
        return pair


def policy_intervention(scenario: Scenario, c, offset: float,
                        rows: int | None = None) -> PolicyInterventionResult:
    """Equilibria of the optimal policy and of a fairness-preserving offset policy."""
    c = Constraint.parse(c)
    base = OffsetPolicy(scenario, c, 0.0)
    alt = OffsetPolicy(scenario, c, offset)
    e0 = _unique_equilibrium(scenario, c, tmap=base, rows=rows)
    e1 = _unique_equilibrium(scenario, c, tmap=alt, rows=rows)
    if offset != 0 and c is not Constraint.UN and (alt.clamped(e0) or alt.clamped(e1)):
        raise ValueError("offset pushes the acceptance mass outside (0, 1) at equilibrium")
    return PolicyInterventionResult(c, float(offset), e0, e1,
                                    expected_utility(scenario, e0, base(e0)),
                                    expected_utility(scenario, e1, alt(e1)))


@dataclass
class EquitablePolicy:
    interval_l: tuple[float, float]
    interval_alpha: tuple[float, float]
    alpha_hat: float
    thresholds: tuple[float, float] | None = None


def _h_inverse(group: GroupModel, level: float) -> float:
    """Threshold theta with h(theta) = level; h is monotone in theta."""
    t = group.transitions
    h_lo, h_hi = (1.0 - t.t11) / t.t01, (1.0 - t.t10) / t.t00  # theta -> -inf, +inf
    if abs(h_hi - h_lo) <= 1e-15:
        return 0.0 if level == h_lo else math.nan
    lo, hi = group.support
    f = lambda th: h_func(group, th) - level  # noqa: E731
    f_lo, f_hi = f(lo), f(hi)
    if f_lo * f_hi <= 0:
        if f_lo == 0:
            return lo
        if f_hi == 0:
            return hi
        return brentq(f, lo, hi, xtol=1e-13)
    # level sits beyond the clamped support: use the matching infinite limit
    return -math.inf if abs(level - h_lo) < abs(level - h_hi) else math.inf


def equitable_policy(ta: TransitionMatrix, tb: TransitionMatrix,
                     group_a: GroupModel | None = None, group_b: GroupModel | None = None,
                     alpha_hat: float | None = None) -> EquitablePolicy | None:
    """Common equilibrium rate reachable by per-group threshold policies, if any."""
    ca, cb = ta.condition, tb.condition
    if ca != cb or ca not in ("A", "B"):
        raise ValueError("both transition matrices must satisfy the same condition A or B")
    ia = _interval(ta)
    ib = _interval(tb)
    lo, hi = max(ia[0], ib[0]), min(ia[1], ib[1])
    if lo > hi:
        return None
    if alpha_hat is None:
        level = 0.5 * (lo + hi)
        alpha_hat = 1.0 / (1.0 + level)
    else:
        level = 1.0 / alpha_hat - 1.0
        if not lo - 1e-12 <= level <= hi + 1e-12:
            raise ValueError("alpha_hat lies outside the attainable interval")
    out = EquitablePolicy((lo, hi), (1.0 / (1.0 + hi), 1.0 / (1.0 + lo)), alpha_hat)
    if group_a is not None and group_b is not None:
        out.thresholds = (_h_inverse(group_a.with_transitions(ta), level),
                          _h_inverse(group_b.with_transitions(tb), level))
    return out


def _interval(t: TransitionMatrix) -> tuple[float, float]:
    """Range of h in 1/alpha - 1 coordinates."""
    return ((1.0 - max(t.t11, t.t10)) / max(t.t01, t.t00),
            (1.0 - min(t.t11, t.t10)) / min(t.t01, t.t00))


def constant_policy(theta_a: float, theta_b: float) -> Callable:
    pair = ThresholdPair(theta_a, theta_b, Constraint.UN)
    return lambda state: pair


@dataclass
class TransitionInterventionResult:
    which: tuple[str, int, int]
    delta: float
    before: QualState
    after: QualState

    @property
    def change(self) -> tuple[float, float]:
        return (self.after.alpha_a - self.before.alpha_a,
                self.after.alpha_b - self.before.alpha_b)


def perturb_transition(scenario: Scenario, which, delta: float) -> Scenario:
    grp, y, d = which
    key = 0 if str(grp).lower() in ("a", "0") else 1
    g = scenario.groups[key]
    new_t = g.transitions.with_entry(y, d, g.transitions.entry(y, d) + delta)
    return scenario.with_group("a" if key == 0 else "b", g.with_transitions(new_t))


def transition_intervention(scenario: Scenario, c, which, delta: float,
                            rows: int | None = None) -> TransitionInterventionResult:
    """Equilibrium before and after raising one transition probability."""
    if delta < 0:
        raise ValueError("delta must be non-negative")
    after_s = perturb_transition(scenario, which, delta)
    before = _unique_equilibrium(scenario, c, rows=rows)
    after = _unique_equilibrium(after_s, c, rows=rows)
    grp, y, d = which
    return TransitionInterventionResult((str(grp).lower(), int(y), int(d)), float(delta),
                                        before, after)


# ---------------------------------------------------------------- scenario generation

def project_transitions(t, condition: str) -> TransitionMatrix:
    """Swap entries so that the matrix satisfies condition A or B."""
    t00, t01, t10, t11 = t.as_tuple() if isinstance(t, TransitionMatrix) else t
    if condition == "A":
        t00, t01 = max(t00, t01), min(t00, t01)
        t10, t11 = max(t10, t11), min(t10, t11)
    elif condition == "B":
        t00, t01 = min(t00, t01), max(t00, t01)
        t10, t11 = min(t10, t11), max(t10, t11)
    else:
        raise ValueError("condition must be 'A' or 'B'")
    return TransitionMatrix(t00, t01, t10, t11)


def random_transitions(rng: np.random.Generator, condition: str | None = None,
                       low: float = 0.02, high: float = 0.98) -> TransitionMatrix:
    vals = rng.uniform(low, high, size=4)
    if condition is None:
        return TransitionMatrix(*vals)
    return project_transitions(vals, condition)


def random_gaussian_pair(rng: np.random.Generator, min_gap: float = 1.0):
    """(G0, G1) with equal spread and mean(G1) > mean(G0), means in [-8, 8]."""
    while True:
        m = np.sort(rng.uniform(-8.0, 8.0, size=2))
        if m[1] - m[0] >= min_gap:
            break
    sd = rng.uniform(2.0, 8.0)
    return Gaussian(float(m[0]), float(sd)), Gaussian(float(m[1]), float(sd))


def random_scenario(rng: np.random.Generator, condition: str | None = None,
                    shared_distributions: bool = True, shared_transitions: bool = False,
                    share: float | None = None, utility_ratio: float | None = None) -> Scenario:
    g0a, g1a = random_gaussian_pair(rng)
    g0b, g1b = (g0a, g1a) if shared_distributions else random_gaussian_pair(rng)
    ta = random_transitions(rng, condition)
    tb = ta if shared_transitions else random_transitions(rng, condition)
    p = float(rng.uniform(0.2, 0.8)) if share is None else share
    r = float(rng.uniform(0.5, 2.0)) if utility_ratio is None else utility_ratio
    return Scenario(GroupModel(g0a, g1a, ta, p), GroupModel(g0b, g1b, tb, 1.0 - p), r, 1.0)


# ---------------------------------------------------------------- suites

@dataclass
class SuiteResult:
    name: str
    rows: list[dict]
    skipped: int = 0

    @property
    def passed(self) -> int:
        return sum(bool(r["pass"]) for r in self.rows)

    @property
    def total(self) -> int:
        return len(self.rows)

    @property
    def ok(self) -> bool:
        return self.total > 0 and self.passed == self.total

    def failures(self) -> list[dict]:
        return [r for r in self.rows if not r["pass"]]

    def to_csv(self, path_or_file) -> None:
        own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            keys: list[str] = []
            for r in self.rows:
                keys.extend(k for k in r if k not in keys)
            w = csv.writer(fh)
            w.writerow(keys)
            for r in self.rows:
                w.writerow([fmt(r.get(k)) if not isinstance(r.get(k), str) else r[k]
                            for k in keys])
        finally:
            if own:
                fh.close()

    def disparity_table(self) -> list[list[str]]:
        """Rows UN/EqOpt/DP by scenario columns, disparities in units of 1e-2."""
        table = [["constraint"] + [f"s{i}" for i in range(self.total)]]
        for c in ("UN", "EqOpt", "DP"):
            key = f"d_{c}"
            if self.rows and key in self.rows[0]:
                table.append([c] + [f"{100 * r[key]:.2f}" for r in self.rows])
        return table


def _sign_kept(d_un: float, d_c: float, slack: float = SLACK) -> bool:
    return not (abs(d_un) > slack and abs(d_c) > slack and d_un * d_c < 0)


def theorem4_suite(n: int = 200, seed: int = 0, condition: str = "A",
                   max_draws: int | None = None, rows: int | None = None) -> SuiteResult:
    """Shared feature distributions, group-specific transitions of one class."""
    rng = np.random.default_rng([seed, ord(condition)])
    out, skipped, draws = [], 0, 0
    max_draws = max_draws or 5 * n
    while len(out) < n and draws < max_draws:
        draws += 1
        s = random_scenario(rng, condition, shared_distributions=True)
        try:
            comp = compare_impact(s, rows=rows)
        except ValueError:
            skipped += 1
            continue
        d = {c.value: comp.disparity(c) for c in ALL_CONSTRAINTS}
        ok = True
        for c in ("DP", "EqOpt"):
            if condition == "A":
                ok &= abs(d[c]) >= abs(d["UN"]) - SLACK
            else:
                ok &= abs(d[c]) <= abs(d["UN"]) + SLACK
            ok &= _sign_kept(d["UN"], d[c])
        out.append({"condition": condition, **{f"d_{k}": v for k, v in d.items()},
                    "pass": bool(ok)})
    return SuiteResult(f"thm4-{condition}", out, skipped)


def theorem3_suite(n: int = 50, seed: int = 0, equal_distributions: bool = True,
                   rows: int | None = None) -> SuiteResult:
    rng = np.random.default_rng([seed, 3, int(equal_distributions)])
    out, skipped, draws = [], 0, 0
    while len(out) < n and draws < 5 * n:
        draws += 1
        g0a, g1a = random_gaussian_pair(rng)
        if equal_distributions:
            g0b, g1b = g0a, g1a
        else:
            # a pure translation would leave the dynamics unchanged, so the
            # spread and the class gap differ as well
            shift = float(rng.uniform(1.5, 4.0))
            sd_b = g0a.stddev * float(rng.uniform(0.6, 1.5))
            g0b = Gaussian(g0a.mean - shift, sd_b)
            g1b = Gaussian(g1a.mean - 0.5 * shift, sd_b)
        cond = "A" if rng.random() < 0.5 else "B"
        alpha = float(rng.uniform(0.2, 0.8))
        p = float(rng.uniform(0.2, 0.8))
        placeholder = TransitionMatrix(0.5, 0.5, 0.5, 0.5)
        s = Scenario(GroupModel(g0a, g1a, placeholder, p),
                     GroupModel(g0b, g1b, placeholder, 1 - p), 1.0, 1.0)
        try:
            ta, tb = natural_equality_transitions(s, alpha, cond)
            s = with_transitions(s, ta, tb)
            comp = compare_impact(s, rows=rows)
        except ValueError:
            skipped += 1
            continue
        e_un = comp.equilibria[Constraint.UN]
        d = {c.value: comp.disparity(c) for c in ALL_CONSTRAINTS}
        ok = abs(e_un.alpha_a - alpha) <= 1e-6 and abs(e_un.alpha_b - alpha) <= 1e-6
        if equal_distributions:
            ok &= all(abs(v) <= 1e-6 for v in d.values())
        else:
            ok &= abs(d["DP"]) > 1e-4 and abs(d["EqOpt"]) > 1e-4
        out.append({"condition": cond, "alpha_target": alpha,
                    **{f"d_{k}": v for k, v in d.items()}, "pass": bool(ok)})
    tag = "equal" if equal_distributions else "shifted"
    return SuiteResult(f"thm3-{tag}", out, skipped)


def random_theorem5_scenario(rng: np.random.Generator) -> Scenario:
    """Shared G1 and condition-B transitions; group b's G0 shifted left."""
    sd = float(rng.uniform(2.0, 8.0))
    m0a = float(rng.uniform(-4.0, 2.0))
    m1 = float(rng.uniform(m0a + 1.0, 8.0))
    m0b = m0a - float(rng.uniform(0.5, 4.0))
    t = random_transitions(rng, "B")
    p = float(rng.uniform(0.2, 0.8))
    ga = GroupModel(Gaussian(m0a, sd), Gaussian(m1, sd), t, p)
    gb = GroupModel(Gaussian(m0b, sd), Gaussian(m1, sd), t, 1 - p)
    x_hat = 0.5 * (m0a + m0b)
    bound = float(ga.g0.pdf(x_hat) / ga.g1.pdf(x_hat)) * (1 - t.t10) / t.t00
    ratio = bound * float(rng.uniform(1.0, 3.0))
    return Scenario(ga, gb, ratio, 1.0)


def theorem5_suite(n: int = 50, seed: int = 0, rows: int | None = None) -> SuiteResult:
    rng = np.random.default_rng([seed, 5])
    out, skipped, draws = [], 0, 0
    while len(out) < n and draws < 5 * n:
        draws += 1
        s = random_theorem5_scenario(rng)
        if s.u_plus > 1e6:
            skipped += 1
            continue
        try:
            rep = verify_theorem5(s, rows=rows)
        except ValueError:
            skipped += 1
            continue
        d = rep.comparison.disparities
        out.append({"x_hat": rep.x_hat, "precondition": rep.precondition,
                    "d_UN": d[Constraint.UN], "d_EqOpt": d[Constraint.EQOPT],
                    "d_DP": d[Constraint.DP], "dp_branch": rep.dp_branch,
                    "pass": rep.precondition and rep.holds})
    return SuiteResult("thm5", out, skipped)


def prop3_suite(n: int = 100, seed: int = 0, rows: int | None = None) -> SuiteResult:
    """Raise one transition entry; the perturbed group's rate must rise.

    Scenarios use condition-B transitions (any constraint) or the
    unconstrained policy (any condition A/B), where the other group's rate
    is also guaranteed not to fall.
    """
    rng = np.random.default_rng([seed, 33])
    out, skipped, draws = [], 0, 0
    while len(out) < n and draws < 5 * n:
        draws += 1
        c = ALL_CONSTRAINTS[int(rng.integers(3))]
        cond = "B" if c is not Constraint.UN else ("A", "B")[int(rng.integers(2))]
        s = random_scenario(rng, cond, shared_distributions=bool(rng.integers(2)))
        grp = ("a", "b")[int(rng.integers(2))]
        y, d = int(rng.integers(2)), int(rng.integers(2))
        cur = s.groups[0 if grp == "a" else 1].transitions.entry(y, d)
        room = 0.99 - cur
        if room < 0.02:
            skipped += 1
            continue
        delta = float(rng.uniform(0.01, min(0.2, room)))
        try:
            res = transition_intervention(s, c, (grp, y, d), delta, rows=rows)
        except ValueError:
            skipped += 1
            continue
        ch_a, ch_b = res.change
        own, other = (ch_a, ch_b) if grp == "a" else (ch_b, ch_a)
        ok = own > 1e-8 and other >= -SLACK
        out.append({"constraint": c.value, "condition": cond, "group": grp, "y": y, "d": d,
                    "delta": delta, "change_own": own, "change_other": other,
                    "pass": bool(ok)})
    return SuiteResult("prop3", out, skipped)


def prop2_suite(n: int = 50, seed: int = 0, tol: float = 1e-6) -> SuiteResult:
    rng = np.random.default_rng([seed, 2])
    out, draws = [], 0
    while len(out) < n and draws < 20 * n:
        draws += 1
        cond = ("A", "B")[int(rng.integers(2))]
        s = random_scenario(rng, cond, shared_distributions=bool(rng.integers(2)))
        ga, gb = s.groups
        rec = equitable_policy(ga.transitions, gb.transitions, ga, gb)
        if rec is None:
            continue
        traj = simulate(s, Constraint.UN, QualState(*rng.uniform(0, 1, 2)), tol=1e-12,
                        policy=constant_policy(*rec.thresholds))
        err = max(abs(traj.final.alpha_a - rec.alpha_hat), abs(traj.final.alpha_b - rec.alpha_hat))
        out.append({"condition": cond, "alpha_hat": rec.alpha_hat, "error": err,
                    "pass": bool(err <= tol)})
    return SuiteResult("prop2", out)


def prop1_suite(n: int = 50, seed: int = 0, offset: float = 0.02,
                rows: int | None = None) -> SuiteResult:
    """Fairness-preserving threshold shifts raise both equilibrium rates."""
    rng = np.random.default_rng([seed, 1])
    out, skipped, draws = [], 0, 0
    while len(out) < n and draws < 5 * n:
        draws += 1
        cond = ("A", "B")[int(rng.integers(2))]
        c = (Constraint.DP, Constraint.EQOPT)[int(rng.integers(2))]
        s = random_scenario(rng, cond, shared_distributions=bool(rng.integers(2)))
        off = offset if cond == "A" else -offset
        try:
            res = policy_intervention(s, c, off, rows=rows)
        except ValueError:
            skipped += 1
            continue
        ia, ib = res.improvement
        out.append({"condition": cond, "constraint": c.value, "offset": off,
                    "improve_a": ia, "improve_b": ib, "pass": bool(ia > 0 and ib > 0)})
    return SuiteResult("prop1", out, skipped)


def find_utility_witness(seed: int = 0, attempts: int = 200, offset: float = 0.05,
                         rows: int | None = None) -> PolicyInterventionResult | None:
    """Condition-B EqOpt scenario where lower thresholds also win long-run utility."""
    rng = np.random.default_rng([seed, 11])
    for _ in range(attempts):
        s = random_scenario(rng, "B", shared_distributions=True)
        try:
            res = policy_intervention(s, Constraint.EQOPT, -offset, rows=rows)
        except ValueError:
            continue
        if res.alternative_utility > res.optimal_utility + 1e-9:
            return res
    return None


SUITES = {
    "thm3": lambda n, seed: [theorem3_suite(n or 50, seed, True),
                             theorem3_suite(n or 50, seed, False)],
    "thm4": lambda n, seed: [theorem4_suite(n or 200, seed, "A"),
                             theorem4_suite(n or 200, seed, "B")],
    "thm5": lambda n, seed: [theorem5_suite(n or 50, seed)],
    "prop1": lambda n, seed: [prop1_suite(n or 50, seed)],
    "prop2": lambda n, seed: [prop2_suite(n or 50, seed)],
    "prop3": lambda n, seed: [prop3_suite(n or 100, seed)],
}


def run_suite(name: str, n: int | None = None, seed: int = 0) -> list[SuiteResult]:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    return SUITES[name](n, seed)

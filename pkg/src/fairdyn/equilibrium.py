"""Fixed points of the qualification dynamics.

Equilibria are intersections of the two balanced curves. For every value
of alpha_b on a grid we find all alpha_a solving group a's balanced
equation (the curve psi_a), evaluate group b's balanced residual along
that curve, and refine each sign change by nested root finding.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from ._validation import check_int
from .dynamics import fmt, g_ys, step
from .model import Constraint, GroupModel, QualState, Scenario
from .policy import approx_thresholds, threshold_map

ROWS = 33
ROOT_SCAN = 33
FD_STEP = 1e-4
DERIV_GRID = 33
DEDUP_TOL = 1e-6
RESIDUAL_TOL = 1e-7


def h_func(group: GroupModel, theta: float) -> float:
    """(1 - g_1)/g_0, the right side of the balanced equation 1/alpha - 1 = h."""
    return (1.0 - g_ys(group, 1, theta)) / g_ys(group, 0, theta)


def h_bounds(group: GroupModel) -> tuple[float, float]:
    t = group.transitions
    return ((1.0 - max(t.t10, t.t11)) / max(t.t00, t.t01),
            (1.0 - min(t.t10, t.t11)) / min(t.t00, t.t01))


class _Map:
    """One-step map and balanced residuals over a memoised threshold map."""

    def __init__(self, scenario: Scenario, c, tmap=None):
        self.s = scenario
        self.c = Constraint.parse(c)
        self.tmap = tmap or threshold_map(scenario, self.c)

    def thetas(self, aa: float, ab: float):
        return self.tmap((aa, ab))

    def residual(self, s: int, aa: float, ab: float) -> float:
        """1/(1+h_s) - alpha_s; same sign as Phi_s - alpha_s."""
        pair = self.thetas(aa, ab)
        g = self.s.groups[s]
        th = pair.theta_a if s == 0 else pair.theta_b
        return 1.0 / (1.0 + h_func(g, th)) - (aa, ab)[s]

    def approx_residual(self, s: int, aa: float, ab: float) -> float:
        if getattr(self.tmap, "scenario", None) is not self.s:
            return self.residual(s, aa, ab)
        th = approx_thresholds(self.s, QualState(aa, ab), self.c)[s]
        return 1.0 / (1.0 + h_func(self.s.groups[s], th)) - (aa, ab)[s]

    def phi(self, aa: float, ab: float) -> np.ndarray:
        nxt = step(self.s, QualState(aa, ab), self.thetas(aa, ab))
        return np.array([nxt.alpha_a, nxt.alpha_b])

    def h_values(self, aa: float, ab: float) -> np.ndarray:
        pair = self.thetas(aa, ab)
        return np.array([h_func(self.s.group_a, pair.theta_a),
                         h_func(self.s.group_b, pair.theta_b)])


def _all_roots(f: Callable[[float], float], unique: bool, n_scan: int,
               approx: Callable[[float], float] | None = None) -> list[float]:
    """Roots of f on [0, 1] given f(0) > 0 > f(1).

    The scan may use a cheap approximation of f; every bracket is then
    confirmed (and widened if needed) with the exact function.
    """
    if unique:
        return [brentq(f, 0.0, 1.0, xtol=1e-13)]
    x = np.linspace(0.0, 1.0, n_scan)
    v = np.array([(approx or f)(float(t)) for t in x])
    exact: dict[int, float] = {}

    def fx(i: int) -> float:
        if i not in exact:
            exact[i] = v[i] if approx is None else f(float(x[i]))
        return exact[i]

    roots = []
    for i in range(n_scan - 1):
        if v[i] == 0.0 and approx is None:
            roots.append(float(x[i]))
        elif v[i] * v[i + 1] < 0 or (v[i] == 0.0 and i > 0):
            # the approximation can misplace a crossing by a cell, so look
            # for exact sign changes in a small window first
            window = range(max(i - 1, 0), min(i + 2, n_scan - 1))
            hits = [j for j in window if fx(j) * fx(j + 1) <= 0]
            for j in hits:
                if fx(j) == 0.0:
                    roots.append(float(x[j]))
                elif fx(j + 1) == 0.0:
                    roots.append(float(x[j + 1]))
                else:
                    roots.append(brentq(f, x[j], x[j + 1], xtol=1e-13))
            if hits:
                continue
            lo, hi = i, i + 1
            f_lo, f_hi = fx(lo), fx(hi)
            while f_lo * f_hi > 0 and (lo > 0 or hi < n_scan - 1):
                lo, hi = max(lo - 1, 0), min(hi + 1, n_scan - 1)
                f_lo, f_hi = fx(lo), fx(hi)
            if f_lo == 0.0:
                roots.append(float(x[lo]))
            elif f_hi == 0.0:
                roots.append(float(x[hi]))
            elif f_lo * f_hi < 0:
                roots.append(brentq(f, x[lo], x[hi], xtol=1e-13))
    if v[-1] == 0.0 and approx is None:
        roots.append(1.0)
    roots = sorted(roots)
    out = []
    for r in roots:
        if not out or r - out[-1] > 1e-9:
            out.append(r)
    if not out:  # the approximation hid every crossing
        out = _all_roots(f, False, n_scan) if approx is not None else [brentq(f, 0.0, 1.0)]
    return out


def _root_near(f: Callable[[float], float], guess: float, width: float) -> float | None:
    """Root of a decreasing-through-zero f near guess, expanding the bracket."""
    lo, hi = max(guess - width, 0.0), min(guess + width, 1.0)
    f_lo, f_hi = f(lo), f(hi)
    while f_lo * f_hi > 0:
        if lo == 0.0 and hi == 1.0:
            return None
        width *= 2.0
        if (f_lo < 0) == (f_hi < 0) and f_lo < 0:
            lo = max(guess - width, 0.0)
            f_lo = f(lo)
        else:
            hi = min(guess + width, 1.0)
            f_hi = f(hi)
        if lo == 0.0 and hi == 1.0 and f_lo * f_hi > 0:
            return None
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    return brentq(f, lo, hi, xtol=1e-13)


@dataclass
class BalancedFunctions:
    """Balanced curves sampled on a grid; each grid value may carry several roots."""

    grid: np.ndarray
    psi_a: list[list[float]]
    psi_b: list[list[float]]

    @property
    def resolution(self) -> int:
        return int(self.grid.size)


def _psi_unique(scenario: Scenario, s: int, c: Constraint) -> bool:
    return scenario.groups[s].transitions.condition == "A"


def balanced_functions(scenario: Scenario, c, grid: int = 65,
                       n_scan: int = ROOT_SCAN, tmap=None) -> BalancedFunctions:
    """psi_a(alpha_b) and psi_b(alpha_a) on a uniform grid of the opposite rate."""
    grid = check_int(grid, "grid", 2)
    m = _Map(scenario, c, tmap)
    xs = np.linspace(0.0, 1.0, grid)
    out_a, out_b = [], []
    for v in xs:
        v = float(v)
        out_a.append(_all_roots(lambda t: m.residual(0, t, v), _psi_unique(scenario, 0, m.c),
                                n_scan, lambda t: m.approx_residual(0, t, v)))
        out_b.append(_all_roots(lambda t: m.residual(1, v, t), _psi_unique(scenario, 1, m.c),
                                n_scan, lambda t: m.approx_residual(1, v, t)))
    return BalancedFunctions(xs, out_a, out_b)


@dataclass
class EquilibriumReport:
    constraint: Constraint
    equilibria: list[QualState]
    residuals: list[float]
    stable_flags: list[bool]
    condition_class: tuple[str, str]
    unique_by_theorem2: bool | None = None
    uniqueness_check: str = "not run"
    lipschitz_constant_estimate: float | None = None
    details: dict = field(default_factory=dict)

    @property
    def unique(self) -> bool:
        return len(self.equilibria) == 1

    @property
    def equilibrium(self) -> QualState:
        if len(self.equilibria) != 1:
            raise ValueError(f"expected one equilibrium, found {len(self.equilibria)}")
        return self.equilibria[0]

    def to_csv(self, path_or_file) -> None:
        own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            w = csv.writer(fh)
            w.writerow(["constraint", "index", "alphaA", "alphaB", "residual", "stable",
                        "conditionA", "conditionB", "unique_by_theorem2", "lipschitz"])
            uniq = "unknown" if self.unique_by_theorem2 is None else str(self.unique_by_theorem2)
            for i, (e, r, st) in enumerate(zip(self.equilibria, self.residuals,
                                               self.stable_flags)):
                w.writerow([self.constraint.value, i, fmt(e.alpha_a), fmt(e.alpha_b), fmt(r),
                            str(st), *self.condition_class, uniq,
                            fmt(self.lipschitz_constant_estimate)])
        finally:
            if own:
                fh.close()


def _dedupe(points: list[tuple[float, float]]) -> list[tuple[float, float]]:
    out: list[tuple[float, float]] = []
    for p in sorted(points, key=lambda p: (p[1], p[0])):
        if all(max(abs(p[0] - q[0]), abs(p[1] - q[1])) > DEDUP_TOL for q in out):
            out.append(p)
    return out


def _fold_pair(short: list[float], long: list[float]) -> tuple[list[tuple[int, int]], int]:
    """Pair roots across a row interval where two roots appear (or vanish).

    The extra two are taken to be an adjacent pair born at a fold; the one
    whose removal moves the remaining roots least is chosen.  Returns the
    (short, long) index pairs and the index of the first root of the pair.
    """
    n = len(short)
    costs = [sum(abs(a - b) for a, b in zip(short, long[:j] + long[j + 2:])) for j in range(n + 1)]
    j = int(np.argmin(costs))
    keep = [k for k in range(len(long)) if k not in (j, j + 1)]
    return list(zip(range(n), keep)), j


def _enumerate_coupled(m: _Map, rows: int, n_scan: int) -> list[tuple[float, float]]:
    s = m.s
    unique_a = _psi_unique(s, 0, m.c)
    width = 2.0 / rows
    found: list[tuple[float, float]] = []

    def psi_a_near(ab: float, guess: float) -> float | None:
        return _root_near(lambda t: m.residual(0, t, ab), guess, width)

    def row(yb: float, hint: list[float]) -> tuple[list[float], list[float]]:
        f = lambda t: m.residual(0, t, yb)  # noqa: E731
        roots = None
        if unique_a and hint:
            r = _root_near(f, hint[0], width)
            roots = [r] if r is not None else None
        if roots is None:
            roots = _all_roots(f, unique_a, n_scan, lambda t: m.approx_residual(0, t, yb))
        e = [m.residual(1, r, yb) for r in roots]
        found.extend((r, yb) for r, ev in zip(roots, e) if ev == 0.0)
        return roots, e

    def track(y0, r0, y1, r1) -> bool:
        def outer(b):
            w = (b - y0) / (y1 - y0)
            ra = psi_a_near(b, r0 + w * (r1 - r0))
            if ra is None:
                return math.nan
            outer.last = ra
            return m.residual(1, ra, b)

        ends = []
        for y in (y0, y1):
            outer.last = None
            ends.append((outer(y), outer.last, y))
        (v0, _, _), (v1, _, _) = ends
        if v0 * v1 < 0:
            b = brentq(outer, y0, y1, xtol=1e-12)
            v = outer(b)
            if not abs(v) <= 1e-9:
                # brentq closed on a jump between branches, not a root
                return False
            found.append((outer.last, b))
        else:
            # a crossing on a grid row: re-solving psi_a can flip
            # the sign of a rounding-level residual
            for v, ra, y in ends:
                if ra is not None and abs(v) <= 1e-12:
                    found.append((ra, y))
        return True

    def across_fold(lo_a, hi_a, y_side, y_other) -> bool:
        # near a fold the balanced curve is a graph over alpha_a
        def b_of(a):
            g = lambda b: m.residual(0, a, b)  # noqa: E731
            g0, g1 = g(y_other), g(y_side)
            if g1 == 0.0:
                return y_side
            if g0 * g1 > 0:
                return None
            return brentq(g, min(y_other, y_side), max(y_other, y_side), xtol=1e-13)

        def h(a):
            b = b_of(a)
            if b is None:
                return math.nan
            h.last = b
            return m.residual(1, a, b)

        try:
            a = brentq(h, lo_a, hi_a, xtol=1e-12)
        except ValueError:
            return False
        if not abs(h(a)) <= 1e-9:
            return False
        found.append((a, h.last))
        return True

    def span(y0, r0, e0, y1, r1, e1, depth):
        ok = True
        d = len(r1) - len(r0)
        fold = None
        if d == 0:
            pairs = list(zip(range(len(r0)), range(len(r1))))
        elif abs(d) == 2:
            if d > 0:
                pairs, j = _fold_pair(r0, r1)
                fold = (r1, e1, j, y1, y0)
            else:
                back, j = _fold_pair(r1, r0)
                pairs = [(i, k) for k, i in back]
                fold = (r0, e0, j, y0, y1)
        else:
            ok = False
            pairs = []
        if ok:
            for i, j in pairs:
                if e0[i] * e1[j] < 0 and not track(y0, r0[i], y1, r1[j]):
                    ok = False
            if fold is not None:
                rs, es, j, y_side, y_other = fold
                if es[j] * es[j + 1] < 0 and not across_fold(rs[j], rs[j + 1], y_side, y_other):
                    ok = False
        if ok:
            return
        if depth >= 10:
            raise ArithmeticError(f"could not follow the balanced curve between rows {y0} and {y1}")
        del found[n_found[(y0, y1)]:]
        ym = 0.5 * (y0 + y1)
        rm, em = row(ym, r0)
        n_found[(y0, ym)] = len(found)
        span(y0, r0, e0, ym, rm, em, depth + 1)
        n_found[(ym, y1)] = len(found)
        span(ym, rm, em, y1, r1, e1, depth + 1)

    n_found: dict[tuple[float, float], int] = {}
    ys = [float(y) for y in np.linspace(0.0, 1.0, rows)]
    r_prev, e_prev = row(ys[0], [])
    for y0, y1 in zip(ys, ys[1:]):
        r1, e1 = row(y1, r_prev)
        n_found[(y0, y1)] = len(found)
        span(y0, r_prev, e_prev, y1, r1, e1, 0)
        r_prev, e_prev = r1, e1
    return found


def find_equilibria(scenario: Scenario, c, rows: int = ROWS, n_scan: int = ROOT_SCAN,
                    diagnostics: bool = False, tmap=None) -> EquilibriumReport:
    """Enumerate fixed points of the dynamics under constraint c."""
    rows = check_int(rows, "rows", 3)
    m = _Map(scenario, c, tmap)
    if m.c is Constraint.UN:
        # decoupled: each group solves its own balanced equation
        ra = _all_roots(lambda t: m.residual(0, t, 0.5), _psi_unique(scenario, 0, m.c), n_scan,
                        lambda t: m.approx_residual(0, t, 0.5))
        rb = _all_roots(lambda t: m.residual(1, 0.5, t), _psi_unique(scenario, 1, m.c), n_scan,
                        lambda t: m.approx_residual(1, 0.5, t))
        points = [(a, b) for a in ra for b in rb]
    else:
        points = _enumerate_coupled(m, rows, n_scan)
    points = _dedupe(points)
    if not points:
        raise ArithmeticError("no equilibrium found; the balanced curves did not intersect")
    eqs, res = [], []
    for a, b in points:
        r = float(np.max(np.abs(m.phi(a, b) - np.array([a, b]))))
        if r > RESIDUAL_TOL:
            raise ArithmeticError(f"equilibrium candidate ({a}, {b}) has residual {r:.3g}")
        eqs.append(QualState(a, b))
        res.append(r)
    report = EquilibriumReport(m.c, eqs, res, stability_flags(scenario, m.c, eqs, tmap=m.tmap),
                               scenario.conditions)
    if diagnostics:
        try:
            ok, det = check_uniqueness(scenario, m.c, tmap=m.tmap)
            report.unique_by_theorem2 = ok
            report.uniqueness_check = f"grid-verified ({det['condition']})"
            report.details["uniqueness"] = det
        except ValueError as exc:
            report.uniqueness_check = f"unknown: {exc}"
        report.lipschitz_constant_estimate = lipschitz_estimate(scenario, m.c, tmap=m.tmap)
    return report


def _fd(fun: Callable[[float, float], np.ndarray], a: float, b: float, h: float):
    """Central differences in each coordinate, one-sided at the box edges."""
    cols = []
    for axis in range(2):
        lo = [a, b]
        hi = [a, b]
        lo[axis] = max(lo[axis] - h, 0.0)
        hi[axis] = min(hi[axis] + h, 1.0)
        cols.append((fun(*hi) - fun(*lo)) / (hi[axis] - lo[axis]))
    return np.column_stack(cols)


def jacobian(scenario: Scenario, c, state, h: float = FD_STEP, tmap=None) -> np.ndarray:
    """Finite-difference Jacobian of the one-step map."""
    m = _Map(scenario, c, tmap)
    return _fd(m.phi, float(state[0]), float(state[1]), h)


def stability_flags(scenario: Scenario, c, equilibria, h: float = FD_STEP,
                    tmap=None) -> list[bool]:
    flags = []
    for e in equilibria:
        rho = float(np.max(np.abs(np.linalg.eigvals(jacobian(scenario, c, e, h, tmap)))))
        flags.append(rho < 1.0 - 1e-6)
    return flags


def lipschitz_estimate(scenario: Scenario, c, grid: int = DERIV_GRID, h: float = FD_STEP,
                       tmap=None) -> float:
    """Largest infinity-norm of the one-step Jacobian over a state grid."""
    m = _Map(scenario, c, tmap)
    xs = np.linspace(0.0, 1.0, check_int(grid, "grid", 2))
    best = 0.0
    for a in xs:
        for b in xs:
            jac = _fd(m.phi, float(a), float(b), h)
            best = max(best, float(np.max(np.abs(jac).sum(axis=1))))
    return best


def h_partials(scenario: Scenario, c, grid: int = DERIV_GRID, h: float = FD_STEP,
               tmap=None) -> np.ndarray:
    """Array [i, j, s, u] of d h_s(theta_s) / d alpha_u on a grid x grid state lattice."""
    m = _Map(scenario, c, tmap)
    xs = np.linspace(0.0, 1.0, check_int(grid, "grid", 2))
    out = np.empty((xs.size, xs.size, 2, 2))
    for i, a in enumerate(xs):
        for j, b in enumerate(xs):
            out[i, j] = _fd(m.h_values, float(a), float(b), h)
    return out


def check_uniqueness(scenario: Scenario, c, grid: int = DERIV_GRID, h: float = FD_STEP,
                     tmap=None) -> tuple[bool, dict]:
    """Grid check of the derivative bounds that guarantee a unique equilibrium.

    Under condition A only the cross partials d h_s / d alpha_{-s} must stay
    below one; under condition B both partials must.
    """
    cls = scenario.conditions
    if cls[0] != cls[1] or cls[0] not in ("A", "B"):
        raise ValueError(f"Theorem 2 inapplicable for condition classes {cls}")
    c = Constraint.parse(c)
    if c is Constraint.UN and cls[0] == "A":
        return True, {"condition": "A", "max_partial": 0.0, "grid": grid,
                      "note": "cross partials vanish for the unconstrained policy"}
    d = np.abs(h_partials(scenario, c, grid, h, tmap))
    if cls[0] == "A":
        req = np.maximum(d[:, :, 0, 1], d[:, :, 1, 0])
    else:
        req = d.max(axis=(2, 3))
    worst = np.unravel_index(int(np.argmax(req)), req.shape)
    xs = np.linspace(0.0, 1.0, grid)
    mx = float(req.max())
    return mx < 1.0 - 1e-6, {"condition": cls[0], "max_partial": mx, "grid": grid,
                             "worst_state": (float(xs[worst[0]]), float(xs[worst[1]]))}


def cdf_sensitivity(scenario: Scenario, c, grid: int = DERIV_GRID, h: float = FD_STEP,
                    tmap=None) -> tuple[float, float]:
    """Grid estimates of M_0 and M_1, bounds on |d G_y(theta_s) / d alpha_u|."""
    m = _Map(scenario, c, tmap)
    xs = np.linspace(0.0, 1.0, check_int(grid, "grid", 2))

    def cdfs(a, b):
        pair = m.thetas(a, b)
        vals = []
        for g, th in zip(scenario.groups, pair):
            for d in (g.g0, g.g1):
                vals.append(0.0 if th == math.inf else 1.0 if th == -math.inf
                            else 1.0 - float(d.sf(th)))
        # order: a0, a1, b0, b1
        return np.array(vals)

    m0 = m1 = 0.0
    for a in xs:
        for b in xs:
            jac = np.abs(_fd(cdfs, float(a), float(b), h))
            m0 = max(m0, float(jac[[0, 2]].max()))
            m1 = max(m1, float(jac[[1, 3]].max()))
    return m0, m1


def corollary_epsilon(group: GroupModel, m0: float, m1: float) -> float:
    """Largest |T_y1 - T_y0| for which the derivative bound is guaranteed."""
    t = group.transitions
    if t.condition == "A":
        return t.t01 ** 2 / (m1 * t.t00 + m0 * (1.0 - t.t11))
    if t.condition == "B":
        return t.t00 ** 2 / (m1 * t.t01 + m0 * (1.0 - t.t10))
    raise ValueError("the transition bound needs condition A or B")

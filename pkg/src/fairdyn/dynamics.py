"""Qualification-rate dynamics under a threshold policy."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

from ._validation import check_int, check_positive
from .model import Constraint, GroupModel, QualState, Scenario, expected_utility
from .policy import ThresholdPair, threshold_map

DEFAULT_TOL = 1e-8
DEFAULT_MAX_STEPS = 10_000
OSC_WINDOW = 64
OSC_MAX_PERIOD = 8


def g_ys(group: GroupModel, y: int, theta: float) -> float:
    """Probability of being qualified next round given label y and threshold theta."""
    t = group.transitions
    t0, t1 = t.entry(y, 0), t.entry(y, 1)
    if theta == math.inf:
        return t0
    if theta == -math.inf:
        return t1
    d = group.g1 if y else group.g0
    return t0 * d.cdf(theta) + t1 * d.sf(theta)


def _clamp(v: float) -> float:
    return min(max(v, 0.0), 1.0)


def group_step(group: GroupModel, alpha: float, theta: float) -> float:
    return _clamp(g_ys(group, 0, theta) * (1.0 - alpha) + g_ys(group, 1, theta) * alpha)


def step(scenario: Scenario, state: QualState, pair) -> QualState:
    """One application of the qualification-rate update."""
    ta, tb = pair
    return QualState(group_step(scenario.group_a, state.alpha_a, ta),
                     group_step(scenario.group_b, state.alpha_b, tb))


@dataclass(frozen=True)
class Termination:
    kind: str  # "converged", "oscillating" or "max_steps"
    residual: float = math.nan
    period: int | None = None

    def __str__(self):
        if self.kind == "converged":
            return f"Converged(residual={self.residual:.3g})"
        if self.kind == "oscillating":
            return f"Oscillating(period={self.period})"
        return "MaxSteps"


@dataclass
class Trajectory:
    states: list[QualState]
    thresholds: list[ThresholdPair]
    utilities: list[float]
    termination: Termination
    constraint: Constraint = Constraint.UN
    diagnostics: dict = field(default_factory=dict)

    @property
    def final(self) -> QualState:
        return self.states[-1]

    @property
    def converged(self) -> bool:
        return self.termination.kind == "converged"

    def rows(self):
        for i, (s, p, u) in enumerate(zip(self.states, self.thresholds, self.utilities)):
            yield (i, s.alpha_a, s.alpha_b, p.theta_a, p.theta_b, u)

    def to_csv(self, path_or_file) -> None:
        write_trajectory_csv(self, path_or_file)


def fmt(x) -> str:
    """Full-precision formatting used by all CSV output."""
    if isinstance(x, str):
        return x
    if isinstance(x, bool) or isinstance(x, int):
        return str(int(x))
    if x is None:
        return ""
    return format(float(x), ".17g")


TRAJECTORY_COLUMNS = ("step", "alphaA", "alphaB", "thetaA", "thetaB", "utility")


def write_trajectory_csv(traj: Trajectory, path_or_file) -> None:
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_COLUMNS)
        for row in traj.rows():
            w.writerow([fmt(v) for v in row])
    finally:
        if own:
            fh.close()


def detect_oscillation(states: Sequence[QualState], window: int = OSC_WINDOW,
                       tol: float = DEFAULT_TOL, max_period: int = OSC_MAX_PERIOD) -> int | None:
    """Smallest period p >= 2 repeating over the trailing window, if any."""
    window = check_int(window, "window", 2)
    if window > len(states):
        raise ValueError("window longer than the state sequence")
    tail = list(states[-window:])
    if all(tail[i].distance(tail[i - 1]) <= tol for i in range(1, len(tail))):
        return None
    for p in range(2, min(max_period, window // 2) + 1):
        if all(tail[i].distance(tail[i - p]) <= tol for i in range(p, len(tail))):
            return p
    return None


def simulate(scenario: Scenario, c, initial: QualState, max_steps: int = DEFAULT_MAX_STEPS,
             tol: float = DEFAULT_TOL, policy: Callable[[QualState], ThresholdPair] | None = None,
             window: int = OSC_WINDOW) -> Trajectory:
    """Iterate optimal decisions and the population update until a stop rule fires."""
    c = Constraint.parse(c)
    max_steps = check_int(max_steps, "max_steps", 1)
    tol = check_positive(tol, "tol")
    tmap = policy or threshold_map(scenario, c)
    state = initial if isinstance(initial, QualState) else QualState(*initial)
    states, pairs, utils = [state], [], []
    term = Termination("max_steps")
    for t in range(max_steps):
        pair = tmap(state)
        pairs.append(pair)
        utils.append(expected_utility(scenario, state, pair))
        nxt = step(scenario, state, pair)
        states.append(nxt)
        res = nxt.distance(state)
        state = nxt
        if res <= tol:
            term = Termination("converged", residual=res)
            break
        if len(states) >= window and t % 4 == 3:
            period = detect_oscillation(states, window, tol)
            if period is not None:
                term = Termination("oscillating", period=period)
                break
    pair = tmap(state)
    pairs.append(pair)
    utils.append(expected_utility(scenario, state, pair))
    diag = {}
    if term.kind == "max_steps" and len(states) >= window:
        p = detect_oscillation(states, window, max(tol, 1e-6), max_period=window // 2)
        if p is not None:
            diag["long_period"] = p
    return Trajectory(states, pairs, utils, term, c, diag)


def long_run_utility(traj: Trajectory, window: int = OSC_WINDOW) -> float:
    """Average per-round utility over the tail of a trajectory."""
    tail = traj.utilities[-min(window, len(traj.utilities)):]
    if traj.termination.kind == "converged":
        return traj.utilities[-1]
    return sum(tail) / len(tail)

"""Groups, transitions, scenarios, the qualification profile and utility."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property

import numpy as np

from ._validation import check_open_unit, check_positive, check_unit
from .dist import FeatureDistribution, Tabulated, verify_mlr

TABLE_SIZE = 1025


class Constraint(str, Enum):
    UN = "UN"
    DP = "DP"
    EQOPT = "EqOpt"

    @classmethod
    def parse(cls, value) -> "Constraint":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "").replace("-", "")
        aliases = {"un": cls.UN, "unconstrained": cls.UN, "none": cls.UN,
                   "dp": cls.DP, "demographicparity": cls.DP,
                   "eqopt": cls.EQOPT, "eo": cls.EQOPT, "equalopportunity": cls.EQOPT}
        if key not in aliases:
            raise ValueError(f"unknown fairness constraint {value!r}")
        return aliases[key]


@dataclass(frozen=True)
class TransitionMatrix:
    """T_yd = P(next label is 1 | label y, decision d)."""

    t00: float
    t01: float
    t10: float
    t11: float

    def __post_init__(self):
        for name in ("t00", "t01", "t10", "t11"):
            object.__setattr__(self, name, check_open_unit(getattr(self, name), name))

    @classmethod
    def from_sequence(cls, values) -> "TransitionMatrix":
        vals = list(values)
        if len(vals) != 4:
            raise ValueError("transitions need four entries (t00, t01, t10, t11)")
        return cls(*map(float, vals))

    def entry(self, y: int, d: int) -> float:
        return getattr(self, f"t{int(y)}{int(d)}")

    def with_entry(self, y: int, d: int, value: float) -> "TransitionMatrix":
        return replace(self, **{f"t{int(y)}{int(d)}": value})

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.t00, self.t01, self.t10, self.t11)

    @property
    def condition(self) -> str:
        return classify_transitions(self)


def classify_transitions(t: TransitionMatrix) -> str:
    """Label A, B, C or D; ties prefer B, then A, then C."""
    if t.t01 >= t.t00 and t.t11 >= t.t10:
        return "B"
    if t.t01 <= t.t00 and t.t11 <= t.t10:
        return "A"
    if t.t01 >= t.t00 and t.t11 <= t.t10:
        return "C"
    return "D"


@dataclass(frozen=True)
class GroupTable:
    """Feature grid with tail masses and log likelihood ratio log(G0/G1)."""

    x: np.ndarray
    sf0: np.ndarray
    sf1: np.ndarray
    log_lr: np.ndarray


@dataclass(frozen=True)
class GroupModel:
    g0: FeatureDistribution
    g1: FeatureDistribution
    transitions: TransitionMatrix
    share: float
    check_mlr: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "share", check_open_unit(self.share, "share"))
        if self.check_mlr:
            res = verify_mlr(self.g0, self.g1)
            if not res.ok:
                raise ValueError(
                    f"monotone likelihood ratio violated near x={res.first_violation:.6g}")

    @property
    def support(self) -> tuple[float, float]:
        return (min(self.g0.support[0], self.g1.support[0]),
                max(self.g0.support[1], self.g1.support[1]))

    @property
    def has_flat_cdf(self) -> bool:
        return any(isinstance(g, Tabulated) and g.has_flat_segments for g in (self.g0, self.g1))

    @cached_property
    def table(self) -> GroupTable:
        lo, hi = self.support
        x = np.linspace(lo, hi, TABLE_SIZE)
        with np.errstate(divide="ignore", invalid="ignore"):
            llr = np.asarray(self.g0.logpdf(x)) - np.asarray(self.g1.logpdf(x))
        # where both densities vanish, carry the next defined value backwards
        bad = np.isnan(llr)
        if bad.all():
            raise ValueError("densities vanish on the whole support")
        if bad.any():
            idx = np.where(~bad, np.arange(x.size), x.size)
            idx = np.minimum.accumulate(idx[::-1])[::-1]
            last = np.flatnonzero(~bad)[-1]
            idx = np.where(idx >= x.size, last, idx)
            llr = llr[idx]
        return GroupTable(x, np.asarray(self.g0.sf(x)), np.asarray(self.g1.sf(x)), llr)

    def log_lr(self, x):
        """log(G0(x)/G1(x)); +inf where only G0 is positive, nan outside support."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.g0.logpdf(x) - self.g1.logpdf(x)

    def with_transitions(self, t: TransitionMatrix) -> "GroupModel":
        return replace(self, transitions=t, check_mlr=False)


@dataclass(frozen=True)
class Scenario:
    group_a: GroupModel
    group_b: GroupModel
    u_plus: float = 1.0
    u_minus: float = 1.0

    def __post_init__(self):
        check_positive(self.u_plus, "u_plus")
        check_positive(self.u_minus, "u_minus")
        total = self.group_a.share + self.group_b.share
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"group shares must sum to 1, got {total!r}")

    @property
    def groups(self) -> tuple[GroupModel, GroupModel]:
        return (self.group_a, self.group_b)

    @property
    def gamma_target(self) -> float:
        """Profile level u_-/(u_+ + u_-) at which acceptance breaks even."""
        return self.u_minus / (self.u_plus + self.u_minus)

    @property
    def conditions(self) -> tuple[str, str]:
        return (self.group_a.transitions.condition, self.group_b.transitions.condition)

    def with_group(self, which: str, group: GroupModel) -> "Scenario":
        key = "group_a" if which in ("a", "A", 0) else "group_b"
        return replace(self, **{key: group})


@dataclass(frozen=True)
class QualState:
    alpha_a: float
    alpha_b: float

    def __post_init__(self):
        object.__setattr__(self, "alpha_a", check_unit(self.alpha_a, "alpha_a"))
        object.__setattr__(self, "alpha_b", check_unit(self.alpha_b, "alpha_b"))

    def __iter__(self):
        yield self.alpha_a
        yield self.alpha_b

    def __getitem__(self, i):
        return (self.alpha_a, self.alpha_b)[i]

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha_a, self.alpha_b])

    def distance(self, other: "QualState") -> float:
        return max(abs(self.alpha_a - other.alpha_a), abs(self.alpha_b - other.alpha_b))

    @property
    def disparity(self) -> float:
        return self.alpha_a - self.alpha_b


def profile_from_llr(log_lr, alpha):
    """gamma = 1/(exp(log_lr)*(1/alpha - 1) + 1), evaluated without overflow."""
    if alpha <= 0.0:
        return np.zeros_like(np.asarray(log_lr, dtype=float)) if np.ndim(log_lr) else 0.0
    if alpha >= 1.0:
        return np.ones_like(np.asarray(log_lr, dtype=float)) if np.ndim(log_lr) else 1.0
    if type(log_lr) is float:
        z = log_lr + math.log1p(-alpha) - math.log(alpha)
        if z > 0:
            e = math.exp(-z)
            return e / (1.0 + e)
        return 1.0 / (1.0 + math.exp(z))
    z = np.asarray(log_lr, dtype=float) + math.log1p(-alpha) - math.log(alpha)
    with np.errstate(over="ignore"):
        g = np.where(z > 0, np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))),
                     1.0 / (1.0 + np.exp(-np.abs(z))))
    return float(g) if np.ndim(log_lr) == 0 else g


def qualification_profile(group: GroupModel, alpha: float, x):
    """Posterior probability of being qualified given feature x."""
    alpha = check_unit(alpha, "alpha")
    llr = np.asarray(group.log_lr(x), dtype=float)
    if np.any(np.isnan(llr)):
        raise ValueError("x outside support: both densities vanish")
    return profile_from_llr(llr if llr.ndim else float(llr), alpha)


def constraint_density(group: GroupModel, alpha: float, c, x):
    c = Constraint.parse(c)
    if c is Constraint.UN:
        raise ValueError("no constraint distribution for the unconstrained policy")
    if c is Constraint.EQOPT:
        return group.g1.pdf(x)
    alpha = check_unit(alpha, "alpha")
    return (1.0 - alpha) * group.g0.pdf(x) + alpha * group.g1.pdf(x)


def constraint_sf(group: GroupModel, alpha: float, c, x):
    """Acceptance mass P_C(X >= x) of the constraint distribution."""
    c = Constraint.parse(c)
    if c is Constraint.EQOPT:
        return group.g1.sf(x)
    if c is Constraint.DP:
        return (1.0 - alpha) * group.g0.sf(x) + alpha * group.g1.sf(x)
    raise ValueError("no constraint distribution for the unconstrained policy")


def _tail(d: FeatureDistribution, theta: float) -> float:
    if theta == math.inf:
        return 0.0
    if theta == -math.inf:
        return 1.0
    return float(d.sf(float(theta)))


def group_utility(group: GroupModel, alpha: float, theta: float,
                  u_plus: float, u_minus: float) -> float:
    return (alpha * u_plus * _tail(group.g1, theta)
            - (1.0 - alpha) * u_minus * _tail(group.g0, theta))


def expected_utility(scenario: Scenario, state: QualState, thresholds) -> float:
    """Per-round institutional utility of a threshold pair."""
    ta, tb = thresholds
    aa, ab = state
    return (scenario.group_a.share * group_utility(scenario.group_a, aa, ta,
                                                   scenario.u_plus, scenario.u_minus)
            + scenario.group_b.share * group_utility(scenario.group_b, ab, tb,
                                                     scenario.u_plus, scenario.u_minus))

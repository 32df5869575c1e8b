"""Single-group dynamics where the last decision also shapes the next feature draw.

Features follow ``G_yd = P(X_t | Y_t = y, D_{t-1} = d)`` and the population is
tracked through the joint state ``zeta^{yd} = P(D_{t-1} = d, Y_t = y)``.  Only
the unconstrained policy is considered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from ._validation import check_int, check_positive, check_unit
from .dist import FeatureDistribution, Gaussian, verify_mlr
from .dynamics import DEFAULT_MAX_STEPS, DEFAULT_TOL, Termination, detect_oscillation
from .model import TransitionMatrix, classify_transitions

ORDER = ((1, 1), (1, 0), (0, 1), (0, 0))
SIMPLEX_TOL = 1e-10
ALPHA_ROWS = 65
INNER_SCAN = 33
CROSSING_GRID = 4001
RESIDUAL_TOL = 1e-9
VARIANTS = ("unqualified", "qualified")


@dataclass(frozen=True)
class GenState:
    """Joint probabilities of (label now, previous decision)."""

    zeta11: float
    zeta10: float
    zeta01: float
    zeta00: float

    def __post_init__(self):
        vals = self.as_array()
        if np.any(vals < -SIMPLEX_TOL) or not np.all(np.isfinite(vals)):
            raise ValueError("state entries must be non-negative")
        if abs(vals.sum() - 1.0) > SIMPLEX_TOL:
            raise ValueError(f"state entries must sum to 1, got {vals.sum()!r}")

    @classmethod
    def from_array(cls, v) -> "GenState":
        v = np.clip(np.asarray(v, dtype=float), 0.0, None)
        return cls(*map(float, v / v.sum()))

    @classmethod
    def product(cls, alpha: float, accept: float = 0.5) -> "GenState":
        """zeta^{yd} = P(y) P(d); the default warm start accepts half the population."""
        alpha = check_unit(alpha, "alpha")
        accept = check_unit(accept, "accept")
        return cls(alpha * accept, alpha * (1 - accept),
                   (1 - alpha) * accept, (1 - alpha) * (1 - accept))

    def as_array(self) -> np.ndarray:
        return np.array([self.zeta11, self.zeta10, self.zeta01, self.zeta00])

    def get(self, y: int, d: int) -> float:
        return getattr(self, f"zeta{int(y)}{int(d)}")

    @property
    def alpha(self) -> float:
        return self.zeta11 + self.zeta10

    def distance(self, other: "GenState") -> float:
        return float(np.max(np.abs(self.as_array() - other.as_array())))


@dataclass(frozen=True)
class GenModel:
    g00: FeatureDistribution
    g01: FeatureDistribution
    g10: FeatureDistribution
    g11: FeatureDistribution
    transitions: TransitionMatrix
    u_plus: float = 1.0
    u_minus: float = 1.0
    check_assumption: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        check_positive(self.u_plus, "u_plus")
        check_positive(self.u_minus, "u_minus")
        if self.check_assumption:
            bad = assumption3_violations(self)
            if bad:
                raise ValueError("decreasing likelihood ratio violated for "
                                 + ", ".join(bad))

    def dist(self, y: int, d: int) -> FeatureDistribution:
        return getattr(self, f"g{int(y)}{int(d)}")

    @property
    def support(self) -> tuple[float, float]:
        ds = [self.dist(y, d) for y, d in ORDER]
        return min(g.support[0] for g in ds), max(g.support[1] for g in ds)

    @property
    def gamma_target(self) -> float:
        return self.u_minus / (self.u_plus + self.u_minus)

    def variant(self) -> str | None:
        """Which restricted case the model belongs to, if any."""
        same1 = self.g11 == self.g10
        same0 = self.g01 == self.g00
        if same1 and not same0:
            return "unqualified"
        if same0 and not same1:
            return "qualified"
        return None


def assumption3_violations(model: GenModel) -> list[str]:
    """Names of the ratios G_0d/G_1d' that fail to decrease strictly."""
    out = []
    for d0 in (0, 1):
        for d1 in (0, 1):
            if not verify_mlr(model.dist(0, d0), model.dist(1, d1)).ok:
                out.append(f"G0{d0}/G1{d1}")
    return out


def _logaddexp(a: float, b: float) -> float:
    if a < b:
        a, b = b, a
    if b == -math.inf:
        return a
    return a + math.log1p(math.exp(b - a))


def _log_odds(model: GenModel, state: GenState, x: float) -> float:
    """log of P(Y=1, X=x) / P(Y=0, X=x); nan when both vanish."""
    ln = ld = -math.inf
    for (y, d) in ORDER:
        z = state.get(y, d)
        if z <= 0:
            continue
        lp = float(model.dist(y, d).logpdf(x)) + math.log(z)
        if y:
            ln = _logaddexp(ln, lp)
        else:
            ld = _logaddexp(ld, lp)
    if ln == -math.inf and ld == -math.inf:
        return math.nan
    return ln - ld


def gen_profile(model: GenModel, state: GenState, x) -> float | np.ndarray:
    """P(Y=1 | X=x) under the decision-dependent feature model."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty(xs.shape)
    for i, xi in enumerate(xs):
        lo = _log_odds(model, state, float(xi))
        if math.isnan(lo):
            raise ValueError(f"all weighted densities vanish at x={xi!r}")
        out[i] = 1.0 / (1.0 + math.exp(-lo)) if lo > -700 else 0.0
    return float(out[0]) if np.ndim(x) == 0 else out


def gen_threshold(model: GenModel, state: GenState) -> float:
    """Feature value at which the posterior reaches u_-/(u_+ + u_-)."""
    if state.zeta01 + state.zeta00 <= 0:
        return -math.inf
    if state.alpha <= 0:
        return math.inf
    target = math.log(model.u_minus / model.u_plus)
    lo, hi = model.support

    def f(x):
        v = _log_odds(model, state, x)
        return (-math.inf if math.isnan(v) else v) - target

    flo, fhi = f(lo), f(hi)
    if flo >= 0:
        return -math.inf
    if fhi <= 0:
        return math.inf
    return brentq(f, lo, hi, xtol=1e-13, rtol=1e-15, maxiter=400)


def acceptance_probs(model: GenModel, theta: float) -> dict[tuple[int, int], float]:
    """P(D=1 | y, previous d) = 1 - CDF_yd(theta)."""
    out = {}
    for (y, d) in ORDER:
        if theta == math.inf:
            out[(y, d)] = 0.0
        elif theta == -math.inf:
            out[(y, d)] = 1.0
        else:
            out[(y, d)] = float(model.dist(y, d).sf(theta))
    return out


def transition_operator(model: GenModel, theta: float) -> np.ndarray:
    """4x4 matrix mapping zeta_t to zeta_{t+1}, rows and columns in (11, 10, 01, 00) order."""
    acc = acceptance_probs(model, theta)
    t = model.transitions
    gamma = np.zeros((4, 4))
    for j, (yp, dp) in enumerate(ORDER):
        for i, (y, d) in enumerate(ORDER):
            p_d = acc[(yp, dp)] if d == 1 else 1.0 - acc[(yp, dp)]
            ty = t.entry(yp, d)
            gamma[i, j] = p_d * (ty if y == 1 else 1.0 - ty)
    return gamma


def gen_step(model: GenModel, state: GenState, theta: float) -> GenState:
    nxt = transition_operator(model, theta) @ state.as_array()
    s = nxt.sum()
    if abs(s - 1.0) > 1e-12:
        raise ArithmeticError(f"probability drift {s - 1.0:.3g} in generation step")
    return GenState(*(nxt / s))


@dataclass
class GenTrajectory:
    states: list[GenState]
    thresholds: list[float]
    termination: Termination

    @property
    def final(self) -> GenState:
        return self.states[-1]

    @property
    def alphas(self) -> list[float]:
        return [s.alpha for s in self.states]


class _Qual:
    """Adapter so the oscillation detector can compare joint states."""

    def __init__(self, s: GenState):
        self.s = s

    def distance(self, other: "_Qual") -> float:
        return self.s.distance(other.s)


def gen_simulate(model: GenModel, initial, max_steps: int = DEFAULT_MAX_STEPS,
                 tol: float = DEFAULT_TOL) -> GenTrajectory:
    """Iterate the unconstrained optimal threshold and the joint-state update."""
    max_steps = check_int(max_steps, "max_steps", 1)
    tol = check_positive(tol, "tol")
    state = initial if isinstance(initial, GenState) else GenState.product(float(initial))
    states, thetas = [state], []
    term = Termination("max_steps")
    for t in range(max_steps):
        theta = gen_threshold(model, state)
        thetas.append(theta)
        nxt = gen_step(model, state, theta)
        states.append(nxt)
        res = nxt.distance(state)
        state = nxt
        if res <= tol:
            term = Termination("converged", residual=res)
            break
        if len(states) >= 64 and t % 4 == 3:
            p = detect_oscillation([_Qual(s) for s in states[-64:]], 64, tol)
            if p is not None:
                term = Termination("oscillating", period=p)
                break
    thetas.append(gen_threshold(model, state))
    return GenTrajectory(states, thetas, term)


# ---------------------------------------------------------------- equilibria

def _state_for(variant: str, alpha: float, z: float) -> GenState:
    """Joint state from the reduced coordinates of a restricted variant.

    For the unqualified-side case the split of alpha across d is irrelevant,
    likewise the split of 1 - alpha in the qualified-side case.
    """
    if variant == "unqualified":
        return GenState.from_array([alpha, 0.0, max(1.0 - alpha - z, 0.0), z])
    return GenState.from_array([z, max(alpha - z, 0.0), 1.0 - alpha, 0.0])


def _coords(variant: str, s: GenState) -> tuple[float, float]:
    return (s.alpha, s.zeta00 if variant == "unqualified" else s.zeta11)


def _reduced_map(model: GenModel, variant: str, alpha: float, z: float) -> tuple[float, float]:
    s = _state_for(variant, alpha, z)
    return _coords(variant, gen_step(model, s, gen_threshold(model, s)))


def _z_max(variant: str, alpha: float) -> float:
    return 1.0 - alpha if variant == "unqualified" else alpha


def _inner_roots(model, variant, alpha) -> list[float]:
    """Fixed points of the zeta coordinate for a given alpha."""
    zmax = _z_max(variant, alpha)
    f = lambda z: _reduced_map(model, variant, alpha, z)[1] - z
    zs = np.linspace(0.0, zmax, INNER_SCAN)
    vals = [f(z) for z in zs]
    roots = []
    for i in range(len(zs) - 1):
        if vals[i] == 0:
            roots.append(float(zs[i]))
        elif vals[i] * vals[i + 1] < 0:
            roots.append(brentq(f, zs[i], zs[i + 1], xtol=1e-14, rtol=1e-15))
    if vals[-1] == 0:
        roots.append(float(zs[-1]))
    return roots


def _outer(model, variant, alpha, branch: int) -> float:
    roots = _inner_roots(model, variant, alpha)
    if not roots:
        return math.nan
    z = roots[min(branch, len(roots) - 1)]
    return _reduced_map(model, variant, alpha, z)[0] - alpha


def _solve_reduced(model: GenModel, variant: str, rows: int) -> list[tuple[float, float]]:
    alphas = np.linspace(1e-6, 1 - 1e-6, rows)
    table = [_inner_roots(model, variant, a) for a in alphas]
    found = []
    for i in range(rows - 1):
        if not table[i] or len(table[i]) != len(table[i + 1]):
            continue
        for b in range(len(table[i])):
            lo = _outer(model, variant, alphas[i], b)
            hi = _outer(model, variant, alphas[i + 1], b)
            if lo == 0:
                a = float(alphas[i])
            elif lo * hi < 0:
                a = brentq(lambda a: _outer(model, variant, a, b), alphas[i], alphas[i + 1],
                           xtol=1e-14, rtol=1e-15)
            else:
                continue
            z = _inner_roots(model, variant, a)[b]
            if not any(abs(a - p) < 1e-7 and abs(z - q) < 1e-7 for p, q in found):
                found.append((a, z))
    return found


def _base_equilibria(model: GenModel, rows: int) -> list[float]:
    """Fixed points of alpha when features do not depend on the decision."""
    def f(a):
        s = GenState.product(a)
        return gen_step(model, s, gen_threshold(model, s)).alpha - a

    alphas = np.linspace(1e-9, 1 - 1e-9, rows)
    vals = [f(a) for a in alphas]
    roots = []
    for i in range(rows - 1):
        if vals[i] * vals[i + 1] < 0:
            roots.append(brentq(f, alphas[i], alphas[i + 1], xtol=1e-14, rtol=1e-15))
    return roots


def density_crossing(f: FeatureDistribution, g: FeatureDistribution,
                     lo: float, hi: float, n: int = CROSSING_GRID) -> float:
    """Unique point where two densities cross; several crossings raise."""
    d = lambda x: float(f.logpdf(x)) - float(g.logpdf(x))
    xs = np.linspace(lo, hi, n)
    with np.errstate(invalid="ignore"):
        vals = np.asarray(f.logpdf(xs)) - np.asarray(g.logpdf(xs))
    ok = np.isfinite(vals)
    xs, vals = xs[ok], vals[ok]
    idx = np.flatnonzero(np.sign(vals[1:]) != np.sign(vals[:-1]))
    if len(idx) != 1:
        raise ValueError(f"expected one density crossing, found {len(idx)}")
    i = idx[0]
    return brentq(d, xs[i], xs[i + 1], xtol=1e-13, rtol=1e-15)


def _cdf_order(f: FeatureDistribution, g: FeatureDistribution, lo, hi) -> str | None:
    """'le' if CDF_f <= CDF_g everywhere on the grid, 'ge' for the reverse."""
    xs = np.linspace(lo, hi, CROSSING_GRID)
    diff = np.asarray(f.cdf(xs)) - np.asarray(g.cdf(xs))
    if np.all(diff <= 1e-15):
        return "le"
    if np.all(diff >= -1e-15):
        return "ge"
    return None


@dataclass
class GenEquilibriumReport:
    variant: str
    equilibria: list[tuple[float, float]]
    residuals: list[float]
    feasible: list[bool]
    stable: list[bool]
    base_equilibria: list[float]
    x_hat: float
    assumption: str | None
    condition: str
    precondition: bool
    predicted: str | None
    observed: str | None

    @property
    def consistent(self) -> bool | None:
        """Whether the observed ordering matches the prediction, when one applies."""
        if self.predicted is None or self.observed is None:
            return None
        return self.predicted == self.observed


def _stable(model, variant, a, z, h=1e-6) -> bool:
    jac = np.zeros((2, 2))
    for k, (da, dz) in enumerate(((h, 0.0), (0.0, h))):
        p = np.array(_reduced_map(model, variant, min(a + da, 1 - 1e-12), z + dz))
        m = np.array(_reduced_map(model, variant, max(a - da, 1e-12), max(z - dz, 0.0)))
        jac[:, k] = (p - m) / (2 * h)
    return bool(np.max(np.abs(np.linalg.eigvals(jac))) < 1 - 1e-6)


def base_scenario(model: GenModel, variant: str) -> GenModel:
    """Comparison model whose features ignore the previous decision."""
    if variant == "unqualified":
        g = model.g01
        return GenModel(g, g, model.g10, model.g11, model.transitions,
                        model.u_plus, model.u_minus, check_assumption=False)
    g = model.g10
    return GenModel(model.g00, model.g01, g, g, model.transitions,
                    model.u_plus, model.u_minus, check_assumption=False)


def gen_equilibrium(model: GenModel, variant: str, rows: int = ALPHA_ROWS) -> GenEquilibriumReport:
    """Equilibria of a restricted variant plus the comparison with its base scenario."""
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    coincide = model.g01 == model.g00 and model.g11 == model.g10
    if model.variant() != variant and not coincide:
        need = ("G11 = G10 and G01 != G00" if variant == "unqualified"
                else "G01 = G00 and G11 != G10")
        raise ValueError(f"{variant}-side variant requires {need}")
    rows = check_int(rows, "rows", 3)
    eqs = _solve_reduced(model, variant, rows)
    residuals, feasible, stable = [], [], []
    for a, z in eqs:
        na, nz = _reduced_map(model, variant, a, z)
        residuals.append(max(abs(na - a), abs(nz - z)))
        feasible.append(a + z <= 1 + 1e-9 if variant == "unqualified" else z <= a + 1e-9)
        stable.append(_stable(model, variant, a, z))
    if not eqs or max(residuals) > RESIDUAL_TOL:
        raise ArithmeticError("no verified equilibrium of the generation dynamics")
    base = _base_equilibria(base_scenario(model, variant), rows)

    lo, hi = model.support
    t = model.transitions
    cond = classify_transitions(t)
    ratios = ((1 - t.t10) / t.t00, (1 - t.t11) / t.t01)
    if coincide:
        x_hat, pre, assumption, sign = math.nan, False, None, None
    elif variant == "unqualified":
        f, g = model.g01, model.g00
        x_hat = density_crossing(f, g, lo, hi)
        scale = math.exp(float(f.logpdf(x_hat)) - float(model.g11.logpdf(x_hat)))
        pre = model.u_plus / model.u_minus > scale * max(ratios)
        order = _cdf_order(f, g, lo, hi)
        assumption = {"le": "G01<=G00", "ge": "G01>=G00"}.get(order)
        # first CDF ordering: A raises, B lowers; the reverse ordering flips both
        sign = {"le": 1, "ge": -1}.get(order)
    else:
        f, g = model.g11, model.g10
        x_hat = density_crossing(f, g, lo, hi)
        scale = math.exp(float(model.g00.logpdf(x_hat)) - float(g.logpdf(x_hat)))
        pre = model.u_plus / model.u_minus < scale * min(ratios)
        order = _cdf_order(f, g, lo, hi)
        assumption = {"le": "G11<=G10", "ge": "G11>=G10"}.get(order)
        sign = {"le": -1, "ge": 1}.get(order)

    predicted = None
    if pre and sign is not None and cond in ("A", "B"):
        up = sign if cond == "A" else -sign
        predicted = "greater" if up > 0 else "less"
    observed = None
    if len(eqs) == 1 and len(base) == 1:
        diff = eqs[0][0] - base[0]
        observed = "equal" if abs(diff) <= 1e-9 else "greater" if diff > 0 else "less"
    return GenEquilibriumReport(variant, eqs, residuals, feasible, stable, base, x_hat,
                                assumption, cond, pre, predicted, observed)


def random_gen_model(rng: np.random.Generator, variant: str, condition: str | None = None,
                     margin: tuple[float, float] = (1.5, 3.0)) -> GenModel:
    """Equal-spread Gaussian model of one restricted variant meeting the utility precondition.

    ``margin`` scales the bound on u_+/u_- (multiplied for the unqualified
    side, divided for the qualified side).
    """
    from .analysis import random_transitions

    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    cond = condition or ("A", "B")[int(rng.integers(2))]
    t = random_transitions(rng, cond, 0.05, 0.95)
    sd = float(rng.uniform(2.0, 4.0))
    ratios = ((1 - t.t10) / t.t00, (1 - t.t11) / t.t01)
    k = float(rng.uniform(*margin))
    if variant == "unqualified":
        m1 = float(rng.uniform(3.0, 8.0))
        m0 = np.sort(rng.uniform(-8.0, m1 - 2.0, 2))
        if m0[1] - m0[0] < 1.0:
            m0[0] -= 1.0
        lo, hi = Gaussian(float(m0[0]), sd), Gaussian(float(m0[1]), sd)
        g00, g01 = (lo, hi) if rng.random() < 0.5 else (hi, lo)
        g1 = Gaussian(m1, sd)
        x_hat = 0.5 * (g00.mean + g01.mean)
        bound = math.exp(float(g01.logpdf(x_hat)) - float(g1.logpdf(x_hat))) * max(ratios)
        return GenModel(g00, g01, g1, g1, t, bound * k, 1.0)
    m0 = float(rng.uniform(-8.0, -3.0))
    m1 = np.sort(rng.uniform(m0 + 2.0, 8.0, 2))
    if m1[1] - m1[0] < 1.0:
        m1[1] += 1.0
    lo, hi = Gaussian(float(m1[0]), sd), Gaussian(float(m1[1]), sd)
    g10, g11 = (lo, hi) if rng.random() < 0.5 else (hi, lo)
    g0 = Gaussian(m0, sd)
    x_hat = 0.5 * (g10.mean + g11.mean)
    bound = math.exp(float(g0.logpdf(x_hat)) - float(g10.logpdf(x_hat))) * min(ratios)
    return GenModel(g0, g0, g10, g11, t, bound / k, 1.0)

"""Multivariate exponential-family features reduced to a one-dimensional score.

For class densities ``G_y(x) = B(x) exp(<eta_y, xi(x)> - A_y)`` the likelihood
ratio depends on ``x`` only through ``t = <eta_1 - eta_0, xi(x)>``, so every
threshold rule on the posterior is a threshold rule on ``t``.  Only the
multivariate Gaussian family ships with closed-form parameters; anything else
enters through precomputed score distributions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ._validation import check_int, check_open_unit
from .dist import FeatureDistribution, Tabulated
from .model import GroupModel, TransitionMatrix

HIST_BINS = 512
SMOOTHING = 1e-9
MIN_SAMPLES = 10_000


@dataclass(frozen=True, eq=False)
class GaussianClass:
    """N(mean, cov) in d dimensions."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.mean, dtype=float))
        c = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if m.ndim != 1 or c.shape != (m.size, m.size):
            raise ValueError("covariance must be a d x d matrix matching the mean")
        if not np.allclose(c, c.T, atol=1e-12):
            raise ValueError("covariance must be symmetric")
        try:
            np.linalg.cholesky(c)
        except np.linalg.LinAlgError:
            raise ValueError("covariance must be positive definite") from None
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "cov", c)

    @property
    def dim(self) -> int:
        return self.mean.size

    def natural(self) -> tuple[np.ndarray, np.ndarray, float]:
        """(linear eta, quadratic eta, log-partition) including the log-determinant."""
        prec = np.linalg.inv(self.cov)
        lin = prec @ self.mean
        _, logdet = np.linalg.slogdet(self.cov)
        a = 0.5 * float(self.mean @ lin) + 0.5 * logdet
        return lin, -0.5 * prec, a

    def logpdf(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        prec = np.linalg.inv(self.cov)
        _, logdet = np.linalg.slogdet(self.cov)
        r = x - self.mean
        quad = np.einsum("ni,ij,nj->n", r, prec, r)
        return -0.5 * (quad + logdet + self.dim * np.log(2 * np.pi))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.multivariate_normal(self.mean, self.cov, size=n)


@dataclass(frozen=True, eq=False)
class ExpFamilyGroup:
    """One group described by the natural-parameter difference between its classes.

    ``eta_linear`` and ``eta_quadratic`` split eta into the blocks acting on x
    and on x x^T.  Either ``classes`` (for sampling) or ``score_distributions``
    must be available before reducing to one dimension.
    """

    eta_linear: np.ndarray
    eta_quadratic: np.ndarray
    log_partition_diff: float
    transitions: TransitionMatrix
    share: float
    score_distributions: tuple[FeatureDistribution, FeatureDistribution] | None = None
    classes: tuple[GaussianClass, GaussianClass] | None = None

    def __post_init__(self):
        lin = np.atleast_1d(np.asarray(self.eta_linear, dtype=float))
        quad = np.asarray(self.eta_quadratic, dtype=float)
        if quad.ndim == 0 and quad == 0:
            quad = np.zeros((lin.size, lin.size))
        if lin.ndim != 1 or quad.shape != (lin.size, lin.size):
            raise ValueError("eta blocks must be a d-vector and a d x d matrix")
        object.__setattr__(self, "eta_linear", lin)
        object.__setattr__(self, "eta_quadratic", 0.5 * (quad + quad.T))
        object.__setattr__(self, "log_partition_diff", float(self.log_partition_diff))
        object.__setattr__(self, "share", check_open_unit(self.share, "share"))

    @property
    def dim(self) -> int:
        return self.eta_linear.size

    @property
    def eta(self) -> np.ndarray:
        """Flattened natural-parameter difference, matching ``sufficient_statistic``."""
        return np.concatenate([self.eta_linear, self.eta_quadratic.ravel()])

    @property
    def degenerate(self) -> bool:
        return not (np.any(self.eta_linear) or np.any(self.eta_quadratic))


def gaussian_group(class0: GaussianClass, class1: GaussianClass,
                   transitions: TransitionMatrix, share: float) -> ExpFamilyGroup:
    if class0.dim != class1.dim:
        raise ValueError("class dimensions differ")
    l0, q0, a0 = class0.natural()
    l1, q1, a1 = class1.natural()
    return ExpFamilyGroup(l1 - l0, q1 - q0, a1 - a0, transitions, share,
                          classes=(class0, class1))


def sufficient_statistic(x) -> np.ndarray:
    """xi(x) = (x, vec(x x^T)) row-wise."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    outer = np.einsum("ni,nj->nij", x, x).reshape(x.shape[0], -1)
    return np.concatenate([x, outer], axis=1)


def score(group: ExpFamilyGroup, x):
    """<eta, xi(x)> for one point (returns a float) or rows of points."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim <= 1
    arr = arr.reshape(1, -1) if single else arr
    if arr.ndim != 2 or arr.shape[1] != group.dim:
        raise ValueError(f"expected points of dimension {group.dim}, got shape {np.shape(x)}")
    t = arr @ group.eta_linear + np.einsum("ni,ij,nj->n", arr, group.eta_quadratic, arr)
    return float(t[0]) if single else t


def score_log_lr(group: ExpFamilyGroup, t):
    """log(G1/G0) as a function of the score."""
    return np.asarray(t, dtype=float) - group.log_partition_diff


def _class_streams(seed) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2)]


def tabulate_scores(group: ExpFamilyGroup, samples_per_class: int, seed=0,
                    bins: int = HIST_BINS) -> tuple[Tabulated, Tabulated]:
    """Score densities per class from a pooled Monte-Carlo histogram.

    The pooled density is split using the known ratio exp(t - A), so the two
    tabulated densities have an exactly log-linear ratio on the grid.
    """
    if group.classes is None:
        raise ValueError("group has neither score distributions nor class parameters")
    streams = _class_streams(seed)
    s0 = score(group, group.classes[0].sample(streams[0], samples_per_class))
    s1 = score(group, group.classes[1].sample(streams[1], samples_per_class))
    pooled = np.concatenate([s0, s1])
    lo, hi = float(pooled.min()), float(pooled.max())
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    counts, edges = np.histogram(pooled, bins=bins, range=(lo, hi))
    centers = 0.5 * (edges[1:] + edges[:-1])
    m = counts / (counts.sum() * np.diff(edges)) + SMOOTHING
    # with eta = 0 the ratio is the constant exp(-A), not a function of the bin
    w1 = expit(score_log_lr(group, np.zeros_like(centers) if group.degenerate else centers))
    return Tabulated(centers, 2.0 * m * (1.0 - w1)), Tabulated(centers, 2.0 * m * w1)


def reduce_to_1d(group: ExpFamilyGroup, samples_per_class: int = 100_000,
                 seed=0, bins: int = HIST_BINS) -> GroupModel:
    """One-dimensional group model on the score scale."""
    samples_per_class = check_int(samples_per_class, "samples_per_class", MIN_SAMPLES)
    if group.score_distributions is not None:
        g0, g1 = group.score_distributions
    else:
        g0, g1 = tabulate_scores(group, samples_per_class, seed, bins)
    # indistinguishable classes have a flat ratio, which is fine for the
    # profile but not a strict monotone ratio
    return GroupModel(g0, g1, group.transitions, group.share, check_mlr=not group.degenerate)


def raw_profile(group: ExpFamilyGroup, alpha: float, x) -> np.ndarray:
    """Posterior P(Y=1 | x) computed from the raw class densities."""
    if group.classes is None:
        raise ValueError("raw densities are unavailable")
    c0, c1 = group.classes
    llr = c1.logpdf(x) - c0.logpdf(x)
    return expit(llr + np.log(alpha) - np.log1p(-alpha))


def acceptance_region(group: ExpFamilyGroup, alpha: float, gamma_threshold: float, x) -> np.ndarray:
    """Mask of points whose posterior reaches ``gamma_threshold``."""
    return raw_profile(group, alpha, x) >= gamma_threshold

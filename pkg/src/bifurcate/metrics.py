"""Distances and T1 diagnostics for one-dimensional empirical measures."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

EXP_GUARD = 700.0  # exp overflows just above 709.78


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Uniform weights on sorted support points."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.sort(np.asarray(self.points, dtype=np.float64).ravel())
        if pts.size == 0:
            raise ValueError("empirical measure needs at least one point")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.size

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.points.size, 1.0 / self.points.size)


def _as_measure(a) -> EmpiricalMeasure:
    return a if isinstance(a, EmpiricalMeasure) else EmpiricalMeasure(a)


def wasserstein_p(a, b, p: float = 1.0) -> float:
    """Exact W_p between two empirical measures on the real line.

    Equal sizes pair the order statistics. Otherwise the two quantile
    functions are integrated exactly over the merged breakpoints of the
    cumulative weights.
    """
    if not 1.0 <= p <= 2.0:
        raise ValueError(f"p must lie in [1, 2], got {p}")
    x = _as_measure(a).points
    y = _as_measure(b).points
    if x.size == y.size:
        return float(np.mean(np.abs(x - y) ** p) ** (1.0 / p))
    qa = np.arange(1, x.size + 1) / x.size
    qb = np.arange(1, y.size + 1) / y.size
    qs = np.union1d(qa, qb)
    widths = np.diff(np.concatenate(([0.0], qs)))
    mid = qs - widths / 2
    ia = np.minimum(np.searchsorted(qa, mid), x.size - 1)
    ib = np.minimum(np.searchsorted(qb, mid), y.size - 1)
    return float(np.sum(widths * np.abs(x[ia] - y[ib]) ** p) ** (1.0 / p))


def relative_entropy(a, b, bins: int = 64) -> float:
    """Histogram estimate of H(a | b) on a shared uniform grid.

    Returns ``math.inf`` when some bin carries mass under ``a`` but none under
    ``b``.
    """
    if bins < 2:
        raise ValueError("need at least two bins")
    x = _as_measure(a).points
    y = _as_measure(b).points
    lo = min(x[0], y[0])
    hi = max(x[-1], y[-1])
    if hi == lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    pa = np.histogram(x, edges)[0] / x.size
    pb = np.histogram(y, edges)[0] / y.size
    return histogram_entropy(pa, pb)


def histogram_entropy(pa, pb) -> float:
    """sum pa * log(pa / pb) over bins, with the conventions 0 log 0 = 0."""
    pa = np.asarray(pa, dtype=np.float64)
    pb = np.asarray(pb, dtype=np.float64)
    support = pa > 0
    if np.any(pb[support] == 0):
        return math.inf
    return float(max(0.0, np.sum(pa[support] * np.log(pa[support] / pb[support]))))


@dataclass
class LaplaceCheckReport:
    """Empirical Laplace transforms against the Bobkov-Gotze bound.

    Arrays have shape ``(len(tests), len(t_grid))``. ``lhs`` is NaN where the
    exponent would overflow; those entries are flagged ``unevaluable`` and
    count as neither passing nor failing.
    """

    t_grid: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    slack: np.ndarray
    passed: np.ndarray
    unevaluable: np.ndarray
    C: float
    lips: list[float] = field(default_factory=list)

    @property
    def all_pass(self) -> bool:
        return bool(np.all(self.passed | self.unevaluable))

    def as_dict(self) -> dict:
        return {
            "kind": "laplace_t1",
            "C": self.C,
            "lips": list(self.lips),
            "t_grid": self.t_grid.tolist(),
            "lhs": self.lhs.tolist(),
            "rhs": self.rhs.tolist(),
            "slack": self.slack.tolist(),
            "pass": self.passed.tolist(),
            "unevaluable": self.unevaluable.tolist(),
        }


def default_t_grid(samples, lip: float, points: int = 21) -> np.ndarray:
    sd = float(np.std(_as_measure(samples).points, ddof=1)) if len(_as_measure(samples)) > 1 else 0.0
    if sd == 0:
        sd = 1.0
    edge = 3.0 / (lip * sd)
    return np.linspace(-edge, edge, points)


def bootstrap_se(values: np.ndarray, stat: Callable[[np.ndarray], np.ndarray],
                 resamples: int = 200, seed: int = 0) -> np.ndarray:
    """Bootstrap standard error of ``stat`` applied along axis 0 of ``values``."""
    rng = np.random.default_rng(seed)
    n = values.shape[0]
    boots = np.array([stat(values[rng.integers(0, n, n)]) for _ in range(resamples)])
    return boots.std(axis=0, ddof=1)


def empirical_mgf(centered: np.ndarray, t_grid: np.ndarray):
    """Mean of exp(t * x) for each t, with an overflow mask."""
    t_grid = np.asarray(t_grid, dtype=np.float64)
    span = np.max(np.abs(centered)) if centered.size else 0.0
    bad = np.abs(t_grid) * span > EXP_GUARD
    tt = np.where(bad, 0.0, t_grid)
    vals = np.exp(np.outer(centered, tt))
    lhs = vals.mean(axis=0)
    lhs[bad] = np.nan
    return lhs, vals, bad


def t1_laplace_check(samples, C: float, tests: Sequence[tuple[Callable, float]],
                     t_grid=None, slack=None, seed: int = 0) -> LaplaceCheckReport:
    """Compare E exp(t (F - mean F)) with exp(C t^2 lip(F)^2 / 2) for each test function.

    With ``slack=None`` each entry gets a relative allowance of three
    bootstrap standard errors of its empirical mean.
    """
    pts = _as_measure(samples).points
    if t_grid is None:
        t_grid = default_t_grid(pts, tests[0][1] if tests else 1.0)
    t_grid = np.asarray(t_grid, dtype=np.float64)
    shape = (len(tests), t_grid.size)
    lhs = np.empty(shape)
    rhs = np.empty(shape)
    sl = np.empty(shape)
    bad = np.zeros(shape, dtype=bool)
    for i, (F, lip) in enumerate(tests):
        vals = np.asarray(F(pts), dtype=np.float64)
        centered = vals - vals.mean()
        l, terms, overflow = empirical_mgf(centered, t_grid)
        lhs[i] = l
        bad[i] = overflow
        rhs[i] = np.exp(np.minimum(C * t_grid**2 * lip**2 / 2.0, EXP_GUARD))
        if slack is None:
            se = bootstrap_se(terms, lambda v: v.mean(axis=0), seed=seed)
            sl[i] = 3.0 * se / rhs[i]
        else:
            sl[i] = slack
    with np.errstate(invalid="ignore"):
        passed = (lhs <= rhs * (1.0 + sl)) & ~bad
    return LaplaceCheckReport(t_grid, lhs, rhs, sl, passed, bad, float(C),
                              [float(lip) for _, lip in tests])


def gaussian_moment(samples, delta: float, x0: float = 0.0) -> float:
    """Empirical mean of exp(delta (x - x0)^2); ``math.inf`` flags overflow."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    pts = _as_measure(samples).points
    expo = delta * (pts - x0) ** 2
    if expo.max() > EXP_GUARD:
        return math.inf
    return float(np.mean(np.exp(expo)))

"""Nadaraya-Watson estimation of the autoregression functions along the tree.

Sums run over parents ``k`` in T_{n-1} of a depth-``n`` sample so that both
children exist; ``count`` below is that effective number of parents. The
bandwidth is ``h = |T_n|**(-alpha)`` with ``n`` the sample depth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import _core
from .bounds import SQRT2, tau_n
from .kernel import NBARModel, nbar_kernel
from .simulate import TreeSample, map_replicates
from .tree import subtree_size

_SHAPES = {
    # code, support half-width, Lipschitz constant, sup norm
    "epanechnikov": (_core.EPANECHNIKOV, 1.0, 1.5, 0.75),
    "triangular": (_core.TRIANGULAR, 1.0, 1.0, 1.0),
    "quartic": (_core.QUARTIC, 1.0, 15.0 / 8.0 * 4.0 / (3.0 * math.sqrt(3.0)), 0.9375),
}


@dataclass(frozen=True)
class Kernel1D:
    """Compactly supported smoothing kernel on [-R, R]."""

    shape: str = "epanechnikov"

    def __post_init__(self):
        if self.shape not in _SHAPES:
            raise ValueError(f"unknown kernel shape {self.shape!r}; choose from {sorted(_SHAPES)}")

    @property
    def code(self) -> int:
        return _SHAPES[self.shape][0]

    @property
    def R(self) -> float:
        return _SHAPES[self.shape][1]

    @property
    def lipK(self) -> float:
        return _SHAPES[self.shape][2]

    @property
    def supK(self) -> float:
        return _SHAPES[self.shape][3]

    def __call__(self, u):
        return _core.kernel_values(np.asarray(u, dtype=np.float64), self.code)

    def integral(self) -> float:
        val, _ = integrate.quad(lambda u: float(self(np.array([u]))[0]), -self.R, self.R,
                                epsabs=1e-13, epsrel=1e-13)
        return val


def bandwidth(depth: int, alpha: float) -> float:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return subtree_size(depth) ** (-alpha)


def _design(s: TreeSample):
    if s.depth < 1:
        raise ValueError("need a sample of depth >= 1 so that parents have children")
    stop = 1 << s.depth
    v = s.values
    return v[1:stop], v[2:2 * stop:2], v[3:2 * stop:2]


@dataclass
class NWFit:
    """Estimates on a grid; ``f0hat``/``f1hat`` are NaN where ``defined`` is False.

    ``Ntilde`` and ``Mtilde`` are the bias and noise parts of
    ``f_target_hat - f_target`` and are only filled when the true model is
    supplied.
    """

    alpha: float
    h: float
    depth: int
    count: int
    kernel: str
    grid: np.ndarray
    f0hat: np.ndarray
    f1hat: np.ndarray
    Dtilde: np.ndarray
    defined: np.ndarray
    target: str = "f0"
    Ntilde: np.ndarray | None = None
    Mtilde: np.ndarray | None = None
    seed: tuple[int, int] | None = None

    def sidecar(self) -> dict:
        return {"kind": "nw_fit", "alpha": self.alpha, "h": self.h, "n": self.depth,
                "count": self.count, "kernel": self.kernel, "target": self.target,
                "seed": list(self.seed) if self.seed is not None else None}


def nw_fit(s: TreeSample, k: Kernel1D, alpha: float, grid, target: str = "f0",
           model: NBARModel | None = None) -> NWFit:
    if target not in ("f0", "f1"):
        raise ValueError("target must be 'f0' or 'f1'")
    h = bandwidth(s.depth, alpha)
    X, Y0, Y1 = _design(s)
    grid = np.asarray(grid, dtype=np.float64).ravel()
    D, S0, S1 = _core.nw_sums(X, Y0, Y1, grid, h, k.code)
    defined = D > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        f0hat = np.where(defined, S0 / np.where(defined, D, 1.0), np.nan)
        f1hat = np.where(defined, S1 / np.where(defined, D, 1.0), np.nan)
    norm = X.size * h
    fit = NWFit(alpha, h, s.depth, int(X.size), k.shape, grid, f0hat, f1hat, D / norm,
                defined, target, seed=s.seed)
    if model is not None:
        f = model.f0 if target == "f0" else model.f1
        resp = Y0 if target == "f0" else Y1
        fx = f(X)
        eps = resp - fx
        N = np.empty(grid.size)
        M = np.empty(grid.size)
        for j, x in enumerate(grid):
            w = k((X - x) / h)
            N[j] = w @ (fx - f(np.array([x]))[0])
            M[j] = w @ eps
        fit.Ntilde = N / norm
        fit.Mtilde = M / norm
    return fit


@dataclass
class TransitionFit:
    """Joint-density and T-transition estimates at points (x, y, z).

    ``fhat`` uses the single-bandwidth normalization ``1/(count*h)``;
    ``fhat_h3`` uses ``1/(count*h^3)``. ``Phat`` and ``Phat_h3`` divide each
    by the same ``Dtilde``.
    """

    points: np.ndarray
    h: float
    count: int
    fhat: np.ndarray
    fhat_h3: np.ndarray
    Dtilde: np.ndarray
    Phat: np.ndarray
    Phat_h3: np.ndarray
    defined: np.ndarray
    normalization: str = "fhat: 1/(count h); fhat_h3: 1/(count h^3); Dtilde: 1/(count h)"


def transition_density_fit(s: TreeSample, k: Kernel1D, alpha: float, points) -> TransitionFit:
    h = bandwidth(s.depth, alpha)
    X, Y, Z = _design(s)
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.shape[1] != 3:
        raise ValueError("points must have shape (m, 3)")
    sums = np.empty(len(pts))
    dsum = np.empty(len(pts))
    for j, (x, y, z) in enumerate(pts):
        kx = k((x - X) / h)
        dsum[j] = kx.sum()
        active = kx > 0
        sums[j] = np.sum(kx[active] * k((y - Y[active]) / h) * k((z - Z[active]) / h))
    norm = X.size * h
    D = dsum / norm
    fhat = sums / norm
    fhat_h3 = sums / (X.size * h**3)
    defined = D > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        Phat = np.where(defined, fhat / np.where(defined, D, 1.0), np.nan)
        Phat_h3 = np.where(defined, fhat_h3 / np.where(defined, D, 1.0), np.nan)
    return TransitionFit(pts, h, int(X.size), fhat, fhat_h3, D, Phat, Phat_h3, defined)


@dataclass
class DevKerBound:
    """Deviation bound for |f0_hat(x) - f0(x)| > level with its assembled constants.

    ``value = 2 exp(-C s^2 |T_n| h^2) + 2 exp(-C' s^2 |T_n| h^2 / (1 + C'' level^2 / h^2))``
    with ``s = level E(D~) - E(N~)``.
    """

    value: float
    noise_term: float
    drift_term: float
    C: float
    C_prime: float
    C_second: float
    lip_drift: float
    tau_unit: float
    h: float
    tree_size: int
    tag: str = "constants assembled from proof"
    parts: dict = field(default_factory=dict)


class PreconditionError(ValueError):
    pass


def dev_ker_bound(model: NBARModel, k: Kernel1D, alpha: float, n: int, level: float,
                  E_D: float, E_N: float, target: str = "f0") -> DevKerBound:
    """Evaluate the two-term deviation bound for the Nadaraya-Watson estimator at one point.

    The noise term bounds P(M~ > s/2) by conditioning on the parents; the drift
    term bounds P(N~ - level D~ - E(...) > s/2) through the subtree
    concentration constant applied to y -> K((y-x)/h) (f(y) - f(x) - level).
    """
    meta = model.meta
    f = model.f0 if target == "f0" else model.f1
    errors = []
    if not meta.q < SQRT2:
        errors.append(f"q = {meta.q} must be < sqrt(2)")
    if not alpha < 0.25:
        errors.append(f"alpha = {alpha} must be < 1/4")
    if not E_D > 0:
        errors.append("E(D~) must be positive")
    elif not level > E_N / E_D:
        errors.append(f"level {level} must exceed E(N~)/E(D~) = {E_N / E_D}")
    if errors:
        raise PreconditionError("; ".join(errors))
    h = bandwidth(n, alpha)
    T = subtree_size(n)
    s = level * E_D - E_N
    lipN = k.R * k.lipK * f.lip + f.lip * k.supK
    tau_unit = tau_n(meta.C, meta.r0 + meta.r1, 1.0, n)
    # noise: M~ is sub-Gaussian with variance proxy C_eps supK^2 / (T h^2)
    C_eps = meta.C_eps if meta.C_eps is not None else meta.C
    C_noise = math.inf if C_eps == 0 else 1.0 / (8.0 * C_eps * k.supK**2)
    # drift: lip(G)^2 <= 2 lipN^2 (1 + (lipK/lipN)^2 level^2 / h^2)
    if lipN > 0:
        C_prime = 1.0 / (16.0 * tau_unit * T * lipN**2) if tau_unit > 0 else math.inf
        C_second = (k.lipK / lipN) ** 2
        drift_expo = C_prime * s * s * T * h * h / (1.0 + C_second * level**2 / h**2)
    else:
        # f constant: the drift part is -level * D~ alone, lip = level lipK / h
        C_second = math.inf
        C_prime = 1.0 / (8.0 * tau_unit * T * k.lipK**2) if tau_unit > 0 else math.inf
        drift_expo = C_prime * s * s * T * h**4 / level**2
    noise_term = 2.0 * math.exp(-C_noise * s * s * T * h * h) if math.isfinite(C_noise) else 0.0
    drift_term = 2.0 * math.exp(-drift_expo) if math.isfinite(drift_expo) else 0.0
    return DevKerBound(noise_term + drift_term, noise_term, drift_term, C_noise, C_prime,
                       C_second, lipN, tau_unit, h, T,
                       parts={"s": s, "E_D": E_D, "E_N": E_N, "level": level})


@dataclass
class DenominatorEstimate:
    mean: float
    se: float
    ci_lo: float
    ci_hi: float
    replicates: int
    values: np.ndarray = field(repr=False, default=None)


def expected_denominator(model: NBARModel, k: Kernel1D, alpha: float, n: int, x: float,
                         replicates: int = 200, master: int = 0,
                         threads: int | None = None) -> DenominatorEstimate:
    """Monte-Carlo mean of D~ at ``x`` with a 99% normal-theory interval."""
    kern = nbar_kernel(model)
    h = bandwidth(n, alpha)

    def dtilde(s: TreeSample) -> float:
        X, _, _ = _design(s)
        return float(k((X - x) / h).sum() / (X.size * h))

    vals = np.array(map_replicates(kern, n, master, replicates, dtilde, threads))
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
    z = 2.5758293035489004
    return DenominatorEstimate(mean, se, mean - z * se, mean + z * se, vals.size, vals)


def expected_numerator(model: NBARModel, k: Kernel1D, alpha: float, n: int, x: float,
                       replicates: int = 200, master: int = 0, threads: int | None = None,
                       target: str = "f0") -> float:
    """Monte-Carlo mean of N~ at ``x``."""
    kern = nbar_kernel(model)
    h = bandwidth(n, alpha)
    f = model.f0 if target == "f0" else model.f1
    fx = float(f(np.array([x]))[0])

    def ntilde(s: TreeSample) -> float:
        X, _, _ = _design(s)
        return float(k((X - x) / h) @ (f(X) - fx) / (X.size * h))

    return float(np.mean(map_replicates(kern, n, master, replicates, ntilde, threads)))

"""T-transition probabilities and the nonlinear bifurcating autoregressive model.

A kernel maps a parent state ``x`` to the pair ``(X_2k, X_2k+1)``. All
randomness enters as uniforms on (0, 1) produced by the counter-based
generator in :mod:`bifurcate._core`, so a draw is a pure function of
``(master seed, replicate, node label, coordinate)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import ndtr, ndtri

from . import _core
from .metrics import wasserstein_p

NOISE_FAMILIES = ("gaussian", "truncated_gaussian", "uniform")
INITIAL_FAMILIES = ("dirac", "gaussian", "uniform", "empirical")
DRIFT_FAMILIES = ("linear", "tanh", "custom")


@dataclass(frozen=True)
class Noise:
    """Centered noise law with a known T1 constant.

    ``scale`` is the standard deviation for the Gaussian families and the
    half-width for ``uniform``. ``trunc`` is the truncation point of
    ``truncated_gaussian`` in units of ``scale``.
    """

    family: str = "gaussian"
    scale: float = 1.0
    trunc: float = 2.0

    def __post_init__(self):
        if self.family not in NOISE_FAMILIES:
            raise ValueError(
                f"noise family {self.family!r} has no declared T1 constant; "
                f"choose one of {NOISE_FAMILIES}"
            )
        if not (self.scale >= 0 and math.isfinite(self.scale)):
            raise ValueError(f"noise scale must be finite and >= 0, got {self.scale}")
        if self.family == "truncated_gaussian" and not self.trunc > 0:
            raise ValueError("truncation point must be positive")

    @property
    def code(self) -> int:
        return {"gaussian": _core.GAUSSIAN, "uniform": _core.UNIFORM,
                "truncated_gaussian": _core.TRUNCATED}[self.family]

    @property
    def t1_constant(self) -> float:
        # the truncated Gaussian is a log-concave restriction of N(0, s^2)
        return self.scale**2

    @property
    def variance(self) -> float:
        s2 = self.scale**2
        if self.family == "gaussian":
            return s2
        if self.family == "uniform":
            return s2 / 3.0
        a = self.trunc
        z = 1.0 - 2.0 * ndtr(-a)
        return s2 * (1.0 - 2.0 * a * math.exp(-a * a / 2) / math.sqrt(2 * math.pi) / z)

    def from_uniform(self, u):
        return _core.noise_from_uniform(np.asarray(u, dtype=np.float64), self.code,
                                        float(self.scale), float(self.trunc))


@dataclass(frozen=True)
class InitialLaw:
    """Law of the root value.

    ``dirac`` sits at ``loc``; ``gaussian`` has mean ``loc`` and standard
    deviation ``scale``; ``uniform`` is centered at ``loc`` with half-width
    ``scale``; ``empirical`` draws uniformly from ``points``.
    """

    family: str = "dirac"
    loc: float = 0.0
    scale: float = 0.0
    points: tuple[float, ...] = ()

    def __post_init__(self):
        if self.family not in INITIAL_FAMILIES:
            raise ValueError(f"unknown initial law {self.family!r}")
        if self.family == "empirical" and not self.points:
            raise ValueError("empirical initial law needs at least one point")
        if self.scale < 0:
            raise ValueError("initial scale must be >= 0")

    @classmethod
    def dirac(cls, x0: float = 0.0) -> "InitialLaw":
        return cls("dirac", float(x0))

    @classmethod
    def empirical(cls, points) -> "InitialLaw":
        return cls("empirical", points=tuple(float(p) for p in np.ravel(points)))

    @property
    def t1_constant(self) -> float:
        if self.family == "dirac":
            return 0.0
        if self.family in ("gaussian", "uniform"):
            return self.scale**2
        pts = np.asarray(self.points)
        return float((pts.max() - pts.min()) / 2.0) ** 2

    @property
    def mean(self) -> float:
        if self.family == "empirical":
            return float(np.mean(self.points))
        return self.loc

    def from_uniform(self, u):
        u = np.asarray(u, dtype=np.float64)
        if self.family == "dirac":
            return np.full(u.shape, self.loc)
        if self.family == "gaussian":
            return self.loc + self.scale * ndtri(u)
        if self.family == "uniform":
            return self.loc + self.scale * (2.0 * u - 1.0)
        pts = np.asarray(self.points)
        return pts[np.minimum((u * pts.size).astype(np.int64), pts.size - 1)]


@dataclass(frozen=True)
class Drift:
    """Autoregression function with a declared Lipschitz constant.

    ``linear`` is ``a*x + b``, ``tanh`` is ``a*tanh(x) + b``. ``custom`` wraps
    any vectorized callable; its Lipschitz constant is whatever the caller
    declares.
    """

    family: str = "linear"
    a: float = 0.0
    b: float = 0.0
    func: Callable | None = field(default=None, compare=False)
    lip_declared: float | None = None

    def __post_init__(self):
        if self.family not in DRIFT_FAMILIES:
            raise ValueError(f"unknown drift family {self.family!r}")
        if self.family == "custom" and (self.func is None or self.lip_declared is None):
            raise ValueError("custom drift needs func and lip_declared")

    @classmethod
    def linear(cls, a: float, b: float = 0.0) -> "Drift":
        return cls("linear", float(a), float(b))

    @classmethod
    def tanh(cls, a: float, b: float = 0.0) -> "Drift":
        return cls("tanh", float(a), float(b))

    @classmethod
    def custom(cls, func: Callable, lip: float) -> "Drift":
        return cls("custom", func=func, lip_declared=float(lip))

    @property
    def lip(self) -> float:
        if self.family == "custom":
            return self.lip_declared
        return abs(self.a)

    @property
    def is_affine(self) -> bool:
        return self.family == "linear"

    @property
    def code(self) -> int | None:
        return {"linear": _core.LINEAR, "tanh": _core.TANH}.get(self.family)

    def __call__(self, x):
        if self.family == "linear":
            return self.a * np.asarray(x, dtype=np.float64) + self.b
        if self.family == "tanh":
            return self.a * np.tanh(np.asarray(x, dtype=np.float64)) + self.b
        return np.asarray(self.func(np.asarray(x, dtype=np.float64)), dtype=np.float64)

    def lip_on_grid(self, lo: float, hi: float, points: int = 2001) -> float:
        """Largest slope between neighbouring grid points (diagnostic only)."""
        xs = np.linspace(lo, hi, points)
        ys = self(xs)
        return float(np.max(np.abs(np.diff(ys) / np.diff(xs))))


@dataclass(frozen=True)
class RegularityMeta:
    r0: float
    r1: float
    q: float
    C: float
    C_eps: float | None = None

    def __post_init__(self):
        vals = [self.r0, self.r1, self.q, self.C]
        if not all(math.isfinite(v) and v >= 0 for v in vals):
            raise ValueError(f"regularity constants must be finite and >= 0: {self}")
        if self.r0 > self.q + 1e-12 or self.r1 > self.q + 1e-12:
            raise ValueError(f"marginal constants must not exceed q: {self}")

    @property
    def r(self) -> float:
        return self.r0 + self.r1


class BifurcatingKernel:
    """A T-transition probability together with its regularity constants.

    ``sample(x, u0, u1)`` returns the children of parents ``x`` given one
    uniform per child; ``marginal(b, x, u)`` draws only child type ``b``.
    Both accept arrays.
    """

    def __init__(self, sample, marginal0, marginal1, meta: RegularityMeta, name: str,
                 initial: InitialLaw | None = None):
        self._sample = sample
        self._marginals = (marginal0, marginal1)
        self.meta = meta
        self.name = name
        self.initial = initial if initial is not None else InitialLaw.dirac(0.0)

    def sample(self, x, u0, u1):
        return self._sample(np.asarray(x, dtype=np.float64), u0, u1)

    def marginal(self, b: int, x, u):
        return self._marginals[b](np.asarray(x, dtype=np.float64), u)

    def fast_params(self):
        """Arguments for the compiled tree fill, or ``None`` if not supported."""
        return None

    def __repr__(self):
        return f"BifurcatingKernel({self.name!r}, {self.meta})"


@dataclass(frozen=True)
class NBARModel:
    """X_2k = f0(X_k) + e_2k,  X_2k+1 = f1(X_k) + e_2k+1, with i.i.d. noise."""

    f0: Drift
    f1: Drift
    noise: Noise = Noise()
    initial: InitialLaw = InitialLaw()

    @property
    def meta(self) -> RegularityMeta:
        r0, r1 = self.f0.lip, self.f1.lip
        C = max(self.noise.t1_constant, self.initial.t1_constant)
        return RegularityMeta(r0, r1, r0 + r1, C, self.noise.t1_constant)

    @property
    def is_affine(self) -> bool:
        return self.f0.is_affine and self.f1.is_affine

    @property
    def is_deterministic(self) -> bool:
        return self.noise.scale == 0 and (
            self.initial.family == "dirac"
            or (self.initial.family in ("gaussian", "uniform") and self.initial.scale == 0)
        )

    def with_initial(self, initial: InitialLaw) -> "NBARModel":
        return NBARModel(self.f0, self.f1, self.noise, initial)


class NBARKernel(BifurcatingKernel):
    def __init__(self, model: NBARModel, name: str = "nbar"):
        self.model = model
        f = (model.f0, model.f1)
        noise = model.noise

        def marginal(b):
            return lambda x, u: f[b](x) + noise.from_uniform(u)

        m0, m1 = marginal(0), marginal(1)
        super().__init__(lambda x, u0, u1: (m0(x, u0), m1(x, u1)), m0, m1,
                         model.meta, name, model.initial)

    def fast_params(self):
        m = self.model
        if m.f0.code is None or m.f1.code is None:
            return None
        return (m.f0.code, m.f0.a, m.f0.b, m.f1.code, m.f1.a, m.f1.b,
                m.noise.code, float(m.noise.scale), float(m.noise.trunc))


def nbar_kernel(model: NBARModel) -> NBARKernel:
    meta = model.meta
    if meta.q > meta.r0 + meta.r1 + 1e-12:
        raise ValueError("product kernel must satisfy q <= r0 + r1")
    return NBARKernel(model)


class LineageSampler:
    """Random-lineage chain Q = (P0 + P1)/2: a fair coin picks the child type."""

    def __init__(self, kernel: BifurcatingKernel):
        self.kernel = kernel

    def step(self, x, u_coin, u_noise):
        x = np.asarray(x, dtype=np.float64)
        left = np.asarray(u_coin) < 0.5
        return np.where(left, self.kernel.marginal(0, x, u_noise), self.kernel.marginal(1, x, u_noise))

    def run(self, key: int, x0, steps: int, keep_from: int = 0) -> np.ndarray:
        """States of ``len(x0)`` independent chains at times ``keep_from..steps``.

        Chain ``c`` uses its own stream, so running the same key from two
        different starting points couples the chains through shared coins and
        shared noise.
        """
        if not 0 <= keep_from <= steps:
            raise ValueError("need 0 <= keep_from <= steps")
        x0 = np.ascontiguousarray(np.atleast_1d(x0), dtype=np.float64)
        fast = self.kernel.fast_params()
        if fast is not None:
            return _core.q_chains(key, x0, steps, keep_from, *fast)
        keys = _core._pure.hash2(key, np.arange(x0.size, dtype=np.uint64))
        out = np.empty((steps - keep_from + 1, x0.size))
        x = x0.copy()
        if keep_from == 0:
            out[0] = x
        for t in range(1, steps + 1):
            base = np.uint64(t) << np.uint64(2)
            coin = _core._pure.counter_uniforms_keys(keys, base | np.uint64(_core.COORD_COIN))
            u = _core._pure.counter_uniforms_keys(keys, base | np.uint64(_core.COORD_NOISE))
            x = self.step(x, coin, u)
            if t >= keep_from:
                out[t - keep_from] = x
        return out


def lineage_kernel(k: BifurcatingKernel) -> LineageSampler:
    return LineageSampler(k)


@dataclass(frozen=True)
class ContractionEstimate:
    ratio: float
    coupling_ratio: float
    halfwidth: float
    draws: int


def empirical_contraction(k: BifurcatingKernel, x: float, xt: float, branch, draws: int,
                          seed: int = 0) -> ContractionEstimate:
    """Estimate ``W1(P_b(x,.), P_b(xt,.)) / |x - xt|`` from ``draws`` samples.

    Both samples reuse the same uniforms, so ``coupling_ratio`` (the mean
    cost of the shared-noise coupling) is an upper bound for the true ratio
    up to Monte-Carlo error. ``halfwidth`` is one standard error of that
    mean. For ``branch="joint"`` the cost on pairs is the l1 sum and
    ``ratio`` is the sum of the two marginal distances, a lower bound for the
    joint distance.
    """
    if x == xt:
        raise ValueError("x and xt must differ")
    if draws < 2:
        raise ValueError("need at least two draws")
    key = _core.stream_key(seed, 0)
    c = np.arange(draws, dtype=np.uint64) << np.uint64(2)
    u0 = _core.counter_uniforms(key, c | np.uint64(0))
    u1 = _core.counter_uniforms(key, c | np.uint64(1))
    xs = np.full(draws, float(x))
    xts = np.full(draws, float(xt))
    dist = abs(x - xt)
    if branch in (0, 1):
        a = k.marginal(branch, xs, u0)
        b = k.marginal(branch, xts, u0)
        ratio = wasserstein_p(a, b, 1) / dist
        cost = np.abs(a - b) / dist
    elif branch == "joint":
        ya, za = k.sample(xs, u0, u1)
        yb, zb = k.sample(xts, u0, u1)
        ratio = (wasserstein_p(ya, yb, 1) + wasserstein_p(za, zb, 1)) / dist
        cost = (np.abs(ya - yb) + np.abs(za - zb)) / dist
    else:
        raise ValueError(f"branch must be 0, 1 or 'joint', got {branch!r}")
    return ContractionEstimate(float(ratio), float(cost.mean()),
                               float(cost.std(ddof=1) / math.sqrt(draws)), draws)

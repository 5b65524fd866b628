"""Replicated Monte-Carlo checks of the Gaussian concentration bounds."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import _core
from .bounds import (FLAG_TAU_PRIME_R_IS_C, bias_to_invariant, deviation_bound, gamma_n,
                     gamma_prime_n, tau_n, tau_prime_n)
from .kernel import NBARModel, lineage_kernel, nbar_kernel
from .metrics import bootstrap_se, empirical_mgf, wasserstein_p
from .simulate import Functional, empirical_mean, expected_mean_affine, map_replicates
from .tree import IndexSet, check_depth

DEFAULT_T_MULTIPLIERS = (0.1, 0.25, 0.5, 1.0, 2.0, 3.0)
CONFIDENCE = 0.99

# replicate ids reserved for auxiliary streams; tree replicates stay far below
STREAM_QCHAIN = 1 << 48
STREAM_INITIAL = (1 << 48) + 1
STREAM_CONTRACTION = (1 << 48) + 2

CHECKS = ("tail", "laplace", "bias", "contraction")


@dataclass
class ExperimentSpec:
    """One tail/Laplace experiment.

    ``index`` is ``"generation"`` (G_n) or ``"tree"`` (T_n). Triple
    functionals are evaluated on parents in the index set, so their trees
    are simulated one generation deeper. ``t_grid`` holds absolute values of
    t; ``None`` means the default multiples of the replicate std.
    """

    model: NBARModel
    depth: int
    replicates: int
    functional: Functional = field(default_factory=Functional.identity)
    index: str = "tree"
    t_grid: tuple[float, ...] | None = None
    master_seed: int = 0
    checks: tuple[str, ...] = ("tail", "laplace")
    threads: int | None = None
    kappa_override: float | None = None
    laplace_points: int = 21

    def __post_init__(self):
        check_depth(self.depth)
        if self.replicates < 2:
            raise ValueError("need at least two replicates")
        if self.index not in ("generation", "tree"):
            raise ValueError(f"index must be 'generation' or 'tree', got {self.index!r}")
        if self.t_grid is not None:
            t = np.asarray(self.t_grid, dtype=np.float64)
            if t.size == 0 or np.any(t <= 0) or np.any(np.diff(t) <= 0):
                raise ValueError("t_grid must be positive and strictly increasing")
        bad = set(self.checks) - set(CHECKS)
        if bad:
            raise ValueError(f"unknown checks {sorted(bad)}")

    @property
    def index_set(self) -> IndexSet:
        if self.index == "generation":
            return IndexSet.generation(self.depth)
        return IndexSet.subtree(self.depth)

    @property
    def sim_depth(self) -> int:
        return self.depth + 1 if self.functional.arity == "triple" else self.depth

    def describe(self) -> dict:
        return {"depth": self.depth, "sim_depth": self.sim_depth, "replicates": self.replicates,
                "index": self.index_set.describe(), "functional": self.functional.name,
                "arity": self.functional.arity, "lip": self.functional.lip,
                "master_seed": self.master_seed}


def select_kappa(spec: ExperimentSpec) -> tuple[float, str, dict]:
    """GC constant matching the index set and arity, with its provenance and flags."""
    if spec.kappa_override is not None:
        return float(spec.kappa_override), "override", {}
    meta = spec.model.meta
    r, lip, n = meta.r, spec.functional.lip, spec.depth
    if spec.functional.arity == "node":
        if spec.index == "generation":
            return gamma_n(meta.C, r, lip, n), "gamma_n", {}
        return tau_n(meta.C, r, lip, n), "tau_n", {}
    if spec.index == "generation":
        return gamma_prime_n(meta.C, meta.q, r, lip, n), "gamma_prime_n", {}
    return tau_prime_n(meta.C, meta.q, r, lip, n), "tau_prime_n", {"tau_prime_n": FLAG_TAU_PRIME_R_IS_C}


def replicate_means(spec: ExperimentSpec) -> np.ndarray:
    """M_I(g)/|I| for every replicate, in replicate order."""
    I, g = spec.index_set, spec.functional
    kern = nbar_kernel(spec.model)
    vals = map_replicates(kern, spec.sim_depth, spec.master_seed, spec.replicates,
                          lambda s: empirical_mean(s, I, g), spec.threads)
    return np.asarray(vals, dtype=np.float64)


def exact_centre(spec: ExperimentSpec) -> float | None:
    """E of the empirical mean when it is known in closed form, else ``None``."""
    if spec.functional.name == "innovation":
        return 0.0
    if spec.functional.name == "identity" and spec.model.is_affine:
        return expected_mean_affine(spec.model, spec.index_set)
    return None


def clopper_pearson(k: int, n: int, confidence: float = CONFIDENCE) -> tuple[float, float]:
    ci = stats.binomtest(int(k), int(n)).proportion_ci(confidence_level=confidence, method="exact")
    return float(ci.low), float(ci.high)


def tail_verdict(ci_lo: float, ci_hi: float, bound: float) -> str:
    if ci_hi <= bound:
        return "dominated"
    if ci_lo > bound:
        return "violated"
    return "inconclusive"


# relative tolerance for comparisons that are exact up to floating-point rounding
ROUNDING = 1e-12


def slack_verdict(value: float, slack: float, bound: float) -> str:
    """``value`` +- ``slack`` against ``bound``, ignoring differences at rounding level."""
    tol = ROUNDING * max(abs(value), abs(bound))
    if value + slack <= bound + tol:
        return "dominated"
    if value - slack > bound + tol:
        return "violated"
    return "inconclusive"


@dataclass
class ConcentrationReport:
    """Two-sided empirical tails of the centered empirical mean against 2 exp(-t^2 / (2 kappa))."""

    t: list[float]
    p_hat: list[float]
    ci_lo: list[float]
    ci_hi: list[float]
    bound: list[float]
    verdict: list[str]
    kappa: float
    kappa_source: str
    centering: str
    centre: float
    sigma_hat: float
    replicates: int
    experiment: dict
    confidence: float = CONFIDENCE
    flags: dict = field(default_factory=dict)

    @property
    def any_violated(self) -> bool:
        return "violated" in self.verdict

    @property
    def all_dominated(self) -> bool:
        return all(v == "dominated" for v in self.verdict)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = "tail"
        return d

    def rows(self):
        for i in range(len(self.t)):
            yield {"t": self.t[i], "p_hat": self.p_hat[i], "ci_lo": self.ci_lo[i],
                   "ci_hi": self.ci_hi[i], "bound": self.bound[i], "verdict": self.verdict[i]}


def _sigma(values: np.ndarray) -> float:
    return float(np.std(values, ddof=1)) if values.size > 1 else 0.0


def tail_report(spec: ExperimentSpec, means: np.ndarray, centering: str, centre: float,
                kappa: float, source: str, flags: dict) -> ConcentrationReport:
    sigma = _sigma(means)
    if spec.t_grid is not None:
        grid = np.asarray(spec.t_grid, dtype=np.float64)
    else:
        grid = np.asarray(DEFAULT_T_MULTIPLIERS) * (sigma if sigma > 0 else 1.0)
    dev = np.abs(means - centre)
    R = means.size
    # without randomness every replicate equals its expectation: the tail is exactly 0
    exact_zero = spec.model.is_deterministic and centering == "exact"
    out = {k: [] for k in ("p_hat", "ci_lo", "ci_hi", "bound", "verdict")}
    for t in grid:
        k = int(np.count_nonzero(dev >= t))
        lo, hi = (0.0, 0.0) if exact_zero and k == 0 else clopper_pearson(k, R)
        b = 2.0 * deviation_bound(kappa, float(t))
        out["p_hat"].append(k / R)
        out["ci_lo"].append(lo)
        out["ci_hi"].append(hi)
        out["bound"].append(b)
        out["verdict"].append(tail_verdict(lo, hi, b))
    return ConcentrationReport([float(t) for t in grid], out["p_hat"], out["ci_lo"], out["ci_hi"],
                               out["bound"], out["verdict"], float(kappa), source, centering,
                               float(centre), sigma, R, spec.describe(), CONFIDENCE, dict(flags))


def run_tail_check(spec: ExperimentSpec, means: np.ndarray | None = None) -> list[ConcentrationReport]:
    """Reports centered at the replicate mean and, when it is known, at the exact mean."""
    if means is None:
        means = replicate_means(spec)
    kappa, source, flags = select_kappa(spec)
    reports = [tail_report(spec, means, "replicate_mean", float(np.mean(means)), kappa, source, flags)]
    centre = exact_centre(spec)
    if centre is not None:
        reports.append(tail_report(spec, means, "exact", centre, kappa, source, flags))
    return reports


@dataclass
class LaplaceReport:
    """Empirical E exp(t (M - centre)) across replicates against exp(kappa t^2 / 2)."""

    t: list[float]
    lhs: list[float]
    se: list[float]
    rhs: list[float]
    verdict: list[str]
    kappa: float
    kappa_source: str
    centering: str
    centre: float
    sigma_hat: float
    replicates: int
    experiment: dict
    flags: dict = field(default_factory=dict)

    @property
    def any_violated(self) -> bool:
        return "violated" in self.verdict

    @property
    def all_dominated(self) -> bool:
        return all(v in ("dominated", "unevaluable") for v in self.verdict)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = "laplace"
        return d

    def rows(self):
        for i in range(len(self.t)):
            yield {"t": self.t[i], "lhs": self.lhs[i], "se": self.se[i], "rhs": self.rhs[i],
                   "verdict": self.verdict[i]}


def laplace_report(spec: ExperimentSpec, means: np.ndarray, centering: str, centre: float,
                   kappa: float, source: str, flags: dict) -> LaplaceReport:
    sigma = _sigma(means)
    edge = 3.0 / (sigma if sigma > 0 else 1.0)
    grid = np.linspace(-edge, edge, spec.laplace_points)
    centered = means - centre
    lhs, terms, bad = empirical_mgf(centered, grid)
    se = bootstrap_se(terms, lambda v: v.mean(axis=0), seed=spec.master_seed)
    se[bad] = np.nan
    rhs = np.exp(np.minimum(kappa * grid**2 / 2.0, 700.0))
    verdict = []
    for i in range(grid.size):
        if bad[i]:
            verdict.append("unevaluable")
        else:
            verdict.append(slack_verdict(lhs[i], 3.0 * se[i], rhs[i]))
    return LaplaceReport(grid.tolist(), lhs.tolist(), se.tolist(), rhs.tolist(), verdict,
                         float(kappa), source, centering, float(centre), sigma, means.size,
                         spec.describe(), dict(flags))


def run_laplace_check(spec: ExperimentSpec, means: np.ndarray | None = None) -> list[LaplaceReport]:
    if means is None:
        means = replicate_means(spec)
    kappa, source, flags = select_kappa(spec)
    reports = [laplace_report(spec, means, "replicate_mean", float(np.mean(means)), kappa, source, flags)]
    centre = exact_centre(spec)
    if centre is not None:
        reports.append(laplace_report(spec, means, "exact", centre, kappa, source, flags))
    return reports


def stationary_mean_affine(model: NBARModel) -> float:
    """Fixed point of m -> ((a0 + a1) m + b0 + b1) / 2."""
    if not model.is_affine:
        raise ValueError("closed-form stationary mean needs affine f0 and f1")
    a = (model.f0.a + model.f1.a) / 2.0
    if abs(a) >= 1.0:
        raise ValueError("mean recursion does not contract")
    return ((model.f0.b + model.f1.b) / 2.0) / (1.0 - a)


@dataclass
class BiasReport:
    depth: int
    replicates: int
    mean_hat: float
    mean_se: float
    pi_hat: float
    pi_se: float
    pi_exact: float | None
    w1_nu_pi: float
    bound: float
    bias_hat: float
    allowance: float
    verdict: str
    bias_exact: float | None = None
    allowance_exact: float | None = None
    verdict_exact: str | None = None
    chains: int = 0
    chain_steps: int = 0
    burn_in: int = 0
    master_seed: int = 0

    def as_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = "bias"
        return d


def estimate_invariant(model: NBARModel, chains: int, steps: int, burn_in: int, master: int):
    """Post-burn-in states of ``chains`` parallel lineage chains started from the initial law."""
    kern = nbar_kernel(model)
    u = _core.counter_uniforms(_core.stream_key(master, STREAM_INITIAL),
                               (np.arange(chains, dtype=np.uint64) << np.uint64(2)) | np.uint64(_core.COORD_INIT))
    x0 = model.initial.from_uniform(u)
    states = lineage_kernel(kern).run(_core.stream_key(master, STREAM_QCHAIN), x0, steps, burn_in)
    return x0, states


def run_bias_check(model: NBARModel, n: int, replicates: int, chains: int = 2000,
                   chain_steps: int = 400, burn_in: int = 200, master_seed: int = 0,
                   threads: int | None = None) -> BiasReport:
    """Compare the replicate mean of M_{T_n}(id)/|T_n| with the invariant mean.

    The invariant law is approximated by the post-burn-in states of parallel
    lineage chains; its standard error uses the spread of the per-chain
    averages. W1(nu, pi) is measured between initial draws and final chain
    states.
    """
    meta = model.meta
    if meta.r >= 2.0:
        raise ValueError(f"needs r0 + r1 < 2, got {meta.r}")
    if not 0 <= burn_in < chain_steps:
        raise ValueError("need 0 <= burn_in < chain_steps")
    spec = ExperimentSpec(model, n, replicates, Functional.identity(), "tree",
                          master_seed=master_seed, threads=threads)
    means = replicate_means(spec)
    mean_hat = float(means.mean())
    mean_se = float(means.std(ddof=1) / math.sqrt(means.size))
    x0, states = estimate_invariant(model, chains, chain_steps, burn_in, master_seed)
    per_chain = states.mean(axis=0)
    pi_hat = float(per_chain.mean())
    pi_se = float(per_chain.std(ddof=1) / math.sqrt(per_chain.size)) if chains > 1 else 0.0
    w1 = wasserstein_p(x0, states[-1], 1.0)
    bound = bias_to_invariant(meta.r0, meta.r1, n, w1)
    bias_hat = abs(mean_hat - pi_hat)
    allowance = 3.0 * math.hypot(mean_se, pi_se)
    rep = BiasReport(n, replicates, mean_hat, mean_se, pi_hat, pi_se, None, w1, bound, bias_hat,
                     allowance, "dominated" if bias_hat <= bound + allowance else "violated",
                     chains=chains, chain_steps=chain_steps, burn_in=burn_in, master_seed=master_seed)
    if model.is_affine and abs((model.f0.a + model.f1.a) / 2.0) < 1.0:
        rep.pi_exact = stationary_mean_affine(model)
        rep.bias_exact = abs(mean_hat - rep.pi_exact)
        rep.allowance_exact = 3.0 * mean_se
        rep.verdict_exact = "dominated" if rep.bias_exact <= bound + rep.allowance_exact else "violated"
    return rep


@dataclass
class ContractionReport:
    steps: int
    x: float
    x_tilde: float
    draws: int
    ratio: float
    coupling_ratio: float
    halfwidth: float
    bound: float
    verdict: str
    master_seed: int = 0

    def as_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = "contraction"
        return d


def run_contraction_check(model: NBARModel, m: int, x: float, xt: float, draws: int = 100_000,
                          master_seed: int = 0) -> ContractionReport:
    """W1 between m-step lineage samples from x and from xt, against ((r0 + r1)/2)^m |x - xt|.

    Both chains share coins and noise, so the mean coupling cost bounds the
    empirical W1 from above; ``halfwidth`` is one standard error of that
    mean.
    """
    if draws < 1000:
        raise ValueError("need at least 1000 draws")
    if m < 0:
        raise ValueError("m must be >= 0")
    if x == xt:
        raise ValueError("x and x_tilde must differ")
    sampler = lineage_kernel(nbar_kernel(model))
    key = _core.stream_key(master_seed, STREAM_CONTRACTION)
    a = sampler.run(key, np.full(draws, float(x)), m, m)[0]
    b = sampler.run(key, np.full(draws, float(xt)), m, m)[0]
    dist = abs(x - xt)
    ratio = wasserstein_p(a, b, 1.0) / dist
    cost = np.abs(a - b) / dist
    half = float(cost.std(ddof=1) / math.sqrt(draws))
    bound = (model.meta.r / 2.0) ** m
    return ContractionReport(m, float(x), float(xt), draws, float(ratio), float(cost.mean()), half,
                             bound, slack_verdict(ratio, 3.0 * half, bound), master_seed)

"""Closed-form transportation and Gaussian-concentration constants.

Notation: ``C`` is the T1 constant shared by the initial law and the
transition, ``q`` the Wasserstein-Lipschitz constant of the joint kernel,
``r0, r1`` those of its marginals and ``r = r0 + r1``. ``lip`` is the
Lipschitz norm of the test function (for functions of a triple it is taken
with respect to the l1 metric). ``n`` is a depth, so ``|G_n| = 2**n`` and
``|T_n| = 2**(n+1) - 1``.

The Gaussian-concentration constants returned here already include the
``lip**2`` factor: ``X`` satisfies GC(kappa) when
``E exp(t (X - E X)) <= exp(kappa t^2 / 2)`` for every ``t``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

from .tree import AncestryPath

SQRT2 = math.sqrt(2.0)
BRANCH_TOL = 1e-12
NEAR_POLE = 1e-6

# machine-readable notes attached to outputs that rely on a reading of the source
FLAG_CN_R_IS_Q = "interpretation: q>1 branch of C_N reads its free symbol r as q"
FLAG_TAU_PRIME_R_IS_C = "interpretation: constant R in the tau'_n derivation read as C"


class NotApplicable(ValueError):
    """The requested constant is undefined for these inputs."""


def _tree_size(n: int) -> int:
    if n < 0:
        raise ValueError("depth must be >= 0")
    return (1 << (n + 1)) - 1


def r_branch(r: float) -> str:
    """Which case of the r-dependent displays applies: "1", "sqrt2" or "generic"."""
    if abs(r - 1.0) <= BRANCH_TOL:
        return "1"
    if abs(r - SQRT2) <= BRANCH_TOL:
        return "sqrt2"
    if abs(r - 1.0) < NEAR_POLE or abs(r - SQRT2) < NEAR_POLE:
        warnings.warn(f"r={r!r} is within {NEAR_POLE} of a branch point; using the generic formula",
                      RuntimeWarning, stacklevel=3)
    return "generic"


def q_regime(q: float) -> str:
    if abs(q - 1.0) <= BRANCH_TOL:
        return "q=1"
    return "q<1" if q < 1.0 else "q>1"


def c_N(C: float, p: float, q: float, N: int) -> float:
    """T_p constant of the law of the first ``N`` tree values.

    For ``q > 1`` the result carries :data:`FLAG_CN_R_IS_Q`.
    """
    if q <= 0:
        raise ValueError(f"q must be positive, got {q}")
    if not 1.0 <= p <= 2.0:
        raise ValueError(f"p must lie in [1, 2], got {p}")
    regime = q_regime(q)
    if regime == "q<1":
        return C * N ** (2.0 / p - 1.0) / (1.0 - q) ** 2
    if regime == "q=1":
        return C * math.exp(2.0 - 2.0 / p) * N ** (2.0 / p + 1.0)
    r = q
    log_inner = (q - 1.0) + p * N * math.log(r) - math.log(r**p - 1.0)
    try:
        return C * (N + 1) * math.exp(2.0 / p * log_inner)
    except OverflowError:
        return math.inf


def gamma_n(C: float, r: float, lip: float, n: int) -> float:
    """GC constant of the generation mean over G_n."""
    size = 2.0**n
    base = 2.0 * C * lip**2 / size
    if r_branch(r) == "sqrt2":
        return base * (n + 1)
    x = r * r / 2.0
    return base * _geom(x, n + 1)


def gamma_prime_n(C: float, q: float, r: float, lip: float, n: int) -> float:
    """GC constant of the generation mean of a function of (X_i, X_2i, X_2i+1)."""
    size = 2.0**n
    if r_branch(r) == "sqrt2":
        return 2.0 * C * (1.0 + q) ** 2 * lip**2 * (n + 2) / size
    if r <= 0:
        raise NotApplicable("gamma'_n divides by r^2 and needs r > 0")
    x = r * r / 2.0
    return 2.0 * C * (1.0 + q) ** 2 * lip**2 / (r * r * size) * _geom(x, n + 2)


def tau_n(C: float, r: float, lip: float, n: int) -> float:
    """GC constant of the subtree mean over T_n."""
    T = _tree_size(n)
    branch = r_branch(r)
    if branch == "1":
        return 2.0 * C * lip**2 / T**2 * (T - (n + 1) / 2.0)
    base = 2.0 * C * lip**2 / ((r - 1.0) ** 2 * T)
    if branch == "sqrt2":
        return base * (r * r * (n + 1) + 1.0)
    return base * (1.0 + _geom(r * r / 2.0, n + 1))


def tau_prime_n(C: float, q: float, r: float, lip: float, n: int) -> float:
    """GC constant of the subtree mean of a function of (X_i, X_2i, X_2i+1).

    Carries :data:`FLAG_TAU_PRIME_R_IS_C`.
    """
    T = _tree_size(n)
    lead = 8.0 * C * (1.0 + q) ** 2 * lip**2
    branch = r_branch(r)
    if branch == "1":
        return lead / T**2 * (2.0 * T - (n + 1) / 2.0)
    if branch == "sqrt2":
        return lead / T * (1.0 + (1.0 + r * r * (n + 1)) / (r - 1.0) ** 2)
    return lead / T * (1.0 + (1.0 + r * r * _geom(r * r / 2.0, n + 1)) / (r - 1.0) ** 2)


def _geom(x: float, terms: int) -> float:
    """(1 - x**terms) / (1 - x), i.e. sum_{k<terms} x**k."""
    if x == 1.0:
        return float(terms)
    return (1.0 - x**terms) / (1.0 - x)


def path_t1_constant(C: float, r0: float, r1: float, path: AncestryPath) -> float:
    """T1 constant of the law of X_n given the root, summed along the ancestry path."""
    total = 0.0
    for k, ak in enumerate(path.a):
        total += r0 ** (2 * (k - ak)) * r1 ** (2 * ak)
    return C * total


def limit_t1_constants(C: float, q: float, r0: float, r1: float) -> tuple[float, float]:
    """Depth-free T1 constants for single values and for ancestor-offspring triples."""
    r = max(r0, r1)
    if r >= 1.0:
        raise NotApplicable(f"needs max(r0, r1) < 1, got {r}")
    c_inf = C / (1.0 - r * r)
    return c_inf, C * (1.0 + (1.0 + q) ** 2 / (1.0 - r * r))


def deviation_bound(kappa: float, t: float, lip: float = 1.0) -> float:
    """One-sided tail bound exp(-t^2 / (2 kappa lip^2)) implied by GC(kappa lip^2)."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if kappa <= 0:
        return 1.0 if t == 0 else 0.0
    return math.exp(-t * t / (2.0 * kappa * lip * lip))


def transport_deviation_bound(C_N: float, size: int, p: float, lip: float, t: float) -> float:
    """Tail bound for the mean over an index set of ``size`` nodes from the whole-trajectory T_p."""
    return math.exp(-t * t * size ** (2.0 / p) / (2.0 * C_N * lip * lip))


def bias_to_invariant(r0: float, r1: float, n: int, w1_nu_pi: float, lip: float = 1.0) -> float:
    """Majorant of |E(mean over T_n) - pi(f)|.

    Uses sum_{j=0}^{n} (r0 + r1)^j W1(nu, pi) / |T_n|, scaled by ``lip``.
    """
    r = r0 + r1
    if r >= 2.0:
        raise NotApplicable(f"needs r0 + r1 < 2, got {r}")
    return lip * w1_nu_pi * _geom(r, n + 1) / _tree_size(n)


@dataclass
class BoundSet:
    C: float
    p: float
    q: float
    r0: float
    r1: float
    n: int
    lip: float
    C_N: float | None = None
    gamma_n: float | None = None
    gamma_prime_n: float | None = None
    tau_n: float | None = None
    tau_prime_n: float | None = None
    c_infty: float | None = None
    c_prime_infty: float | None = None
    regimes: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    not_applicable: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return _tree_size(self.n)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["N"] = self.N
        d["kind"] = "bounds"
        return d

    VALUES = ("C_N", "gamma_n", "gamma_prime_n", "tau_n", "tau_prime_n", "c_infty", "c_prime_infty")


def bound_set(C: float, p: float, q: float, r0: float, r1: float, n: int, lip: float = 1.0) -> BoundSet:
    """Evaluate every constant; failures are recorded, not raised."""
    bs = BoundSet(C, p, q, r0, r1, n, lip)
    r = r0 + r1
    bs.regimes = {"q": q_regime(q), "r_vs_1_sqrt2": r_branch(r),
                  "max_r0_r1": "lt1" if max(r0, r1) < 1 else "ge1"}

    def attempt(name, fn):
        try:
            setattr(bs, name, fn())
        except (NotApplicable, ValueError, ZeroDivisionError, OverflowError) as exc:
            bs.not_applicable[name] = str(exc)

    attempt("C_N", lambda: c_N(C, p, q, bs.N))
    if bs.C_N is not None and q_regime(q) == "q>1":
        bs.flags["C_N"] = FLAG_CN_R_IS_Q
    if p != 1.0:
        for name in ("gamma_n", "gamma_prime_n", "tau_n", "tau_prime_n"):
            bs.not_applicable[name] = "Gaussian-concentration constants are stated for p = 1"
    else:
        attempt("gamma_n", lambda: gamma_n(C, r, lip, n))
        attempt("gamma_prime_n", lambda: gamma_prime_n(C, q, r, lip, n))
        attempt("tau_n", lambda: tau_n(C, r, lip, n))
        attempt("tau_prime_n", lambda: tau_prime_n(C, q, r, lip, n))
        if bs.tau_prime_n is not None:
            bs.flags["tau_prime_n"] = FLAG_TAU_PRIME_R_IS_C

    def limits():
        bs.c_infty, bs.c_prime_infty = limit_t1_constants(C, q, r0, r1)

    try:
        limits()
    except NotApplicable as exc:
        bs.not_applicable["c_infty"] = bs.not_applicable["c_prime_infty"] = str(exc)
    return bs

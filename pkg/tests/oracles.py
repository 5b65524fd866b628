"""Slow, obviously-correct reference computations used by the tests.

Nothing here calls into the package's numerical code paths except the
counter-based uniforms, which are the definition of the random stream.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
from scipy.stats import norm


def generation_by_halving(n: int) -> int:
    r = 0
    while n > 1:
        n //= 2
        r += 1
    return r


def path_by_halving(n: int):
    """(bits, a) for the root-to-n path, built by walking up from n."""
    bits = []
    while n > 1:
        bits.append(n % 2)
        n //= 2
    bits.reverse()
    rn = len(bits)
    a = [sum(bits[rn - k:]) if k else 0 for k in range(rn)]
    return bits, a


def brute_wasserstein(x, y, p=1.0):
    """Minimum over all bijections of the mean p-cost, to the power 1/p."""
    x = list(x)
    y = list(y)
    best = math.inf
    for perm in itertools.permutations(range(len(y))):
        c = sum(abs(x[i] - y[j]) ** p for i, j in enumerate(perm)) / len(x)
        best = min(best, c)
    return best ** (1.0 / p)


def naive_tree(depth, x1, f0, f1, noise_ppf, uniforms_for):
    """Node-by-node fill: X_2k = f0(X_k) + e, X_2k+1 = f1(X_k) + e'."""
    v = [math.nan] * (1 << (depth + 1))
    v[1] = x1
    for k in range(1, 1 << depth):
        u0, u1 = uniforms_for(2 * k), uniforms_for(2 * k + 1)
        v[2 * k] = f0(v[k]) + noise_ppf(u0)
        v[2 * k + 1] = f1(v[k]) + noise_ppf(u1)
    return np.array(v)


def affine_mean_by_nodes(a0, b0, a1, b1, x0, nodes):
    """Exact E[X_k] by recursion on the parent, averaged over ``nodes``; Fractions throughout."""
    a0, b0, a1, b1, x0 = map(Fraction, (a0, b0, a1, b1, x0))
    cache = {1: x0}

    def mean(k):
        if k not in cache:
            p = mean(k // 2)
            cache[k] = a0 * p + b0 if k % 2 == 0 else a1 * p + b1
        return cache[k]

    return sum(mean(k) for k in nodes) / len(nodes)


def nw_naive(X, Y, x, h, K):
    num = 0.0
    den = 0.0
    for xi, yi in zip(X, Y):
        w = K((xi - x) / h)
        num += w * yi
        den += w
    return num / den if den > 0 else math.nan


def epanechnikov(u):
    return 0.75 * (1 - u * u) if abs(u) <= 1 else 0.0


def gaussian_two_sided_tail(t, sd):
    return 2.0 * norm.sf(t / sd)


def gamma_sum(C, r, lip, n):
    """2 C lip^2 / 2^n * sum_{k=0}^{n} (r^2/2)^k, summed term by term."""
    return 2 * C * lip**2 / 2**n * sum((r * r / 2) ** k for k in range(n + 1))


def path_constant_sum(C, r0, r1, n):
    bits, a = path_by_halving(n)
    return C * sum(r0 ** (2 * (k - a[k])) * r1 ** (2 * a[k]) for k in range(len(bits)))

"""Pure numpy implementation of the hot kernels.

Every function here has a twin in ``_fast.pyx`` with the same signature.
Random draws go through the same splitmix64 hash and the same cephes
``ndtri``, so tree values for the built-in affine family agree bit for bit
across the two backends.
"""

import numpy as np
from scipy.special import ndtr, ndtri

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO_M53 = 2.0**-53

# function families, noise families and draw coordinates
LINEAR, TANH = 0, 1
GAUSSIAN, UNIFORM, TRUNCATED = 0, 1, 2
COORD_NOISE, COORD_INIT, COORD_COIN = 0, 1, 2

EPANECHNIKOV, TRIANGULAR, QUARTIC = 0, 1, 2


def mix64(x):
    """splitmix64 output function applied elementwise to a uint64 array."""
    scalar = np.ndim(x) == 0
    z = np.atleast_1d(np.asarray(x, dtype=np.uint64)) + GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    z = z ^ (z >> np.uint64(31))
    return z[0] if scalar else z


def hash2(key, x):
    return mix64(np.uint64(key) ^ mix64(x))


def counter_uniforms(key, counters):
    """Uniforms on the open interval (0, 1), one per counter."""
    bits = hash2(key, counters)
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_M53


def node_uniforms(key, start, stop, coord):
    labels = np.arange(start, stop, dtype=np.uint64)
    return counter_uniforms(key, (labels << np.uint64(2)) | np.uint64(coord))


def noise_from_uniform(u, code, scale, trunc):
    if code == GAUSSIAN:
        return scale * ndtri(u)
    if code == UNIFORM:
        return scale * (2.0 * u - 1.0)
    if code == TRUNCATED:
        p = ndtr(-trunc)
        return scale * ndtri(p + u * (1.0 - 2.0 * p))
    raise ValueError(f"unknown noise code {code}")


def apply_family(x, family, a, b):
    if family == LINEAR:
        return a * x + b
    if family == TANH:
        return a * np.tanh(x) + b
    raise ValueError(f"unknown function family {family}")


def fill_tree(key, depth, x1, fam0, a0, b0, fam1, a1, b1, noise, scale, trunc):
    """Values X_1..X_{2^(depth+1)-1}; slot 0 holds NaN."""
    size = 1 << (depth + 1)
    out = np.empty(size, dtype=np.float64)
    out[0] = np.nan
    out[1] = x1
    for r in range(1, depth + 1):
        lo, hi = 1 << r, 1 << (r + 1)
        parents = out[lo >> 1:hi >> 1]
        eps = noise_from_uniform(node_uniforms(key, lo, hi, COORD_NOISE), noise, scale, trunc)
        out[lo:hi:2] = apply_family(parents, fam0, a0, b0) + eps[0::2]
        out[lo + 1:hi:2] = apply_family(parents, fam1, a1, b1) + eps[1::2]
    return out


def _chain_keys(key, nchains):
    return hash2(key, np.arange(nchains, dtype=np.uint64))


def q_chains(key, x0, steps, keep_from, fam0, a0, b0, fam1, a1, b1, noise, scale, trunc):
    """Run independent random-lineage chains side by side.

    Chain ``c`` draws from its own stream, so its path does not depend on how
    many chains run with it. Returns the states at times ``keep_from..steps``
    as an array of shape ``(steps - keep_from + 1, len(x0))``.
    """
    x = np.array(x0, dtype=np.float64, copy=True)
    keys = _chain_keys(key, x.size)
    out = np.empty((steps - keep_from + 1, x.size), dtype=np.float64)
    if keep_from == 0:
        out[0] = x
    for t in range(1, steps + 1):
        base = np.uint64(t) << np.uint64(2)
        coin = counter_uniforms_keys(keys, base | np.uint64(COORD_COIN))
        eps = noise_from_uniform(
            counter_uniforms_keys(keys, base | np.uint64(COORD_NOISE)), noise, scale, trunc
        )
        left = coin < 0.5
        y = np.where(left, apply_family(x, fam0, a0, b0), apply_family(x, fam1, a1, b1))
        x = y + eps
        if t >= keep_from:
            out[t - keep_from] = x
    return out


def counter_uniforms_keys(keys, counter):
    bits = mix64(keys ^ mix64(np.uint64(counter)))
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_M53


def kernel_values(u, code):
    u = np.asarray(u, dtype=np.float64)
    inside = np.abs(u) <= 1.0
    if code == EPANECHNIKOV:
        k = 0.75 * (1.0 - u * u)
    elif code == TRIANGULAR:
        k = 1.0 - np.abs(u)
    elif code == QUARTIC:
        w = 1.0 - u * u
        k = 0.9375 * w * w
    else:
        raise ValueError(f"unknown kernel code {code}")
    return np.where(inside, k, 0.0)


def nw_sums(design, resp0, resp1, grid, h, code):
    """Kernel sums over the design points for every grid point.

    Returns ``(D, S0, S1)`` with ``D[j] = sum_k K((X_k - x_j)/h)`` and
    ``S_b[j] = sum_k K((X_k - x_j)/h) * resp_b[k]``.
    """
    design = np.asarray(design, dtype=np.float64)
    grid = np.asarray(grid, dtype=np.float64)
    D = np.zeros(grid.size)
    S0 = np.zeros(grid.size)
    S1 = np.zeros(grid.size)
    for j, x in enumerate(grid):
        w = kernel_values((design - x) / h, code)
        D[j] = w.sum()
        S0[j] = w @ resp0
        S1[j] = w @ resp1
    return D, S0, S1

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. Mirrors ``_pure`` function for function."""

import numpy as np
cimport numpy as cnp
from libc.math cimport tanh, fabs, NAN
from libc.stdint cimport uint64_t
from scipy.special.cython_special cimport ndtri, ndtr

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double TWO_M53 = 1.0 / 9007199254740992.0

cdef enum:
    LINEAR = 0
    TANH = 1

cdef enum:
    GAUSSIAN = 0
    UNIFORM = 1
    TRUNCATED = 2

cdef enum:
    COORD_NOISE = 0
    COORD_COIN = 2


cdef inline uint64_t _mix(uint64_t x) noexcept nogil:
    cdef uint64_t z = x + GOLDEN
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double _uniform(uint64_t key, uint64_t counter) noexcept nogil:
    cdef uint64_t bits = _mix(key ^ _mix(counter))
    return (<double>(bits >> 11) + 0.5) * TWO_M53


cdef inline double _noise(double u, int code, double scale, double trunc) noexcept nogil:
    cdef double p
    if code == GAUSSIAN:
        return scale * ndtri(u)
    elif code == UNIFORM:
        return scale * (2.0 * u - 1.0)
    else:
        p = ndtr(-trunc)
        return scale * ndtri(p + u * (1.0 - 2.0 * p))


cdef inline double _family(double x, int fam, double a, double b) noexcept nogil:
    if fam == LINEAR:
        return a * x + b
    return a * tanh(x) + b


def mix64(x):
    cdef const uint64_t[::1] arr = np.ascontiguousarray(np.atleast_1d(x), dtype=np.uint64)
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] out = np.empty(arr.shape[0], dtype=np.uint64)
    cdef Py_ssize_t i
    for i in range(arr.shape[0]):
        out[i] = _mix(arr[i])
    if np.ndim(x) == 0:
        return np.uint64(out[0])
    return out


def counter_uniforms(key, counters):
    cdef const uint64_t[::1] c = np.ascontiguousarray(counters, dtype=np.uint64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(c.shape[0])
    cdef uint64_t k = <uint64_t>int(key)
    cdef Py_ssize_t i
    with nogil:
        for i in range(c.shape[0]):
            out[i] = _uniform(k, c[i])
    return out


def node_uniforms(key, Py_ssize_t start, Py_ssize_t stop, int coord):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(stop - start)
    cdef uint64_t k = <uint64_t>int(key)
    cdef Py_ssize_t i
    with nogil:
        for i in range(stop - start):
            out[i] = _uniform(k, ((<uint64_t>(start + i)) << 2) | <uint64_t>coord)
    return out


def noise_from_uniform(u, int code, double scale, double trunc):
    if code not in (GAUSSIAN, UNIFORM, TRUNCATED):
        raise ValueError(f"unknown noise code {code}")
    cdef const double[::1] uu = np.ascontiguousarray(u, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(uu.shape[0])
    cdef Py_ssize_t i
    with nogil:
        for i in range(uu.shape[0]):
            out[i] = _noise(uu[i], code, scale, trunc)
    return out.reshape(np.shape(u))


def fill_tree(key, int depth, double x1, int fam0, double a0, double b0,
              int fam1, double a1, double b1, int noise, double scale, double trunc):
    if fam0 not in (LINEAR, TANH) or fam1 not in (LINEAR, TANH):
        raise ValueError("unknown function family")
    if noise not in (GAUSSIAN, UNIFORM, TRUNCATED):
        raise ValueError(f"unknown noise code {noise}")
    cdef Py_ssize_t size = (<Py_ssize_t>1) << (depth + 1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(size)
    cdef double[::1] v = out
    cdef uint64_t k = <uint64_t>int(key)
    cdef Py_ssize_t node
    cdef double parent
    v[0] = NAN
    v[1] = x1
    with nogil:
        for node in range(2, size, 2):
            parent = v[node >> 1]
            v[node] = _family(parent, fam0, a0, b0) + _noise(
                _uniform(k, ((<uint64_t>node) << 2) | COORD_NOISE), noise, scale, trunc)
            v[node + 1] = _family(parent, fam1, a1, b1) + _noise(
                _uniform(k, ((<uint64_t>(node + 1)) << 2) | COORD_NOISE), noise, scale, trunc)
    return out


def q_chains(key, x0, Py_ssize_t steps, Py_ssize_t keep_from, int fam0, double a0, double b0,
             int fam1, double a1, double b1, int noise, double scale, double trunc):
    if noise not in (GAUSSIAN, UNIFORM, TRUNCATED):
        raise ValueError(f"unknown noise code {noise}")
    cdef const double[::1] start = np.ascontiguousarray(x0, dtype=np.float64).ravel()
    cdef Py_ssize_t nchains = start.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((steps - keep_from + 1, nchains))
    cdef double[:, ::1] o = out
    cdef uint64_t k = <uint64_t>int(key)
    cdef uint64_t ck
    cdef Py_ssize_t c, t
    cdef double x, coin, eps
    with nogil:
        for c in range(nchains):
            ck = _mix(k ^ _mix(<uint64_t>c))
            x = start[c]
            if keep_from == 0:
                o[0, c] = x
            for t in range(1, steps + 1):
                coin = _uniform(ck, ((<uint64_t>t) << 2) | COORD_COIN)
                eps = _noise(_uniform(ck, ((<uint64_t>t) << 2) | COORD_NOISE), noise, scale, trunc)
                if coin < 0.5:
                    x = _family(x, fam0, a0, b0) + eps
                else:
                    x = _family(x, fam1, a1, b1) + eps
                if t >= keep_from:
                    o[t - keep_from, c] = x
    return out


cdef inline double _kernel(double u, int code) noexcept nogil:
    cdef double w
    if fabs(u) > 1.0:
        return 0.0
    if code == 0:
        return 0.75 * (1.0 - u * u)
    elif code == 1:
        return 1.0 - fabs(u)
    w = 1.0 - u * u
    return 0.9375 * w * w


def kernel_values(u, int code):
    if code not in (0, 1, 2):
        raise ValueError(f"unknown kernel code {code}")
    cdef const double[::1] uu = np.ascontiguousarray(u, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(uu.shape[0])
    cdef Py_ssize_t i
    for i in range(uu.shape[0]):
        out[i] = _kernel(uu[i], code)
    return out.reshape(np.shape(u))


def nw_sums(design, resp0, resp1, grid, double h, int code):
    if code not in (0, 1, 2):
        raise ValueError(f"unknown kernel code {code}")
    cdef const double[::1] X = np.ascontiguousarray(design, dtype=np.float64)
    cdef const double[::1] Y0 = np.ascontiguousarray(resp0, dtype=np.float64)
    cdef const double[::1] Y1 = np.ascontiguousarray(resp1, dtype=np.float64)
    cdef const double[::1] G = np.ascontiguousarray(grid, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] D = np.zeros(G.shape[0])
    cdef cnp.ndarray[cnp.float64_t, ndim=1] S0 = np.zeros(G.shape[0])
    cdef cnp.ndarray[cnp.float64_t, ndim=1] S1 = np.zeros(G.shape[0])
    cdef Py_ssize_t i, j
    cdef double w, d, s0, s1
    with nogil:
        for j in range(G.shape[0]):
            d = 0.0
            s0 = 0.0
            s1 = 0.0
            for i in range(X.shape[0]):
                w = _kernel((X[i] - G[j]) / h, code)
                if w != 0.0:
                    d += w
                    s0 += w * Y0[i]
                    s1 += w * Y1[i]
            D[j] = d
            S0[j] = s0
            S1[j] = s1
    return D, S0, S1

"""Hot kernels, compiled when available.

The Cython extension ``_fast`` is used when it imports; otherwise the numpy
implementation in ``_pure`` takes over. Set ``BIFURCATE_PURE=1`` to force the
pure backend.
"""

import os

from . import _pure

if os.environ.get("BIFURCATE_PURE", "") not in ("", "0"):
    _impl = _pure
else:
    try:
        from . import _fast as _impl
    except ImportError:
        _impl = _pure

BACKEND = "compiled" if _impl is not _pure else "pure"

mix64 = _impl.mix64
counter_uniforms = _impl.counter_uniforms
node_uniforms = _impl.node_uniforms
noise_from_uniform = _impl.noise_from_uniform
fill_tree = _impl.fill_tree
q_chains = _impl.q_chains
kernel_values = _impl.kernel_values
nw_sums = _impl.nw_sums

LINEAR, TANH = _pure.LINEAR, _pure.TANH
GAUSSIAN, UNIFORM, TRUNCATED = _pure.GAUSSIAN, _pure.UNIFORM, _pure.TRUNCATED
COORD_NOISE, COORD_INIT, COORD_COIN = _pure.COORD_NOISE, _pure.COORD_INIT, _pure.COORD_COIN
EPANECHNIKOV, TRIANGULAR, QUARTIC = _pure.EPANECHNIKOV, _pure.TRIANGULAR, _pure.QUARTIC


def stream_key(master, replicate):
    """64-bit key of one replicate's random stream."""
    base = int(_pure.mix64(master & 0xFFFFFFFFFFFFFFFF))
    return int(_pure.hash2(base, replicate))

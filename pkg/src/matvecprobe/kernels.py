"""Kernel dispatch: compiled core when built, numpy fallback otherwise.

Set ``MATVECPROBE_PURE_PYTHON=1`` to force the fallback.
"""

import os

import numpy as np

from . import _pykernels

try:
    if os.environ.get("MATVECPROBE_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("fallback forced by environment")
    from . import _ckernels as _impl

    BACKEND = "compiled"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"

gf2_matmat = _impl.gf2_matmat
gf2_vecmat = _impl.gf2_vecmat
powmod_table = _impl.powmod_table
incidence_matmul_mod = _impl.incidence_matmul_mod


def pack_bits(bits) -> np.ndarray:
    """Pack a (m, n) 0/1 array into (m, ceil(n/64)) little-endian uint64 words."""
    bits = np.atleast_2d(np.asarray(bits, dtype=np.uint8))
    m, n = bits.shape
    words = max(1, -(-n // 64))
    raw = np.packbits(bits, axis=1, bitorder="little")
    buf = np.zeros((m, words * 8), dtype=np.uint8)
    buf[:, : raw.shape[1]] = raw
    return buf.view("<u8").astype(np.uint64)


def unpack_bits(words, n: int) -> np.ndarray:
    words = np.atleast_2d(np.asarray(words, dtype="<u8"))
    raw = np.ascontiguousarray(words).view(np.uint8)
    return np.unpackbits(raw, axis=1, count=n, bitorder="little")

"""Pure numpy implementations of the hot kernels.

Must stay signature- and result-identical to ``_ckernels.pyx``.
"""

import numpy as np

_LIMB = 31
_LIMB_MASK = np.uint64((1 << _LIMB) - 1)


def gf2_matmat(packed, queries):
    """Parity of popcount(row & query) for every (row, query): uint8 (m, q)."""
    packed = np.ascontiguousarray(packed, dtype=np.uint64)
    queries = np.ascontiguousarray(queries, dtype=np.uint64)
    m, q = packed.shape[0], queries.shape[0]
    out = np.empty((m, q), dtype=np.uint8)
    for k in range(q):
        acc = np.bitwise_count(packed & queries[k]).sum(axis=1, dtype=np.uint64)
        out[:, k] = acc & np.uint64(1)
    return out


def gf2_vecmat(packed, u):
    """XOR of the packed rows selected by the 0/1 vector ``u``."""
    packed = np.asarray(packed, dtype=np.uint64)
    sel = packed[np.asarray(u, dtype=bool)]
    if sel.shape[0] == 0:
        return np.zeros(packed.shape[1], dtype=np.uint64)
    return np.bitwise_xor.reduce(sel, axis=0)


def powmod_table(bases, length, modulus):
    """Row i holds bases[i]**e mod modulus for e = 0 .. length-1."""
    bases = [int(b) % modulus for b in np.asarray(bases, dtype=np.uint64)]
    k = len(bases)
    out = np.empty((k, length), dtype=np.uint64)
    if length == 0:
        return out
    base = np.array(bases, dtype=object)
    cur = np.ones(k, dtype=object)
    for e in range(length):
        out[:, e] = cur.astype(np.uint64)
        cur = cur * base % modulus
    return out


def incidence_matmul_mod(heads, tails, cols, values, n, modulus):
    """Signed incidence product mod ``modulus``.

    Column ``cols[k]`` of the hidden matrix is +1 at row ``heads[k]`` and -1 at row
    ``tails[k]``; ``values`` is the (N, q) query block with entries in [0, modulus).
    """
    values = np.asarray(values, dtype=np.uint64)
    q = values.shape[1]
    heads = np.asarray(heads, dtype=np.intp)
    tails = np.asarray(tails, dtype=np.intp)
    cols = np.asarray(cols, dtype=np.intp)
    picked = values[cols]
    sums = []
    for limb in ((picked & _LIMB_MASK), (picked >> np.uint64(_LIMB))):
        limb = limb.astype(np.int64)
        acc = np.zeros((n, q), dtype=np.int64)
        np.add.at(acc, heads, limb)
        np.subtract.at(acc, tails, limb)
        sums.append(acc.astype(object))
    total = (sums[1] * (1 << _LIMB) + sums[0]) % modulus
    return total.astype(np.uint64)

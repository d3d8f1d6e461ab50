"""Arithmetic over GF(2^8) with vectorized lookup tables.

The field uses the primitive polynomial x^8 + x^4 + x^3 + x^2 + 1 (0x11d)
with generator 2.
"""

import numpy as np

PRIMITIVE_POLY = 0x11D
ORDER = 255


def _build_tables():
    exp = np.zeros(2 * ORDER, dtype=np.uint8)
    log = np.zeros(256, dtype=np.int32)
    x = 1
    for i in range(ORDER):
        exp[i] = x
        log[x] = i
        x <<= 1
        if x & 0x100:
            x ^= PRIMITIVE_POLY
    exp[ORDER:] = exp[:ORDER]
    return exp, log


EXP, LOG = _build_tables()


def _build_mul_table():
    a = np.arange(256)
    table = EXP[(LOG[a][:, None] + LOG[a][None, :]) % ORDER].astype(np.uint8)
    table[0, :] = 0
    table[:, 0] = 0
    return table


MUL = _build_mul_table()
INV = np.zeros(256, dtype=np.uint8)
INV[1:] = EXP[(ORDER - LOG[np.arange(1, 256)]) % ORDER]


def mul(a, b):
    """Elementwise field product of two uint8 arrays (broadcasting)."""
    return MUL[np.asarray(a, dtype=np.uint8), np.asarray(b, dtype=np.uint8)]


def power(a: int, n: int) -> int:
    if a == 0:
        return 0 if n > 0 else 1
    return int(EXP[(int(LOG[a]) * n) % ORDER])


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product over GF(256).

    ``a`` has shape (r, k) and ``b`` has shape (k, c); both uint8.
    """
    a = np.asarray(a, dtype=np.uint8)
    b = np.asarray(b, dtype=np.uint8)
    out = np.zeros((a.shape[0], b.shape[1]), dtype=np.uint8)
    for j in range(a.shape[1]):
        out ^= MUL[a[:, j][:, None], b[j][None, :]]
    return out


def inverse(m: np.ndarray) -> np.ndarray:
    """Invert a square matrix over GF(256) by Gauss-Jordan elimination.

    Raises
    ------
    np.linalg.LinAlgError
        If the matrix is singular.
    """
    m = np.array(m, dtype=np.uint8)
    n = m.shape[0]
    if m.shape != (n, n):
        raise ValueError("matrix must be square")
    aug = np.concatenate([m, np.eye(n, dtype=np.uint8)], axis=1)
    for col in range(n):
        nz = np.nonzero(aug[col:, col])[0]
        if nz.size == 0:
            raise np.linalg.LinAlgError("singular matrix over GF(256)")
        piv = col + nz[0]
        if piv != col:
            aug[[col, piv]] = aug[[piv, col]]
        aug[col] = MUL[INV[aug[col, col]], aug[col]]
        factors = aug[:, col].copy()
        factors[col] = 0
        rows = np.nonzero(factors)[0]
        if rows.size:
            aug[rows] ^= MUL[factors[rows][:, None], aug[col][None, :]]
    return aug[:, n:]

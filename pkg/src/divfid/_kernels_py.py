"""Pure NumPy versions of the compiled kernels (same results, bit for bit)."""
import numpy as np

_SEED = np.uint64(0x243F6A8885A308D3)
_MUL = np.uint64(0x9E3779B97F4A7C15)
_FIN = np.uint64(0xBF58476D1CE4E5B9)

# bounds the (rows x candidates) scratch array
_BLOCK = 1 << 20


def grid_argmin(y, cand):
    y = np.ascontiguousarray(y, dtype=np.complex128)
    cand = np.ascontiguousarray(cand, dtype=np.complex128)
    if y.shape[1] != cand.shape[1]:
        raise ValueError("observation and candidate lengths differ")
    n, L = y.shape
    k = cand.shape[0]
    out = np.empty(n, dtype=np.int64)
    rows = max(1, _BLOCK // max(k, 1))
    for start in range(0, n, rows):
        yb = y[start:start + rows]
        acc = np.zeros((yb.shape[0], k))
        for l in range(L):
            dr = yb[:, l].real[:, None] - cand[:, l].real[None, :]
            di = yb[:, l].imag[:, None] - cand[:, l].imag[None, :]
            acc += dr * dr + di * di
        out[start:start + rows] = np.argmin(acc, axis=1)
    return out


def box_hash(points, sigma):
    points = np.ascontiguousarray(points, dtype=np.float64)
    idx = np.floor(points / sigma).astype(np.int64)
    u = idx.view(np.uint64)
    h = np.full(points.shape[0], _SEED, dtype=np.uint64)
    for j in range(points.shape[1]):
        h ^= u[:, j]
        h *= _MUL
        h ^= h >> np.uint64(29)
    h ^= h >> np.uint64(31)
    h *= _FIN
    h ^= h >> np.uint64(27)
    return idx, h

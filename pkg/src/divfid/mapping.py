"""Analog joint source-channel mappings and their decoders.

A mapping sends a source block ``s`` in ``[0, 1]^m`` to a complex
``nt x n`` matrix. Its ``S = n * nt`` complex entries ("slots") are ordered
row-major, so slot ``k`` is ``X[k // n, k % n]``. Point clouds flatten that
order and interleave real and imaginary parts.

Shipped kinds
-------------
linear
    ``u = s - 1/2`` repeated cyclically over the real parts of the slots
    (over real and imaginary parts when ``m > S``), scaled by ``gain``.
spiral
    ``m = 1``. ``theta = 2 pi stretch s``; every slot carries
    ``gain * theta * exp(1j * theta)``.
hybrid_digital_analog
    The top ``bits`` bits of each sample pick a point of a square QAM-style
    grid with unit spacing; the remaining fraction shifts the point along
    the real axis over half a spacing. Sample ``j`` occupies slots
    ``j, j + m, ...``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _seeding, kernels
from .channel import ChannelRealization, NoiseScale
from .dimension import ModulationPointCloud
from .errors import ConfigurationError, DomainError

KINDS = ("linear", "spiral", "hybrid_digital_analog")
DECODERS = ("grid_ml", "linear_mmse")
MAX_GRID_CANDIDATES = 10**7

SOURCE_VARIANCE = 1.0 / 12.0


@dataclass(frozen=True)
class MappingDescriptor:
    kind: str
    m: int
    n: int
    nt: int
    params: dict = field(default_factory=dict)
    gain: float = field(default=0.0)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown mapping kind {self.kind!r}; expected one of {KINDS}")
        for name in ("m", "n", "nt"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ConfigurationError(f"{name} must be a positive integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        params = dict(self.params)
        slots = self.n * self.nt
        if self.kind == "linear":
            if params:
                raise ConfigurationError(f"linear mapping takes no parameters, got {sorted(params)}")
            if self.m > 2 * slots:
                raise ConfigurationError(f"linear mapping needs m <= 2*n*nt = {2 * slots}")
            gain = math.sqrt(12.0 * slots / self._linear_coords())
        elif self.kind == "spiral":
            if set(params) != {"stretch"}:
                raise ConfigurationError("spiral mapping takes exactly one parameter: stretch")
            stretch = float(params["stretch"])
            if not stretch > 0:
                raise ConfigurationError(f"spiral stretch must be positive, got {stretch}")
            if self.m != 1:
                raise ConfigurationError("spiral mapping is defined for m = 1 only")
            params["stretch"] = stretch
            gain = math.sqrt(3.0) / (2.0 * math.pi * stretch)
        else:
            if set(params) != {"bits"}:
                raise ConfigurationError("hybrid mapping takes exactly one parameter: bits")
            bits = params["bits"]
            if int(bits) != bits or bits < 1:
                raise ConfigurationError(f"hybrid bits must be a positive integer, got {bits!r}")
            params["bits"] = int(bits)
            if self.m > slots:
                raise ConfigurationError(f"hybrid mapping needs m <= n*nt = {slots}")
            cols, rows = _qam_shape(params["bits"])
            power = (cols * cols - 1) / 12.0 + (rows * rows - 1) / 12.0 + _HDA_SPAN**2 / 12.0
            gain = 1.0 / math.sqrt(power)
        object.__setattr__(self, "params", params)
        if not self.gain:
            object.__setattr__(self, "gain", gain)

    # convenience constructors
    @classmethod
    def linear(cls, m: int = 1, n: int = 1, nt: int = 1) -> "MappingDescriptor":
        return cls("linear", m, n, nt)

    @classmethod
    def spiral(cls, stretch: float, n: int = 1, nt: int = 1) -> "MappingDescriptor":
        return cls("spiral", 1, n, nt, {"stretch": stretch})

    @classmethod
    def hybrid(cls, bits: int, m: int = 1, n: int = 1, nt: int = 1) -> "MappingDescriptor":
        return cls("hybrid_digital_analog", m, n, nt, {"bits": bits})

    @property
    def slots(self) -> int:
        return self.n * self.nt

    @property
    def ambient_dimension(self) -> int:
        return 2 * self.slots

    @property
    def nominal_dimension(self) -> int:
        return self.m

    def _linear_coords(self) -> int:
        return self.slots if self.m <= self.slots else 2 * self.slots

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "m": self.m, "n": self.n, "nt": self.nt}
        d.update(self.params)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MappingDescriptor":
        d = dict(d)
        kind = d.pop("kind")
        m, n, nt = d.pop("m", 1), d.pop("n", 1), d.pop("nt", 1)
        return cls(kind, m, n, nt, d)


_HDA_SPAN = 0.5


def _qam_shape(bits: int) -> tuple[int, int]:
    return 1 << ((bits + 1) // 2), 1 << (bits // 2)


def linear_embedding(mp: MappingDescriptor) -> np.ndarray:
    """Real ``(2S, m)`` matrix ``A`` with ``flat(X) = gain * A (s - 1/2)``."""
    A = np.zeros((2 * mp.slots, mp.m))
    if mp._linear_coords() == mp.slots:
        for k in range(mp.slots):
            A[2 * k, k % mp.m] = 1.0
    else:
        for r in range(2 * mp.slots):
            A[r, r % mp.m] = 1.0
    return A


def encode_batch(mp: MappingDescriptor, s) -> np.ndarray:
    """Encode a ``(N, m)`` array of source blocks to ``(N, nt, n)`` matrices."""
    s = np.asarray(s, dtype=float)
    if s.ndim == 1:
        s = s[:, None] if mp.m == 1 else s[None, :]
    if s.shape[-1] != mp.m:
        raise ConfigurationError(f"source blocks have length {s.shape[-1]}, mapping expects m={mp.m}")
    if np.any(~(s >= 0.0) | ~(s <= 1.0)):
        raise DomainError("source samples must lie in [0, 1]")
    N = s.shape[0]
    if mp.kind == "linear":
        flat = (mp.gain * (s - 0.5)) @ linear_embedding(mp).T
        z = flat[:, 0::2] + 1j * flat[:, 1::2]
    elif mp.kind == "spiral":
        theta = 2.0 * math.pi * mp.params["stretch"] * s[:, 0]
        z = np.repeat((mp.gain * theta * np.exp(1j * theta))[:, None], mp.slots, axis=1)
    else:
        bits = mp.params["bits"]
        levels = 1 << bits
        cols, rows = _qam_shape(bits)
        q = np.minimum(np.floor(s * levels), levels - 1)
        r = s * levels - q
        qi = q.astype(np.int64)
        sym = (
            (qi % cols - (cols - 1) / 2.0)
            + _HDA_SPAN * (r - 0.5)
            + 1j * (qi // cols - (rows - 1) / 2.0)
        )
        z = mp.gain * sym[:, np.arange(mp.slots) % mp.m]
    return z.reshape(N, mp.nt, mp.n)


def encode(mp: MappingDescriptor, s) -> np.ndarray:
    """Encode one source block to its complex ``nt x n`` matrix."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if s.shape != (mp.m,):
        raise ConfigurationError(f"expected a source block of length {mp.m}, got shape {s.shape}")
    return encode_batch(mp, s[None, :])[0]


def flatten(x: np.ndarray) -> np.ndarray:
    """``(N, nt, n)`` complex -> ``(N, 2 n nt)`` real, interleaved re/im."""
    x = np.ascontiguousarray(x, dtype=np.complex128)
    return x.reshape(x.shape[0], -1).view(np.float64)


def sample_source(rng: np.random.Generator, count: int, m: int, kind: str = "uniform") -> np.ndarray:
    """Source blocks on ``[0, 1]^m``.

    ``gaussian`` draws a variance-matched normal around 1/2, clipped to the
    cube. Only the uniform source enters the bound checks.
    """
    if kind == "uniform":
        return rng.random((count, m))
    if kind == "gaussian":
        g = 0.5 + math.sqrt(SOURCE_VARIANCE) * rng.standard_normal((count, m))
        return np.clip(g, 0.0, 1.0)
    raise ConfigurationError(f"unknown source kind {kind!r}")


def sample_cloud(mp: MappingDescriptor, n_samples: int, seed: int, source: str = "uniform") -> ModulationPointCloud:
    """Push ``n_samples`` source draws through the mapping."""
    if n_samples < 1000:
        raise ConfigurationError("n_samples must be at least 1000")
    rng = _seeding.stream(seed, _seeding.CLOUD)
    s = sample_source(rng, n_samples, mp.m, source)
    pts = flatten(encode_batch(mp, s))
    return ModulationPointCloud.uniform(pts)


# -- decoding -----------------------------------------------------------------


@dataclass(frozen=True)
class DecoderSpec:
    """``grid_ml`` searches ``{0, step, 2 step, ..., 1}^m``; ``grid_step=None``
    picks ``min(1e-3, 1/snr)`` at decode time."""

    kind: str = "grid_ml"
    grid_step: float | None = None

    def __post_init__(self):
        if self.kind not in DECODERS:
            raise ConfigurationError(f"unknown decoder {self.kind!r}; expected one of {DECODERS}")
        if self.grid_step is not None and not 0.0 < self.grid_step <= 0.1:
            raise ConfigurationError(f"grid_step must lie in (0, 0.1], got {self.grid_step}")

    def step_for(self, snr: float) -> float:
        return self.grid_step if self.grid_step is not None else default_grid_step(snr)


def default_grid_step(snr: float) -> float:
    return min(1e-3, 1.0 / snr)


def grid_values(step: float) -> np.ndarray:
    k = int(math.floor(1.0 / step + 1e-9))
    v = np.arange(k + 1) * step
    if v[-1] < 1.0 - 1e-9:
        v = np.append(v, 1.0)
    return np.minimum(v, 1.0)


@lru_cache(maxsize=16)
def _grid(key: tuple, step: float):
    kind, m, n, nt, items = key
    desc = MappingDescriptor(kind, m, n, nt, dict(items))
    # size check before allocating the axis
    total = (int(math.floor(1.0 / step + 1e-9)) + 2) ** m
    if total > MAX_GRID_CANDIDATES:
        raise ConfigurationError(
            f"decoder grid has {total} candidates (limit {MAX_GRID_CANDIDATES}); "
            "use a coarser grid_step or a smaller m"
        )
    axis = grid_values(step)
    cand = np.array(list(itertools.product(axis, repeat=m))) if m > 1 else axis[:, None]
    return cand, encode_batch(desc, cand)


def candidate_grid(mp: MappingDescriptor, step: float):
    """Lexicographic source grid and its encoded matrices."""
    key = (mp.kind, mp.m, mp.n, mp.nt, tuple(sorted(mp.params.items())))
    return _grid(key, float(step))


def decode_grid_ml(mp: MappingDescriptor, y, h, step: float) -> np.ndarray:
    """Grid-search ML for observations ``y`` of shape ``(N, nr, n)`` through
    one channel matrix ``h``. Returns ``(N, m)`` estimates."""
    cand, xc = candidate_grid(mp, step)
    received = np.einsum("rt,ktn->krn", h, xc).reshape(xc.shape[0], -1)
    y = np.asarray(y, dtype=np.complex128)
    idx = kernels.grid_argmin(y.reshape(y.shape[0], -1), received)
    return cand[idx]


def mmse_matrices(mp: MappingDescriptor, h, sigma_sq: float) -> np.ndarray:
    """Linear estimators ``W`` with ``u_hat = W @ [Re y; Im y]``.

    ``h`` is ``(C, nr, nt)``; returns ``(C, m, 2 nr n)``. The uniform prior is
    replaced by a Gaussian of variance 1/12 per sample.
    """
    if mp.kind != "linear":
        raise ConfigurationError("linear_mmse decoding is only valid for linear mappings")
    h = np.asarray(h, dtype=np.complex128)
    C, nr, nt = h.shape
    A = linear_embedding(mp) * mp.gain
    a = A[0::2] + 1j * A[1::2]  # (S, m) complex slot loading
    a = a.reshape(nt, mp.n, mp.m)
    # y[r, t] = sum_a h[r, a] x[a, t]
    g = np.einsum("cra,atm->crtm", h, a).reshape(C, nr * mp.n, mp.m)
    G = np.concatenate([g.real, g.imag], axis=1)  # (C, 2 nr n, m)
    gram = np.einsum("cim,cik->cmk", G, G)
    ridge = (sigma_sq / 2.0) / SOURCE_VARIANCE
    gram = gram + ridge * np.eye(mp.m)
    return np.linalg.solve(gram, np.transpose(G, (0, 2, 1)))


def decode_linear_mmse(mp: MappingDescriptor, y, h, sigma_sq: float) -> np.ndarray:
    """Affine-model MMSE estimates for ``(N, nr, n)`` observations, clamped."""
    W = mmse_matrices(mp, np.asarray(h)[None], sigma_sq)[0]
    y = np.asarray(y, dtype=np.complex128).reshape(len(y), -1)
    yr = np.concatenate([y.real, y.imag], axis=1)
    return np.clip(yr @ W.T + 0.5, 0.0, 1.0)


def decode(mp: MappingDescriptor, dec: DecoderSpec, y, hr: ChannelRealization, noise: NoiseScale) -> np.ndarray:
    """Estimate one source block from one received ``nr x n`` matrix."""
    y = np.array(y, dtype=np.complex128, ndmin=2)
    if y.shape != (hr.nr, mp.n) or hr.nt != mp.nt:
        raise ConfigurationError(
            f"inconsistent dimensions: y {y.shape}, channel {hr.h.shape}, mapping nt={mp.nt} n={mp.n}"
        )
    return decode_batch(mp, dec, y[None], hr.h, noise)[0]


def decode_batch(mp: MappingDescriptor, dec: DecoderSpec, y, h, noise: NoiseScale) -> np.ndarray:
    if dec.kind == "linear_mmse":
        return decode_linear_mmse(mp, y, h, noise.sigma_sq)
    return decode_grid_ml(mp, y, h, dec.step_for(noise.snr))

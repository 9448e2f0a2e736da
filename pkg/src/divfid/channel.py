"""Quasi-static i.i.d. Rayleigh MIMO channel.

Channel draws are grouped in fixed chunks of ``CHANNEL_CHUNK`` matrices. Each
chunk has its own random stream, so draw ``i`` is a pure function of
``(seed, i)`` no matter which other draws are requested or in which order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

from . import _seeding
from ._parallel import map_ordered
from .errors import ConfigurationError, DomainError
from .stats import ExponentEstimate, clopper_pearson, log_probability_fit

CHANNEL_CHUNK = 4096

# eigenvalues at or below this are treated as exact zeros
DEGENERATE_EIGENVALUE = 1e-300
SENTINEL_EXPONENT = 1e6


@dataclass(frozen=True)
class SystemConfig:
    """Antenna counts, block lengths, SNR grid and master seed.

    ``eta`` is held exactly as ``Fraction(n, m)``. SNR values are linear
    power ratios.
    """

    nt: int
    nr: int
    m: int = 1
    n: int = 1
    snr_grid: tuple[float, ...] = ()
    master_seed: int = 0

    def __post_init__(self):
        for name in ("nt", "nr", "m", "n"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ConfigurationError(f"{name} must be a positive integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        grid = tuple(float(s) for s in self.snr_grid)
        if any(s <= 1.0 or not math.isfinite(s) for s in grid):
            raise ConfigurationError("snr_grid values must be finite and > 1")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigurationError("snr_grid must be strictly increasing")
        object.__setattr__(self, "snr_grid", grid)
        try:
            seed = _seeding.check_seed(self.master_seed)
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from None
        object.__setattr__(self, "master_seed", seed)

    @property
    def eta(self) -> Fraction:
        return Fraction(self.n, self.m)

    def require_bound_shape(self) -> None:
        """The robustness bounds are stated for ``nr >= nt`` only."""
        if self.nr < self.nt:
            raise ConfigurationError(
                f"bounds require nr >= nt (got nt={self.nt}, nr={self.nr})"
            )


@dataclass(frozen=True)
class ChannelRealization:
    h: np.ndarray
    singular_values_sq: np.ndarray
    draw_index: int = 0

    @classmethod
    def from_matrix(cls, h, draw_index: int = 0) -> "ChannelRealization":
        h = np.array(h, dtype=np.complex128, ndmin=2)
        if not np.all(np.isfinite(h)):
            raise ConfigurationError("channel matrix has non-finite entries")
        lam = eigenvalues(h[None])[0]
        h.flags.writeable = False
        lam.flags.writeable = False
        return cls(h, lam, int(draw_index))

    @property
    def nr(self) -> int:
        return self.h.shape[0]

    @property
    def nt(self) -> int:
        return self.h.shape[1]


@dataclass(frozen=True)
class NoiseScale:
    """Per-entry complex noise variance ``sigma_sq = nt / snr``."""

    snr: float
    sigma_sq: float

    @classmethod
    def from_snr(cls, snr: float, nt: int) -> "NoiseScale":
        if snr <= 0:
            raise ConfigurationError(f"snr must be positive, got {snr}")
        return cls(float(snr), nt / float(snr))

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma_sq)


@dataclass(frozen=True)
class ChannelBatch:
    """Consecutive draws ``start .. start + len - 1`` as stacked arrays."""

    h: np.ndarray  # (count, nr, nt)
    singular_values_sq: np.ndarray  # (count, min(nr, nt)), ascending
    start: int = 0

    def __len__(self) -> int:
        return self.h.shape[0]

    def realization(self, i: int) -> ChannelRealization:
        return ChannelRealization(self.h[i], self.singular_values_sq[i], self.start + i)


def eigenvalues(h: np.ndarray) -> np.ndarray:
    """Squared singular values of a stack of matrices, ascending."""
    if h.shape[-1] == 1 or h.shape[-2] == 1:
        lam = np.sum(h.real**2 + h.imag**2, axis=(-2, -1))[..., None]
        return lam
    s = np.linalg.svd(h, compute_uv=False)
    return np.sort(s * s, axis=-1)


@lru_cache(maxsize=8)
def _chunk(seed: int, nr: int, nt: int, chunk: int):
    rng = _seeding.stream(seed, _seeding.CHANNEL, chunk)
    h = _seeding.complex_normal(rng, (CHANNEL_CHUNK, nr, nt))
    lam = eigenvalues(h)
    h.flags.writeable = False
    lam.flags.writeable = False
    return h, lam


def sample_channels(cfg: SystemConfig, start: int, count: int, seed: int | None = None) -> ChannelBatch:
    """Draws ``start .. start + count - 1`` of the channel stream."""
    if start < 0 or count < 0:
        raise ConfigurationError("start and count must be non-negative")
    seed = cfg.master_seed if seed is None else seed
    hs, lams = [], []
    pos, stop = start, start + count
    while pos < stop:
        c, off = divmod(pos, CHANNEL_CHUNK)
        take = min(CHANNEL_CHUNK - off, stop - pos)
        h, lam = _chunk(seed, cfg.nr, cfg.nt, c)
        hs.append(h[off:off + take])
        lams.append(lam[off:off + take])
        pos += take
    if not hs:
        k = min(cfg.nr, cfg.nt)
        return ChannelBatch(np.empty((0, cfg.nr, cfg.nt), complex), np.empty((0, k)), start)
    return ChannelBatch(np.concatenate(hs), np.concatenate(lams), start)


def sample_channel(cfg: SystemConfig, draw_index: int) -> ChannelRealization:
    """One i.i.d. CN(0, 1) channel matrix, fixed by ``(master_seed, draw_index)``."""
    if draw_index < 0:
        raise ConfigurationError("draw_index must be non-negative")
    return sample_channels(cfg, draw_index, 1).realization(0)


def transmit(hr: ChannelRealization, x, noise: NoiseScale, noise_seed: int) -> np.ndarray:
    """``y = h x + sqrt(nt/snr) w`` with unit-variance complex Gaussian ``w``."""
    x = np.array(x, dtype=np.complex128, ndmin=2)
    if x.shape[0] != hr.nt:
        raise ConfigurationError(f"x has {x.shape[0]} rows, channel expects nt={hr.nt}")
    if not noise.sigma_sq > 0:
        raise ConfigurationError("noise variance must be positive")
    rng = _seeding.stream(noise_seed, _seeding.TRANSMIT)
    w = _seeding.complex_normal(rng, (hr.nr, x.shape[1]))
    return hr.h @ x + noise.sigma * w


class EigenExponents(NamedTuple):
    alpha: np.ndarray
    degenerate: np.ndarray


def eigen_exponents(lam, sigma_ref: float) -> EigenExponents:
    """``alpha_i = log(lambda_i) / log(sigma_ref)`` for ascending eigenvalues.

    Accepts a ``ChannelRealization`` or an array of eigenvalues (any leading
    batch shape). Eigenvalues at machine zero get a large sentinel exponent
    and are flagged in ``degenerate``.
    """
    if isinstance(lam, ChannelRealization):
        lam = lam.singular_values_sq
    if not 0.0 < sigma_ref < 1.0:
        raise DomainError(f"sigma_ref must lie in (0, 1), got {sigma_ref}")
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise DomainError("eigenvalues must be non-negative")
    degenerate = lam <= DEGENERATE_EIGENVALUE
    safe = np.where(degenerate, 1.0, lam)
    alpha = np.log(safe) / math.log(sigma_ref)
    alpha = np.where(degenerate, SENTINEL_EXPONENT, alpha)
    return EigenExponents(alpha, degenerate)


def default_sigma_ref(nt: int, snr: float) -> float:
    """Eigenvalue scale tied to the noise: the per-entry noise variance."""
    return nt / snr


@dataclass(frozen=True)
class TailPoint:
    snr: float
    p_hat: float
    ci_low: float
    ci_high: float
    count: int
    n_draws: int


@dataclass(frozen=True)
class EigenTail:
    """Empirical ``Pr{alpha_i >= 1 for the k smallest eigenvalues}`` per SNR."""

    nt: int
    nr: int
    k: int
    points: tuple[TailPoint, ...]
    degenerate_draws: int = 0
    undetectable: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "undetectable", all(p.count == 0 for p in self.points))

    def fit(self) -> ExponentEstimate:
        """Slope of ``-log p`` versus ``log snr`` (the outage exponent)."""
        return log_probability_fit(
            [p.snr for p in self.points],
            [p.count for p in self.points],
            [p.n_draws for p in self.points],
        )


def eigen_tail_probability(
    cfg: SystemConfig,
    k: int,
    snr_grid: Sequence[float] | None = None,
    n_draws: int = 100_000,
    sigma_ref=None,
    seed: int | None = None,
    threads: int = 1,
) -> EigenTail:
    """Fraction of channel draws whose ``k`` smallest eigenvalues all have
    exponent ``alpha >= 1``.

    ``sigma_ref`` may be ``None`` (noise variance ``nt/snr``), a number, or a
    callable ``snr -> sigma_ref``. The same channel draws serve every SNR.
    """
    kmax = min(cfg.nt, cfg.nr)
    if not 1 <= k <= kmax:
        raise ConfigurationError(f"k must lie in [1, {kmax}], got {k}")
    if n_draws < 1000:
        raise ConfigurationError("n_draws must be at least 1000")
    grid = tuple(cfg.snr_grid if snr_grid is None else (float(s) for s in snr_grid))
    if not grid:
        raise ConfigurationError("empty SNR grid")
    if sigma_ref is None:
        refs = [default_sigma_ref(cfg.nt, s) for s in grid]
    elif callable(sigma_ref):
        refs = [float(sigma_ref(s)) for s in grid]
    else:
        refs = [float(sigma_ref)] * len(grid)
    seed = cfg.master_seed if seed is None else seed

    def unit(c):
        start = c * CHANNEL_CHUNK
        batch = sample_channels(cfg, start, min(CHANNEL_CHUNK, n_draws - start), seed)
        small = batch.singular_values_sq[:, :k]
        counts = []
        deg = 0
        for ref in refs:
            ex = eigen_exponents(small, ref)
            counts.append(int(np.count_nonzero(np.all(ex.alpha >= 1.0, axis=1))))
            deg = int(np.count_nonzero(np.any(ex.degenerate, axis=1)))
        return counts, deg

    n_units = -(-n_draws // CHANNEL_CHUNK)
    parts = map_ordered(unit, range(n_units), threads)
    totals = np.sum([p[0] for p in parts], axis=0)
    degenerate = sum(p[1] for p in parts)
    points = []
    for s, cnt in zip(grid, totals):
        lo, hi = clopper_pearson(int(cnt), n_draws)
        points.append(TailPoint(s, int(cnt) / n_draws, lo, hi, int(cnt), n_draws))
    return EigenTail(cfg.nt, cfg.nr, k, tuple(points), degenerate)

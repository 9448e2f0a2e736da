"""Monte-Carlo distortion, fidelity-event probabilities and diversity slopes.

For each channel draw the conditional distortion ``D(H)`` is estimated from
``n_src`` source blocks, each sent with ``n_noise`` noise realizations. Source
and noise draws are shared across every SNR and every fidelity exponent of a
run (common random numbers), so event indicators are monotone in ``f`` and
comparable across SNR.

Because the same channel draws feed every SNR point, the slope standard
error from the weighted fit (which treats SNR points as independent) is an
approximation; it is typically conservative for the slope.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _seeding
from ._parallel import map_ordered
from .channel import ChannelRealization, NoiseScale, SystemConfig, sample_channels
from .errors import ConfigurationError, EstimationError
from .mapping import (
    DecoderSpec,
    MappingDescriptor,
    decode_grid_ml,
    encode_batch,
    mmse_matrices,
    sample_source,
)
from .stats import ExponentEstimate, clopper_pearson, log_probability_fit

LAB_CHUNK = 512
MIN_SAMPLES = 100


@dataclass(frozen=True)
class DistortionEstimate:
    d_hat: float
    n_src: int
    n_noise: int
    stderr: float


@dataclass(frozen=True)
class FidelityEventRecord:
    snr: float
    f: float
    p_hat: float
    ci_low: float
    ci_high: float
    n_channels: int
    events: int = 0
    # share of channels whose distortion CI contains the threshold
    straddle_fraction: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.ci_low <= self.p_hat <= self.ci_high <= 1.0:
            raise ValueError("need 0 <= ci_low <= p_hat <= ci_high <= 1")


@dataclass(frozen=True)
class DistortionTable:
    """Per-channel distortion estimates, one row per SNR."""

    snr_grid: tuple[float, ...]
    d_hat: np.ndarray  # (n_snr, n_channels)
    stderr: np.ndarray  # (n_snr, n_channels)
    m: int
    n_src: int
    n_noise: int

    @property
    def n_channels(self) -> int:
        return self.d_hat.shape[1]


def _check_samples(n_src: int, n_noise: int) -> None:
    if n_src < 1 or n_noise < 1 or n_src * n_noise < MIN_SAMPLES:
        raise ConfigurationError(
            f"need n_src, n_noise >= 1 and n_src * n_noise >= {MIN_SAMPLES}, got {n_src} x {n_noise}"
        )


def _check_dims(mp: MappingDescriptor, cfg: SystemConfig) -> None:
    if (mp.m, mp.n, mp.nt) != (cfg.m, cfg.n, cfg.nt):
        raise ConfigurationError(
            f"mapping (m={mp.m}, n={mp.n}, nt={mp.nt}) does not match "
            f"system (m={cfg.m}, n={cfg.n}, nt={cfg.nt})"
        )


def _block_errors(mp, dec, h, s, hx, w, snr_list):
    """Squared errors per (snr, channel, source, noise) for one channel batch.

    ``h`` (C, nr, nt); ``s`` (C, n_src, m); ``hx`` (C, n_src, nr, n);
    ``w`` (C, n_src, n_noise, nr, n).
    """
    C, n_src, n_noise, nr, n = w.shape
    nt = h.shape[2]
    out = np.empty((len(snr_list), C, n_src, n_noise))
    for i, snr in enumerate(snr_list):
        noise = NoiseScale.from_snr(snr, nt)
        y = hx[:, :, None] + noise.sigma * w
        if dec.kind == "linear_mmse":
            W = mmse_matrices(mp, h, noise.sigma_sq)
            yf = y.reshape(C, n_src * n_noise, nr * n)
            yr = np.concatenate([yf.real, yf.imag], axis=2)
            est = np.clip(np.einsum("cmk,cjk->cjm", W, yr) + 0.5, 0.0, 1.0)
        else:
            step = dec.step_for(snr)
            est = np.stack([
                decode_grid_ml(mp, y[c].reshape(-1, nr, n), h[c], step) for c in range(C)
            ])
        est = est.reshape(C, n_src, n_noise, mp.m)
        out[i] = np.sum((s[:, :, None, :] - est) ** 2, axis=-1)
    return out


def _errors_to_estimates(err):
    k = err.shape[-2] * err.shape[-1]
    flat = err.reshape(err.shape[:-2] + (k,))
    mean = flat.mean(axis=-1)
    sd = flat.std(axis=-1, ddof=1) if k > 1 else np.zeros_like(mean)
    return mean, sd / math.sqrt(k)


def conditional_distortion(
    mp: MappingDescriptor,
    dec: DecoderSpec,
    hr: ChannelRealization,
    noise: NoiseScale,
    n_src: int = 100,
    n_noise: int = 1,
    seed: int = 0,
    source: str = "uniform",
) -> DistortionEstimate:
    """``E ||s - s_hat||^2`` over source and noise for one fixed channel."""
    _check_samples(n_src, n_noise)
    if hr.nt != mp.nt:
        raise ConfigurationError(f"channel has nt={hr.nt}, mapping expects {mp.nt}")
    s = sample_source(_seeding.stream(seed, _seeding.SOURCE), n_src, mp.m, source)
    x = encode_batch(mp, s)
    hx = np.einsum("rt,stn->srn", hr.h, x)[None]
    w = _seeding.complex_normal(_seeding.stream(seed, _seeding.NOISE), (1, n_src, n_noise, hr.nr, mp.n))
    err = _block_errors(mp, dec, hr.h[None], s[None], hx, w, [noise.snr])
    mean, se = _errors_to_estimates(err)
    return DistortionEstimate(float(mean[0, 0]), n_src, n_noise, float(se[0, 0]))


def simulate_distortions(
    mp: MappingDescriptor,
    dec: DecoderSpec,
    cfg: SystemConfig,
    snr_grid: Sequence[float] | None = None,
    n_channels: int = 1000,
    n_src: int = 100,
    n_noise: int = 1,
    seed: int | None = None,
    threads: int = 1,
    source: str = "uniform",
) -> DistortionTable:
    """Conditional distortion of ``n_channels`` independent channel draws at
    every SNR of the grid."""
    _check_dims(mp, cfg)
    _check_samples(n_src, n_noise)
    if n_channels < 1:
        raise ConfigurationError("n_channels must be positive")
    grid = tuple(cfg.snr_grid if snr_grid is None else (float(s) for s in snr_grid))
    if not grid:
        raise ConfigurationError("empty SNR grid")
    SystemConfig(cfg.nt, cfg.nr, cfg.m, cfg.n, grid)  # validates the grid
    seed = cfg.master_seed if seed is None else _seeding.check_seed(seed)

    def unit(u):
        start = u * LAB_CHUNK
        count = min(LAB_CHUNK, n_channels - start)
        batch = sample_channels(cfg, start, count, seed)
        s = sample_source(_seeding.stream(seed, _seeding.SOURCE, u), count * n_src, mp.m, source)
        x = encode_batch(mp, s).reshape(count, n_src, mp.nt, mp.n)
        s = s.reshape(count, n_src, mp.m)
        hx = np.einsum("crt,cstn->csrn", batch.h, x)
        w = _seeding.complex_normal(
            _seeding.stream(seed, _seeding.NOISE, u), (count, n_src, n_noise, cfg.nr, mp.n)
        )
        return _errors_to_estimates(_block_errors(mp, dec, batch.h, s, hx, w, grid))

    parts = map_ordered(unit, range(-(-n_channels // LAB_CHUNK)), threads)
    d_hat = np.concatenate([p[0] for p in parts], axis=1)
    se = np.concatenate([p[1] for p in parts], axis=1)
    return DistortionTable(grid, d_hat, se, mp.m, n_src, n_noise)


def event_threshold(snr: float, f: float, m: int, threshold_scale: float = 1.0) -> float:
    """Block distortion level ``threshold_scale * m * snr^-f``."""
    return threshold_scale * m * snr ** (-f)


def event_records(table: DistortionTable, f: float, threshold_scale: float = 1.0) -> list[FidelityEventRecord]:
    """Fidelity-event frequency ``Pr{D(H) > threshold}`` per SNR."""
    if f < 0:
        raise ConfigurationError("f must be non-negative")
    recs = []
    n = table.n_channels
    for i, snr in enumerate(table.snr_grid):
        thr = event_threshold(snr, f, table.m, threshold_scale)
        d, se = table.d_hat[i], table.stderr[i]
        k = int(np.count_nonzero(d > thr))
        straddle = float(np.count_nonzero(np.abs(d - thr) <= 1.96 * se)) / n
        lo, hi = clopper_pearson(k, n)
        recs.append(FidelityEventRecord(snr, float(f), k / n, lo, hi, n, k, straddle))
    return recs


def fidelity_event_probability(
    mp: MappingDescriptor,
    dec: DecoderSpec,
    cfg: SystemConfig,
    snr: float,
    f: float,
    n_channels: int = 1000,
    n_src: int = 100,
    n_noise: int = 1,
    seed: int | None = None,
    threshold_scale: float = 1.0,
    threads: int = 1,
) -> FidelityEventRecord:
    """Fraction of channel draws whose conditional distortion exceeds the
    fidelity threshold at one SNR."""
    if n_channels < 1000:
        raise ConfigurationError("n_channels must be at least 1000")
    table = simulate_distortions(mp, dec, cfg, [snr], n_channels, n_src, n_noise, seed, threads)
    return event_records(table, f, threshold_scale)[0]


@dataclass(frozen=True)
class DiversityEstimate:
    f: float
    estimate: ExponentEstimate | None
    records: tuple[FidelityEventRecord, ...]
    error: str = ""

    @property
    def slope(self) -> float:
        return math.nan if self.estimate is None else self.estimate.slope

    @property
    def stderr(self) -> float:
        return math.nan if self.estimate is None else self.estimate.stderr

    @property
    def beyond_desk_scale(self) -> bool:
        """Exponents above 2 need rare-event sampling to be trusted."""
        return self.estimate is not None and self.estimate.slope > 2.0

    def significant(self, z: float = 2.0) -> bool:
        return self.estimate is not None and self.slope - z * self.stderr > 0


def fit_diversity(records: Sequence[FidelityEventRecord]) -> ExponentEstimate:
    """Weighted slope of ``-log p_hat`` against ``log snr``."""
    return log_probability_fit(
        [r.snr for r in records], [r.events for r in records], [r.n_channels for r in records]
    )


def _diversity_from_table(table, f, threshold_scale) -> DiversityEstimate:
    recs = tuple(event_records(table, f, threshold_scale))
    try:
        return DiversityEstimate(float(f), fit_diversity(recs), recs)
    except EstimationError as exc:
        return DiversityEstimate(float(f), None, recs, str(exc))


def diversity_estimate(
    mp: MappingDescriptor,
    dec: DecoderSpec,
    cfg: SystemConfig,
    f: float,
    snr_grid: Sequence[float] | None = None,
    n_channels: int = 1000,
    seed: int | None = None,
    n_src: int = 100,
    n_noise: int = 1,
    threshold_scale: float = 1.0,
    threads: int = 1,
) -> DiversityEstimate:
    """Diversity at fidelity exponent ``f``.

    Raises ``EstimationError`` when fewer than three SNR points see any
    event; the records are attached to the exception as ``.records``.
    """
    table = simulate_distortions(mp, dec, cfg, snr_grid, n_channels, n_src, n_noise, seed, threads)
    est = _diversity_from_table(table, f, threshold_scale)
    if est.estimate is None:
        err = EstimationError(est.error)
        err.records = est.records
        raise err
    return est


@dataclass(frozen=True)
class SweepResult:
    entries: tuple[DiversityEstimate, ...]
    table: DistortionTable = field(repr=False)

    @property
    def frontier(self) -> float | None:
        """Largest swept ``f`` whose diversity is significantly positive."""
        ok = [e.f for e in self.entries if e.significant()]
        return max(ok) if ok else None

    def records(self) -> list[FidelityEventRecord]:
        recs = [r for e in self.entries for r in e.records]
        return sorted(recs, key=lambda r: (r.snr, r.f))


def sweep_table(table: DistortionTable, f_grid: Sequence[float], threshold_scale: float = 1.0) -> SweepResult:
    f_grid = [float(f) for f in f_grid]
    if any(b <= a for a, b in zip(f_grid, f_grid[1:])):
        raise ConfigurationError("f_grid must be strictly ascending")
    return SweepResult(tuple(_diversity_from_table(table, f, threshold_scale) for f in f_grid), table)


def fidelity_sweep(
    mp: MappingDescriptor,
    dec: DecoderSpec,
    cfg: SystemConfig,
    f_grid: Sequence[float],
    snr_grid: Sequence[float] | None = None,
    n_channels: int = 1000,
    seed: int | None = None,
    n_src: int = 100,
    n_noise: int = 1,
    threshold_scale: float = 1.0,
    threads: int = 1,
) -> SweepResult:
    """Diversity estimates for every ``f`` from one shared set of draws."""
    table = simulate_distortions(mp, dec, cfg, snr_grid, n_channels, n_src, n_noise, seed, threads)
    return sweep_table(table, f_grid, threshold_scale)

"""Closed-form diversity-fidelity tradeoffs and robustness bounds.

Everything is evaluated in exact rational arithmetic: inputs are converted
with ``Fraction`` (exact for ints, floats and fractions) and results are
returned as ``Fraction``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real
from typing import NamedTuple, Sequence

from .channel import SystemConfig
from .errors import ConfigurationError, DomainError


def _q(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, Real):
        if isinstance(x, float) and not math.isfinite(x):
            raise DomainError(f"non-finite value {x}")
        return Fraction(x)
    raise TypeError(f"expected a real number, got {type(x).__name__}")


@dataclass(frozen=True)
class DimensionHypothesis:
    """Effective dimension between ``2 n beta`` and ``2 n beta_prime``."""

    beta: Fraction
    beta_prime: Fraction

    def __post_init__(self):
        b, bp = _q(self.beta), _q(self.beta_prime)
        if not 0 < b <= bp:
            raise DomainError(f"need 0 < beta <= beta_prime, got {b}, {bp}")
        object.__setattr__(self, "beta", b)
        object.__setattr__(self, "beta_prime", bp)

    @classmethod
    def fixed(cls, beta) -> "DimensionHypothesis":
        return cls(beta, beta)

    def check(self, cfg: SystemConfig) -> None:
        if self.beta_prime > cfg.nt:
            raise DomainError(f"beta_prime={self.beta_prime} exceeds nt={cfg.nt}")


class Diversity(NamedTuple):
    d: Fraction
    interpolated: bool


@dataclass(frozen=True)
class TradeoffCurve:
    label: str
    points: tuple[tuple[Fraction, Fraction], ...]
    interpolated: tuple[bool, ...]

    def __post_init__(self):
        fs = [f for f, _ in self.points]
        if any(b < a for a, b in zip(fs, fs[1:])):
            raise ValueError("f must be ascending")
        if any(f < 0 or d < 0 for f, d in self.points):
            raise ValueError("f and d must be non-negative")
        if len(self.interpolated) != len(self.points):
            raise ValueError("one interpolation flag per point")

    @property
    def interpolation_flag(self) -> bool:
        return any(self.interpolated)

    def is_non_increasing(self) -> bool:
        ds = [d for _, d in self.points]
        return all(b <= a for a, b in zip(ds, ds[1:]))

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "interpolation_flag": self.interpolation_flag,
            "points": [
                {"f": float(f), "d": float(d), "interpolated": flag}
                for (f, d), flag in zip(self.points, self.interpolated)
            ],
        }


def optimal_diversity(cfg: SystemConfig, f) -> Diversity:
    """Optimal tradeoff ``(nt - k)(nr - k)`` with ``k = f / (2 eta)``.

    The product form holds at integer ``k``; in between, the value is
    interpolated linearly between neighbouring integer anchors and flagged.
    """
    cfg.require_bound_shape()
    f = _q(f)
    eta = cfg.eta
    if not 0 <= f <= 2 * eta * cfg.nt:
        raise DomainError(f"f={f} outside [0, {2 * eta * cfg.nt}]")
    k = f / (2 * eta)

    def anchor(j: int) -> Fraction:
        return Fraction((cfg.nt - j) * (cfg.nr - j))

    if k.denominator == 1:
        return Diversity(anchor(int(k)), False)
    lo = math.floor(k)
    t = k - lo
    return Diversity(anchor(lo) * (1 - t) + anchor(lo + 1) * t, True)


def thm1_upper(cfg: SystemConfig, hyp: DimensionHypothesis, f) -> Fraction:
    """Single-mapping bound ``(nr - beta + 1)(nt - beta + 1)(1 - f / (2 eta beta'))``."""
    cfg.require_bound_shape()
    hyp.check(cfg)
    f = _q(f)
    top = 2 * cfg.eta * hyp.beta_prime
    if not 0 <= f <= top:
        raise DomainError(f"bound holds for 0 <= f <= {top}, got f={f}")
    b = hyp.beta
    return (cfg.nr - b + 1) * (cfg.nt - b + 1) * (1 - f / top)


def d0_upper(cfg: SystemConfig, beta) -> Fraction:
    """Zero-fidelity diversity bound ``(nt - beta + 1)(nr - beta + 1)``."""
    cfg.require_bound_shape()
    beta = _q(beta)
    if not 0 < beta <= cfg.nt:
        raise DomainError(f"beta must lie in (0, {cfg.nt}], got {beta}")
    return (cfg.nt - beta + 1) * (cfg.nr - beta + 1)


def thm2_fidelity_ceiling(eta, beta) -> Fraction:
    """Largest achievable fidelity exponent ``2 eta beta``."""
    eta, beta = _q(eta), _q(beta)
    if not (eta > 0 and beta > 0):
        raise DomainError("eta and beta must be positive")
    return 2 * eta * beta


def eigen_outage_exponent(cfg: SystemConfig, beta) -> Fraction:
    """SNR exponent of the event that the ``nt - beta + 1`` smallest channel
    eigenvalues all fall below the noise scale."""
    beta = _q(beta)
    k = cfg.nt - beta + 1
    if not 1 <= k <= min(cfg.nt, cfg.nr):
        raise DomainError(f"nt - beta + 1 = {k} outside [1, {min(cfg.nt, cfg.nr)}]")
    return k * (cfg.nr - beta + 1)


def f_grid(stop, step) -> list[Fraction]:
    """``0, step, 2 step, ...`` up to and including ``stop``."""
    stop, step = _q(stop), _q(step)
    if step <= 0:
        raise DomainError("step must be positive")
    out = [Fraction(0)]
    while out[-1] + step < stop:
        out.append(out[-1] + step)
    if out[-1] != stop:
        out.append(stop)
    return out


def optimal_curve(cfg: SystemConfig, step=Fraction(1, 4)) -> TradeoffCurve:
    fs = f_grid(2 * cfg.eta * cfg.nt, step)
    vals = [optimal_diversity(cfg, f) for f in fs]
    return TradeoffCurve("optimal", tuple((f, v.d) for f, v in zip(fs, vals)), tuple(v.interpolated for v in vals))


def thm1_curve(cfg: SystemConfig, hyp: DimensionHypothesis, step=Fraction(1, 4)) -> TradeoffCurve:
    fs = f_grid(2 * cfg.eta * hyp.beta_prime, step)
    if hyp.beta == hyp.beta_prime:
        label = f"thm1 beta={_fmt(hyp.beta)}"
    else:
        label = f"thm1 beta={_fmt(hyp.beta)} beta'={_fmt(hyp.beta_prime)}"
    return TradeoffCurve(label, tuple((f, thm1_upper(cfg, hyp, f)) for f in fs), (False,) * len(fs))


def _fmt(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


FIGURE1 = dict(nt=4, nr=4, m=2, n=3)
FIGURE1_BETAS = (1, 2, 3, 4)


def figure1_config() -> SystemConfig:
    return SystemConfig(**FIGURE1)


def figure1_curves(cfg: SystemConfig | None = None, beta_list: Sequence = FIGURE1_BETAS, step=Fraction(1, 4)) -> list[TradeoffCurve]:
    """Optimal curve plus one bound curve per beta (with ``beta' = beta``).

    Configurations other than 4x4 antennas at expansion 3/2 get a
    ``generalized`` label prefix.
    """
    cfg = figure1_config() if cfg is None else cfg
    generalized = (cfg.nt, cfg.nr, cfg.eta) != (4, 4, Fraction(3, 2))
    curves = [optimal_curve(cfg, step)]
    curves += [thm1_curve(cfg, DimensionHypothesis.fixed(b), step) for b in beta_list]
    if generalized:
        curves = [TradeoffCurve("generalized " + c.label, c.points, c.interpolated) for c in curves]
    return curves


class Gap(NamedTuple):
    gap: Fraction
    f: Fraction


def corollary_gap(cfg: SystemConfig, hyp: DimensionHypothesis, f_values) -> Gap:
    """Smallest ``d*(f) - thm1_upper(f)`` over interior fidelity exponents.

    A positive gap means no mapping with this dimension profile reaches the
    optimal curve anywhere on ``f_values``.
    """
    f_values = [_q(f) for f in f_values]
    if not f_values:
        raise ConfigurationError("f_values must be non-empty")
    top = min(2 * cfg.eta * hyp.beta_prime, 2 * cfg.eta * cfg.nt)
    bad = [f for f in f_values if not 0 < f < top]
    if bad:
        raise DomainError(f"f values must lie in (0, {top}), got {bad}")
    best = None
    for f in f_values:
        g = optimal_diversity(cfg, f).d - thm1_upper(cfg, hyp, f)
        if best is None or g < best.gap:
            best = Gap(g, f)
    return best


def interior_grid(cfg: SystemConfig, hyp: DimensionHypothesis, step=Fraction(1, 4)) -> list[Fraction]:
    """Grid points strictly inside ``(0, min(2 eta beta', 2 eta nt))``."""
    top = min(2 * cfg.eta * hyp.beta_prime, 2 * cfg.eta * cfg.nt)
    return [f for f in f_grid(top, step) if 0 < f < top]

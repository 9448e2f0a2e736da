"""Box-counting and c-effective box-counting dimension of point clouds.

The grid is anchored at the origin: a point ``p`` falls in the cell with
integer index ``floor(p / sigma_box)`` per coordinate. Cells are keyed by a
64-bit hash of that index vector; collisions are detected and resolved.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _seeding, kernels
from ._parallel import map_ordered
from .errors import ConfigurationError, DomainError, EstimationError
from .stats import ExponentEstimate, linear_fit

_SHARD = 1 << 18


@dataclass(frozen=True)
class ModulationPointCloud:
    points: np.ndarray  # (N, dim) real
    weights: np.ndarray  # (N,)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ConfigurationError("points must be a non-empty (N, dim) array")
        if w.shape != (pts.shape[0],):
            raise ConfigurationError("one weight per point is required")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ConfigurationError("weights must be non-negative and sum to 1")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, points) -> "ModulationPointCloud":
        points = np.asarray(points, dtype=float)
        n = points.shape[0]
        return cls(points, np.full(n, 1.0 / n))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class BoxOccupancy:
    """Occupied cells sorted lexicographically by integer index."""

    sigma_box: float
    index: np.ndarray  # (K, dim) int64
    count: np.ndarray  # (K,) int64
    mass: np.ndarray  # (K,) float
    hash_collisions: int = 0

    @property
    def n_points(self) -> int:
        return int(self.count.sum())

    @property
    def cells(self) -> dict:
        """``{index tuple: (count, mass)}`` view of the census."""
        return {
            tuple(int(v) for v in ix): (int(c), float(w))
            for ix, c, w in zip(self.index, self.count, self.mass)
        }

    def __len__(self) -> int:
        return self.index.shape[0]


def _group(sigma, idx, h, w) -> BoxOccupancy:
    # weights ascending inside each hash group keeps the mass sums independent
    # of point order
    order = np.lexsort((w, h))
    hs, ids, ws = h[order], idx[order], w[order]
    starts = np.flatnonzero(np.concatenate(([True], hs[1:] != hs[:-1])))
    group = np.cumsum(np.concatenate(([False], hs[1:] != hs[:-1])))
    collisions = 0
    if not np.array_equal(ids, ids[starts][group]):
        # genuine 64-bit collision: fall back to exact row grouping
        uniq, inv = np.unique(ids, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        collisions = int(uniq.shape[0] - starts.size)
        count = np.bincount(inv, minlength=uniq.shape[0]).astype(np.int64)
        mass = np.bincount(inv, weights=ws, minlength=uniq.shape[0])
        cell_index = uniq
    else:
        cell_index = ids[starts]
        count = np.diff(np.append(starts, hs.size)).astype(np.int64)
        mass = np.add.reduceat(ws, starts) if ws.size else np.zeros(0)
    lex = np.lexsort(cell_index.T[::-1]) if cell_index.shape[1] else np.arange(len(count))
    return BoxOccupancy(float(sigma), cell_index[lex], count[lex], mass[lex], collisions)


def box_census(cloud: ModulationPointCloud, sigma_box: float, threads: int = 1) -> BoxOccupancy:
    """Count points and probability mass per grid cell of side ``sigma_box``."""
    if not sigma_box > 0:
        raise DomainError(f"sigma_box must be positive, got {sigma_box}")
    pts = cloud.points
    shards = range(0, len(cloud), _SHARD)
    parts = map_ordered(lambda a: kernels.box_hash(pts[a:a + _SHARD], sigma_box), shards, threads)
    idx = np.concatenate([p[0] for p in parts])
    h = np.concatenate([p[1] for p in parts])
    return _group(sigma_box, idx, h, cloud.weights)


def box_count(occ: BoxOccupancy) -> int:
    """Number of occupied cells, ``N_sigma``."""
    return len(occ)


def effective_box_count(occ: BoxOccupancy, c: float) -> int:
    """Fewest cells whose total mass is at least ``c``.

    Cells are taken by decreasing mass; equal masses keep lexicographic
    index order.
    """
    if not 0.0 < c <= 1.0:
        raise DomainError(f"c must lie in (0, 1], got {c}")
    order = np.argsort(-occ.mass, kind="stable")
    cum = np.cumsum(occ.mass[order])
    k = int(np.searchsorted(cum, c - 1e-12, side="left")) + 1
    return min(k, len(occ))


def fit_dimension(pairs: Sequence[tuple[float, float]], n_samples: int | None = None) -> ExponentEstimate:
    """Slope of ``log count`` against ``log(1/sigma)``.

    With ``n_samples`` given, scales whose count exceeds ``n_samples / 10``
    are saturated by undersampling and are left out (listed in
    ``excluded``).
    """
    pairs = [(float(s), float(c)) for s, c in pairs]
    sig = [s for s, _ in pairs]
    if any(s <= 0 for s in sig) or any(b >= a for a, b in zip(sig, sig[1:])):
        raise ConfigurationError("sigma values must be positive and strictly decreasing")
    if any(c < 1 for _, c in pairs):
        raise ConfigurationError("counts must be at least 1")
    used, excluded = [], []
    for s, c in pairs:
        if n_samples is not None and c > n_samples / 10:
            excluded.append((s, c))
        else:
            used.append((s, c))
    if len(used) < 3:
        raise EstimationError(
            f"only {len(used)} unsaturated scales (need 3); excluded {excluded}"
        )
    x = [math.log(1.0 / s) for s, _ in used]
    y = [math.log(c) for _, c in used]
    slope, intercept, stderr = linear_fit(x, y)
    return ExponentEstimate(slope, intercept, stderr, tuple(zip(x, y)), tuple(excluded))


@dataclass(frozen=True)
class DimensionEstimate:
    """Fitted effective dimension of a cloud living in ``R^(2 n nt)``.

    ``beta_hat`` is the raw slope divided by ``2 n``.
    """

    estimate: ExponentEstimate
    beta_hat: float
    c: float
    sigma_list: tuple[float, ...]
    n_boxes: tuple[int, ...]
    n_effective: tuple[int, ...]
    n_samples: int
    undersampled: bool = field(default=False)

    @property
    def slope(self) -> float:
        return self.estimate.slope


def census_rows(cloud: ModulationPointCloud, sigma_list, c_list, threads: int = 1) -> list[tuple]:
    """``(sigma_box, n_boxes, n_effective, c)`` for every scale and ``c``."""
    rows = []
    for s in sigma_list:
        occ = box_census(cloud, s, threads)
        nb = box_count(occ)
        for c in c_list:
            rows.append((float(s), nb, effective_box_count(occ, c), float(c)))
    return rows


def cloud_dimension(cloud: ModulationPointCloud, c: float, sigma_list, n: int = 1, threads: int = 1) -> DimensionEstimate:
    """Effective dimension of an arbitrary cloud (``n`` sets the beta scale)."""
    sigma_list = tuple(float(s) for s in sigma_list)
    if any(not 0 < s < 1 for s in sigma_list) or any(b >= a for a, b in zip(sigma_list, sigma_list[1:])):
        raise ConfigurationError("sigma_list must be strictly decreasing within (0, 1)")
    if not 0.0 < c <= 1.0:
        raise DomainError(f"c must lie in (0, 1], got {c}")
    rows = census_rows(cloud, sigma_list, [c], threads)
    nb = tuple(r[1] for r in rows)
    ne = tuple(r[2] for r in rows)
    est = fit_dimension(list(zip(sigma_list, ne)), n_samples=len(cloud))
    used_max = max(math.exp(y) for _, y in est.points_used)
    return DimensionEstimate(
        estimate=est,
        beta_hat=est.slope / (2 * n),
        c=float(c),
        sigma_list=sigma_list,
        n_boxes=nb,
        n_effective=ne,
        n_samples=len(cloud),
        undersampled=len(cloud) < 100 * used_max,
    )


def effective_dimension(mp, c: float, sigma_list, n_samples: int, seed: int, threads: int = 1) -> DimensionEstimate:
    """Sample the mapping's modulation set and fit its c-effective dimension."""
    from .mapping import sample_cloud

    cloud = sample_cloud(mp, n_samples, seed)
    return cloud_dimension(cloud, c, sigma_list, n=mp.n, threads=threads)


def dyadic_sigmas(k_min: int, k_max: int) -> tuple[float, ...]:
    """``2^-k_min, ..., 2^-k_max``."""
    return tuple(2.0 ** -k for k in range(k_min, k_max + 1))


SYNTHETIC = ("segment", "square", "mixture", "full")


def synthetic_cloud(name: str, n_samples: int, seed: int, dim: int = 2) -> ModulationPointCloud:
    """Reference sets with known dimension.

    ``segment`` is ``[0,1] x {0}^(dim-1)``, ``square`` the unit square (rest
    zero), ``full`` the unit cube, and ``mixture`` puts 95% of the mass on the
    atom ``(0.5, 0.5, ...)`` and 5% uniformly on ``[0,1] x {0.25} x ...``.
    """
    rng = _seeding.stream(seed, _seeding.CLOUD, 1 + SYNTHETIC.index(name) if name in SYNTHETIC else 0)
    pts = np.zeros((n_samples, dim))
    if name == "segment":
        pts[:, 0] = rng.random(n_samples)
    elif name == "square":
        if dim < 2:
            raise ConfigurationError("square needs dim >= 2")
        pts[:, :2] = rng.random((n_samples, 2))
    elif name == "full":
        pts[:] = rng.random((n_samples, dim))
    elif name == "mixture":
        n_seg = int(round(0.05 * n_samples))
        pts[:] = 0.5
        pts[:n_seg, 1:] = 0.25
        pts[:n_seg, 0] = rng.random(n_seg)
    else:
        raise ConfigurationError(f"unknown synthetic set {name!r}; expected one of {SYNTHETIC}")
    return ModulationPointCloud.uniform(pts)

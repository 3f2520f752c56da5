"""Weighted point sets, center sets and the k-means cost.

Coincident points are stored once as a *site* carrying an integer weight, so
every sum over points below is a weighted sum over sites.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .errors import InputError

__all__ = [
    "Dataset",
    "CenterSet",
    "as_point",
    "sq_dists",
    "cost",
    "mean",
    "one_means_cost",
    "cost_decomposition",
    "incremental_update",
    "potentials_with",
    "candidate_delta",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def as_point(u, dim: int | None = None) -> np.ndarray:
    """Validate ``u`` as a finite coordinate vector (1-D float array)."""
    p = np.array(u, dtype=np.float64).reshape(-1)
    if p.size == 0:
        raise InputError("a point needs at least one coordinate")
    if not np.all(np.isfinite(p)):
        raise InputError("point coordinates must be finite")
    if dim is not None and p.size != dim:
        raise InputError(f"dimension mismatch: expected {dim}, got {p.size}")
    return p


def _as_points(points, weights=None) -> tuple[np.ndarray, np.ndarray]:
    pts = np.array(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] == 0:
        raise InputError("need a nonempty (sites, dim) array of points")
    if not np.all(np.isfinite(pts)):
        raise InputError("point coordinates must be finite")
    if weights is None:
        w = np.ones(pts.shape[0], dtype=np.int64)
    else:
        w = np.asarray(weights)
        if w.shape != (pts.shape[0],):
            raise InputError("weights must have one entry per site")
        if not np.all(np.isfinite(w)) or np.any(w != np.round(w)):
            raise InputError("weights must be integers")
        w = w.astype(np.int64)
        if np.any(w <= 0):
            raise InputError("weights must be strictly positive")
    return pts, w


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable weighted point set, optionally labeled with an optimal clustering.

    ``optimal_is_exact`` tells whether ``optimal_cost`` is a true optimum or only
    the cost of the stored labeling (an upper bound on the optimum).
    ``markers`` names special sites (the simplex instance uses ``v_k`` and ``o``).
    """

    points: np.ndarray
    weights: np.ndarray | None = None
    optimal_labels: np.ndarray | None = None
    optimal_cost: float | None = None
    optimal_is_exact: bool = False
    name: str = ""
    markers: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        pts, w = _as_points(self.points, self.weights)
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "weights", _frozen(w))
        if self.optimal_labels is not None:
            labels = np.asarray(self.optimal_labels)
            if labels.shape != (pts.shape[0],):
                raise InputError("optimal_labels must have one entry per site")
            if labels.size and np.any(labels != np.round(labels)):
                raise InputError("labels must be integers")
            labels = labels.astype(np.int64)
            present = np.unique(labels)
            if present[0] != 0 or present[-1] != present.size - 1:
                raise InputError("labels must form a contiguous range 0..k-1")
            object.__setattr__(self, "optimal_labels", _frozen(labels))
        if self.optimal_cost is not None:
            c = float(self.optimal_cost)
            if not np.isfinite(c) or c < 0:
                raise InputError("optimal_cost must be a nonnegative real")
            object.__setattr__(self, "optimal_cost", c)
        for key, idx in self.markers.items():
            if not 0 <= idx < pts.shape[0]:
                raise InputError(f"marker {key!r} points outside the site range")
        object.__setattr__(self, "markers", dict(self.markers))

    @property
    def n_sites(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @cached_property
    def total_weight(self) -> int:
        return int(self.weights.sum())

    @cached_property
    def n_clusters(self) -> int | None:
        if self.optimal_labels is None:
            return None
        return int(self.optimal_labels.max()) + 1

    @cached_property
    def uniform_probs(self) -> np.ndarray:
        """Probability of each site when a point is drawn uniformly at random."""
        return _frozen(self.weights / self.total_weight)

    @cached_property
    def uniform_cdf(self) -> np.ndarray:
        return _frozen(np.cumsum(self.uniform_probs))

    def labeling_cost(self, labels=None) -> float:
        """Cost of a labeling with every part centered at its weighted mean."""
        labels = self.optimal_labels if labels is None else np.asarray(labels)
        if labels is None:
            raise InputError("dataset carries no labels")
        total = 0.0
        for j in np.unique(labels):
            part = labels == j
            total += one_means_cost(self.points[part], self.weights[part])
        return total

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        if (self.optimal_labels is None) != (other.optimal_labels is None):
            return False
        same_labels = self.optimal_labels is None or np.array_equal(
            self.optimal_labels, other.optimal_labels
        )
        return (
            self.points.shape == other.points.shape
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.weights, other.weights)
            and same_labels
        )

    __hash__ = None


def sq_dists(points: np.ndarray, u: np.ndarray) -> np.ndarray:
    # explicit differences; the |a|^2+|b|^2-2ab expansion cancels badly near zero
    if points.shape[1] == 1:
        # one product per row, bitwise equal to the einsum below
        diff = points[:, 0] - u[0]
        return diff * diff
    diff = points - u
    return np.einsum("ij,ij->i", diff, diff)


def _weighted_rows(weights: np.ndarray, rows: np.ndarray) -> np.ndarray:
    # the single reduction used for every potential, so cached and fresh values agree
    return (weights * rows).sum(axis=-1)


class CenterSet:
    """Ordered centers plus a cache of each site's squared distance to its nearest center.

    Single-owner and mutable; :meth:`add` updates the cache in O(sites * dim).
    """

    def __init__(self, X: Dataset, centers=None):
        self._n_sites = X.n_sites
        self._dim = X.dim
        self._centers: list[np.ndarray] = []
        self.sites: list[int | None] = []
        self.min_dist_sq = np.full(X.n_sites, np.inf)
        self.total_potential = np.inf
        if centers is not None:
            for c in np.atleast_2d(np.asarray(centers, dtype=np.float64)):
                self.add(X, c)

    @classmethod
    def from_sites(cls, X: Dataset, sites: Sequence[int]) -> "CenterSet":
        C = cls(X)
        for s in sites:
            C.add_site(X, s)
        return C

    @property
    def centers(self) -> np.ndarray:
        if not self._centers:
            return np.empty((0, self._dim))
        return np.vstack(self._centers)

    @property
    def dim(self) -> int:
        return self._dim

    def __len__(self) -> int:
        return len(self._centers)

    def _check(self, X: Dataset, u) -> np.ndarray:
        if X.n_sites != self._n_sites or X.dim != self._dim:
            raise InputError("center set was built for a different dataset")
        return as_point(u, self._dim)

    def add(self, X: Dataset, u, site: int | None = None) -> "CenterSet":
        u = self._check(X, u)
        return self._append(X, u, site)

    def add_site(self, X: Dataset, site: int) -> "CenterSet":
        """Append dataset site ``site`` (already validated coordinates)."""
        if X.n_sites != self._n_sites:
            raise InputError("center set was built for a different dataset")
        return self._append(X, X.points[site], int(site))

    def _append(self, X: Dataset, u: np.ndarray, site: int | None) -> "CenterSet":
        np.minimum(self.min_dist_sq, sq_dists(X.points, u), out=self.min_dist_sq)
        self.total_potential = float(_weighted_rows(X.weights, self.min_dist_sq))
        self._centers.append(u)
        self.sites.append(site)
        return self

    def copy(self) -> "CenterSet":
        other = object.__new__(CenterSet)
        other._n_sites = self._n_sites
        other._dim = self._dim
        other._centers = list(self._centers)
        other.sites = list(self.sites)
        other.min_dist_sq = self.min_dist_sq.copy()
        other.total_potential = self.total_potential
        return other

    def __repr__(self):
        return f"CenterSet(k={len(self)}, potential={self.total_potential:.6g})"


def cost(X: Dataset, C) -> float:
    """Weighted sum of squared distances from each site to its nearest center.

    ``C`` is a :class:`CenterSet` or an array of centers; either way the value is
    recomputed from the coordinates, not read from a cache.
    """
    centers = C.centers if isinstance(C, CenterSet) else np.atleast_2d(np.asarray(C, dtype=np.float64))
    if centers.size == 0:
        raise InputError("center set is empty")
    if centers.shape[1] != X.dim:
        raise InputError(f"dimension mismatch: data has {X.dim}, centers have {centers.shape[1]}")
    best = np.full(X.n_sites, np.inf)
    for c in centers:
        np.minimum(best, sq_dists(X.points, c), out=best)
    return float(_weighted_rows(X.weights, best))


def _subset(points, weights=None):
    if isinstance(points, Dataset):
        return points.points, points.weights
    pts = np.array(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if pts.size == 0:
        raise InputError("subset is empty")
    return _as_points(pts, weights)


def mean(points, weights=None) -> np.ndarray:
    """Weighted arithmetic mean of a dataset or a (points, weights) subset."""
    pts, w = _subset(points, weights)
    return (w[:, None] * pts).sum(axis=0) / w.sum()


def one_means_cost(points, weights=None) -> float:
    pts, w = _subset(points, weights)
    return float(_weighted_rows(w, sq_dists(pts, mean(pts, w))))


def cost_decomposition(points, z, weights=None) -> tuple[float, float]:
    """Split the cost of serving a subset by one center ``z``.

    Returns ``(cost about the subset's mean, |subset| * |z - mean|^2)``; the two
    parts add up to the cost of the subset with ``z`` as its only center.
    """
    pts, w = _subset(points, weights)
    z = as_point(z, pts.shape[1])
    mu = mean(pts, w)
    opt1 = float(_weighted_rows(w, sq_dists(pts, mu)))
    shift = z - mu
    return opt1, float(w.sum() * (shift @ shift))


def incremental_update(C: CenterSet, X: Dataset, u, site: int | None = None) -> CenterSet:
    """Append ``u`` to ``C`` in place and return it."""
    return C.add(X, u, site=site)


def potentials_with(C: CenterSet, X: Dataset, candidates) -> np.ndarray:
    """Potential of ``C`` plus each candidate row, without touching ``C``."""
    cand = np.atleast_2d(np.asarray(candidates, dtype=np.float64))
    if len(C) == 0:
        raise InputError("center set is empty")
    if cand.shape[1] != X.dim or C.dim != X.dim:
        raise InputError("dimension mismatch between candidates and data")
    diff = X.points[None, :, :] - cand[:, None, :]
    d2 = np.einsum("cij,cij->ci", diff, diff)
    return _weighted_rows(X.weights, np.minimum(C.min_dist_sq, d2))


def candidate_delta(C: CenterSet, X: Dataset, u) -> float:
    """How much the potential drops if ``u`` joins ``C``."""
    u = as_point(u, X.dim)
    return float(C.total_potential - potentials_with(C, X, u)[0])

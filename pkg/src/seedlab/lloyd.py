"""Weighted Lloyd refinement started from a seeded center set."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CenterSet, Dataset, _weighted_rows
from .errors import InputError


@dataclass(frozen=True)
class LloydConfig:
    max_iters: int = 100
    rel_improvement_floor: float = 1e-9
    empty_cluster_policy: str = "respawn_max_cost"

    def __post_init__(self):
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise InputError("max_iters must be a positive integer")
        if not self.rel_improvement_floor >= 0:
            raise InputError("rel_improvement_floor must be nonnegative")
        if self.empty_cluster_policy != "respawn_max_cost":
            raise InputError("only the respawn_max_cost empty-cluster policy is supported")


def _sq_dist_matrix(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centers[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def assign(X: Dataset, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest center per site (lowest index on ties) and the squared distance to it."""
    d2 = _sq_dist_matrix(X.points, centers)
    labels = d2.argmin(axis=1)
    return labels, d2[np.arange(X.n_sites), labels]


def _update_means(X: Dataset, centers: np.ndarray, labels: np.ndarray, d2: np.ndarray) -> np.ndarray:
    k = centers.shape[0]
    w = X.weights.astype(np.float64)
    mass = np.bincount(labels, weights=w, minlength=k)
    sums = np.zeros_like(centers)
    np.add.at(sums, labels, w[:, None] * X.points)
    new = centers.copy()
    filled = mass > 0
    new[filled] = sums[filled] / mass[filled, None]
    site_cost = w * d2
    for j in np.flatnonzero(~filled):
        # the empty center serves nobody, so moving it can only lower the cost
        s = int(np.argmax(site_cost))
        new[j] = X.points[s]
        site_cost[s] = 0.0
    return new


def lloyd_refine(X: Dataset, C, cfg: LloydConfig | None = None) -> tuple[CenterSet, int, list[float]]:
    """Alternate assignment and mean steps.

    Returns the refined centers, the number of iterations performed and the cost
    sequence (initial cost first, one entry per iteration after that).
    """
    cfg = cfg or LloydConfig()
    centers = C.centers if isinstance(C, CenterSet) else np.atleast_2d(np.asarray(C, dtype=np.float64))
    if centers.shape[0] < 1:
        raise InputError("Lloyd needs at least one center")
    if centers.shape[1] != X.dim:
        raise InputError("dimension mismatch between centers and data")

    labels, d2 = assign(X, centers)
    costs = [float(_weighted_rows(X.weights, d2))]
    iters = 0
    while iters < cfg.max_iters:
        centers = _update_means(X, centers, labels, d2)
        labels, d2 = assign(X, centers)
        iters += 1
        prev, new = costs[-1], float(_weighted_rows(X.weights, d2))
        costs.append(new)
        if prev <= 0.0 or (prev - new) / prev < cfg.rel_improvement_floor:
            break
    return CenterSet(X, centers), iters, costs

"""Instance generators and the plain-text dataset format.

File format::

    # comments start with '#'
    d n_sites has_labels
    x_1 ... x_d weight [label]

Coordinates are written with 17 significant digits so that reading a written
file reproduces every double exactly. Two optional directives, ``#@ name <text>``
and ``#@ optimal_cost <value> <exact|upper>``, carry metadata; other readers
treat them as comments.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .core import Dataset
from .errors import InputError, ParseError
from .oracle import brute_force_opt
from .rng import trial_generator

__all__ = [
    "InstanceSpec",
    "simplex_lower_bound",
    "three_point_line",
    "gaussian_mixture",
    "read_dataset",
    "write_dataset",
    "build_instance",
]


def simplex_lower_bound(k: int) -> Dataset:
    """Points on the vertices and centroid of a regular (k-1)-simplex embedded in R^k.

    Sites 0..k-2 are the unit vectors v_1..v_{k-1} with weight k, site k-1 is v_k
    with weight k-1 and site k is the centroid o with weight 1. The optimal
    clustering pairs o with v_k.
    """
    if int(k) != k or k < 4:
        raise InputError("the simplex instance needs k >= 4")
    k = int(k)
    points = np.vstack([np.eye(k), np.full((1, k), 1.0 / k)])
    weights = np.array([k] * (k - 1) + [k - 1, 1])
    labels = np.append(np.arange(k), k - 1)
    # two sites of weights k-1 and 1 at squared distance (k-1)/k
    opt = (k - 1) / k * (k - 1) / k
    return Dataset(
        points,
        weights,
        optimal_labels=labels,
        optimal_cost=opt,
        optimal_is_exact=True,
        name=f"simplex_lower_bound(k={k})",
        markers={"v_k": k - 1, "o": k},
    )


def three_point_line(n: int) -> Dataset:
    """a=-1 (weight n), b=0 (weight 1), c=+1 (weight n) on a line."""
    if int(n) != n or n < 1:
        raise InputError("n must be a positive integer")
    n = int(n)
    X = Dataset([[-1.0], [0.0], [1.0]], [n, 1, n], name=f"three_point_line(n={n})", markers={"a": 0, "b": 1, "c": 2})
    opt, labels = brute_force_opt(X, 2)
    return Dataset(
        X.points,
        X.weights,
        optimal_labels=labels,
        optimal_cost=opt,
        optimal_is_exact=True,
        name=X.name,
        markers=X.markers,
    )


def _grid_means(k: int, d: int) -> np.ndarray:
    side = max(1, math.ceil(k ** (1.0 / d) - 1e-9))
    while side**d < k:
        side += 1
    cells = itertools.islice(itertools.product(range(side), repeat=d), k)
    return np.array(list(cells), dtype=np.float64)


def gaussian_mixture(
    k: int, per_cluster: int, d: int, separation: float, stddev: float, seed: int = 0
) -> Dataset:
    """Spherical Gaussian blobs whose means sit on a grid with spacing ``separation``.

    The stored optimal cost is the cost of the generating labeling, an upper
    bound on the optimum, so ratios measured against it err on the large side.
    """
    for name, v in (("k", k), ("per_cluster", per_cluster), ("d", d)):
        if int(v) != v or v < 1:
            raise InputError(f"{name} must be a positive integer")
    if not separation >= 0 or not stddev > 0:
        raise InputError("separation must be >= 0 and stddev > 0")
    rng = trial_generator(seed, 0, purpose=7)
    means = _grid_means(int(k), int(d)) * separation
    pts = np.repeat(means, per_cluster, axis=0) + rng.normal(0.0, stddev, size=(k * per_cluster, d))
    labels = np.repeat(np.arange(k), per_cluster)
    X = Dataset(pts, optimal_labels=labels)
    return Dataset(
        X.points,
        optimal_labels=X.optimal_labels,
        optimal_cost=X.labeling_cost(),
        optimal_is_exact=False,
        name=f"gaussian_mixture(k={k}, per_cluster={per_cluster}, d={d}, sep={separation}, sd={stddev}, seed={seed})",
    )


# --------------------------------------------------------------------------
# file I/O


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_dataset(X: Dataset, path) -> None:
    has_labels = X.optimal_labels is not None
    lines = []
    if X.name:
        lines.append(f"#@ name {X.name}")
    if X.optimal_cost is not None:
        lines.append(f"#@ optimal_cost {_fmt(X.optimal_cost)} {'exact' if X.optimal_is_exact else 'upper'}")
    lines.append(f"{X.dim} {X.n_sites} {int(has_labels)}")
    for i in range(X.n_sites):
        row = [_fmt(c) for c in X.points[i]] + [str(int(X.weights[i]))]
        if has_labels:
            row.append(str(int(X.optimal_labels[i])))
        lines.append(" ".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_dataset(path) -> Dataset:
    text = Path(path).read_text()
    header = None
    rows: list[tuple[list[float], int, int | None]] = []
    meta: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("#@"):
            parts = line[2:].split(None, 1)
            if parts and parts[0] == "name" and len(parts) == 2:
                meta["name"] = parts[1]
            elif parts and parts[0] == "optimal_cost" and len(parts) == 2:
                fields = parts[1].split()
                try:
                    meta["optimal_cost"] = float(fields[0])
                except (ValueError, IndexError):
                    raise ParseError("bad optimal_cost directive", lineno) from None
                meta["optimal_is_exact"] = len(fields) > 1 and fields[1] == "exact"
            continue
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if header is None:
            if len(tokens) != 3:
                raise ParseError("header must be 'd n_sites has_labels'", lineno)
            try:
                d, n, lab = (int(t) for t in tokens)
            except ValueError:
                raise ParseError("header fields must be integers", lineno) from None
            if d < 1 or n < 1 or lab not in (0, 1):
                raise ParseError("header needs d >= 1, n_sites >= 1, has_labels in {0,1}", lineno)
            header = (d, n, bool(lab))
            continue
        d, n, lab = header
        expected = d + 1 + int(lab)
        if len(tokens) != expected:
            raise ParseError(f"expected {expected} fields (dimension {d}), got {len(tokens)}", lineno)
        try:
            coords = [float(t) for t in tokens[:d]]
        except ValueError:
            raise ParseError("coordinates must be real numbers", lineno) from None
        if not all(math.isfinite(c) for c in coords):
            raise ParseError("coordinates must be finite", lineno)
        try:
            weight = int(tokens[d])
        except ValueError:
            raise ParseError("weight must be an integer", lineno) from None
        if weight <= 0:
            raise ParseError("weight must be positive", lineno)
        label = None
        if lab:
            try:
                label = int(tokens[d + 1])
            except ValueError:
                raise ParseError("label must be an integer", lineno) from None
            if label < 0:
                raise ParseError("label must be nonnegative", lineno)
        rows.append((coords, weight, label))
    if header is None:
        raise ParseError("missing header line")
    d, n, lab = header
    if len(rows) != n:
        raise ParseError(f"header announces {n} sites but the file has {len(rows)}")
    points = np.array([r[0] for r in rows], dtype=np.float64).reshape(n, d)
    weights = np.array([r[1] for r in rows], dtype=np.int64)
    labels = np.array([r[2] for r in rows], dtype=np.int64) if lab else None
    try:
        return Dataset(points, weights, optimal_labels=labels, **meta)
    except InputError as exc:
        raise ParseError(str(exc)) from None


# --------------------------------------------------------------------------

KINDS = ("simplex_lower_bound", "three_point_line", "gaussian_mixture", "from_file")
ALIASES = {"simplex": "simplex_lower_bound", "three_point": "three_point_line", "gaussian": "gaussian_mixture", "file": "from_file"}


@dataclass
class InstanceSpec:
    kind: str
    params: dict = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self):
        self.kind = ALIASES.get(self.kind, self.kind)
        if self.kind not in KINDS:
            raise InputError(f"unknown instance kind {self.kind!r}; choose from {KINDS}")
        if self.kind == "simplex_lower_bound" and int(self.params.get("k", 0)) < 4:
            raise InputError("simplex_lower_bound needs k >= 4")
        if self.kind == "from_file" and not self.params.get("path"):
            raise InputError("from_file needs a path")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params), "seed": self.seed}


def build_instance(spec: InstanceSpec) -> Dataset:
    p = spec.params
    if spec.kind == "simplex_lower_bound":
        return simplex_lower_bound(int(p["k"]))
    if spec.kind == "three_point_line":
        return three_point_line(int(p.get("n", 1000)))
    if spec.kind == "gaussian_mixture":
        return gaussian_mixture(
            int(p.get("k", 10)),
            int(p.get("per_cluster", 50)),
            int(p.get("d", 2)),
            float(p.get("separation", 100.0)),
            float(p.get("stddev", 1.0)),
            seed=int(spec.seed or 0),
        )
    return read_dataset(p["path"])

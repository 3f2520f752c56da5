"""Replay a seeding trace against the dataset's optimal clustering."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..core import Dataset, sq_dists
from ..errors import InputError
from ..seeding import SeedingTrace


@dataclass
class EventSummary:
    wasted: list[bool]
    uncovered: list[int]
    uncovered_cost: list[float]
    covered_clusters: int
    psi: float
    # simplex-only events; None when the dataset has no v_k / o markers
    F_iterations: list[int] | None = None
    G_iterations: list[int] | None = None
    F: bool | None = None
    o_hit: bool | None = None
    extra: dict = field(default_factory=dict)

    @property
    def wasted_count(self) -> int:
        return sum(self.wasted)

    def to_dict(self) -> dict:
        return asdict(self)


def verify_trace_events(trace: SeedingTrace, X: Dataset, markers: dict | None = None) -> EventSummary:
    """Recompute covered sets, wasted flags, u_i, Psi_k and the simplex events from scratch.

    Distances are recomputed from the chosen sites rather than read from the
    trace. ``F`` is the event that the first center taken from v_k's optimal
    cluster within iterations 1..k-1 lies at v_k; ``o_hit`` is not-F together
    with o being chosen in some iteration 2..k-1.
    """
    labels = X.optimal_labels
    if labels is None:
        raise InputError("event replay needs a labeled dataset")
    sites = trace.sites
    if any(not 0 <= s < X.n_sites for s in sites):
        raise InputError("trace refers to sites outside the dataset")
    k = len(sites)
    n_clusters = X.n_clusters
    covered = np.zeros(n_clusters, dtype=bool)
    best = np.full(X.n_sites, np.inf)
    wasted, uncovered, ucosts = [], [], []
    psi = 0.0
    for i, s in enumerate(sites, start=1):
        w_i = bool(covered[labels[s]]) and i > 1
        covered[labels[s]] = True
        best = np.minimum(best, sq_dists(X.points, X.points[s]))
        u_i = int(n_clusters - covered.sum())
        mask = ~covered[labels]
        ucost = float((X.weights[mask] * best[mask]).sum())
        if w_i and u_i:
            psi += ucost / u_i
        wasted.append(w_i)
        uncovered.append(u_i)
        ucosts.append(ucost)
        rec = trace.records[i - 1]
        if rec.covered is not None and rec.covered != tuple(int(j) for j in np.flatnonzero(covered)):
            raise InputError(f"trace disagrees with the dataset labels at iteration {i}")

    summary = EventSummary(wasted, uncovered, ucosts, int(covered.sum()), psi)
    markers = X.markers if markers is None else markers
    if "v_k" in markers and "o" in markers:
        vk, o = markers["v_k"], markers["o"]
        f_it = [i for i, s in enumerate(sites, start=1) if s == vk]
        g_it = [i for i, s in enumerate(sites, start=1) if s == o]
        first_hit = next((i for i, s in enumerate(sites, start=1) if s in (vk, o)), None)
        F = first_hit is not None and first_hit <= k - 1 and sites[first_hit - 1] == vk
        o_hit = (not F) and any(2 <= i <= k - 1 for i in g_it)
        summary.F_iterations, summary.G_iterations = f_it, g_it
        summary.F, summary.o_hit = bool(F), bool(o_hit)
    return summary

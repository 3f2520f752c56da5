"""k-means++ seeding and its greedy, noisy and moderately greedy variants.

All four procedures run through :func:`_run_seeding`, which differs per variant
only in how many D^2 candidates an iteration draws, whether the distribution is
perturbed first, and whether a coin decides between a plain and a greedy step.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .core import CenterSet, Dataset, _weighted_rows
from .errors import DegeneratePotential, InputError
from .rng import ADVERSARY, MIXING, SAMPLE, SeedStreams, as_streams

__all__ = [
    "SamplingDistribution",
    "AdversaryState",
    "PerturbationModel",
    "IterationRecord",
    "SeedingTrace",
    "Algorithm",
    "STRATEGIES",
    "uniform_distribution",
    "d2_distribution",
    "sample",
    "perturb",
    "project_multipliers",
    "greedy_pick",
    "kmeanspp_seed",
    "greedy_seed",
    "noisy_seed",
    "moderately_greedy_seed",
    "noisy_step",
    "moderate_step",
]

SUM_TOL = 1e-12


class SamplingDistribution:
    """Probabilities over dataset sites."""

    __slots__ = ("probs", "_cdf")

    def __init__(self, probs, _validate: bool = True):
        p = np.asarray(probs, dtype=np.float64)
        if _validate:
            if p.ndim != 1 or p.size == 0:
                raise InputError("a distribution needs a nonempty 1-D array")
            if not np.all(np.isfinite(p)) or np.any(p < 0):
                raise InputError("probabilities must be finite and nonnegative")
            if abs(p.sum() - 1.0) > SUM_TOL:
                raise InputError(f"probabilities sum to {p.sum()!r}, not 1")
        self.probs = p
        self._cdf = None

    @property
    def cdf(self) -> np.ndarray:
        if self._cdf is None:
            self._cdf = np.cumsum(self.probs)
        return self._cdf

    def digest(self) -> str:
        return hashlib.blake2b(self.probs.tobytes(), digest_size=8).hexdigest()

    def __len__(self):
        return self.probs.size

    def __repr__(self):
        return f"SamplingDistribution({self.probs!r})"


def uniform_distribution(X: Dataset) -> SamplingDistribution:
    """Each site with probability proportional to its weight."""
    dist = SamplingDistribution(X.uniform_probs, _validate=False)
    dist._cdf = X.uniform_cdf
    return dist


def d2_distribution(X: Dataset, C: CenterSet) -> SamplingDistribution:
    if len(C) == 0:
        raise InputError("D^2 sampling needs at least one center")
    total = C.total_potential
    if total <= 0.0:
        raise DegeneratePotential("all sites coincide with a center")
    return SamplingDistribution(X.weights * C.min_dist_sq / total, _validate=False)


def sample(dist: SamplingDistribution, rng: np.random.Generator, size: int | None = None):
    """Inverse-CDF draw(s); one uniform per returned index."""
    cdf = dist.cdf
    n = cdf.size
    if size is None:
        i = int(cdf.searchsorted(rng.random() * cdf[-1], side="right"))
        return i if i < n else _last_positive(dist)
    idx = cdf.searchsorted(rng.random(size) * cdf[-1], side="right")
    # u*total can round up to total; fall back to the last site with mass
    if idx.max() >= n:
        np.minimum(idx, _last_positive(dist), out=idx)
    return idx


def _last_positive(dist: SamplingDistribution) -> int:
    return int(np.flatnonzero(dist.probs)[-1])


# --------------------------------------------------------------------------
# perturbation adversary


@dataclass
class AdversaryState:
    """What an adversary may look at before choosing its multipliers."""

    iteration: int
    dataset: Dataset
    min_dist_sq: np.ndarray | None
    covered_sites: np.ndarray | None
    history: tuple[int, ...] = ()


Multiplier = Callable[[np.ndarray, AdversaryState], np.ndarray]
STRATEGIES = ("identity", "boost_covered", "boost_far", "random_within_bounds")


@dataclass(frozen=True)
class PerturbationModel:
    """Adversary allowed to move each probability into ``[(1-eps1) p, (1+eps2) p]``.

    ``strategy`` is one of :data:`STRATEGIES` or a callable
    ``(p, state) -> multipliers``. ``top`` is the number of highest-probability
    sites ``boost_far`` boosts (ties go to the lower index).
    """

    eps1: float = 0.0
    eps2: float = 0.0
    strategy: Union[str, Multiplier] = "identity"
    top: int = 1

    def __post_init__(self):
        if not 0.0 <= self.eps1 < 1.0:
            raise InputError("eps1 must lie in [0, 1)")
        if not self.eps2 >= 0.0 or not np.isfinite(self.eps2):
            raise InputError("eps2 must be a nonnegative real")
        if not callable(self.strategy) and self.strategy not in STRATEGIES:
            raise InputError(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")
        if self.top < 1:
            raise InputError("top must be at least 1")

    @property
    def deterministic(self) -> bool:
        return self.strategy != "random_within_bounds"

    @property
    def name(self) -> str:
        return self.strategy if isinstance(self.strategy, str) else getattr(self.strategy, "__name__", "custom")

    def multipliers(self, p: np.ndarray, state: AdversaryState | None, rng) -> np.ndarray:
        lo, hi = 1.0 - self.eps1, 1.0 + self.eps2
        s = self.strategy
        if s == "identity":
            return np.ones_like(p)
        if s == "boost_covered":
            if state is None or state.covered_sites is None:
                raise InputError("boost_covered needs a labeled dataset")
            return np.where(state.covered_sites, hi, lo)
        if s == "boost_far":
            m = np.full_like(p, lo)
            m[np.argsort(-p, kind="stable")[: self.top]] = hi
            return m
        if s == "random_within_bounds":
            if rng is None:
                raise InputError("random_within_bounds needs a random generator")
            return rng.uniform(lo, hi, size=p.size)
        return np.clip(np.asarray(s(p, state), dtype=np.float64), lo, hi)


def project_multipliers(p: np.ndarray, m: np.ndarray, eps1: float, eps2: float) -> np.ndarray:
    """Turn multipliers inside the band into a distribution inside the band.

    The surplus (or deficit) of ``sum(m * p)`` is taken from every entry in
    proportion to its remaining room toward the lower (upper) band edge.
    """
    q = m * p
    # sum((m-1) p) rather than sum(q) - 1: no cancellation when the moved mass is tiny
    residual = ((m - 1.0) * p).sum()
    if residual > 0:
        slack = (m - (1.0 - eps1)) * p
    elif residual < 0:
        slack = ((1.0 + eps2) - m) * p
    else:
        return q
    room = slack.sum()
    if room <= 0.0:
        return q
    q = q - residual * slack / room
    return np.clip(q, (1.0 - eps1) * p, (1.0 + eps2) * p, out=q)


def perturb(
    model: PerturbationModel,
    p: SamplingDistribution,
    state: AdversaryState | None = None,
    rng: np.random.Generator | None = None,
) -> SamplingDistribution:
    if model.strategy == "identity":
        return p
    probs = p.probs
    m = model.multipliers(probs, state, rng)
    q = project_multipliers(probs, m, model.eps1, model.eps2)
    tol = 1e-12 * probs
    bad = (q < (1.0 - model.eps1) * probs - tol) | (q > (1.0 + model.eps2) * probs + tol)
    if np.any(bad) or abs(q.sum() - 1.0) > SUM_TOL:
        raise AssertionError("perturbation left the feasible band")  # cannot happen by construction
    return SamplingDistribution(q, _validate=False)


# --------------------------------------------------------------------------
# traces


@dataclass
class IterationRecord:
    iteration: int
    site: int
    candidates: tuple[int, ...]
    kind: str  # first | d2 | degenerate
    dist_hash: str
    potential: float
    greedy_step: bool | None = None
    wasted: bool | None = None
    covered: tuple[int, ...] | None = None
    uncovered: int | None = None
    uncovered_cost: float | None = None


@dataclass
class SeedingTrace:
    algorithm: str
    k: int
    records: list[IterationRecord] = field(default_factory=list)
    psi: float | None = None

    @property
    def sites(self) -> list[int]:
        return [r.site for r in self.records]

    @property
    def labeled(self) -> bool:
        return bool(self.records) and self.records[0].covered is not None

    @property
    def wasted_count(self) -> int | None:
        if not self.labeled:
            return None
        return sum(bool(r.wasted) for r in self.records)

    @property
    def degenerate_iterations(self) -> list[int]:
        return [r.iteration for r in self.records if r.kind == "degenerate"]

    def records_as_dicts(self) -> list[dict]:
        return [asdict(r) for r in self.records]

    def to_dict(self) -> dict:
        return {"algorithm": self.algorithm, "k": self.k, "psi": self.psi, "records": self.records_as_dicts()}


# --------------------------------------------------------------------------
# the seeding loop


def _potentials_for_sites(C: CenterSet, X: Dataset, sites: np.ndarray) -> np.ndarray:
    cand = X.points[sites]
    diff = X.points[None, :, :] - cand[:, None, :]
    d2 = np.einsum("cij,cij->ci", diff, diff)
    return _weighted_rows(X.weights, np.minimum(C.min_dist_sq, d2))


def greedy_pick(C: CenterSet, X: Dataset, candidates) -> int:
    """Candidate site minimizing the potential after it joins ``C``; ties to the lowest index."""
    uniq = np.unique(np.asarray(candidates, dtype=np.int64))
    if uniq.size == 1:
        return int(uniq[0])
    return int(uniq[np.argmin(_potentials_for_sites(C, X, uniq))])


class _CoverageTracker:
    """Online covered/wasted bookkeeping against the dataset's optimal labels."""

    def __init__(self, X: Dataset):
        self.labels = X.optimal_labels
        self.weights = X.weights
        self.n_clusters = X.n_clusters
        self.covered = np.zeros(self.n_clusters, dtype=bool)
        self.psi = 0.0

    def site_mask(self) -> np.ndarray:
        return self.covered[self.labels]

    def update(self, site: int, iteration: int, C: CenterSet) -> dict:
        label = self.labels[site]
        wasted = bool(self.covered[label]) and iteration > 1
        self.covered[label] = True
        uncovered = int(self.n_clusters - self.covered.sum())
        mask = ~self.covered[self.labels]
        ucost = float(_weighted_rows(self.weights[mask], C.min_dist_sq[mask])) if uncovered else 0.0
        if wasted and uncovered:
            self.psi += ucost / uncovered
        return {
            "wasted": wasted,
            "covered": tuple(int(j) for j in np.flatnonzero(self.covered)),
            "uncovered": uncovered,
            "uncovered_cost": ucost,
        }


def _check_k(k: int):
    if int(k) != k or k < 1:
        raise InputError("k must be a positive integer")


def _run_seeding(
    X: Dataset,
    k: int,
    rng,
    *,
    algorithm: str,
    ell: int = 1,
    p_plain: float = 1.0,
    model: PerturbationModel | None = None,
    greedy_first: bool = False,
) -> tuple[CenterSet, SeedingTrace]:
    _check_k(k)
    if int(ell) != ell or ell < 1:
        raise InputError("ell must be a positive integer")
    if not 0.0 <= p_plain <= 1.0:
        raise InputError("mixing probability must lie in [0, 1]")
    streams: SeedStreams = as_streams(rng)
    labeled = X.optimal_labels is not None
    if model is not None and model.strategy == "boost_covered" and not labeled:
        raise InputError("boost_covered needs a labeled dataset")
    tracker = _CoverageTracker(X) if labeled else None
    C = CenterSet(X)
    trace = SeedingTrace(algorithm=algorithm, k=int(k))
    history: list[int] = []

    for i in range(1, int(k) + 1):
        greedy_step = None
        if i == 1:
            kind, p = "first", uniform_distribution(X)
            draws = ell if greedy_first else 1
        elif C.total_potential <= 0.0:
            kind, p, draws = "degenerate", uniform_distribution(X), 1
        else:
            kind, p = "d2", d2_distribution(X, C)
            if p_plain >= 1.0:
                draws = 1
            elif p_plain <= 0.0:
                draws, greedy_step = ell, True
            else:
                greedy_step = bool(streams.stream(i, MIXING).random() >= p_plain)
                draws = ell if greedy_step else 1
            if algorithm == "moderate":
                greedy_step = bool(greedy_step)
            else:
                greedy_step = None

        q = p
        if model is not None and kind != "degenerate":
            state = AdversaryState(
                iteration=i,
                dataset=X,
                min_dist_sq=None if i == 1 else C.min_dist_sq,
                covered_sites=tracker.site_mask() if tracker is not None else None,
                history=tuple(history),
            )
            q = perturb(model, p, state, streams.stream(i, ADVERSARY))

        gen = streams.stream(i, SAMPLE)
        if draws == 1:
            site = sample(q, gen)
            cand = (site,)
        else:
            drawn = sample(q, gen, draws)
            site = greedy_pick(C, X, drawn)
            cand = tuple(drawn.tolist())
        C.add_site(X, site)
        history.append(site)
        extra = tracker.update(site, i, C) if tracker is not None else {}
        trace.records.append(
            IterationRecord(
                iteration=i,
                site=site,
                candidates=cand,
                kind=kind,
                dist_hash=q.digest(),
                potential=C.total_potential,
                greedy_step=greedy_step,
                **extra,
            )
        )
    if tracker is not None:
        trace.psi = tracker.psi
    return C, trace


def kmeanspp_seed(X: Dataset, k: int, rng=None) -> tuple[CenterSet, SeedingTrace]:
    """Plain k-means++: a weighted-uniform first center, then one D^2 draw per iteration."""
    return _run_seeding(X, k, rng, algorithm="plain")


def greedy_seed(X: Dataset, k: int, ell: int, rng=None, greedy_first: bool = False) -> tuple[CenterSet, SeedingTrace]:
    """Greedy k-means++: draw ``ell`` D^2 candidates and keep the one that lowers the potential most.

    The first center is a single uniform draw unless ``greedy_first`` is set, in
    which case ``ell`` uniform candidates compete as well (the "always pick the
    current minimizer" heuristic in the limit of large ``ell``).
    """
    return _run_seeding(X, k, rng, algorithm="greedy", ell=ell, p_plain=0.0, greedy_first=greedy_first)


def noisy_seed(X: Dataset, k: int, model: PerturbationModel, rng=None) -> tuple[CenterSet, SeedingTrace]:
    """k-means++ where every distribution, the uniform first one included, passes the adversary.

    Iterations with zero potential fall back to an unperturbed uniform draw.
    """
    return _run_seeding(X, k, rng, algorithm="noisy", model=model)


def moderately_greedy_seed(X: Dataset, k: int, ell: int, p_mix: float, rng=None) -> tuple[CenterSet, SeedingTrace]:
    """With probability ``p_mix`` a plain D^2 step, otherwise a greedy ``ell``-candidate step."""
    if not 0.0 <= p_mix <= 1.0:
        raise InputError("p_mix must lie in [0, 1]")
    return _run_seeding(X, k, rng, algorithm="moderate", ell=ell, p_plain=p_mix)


# --------------------------------------------------------------------------
# single steps on a frozen center set (used for per-step frequency checks)


def noisy_step(
    X: Dataset,
    C: CenterSet,
    model: PerturbationModel,
    rng: np.random.Generator,
    state: AdversaryState | None = None,
) -> int:
    p = d2_distribution(X, C)
    q = perturb(model, p, state, rng)
    return sample(q, rng)


def moderate_step(X: Dataset, C: CenterSet, ell: int, p_mix: float, rng: np.random.Generator) -> int:
    p = d2_distribution(X, C)
    if rng.random() < p_mix:
        return sample(p, rng)
    return greedy_pick(C, X, sample(p, rng, ell))


# --------------------------------------------------------------------------


VARIANTS = ("plain", "greedy", "noisy", "moderate")


@dataclass(frozen=True)
class Algorithm:
    """A seeding variant and its parameters, runnable as one unit."""

    name: str = "plain"
    ell: int = 1
    eps1: float = 0.0
    eps2: float = 0.0
    strategy: Union[str, Multiplier] = "identity"
    p_mix: float = 0.5
    greedy_first: bool = False

    def __post_init__(self):
        if self.name not in VARIANTS:
            raise InputError(f"unknown algorithm {self.name!r}; choose from {VARIANTS}")
        if int(self.ell) != self.ell or self.ell < 1:
            raise InputError("ell must be a positive integer")
        if not 0.0 <= self.p_mix <= 1.0:
            raise InputError("p_mix must lie in [0, 1]")
        if self.name == "noisy":
            self.model  # validates eps and strategy

    @property
    def model(self) -> PerturbationModel:
        return PerturbationModel(self.eps1, self.eps2, self.strategy)

    def seed(self, X: Dataset, k: int, rng=None) -> tuple[CenterSet, SeedingTrace]:
        if self.name == "plain":
            return kmeanspp_seed(X, k, rng)
        if self.name == "greedy":
            return greedy_seed(X, k, self.ell, rng, greedy_first=self.greedy_first)
        if self.name == "noisy":
            return noisy_seed(X, k, self.model, rng)
        return moderately_greedy_seed(X, k, self.ell, self.p_mix, rng)

    def describe(self) -> dict:
        d = {"name": self.name}
        if self.name in ("greedy", "moderate"):
            d["ell"] = self.ell
        if self.name == "greedy" and self.greedy_first:
            d["greedy_first"] = True
        if self.name == "moderate":
            d["p_mix"] = self.p_mix
        if self.name == "noisy":
            d.update(eps1=self.eps1, eps2=self.eps2, strategy=self.model.name)
        return d

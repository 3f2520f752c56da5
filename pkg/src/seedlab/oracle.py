"""Ground truth for small instances and the abstract number-removal process.

Nothing here approximates silently: enumerations that would exceed their
:class:`EnumerationBudget` raise :class:`~seedlab.errors.BudgetExceeded`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .core import CenterSet, Dataset, potentials_with
from .errors import BudgetExceeded, InputError
from .rng import trial_generator
from .seeding import AdversaryState, Algorithm, d2_distribution, perturb, uniform_distribution

__all__ = [
    "EnumerationBudget",
    "brute_force_opt",
    "exact_expected_cost",
    "phi_i_closed_form",
    "RemovalExperimentConfig",
    "RemovalResult",
    "removal_experiment",
    "heavy_numbers",
]


@dataclass(frozen=True)
class EnumerationBudget:
    max_outcomes: int = 10**7

    def __post_init__(self):
        if self.max_outcomes < 1:
            raise InputError("max_outcomes must be positive")


def _budget(b) -> EnumerationBudget:
    if b is None:
        return EnumerationBudget()
    if isinstance(b, EnumerationBudget):
        return b
    return EnumerationBudget(int(b))


# --------------------------------------------------------------------------
# optimal clustering by enumerating set partitions


def stirling2(n: int, k: int) -> int:
    row = [1] + [0] * k
    for i in range(1, n + 1):
        for j in range(min(i, k), 0, -1):
            row[j] = j * row[j] + row[j - 1]
        row[0] = 0
    return row[k]


def brute_force_opt(X: Dataset, k: int, budget=None) -> tuple[float, np.ndarray]:
    """Exact optimal k-means cost and a labeling attaining it.

    Sites are split into at most ``k`` nonempty parts via restricted growth
    strings; each part is served by its weighted mean. Partial assignments whose
    cost already reaches the incumbent are pruned.
    """
    budget = _budget(budget)
    if int(k) != k or k < 1:
        raise InputError("k must be a positive integer")
    m = X.n_sites
    if k >= m:
        return 0.0, np.arange(m)
    n_partitions = sum(stirling2(m, j) for j in range(1, k + 1))
    if n_partitions > budget.max_outcomes:
        raise BudgetExceeded(f"{n_partitions} partitions of {m} sites exceed the budget of {budget.max_outcomes}")

    pts, w = X.points, X.weights.astype(np.float64)
    # per-part running sums: weight, weighted coordinate sum, weighted squared norm
    W = np.zeros(k)
    S = np.zeros((k, X.dim))
    Q = np.zeros(k)
    sq = np.einsum("ij,ij->i", pts, pts)
    labels = np.zeros(m, dtype=np.int64)
    best = [math.inf, None]

    def part_cost(j):
        return Q[j] - (S[j] @ S[j]) / W[j] if W[j] > 0 else 0.0

    def rec(i, used, partial):
        if partial > best[0] * (1 + 1e-9) + 1e-12:
            return
        if i == m:
            exact = X.labeling_cost(labels)
            if exact < best[0]:
                best[0], best[1] = exact, labels.copy()
            return
        # the remaining sites must still be able to open unused parts in order
        for j in range(min(used + 1, k)):
            before = part_cost(j)
            W[j] += w[i]
            S[j] += w[i] * pts[i]
            Q[j] += w[i] * sq[i]
            labels[i] = j
            rec(i + 1, max(used, j + 1), partial - before + part_cost(j))
            W[j] -= w[i]
            S[j] -= w[i] * pts[i]
            Q[j] -= w[i] * sq[i]

    rec(0, 0, 0.0)
    return float(best[0]), best[1]


# --------------------------------------------------------------------------
# exact expectations of the seeding procedures


def _greedy_selection(C: CenterSet, X: Dataset, p: np.ndarray, ell: int) -> np.ndarray:
    """Law of the greedy winner among ``ell`` i.i.d. draws from ``p``.

    Sites are ranked by (potential after joining, index); the winner has rank r
    iff every draw ranks r or worse and not all rank strictly worse.
    """
    support = np.flatnonzero(p > 0)
    if len(C) == 0:
        diff = X.points[None, :, :] - X.points[support][:, None, :]
        pot = (X.weights * np.einsum("cij,cij->ci", diff, diff)).sum(axis=-1)
    else:
        pot = potentials_with(C, X, X.points[support])
    order = support[np.lexsort((support, pot))]
    mass = p[order]
    tail = np.cumsum(mass[::-1])[::-1]  # mass ranked at or below each position
    below = np.append(tail[1:], 0.0)
    out = np.zeros_like(p)
    out[order] = tail**ell - below**ell
    return out


def exact_expected_cost(X: Dataset, k: int, algorithm: Algorithm | str = "plain", budget=None) -> float:
    """Expected final seeding potential, by walking the whole outcome tree."""
    budget = _budget(budget)
    if isinstance(algorithm, str):
        algorithm = Algorithm(algorithm)
    if int(k) != k or k < 1:
        raise InputError("k must be a positive integer")
    model = algorithm.model if algorithm.name == "noisy" else None
    if model is not None and not model.deterministic:
        raise InputError("a randomized adversary has no enumerable outcome tree")
    labels = X.optimal_labels
    if model is not None and model.strategy == "boost_covered" and labels is None:
        raise InputError("boost_covered needs a labeled dataset")
    ell = algorithm.ell
    visited = [0]

    def step_law(C: CenterSet, i: int, history: tuple[int, ...]) -> np.ndarray:
        if i == 1:
            p = uniform_distribution(X)
            if algorithm.name == "greedy" and algorithm.greedy_first:
                return _greedy_selection(C, X, p.probs, ell)
        else:
            p = d2_distribution(X, C)
        if model is not None:
            covered = None
            if labels is not None:
                hit = np.zeros(X.n_clusters, dtype=bool)
                hit[labels[list(history)]] = True
                covered = hit[labels]
            state = AdversaryState(i, X, None if i == 1 else C.min_dist_sq, covered, history)
            return perturb(model, p, state).probs
        if i == 1 or algorithm.name == "plain" or algorithm.name == "noisy":
            return p.probs
        greedy = _greedy_selection(C, X, p.probs, ell)
        if algorithm.name == "greedy":
            return greedy
        return algorithm.p_mix * p.probs + (1 - algorithm.p_mix) * greedy

    def rec(C: CenterSet, i: int, history: tuple[int, ...]) -> float:
        visited[0] += 1
        if visited[0] > budget.max_outcomes:
            raise BudgetExceeded(f"outcome tree exceeds the budget of {budget.max_outcomes} nodes")
        if i > k:
            return C.total_potential
        if i > 1 and C.total_potential <= 0.0:
            return 0.0  # every later center is free
        law = step_law(C, i, history)
        total = 0.0
        for s in np.flatnonzero(law > 0):
            child = C.copy().add_site(X, int(s))
            total += law[s] * rec(child, i + 1, history + (int(s),))
        return total

    return float(rec(CenterSet(X), 1, ()))


# --------------------------------------------------------------------------


def phi_i_closed_form(k: int, i: int) -> float:
    """Potential of the simplex instance after i-1 centers on distinct v_j (j < k)."""
    if int(k) != k or k < 4:
        raise InputError("the simplex instance needs k >= 4")
    if int(i) != i or not 2 <= i <= k:
        raise InputError("i must lie in 2..k (at least one center)")
    return 2 * ((k - i + 1) * k - 1) + 1 - 1 / k


# --------------------------------------------------------------------------
# number removal process


ADVERSARIES = ("remove_min", "remove_max", "none")
DECREMENTS = ("none", "halve")


def heavy_numbers(z: int) -> np.ndarray:
    """One number equal to z/2, the other z-1 sharing the remaining z/2."""
    a = np.full(z, (z / 2) / (z - 1))
    a[0] = z / 2
    return a


@dataclass
class RemovalExperimentConfig:
    """z nonnegative numbers with average 1, of which ``steps`` are removed.

    Each step is adversarial with probability ``eps`` (``adversary`` picks the
    victim) and proportional otherwise. ``eps = 1`` is accepted to force the
    all-adversarial worst case.
    """

    z: int
    steps: int
    eps: float = 0.0
    numbers: np.ndarray | None = None
    adversary: str = "remove_min"
    decrement: str = "none"
    trials: int = 1000

    def __post_init__(self):
        if int(self.z) != self.z or self.z < 2:
            raise InputError("z must be an integer >= 2")
        if self.numbers is None:
            self.numbers = np.ones(self.z)
        self.numbers = np.asarray(self.numbers, dtype=np.float64)
        if self.numbers.shape != (self.z,):
            raise InputError("numbers must have exactly z entries")
        if np.any(self.numbers < 0) or not np.all(np.isfinite(self.numbers)):
            raise InputError("numbers must be finite and nonnegative")
        if abs(self.numbers.sum() - self.z) > 1e-9 * self.z:
            raise InputError("numbers must average to 1")
        if not 0.0 <= self.eps <= 1.0:
            raise InputError("eps must lie in [0, 1]")
        if int(self.steps) != self.steps or not 1 <= self.steps <= self.z - 1:
            raise InputError("steps must lie in 1..z-1")
        if self.adversary not in ADVERSARIES:
            raise InputError(f"adversary must be one of {ADVERSARIES}")
        if self.decrement not in DECREMENTS:
            raise InputError(f"decrement must be one of {DECREMENTS}")
        if self.trials < 1:
            raise InputError("trials must be positive")

    @property
    def threshold(self) -> float:
        if self.eps >= 1.0:
            return math.inf
        return max(18.0, 24 * self.eps / (1 - self.eps) ** 2)

    def regime(self) -> tuple[str, float]:
        """Which upper bound on the expected final average applies, and its value."""
        z, ell = self.z, self.steps
        if ell < z / 2:
            return "small_steps", 2.0
        if z / math.log(z) >= self.threshold:
            return "large_steps", 4 / (1 - self.eps) * math.log(z) + 2
        return "trivial", float(min(z, self.threshold * math.log(z)))


@dataclass
class RemovalResult:
    mean_final_average: float
    stderr: float
    finals: np.ndarray
    removed_sums: np.ndarray
    remaining_sums: np.ndarray
    regime: str
    bound: float
    summary: dict = field(default_factory=dict)


_ADVERSARY_CODE = {"none": 0, "remove_min": 1, "remove_max": 2}


@njit(cache=True)
def _pull(t_sum, t_min, t_max, t_cnt, node):
    a = 2 * node
    b = a + 1
    t_sum[node] = t_sum[a] + t_sum[b]
    t_min[node] = min(t_min[a], t_min[b])
    t_max[node] = max(t_max[a], t_max[b])
    t_cnt[node] = t_cnt[a] + t_cnt[b]


@njit(cache=True)
def _set_leaf(t_sum, t_min, t_max, t_cnt, size, leaf, value, alive):
    node = leaf + size
    if alive:
        t_sum[node] = value
        t_min[node] = value
        t_max[node] = value
        t_cnt[node] = 1
    else:
        t_sum[node] = 0.0
        t_min[node] = np.inf
        t_max[node] = -np.inf
        t_cnt[node] = 0
    node //= 2
    while node >= 1:
        _pull(t_sum, t_min, t_max, t_cnt, node)
        node //= 2


@njit(cache=True)
def _kth_alive(t_cnt, size, k):
    node = 1
    while node < size:
        left = t_cnt[2 * node]
        if k >= left:
            k -= left
            node = 2 * node + 1
        else:
            node = 2 * node
    return node - size


@njit(cache=True)
def _proportional(t_sum, t_cnt, size, u):
    total = t_sum[1]
    if total <= 0.0:
        # all survivors are zero: uniform among them
        return _kth_alive(t_cnt, size, int(u * t_cnt[1]))
    target = u * total
    node = 1
    while node < size:
        left = t_sum[2 * node]
        # never step into an empty right subtree, which rounding could otherwise reach
        if target >= left and t_sum[2 * node + 1] > 0.0:
            target -= left
            node = 2 * node + 1
        else:
            node = 2 * node
    return node - size


@njit(cache=True)
def _argext(tree, size):
    node = 1
    while node < size:
        # follow the child holding the root's extreme value; left wins ties
        if tree[2 * node] == tree[node]:
            node = 2 * node
        else:
            node = 2 * node + 1
    return node - size


@njit(cache=True)
def _removal_kernel(numbers, uniforms, eps, adversary, halve, finals, removed_out, remaining_out):
    z = numbers.size
    size = 1
    while size < z:
        size *= 2
    b_sum = np.zeros(2 * size)
    b_min = np.full(2 * size, np.inf)
    b_max = np.full(2 * size, -np.inf)
    b_cnt = np.zeros(2 * size, dtype=np.int64)
    for i in range(z):
        b_sum[size + i] = numbers[i]
        b_min[size + i] = numbers[i]
        b_max[size + i] = numbers[i]
        b_cnt[size + i] = 1
    for node in range(size - 1, 0, -1):
        _pull(b_sum, b_min, b_max, b_cnt, node)
    rows, steps = uniforms.shape[0], uniforms.shape[1]
    for r in range(rows):
        t_sum, t_min, t_max, t_cnt = b_sum.copy(), b_min.copy(), b_max.copy(), b_cnt.copy()
        removed = 0.0
        for s in range(steps):
            if adversary != 0 and uniforms[r, s, 0] < eps:
                leaf = _argext(t_min if adversary == 1 else t_max, size)
            else:
                leaf = _proportional(t_sum, t_cnt, size, uniforms[r, s, 1])
            removed += t_sum[size + leaf]
            _set_leaf(t_sum, t_min, t_max, t_cnt, size, leaf, 0.0, False)
            if halve:
                victim = _kth_alive(t_cnt, size, int(uniforms[r, s, 2] * t_cnt[1]))
                _set_leaf(t_sum, t_min, t_max, t_cnt, size, victim, 0.5 * t_sum[size + victim], True)
        remaining = 0.0
        for i in range(z):
            remaining += t_sum[size + i]
        finals[r] = remaining / (z - steps)
        removed_out[r] = removed
        remaining_out[r] = remaining


def removal_experiment(cfg: RemovalExperimentConfig, seed: int = 0, chunk_size: int = 2500) -> RemovalResult:
    """Simulate the removal process; each chunk of trials has its own random stream.

    Per step and trial three uniforms are drawn: the adversarial coin, the
    proportional pick, and the decrement victim.
    """
    n = int(cfg.trials)
    finals, removed, remaining = np.empty(n), np.empty(n), np.empty(n)
    for chunk, start in enumerate(range(0, n, chunk_size)):
        rows = min(chunk_size, n - start)
        uniforms = trial_generator(seed, chunk).random((rows, cfg.steps, 3))
        sl = slice(start, start + rows)
        _removal_kernel(
            cfg.numbers,
            uniforms,
            float(cfg.eps),
            _ADVERSARY_CODE[cfg.adversary],
            cfg.decrement == "halve",
            finals[sl],
            removed[sl],
            remaining[sl],
        )
    regime, bound = cfg.regime()
    std = float(finals.std(ddof=1)) if n > 1 else 0.0
    return RemovalResult(
        mean_final_average=float(finals.mean()),
        stderr=std / math.sqrt(n),
        finals=finals,
        removed_sums=removed,
        remaining_sums=remaining,
        regime=regime,
        bound=bound,
        summary={
            "trials": n,
            "mean": float(finals.mean()),
            "std": std,
            "min": float(finals.min()),
            "median": float(np.median(finals)),
            "max": float(finals.max()),
            "regime": regime,
            "bound": bound,
        },
    )

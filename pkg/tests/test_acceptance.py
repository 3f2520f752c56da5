"""Acceptance criteria 1-10.

Each test carries a ``criterion`` marker; the conftest prints one PASS/FAIL line
per criterion at the end of the session, with the measured quantities.
"""

import math
import time

import numpy as np
import pytest
from scipy import stats

from seedlab.core import CenterSet, Dataset, cost, cost_decomposition
from seedlab.harness import ExperimentConfig, run_experiment
from seedlab.harness.cli import main as cli_main
from seedlab.harness.stats import band_consistent, two_proportion_greater, welch_greater
from seedlab.instances import InstanceSpec, gaussian_mixture, simplex_lower_bound, three_point_line
from seedlab.oracle import RemovalExperimentConfig, exact_expected_cost, heavy_numbers, phi_i_closed_form, removal_experiment
from seedlab.rng import SeedStreams
from seedlab.seeding import (
    STRATEGIES,
    Algorithm,
    AdversaryState,
    PerturbationModel,
    d2_distribution,
    greedy_seed,
    kmeanspp_seed,
    moderate_step,
    noisy_seed,
    noisy_step,
    perturb,
    sample,
)

Z99 = stats.norm.ppf(0.995)


class Clock:
    def __init__(self, limit):
        self.limit, self.t0 = limit, time.perf_counter()

    @property
    def elapsed(self):
        return time.perf_counter() - self.t0

    def check(self, detail):
        e = self.elapsed
        detail(f"{e:.2f}s of {self.limit}s")
        assert e < self.limit, f"took {e:.1f}s, limit {self.limit}s"


@pytest.mark.criterion(1, "decomposition identity, 1000 random (C, z)")
def test_decomposition_identity(detail):
    clock = Clock(1.0)
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        m, d = int(rng.integers(1, 51)), int(rng.integers(1, 9))
        pts = rng.normal(scale=rng.uniform(0.1, 100), size=(m, d))
        w = rng.integers(1, 6, m)
        z = rng.normal(scale=50, size=d)
        opt1, move = cost_decomposition(pts, z, w)
        direct = cost(Dataset(pts, w), [z])
        rel = abs(opt1 + move - direct) / max(direct, 1e-300)
        worst = max(worst, rel)
    detail(f"max rel err {worst:.1e}")
    assert worst <= 1e-9
    clock.check(detail)


@pytest.mark.criterion(2, "closed-form simplex potential, k = 4..10")
def test_phi_closed_form(detail):
    clock = Clock(1.0)
    worst = 0.0
    for k in range(4, 11):
        X = simplex_lower_bound(k)
        for i in range(2, k + 1):
            direct = cost(X, CenterSet.from_sites(X, range(i - 1)))
            worst = max(worst, abs(phi_i_closed_form(k, i) - direct) / direct)
    anchor = cost(simplex_lower_bound(4), CenterSet.from_sites(simplex_lower_bound(4), [0]))
    detail(f"max rel err {worst:.1e}; anchor {anchor}")
    assert worst <= 1e-9
    assert anchor == pytest.approx(22.75, rel=1e-12) and phi_i_closed_form(4, 2) == pytest.approx(22.75, rel=1e-12)
    clock.check(detail)


@pytest.mark.criterion(3, "exact expectation 1.3 on {0,1,3}, k=2, and 1e5-trial Monte Carlo")
def test_exact_enumeration_agreement(detail):
    clock = Clock(10.0)
    X = Dataset([[0.0], [1.0], [3.0]])
    exact = exact_expected_cost(X, 2, "plain")
    assert exact == pytest.approx(1.3, abs=1e-12)
    root = SeedStreams(31)
    n = 100_000
    costs = np.fromiter((kmeanspp_seed(X, 2, root.for_trial(t))[0].total_potential for t in range(n)), float, n)
    half = Z99 * costs.std(ddof=1) / math.sqrt(n)
    detail(f"exact {exact:.12g}; MC {costs.mean():.5f} +- {half:.5f}")
    assert abs(costs.mean() - 1.3) <= half
    clock.check(detail)


@pytest.mark.criterion(4, "three-point line: full greedy picks b and pays ~n; plain pays < n/10")
def test_three_point_phenomenon(detail):
    clock = Clock(30.0)
    n = 1000
    X = three_point_line(n)
    b = X.markers["b"]
    root = SeedStreams(4)
    firsts, finals = [], []
    for t in range(1000):
        C, trace = greedy_seed(X, 2, 100_000, root.for_trial(t), greedy_first=True)
        firsts.append(trace.sites[0])
        finals.append(C.total_potential)
    frac_b = np.mean(np.array(firsts) == b)
    plain = np.mean([kmeanspp_seed(X, 2, SeedStreams(5).for_trial(t))[0].total_potential for t in range(1000)])
    detail(f"first=b in {frac_b:.1%}; min greedy cost {min(finals):.6g}; plain mean {plain:.4g}")
    assert frac_b >= 0.99
    assert min(finals) >= n * (1 - 1e-9)
    assert plain < n / 10
    clock.check(detail)


@pytest.mark.criterion(5, "simplex k=32: centroid event and cost ratio grow with ell")
def test_simplex_mechanism(detail):
    clock = Clock(300.0)
    reports = {}
    for ell in (1, 4, 16):
        cfg = ExperimentConfig(
            InstanceSpec("simplex", {"k": 32}),
            algorithm=Algorithm("greedy", ell=ell),
            trials=5000,
            base_seed=5,
            track_events=True,
        )
        reports[ell] = run_experiment(cfg)
    freq = {ell: rep.aggregates["freq_o_hit"] for ell, rep in reports.items()}
    p14 = two_proportion_greater(freq[4]["hits"], 5000, freq[1]["hits"], 5000)
    p416 = two_proportion_greater(freq[16]["hits"], 5000, freq[4]["hits"], 5000)
    p_ratio = welch_greater(reports[16].column("ratio"), reports[1].column("ratio"))
    detail(
        "o_hit " + ", ".join(f"ell={e}: {f['freq']:.4f}" for e, f in freq.items())
        + f"; p-values {p14:.1e}, {p416:.1e}; ratio p {p_ratio:.1e}"
    )
    assert p14 < 0.01 and p416 < 0.01
    assert p_ratio < 0.01
    clock.check(detail)


def _records(trace):
    return [(r.site, r.candidates, r.kind, r.dist_hash, r.potential) for r in trace.records]


@pytest.mark.criterion(6, "zero-noise noisy seeding is trace-identical to k-means++")
def test_noisy_reduction(detail):
    clock = Clock(5.0)
    instances = [simplex_lower_bound(10), gaussian_mixture(8, 20, 3, 40.0, 1.0, seed=1)]
    runs = 0
    for run in range(100):
        X = instances[run % 2]
        k = 10 if run % 2 == 0 else 8
        strategy = STRATEGIES[run % len(STRATEGIES)]
        rng = SeedStreams(600).for_trial(run)
        plain = _records(kmeanspp_seed(X, k, rng)[1])
        noisy = _records(noisy_seed(X, k, PerturbationModel(0.0, 0.0, strategy), rng)[1])
        assert plain == noisy, f"run {run} ({strategy}) diverged"
        runs += 1
    detail(f"{runs} runs identical")
    clock.check(detail)


@pytest.mark.criterion(7, "noisy seeding stays bounded and inside the (eps1, eps2) band")
def test_noisy_boundedness(detail):
    clock = Clock(300.0)
    spec = InstanceSpec("gaussian", {"k": 16, "per_cluster": 50, "d": 2, "separation": 100.0, "stddev": 1.0}, seed=0)
    ceiling = 50 * math.log(16) ** 2
    means = {}
    for strategy in STRATEGIES:
        algo = Algorithm("noisy", eps1=0.5, eps2=0.5, strategy=strategy)
        rep = run_experiment(ExperimentConfig(spec, algo, trials=2000, base_seed=7, track_events=True))
        assert rep.opt.is_upper_bound
        means[strategy] = rep.aggregates["ratio"]["mean"]
    detail("mean ratios " + ", ".join(f"{s} {m:.2f}" for s, m in means.items()) + f" (ceiling {ceiling:.0f})")
    assert max(means.values()) <= ceiling

    # per-step sampling frequencies on a frozen center set
    X = gaussian_mixture(16, 50, 2, 100.0, 1.0, seed=0)
    C, trace = kmeanspp_seed(X, 5, 77)
    covered = np.zeros(X.n_clusters, dtype=bool)
    covered[X.optimal_labels[trace.sites]] = True
    state = AdversaryState(6, X, C.min_dist_sq, covered[X.optimal_labels], tuple(trace.sites))
    p = d2_distribution(X, C).probs
    draws = 100_000
    failures = []
    for strategy in STRATEGIES:
        model = PerturbationModel(0.5, 0.5, strategy)
        rng = np.random.default_rng(8)
        if model.deterministic:
            picks = sample(perturb(model, d2_distribution(X, C), state), rng, draws)
        else:
            picks = np.fromiter((noisy_step(X, C, model, rng, state) for _ in range(draws)), np.int64, draws)
        counts = np.bincount(picks, minlength=X.n_sites)
        ok = band_consistent(counts, draws, 0.5 * p, 1.5 * p) & ((p > 0) | (counts == 0))
        if not ok.all():
            failures.append(strategy)
    detail(f"band violations: {failures or 'none'}")
    assert not failures
    clock.check(detail)


@pytest.mark.criterion(8, "removal process, z=1024, eps=0.1, 1e4 trials")
def test_removal_experiment(detail):
    clock = Clock(60.0)
    z, eps = 1024, 0.1
    large_bound = 4 / (1 - eps) * math.log(z) + 2
    notes = []
    for label, numbers in (("ones", None), ("heavy", heavy_numbers(z))):
        a = removal_experiment(
            RemovalExperimentConfig(z, z // 2, eps, numbers, "remove_min", "halve", trials=10_000), seed=81
        )
        b = removal_experiment(
            RemovalExperimentConfig(z, z // 4, eps, numbers, "remove_min", "halve", trials=10_000), seed=82
        )
        assert a.regime == "large_steps" and b.regime == "small_steps"
        assert a.mean_final_average <= large_bound
        assert b.mean_final_average <= 2 + 3 * b.stderr
        notes.append(f"{label}: A(z/2) {a.mean_final_average:.4f} <= {large_bound:.2f}, A(z/4) {b.mean_final_average:.4f} <= 2")
    c = removal_experiment(RemovalExperimentConfig(z, z // 2, eps, None, "remove_min", "none", trials=10_000), seed=83)
    notes.append(f"all-ones range [{c.finals.min()}, {c.finals.max()}]")
    detail("; ".join(notes))
    assert np.all(np.abs(c.finals - 1.0) <= 1e-12)
    clock.check(detail)


@pytest.mark.criterion(9, "moderately greedy step frequencies inside the sandwich")
def test_moderate_sandwich(detail):
    clock = Clock(10.0)
    X = Dataset([[0.0], [1.0], [3.0]])
    C = CenterSet.from_sites(X, [0])
    p = d2_distribution(X, C).probs
    p_mix, ell = 0.5, 2
    lower, upper = p_mix * p, ((1 - p_mix) * ell + p_mix) * p
    rng = np.random.default_rng(9)
    n = 100_000
    counts = np.bincount([moderate_step(X, C, ell, p_mix, rng) for _ in range(n)], minlength=3)
    freq = counts / n
    detail("freq " + ", ".join(f"{f:.4f} in [{lo:.3f}, {hi:.3f}]" for f, lo, hi in zip(freq, lower, upper)))
    ok = band_consistent(counts, n, lower, upper) & ((p > 0) | (counts == 0))
    assert ok.all()
    clock.check(detail)


@pytest.mark.criterion(10, "CLI reruns produce byte-identical JSONL")
def test_cli_determinism(tmp_path, detail):
    commands = {
        "run": ["run", "--instance", "simplex", "--k", "12", "--algo", "greedy", "--ell", "4", "--trials", "300", "--seed", "3", "--lloyd"],
        "noisy": ["run", "--instance", "gaussian", "--k", "5", "--algo", "noisy", "--eps1", "0.3", "--eps2", "0.6", "--strategy", "random_within_bounds", "--trials", "100", "--seed", "4"],
        "sweep": ["sweep", "--instance", "simplex", "--k", "8", "--algo", "moderate", "--ell", "3", "--axis", "pmix=0,0.5,1", "--trials", "100", "--seed", "5"],
        "removal": ["removal", "--z", "256", "--eps", "0.2", "--trials", "500", "--seed", "6"],
    }
    compared = 0
    for name, argv in commands.items():
        outs = []
        for rep, extra in enumerate(([], [], ["--workers", "3"] if argv[0] != "removal" else [])):
            out = tmp_path / f"{name}-{rep}"
            assert cli_main(argv + extra + ["--out", str(out)]) == 0
            outs.append(out)
        files = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*.jsonl"))
        assert files
        for rel in files:
            blobs = {(o / rel).read_bytes() for o in outs}
            assert len(blobs) == 1, f"{name}/{rel} differs between reruns"
            compared += 1
    detail(f"{compared} JSONL files identical across 3 reruns each")

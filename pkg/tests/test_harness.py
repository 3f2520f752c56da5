import json

import numpy as np
import pytest

from seedlab.core import Dataset
from seedlab.errors import ConfigError, InputError
from seedlab.harness import (
    ExperimentConfig,
    aggregate,
    resolve_opt,
    run_experiment,
    sweep,
    verify_trace_events,
)
from seedlab.harness.stats import (
    band_consistent,
    clopper_pearson,
    mean_ci,
    two_proportion_greater,
    welch_greater,
)
from seedlab.instances import InstanceSpec, gaussian_mixture, simplex_lower_bound, write_dataset
from seedlab.lloyd import LloydConfig
from seedlab.rng import SeedStreams
from seedlab.seeding import Algorithm, IterationRecord, SeedingTrace, kmeanspp_seed, noisy_seed, PerturbationModel


def manual_trace(sites):
    recs = [IterationRecord(i, s, (s,), "d2", "", 0.0) for i, s in enumerate(sites, start=1)]
    return SeedingTrace("manual", len(sites), recs)


# --------------------------------------------------------------------------
# event replay


def test_distinct_clusters_waste_nothing():
    X = simplex_lower_bound(5)
    ev = verify_trace_events(manual_trace([0, 1, 2, 3, 4]), X)
    assert ev.wasted_count == 0 and ev.psi == 0.0
    assert ev.covered_clusters == 5
    assert ev.uncovered == [4, 3, 2, 1, 0]


def test_centroid_before_vertex_is_flagged():
    X = simplex_lower_bound(6)
    o, vk = X.markers["o"], X.markers["v_k"]
    ev = verify_trace_events(manual_trace([0, 1, o, vk, 2, 3]), X)
    assert ev.G_iterations == [3] and ev.F_iterations == [4]
    assert ev.F is False and ev.o_hit is True
    assert ev.wasted == [False, False, False, True, False, False]


def test_vertex_first_sets_F():
    X = simplex_lower_bound(6)
    o, vk = X.markers["o"], X.markers["v_k"]
    ev = verify_trace_events(manual_trace([vk, o, 0, 1, 2, 3]), X)
    assert ev.F is True and ev.o_hit is False


def test_centroid_in_last_iteration_does_not_count():
    X = simplex_lower_bound(5)
    o = X.markers["o"]
    ev = verify_trace_events(manual_trace([0, 1, 2, 3, o]), X)
    assert ev.F is False and ev.o_hit is False


def test_wasted_iteration_psi_by_hand():
    # clusters {0,1} and {2}; the second center wastes an iteration while {2} is uncovered
    X = Dataset([[0.0], [1.0], [5.0]], optimal_labels=[0, 0, 1])
    ev = verify_trace_events(manual_trace([0, 1, 2]), X)
    assert ev.wasted == [False, True, False]
    assert ev.psi == pytest.approx(16.0)


@pytest.mark.parametrize("seed", range(15))
def test_online_psi_and_wasted_identity(seed):
    X = gaussian_mixture(8, 15, 2, 6.0, 1.5, seed=seed)
    C, trace = noisy_seed(X, 8, PerturbationModel(0.3, 0.6, "boost_covered"), seed)
    ev = verify_trace_events(trace, X)
    assert ev.psi == pytest.approx(trace.psi, rel=1e-9, abs=1e-12)
    assert ev.wasted_count == trace.wasted_count == 8 - ev.covered_clusters


def test_label_mismatch_is_an_input_error():
    X = simplex_lower_bound(4)
    _, trace = kmeanspp_seed(X, 4, 0)
    relabeled = Dataset(X.points, X.weights, optimal_labels=[0, 0, 1, 2, 3])
    with pytest.raises(InputError):
        verify_trace_events(trace, relabeled)
    with pytest.raises(InputError):
        verify_trace_events(trace, Dataset(X.points, X.weights))
    with pytest.raises(InputError):
        verify_trace_events(manual_trace([0, 9]), X)


# --------------------------------------------------------------------------
# experiments


def simplex_cfg(k, algo=None, trials=200, **kw):
    return ExperimentConfig(InstanceSpec("simplex", {"k": k}), algo or Algorithm(), trials=trials, track_events=True, **kw)


def test_ratios_with_exact_opt_never_beat_one():
    rep = run_experiment(simplex_cfg(8, Algorithm("greedy", ell=3), trials=300, base_seed=2))
    assert rep.opt.source == "stored" and not rep.opt.is_upper_bound
    assert min(r["ratio"] for r in rep.rows) >= 1 - 1e-9
    assert all(r["ratio_is_upper_bound"] is False for r in rep.rows)


def test_aggregates_recompute_from_rows(tmp_path):
    rep = run_experiment(simplex_cfg(6, trials=150, out_dir=tmp_path, lloyd=LloydConfig()))
    assert aggregate(rep.rows) == rep.aggregates
    rows = [json.loads(line) for line in (tmp_path / "trials.jsonl").read_text().splitlines()]
    assert aggregate(rows) == json.loads((tmp_path / "summary.json").read_text())["aggregates"]
    r = rows[0]
    assert list(r)[:2] == ["trial", "seed_cost"]
    assert {"lloyd_cost", "ratio", "ratio_is_upper_bound", "wasted", "psi", "events"} <= set(r)
    assert set(r["events"]) == {"F", "o_hit"}
    assert all(r["lloyd_cost"] <= r["seed_cost"] + 1e-12 for r in rows)


def test_rows_match_direct_seeding():
    cfg = simplex_cfg(5, Algorithm("greedy", ell=2), trials=20, base_seed=7)
    rep = run_experiment(cfg)
    root = SeedStreams(7)
    X = simplex_lower_bound(5)
    for row in rep.rows:
        C, _ = Algorithm("greedy", ell=2).seed(X, 5, root.for_trial(row["trial"]))
        assert row["seed_cost"] == C.total_potential


def test_runs_are_byte_identical_across_workers(tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    run_experiment(simplex_cfg(7, trials=120, base_seed=3, out_dir=a))
    run_experiment(simplex_cfg(7, trials=120, base_seed=3, out_dir=b))
    run_experiment(simplex_cfg(7, trials=120, base_seed=3, out_dir=c, workers=3))
    for name in ("trials.jsonl", "summary.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes() == (c / name).read_bytes()


def test_config_validation(tmp_path):
    with pytest.raises(ConfigError):
        simplex_cfg(5, trials=0)
    with pytest.raises(ConfigError):
        simplex_cfg(5, base_seed=-1)
    path = tmp_path / "u.txt"
    write_dataset(Dataset(np.arange(20.0).reshape(-1, 1)), path)
    with pytest.raises(ConfigError):
        run_experiment(ExperimentConfig(InstanceSpec("file", {"path": path}), k=3, trials=5, track_events=True))
    with pytest.raises(ConfigError):
        run_experiment(ExperimentConfig(InstanceSpec("file", {"path": path}), trials=5))


def test_opt_sources(tmp_path):
    tiny = Dataset([[0.0], [1.0], [3.0], [7.0]])
    assert resolve_opt(tiny, 2).source == "oracle"
    g = gaussian_mixture(3, 10, 2, 50.0, 1.0)
    ref = resolve_opt(g, 3)
    assert ref.source == "labeling" and ref.is_upper_bound
    assert resolve_opt(g, 4).value is None
    rep = run_experiment(ExperimentConfig(InstanceSpec("gaussian", {"k": 3, "per_cluster": 10}), trials=20))
    assert all(r["ratio_is_upper_bound"] for r in rep.rows)


def test_unlabeled_rows_have_null_events(tmp_path):
    path = tmp_path / "u.txt"
    write_dataset(Dataset(np.arange(20.0).reshape(-1, 1)), path)
    rep = run_experiment(ExperimentConfig(InstanceSpec("file", {"path": path}), k=3, trials=5))
    assert all(r["events"] == {"F": None, "o_hit": None} and r["wasted"] is None for r in rep.rows)
    assert "ratio" not in rep.rows[0]  # 20 sites: no oracle, no labels


def test_greedy_raises_centroid_event_on_simplex_k20():
    one = run_experiment(simplex_cfg(20, Algorithm("greedy", ell=1), trials=2000, base_seed=11))
    eight = run_experiment(simplex_cfg(20, Algorithm("greedy", ell=8), trials=2000, base_seed=11))
    a, b = one.aggregates["freq_o_hit"], eight.aggregates["freq_o_hit"]
    assert two_proportion_greater(b["hits"], b["n"], a["hits"], a["n"]) < 0.01
    assert 1 < one.aggregates["ratio"]["mean"] < np.inf


def test_sweep_over_ell_has_increasing_trend(tmp_path):
    res = sweep(simplex_cfg(32, Algorithm("greedy"), trials=400, base_seed=5, out_dir=tmp_path), "ell", [1, 2, 4, 8, 16])
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert lines[0].startswith("ell,trials,mean_seed_cost")
    assert len(lines) == 6
    assert (tmp_path / "ell=16" / "trials.jsonl").exists()
    rho, p = res.trend("ratio")
    assert rho > 0 and p < 0.01


def test_sweep_over_eps2_reports_ratios(tmp_path):
    spec = InstanceSpec("gaussian", {"k": 6, "per_cluster": 20, "separation": 60.0})
    cfg = ExperimentConfig(spec, Algorithm("noisy", eps1=0.0, strategy="boost_covered"), trials=100, track_events=True)
    res = sweep(cfg, "eps2", ["0", "0.5", "1"])
    assert res.values == [0.0, 0.5, 1.0]
    assert all(row["mean_ratio"] > 0 and row["ratio_is_upper_bound"] for row in res.table)


def test_sweep_validation():
    with pytest.raises(ConfigError):
        sweep(simplex_cfg(5), "ell", [])
    with pytest.raises(ConfigError):
        sweep(simplex_cfg(5), "colour", [1])
    with pytest.raises(InputError):
        sweep(simplex_cfg(5), "ell", [1, 0])


# --------------------------------------------------------------------------
# statistics helpers


def test_mean_ci():
    out = mean_ci([1.0, 2.0, 3.0, None])
    assert out["n"] == 3 and out["mean"] == 2.0 and out["std"] == 1.0
    assert out["ci_low"] < 2.0 < out["ci_high"]
    assert mean_ci([])["mean"] is None


def test_tests_have_the_right_direction():
    assert two_proportion_greater(60, 100, 40, 100) < 0.01
    assert two_proportion_greater(40, 100, 60, 100) > 0.99
    rng = np.random.default_rng(0)
    assert welch_greater(rng.normal(1, 1, 500), rng.normal(0, 3, 500)) < 0.01


def test_clopper_pearson_and_band():
    lo, hi = clopper_pearson([0, 50, 100], 100, 0.95)
    assert lo[0] == 0.0 and hi[2] == 1.0 and lo[1] < 0.5 < hi[1]
    ok = band_consistent([10, 500], 1000, [0.005, 0.6], [0.02, 0.7])
    assert ok.tolist() == [True, False]

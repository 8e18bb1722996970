import numpy as np
import pytest

from gdc._rng import TAG_TRIAL, derive_seed
from gdc.calibrate import GdcConfig
from gdc.episodes import EpisodeProtocol
from gdc.search import (
    GridRange,
    SearchSpace,
    TrialStatus,
    confirm_top,
    dogs_space,
    median_basis,
    mini_cub_space,
    read_trial_log,
    run_trial,
    sample_config,
    tune,
)
from gdc.stats import DistanceMetric, MetricKind
from gdc.synth import SynthSpec, generate

PROTO = EpisodeProtocol(3, 1, 5)


@pytest.fixture(scope="module")
def medium_world():
    spec = SynthSpec(dim=16, num_base=8, num_validation=5, num_novel=3,
                     points_per_class=50, novel_offset_scale=0.5, seed=15)
    return generate(spec)[0]


GOOD = GdcConfig(beta=1.0, m=1.0, k=2, alpha1=0.0, n_samples=20, seed=1)
BAD = GdcConfig(beta=1.0, m=0.0, k=8, alpha1=500.0, n_samples=20, seed=2)


def test_grid_range_values():
    assert np.allclose(GridRange(0.0, 10.0, 0.25).values(), np.arange(0, 10.25, 0.25))
    assert np.allclose(GridRange(2, 8, 2).values(), [2, 4, 6, 8])
    with pytest.raises(ValueError):
        GridRange(0, 1, 0)
    with pytest.raises(ValueError):
        GridRange(5, 1, 1)


def test_degenerate_space_returns_single_point():
    space = SearchSpace(
        beta=GridRange(0.5, 0.5, 1.0),
        m=GridRange(1.0, 1.0, 1.0),
        k=GridRange(4, 4, 1),
        n=GridRange(100, 100, 1),
        alpha1=GridRange(10.0, 10.0, 1.0),
        alpha2_multipliers=(2.0,),
    )
    cfg = sample_config(space, trial_seed=99)
    assert (cfg.beta, cfg.m, cfg.k, cfg.n_samples) == (0.5, 1.0, 4, 100)
    assert cfg.alpha1 == 10.0 and cfg.alpha2 == 20.0
    assert cfg.seed == 99


def test_sampled_values_lie_on_grids():
    space = dogs_space(30)
    for trial in range(200):
        cfg = sample_config(space, derive_seed(TAG_TRIAL, 1, trial))
        assert cfg.beta in space.beta.values()
        assert cfg.m in space.m.values()
        assert cfg.k in space.k.values().astype(int)
        assert cfg.n_samples in space.n.values().astype(int)
        assert cfg.alpha1 in space.alpha1.values()
        assert cfg.alpha1 == 0 or cfg.alpha2 / cfg.alpha1 in space.alpha2_multipliers


def test_sample_config_deterministic():
    space = mini_cub_space(64)
    assert sample_config(space, 1234) == sample_config(space, 1234)


def test_thousand_trials_cover_many_distinct_configs():
    # collision-count oracle, frozen for master seed 0 on the wide preset
    space = mini_cub_space(64)
    seen = set()
    for i in range(1000):
        cfg = sample_config(space, derive_seed(TAG_TRIAL, 0, i))
        seen.add((cfg.beta, cfg.m, cfg.k, cfg.alpha1, cfg.alpha2, cfg.n_samples))
    assert len(seen) >= 300
    assert len(seen) == 1000


def test_delta_drawn_only_for_delta_metric():
    space = SearchSpace(
        metrics=(DistanceMetric(kind=MetricKind.SQUARED_DELTA, delta=1.0),),
        delta=GridRange(0.5, 1.5, 0.25),
    )
    deltas = {sample_config(space, s).metric.delta for s in range(40)}
    assert deltas <= set(np.arange(0.5, 1.75, 0.25))
    assert len(deltas) > 1


def test_first_trial_never_pruned(medium_world):
    rec = run_trial(medium_world, BAD, PROTO, base_seed=1, median_at_100=None,
                    tasks_per_trial=20, prune_after=10)
    assert rec.status is TrialStatus.COMPLETE
    assert len(rec.accuracies) == 20
    assert rec.median_at_decision is None


def test_bad_trial_pruned_at_exactly_the_checkpoint(medium_world):
    good = run_trial(medium_world, GOOD, PROTO, base_seed=1, median_at_100=None,
                     trial_index=0, tasks_per_trial=20, prune_after=10)
    basis = median_basis([good], prune_after=10)
    assert basis == good.mean_at(10)
    bad = run_trial(medium_world, BAD, PROTO, base_seed=2, median_at_100=basis,
                    trial_index=1, tasks_per_trial=20, prune_after=10)
    assert bad.status is TrialStatus.PRUNED
    assert len(bad.accuracies) == 10
    assert bad.median_at_decision == basis
    assert bad.final_validation_mean is None


def test_infeasible_config_marks_trial_failed(medium_world):
    # alpha2 large enough that no jitter repairs the shrunk covariance
    broken = GdcConfig(beta=1.0, m=1.0, k=4, alpha1=0.0, alpha2=5000.0, n_samples=20, seed=3)
    rec = run_trial(medium_world, broken, PROTO, base_seed=9, median_at_100=None,
                    tasks_per_trial=6, prune_after=6)
    assert rec.status is TrialStatus.FAILED
    assert rec.final_validation_mean is None
    assert "factorization" in (rec.error or "")
    assert median_basis([rec], prune_after=6) is None


def test_completed_trial_stores_full_mean(medium_world):
    rec = run_trial(medium_world, GOOD, PROTO, base_seed=3, median_at_100=0.0,
                    tasks_per_trial=20, prune_after=10)
    assert rec.status is TrialStatus.COMPLETE
    assert rec.final_validation_mean == pytest.approx(np.mean(rec.accuracies))
    assert len(rec.accuracies) == 20


def test_median_basis_over_finished_trials(medium_world):
    recs = []
    for i, seed in enumerate((4, 5, 6)):
        recs.append(run_trial(medium_world, GOOD.with_seed(seed), PROTO, base_seed=seed,
                              median_at_100=None, trial_index=i,
                              tasks_per_trial=12, prune_after=10))
    expect = float(np.median([r.mean_at(10) for r in recs]))
    assert median_basis(recs, prune_after=10) == expect
    assert median_basis([], prune_after=10) is None


def small_space():
    return SearchSpace(
        beta=GridRange(1.0, 1.0, 1.0),
        m=GridRange(0.0, 2.0, 1.0),
        k=GridRange(2, 4, 2),
        n=GridRange(5, 10, 5),
        alpha1=GridRange(0.0, 1.0, 1.0),
        alpha2_multipliers=(0.0, 1.0),
    )


def test_tune_writes_log_and_resumes_identically(small_world, tmp_path):
    ds, _ = small_world
    space = small_space()
    log_a = tmp_path / "a.jsonl"
    log_b = tmp_path / "b.jsonl"
    full = tune(ds, space, PROTO, num_trials=5, master_seed=9, log_path=log_a,
                tasks_per_trial=4, prune_after=2)
    tune(ds, space, PROTO, num_trials=3, master_seed=9, log_path=log_b,
         tasks_per_trial=4, prune_after=2)
    resumed = tune(ds, space, PROTO, num_trials=5, master_seed=9, log_path=log_b,
                   tasks_per_trial=4, prune_after=2)
    assert log_a.read_text() == log_b.read_text()
    assert [r.config for r in full] == [r.config for r in resumed]
    assert [r.accuracies for r in full] == [r.accuracies for r in resumed]
    logged = read_trial_log(log_a)
    assert [r.trial_index for r in logged] == list(range(5))


def test_tune_rejects_mismatched_log(small_world, tmp_path):
    ds, _ = small_world
    log = tmp_path / "log.jsonl"
    tune(ds, small_space(), PROTO, num_trials=2, master_seed=9, log_path=log,
         tasks_per_trial=4, prune_after=2)
    with pytest.raises(ValueError, match="does not match"):
        tune(ds, small_space(), PROTO, num_trials=3, master_seed=10, log_path=log,
             tasks_per_trial=4, prune_after=2)


def test_tune_rejects_overfull_log(small_world, tmp_path):
    ds, _ = small_world
    log = tmp_path / "log.jsonl"
    tune(ds, small_space(), PROTO, num_trials=3, master_seed=9, log_path=log,
         tasks_per_trial=4, prune_after=2)
    with pytest.raises(ValueError, match="more than"):
        tune(ds, small_space(), PROTO, num_trials=2, master_seed=9, log_path=log,
             tasks_per_trial=4, prune_after=2)


def test_tune_resource_bound(small_world, tmp_path):
    ds, _ = small_world
    records = tune(ds, small_space(), PROTO, num_trials=4, master_seed=11,
                   log_path=tmp_path / "log.jsonl", tasks_per_trial=4, prune_after=2)
    assert sum(len(r.accuracies) for r in records) <= 4 * 4


def test_confirm_top_orders_by_novel_mean(medium_world):
    recs = []
    for i, cfg in enumerate((GOOD, BAD.with_seed(7), GOOD.with_seed(8))):
        recs.append(run_trial(medium_world, cfg, PROTO, base_seed=20 + i, median_at_100=None,
                              trial_index=i, tasks_per_trial=6, prune_after=6))
    out = confirm_top(medium_world, recs, PROTO, top_n=3, novel_tasks=10, base_seed=1)
    assert len(out) == 3
    means = [c.novel.mean for c in out]
    assert means == sorted(means, reverse=True)
    assert {c.trial_index for c in out} == {0, 1, 2}


def test_confirm_top_requires_enough_completed(medium_world):
    rec = run_trial(medium_world, GOOD, PROTO, base_seed=30, median_at_100=None,
                    tasks_per_trial=4, prune_after=4)
    with pytest.raises(ValueError, match="completed"):
        confirm_top(medium_world, [rec], PROTO, top_n=3, novel_tasks=5, base_seed=1)

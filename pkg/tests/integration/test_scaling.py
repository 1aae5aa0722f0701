import pytest

from rollguard.bench import BenchPlan, fit_k_log_n, fit_log_curve, run_bench
from rollguard.models.proofs import max_path_length


@pytest.mark.slow
def test_queries_stay_logarithmic_to_2700_leaves(make_monitor):

    monitor = make_monitor(head_tracking="leaf")
    plan = BenchPlan(
        operation="query", objects=25, until_leaves=2700, scales=8, samples=5, payload_bytes=32
    )
    df = run_bench(monitor, plan)

    assert df["pad_leaves"].iloc[-1] >= 2700
    # 25 objects at two leaves each
    assert (df["pad_leaves"] % 50 == 0).all()
    assert df["proof_hashes"].max() <= 12
    for leaves, hashes in zip(df["pad_leaves"], df["proof_hashes"]):
        assert hashes <= max_path_length(int(leaves))

    fit = fit_log_curve(df["pad_leaves"], df["proof_hashes"])
    assert fit.r2 >= 0.9
    assert 0.5 < fit.slope < 1.5

    # checking a query answer costs a + b * log2(n)
    fit = fit_log_curve(df["pad_leaves"], df["verify_latency_us"], method="huber")
    assert fit.r2 >= 0.9
    assert fit.slope > 0

    fit = fit_log_curve(df["pad_leaves"], df["latency_p50_ms"], method="huber")
    assert fit.slope > 0


@pytest.mark.slow
def test_lineage_latency_fits_k_log_n(make_monitor):

    monitor = make_monitor(head_tracking="leaf")
    plan = BenchPlan(
        operation="lineage", objects=5, until_leaves=1200, scales=6, samples=3, payload_bytes=32
    )
    df = run_bench(monitor, plan)

    # one event per object per release, ten leaves per release
    assert list(df["lineage_events"]) == list(df["pad_leaves"] // 2)

    fit = fit_k_log_n(df["lineage_events"], df["pad_leaves"], df["latency_p50_ms"])
    assert fit.r2 >= 0.9
    assert fit.slope > 0

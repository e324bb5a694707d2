import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fbnc import metrics
from fbnc.metrics import DomainError, MetricsCollector, aggregate
from fbnc.simulator import SimConfig, run, scripted_run


# -- closed forms --------------------------------------------------------------
def test_pi_examples():
    assert metrics.analytic_pi(0, 0.25, 0.5) == pytest.approx(2 / 3)
    assert metrics.analytic_pi(2, 0.25, 0.5) == pytest.approx(2 / 27)
    assert metrics.vq_ratio(0.25, 0.5) == pytest.approx(1 / 3)


@given(st.floats(0.01, 0.9), st.floats(0.05, 0.99))
def test_pi_normalizes(lam, gap):
    mu = lam + gap * (1 - lam)
    total = sum(metrics.analytic_pi(k, lam, mu) for k in range(5000))
    assert total == pytest.approx(1, abs=1e-6) or metrics.vq_ratio(lam, mu) > 0.99


def test_vq_mean_examples():
    assert metrics.analytic_vq_mean(0.25, 0.5) == pytest.approx(0.5)
    assert metrics.analytic_vq_mean(0.4, 0.5) == pytest.approx(2.0)
    assert metrics.analytic_vq_mean(0.0, 0.5) == 0


@given(st.floats(0.01, 0.45))
def test_vq_mean_is_mean_of_pi(lam):
    mu = 0.5
    direct = sum(k * metrics.analytic_pi(k, lam, mu) for k in range(20000))
    assert metrics.analytic_vq_mean(lam, mu) == pytest.approx(direct, rel=1e-6)


def test_dj_examples():
    assert metrics.analytic_Dj_mean(0.475, 0.5) == pytest.approx(380)
    assert metrics.analytic_Dj_mean(0.25, 0.5) == pytest.approx(2.0)
    assert metrics.analytic_Dj_mean(0.0, 0.5) == 0


def test_dj_exact_sum():
    lam, mu = 0.4, 0.5

    def g(u):
        return u / (mu - lam)

    direct = sum(
        metrics.analytic_pi(k, lam, mu) * (mu * g(k) + (1 - mu) * g(k + 1)) for k in range(4000)
    )
    assert metrics.analytic_Dj_mean_exact(lam, mu) == pytest.approx(direct, rel=1e-9)
    assert metrics.analytic_Dj_mean_exact(lam, mu) * 0.8 == pytest.approx(metrics.analytic_Dj_mean(lam, mu))


def test_first_passage_examples():
    assert metrics.analytic_first_passage(4, 0.25, 0.5) == pytest.approx(16)
    assert metrics.analytic_first_passage(0, 0.25, 0.5) == 0
    assert metrics.analytic_first_passage(1, 0.4, 0.5) == pytest.approx(10)


@pytest.mark.parametrize(
    "fn", [metrics.analytic_vq_mean, metrics.analytic_Dj_mean, metrics.analytic_Dj_mean_exact]
)
def test_unstable_rejected(fn):
    with pytest.raises(DomainError):
        fn(0.5, 0.5)


def test_unstable_rejected_for_pi_and_passage():
    with pytest.raises(DomainError):
        metrics.analytic_pi(0, 0.6, 0.5)
    with pytest.raises(DomainError):
        metrics.analytic_first_passage(1, 0.6, 0.5)


# -- fits ----------------------------------------------------------------------
def test_growth_fit_exact_powers():
    xs = [2.0, 5.0, 10.0, 20.0]
    assert metrics.growth_fit([(x, 3 * x) for x in xs]) == pytest.approx(1.0)
    assert metrics.growth_fit([(x, 0.4 * x**2) for x in xs]) == pytest.approx(2.0)


def test_growth_fit_errors():
    with pytest.raises(DomainError):
        metrics.growth_fit([(1, 1), (2, 2)])
    with pytest.raises(DomainError):
        metrics.growth_fit([(1, 1), (2, 0), (3, 3)])


def test_quadratic_coefficient_exact():
    assert metrics.quadratic_coefficient([(x, 0.37 * x * x) for x in (10, 20, 50)]) == pytest.approx(0.37)


def test_total_variation_of_exact_law_is_tail_only():
    lam, mu = 0.25, 0.5
    p = np.array([metrics.analytic_pi(k, lam, mu) for k in range(40)])
    assert metrics.total_variation(p, lam, mu) < 1e-12
    assert metrics.total_variation(np.array([1.0]), lam, mu) == pytest.approx(1 / 3)


def test_first_passage_mc_from_zero_and_one():
    rng = np.random.default_rng(0)
    assert (metrics.first_passage_mc(0, 0.25, 0.5, 10, rng) == 0).all()
    # from state 1 with no arrival pressure each slot drains with prob mu
    t = metrics.first_passage_mc(1, 0.0, 0.5, 20000, rng)
    assert t.mean() == pytest.approx(2.0, rel=0.05)


# -- aggregation -----------------------------------------------------------------
TABLE1 = ([1, 1, 1, 0, 1, 0], [(1, 0), (1, 1), (0, 1), (0, 1), (1, 0), (1, 1)])


def table1_traces():
    cfg = SimConfig(lam=0.25, mu=0.5, n=2, policy="alg2b", coding="next_unseen", q=2, slots=6, warmup=0)
    return scripted_run(cfg, *TABLE1).traces


def test_aggregate_table1_queue_mean():
    s = aggregate(table1_traces(), 2)
    assert s.mean_phys_q_pre == pytest.approx(1.5)
    assert s.mean_phys_q == pytest.approx((1 + 1 + 1 + 1 + 1 + 0) / 6)


def test_aggregate_matches_streaming_collector():
    cfg = SimConfig(lam=0.4, mu=0.5, n=2, slots=3000, seed=3, warmup=200)
    res = run(cfg, keep_traces=True)
    s = aggregate(res.traces, 2, warmup=200)
    assert s.mean_phys_q == res.summary.mean_phys_q
    assert s.mean_delivery_delay == res.summary.mean_delivery_delay
    assert s.mean_time_to_empty == res.summary.mean_time_to_empty


def test_all_zero_trace():
    col = MetricsCollector(2)
    for t in range(1, 11):
        col.end_slot(t, 0, 0, [0, 0])
    s = col.summary()
    assert s.mean_phys_q == 0 and s.mean_virt_q_avg == 0
    assert s.busy_periods == 0 and math.isnan(s.mean_busy_period)


def test_empty_stats_marker():
    col = MetricsCollector(1, warmup=5)
    for t in range(1, 4):
        col.end_slot(t, 0, 0, [0])
    assert col.summary().empty


def test_busy_periods_complete_runs_only():
    col = MetricsCollector(1)
    for t, q in enumerate([1, 0, 1, 1, 0, 1, 1, 1, 0, 1], 1):
        col.end_slot(t, q, q, [q])
    s = col.summary()
    assert s.busy_periods == 2
    assert s.mean_busy_period == pytest.approx(2.5)


def test_time_to_empty_counts_from_arrival_slot():
    col = MetricsCollector(1)
    col.arrival(1, 1)
    for t, v in enumerate([1, 1, 0], 1):
        col.end_slot(t, v, v, [v])
    assert col.summary().time_to_empty == [2.0]


def test_first_passage_from_trace():
    col = MetricsCollector(1, passage_states=(2,))
    for t, v in enumerate([1, 2, 3, 2, 1, 0], 1):
        col.end_slot(t, v, v, [v])
    s = col.summary()
    assert s.first_passage[2] == pytest.approx((4 + 2) / 2)
    assert s.first_passage_counts[2] == 2


def test_alg1_sojourn_dominates_per_receiver_drain():
    cfg = SimConfig(lam=0.4, mu=0.5, n=2, policy="alg1", coding="random", slots=60_000, seed=5, warmup=2000)
    s = run(cfg).summary
    for d in s.time_to_empty:
        assert s.mean_sojourn >= d


def test_simulated_first_passage_matches_drift_formula():
    cfg = SimConfig(lam=0.25, mu=0.5, n=2, slots=300_000, seed=8, passage_states=(1, 2))
    s = run(cfg).summary
    for k in (1, 2):
        assert s.first_passage_counts[k] > 1000
        assert s.first_passage[k] == pytest.approx(metrics.analytic_first_passage(k, 0.25, 0.5), rel=0.1)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fbnc.simulator import (
    ConfigError,
    SimConfig,
    Simulator,
    decode_event_check,
    default_q,
    format_trace,
    run,
    scripted_run,
)

TABLE1_ARRIVALS = [1, 1, 1, 0, 1, 0]
TABLE1_RX = [(1, 0), (1, 1), (0, 1), (0, 1), (1, 0), (1, 1)]


def cfg_(**kw):
    base = dict(lam=0.3, mu=0.5, n=2, slots=2000, seed=7, warmup=0)
    base.update(kw)
    return SimConfig(**base)


def test_default_field_sizes():
    assert default_q("three_rx", 3) == 3
    assert default_q("next_unseen", 4) == 5
    assert default_q("next_unseen", 1) == 2
    assert default_q("random", 2) == 257


@pytest.mark.parametrize(
    "kw",
    [
        dict(coding="three_rx", n=2),
        dict(coding="three_rx", n=3, q=5, policy="alg1"),
        dict(coding="three_rx", n=3, q=3, policy="alg2b"),
        dict(policy="alg2a", coding="next_unseen", q=5),
        dict(policy="alg2a", coding="random", q=2),
        dict(coding="next_unseen", n=4, q=3),
        dict(q=4),
        dict(mu=0.0),
        dict(lam=1.5),
        dict(policy="fifo"),
    ],
)
def test_invalid_configs(kw):
    with pytest.raises(ConfigError):
        Simulator(cfg_(**kw))


def test_unstable_load_warns():
    with pytest.warns(RuntimeWarning):
        cfg_(lam=0.5, mu=0.5).validate()


def test_no_arrivals_keeps_everything_empty():
    res = run(cfg_(lam=0.0, slots=500))
    s = res.summary
    assert s.mean_phys_q == 0 and s.mean_virt_q_avg == 0
    assert res.transmissions == 0


def test_perfect_single_receiver_never_queues():
    res = run(cfg_(lam=0.7, mu=1.0, n=1, slots=3000))
    assert res.summary.mean_phys_q == 0
    assert res.summary.mean_decoding_delay == 0
    assert res.summary.mean_delivery_delay == 0


def test_table1_queue_and_transmissions():
    cfg = cfg_(lam=0.25, policy="alg2b", coding="next_unseen", q=2, slots=6, verify=True)
    res = scripted_run(cfg, TABLE1_ARRIVALS, TABLE1_RX)
    assert [tr.queue for tr in res.traces] == [(1,), (1, 2), (2, 3), (3,), (3, 4), (4,)]
    assert [tr.combo.describe() for tr in res.traces] == ["p1", "p1+p2", "p2+p3", "p3", "p3+p4", "p4"]
    assert [tr.phys_q_pre for tr in res.traces] == [1, 2, 2, 1, 2, 1]


def test_all_erasures_grow_backlog():
    cfg = cfg_(slots=5, verify=True)
    res = scripted_run(cfg, [1] * 5, [(0, 0)] * 5)
    assert [tr.virt_q for tr in res.traces] == [(k, k) for k in range(1, 6)]
    assert res.traces[-1].phys_q == 5


def test_short_script_rejected():
    with pytest.raises(ConfigError):
        scripted_run(cfg_(slots=4), [1, 1], [(1, 1)] * 4)


def test_script_receiver_count_checked():
    with pytest.raises(ConfigError):
        scripted_run(cfg_(slots=1), [1], [(1, 1, 1)])


def test_decode_event_check():
    assert decode_event_check(None, 0, False, True)
    assert decode_event_check(None, 3, True, True)
    assert not decode_event_check(None, 3, False, True)
    assert not decode_event_check(None, 0, True, False)


def test_same_seed_same_run():
    a = run(cfg_(seed=11), keep_traces=True)
    b = run(cfg_(seed=11), keep_traces=True)
    assert [format_trace(t) for t in a.traces] == [format_trace(t) for t in b.traces]


def test_different_seed_differs():
    a = run(cfg_(seed=1), keep_traces=True)
    b = run(cfg_(seed=2), keep_traces=True)
    assert [t.virt_q for t in a.traces] != [t.virt_q for t in b.traces]


def test_common_random_numbers_across_policies():
    # the virtual queue path depends only on arrivals and receptions
    paths = []
    for policy, coding in (("alg1", "next_unseen"), ("alg2b", "next_unseen"), ("alg1", "three_rx")):
        res = run(cfg_(n=3, policy=policy, coding=coding, q=3, slots=1500), keep_traces=True)
        paths.append([t.virt_q for t in res.traces])
    assert paths[0] == paths[1] == paths[2]


def test_sink_receives_every_slot():
    seen = []
    run(cfg_(slots=50), sink=seen.append)
    assert [t.slot for t in seen] == list(range(1, 51))


@pytest.mark.parametrize(
    "kw",
    [
        dict(policy="alg1", coding="random"),
        dict(policy="alg1", coding="next_unseen"),
        dict(policy="alg2b", coding="next_unseen"),
        dict(policy="alg2b", coding="random", n=3),
        dict(policy="alg2a", coding="random", q=5),
        dict(policy="alg1", coding="three_rx", n=3),
    ],
)
def test_verify_mode_runs_clean(kw):
    res = run(cfg_(lam=0.4, slots=1500, verify=True, **kw))
    assert res.slots == 1500
    assert res.innovation_checks > 0
    if res.config.coding != "random" or res.config.policy == "alg2a":
        assert res.innovation_failures == 0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(["alg1", "alg2b"]), st.integers(1, 3))
def test_in_order_delivery(seed, policy, n):
    res = run(cfg_(seed=seed, policy=policy, n=n, lam=0.4, slots=300), keep_traces=True)
    last = [0] * n
    for tr in res.traces:
        for j, ev in enumerate(tr.delivery_events):
            assert list(ev) == list(range(last[j] + 1, last[j] + 1 + len(ev)))
            last[j] += len(ev)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6))
def test_delivery_never_precedes_decoding(seed):
    sim = Simulator(cfg_(seed=seed, lam=0.45, slots=400))
    for _ in range(400):
        sim.step()
    arr, dec, dlv = sim.metrics.delay_records()
    done = dlv >= 0
    assert (dec[done] >= 0).all()
    assert (dlv[done] >= dec[done]).all()
    assert (dec[dec >= 0] >= np.broadcast_to(arr, dec.shape)[dec >= 0]).all()

"""Slotted simulation of a sender broadcasting coded packets to n receivers.

Order of events inside slot t: an arrival (probability lambda) joins the
stream, the coding module picks a combination, each receiver independently
gets it with probability mu, receivers update their knowledge, feedback
reaches the sender within the slot, the queue policy updates, and the
end-of-slot state is measured.
"""

from __future__ import annotations

import collections
import warnings
from dataclasses import dataclass, field

import numpy as np

from fbnc import coding, ffla
from fbnc.knowledge import ReceiverKnowledge
from fbnc.metrics import MetricsCollector, SummaryStats
from fbnc.queues import (
    DropCommonKnowledgeQueue,
    DropWhenDecodedQueue,
    DropWhenSeenQueue,
    InvariantViolation,
)

POLICIES = ("alg1", "alg2a", "alg2b")
CODINGS = ("random", "next_unseen", "three_rx")
RANDOM_Q = 257


class ConfigError(ValueError):
    """Inconsistent simulation parameters."""


def default_q(coding_name: str, n: int) -> int:
    if coding_name == "three_rx":
        return 3
    if coding_name == "next_unseen":
        return ffla.next_prime(max(n, 2))
    return RANDOM_Q


@dataclass
class SimConfig:
    lam: float
    mu: float
    n: int = 2
    policy: str = "alg2b"
    coding: str = "next_unseen"
    q: int | None = None
    slots: int = 10_000
    seed: int = 0
    verify: bool = False
    warmup: int | None = None
    check_innovation: bool | None = None
    passage_states: tuple = ()
    backend: str | None = None

    def __post_init__(self):
        if self.q is None:
            self.q = default_q(self.coding, self.n)
        if self.warmup is None:
            self.warmup = default_warmup(self.slots)
        if self.check_innovation is None:
            self.check_innovation = self.verify

    @property
    def rho(self) -> float:
        return self.lam / self.mu

    def validate(self) -> "SimConfig":
        if not 0 <= self.lam <= 1:
            raise ConfigError(f"lambda must lie in [0, 1], got {self.lam}")
        if not 0 < self.mu <= 1:
            raise ConfigError(f"mu must lie in (0, 1], got {self.mu}")
        if self.n < 1:
            raise ConfigError("need at least one receiver")
        if self.policy not in POLICIES:
            raise ConfigError(f"unknown policy {self.policy!r}; choose from {POLICIES}")
        if self.coding not in CODINGS:
            raise ConfigError(f"unknown coding {self.coding!r}; choose from {CODINGS}")
        if not ffla.is_prime(self.q):
            raise ConfigError(f"field size {self.q} is not prime")
        if self.coding == "three_rx":
            if self.n != 3:
                raise ConfigError("three_rx coding requires n = 3 receivers")
            if self.q != 3:
                raise ConfigError("three_rx coding requires q = 3")
            if self.policy != "alg1":
                raise ConfigError("three_rx coding may mix packets every receiver has seen; use policy alg1")
        if self.coding == "next_unseen" and self.q < self.n:
            raise ConfigError(f"next_unseen coding requires q >= n ({self.q} < {self.n})")
        if self.policy == "alg2a":
            if self.q <= self.n:
                raise ConfigError(f"alg2a requires q > n ({self.q} <= {self.n})")
            if self.coding != "random":
                raise ConfigError("alg2a chooses its own transmission; use coding 'random'")
        if self.slots < 0:
            raise ConfigError("slots must be non-negative")
        if self.lam >= self.mu:
            warnings.warn(f"load factor {self.rho:.3f} >= 1: queues are unstable", RuntimeWarning)
        return self


def default_warmup(slots: int) -> int:
    return min(slots, max(10_000, slots // 100))


@dataclass
class SlotTrace:
    """Record of one slot, measured at its end."""

    slot: int
    arrival: int | None
    combo: coding.TransmitDecision
    receptions: tuple
    phys_q_pre: int
    phys_q: int
    virt_q: tuple
    decode_events: tuple
    delivery_events: tuple
    departures: tuple = ()
    queue: tuple = ()
    labels: tuple | None = None


@dataclass
class SimResult:
    config: SimConfig
    summary: SummaryStats
    traces: list = field(default_factory=list)
    slots: int = 0
    transmissions: int = 0
    innovation_checks: int = 0
    innovation_failures: int = 0
    silent_with_deficit: int = 0
    invariant_checks: dict = field(default_factory=dict)

    @property
    def innovation_failure_rate(self) -> float:
        return self.innovation_failures / self.innovation_checks if self.innovation_checks else 0.0


class _Streams:
    """Block-drawn uniforms from independent named streams.

    Child seeds are keyed by name, so adding receivers or changing lambda
    leaves the other streams untouched.
    """

    BLOCK = 1 << 16
    KEYS = {"arrivals": 0, "coding": 1}

    def __init__(self, seed: int, n: int, lam: float, mu: float):
        def gen(key):
            return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(key,)))

        self.lam = lam
        self.mu = mu
        self.arr_rng = gen(self.KEYS["arrivals"])
        self.coding = gen(self.KEYS["coding"])
        self.rx_rng = [gen(100 + j) for j in range(n)]
        self.n = n
        self._arr: list = []
        self._rx: list = []
        self._i = 0

    def draw(self):
        """Arrival flag and per-receiver reception flags for the next slot."""
        if self._i >= len(self._arr):
            self._arr = (self.arr_rng.random(self.BLOCK) < self.lam).tolist()
            if self.n:
                rx = np.stack([g.random(self.BLOCK) for g in self.rx_rng]) < self.mu
                self._rx = rx.T.tolist()
            else:
                self._rx = [[]] * self.BLOCK
            self._i = 0
        i = self._i
        self._i += 1
        return self._arr[i], self._rx[i]


class Simulator:
    """One simulation instance; call :meth:`step` once per slot."""

    def __init__(self, config: SimConfig, keep_traces: bool = False, history: int = 16, sink=None):
        self.cfg = config.validate()
        self.sink = sink
        cfg = self.cfg
        self.n = cfg.n
        self.q = cfg.q
        self.t = 0
        self.A = 0
        self.receivers = [ReceiverKnowledge(cfg.q, backend=cfg.backend) for _ in range(cfg.n)]
        if cfg.policy == "alg1":
            self.queue = DropWhenDecodedQueue(cfg.n)
        elif cfg.policy == "alg2b":
            self.queue = DropWhenSeenQueue(cfg.n, cfg.q, backend=cfg.backend)
        else:
            self.queue = DropCommonKnowledgeQueue(cfg.n, cfg.q)
        self.state = coding.ThreeRxState() if cfg.coding == "three_rx" else None
        self.streams = _Streams(cfg.seed, cfg.n, cfg.lam, cfg.mu)
        self.metrics = MetricsCollector(
            cfg.n, warmup=cfg.warmup, passage_states=cfg.passage_states, expected_slots=cfg.slots
        )
        self.keep_traces = keep_traces
        self.traces: list[SlotTrace] = []
        self.recent = collections.deque(maxlen=history)
        self.result = SimResult(cfg, SummaryStats(cfg.n))
        self.checks = collections.Counter()
        self._vq = [0] * cfg.n
        self._last_g = None
        # modules that guarantee innovation (random coding only makes it likely)
        self.deterministic = cfg.policy == "alg2a" or cfg.coding != "random"

    # -- helpers ---------------------------------------------------------
    def _fail(self, msg):
        dump = "\n".join(format_trace(tr) for tr in self.recent)
        raise InvariantViolation(f"slot {self.t}: {msg}\nrecent slots:\n{dump}")

    def _choose(self) -> coding.TransmitDecision:
        cfg = self.cfg
        if cfg.policy == "alg2a":
            g = self.queue.choose()
            self._last_g = g
            if g is None:
                return coding.silence("alg2a")
            ids, coefs = self.queue.to_global(g)
            return coding.TransmitDecision(ids, coefs, "alg2a")
        if cfg.coding == "random":
            return coding.random_combo(self.queue.entries, self.q, self.streams.coding)
        if cfg.coding == "next_unseen":
            return coding.next_unseen_combo(self.receivers, self.q)
        self.state = coding.three_rx_sets(self.state, self.receivers, self.A)
        return coding.three_rx_combo(self.state, self.receivers)

    # -- verification ------------------------------------------------------
    def _verify_common_knowledge(self):
        """Queue size equals sender dimension minus common receiver dimension."""
        q = self.q
        f = min(rk.front for rk in self.receivers)
        lo = f + 1
        width = self.A - f
        spans = [ffla.rref(rk.window_rows(lo), q, ncols=width) for rk in self.receivers]
        common = ffla.intersect_all(spans)
        expect = self.A - (f + common.rank)
        self.checks["common_knowledge"] += 1
        if self.queue.size != expect:
            self._fail(f"queue holds {self.queue.size} combinations, expected {expect}")
        H = self.queue.contents
        if H.shape[0] and ffla.rank(H, q) != H.shape[0]:
            self._fail("stored combinations are linearly dependent")
        self.checks["stored_rank"] += 1
        # every receiver knows its share of the stored combinations
        for j, rk in enumerate(self.receivers):
            local = self.queue.bases[j]
            if local.shape[0] == 0:
                continue
            glob = (local @ H) % q
            for row in glob:
                nz = np.flatnonzero(row)
                if not rk.contains(nz + self.queue.offset + 1, row[nz]):
                    self._fail(f"receiver {j} lacks a combination the sender attributes to it")

    def _verify_three_rx_combo(self, dec):
        m = self.state.m
        used = dec.involved
        if used and max(used) > m + 1:
            self._fail(f"combination involves p{max(used)} beyond m+1={m + 1}")
        self.checks["index_bound"] += 1
        for j, rk in enumerate(self.receivers):
            outside = sum(1 for pid in used if not rk.is_decoded(pid))
            if outside > 2:
                self._fail(f"receiver {j} sees {outside} undecoded packets in one combination")
        self.checks["two_unknowns"] += 1

    def _verify_three_rx_labels(self):
        lead = self.state.leader
        if self.receivers[lead].front < self.state.m:
            self._fail("leader has not decoded the full prefix")
        self.checks["leader_prefix"] += 1
        others = [i for i in range(3) if i != lead]
        if sum(self.receivers[i].has_unsolved for i in others) > 1:
            self._fail("both non-leaders hold unsolved packets")
        self.checks["single_deficit"] += 1

    # -- main loop ---------------------------------------------------------
    def step(self, arrival: bool | None = None, receptions=None) -> SlotTrace | None:
        cfg = self.cfg
        self.t += 1
        t = self.t
        drawn_arr, drawn_rx = self.streams.draw()
        if arrival is None:
            arrival = drawn_arr
        if receptions is None:
            receptions = drawn_rx
        receivers = self.receivers
        met = self.metrics
        pid = None
        if arrival:
            self.A += 1
            pid = self.A
            for rk in receivers:
                rk.extend(1)
            self.queue.arrive(1)
            met.arrival(pid, t)
        phys_pre = self.queue.size
        queue_before = self._queue_view() if self.keep_traces else ()
        if cfg.verify and cfg.policy == "alg2a":
            self._verify_common_knowledge()

        dec = self._choose()
        if cfg.verify and self.state is not None:
            self._verify_three_rx_combo(dec)
        ids, coefs = dec.packed()
        silent = dec.silent
        res = self.result
        if not silent:
            res.transmissions += 1
        A = self.A
        ranks_before = [rk.rank for rk in receivers]
        if cfg.policy == "alg1" and cfg.verify:
            head = self.queue.head
            if dec.ids and dec.ids[0] < head:
                self._fail("transmission uses a packet already dropped")
        decode_events = [()] * self.n
        delivery_events = [()] * self.n
        check = cfg.check_innovation
        for j, rk in enumerate(receivers):
            deficit = A - ranks_before[j]
            if receptions[j] and not silent:
                front = rk.front
                out = rk.incorporate(ids, coefs)
                if deficit:
                    res.innovation_checks += 1
                    if out is None:
                        res.innovation_failures += 1
                if out:
                    decode_events[j] = tuple(out)
                    met.decoded(j, out, t)
                    if rk.front > front:
                        dl = range(front + 1, rk.front + 1)
                        delivery_events[j] = tuple(dl)
                        met.delivered(j, dl, t)
            elif deficit and check:
                if silent:
                    res.silent_with_deficit += 1
                    res.innovation_checks += 1
                    res.innovation_failures += 1
                else:
                    res.innovation_checks += 1
                    if rk.contains(ids, coefs):
                        res.innovation_failures += 1
        vq = [A - rk.rank for rk in receivers]
        if cfg.verify:
            if self.deterministic and res.innovation_failures:
                self._fail("transmission was not innovative to a receiver with a backlog")
            self._verify_slot(dec, receptions, ranks_before, vq)

        if cfg.policy == "alg1":
            departed = self.queue.update(vq)
        elif cfg.policy == "alg2b":
            departed = self.queue.update(ids, coefs, receptions)
        else:
            departed = self.queue.update(self._last_g, receptions)
        if len(departed):
            met.departed(departed, t)
        phys = self.queue.size
        if cfg.verify and cfg.policy in ("alg2a", "alg2b"):
            self.checks["queue_bound"] += 1
            if phys > sum(vq):
                self._fail(f"physical queue {phys} exceeds total backlog {sum(vq)}")
            if cfg.policy == "alg2b":
                dropped = A - phys
                for j, r in enumerate(self.queue.local_ranks()):
                    if r + dropped != receivers[j].rank:
                        self._fail(f"sender's view of receiver {j} disagrees with its knowledge")
        if self.state is not None:
            self.state = coding.three_rx_relabel(self.state, receivers)
            if cfg.verify:
                self._verify_three_rx_labels()
        met.end_slot(t, phys_pre, phys, vq)
        self._vq = vq
        if self.keep_traces or cfg.verify or self.sink is not None:
            tr = SlotTrace(
                slot=t,
                arrival=pid,
                combo=dec,
                receptions=tuple(bool(x) for x in receptions),
                phys_q_pre=phys_pre,
                phys_q=phys,
                virt_q=tuple(vq),
                decode_events=tuple(decode_events),
                delivery_events=tuple(delivery_events),
                departures=tuple(int(x) for x in departed),
                queue=queue_before,
                labels=self.state.labels if self.state is not None else None,
            )
            self.recent.append(tr)
            if self.keep_traces:
                self.traces.append(tr)
            if self.sink is not None:
                self.sink(tr)
            return tr
        return None

    def _queue_view(self):
        if self.cfg.policy == "alg2a":
            return tuple(tuple(int(x) for x in row) for row in self.queue.contents)
        return tuple(int(x) for x in self.queue.entries)

    def _verify_slot(self, dec, receptions, ranks_before, vq):
        cfg = self.cfg
        A = self.A
        for j, rk in enumerate(self.receivers):
            if not self.deterministic:
                break
            delta = rk.rank - ranks_before[j]
            expect = int(bool(receptions[j]) and ranks_before[j] < A and not dec.silent)
            self.checks["backlog_step"] += 1
            if delta != expect:
                self._fail(f"receiver {j} rank moved by {delta}, expected {expect}")
        if cfg.coding == "next_unseen" and cfg.policy == "alg2b":
            top = max(ranks_before)
            for j, rk in enumerate(self.receivers):
                if decode_event_check(rk, vq[j], ranks_before[j] == top, receptions[j]):
                    self.checks["decoding_event"] += 1
                    if rk.has_unsolved:
                        self._fail(f"receiver {j} should have decoded every seen packet")

    def finish(self) -> SimResult:
        res = self.result
        res.summary = self.metrics.summary()
        res.slots = self.t
        res.traces = self.traces
        res.invariant_checks = dict(self.checks)
        return res


def decode_event_check(receiver, vq_size: int, was_leader: bool, received: bool) -> bool:
    """Sufficient condition for a receiver to decode everything it has seen.

    True when the receiver got this slot's packet and either its backlog is
    now empty or it had seen the most packets at the start of the slot.
    """
    return bool(received) and (vq_size == 0 or bool(was_leader))


def run(config: SimConfig, keep_traces: bool = False, sink=None) -> SimResult:
    """Simulate ``config.slots`` slots; ``sink`` receives every :class:`SlotTrace`."""
    sim = Simulator(config, keep_traces=keep_traces, sink=sink)
    for _ in range(config.slots):
        sim.step()
    return sim.finish()


def scripted_run(config: SimConfig, arrival_script, erasure_script, keep_traces: bool = True) -> SimResult:
    """Run with arrivals and per-receiver receptions taken from scripts.

    ``erasure_script[t][j]`` is true when receiver ``j`` gets the slot-t
    transmission.
    """
    if len(arrival_script) < config.slots or len(erasure_script) < config.slots:
        raise ConfigError("scripts are shorter than the horizon")
    sim = Simulator(config, keep_traces=keep_traces)
    for t in range(config.slots):
        rx = list(erasure_script[t])
        if len(rx) != config.n:
            raise ConfigError(f"slot {t + 1}: erasure script lists {len(rx)} receivers, expected {config.n}")
        sim.step(arrival=bool(arrival_script[t]), receptions=rx)
    return sim.finish()


def format_trace(tr: SlotTrace) -> str:
    """One-line text form of a slot record."""
    rx = "".join("1" if r else "0" for r in tr.receptions)
    return (
        f"t={tr.slot} arr={tr.arrival} sent={tr.combo.describe()} rx={rx} "
        f"Q={tr.phys_q_pre}->{tr.phys_q} vq={list(tr.virt_q)} labels={tr.labels}"
    )

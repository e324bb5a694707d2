"""Closed-form queue/delay expressions and streaming statistics.

Delays exclude the slot in which the packet arrived: a packet decoded in its
own arrival slot has delay 0. Statistics use only post-warmup slots and
packets that arrived after the warmup boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class DomainError(ValueError):
    """Parameters outside the region where a formula is defined."""


def _check_stable(lam, mu):
    if not (0 <= lam < mu <= 1):
        raise DomainError(f"need 0 <= lambda < mu <= 1, got lambda={lam}, mu={mu}")


def vq_ratio(lam: float, mu: float) -> float:
    """Geometric ratio of the stationary virtual-queue distribution."""
    _check_stable(lam, mu)
    return lam * (1 - mu) / (mu * (1 - lam))


def analytic_pi(k: int, lam: float, mu: float) -> float:
    """Stationary probability that a virtual queue holds ``k`` packets."""
    a = vq_ratio(lam, mu)
    return (1 - a) * a**k


def analytic_vq_mean(lam: float, mu: float) -> float:
    _check_stable(lam, mu)
    rho = lam / mu
    return (1 - mu) * rho / (1 - rho)


def analytic_Dj_mean(lam: float, mu: float) -> float:
    """Reference closed form for the mean time from an arrival to the next
    emptying of a virtual queue.

    The sum it is derived from evaluates to ``analytic_Dj_mean_exact``; the
    two differ by a factor ``rho``.
    """
    _check_stable(lam, mu)
    rho = lam / mu
    return (1 - mu) / mu * rho / (1 - rho) ** 2


def analytic_Dj_mean_exact(lam: float, mu: float) -> float:
    """``sum_k pi_k (mu G_k + (1 - mu) G_{k+1})`` with ``G_u = u / (mu - lam)``."""
    _check_stable(lam, mu)
    rho = lam / mu
    return (1 - mu) / (mu * (1 - rho) ** 2)


def analytic_first_passage(k: int, lam: float, mu: float) -> float:
    """Mean number of slots for a virtual queue to drain from ``k`` to 0."""
    _check_stable(lam, mu)
    if k < 0:
        raise DomainError("state must be non-negative")
    return k / (mu - lam)


def growth_fit(points) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 3:
        raise DomainError("need at least three points")
    if any(x <= 0 or y <= 0 for x, y in pts):
        raise DomainError("growth fit needs positive values")
    lx = np.log([p[0] for p in pts])
    ly = np.log([p[1] for p in pts])
    slope, _ = np.polyfit(lx, ly, 1)
    return float(slope)


def quadratic_coefficient(points) -> float:
    """Least-squares ``c`` in ``y = c x**2``."""
    x = np.array([p[0] for p in points], dtype=float)
    y = np.array([p[1] for p in points], dtype=float)
    return float((y * x**2).sum() / (x**4).sum())


def total_variation(empirical: np.ndarray, lam: float, mu: float) -> float:
    """TV distance between an empirical occupancy histogram and the geometric law."""
    p = np.asarray(empirical, dtype=float)
    k = np.arange(len(p))
    ref = np.array([analytic_pi(int(i), lam, mu) for i in k])
    tail = max(0.0, 1.0 - ref.sum())
    return 0.5 * (np.abs(p - ref).sum() + tail)


def first_passage_mc(k: int, lam: float, mu: float, passages: int, rng: np.random.Generator,
                     chunk: int = 4096) -> np.ndarray:
    """Sample drain times from state ``k`` of the per-receiver backlog chain.

    Each slot: one arrival with probability ``lam``, one successful
    reception with probability ``mu``. Chains are advanced in parallel.
    """
    _check_stable(lam, mu)
    out = np.empty(passages, dtype=np.int64)
    done = 0
    while done < passages:
        m = min(chunk, passages - done)
        state = np.full(m, k, dtype=np.int64)
        time = np.zeros(m, dtype=np.int64)
        live = state > 0
        while live.any():
            idx = np.flatnonzero(live)
            arr = rng.random(idx.size) < lam
            srv = rng.random(idx.size) < mu
            s = state[idx] + arr
            s -= srv & (s > 0)
            state[idx] = s
            time[idx] += 1
            live[idx] = s > 0
        out[done : done + m] = time
        done += m
    return out


# -- streaming statistics ----------------------------------------------------
def _grow(arr: np.ndarray, need: int, fill) -> np.ndarray:
    """Return ``arr`` with its last axis grown to at least ``need``."""
    cap = arr.shape[-1]
    if need <= cap:
        return arr
    while cap < need:
        cap *= 2
    shape = arr.shape[:-1] + (cap,)
    out = np.full(shape, fill, dtype=arr.dtype)
    out[..., : arr.shape[-1]] = arr
    return out


def _batch_stderr(values: np.ndarray, batches: np.ndarray) -> float:
    """Standard error of the mean from batch means."""
    if values.size == 0:
        return math.nan
    counts = np.bincount(batches)
    sums = np.bincount(batches, weights=values)
    ok = counts > 0
    means = sums[ok] / counts[ok]
    if means.size < 2:
        return math.nan
    return float(np.std(means, ddof=1) / math.sqrt(means.size))


def _mean(x) -> float:
    return float(np.mean(x)) if len(x) else math.nan


@dataclass
class SummaryStats:
    """Aggregated post-warmup statistics of one run."""

    n: int
    slots: int = 0
    empty: bool = True
    mean_phys_q: float = math.nan
    var_phys_q: float = math.nan
    mean_phys_q_pre: float = math.nan
    mean_virt_q: list = field(default_factory=list)
    mean_virt_q_avg: float = math.nan
    var_virt_q: list = field(default_factory=list)
    vq_distribution: np.ndarray = field(default_factory=lambda: np.zeros(0))
    decoding_delay: list = field(default_factory=list)
    delivery_delay: list = field(default_factory=list)
    mean_decoding_delay: float = math.nan
    mean_delivery_delay: float = math.nan
    time_to_empty: list = field(default_factory=list)
    mean_time_to_empty: float = math.nan
    mean_sojourn: float = math.nan
    mean_busy_period: float = math.nan
    busy_periods: int = 0
    packets: int = 0
    undecoded: list = field(default_factory=list)
    undelivered: list = field(default_factory=list)
    stderr: dict = field(default_factory=dict)
    first_passage: dict = field(default_factory=dict)
    first_passage_counts: dict = field(default_factory=dict)


class MetricsCollector:
    """Fold per-slot observations into :class:`SummaryStats`.

    Per slot, report packet events (:meth:`arrival`, :meth:`decoded`,
    :meth:`delivered`, :meth:`departed`) and then :meth:`end_slot`. Raw
    per-slot sizes and per-packet event slots are kept in flat arrays; the
    statistics are computed in :meth:`summary`.
    """

    def __init__(self, n: int, warmup: int = 0, batch: int = 10_000, passage_states=(),
                 expected_slots: int = 1024):
        self.n = n
        self.warmup = warmup
        self.batch = batch
        self.passage_states = tuple(passage_states)
        self.slots = 0
        cap = max(16, expected_slots)
        self._phys = np.zeros(cap, dtype=np.int32)
        self._phys_pre = np.zeros(cap, dtype=np.int32)
        self._vq = np.zeros((n, cap), dtype=np.int32)
        pcap = max(16, cap // 2)
        self._arr = np.full(pcap, -1, dtype=np.int32)
        self._dec = np.full((n, pcap), -1, dtype=np.int32)
        self._dlv = np.full((n, pcap), -1, dtype=np.int32)
        self._dep = np.full(pcap, -1, dtype=np.int32)
        self._npk = 0

    # -- events ----------------------------------------------------------
    def arrival(self, pid: int, slot: int) -> None:
        if pid >= self._arr.shape[0]:
            need = pid + 1
            self._arr = _grow(self._arr, need, -1)
            self._dec = _grow(self._dec, need, -1)
            self._dlv = _grow(self._dlv, need, -1)
            self._dep = _grow(self._dep, need, -1)
        self._arr[pid] = slot
        if pid > self._npk:
            self._npk = pid

    def decoded(self, j: int, ids, slot: int) -> None:
        row = self._dec[j]
        for pid in ids:
            row[pid] = slot

    def delivered(self, j: int, ids, slot: int) -> None:
        row = self._dlv[j]
        for pid in ids:
            row[pid] = slot

    def departed(self, ids, slot: int) -> None:
        dep = self._dep
        for pid in ids:
            dep[pid] = slot

    def end_slot(self, slot: int, phys_q_pre: int, phys_q: int, vq) -> None:
        """Record end-of-slot queue sizes (``vq`` is per receiver)."""
        i = slot - 1
        if i >= self._phys.shape[0]:
            self._phys = _grow(self._phys, slot, 0)
            self._phys_pre = _grow(self._phys_pre, slot, 0)
            self._vq = _grow(self._vq, slot, 0)
        self._phys[i] = phys_q
        self._phys_pre[i] = phys_q_pre
        vqa = self._vq
        for j in range(self.n):
            vqa[j, i] = vq[j]
        self.slots = slot

    # -- raw access ------------------------------------------------------
    def delay_records(self):
        """Per-packet arrival slot and per-receiver decode/delivery slots (-1 = pending)."""
        k = self._npk + 1
        return self._arr[1:k].copy(), self._dec[:, 1:k].copy(), self._dlv[:, 1:k].copy()

    def series(self):
        """Per-slot (phys_q_pre, phys_q, vq[n, T]) arrays."""
        T = self.slots
        return self._phys_pre[:T].copy(), self._phys[:T].copy(), self._vq[:, :T].copy()

    # -- summary ---------------------------------------------------------
    def summary(self) -> SummaryStats:
        st = SummaryStats(n=self.n)
        w = self.warmup
        T = self.slots
        if T <= w:
            return st
        st.empty = False
        st.slots = T - w
        bidx = np.arange(T - w) // self.batch
        phys = self._phys[w:T].astype(np.int64)
        vq = self._vq[:, w:T].astype(np.int64)
        st.mean_phys_q = float(phys.mean())
        st.var_phys_q = float(phys.var())
        st.mean_phys_q_pre = float(self._phys_pre[w:T].mean())
        st.mean_virt_q = [float(v.mean()) for v in vq]
        st.var_virt_q = [float(v.var()) for v in vq]
        st.mean_virt_q_avg = float(vq.mean())
        hist = np.bincount(vq.ravel())
        st.vq_distribution = hist / hist.sum()

        # packets that arrived after the warmup boundary
        k = self._npk + 1
        arr = self._arr[1:k].astype(np.int64)
        post = arr > w
        st.packets = int(post.sum())
        pb = (arr - w - 1) // self.batch

        def delays(events):
            per, allv, allb, pending = [], [], [], []
            for j in range(self.n):
                ev = events[j, 1:k].astype(np.int64)
                ok = post & (ev >= 0)
                d = ev[ok] - arr[ok]
                per.append(_mean(d))
                allv.append(d)
                allb.append(pb[ok])
                pending.append(int((post & (ev < 0)).sum()))
            v = np.concatenate(allv) if allv else np.zeros(0)
            b = np.concatenate(allb) if allb else np.zeros(0, dtype=np.int64)
            return per, v, b, pending

        st.decoding_delay, dv, db, st.undecoded = delays(self._dec)
        st.delivery_delay, lv, lb, st.undelivered = delays(self._dlv)
        st.mean_decoding_delay = _mean(dv)
        st.mean_delivery_delay = _mean(lv)

        dep = self._dep[1:k].astype(np.int64)
        ok = post & (dep >= 0)
        soj = dep[ok] - arr[ok]
        st.mean_sojourn = _mean(soj)

        # time from each arrival to the next slot whose backlog is zero
        slots = np.arange(1, T + 1)
        tv, tb = [], []
        for j in range(self.n):
            zeros = slots[self._vq[j, :T] == 0]
            a = arr[post]
            idx = np.searchsorted(zeros, a, side="left")
            hit = idx < zeros.size
            d = zeros[idx[hit]] - a[hit]
            st.time_to_empty.append(_mean(d))
            tv.append(d)
            tb.append(pb[post][hit])
        tv_all = np.concatenate(tv) if tv else np.zeros(0)
        st.mean_time_to_empty = _mean(tv_all)

        # drain times starting from each post-warmup visit to state k
        for s in self.passage_states:
            times = []
            for j in range(self.n):
                row = self._vq[j, :T]
                zeros = slots[row == 0]
                starts = slots[w:][row[w:] == s]
                idx = np.searchsorted(zeros, starts, side="right")
                hit = idx < zeros.size
                times.append(zeros[idx[hit]] - starts[hit])
            t_all = np.concatenate(times) if times else np.zeros(0)
            st.first_passage[s] = _mean(t_all)
            st.first_passage_counts[s] = int(t_all.size)

        # busy periods: maximal runs with a non-empty physical queue
        busy = np.concatenate([[0], (phys > 0).astype(np.int8), [0]])
        edges = np.diff(busy)
        starts = np.flatnonzero(edges == 1)
        ends = np.flatnonzero(edges == -1)
        complete = (starts > 0) & (ends < phys.size)
        lengths = (ends - starts)[complete]
        st.busy_periods = int(lengths.size)
        st.mean_busy_period = _mean(lengths)

        st.stderr = {
            "phys_q": _batch_stderr(phys.astype(float), bidx),
            "virt_q": _batch_stderr(vq.mean(axis=0), bidx),
            "decoding_delay": _batch_stderr(dv.astype(float), db),
            "delivery_delay": _batch_stderr(lv.astype(float), lb),
            "time_to_empty": _batch_stderr(tv_all.astype(float), np.concatenate(tb) if tb else np.zeros(0, dtype=np.int64)),
            "sojourn": _batch_stderr(soj.astype(float), pb[ok]),
        }
        return st


def aggregate(traces, n: int, warmup: int = 0, batch: int = 10_000, passage_states=()) -> SummaryStats:
    """Summarize a sequence of :class:`~fbnc.simulator.SlotTrace` records."""
    col = MetricsCollector(n, warmup=warmup, batch=batch, passage_states=passage_states)
    for tr in traces:
        if tr.arrival is not None:
            col.arrival(tr.arrival, tr.slot)
        for j in range(n):
            if tr.decode_events[j]:
                col.decoded(j, tr.decode_events[j], tr.slot)
            if tr.delivery_events[j]:
                col.delivered(j, tr.delivery_events[j], tr.slot)
        if len(tr.departures):
            col.departed(tr.departures, tr.slot)
        col.end_slot(tr.slot, tr.phys_q_pre, tr.phys_q, tr.virt_q)
    return col.summary()

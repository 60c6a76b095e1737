"""Word accounting, latency extraction, and the trace invariant suite.

Word counting follows the complexity definitions: only words sent by
correct processes inside [GST, t_d] count toward a run's communication,
where t_d is the first time every correct process has decided; a separate
window [GST, t_s + overlap] restricted to synchronizer-class messages
measures the synchronizer on its own terms.

The invariant checkers turn the synchronizer's correctness argument into
executable assertions over full traces: monotone views, no view skipping,
epoch-entry quorums, the post-stabilization quiet period, tight epoch
entry, per-view overlap, the epoch-entry latency bound, the constant
epoch budget, minimum spacing of epoch entries, successor structure of
the first stable epoch, plus consensus safety (agreement, no conflicting
quorum certificates), signature unforgeability, per-view word budgets,
network delay legality, and the certification phase's computability,
liveness and word budget.

Bounds are checked with exact rational arithmetic. A few properties are
promises about infinite executions; their missing-event forms are applied
only when the (finite) trace demonstrably ran long enough to owe the
event.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .consensus import ANY_VALUE_TAG, Certificate, CertificateMsg, AllowAnyMsg, \
    DiscloseMsg, value_message
from .crypto import ThresholdSignature
from .raresync import EnterEpochMsg, EpochCompletedMsg, leader
from .baselines import WishMsg
from .trace import Trace, TraceEvent
from .viewcore import CoreMessage, QuorumCertificate, vote_message

SYNC_MESSAGE_TYPES = (EpochCompletedMsg, EnterEpochMsg, WishMsg)
CERT_MESSAGE_TYPES = (DiscloseMsg, AllowAnyMsg, CertificateMsg)


# --------------------------------------------------------------------------
# Extraction helpers
# --------------------------------------------------------------------------

def decide_times(trace: Trace) -> dict[int, tuple[Fraction, object]]:
    out = {}
    for ev in trace.by_kind("decide"):
        out.setdefault(ev.process, (ev.time, ev.payload))
    return out


def decision_time(trace: Trace) -> Optional[Fraction]:
    """First time by which all correct processes have decided."""
    decided = decide_times(trace)
    correct = trace.correct()
    if any(p not in decided for p in correct):
        return None
    return max(decided[p][0] for p in correct)


def _advance_index(trace: Trace) -> dict[int, list[tuple[Fraction, int]]]:
    # one pass over the trace, invalidated when events are appended
    cache = getattr(trace, "_advance_cache", None)
    if cache is not None and cache[0] == len(trace.events):
        return cache[1]
    index: dict[int, list[tuple[Fraction, int]]] = {}
    for ev in trace.events:
        if ev.kind == "advance":
            index.setdefault(ev.process, []).append((ev.time, ev.payload))
    trace._advance_cache = (len(trace.events), index)
    return index


def advances(trace: Trace, pid: int) -> list[tuple[Fraction, int]]:
    return _advance_index(trace).get(pid, [])


def view_intervals(trace: Trace, pid: int):
    """(view, entry, exit) triples; exit None means 'until trace end'."""
    seq = advances(trace, pid)
    out = []
    for i, (t, v) in enumerate(seq):
        end = seq[i + 1][0] if i + 1 < len(seq) else None
        out.append((v, t, end))
    return out


def epoch_of(view: int, f: int) -> int:
    return (view - 1) // (f + 1) + 1


def in_epoch_index(view: int, f: int) -> int:
    return (view - 1) % (f + 1) + 1


def epoch_entries(trace: Trace, pid: int, f: int) -> list[tuple[Fraction, int]]:
    return [(t, epoch_of(v, f)) for t, v in advances(trace, pid)
            if v >= 1 and in_epoch_index(v, f) == 1]


def sync_reference_time(trace: Trace, cfg) -> Fraction:
    """GST, pushed later if some correct process only began running its
    synchronizer after GST (the certified composition may do that); all
    entry-latency bounds are relative to the moment every correct process
    is both stabilized and running."""
    t0 = Fraction(cfg.gst)
    for pid in trace.correct():
        seq = advances(trace, pid)
        if seq:
            t0 = max(t0, seq[0][0])
    return t0


def first_entry_times(trace: Trace, f: int, correct: list[int]) -> dict[int, Fraction]:
    firsts: dict[int, Fraction] = {}
    for pid in correct:
        for t, e in epoch_entries(trace, pid, f):
            if e not in firsts or t < firsts[e]:
                firsts[e] = t
    return firsts


def stable_epochs(trace: Trace, cfg) -> tuple[int, Optional[int], Optional[Fraction]]:
    """(e_max, e_final, t_e_final) relative to the sync reference time."""
    t0 = sync_reference_time(trace, cfg)
    firsts = first_entry_times(trace, cfg.f, trace.correct())
    e_max = 0
    for pid in trace.correct():
        for t, e in epoch_entries(trace, pid, cfg.f):
            if t < t0 and e > e_max:
                e_max = e
    candidates = [e for e, t in firsts.items() if t >= t0]
    if not candidates:
        return e_max, None, None
    e_final = min(candidates)
    return e_max, e_final, firsts[e_final]


def find_sync_time(trace: Trace, cfg) -> Optional[Fraction]:
    """Earliest t >= GST with every correct process in one correct-led view
    throughout [t, t + overlap]."""
    correct = trace.correct()
    overlap = cfg.overlap
    per_view: dict[int, dict[int, tuple[Fraction, Optional[Fraction]]]] = {}
    for pid in correct:
        for v, start, end in view_intervals(trace, pid):
            per_view.setdefault(v, {})[pid] = (start, end)
    best = None
    for v, members in per_view.items():
        if len(members) != len(correct):
            continue
        if leader(v, cfg.n) in trace.byzantine:
            continue
        start = max(s for s, _ in members.values())
        ends = [e for _, e in members.values() if e is not None]
        end = min(ends) if ends else None
        t = max(Fraction(cfg.gst), start)
        if end is None or end - t >= overlap:
            if best is None or t < best:
                best = t
    return best


def count_words(trace: Trace, gst: Fraction, t_d: Optional[Fraction]) -> int:
    """Words sent by correct processes during [GST, t_d]."""
    total = 0
    for ev in trace.events:
        if ev.kind != "send":
            continue
        if ev.time < gst:
            continue
        if t_d is not None and ev.time > t_d:
            continue
        total += ev.words
    return total


def sync_window_words(trace: Trace, cfg, t_s: Optional[Fraction]) -> int:
    """Synchronizer-class words sent by correct processes in [GST, t_s + overlap]."""
    hi = None if t_s is None else t_s + cfg.overlap
    total = 0
    for ev in trace.events:
        if ev.kind != "send" or not isinstance(ev.payload, SYNC_MESSAGE_TYPES):
            continue
        if ev.time < cfg.gst or (hi is not None and ev.time > hi):
            continue
        total += ev.words
    return total


def handler_tally_words(sent_logs: dict[int, list], trace: Trace,
                        gst: Fraction, t_d: Optional[Fraction]) -> int:
    """Independent accounting path: per-handler outbound tallies."""
    total = 0
    for pid, log in sent_logs.items():
        if pid in trace.byzantine:
            continue
        for t, words in log:
            if t >= gst and (t_d is None or t <= t_d):
                total += words
    return total


# --------------------------------------------------------------------------
# Invariant checkers. Each returns a list of violation descriptions.
# --------------------------------------------------------------------------

def check_monotonic_views(trace, cfg, crypto=None):
    out = []
    for pid in trace.correct():
        seq = advances(trace, pid)
        for (t1, v1), (t2, v2) in zip(seq, seq[1:]):
            if v2 <= v1:
                out.append(f"monotonic_views: P{pid} advanced {v1} then {v2}")
    return out


def check_no_view_skip(trace, cfg, crypto=None):
    out = []
    for pid in trace.correct():
        seq = [v for _, v in advances(trace, pid)]
        prev = None
        for v in seq:
            if in_epoch_index(v, cfg.f) != 1 and prev != v - 1:
                out.append(f"no_view_skip: P{pid} entered mid-epoch view {v} "
                           f"without view {v - 1}")
            prev = v
    return out


def check_view_bounds(trace, cfg, crypto=None):
    out = []
    limit = cfg.f + 1
    for pid in trace.correct():
        per_epoch: dict[int, int] = {}
        for _, v in advances(trace, pid):
            if v < 1:
                out.append(f"view_bounds: P{pid} advanced to view {v}")
                continue
            e = epoch_of(v, cfg.f)
            per_epoch[e] = per_epoch.get(e, 0) + 1
        for e, cnt in per_epoch.items():
            if cnt > limit:
                out.append(f"view_bounds: P{pid} entered {cnt} views in epoch {e}")
    return out


def check_epoch_entry_quorum(trace, cfg, crypto=None):
    out = []
    correct = trace.correct()
    entries = {pid: epoch_entries(trace, pid, cfg.f) for pid in correct}
    for pid in correct:
        for t, e in entries[pid]:
            if e <= 1:
                continue
            supporters = sum(
                1 for q in correct
                if any(eq == e - 1 and tq <= t for tq, eq in entries[q]))
            if supporters < cfg.f + 1:
                out.append(f"epoch_entry_quorum: P{pid} entered epoch {e} at {t} "
                           f"with only {supporters} correct entries to {e - 1}")
    return out


def check_quiet_period(trace, cfg, crypto=None):
    out = []
    _, e_final, t_ef = stable_epochs(trace, cfg)
    if e_final is None:
        return out
    bound = t_ef + cfg.epoch_duration
    for ev in trace.events:
        if ev.kind == "send" and isinstance(ev.payload, EpochCompletedMsg):
            if ev.payload.epoch >= e_final and ev.time < bound:
                out.append(f"quiet_period: P{ev.process} sent EPOCH-COMPLETED for "
                           f"{ev.payload.epoch} at {ev.time} < {bound}")
    return out


def check_tight_entry(trace, cfg, crypto=None):
    out = []
    _, e_final, t_ef = stable_epochs(trace, cfg)
    if e_final is None:
        return out
    end_time = trace.events[-1].time if trace.events else Fraction(0)
    for pid in trace.correct():
        mine = [t for t, e in epoch_entries(trace, pid, cfg.f) if e == e_final]
        if not mine:
            if end_time > t_ef + 2 * cfg.delta:
                out.append(f"tight_entry: P{pid} never entered epoch {e_final} "
                           f"though the run passed {t_ef + 2 * cfg.delta}")
            continue
        if mine[0] > t_ef + 2 * cfg.delta:
            out.append(f"tight_entry: P{pid} entered epoch {e_final} at {mine[0]} "
                       f"> {t_ef + 2 * cfg.delta}")
    return out


def check_view_overlap(trace, cfg, crypto=None):
    out = []
    _, e_final, _ = stable_epochs(trace, cfg)
    if e_final is None:
        return out
    correct = trace.correct()
    lo = (e_final - 1) * (cfg.f + 1) + 1
    views = range(lo, lo + cfg.f + 1)
    intervals = {pid: {v: (s, e) for v, s, e in view_intervals(trace, pid)}
                 for pid in correct}
    for v in views:
        if any(v not in intervals[pid] for pid in correct):
            continue
        start = max(intervals[pid][v][0] for pid in correct)
        ends = [intervals[pid][v][1] for pid in correct
                if intervals[pid][v][1] is not None]
        if ends and min(ends) - start < cfg.overlap:
            out.append(f"view_overlap: view {v} of epoch {e_final} overlapped only "
                       f"{min(ends) - start} < {cfg.overlap}")
    return out


def check_entry_bound(trace, cfg, crypto=None):
    out = []
    t0 = sync_reference_time(trace, cfg)
    _, e_final, t_ef = stable_epochs(trace, cfg)
    bound = t0 + cfg.epoch_duration + 4 * cfg.delta
    if e_final is None:
        end_time = trace.events[-1].time if trace.events else Fraction(0)
        if end_time > bound:
            out.append(f"entry_bound: no post-stabilization epoch entered though "
                       f"the run passed {bound}")
        return out
    if t_ef > bound:
        out.append(f"entry_bound: first stable epoch entered at {t_ef} > {bound}")
    return out


def check_epoch_budget(trace, cfg, crypto=None):
    out = []
    t_s = find_sync_time(trace, cfg)
    if t_s is None:
        return out
    hi = t_s + cfg.overlap
    for pid in trace.correct():
        cnt = sum(1 for t, _ in epoch_entries(trace, pid, cfg.f)
                  if cfg.gst <= t <= hi)
        if cnt > 4:
            out.append(f"epoch_budget: P{pid} entered {cnt} epochs in "
                       f"[{cfg.gst}, {hi}]")
    return out


def check_entry_spacing(trace, cfg, crypto=None):
    out = []
    for pid in trace.correct():
        entries = epoch_entries(trace, pid, cfg.f)
        for (t1, e1), (t2, e2) in zip(entries, entries[1:]):
            if t1 >= cfg.gst and t2 - t1 < cfg.delta:
                out.append(f"entry_spacing: P{pid} entered epochs {e1},{e2} only "
                           f"{t2 - t1} apart")
    return out


def check_epoch_succession(trace, cfg, crypto=None):
    e_max, e_final, _ = stable_epochs(trace, cfg)
    if e_final is not None and e_final != e_max + 1:
        return [f"epoch_succession: e_final={e_final} but e_max={e_max}"]
    return []


def check_agreement(trace, cfg, crypto=None):
    values = {v for p, (_, v) in decide_times(trace).items()
              if p not in trace.byzantine}
    if len(values) > 1:
        return [f"agreement: correct processes decided {sorted(map(str, values))}"]
    return []


def _iter_qcs(trace):
    for ev in trace.events:
        if ev.kind in ("send", "byz") and isinstance(ev.payload, CoreMessage):
            if ev.payload.qc is not None:
                yield ev, ev.payload.qc


def check_conflicting_qcs(trace, cfg, crypto=None):
    seen: dict[tuple, object] = {}
    out = []
    reported = set()
    for ev, qc in _iter_qcs(trace):
        if crypto is not None and not crypto.combined_verify(
                vote_message(qc.phase, qc.value, qc.view), qc.sig):
            continue
        key = (qc.phase, qc.view)
        if key in seen and seen[key] != qc.value and key not in reported:
            reported.add(key)
            out.append(f"conflicting_qcs: {key[0]} QCs for view {key[1]} carry "
                       f"values {seen[key]} and {qc.value}")
        seen.setdefault(key, qc.value)
    return out


def check_unforgeable_sigs(trace, cfg, crypto=None):
    if crypto is None:
        return []
    out = []
    correct = set(trace.correct())
    threshold = {"quorum": 2 * cfg.f + 1, "cert": cfg.f + 1}

    def tsigs_in(obj):
        if isinstance(obj, ThresholdSignature):
            yield obj
        elif isinstance(obj, QuorumCertificate):
            yield obj.sig
        elif isinstance(obj, Certificate):
            yield obj.tsig
        elif isinstance(obj, EnterEpochMsg):
            yield obj.tsig
        elif isinstance(obj, CertificateMsg):
            yield obj.cert.tsig
        elif isinstance(obj, CoreMessage):
            if obj.qc is not None:
                yield obj.qc.sig
            if isinstance(obj.cert, Certificate):
                yield obj.cert.tsig

    for ev in trace.events:
        if ev.kind != "send":
            continue
        for tsig in tsigs_in(ev.payload):
            k = threshold.get(tsig.scheme, 0)
            signed = crypto.signers_for_digest(tsig.scheme, tsig.digest)
            honest = [s for s in tsig.signers if s in correct and s in signed]
            if len(honest) < k - cfg.f:
                out.append(f"unforgeable_sigs: tsig {tsig.summary()} in a correct "
                           f"send has only {len(honest)} honest ledgered signers")
    return out


def check_core_word_budget(trace, cfg, crypto=None):
    out = []
    per: dict[tuple[int, int], int] = {}
    for ev in trace.events:
        if ev.kind == "send" and isinstance(ev.payload, CoreMessage):
            key = (ev.process, ev.payload.view)
            per[key] = per.get(key, 0) + 1
    for (pid, view), cnt in sorted(per.items()):
        bound = 4 * cfg.n + 4 if leader(view, cfg.n) == pid else 4
        if cnt > bound:
            out.append(f"core_word_budget: P{pid} sent {cnt} view-core messages "
                       f"in view {view} (bound {bound})")
    return out


def check_message_words(trace, cfg, crypto=None):
    out = []
    for ev in trace.events:
        if ev.kind == "send" and ev.words < 1:
            out.append(f"message_words: P{ev.process} send at {ev.time} "
                       f"carries {ev.words} words")
    return out


def check_delay_bounds(trace, cfg, crypto=None):
    out = []
    sends: dict[int, TraceEvent] = {}
    for ev in trace.events:
        if ev.kind in ("send", "byz") and ev.seq is not None:
            sends[ev.seq] = ev
    for ev in trace.events:
        if ev.kind != "deliver" or ev.seq not in sends:
            continue
        sent = sends[ev.seq]
        delay = ev.time - sent.time
        if sent.time >= cfg.gst and not (0 < delay <= cfg.delta):
            out.append(f"delay_bounds: envelope #{ev.seq} sent {sent.time} "
                       f"delivered {ev.time}")
        elif delay < 0:
            out.append(f"delay_bounds: envelope #{ev.seq} delivered before sent")
    return out


def _verifying_certs(trace, crypto):
    for ev in trace.events:
        if ev.kind not in ("send", "byz"):
            continue
        certs = []
        if isinstance(ev.payload, CertificateMsg):
            certs.append((ev.payload.value, ev.payload.cert))
        elif isinstance(ev.payload, CoreMessage) and isinstance(ev.payload.cert, Certificate):
            certs.append((ev.payload.cert.subject, ev.payload.cert))
        for value, cert in certs:
            if crypto.combined_verify(ANY_VALUE_TAG, cert.tsig):
                yield ev, None, cert
            elif value is not None and crypto.combined_verify(
                    value_message(value), cert.tsig):
                yield ev, value, cert


def check_cert_computability(trace, cfg, crypto=None):
    if crypto is None or cfg.protocol != "squad":
        return []
    proposals = {cfg.proposals[p] for p in trace.correct()}
    if len(proposals) != 1:
        return []
    v = proposals.pop()
    out = []
    for ev, value, cert in _verifying_certs(trace, crypto):
        if value is None:
            out.append(f"cert_computability: any-value certificate "
                       f"{cert.summary()} appeared despite unanimity on {v}")
        elif value != v:
            out.append(f"cert_computability: certificate for {value} appeared "
                       f"despite unanimity on {v}")
    return out


def check_cert_liveness(trace, cfg, crypto=None):
    if cfg.protocol != "squad":
        return []
    out = []
    deadline = cfg.gst + 2 * cfg.delta
    for pid in trace.correct():
        exits = [ev.time for ev in trace.events
                 if ev.kind == "send" and ev.process == pid
                 and isinstance(ev.payload, CertificateMsg)]
        if not exits:
            out.append(f"cert_liveness: P{pid} never obtained a certificate")
        elif exits[0] > deadline:
            out.append(f"cert_liveness: P{pid} exited certification at {exits[0]} "
                       f"> {deadline}")
    return out


def check_cert_word_budget(trace, cfg, crypto=None):
    if cfg.protocol != "squad":
        return []
    out = []
    for pid in trace.correct():
        cnt = sum(1 for ev in trace.events
                  if ev.kind == "send" and ev.process == pid
                  and isinstance(ev.payload, CERT_MESSAGE_TYPES))
        if cnt > 3 * cfg.n:
            out.append(f"cert_word_budget: P{pid} sent {cnt} certification "
                       f"messages (> {3 * cfg.n})")
    return out


RARESYNC_CHECKS = {
    "monotonic_views": check_monotonic_views,
    "no_view_skip": check_no_view_skip,
    "view_bounds": check_view_bounds,
    "epoch_entry_quorum": check_epoch_entry_quorum,
    "quiet_period": check_quiet_period,
    "tight_entry": check_tight_entry,
    "view_overlap": check_view_overlap,
    "entry_bound": check_entry_bound,
    "epoch_budget": check_epoch_budget,
    "entry_spacing": check_entry_spacing,
    "epoch_succession": check_epoch_succession,
}

CORE_CHECKS = {
    "agreement": check_agreement,
    "conflicting_qcs": check_conflicting_qcs,
    "unforgeable_sigs": check_unforgeable_sigs,
    "core_word_budget": check_core_word_budget,
}

GENERIC_CHECKS = {
    "monotonic_views": check_monotonic_views,
    "message_words": check_message_words,
    "delay_bounds": check_delay_bounds,
}

CERT_CHECKS = {
    "cert_computability": check_cert_computability,
    "cert_liveness": check_cert_liveness,
    "cert_word_budget": check_cert_word_budget,
}

ALL_CHECKS = {**RARESYNC_CHECKS, **CORE_CHECKS, **GENERIC_CHECKS, **CERT_CHECKS}


def checks_for(protocol: str) -> dict:
    checks = dict(GENERIC_CHECKS)
    checks.update(CORE_CHECKS)
    if protocol in ("raresync-quad", "squad"):
        checks.update(RARESYNC_CHECKS)
    if protocol == "squad":
        checks.update(CERT_CHECKS)
    return checks


def check_invariants(trace: Trace, cfg, crypto=None) -> list[str]:
    out = []
    for name, fn in checks_for(cfg.protocol).items():
        out.extend(fn(trace, cfg, crypto))
    return out


# --------------------------------------------------------------------------
# Report
# --------------------------------------------------------------------------

@dataclass
class MetricsReport:
    protocol: str
    n: int
    f: int
    seed: int
    scenario: str
    decided: bool
    words_post_gst: int = 0
    words_sync_window: int = 0
    t_s: Optional[Fraction] = None
    t_d: Optional[Fraction] = None
    latency: Optional[Fraction] = None
    epochs_entered: dict[int, int] = field(default_factory=dict)
    epochs_max: int = 0
    violations: list[str] = field(default_factory=list)

    def csv_row(self) -> str:
        def fmt(x):
            return "" if x is None else str(x)
        return ",".join([
            self.protocol, str(self.n), str(self.f), str(self.seed),
            self.scenario, str(self.words_post_gst), str(self.words_sync_window),
            fmt(self.t_s), fmt(self.t_d), fmt(self.latency),
            str(self.epochs_max), str(len(self.violations)),
        ])


CSV_HEADER = ("protocol,n,f,seed,scenario,words_post_gst,words_sync_window,"
              "t_s,t_d,latency,epochs_max,violations")


def build_report(trace: Trace, cfg, crypto=None) -> MetricsReport:
    t_d = decision_time(trace)
    t_s = find_sync_time(trace, cfg)
    words = count_words(trace, cfg.gst, t_d)
    sync_words = sync_window_words(trace, cfg, t_s)
    violations = check_invariants(trace, cfg, crypto)
    entries = {}
    hi = None if t_s is None else t_s + cfg.overlap
    for pid in trace.correct():
        entries[pid] = sum(1 for t, _ in epoch_entries(trace, pid, cfg.f)
                           if t >= cfg.gst and (hi is None or t <= hi))
    latency = None if t_d is None else max(Fraction(0), t_d - cfg.gst)
    return MetricsReport(
        protocol=cfg.protocol, n=cfg.n, f=cfg.f, seed=cfg.seed,
        scenario=cfg.name, decided=trace.decided_all,
        words_post_gst=words, words_sync_window=sync_words,
        t_s=t_s, t_d=t_d, latency=latency,
        epochs_entered=entries,
        epochs_max=max(entries.values(), default=0),
        violations=violations)

"""Peer and network state machines.

Each peer is a pure transition function over its local state; the
network driver feeds it a totally ordered event stream.  A processed
event may emit follow-up events (forwards, replies, gossip); those
cascade in FIFO order and are fully drained before the next input event
is taken, so a prefix of the input schedule always produces a prefix of
the trace.  A budget caps the total number of processed events, and all
tie-breaking randomness comes from a seed, so runs are reproducible
bit-for-bit.

Counter updates saturate at their scoring caps (delivery counters at
their per-topic caps, mesh time at quantum * cap).  Saturation never
changes a score, but it makes the reachable state space finite in the
relevant dimensions, which is what lets an attack run be certified by
exact state repetition across heartbeats.
"""

from __future__ import annotations

import hashlib
import random
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .scoring import calc_nbr_scores_map, calc_p3, decay_counters
from .types import (
    AppEvent,
    Connect1,
    Connect2,
    Event,
    GlobalCounters,
    GraftMsg,
    HeartbeatEvent,
    IhaveMsg,
    IwantMsg,
    JoinEvent,
    LeaveEvent,
    MsgEvent,
    MsgsState,
    NbrTopicState,
    Network,
    Payload,
    PayloadId,
    PayloadMsg,
    PeerId,
    PeerState,
    PruneMsg,
    RCV,
    Rational,
    ScoringConfig,
    SND,
    SubMsg,
    TopicCounters,
    TopicId,
    Trace,
    UnsubMsg,
    ZERO_GCTRS,
    ZERO_TCTRS,
    lookup_gctrs,
    lookup_score,
    lookup_tctrs,
    rat,
    replace,
    with_peer,
    without_peer,
)

# A payload whose content carries this marker fails validation; it lets a
# schedule drive the invalid-delivery counter deterministically.
INVALID_CONTENT_PREFIX = "invalid"

# Serve the same (message, peer) pair at most this many times.
SERVE_LIMIT = 3

# Opportunistic grafts per heartbeat when the mesh median score is low.
OPPORTUNISTIC_GRAFTS = 2


class EngineError(ValueError):
    """Malformed event or violated operation precondition."""


class UnknownTopicError(EngineError):
    """An event references a topic absent from the scoring config."""


@dataclass(frozen=True, slots=True)
class RunBudget:
    """Cap on total processed events plus the seed for all tie-breaking."""

    max_events: int
    seed: int = 0


class Rng:
    """Deterministic shuffles, split per decision context.

    Every selection shuffles its candidate list (sorted first, so input
    order is irrelevant) with a generator seeded from (seed, context),
    which keeps unrelated decisions from perturbing each other.
    """

    def __init__(self, seed: int):
        self.seed = seed

    def shuffle(self, items: Iterable[str], *context: str) -> list[str]:
        ordered = sorted(items)
        tag = f"{self.seed}|" + "|".join(context)
        key = int.from_bytes(hashlib.sha256(tag.encode()).digest()[:8], "big")
        random.Random(key).shuffle(ordered)
        return ordered


@dataclass(frozen=True, slots=True)
class TransitionResult:
    state: PeerState
    events: tuple[Event, ...]


def payload_is_valid(payload: Payload) -> bool:
    return not payload.content.startswith(INVALID_CONTENT_PREFIX)


def _require_topic(topic: TopicId, cfg: ScoringConfig) -> None:
    if topic not in cfg:
        raise UnknownTopicError(f"topic {topic!r} is not in the scoring config")


def _bump_gctr_bhvo(gcm: dict[PeerId, GlobalCounters], peer: PeerId) -> None:
    g = lookup_gctrs(peer, gcm)
    gcm[peer] = replace(g, bhvo=rat(g.bhvo) + 1)


def _known_neighbors(subs: dict[TopicId, tuple[PeerId, ...]]) -> list[PeerId]:
    return sorted({p for peers in subs.values() for p in peers})


def _apply_prune_penalty(
    tcm: dict[tuple[PeerId, TopicId], TopicCounters],
    peer: PeerId,
    topic: TopicId,
    cfg: ScoringConfig,
) -> None:
    """Record the squared mesh-delivery deficit of the current counters
    as sticky mesh-failure penalty.  Zero while the activation window has
    not elapsed or deliveries meet the threshold."""
    p = cfg[topic].params
    tc = lookup_tctrs(peer, topic, tcm)
    deficit = calc_p3(
        tc.mesh_time,
        p.activation_window,
        tc.mesh_message_deliveries,
        p.mesh_message_deliveries_cap,
        p.mesh_message_deliveries_threshold,
    )
    if deficit:
        tcm[(peer, topic)] = replace(
            tc, mesh_failure_penalty=rat(tc.mesh_failure_penalty) + deficit
        )


# ---------------------------------------------------------------------------
# Neighbour/topic transitions


def update_nbr_topic_state(
    nts: NbrTopicState,
    scores: dict[PeerId, Rational],
    tcm: dict[tuple[PeerId, TopicId], TopicCounters],
    gcm: dict[PeerId, GlobalCounters],
    ev: Event,
    cfg: ScoringConfig,
    budget: RunBudget,
    self_id: PeerId,
) -> tuple[NbrTopicState, tuple[Event, ...], dict, dict, dict]:
    """Handle subscription, mesh-control, connect and publish events.

    Only the counter map can change besides the topic state (prunes
    record the sticky deficit); scores change at heartbeats only.
    """
    rng = Rng(budget.seed)
    subs = dict(nts.nbr_topic_subs)
    fanout = dict(nts.topic_fanout)
    last_pub = dict(nts.last_pub)
    mesh = dict(nts.topic_mesh)
    tcm = dict(tcm)
    gcm = dict(gcm)
    emitted: list[Event] = []

    def own_subscriptions() -> tuple[TopicId, ...]:
        return tuple(sorted(mesh))

    if isinstance(ev, MsgEvent) and ev.verb == RCV:
        sender = ev.other
        msg = ev.msg
        if isinstance(msg, SubMsg):
            _require_topic(msg.topic, cfg)
            subs[msg.topic] = with_peer(subs.get(msg.topic, ()), sender)
        elif isinstance(msg, UnsubMsg):
            _require_topic(msg.topic, cfg)
            t = msg.topic
            if t in subs:
                subs[t] = without_peer(subs[t], sender)
            if t in mesh:
                mesh[t] = without_peer(mesh[t], sender)
            if t in fanout:
                fanout[t] = without_peer(fanout[t], sender)
        elif isinstance(msg, GraftMsg):
            _require_topic(msg.topic, cfg)
            t = msg.topic
            if t in mesh and lookup_score(sender, scores) >= 0:
                mesh[t] = with_peer(mesh[t], sender)
                subs[t] = with_peer(subs.get(t, ()), sender)
            else:
                emitted.append(MsgEvent(self_id, SND, sender, PruneMsg(t)))
        elif isinstance(msg, PruneMsg):
            _require_topic(msg.topic, cfg)
            t = msg.topic
            if t in mesh:
                mesh[t] = without_peer(mesh[t], sender)
            _apply_prune_penalty(tcm, sender, t, cfg)
        elif isinstance(msg, Connect1):
            for t in msg.topics:
                _require_topic(t, cfg)
                subs[t] = with_peer(subs.get(t, ()), sender)
            emitted.append(MsgEvent(self_id, SND, sender, Connect2(own_subscriptions())))
        elif isinstance(msg, Connect2):
            for t in msg.topics:
                _require_topic(t, cfg)
                subs[t] = with_peer(subs.get(t, ()), sender)
        else:
            raise EngineError(f"not a neighbour/topic event: {ev!r}")
    elif isinstance(ev, JoinEvent):
        _require_topic(ev.topic, cfg)
        t = ev.topic
        if t not in mesh:
            chosen: list[PeerId] = []
            d = cfg[t].params.d
            for pool, tag in ((fanout.get(t, ()), "join-fanout"), (subs.get(t, ()), "join-subs")):
                for cand in rng.shuffle(pool, self_id, tag, t):
                    if cand not in chosen and len(chosen) < d:
                        chosen.append(cand)
            mesh[t] = tuple(sorted(chosen))
            fanout.pop(t, None)
            last_pub.pop(t, None)
            for nbr in _known_neighbors(subs):
                emitted.append(MsgEvent(self_id, SND, nbr, SubMsg(t)))
            for member in chosen:
                emitted.append(MsgEvent(self_id, SND, member, GraftMsg(t)))
    elif isinstance(ev, LeaveEvent):
        _require_topic(ev.topic, cfg)
        t = ev.topic
        if t in mesh:
            for nbr in _known_neighbors(subs):
                emitted.append(MsgEvent(self_id, SND, nbr, UnsubMsg(t)))
            for member in mesh[t]:
                emitted.append(MsgEvent(self_id, SND, member, PruneMsg(t)))
            del mesh[t]
    elif isinstance(ev, AppEvent):
        payload = ev.payload
        t = payload.top
        _require_topic(t, cfg)
        if t in mesh:
            for member in mesh[t]:
                if member != payload.origin:
                    emitted.append(MsgEvent(self_id, SND, member, PayloadMsg(payload)))
        else:
            d = cfg[t].params.d
            current = [x for x in fanout.get(t, ()) if x in subs.get(t, ())]
            if len(current) < d:
                pool = [x for x in subs.get(t, ()) if x not in current]
                current += rng.shuffle(pool, self_id, "fanout", t)[: d - len(current)]
            fanout[t] = tuple(sorted(current))
            last_pub[t] = 0
            for member in fanout[t]:
                emitted.append(MsgEvent(self_id, SND, member, PayloadMsg(payload)))
    else:
        raise EngineError(f"not a neighbour/topic event: {ev!r}")

    new_nts = NbrTopicState(subs, fanout, last_pub, mesh)
    return new_nts, tuple(emitted), tcm, gcm, scores


# ---------------------------------------------------------------------------
# Message-state transitions


def _cap_increment(value: Rational, cap: Rational) -> Rational:
    return min(rat(value) + 1, rat(cap))


def update_msgs_state(
    mst: MsgsState,
    ev: Event,
    tcm: dict[tuple[PeerId, TopicId], TopicCounters],
    gcm: dict[PeerId, GlobalCounters],
    cfg: ScoringConfig,
    nts: NbrTopicState,
    self_id: PeerId,
) -> tuple[MsgsState, tuple[Event, ...], dict, dict]:
    """Handle payload, IHAVE and IWANT events.

    The neighbour/topic state is a read-only view here: forwarding
    targets and the mesh-membership test for delivery counters need it.
    """
    if not (isinstance(ev, MsgEvent) and ev.verb == RCV):
        raise EngineError(f"not a data event: {ev!r}")
    sender = ev.other
    msg = ev.msg
    tcm = dict(tcm)
    gcm = dict(gcm)
    emitted: list[Event] = []

    recently_seen = mst.recently_seen
    pld_cache = mst.pld_cache
    hwindows = mst.hwindows
    waiting_for = mst.waiting_for
    served = mst.served
    ihaves_received = mst.ihaves_received
    ihaves_sent = mst.ihaves_sent

    first = cfg.first().params

    if isinstance(msg, PayloadMsg):
        payload = msg.payload
        t = payload.top
        _require_topic(t, cfg)
        params = cfg[t].params
        in_mesh = sender in nts.mesh(t)
        if not payload_is_valid(payload):
            tc = lookup_tctrs(sender, t, tcm)
            tcm[(sender, t)] = replace(
                tc, invalid_message_deliveries=rat(tc.invalid_message_deliveries) + 1
            )
        elif mst.seen(payload.pid):
            # Duplicate delivery: counts toward the mesh delivery rate
            # while the message is still in the seen window.
            if in_mesh:
                tc = lookup_tctrs(sender, t, tcm)
                tcm[(sender, t)] = replace(
                    tc,
                    mesh_message_deliveries=_cap_increment(
                        tc.mesh_message_deliveries, params.mesh_message_deliveries_cap
                    ),
                )
        else:
            tc = lookup_tctrs(sender, t, tcm)
            tc = replace(
                tc,
                first_message_deliveries=_cap_increment(
                    tc.first_message_deliveries, params.p2_cap
                ),
            )
            if in_mesh:
                tc = replace(
                    tc,
                    mesh_message_deliveries=_cap_increment(
                        tc.mesh_message_deliveries, params.mesh_message_deliveries_cap
                    ),
                )
            tcm[(sender, t)] = tc
            recently_seen = dict(recently_seen)
            recently_seen[(payload.pid, sender)] = 0
            pld_cache = ((payload, sender),) + pld_cache
            hwindows = (hwindows[0] + 1,) + hwindows[1:]
            if payload.pid in waiting_for:
                waiting_for = dict(waiting_for)
                del waiting_for[payload.pid]
            for member in nts.mesh(t):
                if member != sender and member != payload.origin:
                    emitted.append(MsgEvent(self_id, SND, member, PayloadMsg(payload)))
    elif isinstance(msg, IhaveMsg):
        ihaves_received += 1
        if ihaves_received > first.d_lazy:
            # IHAVE flood: beyond the per-window allowance the sender is
            # charged a misbehaviour point and the advertisement ignored.
            _bump_gctr_bhvo(gcm, sender)
        else:
            outstanding = sum(1 for q in waiting_for.values() if q == sender)
            accepted: list[PayloadId] = []
            for pid in msg.pids:
                if mst.seen(pid) or pid in waiting_for or pid in accepted:
                    continue
                if outstanding + len(accepted) >= first.d:
                    break
                accepted.append(pid)
            if accepted:
                waiting_for = dict(waiting_for)
                for pid in accepted:
                    waiting_for[pid] = sender
                emitted.append(MsgEvent(self_id, SND, sender, IwantMsg(tuple(accepted))))
    elif isinstance(msg, IwantMsg):
        served = dict(served)
        for pid in msg.pids:
            payload = mst.cached(pid)
            if payload is None:
                continue
            count = rat(served.get((pid, sender), 0))
            if count >= SERVE_LIMIT:
                continue
            served[(pid, sender)] = count + 1
            emitted.append(MsgEvent(self_id, SND, sender, PayloadMsg(payload)))
    else:
        raise EngineError(f"not a data event: {ev!r}")

    new_mst = MsgsState(
        recently_seen, pld_cache, hwindows, waiting_for, served,
        ihaves_received, ihaves_sent,
    )
    return new_mst, tuple(emitted), tcm, gcm


def _record_local_publish(mst: MsgsState, payload: Payload, self_id: PeerId) -> MsgsState:
    """Cache an application-published payload so it is gossipable and
    servable, and never re-counted as a fresh delivery."""
    if mst.seen(payload.pid):
        return mst
    recently_seen = dict(mst.recently_seen)
    recently_seen[(payload.pid, self_id)] = 0
    return replace(
        mst,
        recently_seen=recently_seen,
        pld_cache=((payload, self_id),) + mst.pld_cache,
        hwindows=(mst.hwindows[0] + 1,) + mst.hwindows[1:],
    )


# ---------------------------------------------------------------------------
# Heartbeat


def _median(values: list[Fraction]) -> Fraction:
    ordered = sorted(values)
    n = len(ordered)
    mid = n // 2
    if n % 2 == 1:
        return rat(ordered[mid])
    return (rat(ordered[mid - 1]) + rat(ordered[mid])) / 2


def heartbeat(
    self_id: PeerId,
    st: PeerState,
    elapsed: Rational,
    cfg: ScoringConfig,
    budget: RunBudget,
) -> TransitionResult:
    """Periodic maintenance: accrue mesh time, rescore neighbours, charge
    broken promises, rebalance meshes, refresh fanout, emit gossip, shift
    message history, and decay counters on the decay cadence."""
    if elapsed <= 0:
        raise EngineError("heartbeat elapsed time must be positive")
    cfg.require_nonempty()
    rng = Rng(budget.seed)
    first = cfg.first().params

    subs = dict(st.nts.nbr_topic_subs)
    fanout = dict(st.nts.topic_fanout)
    last_pub = dict(st.nts.last_pub)
    mesh = {t: st.nts.topic_mesh[t] for t in st.nts.topic_mesh}
    tcm = dict(st.nbr_tctrs)
    gcm = dict(st.nbr_gctrs)
    emitted: list[Event] = []

    # (1) mesh time accrues for current mesh members, saturating at the
    # scoring ceiling so long-stable states can repeat exactly.
    for t in sorted(mesh):
        p = cfg[t].params
        ceiling = rat(p.mesh_time_quantum) * rat(p.time_quanta_in_mesh_cap)
        for member in mesh[t]:
            tc = lookup_tctrs(member, t, tcm)
            tcm[(member, t)] = replace(
                tc, mesh_time=min(rat(tc.mesh_time) + rat(elapsed), ceiling)
            )

    # (2) refresh scores.
    scores: dict[PeerId, Rational] = dict(calc_nbr_scores_map(tcm, gcm, cfg))

    # (3) broken promises: whatever is still awaited at a heartbeat was
    # not delivered in time (fulfilment cascades drain before heartbeats).
    for pid in sorted(st.mst.waiting_for):
        _bump_gctr_bhvo(gcm, st.mst.waiting_for[pid])
    waiting_for: dict[PayloadId, PeerId] = {}

    # (4) mesh maintenance.
    for t in sorted(mesh):
        p = cfg[t].params
        members = list(mesh[t])
        for member in list(members):
            if lookup_score(member, scores) < 0:
                members.remove(member)
                _apply_prune_penalty(tcm, member, t, cfg)
                emitted.append(MsgEvent(self_id, SND, member, PruneMsg(t)))
        if len(members) < p.d_low:
            cands = [
                x
                for x in subs.get(t, ())
                if x not in members and lookup_score(x, scores) >= 0
            ]
            for cand in rng.shuffle(cands, self_id, "hb-graft", t)[: p.d - len(members)]:
                members.append(cand)
                emitted.append(MsgEvent(self_id, SND, cand, GraftMsg(t)))
        elif len(members) > p.d_high:
            keep = set(rng.shuffle(members, self_id, "hb-trim", t)[: p.d])
            for member in list(members):
                if member not in keep:
                    members.remove(member)
                    _apply_prune_penalty(tcm, member, t, cfg)
                    emitted.append(MsgEvent(self_id, SND, member, PruneMsg(t)))
        if members and p.d_low <= len(members) <= p.d_high:
            median = _median([rat(lookup_score(m, scores)) for m in members])
            if median < p.opportunistic_graft_threshold:
                cands = [
                    x
                    for x in subs.get(t, ())
                    if x not in members and rat(lookup_score(x, scores)) > median
                ]
                for cand in rng.shuffle(cands, self_id, "hb-opp", t)[:OPPORTUNISTIC_GRAFTS]:
                    members.append(cand)
                    emitted.append(MsgEvent(self_id, SND, cand, GraftMsg(t)))
        mesh[t] = tuple(sorted(members))

    # (5) fanout maintenance.
    for t in sorted(fanout):
        p = cfg[t].params
        age = rat(last_pub.get(t, 0)) + rat(elapsed)
        if age > p.fanout_ttl:
            del fanout[t]
            last_pub.pop(t, None)
            continue
        last_pub[t] = age
        current = [x for x in fanout[t] if x in subs.get(t, ())]
        if len(current) < p.d:
            pool = [x for x in subs.get(t, ()) if x not in current]
            current += rng.shuffle(pool, self_id, "hb-fanout", t)[: p.d - len(current)]
        fanout[t] = tuple(sorted(current))

    # (6) gossip: advertise the most recent cache windows to a few
    # non-mesh subscribers per subscribed topic.  The per-window send
    # counter resets with the window below, so only the emissions remain
    # observable.
    gossip_windows = int(rat(first.mcache_gossip))
    gossip_span = sum(st.mst.hwindows[:gossip_windows])
    for t in sorted(mesh):
        p = cfg[t].params
        pids = tuple(
            payload.pid
            for payload, _s in st.mst.pld_cache[:gossip_span]
            if payload.top == t
        )
        if not pids:
            continue
        cands = [x for x in subs.get(t, ()) if x not in mesh[t]]
        for target in rng.shuffle(cands, self_id, "hb-gossip", t)[: p.d_lazy]:
            emitted.append(MsgEvent(self_id, SND, target, IhaveMsg(pids)))

    # (7) shift message history: a fresh window opens, old windows beyond
    # the cache length drop (with their cached payloads), seen entries
    # age out, and the per-window counters reset.
    retain = sum(st.mst.hwindows[: first.mcache_len - 1])
    pld_cache = st.mst.pld_cache[:retain]
    hwindows = (0,) + st.mst.hwindows[: first.mcache_len - 1]
    recently_seen = {}
    for key, age in st.mst.recently_seen.items():
        new_age = rat(age) + rat(elapsed)
        if new_age <= first.seen_ttl:
            recently_seen[key] = new_age

    mst = MsgsState(
        recently_seen=recently_seen,
        pld_cache=pld_cache,
        hwindows=hwindows,
        waiting_for=waiting_for,
        served=dict(st.mst.served),
        ihaves_received=0,
        ihaves_sent=0,
    )

    # (8) decay on the configured cadence: topic counters decay by their
    # topic's factors, global counters by the first entry's (the config
    # replicates them anyway).
    since_decay = rat(st.since_decay) + rat(elapsed)
    if since_decay >= first.decay_interval:
        since_decay = since_decay % rat(first.decay_interval)
        for (peer, t), tc in tcm.items():
            new_tc, _g = decay_counters(tc, ZERO_GCTRS, cfg[t].params)
            tcm[(peer, t)] = new_tc
        for peer, g in gcm.items():
            _tc, new_g = decay_counters(ZERO_TCTRS, g, first)
            gcm[peer] = new_g

    nts = NbrTopicState(subs, fanout, last_pub, mesh)
    state = PeerState(nts, mst, tcm, gcm, scores, since_decay)
    return TransitionResult(state, tuple(emitted))


# ---------------------------------------------------------------------------
# Per-peer transition


def transition(
    self_id: PeerId,
    st: PeerState,
    ev: Event,
    cfg: ScoringConfig,
    budget: RunBudget,
) -> TransitionResult:
    """Dispatch one event at one peer."""
    if ev.peer != self_id:
        raise EngineError(f"event {ev!r} does not concern peer {self_id}")
    cfg.require_nonempty()

    if isinstance(ev, HeartbeatEvent):
        return heartbeat(self_id, st, ev.elapsed, cfg, budget)

    if isinstance(ev, MsgEvent) and ev.verb == SND:
        # Sending is pure routing at the network level; the sender's
        # state changed when the send was emitted.
        return TransitionResult(st, ())

    if isinstance(ev, MsgEvent) and ev.verb == RCV:
        threshold = cfg.first().params.gray_list_threshold
        if rat(lookup_score(ev.other, st.nbr_scores)) < threshold:
            # Graylisted source: drop the event; an IHAVE still counts as
            # misbehaviour.
            if isinstance(ev.msg, IhaveMsg):
                gcm = dict(st.nbr_gctrs)
                _bump_gctr_bhvo(gcm, ev.other)
                return TransitionResult(replace(st, nbr_gctrs=gcm), ())
            return TransitionResult(st, ())
        if isinstance(ev.msg, (IhaveMsg, IwantMsg, PayloadMsg)):
            mst, events, tcm, gcm = update_msgs_state(
                st.mst, ev, st.nbr_tctrs, st.nbr_gctrs, cfg, st.nts, self_id
            )
            state = replace(st, mst=mst, nbr_tctrs=tcm, nbr_gctrs=gcm)
            return TransitionResult(state, events)
        nts, events, tcm, gcm, scores = update_nbr_topic_state(
            st.nts, st.nbr_scores, st.nbr_tctrs, st.nbr_gctrs, ev, cfg, budget, self_id
        )
        state = replace(st, nts=nts, nbr_tctrs=tcm, nbr_gctrs=gcm, nbr_scores=scores)
        return TransitionResult(state, events)

    if isinstance(ev, (JoinEvent, LeaveEvent, AppEvent)):
        nts, events, tcm, gcm, scores = update_nbr_topic_state(
            st.nts, st.nbr_scores, st.nbr_tctrs, st.nbr_gctrs, ev, cfg, budget, self_id
        )
        mst = st.mst
        if isinstance(ev, AppEvent):
            mst = _record_local_publish(st.mst, ev.payload, self_id)
        state = replace(
            st, nts=nts, mst=mst, nbr_tctrs=tcm, nbr_gctrs=gcm, nbr_scores=scores
        )
        return TransitionResult(state, events)

    raise EngineError(f"event not in the vocabulary: {ev!r}")


# ---------------------------------------------------------------------------
# Network driver


def run_with_monitor(
    net: Network,
    events: Sequence[Event],
    budget: RunBudget,
    cfg: ScoringConfig,
    on_event: Callable[[Event, Network], None] | None = None,
) -> Network:
    """Process a schedule with bounded cascades.

    Emitted events are drained FIFO before the next input event.  A send
    routes one matching receive when the destination is part of the
    network; events at unknown peers are processed as no-ops (dangling
    peers are inert).  `on_event` observes every processed event with
    the network state after it.
    """
    cfg.require_nonempty()
    cascade: deque[Event] = deque()
    inputs = iter(events)
    processed = 0
    while processed < budget.max_events:
        if cascade:
            ev = cascade.popleft()
        else:
            ev = next(inputs, None)
            if ev is None:
                break
        if isinstance(ev, MsgEvent) and ev.verb == SND:
            if ev.other in net:
                cascade.append(MsgEvent(ev.other, RCV, ev.peer, ev.msg))
        elif ev.peer in net:
            result = transition(ev.peer, net[ev.peer], ev, cfg, budget)
            net = net.updated(ev.peer, result.state)
            cascade.extend(result.events)
        processed += 1
        if on_event is not None:
            on_event(ev, net)
    return net


def run_network(
    net: Network, events: Sequence[Event], budget: RunBudget, cfg: ScoringConfig
) -> Trace:
    """Run a schedule and return the full (event, network-after) trace."""
    trace: Trace = []
    run_with_monitor(net, events, budget, cfg, lambda ev, n: trace.append((ev, n)))
    return trace


def run_network_violations(
    net: Network,
    events: Sequence[Event],
    budget: RunBudget,
    cfg: ScoringConfig,
    victim: PeerId,
    attacker: PeerId,
    attacked_topics: Sequence[TopicId],
) -> list[bool]:
    """Like run_network, but record only one boolean per heartbeat at the
    victim: does the victim's view of the attacker violate the score
    property?  Memory stays flat regardless of run length."""
    from .attacks import score_prop_violation

    bits: list[bool] = []

    def observe(ev: Event, current: Network) -> None:
        if isinstance(ev, HeartbeatEvent) and ev.peer == victim and victim in current:
            bits.append(
                score_prop_violation(current[victim], attacker, attacked_topics, cfg)
            )

    run_with_monitor(net, events, budget, cfg, observe)
    return bits


__all__ = [
    "EngineError", "INVALID_CONTENT_PREFIX", "OPPORTUNISTIC_GRAFTS", "Rng",
    "RunBudget", "SERVE_LIMIT", "TransitionResult", "UnknownTopicError",
    "heartbeat", "payload_is_valid", "run_network", "run_network_violations",
    "run_with_monitor", "transition", "update_msgs_state",
    "update_nbr_topic_state",
]

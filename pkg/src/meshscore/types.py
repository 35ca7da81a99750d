"""Shared data model for the mesh scoring simulator.

Identifiers are plain strings (totally ordered, so every iteration over a
map can be made deterministic by sorting keys).  All numeric state is kept
in exact rational arithmetic (`int` / `fractions.Fraction`): scores and
counters decay fractionally, and fixed-point detection compares states for
exact equality, which floating point would break.

Counter maps are *total*: lookups of absent keys return an all-zero
default instead of failing.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Mapping, Union

PeerId = str
TopicId = str
PayloadId = str

# Exact rational: plain ints are accepted everywhere a Fraction is.
Rational = Union[int, Fraction]

ZERO = Fraction(0)


def rat(value: Rational) -> Fraction:
    """Coerce to Fraction without ever passing through float."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    raise TypeError(f"not an exact rational: {value!r}")


_RATIONAL_RE = re.compile(r"^-?\d+(/[1-9]\d*)?$")


def parse_rational(text: str) -> Fraction:
    """Parse 'num/den' or an integer literal, bit-exactly.

    Decimal and exponent forms are rejected: the config grammar only
    admits forms that cannot have gone through a float.
    """
    text = text.strip()
    if not _RATIONAL_RE.match(text):
        raise ValueError(f"not an exact rational literal: {text!r}")
    return Fraction(text)


def format_rational(value: Rational) -> str:
    return str(Fraction(value))


# ---------------------------------------------------------------------------
# Payloads


@dataclass(frozen=True, slots=True)
class Payload:
    """A full message: opaque content, id (stands for a content hash),
    topic, and originating peer.  Two payloads with the same pid are the
    same message for dedup purposes."""

    content: str
    pid: PayloadId
    top: TopicId
    origin: PeerId


# ---------------------------------------------------------------------------
# Counters


@dataclass(frozen=True, slots=True)
class TopicCounters:
    """Per-(peer, topic) behaviour counters feeding the topic score."""

    invalid_message_deliveries: Rational = 0
    mesh_message_deliveries: Rational = 0
    mesh_time: Rational = 0
    first_message_deliveries: Rational = 0
    mesh_failure_penalty: Rational = 0

    def check(self) -> None:
        for name in (
            "invalid_message_deliveries",
            "mesh_message_deliveries",
            "mesh_time",
            "first_message_deliveries",
            "mesh_failure_penalty",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"TopicCounters.{name} must be >= 0")


@dataclass(frozen=True, slots=True)
class GlobalCounters:
    """Per-peer cross-topic counters.

    apco is the application-provided score (may be negative), ipco the IP
    colocation factor, bhvo the accumulated misbehaviour count.  The two
    latter are inputs here, never derived from addresses or validators.
    """

    apco: Rational = 0
    ipco: Rational = 0
    bhvo: Rational = 0

    def check(self) -> None:
        if self.ipco < 0:
            raise ValueError("GlobalCounters.ipco must be >= 0")
        if self.bhvo < 0:
            raise ValueError("GlobalCounters.bhvo must be >= 0")


ZERO_TCTRS = TopicCounters()
ZERO_GCTRS = GlobalCounters()


# ---------------------------------------------------------------------------
# Scoring configuration


@dataclass(frozen=True, slots=True)
class Weights:
    """Score weights.  Sign conventions: w1, w2, w5 reward good behaviour
    (non-negative); w3, w3b are penalties that may be disabled by setting
    them to zero; w4, w6, w7 are strictly negative penalties."""

    w1: Rational
    w2: Rational
    w3: Rational
    w3b: Rational
    w4: Rational
    w5: Rational
    w6: Rational
    w7: Rational


_DECAY_FIELDS = (
    "mesh_message_deliveries_decay",
    "first_message_deliveries_decay",
    "behaviour_penalty_decay",
    "mesh_failure_penalty_decay",
    "invalid_message_deliveries_decay",
    "decay_to_zero",
)


@dataclass(frozen=True, slots=True)
class Params:
    """Per-topic protocol parameters (times are in seconds)."""

    activation_window: Rational
    mesh_time_quantum: Rational
    p2_cap: Rational
    time_quanta_in_mesh_cap: Rational
    mesh_message_deliveries_cap: Rational
    mesh_message_deliveries_threshold: Rational
    topic_cap: Rational
    gray_list_threshold: Rational
    d: int
    d_low: int
    d_high: int
    d_lazy: int
    hbm_interval: Rational
    fanout_ttl: Rational
    mcache_len: int
    mcache_gossip: Rational
    seen_ttl: Rational
    opportunistic_graft_threshold: Rational
    topic_weight: Rational
    mesh_message_deliveries_decay: Rational
    first_message_deliveries_decay: Rational
    behaviour_penalty_decay: Rational
    mesh_failure_penalty_decay: Rational
    invalid_message_deliveries_decay: Rational
    decay_to_zero: Rational
    decay_interval: Rational


@dataclass(frozen=True, slots=True)
class TopicConfig:
    """One topic's (weights, params) pair."""

    weights: Weights
    params: Params


@dataclass(frozen=True, slots=True)
class ScoringConfig:
    """Map topic -> (weights, params): the whole application profile.

    The topic cap applies across topics but is replicated in every entry;
    it is read from the first entry in ascending key order, and
    `validate_config` enforces that the replicas agree.
    """

    entries: dict[TopicId, TopicConfig]

    def topics(self) -> list[TopicId]:
        return sorted(self.entries)

    def require_nonempty(self) -> None:
        if not self.entries:
            raise ValueError("scoring requires a non-empty config")

    def first(self) -> TopicConfig:
        self.require_nonempty()
        return self.entries[min(self.entries)]

    def __contains__(self, topic: TopicId) -> bool:
        return topic in self.entries

    def __getitem__(self, topic: TopicId) -> TopicConfig:
        return self.entries[topic]


def validate_config(cfg: ScoringConfig) -> list[str]:
    """Return every violated invariant of a config; empty iff valid.

    Violations are data, not failures: a harness can report all of them
    at once (a deployment once shipped with an out-of-range weight, which
    is exactly the mistake this catches).
    """
    problems: list[str] = []
    for topic in cfg.topics():
        w = cfg[topic].weights
        p = cfg[topic].params
        where = f"[{topic}]"
        if w.w1 < 0:
            problems.append(f"{where} w1 must be non-negative")
        if w.w2 < 0:
            problems.append(f"{where} w2 must be non-negative")
        if w.w3 > 0:
            problems.append(f"{where} w3 must be non-positive")
        if w.w3b > 0:
            problems.append(f"{where} w3b must be non-positive")
        if w.w4 >= 0:
            problems.append(f"{where} w4 must be negative")
        if w.w5 < 0:
            problems.append(f"{where} w5 must be non-negative")
        if w.w6 >= 0:
            problems.append(f"{where} w6 must be negative")
        if w.w7 >= 0:
            problems.append(f"{where} w7 must be negative")
        if not (p.d_low <= p.d <= p.d_high):
            problems.append(f"{where} requires d_low <= d <= d_high")
        if p.mesh_message_deliveries_threshold > p.mesh_message_deliveries_cap:
            problems.append(
                f"{where} mesh_message_deliveries_threshold must not exceed the cap"
            )
        if p.mesh_message_deliveries_cap <= 0:
            problems.append(f"{where} mesh_message_deliveries_cap must be positive")
        if p.mesh_message_deliveries_threshold <= 0:
            problems.append(
                f"{where} mesh_message_deliveries_threshold must be positive"
            )
        if p.mesh_time_quantum <= 0:
            problems.append(f"{where} mesh_time_quantum must be positive")
        if p.hbm_interval <= 0:
            problems.append(f"{where} hbm_interval must be positive")
        if p.fanout_ttl <= 0:
            problems.append(f"{where} fanout_ttl must be positive")
        if p.mcache_len <= 0:
            problems.append(f"{where} mcache_len must be positive")
        if p.mcache_gossip < 0:
            problems.append(f"{where} mcache_gossip must be non-negative")
        if p.seen_ttl < 0:
            problems.append(f"{where} seen_ttl must be non-negative")
        if p.decay_interval <= 0:
            problems.append(f"{where} decay_interval must be positive")
        if p.activation_window < 0:
            problems.append(f"{where} activation_window must be non-negative")
        if p.opportunistic_graft_threshold < 0:
            problems.append(
                f"{where} opportunistic_graft_threshold must be non-negative"
            )
        if p.topic_weight < 0:
            problems.append(f"{where} topic_weight must be non-negative")
        for name in _DECAY_FIELDS:
            v = getattr(p, name)
            if not (0 < v < 1):
                problems.append(f"{where} {name} must lie strictly between 0 and 1")
    caps = {Fraction(cfg[t].params.topic_cap) for t in cfg.topics()}
    if len(caps) > 1:
        problems.append("topic_cap must be identical across all topics")
    return problems


# ---------------------------------------------------------------------------
# Peer state


@dataclass(frozen=True, slots=True)
class NbrTopicState:
    """What a peer knows about the topics around it: which neighbours
    subscribe where, its fanout for topics it publishes into without
    subscribing, time since it last published per fanout topic, and its
    own mesh memberships.  A peer's own subscriptions are exactly the
    keys of `topic_mesh` (a subscribed topic may have an empty mesh)."""

    nbr_topic_subs: dict[TopicId, tuple[PeerId, ...]] = field(default_factory=dict)
    topic_fanout: dict[TopicId, tuple[PeerId, ...]] = field(default_factory=dict)
    last_pub: dict[TopicId, Rational] = field(default_factory=dict)
    topic_mesh: dict[TopicId, tuple[PeerId, ...]] = field(default_factory=dict)

    def subscribed(self, topic: TopicId) -> bool:
        return topic in self.topic_mesh

    def mesh(self, topic: TopicId) -> tuple[PeerId, ...]:
        return self.topic_mesh.get(topic, ())

    def subs(self, topic: TopicId) -> tuple[PeerId, ...]:
        return self.nbr_topic_subs.get(topic, ())

    def known_neighbors(self) -> list[PeerId]:
        seen: set[PeerId] = set()
        for peers in self.nbr_topic_subs.values():
            seen.update(peers)
        return sorted(seen)


MsgKey = tuple[Union[Payload, PayloadId], PeerId]


@dataclass(frozen=True, slots=True)
class MsgsState:
    """A peer's message bookkeeping.

    `pld_cache` is ordered newest-first; `hwindows[i]` counts how many
    cache entries were received in the i-th most recent heartbeat window,
    so the first `sum(hwindows[:k])` cache entries are exactly the k most
    recent windows' messages.
    """

    recently_seen: dict[MsgKey, Rational] = field(default_factory=dict)
    pld_cache: tuple[tuple[Payload, PeerId], ...] = ()
    hwindows: tuple[int, ...] = (0,)
    waiting_for: dict[PayloadId, PeerId] = field(default_factory=dict)
    served: dict[MsgKey, Rational] = field(default_factory=dict)
    ihaves_received: int = 0
    ihaves_sent: int = 0

    def seen(self, pid: PayloadId) -> bool:
        for key in self.recently_seen:
            msg = key[0]
            if msg == pid or (isinstance(msg, Payload) and msg.pid == pid):
                return True
        return False

    def cached(self, pid: PayloadId) -> Payload | None:
        for payload, _sender in self.pld_cache:
            if payload.pid == pid:
                return payload
        return None


@dataclass(frozen=True, slots=True)
class PeerState:
    """One peer's full local state.

    `since_decay` accumulates heartbeat-elapsed time toward the next
    decay interval; it is bookkeeping for the decay cadence and defaults
    to zero.
    """

    nts: NbrTopicState = field(default_factory=NbrTopicState)
    mst: MsgsState = field(default_factory=MsgsState)
    nbr_tctrs: dict[tuple[PeerId, TopicId], TopicCounters] = field(default_factory=dict)
    nbr_gctrs: dict[PeerId, GlobalCounters] = field(default_factory=dict)
    nbr_scores: dict[PeerId, Rational] = field(default_factory=dict)
    since_decay: Rational = 0


@dataclass(frozen=True, slots=True)
class Network:
    """The whole network: peer id -> local state.  Peers referenced in
    some state but absent from this map are legal and inert (they never
    respond to anything)."""

    peers: dict[PeerId, PeerState]

    def __contains__(self, peer: PeerId) -> bool:
        return peer in self.peers

    def __getitem__(self, peer: PeerId) -> PeerState:
        return self.peers[peer]

    def updated(self, peer: PeerId, state: PeerState) -> "Network":
        peers = dict(self.peers)
        peers[peer] = state
        return Network(peers)


# ---------------------------------------------------------------------------
# Events

SND = "snd"
RCV = "rcv"


@dataclass(frozen=True, slots=True)
class Connect1:
    topics: tuple[TopicId, ...]


@dataclass(frozen=True, slots=True)
class Connect2:
    topics: tuple[TopicId, ...]


@dataclass(frozen=True, slots=True)
class PruneMsg:
    topic: TopicId


@dataclass(frozen=True, slots=True)
class GraftMsg:
    topic: TopicId


@dataclass(frozen=True, slots=True)
class SubMsg:
    topic: TopicId


@dataclass(frozen=True, slots=True)
class UnsubMsg:
    topic: TopicId


@dataclass(frozen=True, slots=True)
class IhaveMsg:
    pids: tuple[PayloadId, ...]


@dataclass(frozen=True, slots=True)
class IwantMsg:
    pids: tuple[PayloadId, ...]


@dataclass(frozen=True, slots=True)
class PayloadMsg:
    payload: Payload


Message = Union[
    Connect1, Connect2, PruneMsg, GraftMsg, SubMsg, UnsubMsg,
    IhaveMsg, IwantMsg, PayloadMsg,
]

RPC_KINDS = (Connect1, Connect2, PruneMsg, GraftMsg, SubMsg, UnsubMsg)
DATA_KINDS = (IhaveMsg, IwantMsg, PayloadMsg)


@dataclass(frozen=True, slots=True)
class MsgEvent:
    """(peer SND/RCV other, message).  For RCV events `other` is the
    sender; for SND events `other` is the destination."""

    peer: PeerId
    verb: str
    other: PeerId
    msg: Message


@dataclass(frozen=True, slots=True)
class JoinEvent:
    peer: PeerId
    topic: TopicId


@dataclass(frozen=True, slots=True)
class LeaveEvent:
    peer: PeerId
    topic: TopicId


@dataclass(frozen=True, slots=True)
class HeartbeatEvent:
    peer: PeerId
    elapsed: Rational

    def check(self) -> None:
        if self.elapsed <= 0:
            raise ValueError("heartbeat elapsed time must be positive")


@dataclass(frozen=True, slots=True)
class AppEvent:
    """The local application hands a payload to its peer for publishing."""

    peer: PeerId
    payload: Payload


Event = Union[MsgEvent, JoinEvent, LeaveEvent, HeartbeatEvent, AppEvent]

TraceEntry = tuple[Event, Network]
Trace = list[TraceEntry]


def event_actor(ev: Event) -> PeerId:
    return ev.peer


# ---------------------------------------------------------------------------
# Total-map lookups


def lookup_score(p: PeerId, scores: Mapping[PeerId, Rational]) -> Rational:
    """Stored score, or 0 when absent."""
    return scores.get(p, 0)


def lookup_tctrs(
    p: PeerId, t: TopicId, m: Mapping[tuple[PeerId, TopicId], TopicCounters]
) -> TopicCounters:
    """Stored counters, or the all-zero record when absent."""
    return m.get((p, t), ZERO_TCTRS)


def lookup_gctrs(p: PeerId, m: Mapping[PeerId, GlobalCounters]) -> GlobalCounters:
    """Stored counters, or (0, 0, 0) when absent."""
    return m.get(p, ZERO_GCTRS)


def subscribers(subs: Mapping[TopicId, Iterable[PeerId]]) -> list[PeerId]:
    """All subscribers across topics, duplicates preserved.

    Entries are folded in ascending key order with each topic's list
    prepended to the accumulator, so later topics' subscribers come
    first: {T1: [P1 P2 P3], T2: [P4 P5 P1]} -> [P4 P5 P1 P1 P2 P3].
    """
    out: list[PeerId] = []
    for topic in sorted(subs):
        out = list(subs[topic]) + out
    return out


# ---------------------------------------------------------------------------
# Small pure helpers over peer lists (kept sorted and duplicate-free by
# the engine so every selection is deterministic).


def with_peer(peers: tuple[PeerId, ...], p: PeerId) -> tuple[PeerId, ...]:
    if p in peers:
        return peers
    return tuple(sorted((*peers, p)))


def without_peer(peers: tuple[PeerId, ...], p: PeerId) -> tuple[PeerId, ...]:
    if p not in peers:
        return peers
    return tuple(x for x in peers if x != p)


__all__ = [
    "AppEvent", "Connect1", "Connect2", "DATA_KINDS", "Event", "GlobalCounters",
    "GraftMsg", "HeartbeatEvent", "IhaveMsg", "IwantMsg", "JoinEvent",
    "LeaveEvent", "Message", "MsgEvent", "MsgKey", "MsgsState", "NbrTopicState",
    "Network", "Params", "Payload", "PayloadId", "PayloadMsg", "PeerId",
    "PeerState", "PruneMsg", "RCV", "RPC_KINDS", "Rational", "SND",
    "ScoringConfig", "SubMsg", "Trace", "TraceEntry", "TopicConfig",
    "TopicCounters", "TopicId", "UnsubMsg", "Weights", "ZERO_GCTRS",
    "ZERO_TCTRS", "event_actor", "format_rational", "lookup_gctrs",
    "lookup_score", "lookup_tctrs", "parse_rational", "rat", "subscribers",
    "validate_config", "with_peer", "without_peer", "replace",
]

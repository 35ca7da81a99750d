"""Attack construction against the scoring defense.

An attack gadget pairs an attacker A with a victim V that are mesh
neighbours on a set of shared topics; A starves V in the attacked subset
(0 or 1 deliveries per heartbeat: blockade or throttle) while delivering
generously in the rest.  The attacked-topic scores go negative, but the
capped topic sum keeps A's overall score positive, so V never prunes A.
The violation predicate checks exactly that shape, and an attack run is
certified by exact repetition of the victim's post-heartbeat state:
once the state repeats, every future heartbeat violates too, which
refutes the temporal claim that continuously underperforming topics
eventually drag the overall score down.

Gadget start states establish mesh membership by direct state surgery;
a scripted join/graft reachability demo lives with the narrative
examples.  Attackers never run honest heartbeats: their whole behaviour
is the scripted schedule, and their own attacked-topic meshes omit the
victims (a malicious peer does not forward where it blockades).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Sequence

from .engine import RunBudget, run_with_monitor
from .scoring import calc_score, calc_score_topic
from .types import (
    AppEvent,
    Event,
    HeartbeatEvent,
    MsgEvent,
    Network,
    Payload,
    PayloadMsg,
    PeerId,
    PeerState,
    RCV,
    Rational,
    ScoringConfig,
    TopicId,
    lookup_tctrs,
    rat,
    replace,
    with_peer,
    without_peer,
)


class AttackError(ValueError):
    """Gadget invariants or cut preconditions do not hold."""


@dataclass(frozen=True, slots=True)
class AttackGadget:
    """<attacker, victim, attacked topics> with the shared-topic context."""

    attacker: PeerId
    victim: PeerId
    attacked_topics: tuple[TopicId, ...]
    shared_topics: tuple[TopicId, ...]

    def check(self) -> None:
        if not set(self.attacked_topics) <= set(self.shared_topics):
            raise AttackError("attacked topics must be a subset of shared topics")

    def check_in(self, net: Network) -> None:
        """The victim must hold the attacker as a mesh member in every
        shared topic in the start state."""
        self.check()
        if self.victim not in net:
            raise AttackError(f"victim {self.victim!r} not in network")
        vstate = net[self.victim]
        for t in self.shared_topics:
            if self.attacker not in vstate.nts.mesh(t):
                raise AttackError(
                    f"attacker {self.attacker!r} is not a mesh member of "
                    f"{self.victim!r} in topic {t!r}"
                )


@dataclass(frozen=True, slots=True)
class AttackSchedule:
    events: tuple[Event, ...]
    per_heartbeat: tuple[int, int, Rational]  # (m, n, e)
    rounds: int


@dataclass(frozen=True, slots=True)
class AttackOutcome:
    violations: list[bool]
    fixed_point_reached: bool
    first_violation_index: int | None
    fixed_point_index: int | None


def apply_gadget(net: Network, gadget: AttackGadget) -> Network:
    """State surgery establishing the gadget: the victim meshes with the
    attacker on every shared topic; the attacker meshes back only on the
    non-attacked ones (it will not forward where it blockades)."""
    gadget.check()
    a, v = gadget.attacker, gadget.victim
    if v not in net:
        raise AttackError(f"victim {v!r} not in network")
    vstate = net[v]
    vsubs = dict(vstate.nts.nbr_topic_subs)
    vmesh = dict(vstate.nts.topic_mesh)
    for t in gadget.shared_topics:
        vsubs[t] = with_peer(vsubs.get(t, ()), a)
        vmesh[t] = with_peer(vmesh.get(t, ()), a)
    net = net.updated(
        v, replace(vstate, nts=replace(vstate.nts, nbr_topic_subs=vsubs, topic_mesh=vmesh))
    )
    if a in net:
        astate = net[a]
        asubs = dict(astate.nts.nbr_topic_subs)
        amesh = dict(astate.nts.topic_mesh)
        for t in gadget.shared_topics:
            asubs[t] = with_peer(asubs.get(t, ()), v)
            if t in gadget.attacked_topics:
                amesh[t] = without_peer(amesh.get(t, ()), v)
            else:
                amesh[t] = with_peer(amesh.get(t, ()), v)
        net = net.updated(
            a,
            replace(astate, nts=replace(astate.nts, nbr_topic_subs=asubs, topic_mesh=amesh)),
        )
    return net


# ---------------------------------------------------------------------------
# Schedule emission


def attack_payload(a: PeerId, topic: TopicId, round_index: int, index: int) -> Payload:
    """Fresh, deterministic payload: distinct per (attacker, topic,
    round, index) so first-delivery credit accrues every round."""
    tag = f"{a}.{topic}.r{round_index}.{index}"
    return Payload(content=f"msg-{tag}", pid=f"pid-{tag}", top=topic, origin=a)


def emit_mesh_msg_deliveries(
    a: PeerId,
    v: PeerId,
    topics: Sequence[TopicId],
    count: int,
    round_index: int = 0,
) -> list[Event]:
    """`count` direct deliveries from a to v in each listed topic."""
    return [
        MsgEvent(v, RCV, a, PayloadMsg(attack_payload(a, t, round_index, i)))
        for t in topics
        for i in range(count)
    ]


def emit_evnts(
    a: PeerId,
    v: PeerId,
    ts: Sequence[TopicId],
    ats: Sequence[TopicId],
    n: int,
    m: int,
    e: Rational,
    round_index: int = 0,
) -> list[Event]:
    """One heartbeat round of the gadget: m deliveries per attacked
    topic, n per other shared topic, then the victim's heartbeat."""
    if not set(ats) <= set(ts):
        raise AttackError("attacked topics must be a subset of the shared topics")
    others = [t for t in ts if t not in set(ats)]
    events = emit_mesh_msg_deliveries(a, v, ats, m, round_index)
    events += emit_mesh_msg_deliveries(a, v, others, n, round_index)
    events.append(HeartbeatEvent(v, e))
    return events


def build_gadget_schedule(
    gadget: AttackGadget, m: int, n: int, e: Rational, rounds: int
) -> AttackSchedule:
    events: list[Event] = []
    ts = sorted(gadget.shared_topics)
    ats = sorted(gadget.attacked_topics)
    for r in range(rounds):
        events += emit_evnts(gadget.attacker, gadget.victim, ts, ats, n, m, e, r)
    return AttackSchedule(tuple(events), (m, n, e), rounds)


# ---------------------------------------------------------------------------
# Violation predicate and attack runs


def score_prop_violation(
    ps: PeerState, p: PeerId, ats: Sequence[TopicId], cfg: ScoringConfig
) -> bool:
    """True iff p's overall score in ps stays positive while every
    attacked topic scores negative (for no attacked topics: overall
    positive)."""
    cfg.require_nonempty()
    for t in ats:
        tc = lookup_tctrs(p, t, ps.nbr_tctrs)
        if not calc_score_topic(tc, cfg[t]) < 0:
            return False
    return calc_score(p, ps.nbr_tctrs, ps.nbr_gctrs, cfg) > 0


def run_violations_with_fixed_point(
    net: Network,
    events: Sequence[Event],
    budget: RunBudget,
    cfg: ScoringConfig,
    victim: PeerId,
    attacker: PeerId,
    attacked_topics: Sequence[TopicId],
) -> AttackOutcome:
    """Drive a schedule recording one violation bit per victim heartbeat
    and watching for exact repetition of consecutive post-heartbeat
    victim states."""
    bits: list[bool] = []
    prev_state: list[PeerState | None] = [None]
    fixed_at: list[int | None] = [None]

    def observe(ev: Event, current: Network) -> None:
        if not (isinstance(ev, HeartbeatEvent) and ev.peer == victim):
            return
        if victim not in current:
            return
        state = current[victim]
        bits.append(score_prop_violation(state, attacker, attacked_topics, cfg))
        if fixed_at[0] is None and prev_state[0] is not None and state == prev_state[0]:
            fixed_at[0] = len(bits) - 2
        prev_state[0] = state

    run_with_monitor(net, events, budget, cfg, observe)
    first_true = next((i for i, b in enumerate(bits) if b), None)
    return AttackOutcome(
        violations=bits,
        fixed_point_reached=fixed_at[0] is not None,
        first_violation_index=first_true,
        fixed_point_index=fixed_at[0],
    )


def run_gadget_attack(
    net: Network,
    gadget: AttackGadget,
    m: int,
    n: int,
    rounds: int,
    cfg: ScoringConfig,
    budget: RunBudget,
) -> AttackOutcome:
    """Run one gadget for the given number of heartbeat rounds, with the
    heartbeat period taken from the config."""
    gadget.check_in(net)
    e = cfg.first().params.hbm_interval
    schedule = build_gadget_schedule(gadget, m, n, e, rounds)
    return run_violations_with_fixed_point(
        net, schedule.events, budget, cfg, gadget.victim, gadget.attacker,
        gadget.attacked_topics,
    )


def induced_liveness_counterexample(outcome: AttackOutcome) -> bool:
    """A violating fixed point certifies the temporal counterexample:
    the state repeats forever, so the violation repeats forever."""
    if not outcome.fixed_point_reached or outcome.fixed_point_index is None:
        return False
    return outcome.violations[outcome.fixed_point_index]


# ---------------------------------------------------------------------------
# Eclipse composition


def build_eclipse(
    net: Network,
    victim: PeerId,
    attackers: Sequence[PeerId],
    ats: Sequence[TopicId],
    cfg: ScoringConfig,
) -> list[AttackGadget]:
    """One gadget per attacker.  The attackers must be exactly the
    victim's mesh in every attacked topic, so nothing honest can deliver
    there."""
    if victim not in net:
        raise AttackError(f"victim {victim!r} not in network")
    vstate = net[victim]
    attacker_set = set(attackers)
    for t in ats:
        mesh = set(vstate.nts.mesh(t))
        if mesh - attacker_set:
            raise AttackError(
                f"victim has non-attacker mesh members in {t!r}: {sorted(mesh - attacker_set)}"
            )
        if attacker_set - mesh:
            raise AttackError(
                f"attackers not in the victim's {t!r} mesh: {sorted(attacker_set - mesh)}"
            )
        if not mesh:
            raise AttackError(f"victim has no mesh members in attacked topic {t!r}")
    gadgets = []
    for a in sorted(attacker_set):
        shared = tuple(t for t in sorted(vstate.nts.topic_mesh) if a in vstate.nts.mesh(t))
        g = AttackGadget(a, victim, tuple(sorted(ats)), shared)
        g.check_in(net)
        gadgets.append(g)
    return gadgets


def build_multi_gadget_schedule(
    gadgets: Sequence[AttackGadget], m: int, n: int, e: Rational, rounds: int
) -> list[Event]:
    """Interleave several gadgets round-robin: per round, each attacker's
    deliveries in attacker order, then a single victim heartbeat per
    victim."""
    events: list[Event] = []
    for r in range(rounds):
        for g in sorted(gadgets, key=lambda g: (g.attacker, g.victim)):
            ats = sorted(g.attacked_topics)
            others = [t for t in sorted(g.shared_topics) if t not in set(ats)]
            events += emit_mesh_msg_deliveries(g.attacker, g.victim, ats, m, r)
            events += emit_mesh_msg_deliveries(g.attacker, g.victim, others, n, r)
        for v in sorted({g.victim for g in gadgets}):
            events.append(HeartbeatEvent(v, e))
    return events


# ---------------------------------------------------------------------------
# Partition composition


def mesh_edges(net: Network, topic: TopicId) -> set[tuple[PeerId, PeerId]]:
    """Undirected mesh adjacency for one topic (an edge exists if either
    side holds it)."""
    edges: set[tuple[PeerId, PeerId]] = set()
    for p, state in net.peers.items():
        for q in state.nts.mesh(topic):
            edges.add((min(p, q), max(p, q)))
    return edges


def mesh_components(
    net: Network, topic: TopicId, removed: Sequence[tuple[PeerId, PeerId]] = ()
) -> list[set[PeerId]]:
    """Connected components of the topic mesh graph, with the given
    edges removed, over peers subscribed to the topic."""
    removed_norm = {(min(a, b), max(a, b)) for a, b in removed}
    edges = mesh_edges(net, topic) - removed_norm
    nodes = {p for p, st in net.peers.items() if st.nts.subscribed(topic)}
    adj: dict[PeerId, list[PeerId]] = {p: [] for p in nodes}
    for a, b in edges:
        if a in adj and b in adj:
            adj[a].append(b)
            adj[b].append(a)
    components: list[set[PeerId]] = []
    remaining = set(nodes)
    while remaining:
        start = min(remaining)
        comp = {start}
        queue = deque([start])
        while queue:
            node = queue.popleft()
            for nbr in adj[node]:
                if nbr not in comp:
                    comp.add(nbr)
                    queue.append(nbr)
        components.append(comp)
        remaining -= comp
    return components


def build_partition(net: Network, cut: Sequence[AttackGadget]) -> list[AttackGadget]:
    """Validate that the gadgets cover an edge cut of every attacked
    topic's mesh: removing the covered edges must leave at least two
    components."""
    if not cut:
        raise AttackError("a partition needs at least one gadget")
    for g in cut:
        g.check_in(net)
    attacked = sorted({t for g in cut for t in g.attacked_topics})
    for t in attacked:
        covered = [
            (g.attacker, g.victim) for g in cut if t in g.attacked_topics
        ]
        components = mesh_components(net, t, covered)
        if len(components) < 2:
            raise AttackError(
                f"gadgets do not cut the {t!r} mesh: still one component"
            )
    return list(cut)


def probe_events(
    publisher: PeerId, topic: TopicId, round_index: int, tag: str = "probe"
) -> list[Event]:
    """One honest application publish, used to watch dissemination."""
    payload = Payload(
        content=f"{tag}-{publisher}-{topic}-r{round_index}",
        pid=f"{tag}:{publisher}:{topic}:r{round_index}",
        top=topic,
        origin=publisher,
    )
    return [AppEvent(publisher, payload)]


__all__ = [
    "AttackError", "AttackGadget", "AttackOutcome", "AttackSchedule",
    "apply_gadget", "attack_payload", "build_eclipse", "build_gadget_schedule",
    "build_multi_gadget_schedule", "build_partition", "emit_evnts",
    "emit_mesh_msg_deliveries", "induced_liveness_counterexample",
    "mesh_components", "mesh_edges", "probe_events", "run_gadget_attack",
    "run_violations_with_fixed_point", "score_prop_violation",
]

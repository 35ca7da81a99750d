"""The score function.

A neighbour's score is

    min(topic_cap, sum over topics of
        topic_weight * (w1*P1 + w2*P2 + w3*P3 + w3b*P3b + w4*P4))
      + w5*P5 + w6*P6 + w7*P7

where P1 rewards time spent in shared meshes (capped quanta), P2 rewards
being among the first to forward messages (capped), P3 penalises a mesh
delivery rate below the configured threshold (squared deficit, active
only after the activation window), P3b carries the sticky mesh-failure
penalty accumulated at prune time, P4 penalises invalid messages
(squared), P5 is the application-provided score, P6 the IP colocation
factor (used linearly), and P7 squares the accumulated misbehaviour
count.  The global weights w5/w6/w7 are replicated per topic and read
from the config's first entry.

Everything here is a pure function over exact rationals.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from .types import (
    GlobalCounters,
    Params,
    PeerId,
    Rational,
    ScoringConfig,
    TopicConfig,
    TopicCounters,
    TopicId,
    lookup_gctrs,
    lookup_tctrs,
    rat,
    replace,
)


def calc_p1(mesh_time: Rational, mesh_time_quantum: Rational, cap: Rational) -> Fraction:
    """Time spent in the mesh, in quanta, capped."""
    return min(rat(mesh_time) / rat(mesh_time_quantum), rat(cap))


def calc_p2(first_message_deliveries: Rational, p2_cap: Rational) -> Fraction:
    """First-delivery count, capped."""
    return min(rat(first_message_deliveries), rat(p2_cap))


def calc_p3(
    mesh_time: Rational,
    activation_window: Rational,
    mesh_message_deliveries: Rational,
    cap: Rational,
    threshold: Rational,
) -> Fraction:
    """Squared mesh-delivery deficit, active once mesh_time exceeds the
    activation window.  Deliveries are capped before comparing against the
    threshold."""
    if mesh_time <= activation_window:
        return Fraction(0)
    effective = min(rat(mesh_message_deliveries), rat(cap))
    if effective >= threshold:
        return Fraction(0)
    deficit = rat(threshold) - effective
    return deficit * deficit


def calc_p3b(
    mesh_time: Rational,
    activation_window: Rational,
    mesh_failure_penalty: Rational,
    mesh_message_deliveries: Rational,
    cap: Rational,
    threshold: Rational,
) -> Fraction:
    """The sticky mesh-failure penalty.

    The value itself accumulates at prune time (the pruner adds the
    then-current squared delivery deficit); scoring just reads it back,
    which is what makes it survive the prune.
    """
    del mesh_time, activation_window, mesh_message_deliveries, cap, threshold
    return rat(mesh_failure_penalty)


def calc_p4(invalid_message_deliveries: Rational) -> Fraction:
    """Squared invalid-message count."""
    v = rat(invalid_message_deliveries)
    return v * v


def calc_p7(bhvo: Rational) -> Fraction:
    """Squared misbehaviour count (IHAVE spam, broken promises, ...)."""
    v = rat(bhvo)
    return v * v


@dataclass(frozen=True, slots=True)
class TopicScoreBreakdown:
    p1: Fraction
    p2: Fraction
    p3: Fraction
    p3b: Fraction
    p4: Fraction
    topic_score: Fraction


def topic_score_breakdown(tc: TopicCounters, tcfg: TopicConfig) -> TopicScoreBreakdown:
    w, p = tcfg.weights, tcfg.params
    p1 = calc_p1(tc.mesh_time, p.mesh_time_quantum, p.time_quanta_in_mesh_cap)
    p2 = calc_p2(tc.first_message_deliveries, p.p2_cap)
    p3 = calc_p3(
        tc.mesh_time,
        p.activation_window,
        tc.mesh_message_deliveries,
        p.mesh_message_deliveries_cap,
        p.mesh_message_deliveries_threshold,
    )
    p3b = calc_p3b(
        tc.mesh_time,
        p.activation_window,
        tc.mesh_failure_penalty,
        tc.mesh_message_deliveries,
        p.mesh_message_deliveries_cap,
        p.mesh_message_deliveries_threshold,
    )
    p4 = calc_p4(tc.invalid_message_deliveries)
    total = rat(p.topic_weight) * (
        rat(w.w1) * p1
        + rat(w.w2) * p2
        + rat(w.w3) * p3
        + rat(w.w3b) * p3b
        + rat(w.w4) * p4
    )
    return TopicScoreBreakdown(p1, p2, p3, p3b, p4, total)


def calc_score_topic(tc: TopicCounters, tcfg: TopicConfig) -> Fraction:
    """One topic's contribution to a neighbour's score."""
    return topic_score_breakdown(tc, tcfg).topic_score


def max_topic_score(tcfg: TopicConfig) -> Fraction:
    """Analytic upper bound on any topic score: only P1 and P2 contribute
    positively and both are capped."""
    w, p = tcfg.weights, tcfg.params
    return rat(p.topic_weight) * (
        rat(w.w1) * rat(p.time_quanta_in_mesh_cap) + rat(w.w2) * rat(p.p2_cap)
    )


def calc_score(
    p: PeerId,
    tctrs: Mapping[tuple[PeerId, TopicId], TopicCounters],
    gctrs: Mapping[PeerId, GlobalCounters],
    cfg: ScoringConfig,
) -> Fraction:
    """A neighbour's full score: capped topic sum plus global terms."""
    cfg.require_nonempty()
    first = cfg.first()
    topic_sum = Fraction(0)
    for topic in cfg.topics():
        topic_sum += calc_score_topic(lookup_tctrs(p, topic, tctrs), cfg[topic])
    capped = min(rat(first.params.topic_cap), topic_sum)
    g = lookup_gctrs(p, gctrs)
    w = first.weights
    return (
        capped
        + rat(w.w5) * rat(g.apco)
        + rat(w.w6) * rat(g.ipco)
        + rat(w.w7) * calc_p7(g.bhvo)
    )


def calc_nbr_scores_map(
    tctrs: Mapping[tuple[PeerId, TopicId], TopicCounters],
    gctrs: Mapping[PeerId, GlobalCounters],
    cfg: ScoringConfig,
) -> dict[PeerId, Fraction]:
    """Score every peer appearing in either counter map.  Peers in
    neither map stay absent; lookups of them default to 0 anyway."""
    cfg.require_nonempty()
    peers = {p for p, _t in tctrs} | set(gctrs)
    return {p: calc_score(p, tctrs, gctrs, cfg) for p in sorted(peers)}


def _decay(value: Rational, factor: Rational, floor: Rational) -> Fraction:
    decayed = rat(value) * rat(factor)
    return Fraction(0) if decayed < floor else decayed


def decay_counters(
    tc: TopicCounters, g: GlobalCounters, params: Params
) -> tuple[TopicCounters, GlobalCounters]:
    """Apply one round of fractional decay; values falling strictly below
    decay_to_zero are floored to 0.  Mesh time, the application score and
    the colocation factor do not decay."""
    floor = params.decay_to_zero
    new_tc = replace(
        tc,
        mesh_message_deliveries=_decay(
            tc.mesh_message_deliveries, params.mesh_message_deliveries_decay, floor
        ),
        first_message_deliveries=_decay(
            tc.first_message_deliveries, params.first_message_deliveries_decay, floor
        ),
        mesh_failure_penalty=_decay(
            tc.mesh_failure_penalty, params.mesh_failure_penalty_decay, floor
        ),
        invalid_message_deliveries=_decay(
            tc.invalid_message_deliveries,
            params.invalid_message_deliveries_decay,
            floor,
        ),
    )
    new_g = replace(g, bhvo=_decay(g.bhvo, params.behaviour_penalty_decay, floor))
    return new_tc, new_g


__all__ = [
    "TopicScoreBreakdown", "calc_nbr_scores_map", "calc_p1", "calc_p2",
    "calc_p3", "calc_p3b", "calc_p4", "calc_p7", "calc_score",
    "calc_score_topic", "decay_counters", "max_topic_score",
    "topic_score_breakdown",
]

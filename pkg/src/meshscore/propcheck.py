"""Score-function properties, restricted generators, counterexample search.

The four checks:

  prop1  if a peer's overall score is positive, each of its topic scores
         is positive (falsifiable: the capped topic sum hides a negative
         topic behind positive ones)
  prop2  raising a bad-behaviour counter strictly lowers the score
         (falsifiable: a binding topic cap or a zeroed weight absorbs it)
  prop3  raising a good-behaviour counter never lowers the topic score
         for a peer past the activation window (holds)
  prop4  equal counters give equal scores (holds: scoring is pure)

plus the analytic per-topic maximum (holds).  The generators deliberately
restrict values so that penalties stay comparable to rewards: unsound
shapes show up within a few thousand trials instead of never.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, fields
from fractions import Fraction
from typing import Any, Callable, Sequence

from .scoring import calc_nbr_scores_map, calc_score, calc_score_topic, max_topic_score
from .types import (
    GlobalCounters,
    Params,
    PeerId,
    Rational,
    ScoringConfig,
    TopicConfig,
    TopicCounters,
    TopicId,
    Weights,
    ZERO_GCTRS,
    format_rational,
    lookup_score,
    lookup_tctrs,
    parse_rational,
    rat,
    replace,
)

TOPICS: tuple[TopicId, ...] = ("AGG", "BLOCKS", "SUB1", "SUB2", "SUB3")

BAD_COUNTERS = ("invalid_message_deliveries", "mesh_failure_penalty", "bhvo")
GOOD_COUNTERS = ("first_message_deliveries", "mesh_message_deliveries", "mesh_time")

PROPERTY_NAMES = ("prop1", "prop2", "prop3", "prop4", "maxbound")


# ---------------------------------------------------------------------------
# Restricted-value generators


def gen_topic(n: int) -> TopicId:
    return TOPICS[n % len(TOPICS)]


def gen_low(n: int) -> int:
    """The low range: {0, 1}."""
    return n % 2


def gen_high(n: int) -> int:
    """The high range: 301..400."""
    return 301 + (n % 100)


@dataclass(frozen=True, slots=True)
class CounterProfile:
    kind: str  # "good" | "bad"
    tc: TopicCounters


def gen_good_counters(n: int) -> TopicCounters:
    """Well-behaved shape: no invalid deliveries, no mesh failures, high
    delivery counts, long mesh residence."""
    return TopicCounters(
        invalid_message_deliveries=0,
        mesh_message_deliveries=gen_high(n + 2),
        mesh_time=gen_high(n + 3),
        first_message_deliveries=gen_high(n + 4),
        mesh_failure_penalty=0,
    )


def gen_bad_counters(n: int) -> TopicCounters:
    """Throttling shape: long mesh residence but almost no deliveries.
    Invalid deliveries and mesh failures stay zero; their penalties are
    so heavy they would drown the effect under test."""
    return TopicCounters(
        invalid_message_deliveries=0,
        mesh_message_deliveries=gen_low(n + 2),
        mesh_time=gen_high(n + 3),
        first_message_deliveries=gen_low(n + 4),
        mesh_failure_penalty=0,
    )


def gen_counters(n: int) -> TopicCounters:
    """Every fourth draw is a bad profile."""
    return gen_bad_counters(n) if n % 4 == 0 else gen_good_counters(n)


def gen_counter_profile(n: int) -> CounterProfile:
    kind = "bad" if n % 4 == 0 else "good"
    return CounterProfile(kind, gen_counters(n))


def gen_counter_maps(
    n: int, peers: Sequence[PeerId], topics: Sequence[TopicId]
) -> tuple[dict[tuple[PeerId, TopicId], TopicCounters], dict[PeerId, GlobalCounters]]:
    """Total assignment over peers x topics with distinct generator
    indices; global counters all zero."""
    if not peers or not topics:
        raise ValueError("gen_counter_maps needs peers and topics")
    ptc: dict[tuple[PeerId, TopicId], TopicCounters] = {}
    idx = n
    for p in peers:
        for t in topics:
            ptc[(p, t)] = gen_counters(idx)
            idx += 1
    pcm = {p: ZERO_GCTRS for p in peers}
    return ptc, pcm


def gen_random_tctrs(rnd: random.Random) -> TopicCounters:
    """Unrestricted non-negative rational counters, for bound checks."""
    def draw() -> Fraction:
        return Fraction(rnd.randint(0, 500), rnd.randint(1, 4))

    return TopicCounters(
        invalid_message_deliveries=draw(),
        mesh_message_deliveries=draw(),
        mesh_time=draw(),
        first_message_deliveries=draw(),
        mesh_failure_penalty=draw(),
    )


def gen_weights(rnd: random.Random) -> Weights:
    def nonneg() -> Fraction:
        return Fraction(rnd.randint(0, 8), rnd.randint(1, 4))

    def negative() -> Fraction:
        return -Fraction(rnd.randint(1, 8), rnd.randint(1, 4))

    return Weights(
        w1=nonneg(), w2=nonneg(), w3=-nonneg(), w3b=-nonneg(),
        w4=negative(), w5=nonneg(), w6=negative(), w7=negative(),
    )


def gen_params(rnd: random.Random) -> Params:
    d = rnd.randint(1, 12)
    cap = Fraction(rnd.randint(1, 16))
    return Params(
        activation_window=rnd.randint(0, 50),
        mesh_time_quantum=rnd.randint(1, 60),
        p2_cap=rnd.randint(0, 200),
        time_quanta_in_mesh_cap=rnd.randint(0, 50),
        mesh_message_deliveries_cap=cap,
        mesh_message_deliveries_threshold=Fraction(rnd.randint(1, int(cap))),
        topic_cap=Fraction(rnd.randint(-10, 100)),
        gray_list_threshold=Fraction(rnd.randint(-100, 0)),
        d=d,
        d_low=rnd.randint(0, d),
        d_high=rnd.randint(d, 16),
        d_lazy=rnd.randint(0, 8),
        hbm_interval=Fraction(rnd.randint(1, 120)),
        fanout_ttl=Fraction(rnd.randint(1, 120)),
        mcache_len=rnd.randint(1, 6),
        mcache_gossip=Fraction(rnd.randint(0, 4)),
        seen_ttl=Fraction(rnd.randint(0, 200)),
        opportunistic_graft_threshold=Fraction(rnd.randint(0, 10)),
        topic_weight=Fraction(rnd.randint(0, 8), rnd.randint(1, 4)),
        mesh_message_deliveries_decay=Fraction(rnd.randint(1, 9), 10),
        first_message_deliveries_decay=Fraction(rnd.randint(1, 9), 10),
        behaviour_penalty_decay=Fraction(rnd.randint(1, 9), 10),
        mesh_failure_penalty_decay=Fraction(rnd.randint(1, 9), 10),
        invalid_message_deliveries_decay=Fraction(rnd.randint(1, 9), 10),
        decay_to_zero=Fraction(1, rnd.randint(2, 1000)),
        decay_interval=Fraction(rnd.randint(1, 120)),
    )


# ---------------------------------------------------------------------------
# Counterexamples


@dataclass(frozen=True, slots=True)
class Counterexample:
    """A failing assignment plus the scores that witness the failure.
    Re-running the named check on the bindings reproduces it exactly."""

    property_name: str
    bindings: dict[str, Any]
    witness: dict[str, Fraction]


# ---------------------------------------------------------------------------
# Checks (None = pass, Counterexample = fail)


def check_prop1(
    ptc: dict[tuple[PeerId, TopicId], TopicCounters],
    pcm: dict[PeerId, GlobalCounters],
    p: PeerId,
    top: TopicId,
    cfg: ScoringConfig,
) -> Counterexample | None:
    """Overall score positive should imply each topic score positive.
    Vacuously passes when (p, top) is untracked or the overall score is
    not positive."""
    cfg.require_nonempty()
    if (p, top) not in ptc:
        return None
    # p is in the map domain, so its entry in the full score map is just
    # its own score; computing only that keeps 10k-trial searches quick.
    overall = calc_score(p, ptc, pcm, cfg)
    if not overall > 0:
        return None
    topic_score = calc_score_topic(lookup_tctrs(p, top, ptc), cfg[top])
    if topic_score > 0:
        return None
    return Counterexample(
        "prop1",
        {"p": p, "top": top, "ptc": dict(ptc), "pcm": dict(pcm)},
        {"overall": rat(overall), "topic_score": topic_score},
    )


def _single_topic_cfg(topic: TopicId, tcfg: TopicConfig) -> ScoringConfig:
    return ScoringConfig({topic: tcfg})


def check_prop2(
    tc: TopicCounters,
    g: GlobalCounters,
    delta: Rational,
    which: str,
    topic: TopicId,
    tcfg: TopicConfig,
) -> Counterexample | None:
    """Raising a bad counter by delta should strictly lower the score."""
    if which not in BAD_COUNTERS:
        raise ValueError(f"not a bad counter: {which!r}")
    if not delta > 0:
        raise ValueError("delta must be positive")
    cfg = _single_topic_cfg(topic, tcfg)
    peer = "q"
    before = calc_score(peer, {(peer, topic): tc}, {peer: g}, cfg)
    if which == "bhvo":
        g2, tc2 = replace(g, bhvo=rat(g.bhvo) + rat(delta)), tc
    else:
        g2, tc2 = g, replace(tc, **{which: rat(getattr(tc, which)) + rat(delta)})
    after = calc_score(peer, {(peer, topic): tc2}, {peer: g2}, cfg)
    if after < before:
        return None
    return Counterexample(
        "prop2",
        {"tc": tc, "g": g, "delta": rat(delta), "which": which, "topic": topic},
        {"before": before, "after": after},
    )


def check_prop3(
    tc: TopicCounters,
    delta: Rational,
    which: str,
    topic: TopicId,
    tcfg: TopicConfig,
) -> Counterexample | None:
    """Raising a good counter must not lower the topic score, given the
    peer has been in the mesh past the activation window."""
    if which not in GOOD_COUNTERS:
        raise ValueError(f"not a good counter: {which!r}")
    if not delta > 0:
        raise ValueError("delta must be positive")
    if not tc.mesh_time > tcfg.params.activation_window:
        raise ValueError("prop3 requires mesh_time past the activation window")
    before = calc_score_topic(tc, tcfg)
    tc2 = replace(tc, **{which: rat(getattr(tc, which)) + rat(delta)})
    after = calc_score_topic(tc2, tcfg)
    if after >= before:
        return None
    return Counterexample(
        "prop3",
        {"tc": tc, "delta": rat(delta), "which": which, "topic": topic},
        {"before": before, "after": after},
    )


def check_prop4(
    tc_a: TopicCounters,
    tc_b: TopicCounters,
    g_a: GlobalCounters,
    g_b: GlobalCounters,
    cfg: ScoringConfig,
) -> Counterexample | None:
    """Identical counters must give identical scores (vacuous when the
    inputs differ)."""
    cfg.require_nonempty()
    topic = cfg.topics()[0]
    score_a = calc_score("a", {("a", topic): tc_a}, {"a": g_a}, cfg)
    score_b = calc_score("b", {("b", topic): tc_b}, {"b": g_b}, cfg)
    if (tc_a, g_a) != (tc_b, g_b) or score_a == score_b:
        return None
    return Counterexample(
        "prop4",
        {"tc": tc_a, "g": g_a},
        {"score_a": score_a, "score_b": score_b},
    )


def check_maxbound(
    tc: TopicCounters, topic: TopicId, tcfg: TopicConfig
) -> Counterexample | None:
    score = calc_score_topic(tc, tcfg)
    bound = max_topic_score(tcfg)
    if score <= bound:
        return None
    return Counterexample(
        "maxbound",
        {"tc": tc, "weights": tcfg.weights, "params": tcfg.params, "topic": topic},
        {"topic_score": score, "bound": bound},
    )


def replay(cex: Counterexample, cfg: ScoringConfig | None = None) -> bool:
    """Re-run a counterexample's check on its bindings; True iff it still
    fails (every reported counterexample must)."""
    b = cex.bindings
    if cex.property_name == "prop1":
        assert cfg is not None
        return check_prop1(b["ptc"], b["pcm"], b["p"], b["top"], cfg) is not None
    if cex.property_name == "prop2":
        assert cfg is not None
        return (
            check_prop2(b["tc"], b["g"], b["delta"], b["which"], b["topic"], cfg[b["topic"]])
            is not None
        )
    if cex.property_name == "prop3":
        assert cfg is not None
        return (
            check_prop3(b["tc"], b["delta"], b["which"], b["topic"], cfg[b["topic"]])
            is not None
        )
    if cex.property_name == "prop4":
        assert cfg is not None
        return check_prop4(b["tc"], b["tc"], b["g"], b["g"], cfg) is not None
    if cex.property_name == "maxbound":
        tcfg = TopicConfig(b["weights"], b["params"])
        return check_maxbound(b["tc"], b["topic"], tcfg) is not None
    raise ValueError(f"unknown property {cex.property_name!r}")


# ---------------------------------------------------------------------------
# Shrinking: greedily zero counter fields while the failure persists.


def _shrink_tc(
    tc: TopicCounters, still_fails: Callable[[TopicCounters], bool]
) -> TopicCounters:
    for f in fields(TopicCounters):
        if getattr(tc, f.name) == 0:
            continue
        candidate = replace(tc, **{f.name: 0})
        if still_fails(candidate):
            tc = candidate
    return tc


def _shrink_prop1(cex: Counterexample, cfg: ScoringConfig) -> Counterexample:
    b = cex.bindings
    p, top = b["p"], b["top"]
    ptc: dict = dict(b["ptc"])
    pcm: dict = dict(b["pcm"])
    keep_negative = cex.witness["topic_score"] < 0

    def fails(candidate_ptc: dict, candidate_pcm: dict) -> bool:
        result = check_prop1(candidate_ptc, candidate_pcm, p, top, cfg)
        if result is None:
            return False
        # Shrinking must not flatten a strictly negative witness to zero;
        # the interesting failure mode is the negative topic score.
        return not keep_negative or result.witness["topic_score"] < 0

    # Drop whole entries about other peers first, then zero fields.
    for key in sorted(ptc):
        if key[0] == p:
            continue
        trimmed = {k: v for k, v in ptc.items() if k != key}
        if fails(trimmed, pcm):
            ptc = trimmed
    for peer in sorted(pcm):
        if peer == p:
            continue
        trimmed = {k: v for k, v in pcm.items() if k != peer}
        if fails(ptc, trimmed):
            pcm = trimmed
    for key in sorted(ptc):
        current = ptc[key]
        shrunk = _shrink_tc(current, lambda tc2: fails({**ptc, key: tc2}, pcm))
        ptc = {**ptc, key: shrunk}
    result = check_prop1(ptc, pcm, p, top, cfg)
    assert result is not None
    return result


def _shrink_simple(cex: Counterexample, recheck: Callable[[TopicCounters], Counterexample | None]) -> Counterexample:
    tc = cex.bindings["tc"]
    shrunk = _shrink_tc(tc, lambda c: recheck(c) is not None)
    result = recheck(shrunk)
    assert result is not None
    return result


# ---------------------------------------------------------------------------
# Search loop


def search_counterexamples(
    property_name: str,
    cfg: ScoringConfig,
    trials: int,
    seed: int,
    peers: Sequence[PeerId] = ("P1", "P2", "P3"),
) -> list[Counterexample]:
    """Run the named check on generator-driven inputs; return every
    failure (shrunk, with reproducing bindings).  Deterministic per seed.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if property_name not in PROPERTY_NAMES:
        raise ValueError(f"unknown property {property_name!r}")
    cfg.require_nonempty()
    rnd = random.Random(seed)
    topics = cfg.topics()
    found: list[Counterexample] = []

    for trial in range(trials):
        n = rnd.randrange(1 << 30)
        if property_name == "prop1":
            ptc, pcm = gen_counter_maps(n, peers, topics)
            p = peers[rnd.randrange(len(peers))]
            top = topics[rnd.randrange(len(topics))]
            cex = check_prop1(ptc, pcm, p, top, cfg)
            if cex is not None:
                found.append(_shrink_prop1(cex, cfg))
        elif property_name == "prop2":
            tc = gen_counters(n)
            which = BAD_COUNTERS[trial % len(BAD_COUNTERS)]
            top = topics[rnd.randrange(len(topics))]
            cex = check_prop2(tc, ZERO_GCTRS, 1, which, top, cfg[top])
            if cex is not None:
                found.append(
                    _shrink_simple(
                        cex,
                        lambda c: check_prop2(c, ZERO_GCTRS, 1, which, top, cfg[top]),
                    )
                )
        elif property_name == "prop3":
            tc = gen_counters(n)
            which = GOOD_COUNTERS[trial % len(GOOD_COUNTERS)]
            top = topics[rnd.randrange(len(topics))]
            if not tc.mesh_time > cfg[top].params.activation_window:
                continue
            cex = check_prop3(tc, 1, which, top, cfg[top])
            if cex is not None:
                found.append(cex)
        elif property_name == "prop4":
            tc = gen_counters(n)
            g = ZERO_GCTRS
            cex = check_prop4(tc, tc, g, g, cfg)
            if cex is not None:
                found.append(cex)
        else:  # maxbound
            tc = gen_random_tctrs(rnd) if trial % 2 else gen_counters(n)
            tcfg = TopicConfig(gen_weights(rnd), gen_params(rnd))
            cex = check_maxbound(tc, gen_topic(n), tcfg)
            if cex is not None:
                found.append(cex)
    return found


# ---------------------------------------------------------------------------
# Report serialization (line-delimited JSON; rationals as num/den strings)


def _dc_to_jsonable(obj: Any) -> dict:
    return {f.name: format_rational(getattr(obj, f.name)) for f in fields(obj)}


def _tc_from_jsonable(d: dict) -> TopicCounters:
    return TopicCounters(**{k: parse_rational(v) for k, v in d.items()})


def _g_from_jsonable(d: dict) -> GlobalCounters:
    return GlobalCounters(**{k: parse_rational(v) for k, v in d.items()})


_PARAM_INTS = {"d", "d_low", "d_high", "d_lazy", "mcache_len"}


def _params_from_jsonable(d: dict) -> Params:
    kv: dict[str, Any] = {}
    for k, v in d.items():
        value = parse_rational(v)
        kv[k] = int(value) if k in _PARAM_INTS else value
    return Params(**kv)


def cex_to_jsonable(cex: Counterexample) -> dict:
    b = cex.bindings
    out: dict[str, Any] = {}
    for key, value in b.items():
        if isinstance(value, TopicCounters) or isinstance(value, GlobalCounters):
            out[key] = _dc_to_jsonable(value)
        elif isinstance(value, (Weights, Params)):
            out[key] = _dc_to_jsonable(value)
        elif key == "ptc":
            out[key] = [[p, t, _dc_to_jsonable(tc)] for (p, t), tc in sorted(value.items())]
        elif key == "pcm":
            out[key] = {p: _dc_to_jsonable(g) for p, g in sorted(value.items())}
        elif isinstance(value, (int, Fraction)):
            out[key] = format_rational(value)
        else:
            out[key] = value
    return {
        "property": cex.property_name,
        "bindings": out,
        "witness": {k: format_rational(v) for k, v in cex.witness.items()},
    }


def cex_from_jsonable(obj: dict) -> Counterexample:
    name = obj["property"]
    raw = obj["bindings"]
    b: dict[str, Any] = {}
    for key, value in raw.items():
        if key in ("tc",):
            b[key] = _tc_from_jsonable(value)
        elif key in ("g",):
            b[key] = _g_from_jsonable(value)
        elif key == "weights":
            b[key] = Weights(**{k: parse_rational(v) for k, v in value.items()})
        elif key == "params":
            b[key] = _params_from_jsonable(value)
        elif key == "ptc":
            b[key] = {(p, t): _tc_from_jsonable(tc) for p, t, tc in value}
        elif key == "pcm":
            b[key] = {p: _g_from_jsonable(g) for p, g in value.items()}
        elif key == "delta":
            b[key] = parse_rational(value)
        else:
            b[key] = value
    witness = {k: parse_rational(v) for k, v in obj["witness"].items()}
    return Counterexample(name, b, witness)


__all__ = [
    "BAD_COUNTERS", "Counterexample", "CounterProfile", "GOOD_COUNTERS",
    "PROPERTY_NAMES", "TOPICS", "cex_from_jsonable", "cex_to_jsonable",
    "check_maxbound", "check_prop1", "check_prop2", "check_prop3",
    "check_prop4", "gen_bad_counters", "gen_counter_maps",
    "gen_counter_profile", "gen_counters", "gen_good_counters", "gen_high",
    "gen_low", "gen_params", "gen_random_tctrs", "gen_topic", "gen_weights",
    "replay", "search_counterexamples",
]

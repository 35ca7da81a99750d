"""Canonical text forms: events, network states, trace lines.

Everything serializes to JSON-compatible structures with rationals
rendered as `num/den` strings, keys sorted, and map entries with
non-string keys rendered as sorted lists, so equal states always produce
byte-identical text.  A state digest is the SHA-256 of that canonical
text.  Trace output is line-delimited JSON: one entry per processed
event carrying the event plus, depending on the trace level, the full
state, its digest, or a violation bit.
"""

from __future__ import annotations

import hashlib
import json
from fractions import Fraction
from typing import Any, Iterable

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
    Message,
    MsgEvent,
    MsgsState,
    NbrTopicState,
    Network,
    Payload,
    PayloadMsg,
    PeerState,
    PruneMsg,
    Rational,
    SubMsg,
    TopicCounters,
    Trace,
    UnsubMsg,
    format_rational,
    parse_rational,
)


class ParseError(ValueError):
    """Malformed event or state text."""


def _rat(v: Rational) -> str:
    return format_rational(v)


def _unrat(v: Any) -> Fraction:
    if not isinstance(v, str):
        raise ParseError(f"expected rational string, got {v!r}")
    return parse_rational(v)


# ---------------------------------------------------------------------------
# Payloads and messages


def payload_to_jsonable(p: Payload) -> dict:
    return {"content": p.content, "pid": p.pid, "top": p.top, "origin": p.origin}


def payload_from_jsonable(obj: Any) -> Payload:
    try:
        return Payload(obj["content"], obj["pid"], obj["top"], obj["origin"])
    except (TypeError, KeyError) as exc:
        raise ParseError(f"malformed payload: {obj!r}") from exc


_TOPIC_MSGS = {"prune": PruneMsg, "graft": GraftMsg, "sub": SubMsg, "unsub": UnsubMsg}
_CONNECT_MSGS = {"connect1": Connect1, "connect2": Connect2}
_PID_MSGS = {"ihave": IhaveMsg, "iwant": IwantMsg}


def msg_to_jsonable(msg: Message) -> dict:
    if isinstance(msg, PruneMsg):
        return {"kind": "prune", "topic": msg.topic}
    if isinstance(msg, GraftMsg):
        return {"kind": "graft", "topic": msg.topic}
    if isinstance(msg, SubMsg):
        return {"kind": "sub", "topic": msg.topic}
    if isinstance(msg, UnsubMsg):
        return {"kind": "unsub", "topic": msg.topic}
    if isinstance(msg, Connect1):
        return {"kind": "connect1", "topics": list(msg.topics)}
    if isinstance(msg, Connect2):
        return {"kind": "connect2", "topics": list(msg.topics)}
    if isinstance(msg, IhaveMsg):
        return {"kind": "ihave", "pids": list(msg.pids)}
    if isinstance(msg, IwantMsg):
        return {"kind": "iwant", "pids": list(msg.pids)}
    if isinstance(msg, PayloadMsg):
        return {"kind": "payload", "payload": payload_to_jsonable(msg.payload)}
    raise ParseError(f"unknown message: {msg!r}")


def msg_from_jsonable(obj: Any) -> Message:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ParseError(f"malformed message: {obj!r}")
    kind = obj["kind"]
    if kind in _TOPIC_MSGS:
        return _TOPIC_MSGS[kind](obj["topic"])
    if kind in _CONNECT_MSGS:
        return _CONNECT_MSGS[kind](tuple(obj["topics"]))
    if kind in _PID_MSGS:
        return _PID_MSGS[kind](tuple(obj["pids"]))
    if kind == "payload":
        return PayloadMsg(payload_from_jsonable(obj["payload"]))
    raise ParseError(f"unknown message kind: {kind!r}")


# ---------------------------------------------------------------------------
# Events: compact list form, e.g.
#   ["b", "rcv", "a", {"kind": "payload", ...}]
#   ["p", "join", "T"] / ["p", "hbm", "3/2"] / ["p", "app", {...payload}]


def event_to_jsonable(ev: Event) -> list:
    if isinstance(ev, MsgEvent):
        return [ev.peer, ev.verb, ev.other, msg_to_jsonable(ev.msg)]
    if isinstance(ev, JoinEvent):
        return [ev.peer, "join", ev.topic]
    if isinstance(ev, LeaveEvent):
        return [ev.peer, "leave", ev.topic]
    if isinstance(ev, HeartbeatEvent):
        return [ev.peer, "hbm", _rat(ev.elapsed)]
    if isinstance(ev, AppEvent):
        return [ev.peer, "app", payload_to_jsonable(ev.payload)]
    raise ParseError(f"unknown event: {ev!r}")


def event_from_jsonable(obj: Any) -> Event:
    if not isinstance(obj, list) or len(obj) < 3:
        raise ParseError(f"malformed event: {obj!r}")
    peer, tag = obj[0], obj[1]
    if tag in ("snd", "rcv"):
        if len(obj) != 4:
            raise ParseError(f"malformed send/receive event: {obj!r}")
        return MsgEvent(peer, tag, obj[2], msg_from_jsonable(obj[3]))
    if tag == "join":
        return JoinEvent(peer, obj[2])
    if tag == "leave":
        return LeaveEvent(peer, obj[2])
    if tag == "hbm":
        elapsed = _unrat(obj[2])
        if elapsed <= 0:
            raise ParseError(f"heartbeat elapsed must be positive: {obj!r}")
        return HeartbeatEvent(peer, elapsed)
    if tag == "app":
        return AppEvent(peer, payload_from_jsonable(obj[2]))
    raise ParseError(f"unknown event tag: {tag!r}")


def parse_events_jsonl(text: str, source: str = "<events>") -> list[Event]:
    events: list[Event] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            events.append(event_from_jsonable(json.loads(line)))
        except (json.JSONDecodeError, ParseError) as exc:
            raise ParseError(f"{source}:{lineno}: {exc}") from None
    return events


# ---------------------------------------------------------------------------
# State serialization


def _msgkey_to_jsonable(key: tuple) -> list:
    msg, peer = key
    head = payload_to_jsonable(msg) if isinstance(msg, Payload) else msg
    return [head, peer]


def _msgkey_from_jsonable(obj: Any) -> tuple:
    head, peer = obj
    if isinstance(head, dict):
        return (payload_from_jsonable(head), peer)
    return (head, peer)


def _tctrs_to_jsonable(tc: TopicCounters) -> dict:
    return {
        "imd": _rat(tc.invalid_message_deliveries),
        "mmd": _rat(tc.mesh_message_deliveries),
        "mt": _rat(tc.mesh_time),
        "fmd": _rat(tc.first_message_deliveries),
        "mfp": _rat(tc.mesh_failure_penalty),
    }


def _tctrs_from_jsonable(obj: Any) -> TopicCounters:
    return TopicCounters(
        invalid_message_deliveries=_unrat(obj["imd"]),
        mesh_message_deliveries=_unrat(obj["mmd"]),
        mesh_time=_unrat(obj["mt"]),
        first_message_deliveries=_unrat(obj["fmd"]),
        mesh_failure_penalty=_unrat(obj["mfp"]),
    )


def peer_state_to_jsonable(ps: PeerState) -> dict:
    mst = ps.mst
    return {
        "nts": {
            "subs": {t: list(v) for t, v in sorted(ps.nts.nbr_topic_subs.items())},
            "fanout": {t: list(v) for t, v in sorted(ps.nts.topic_fanout.items())},
            "last_pub": {t: _rat(v) for t, v in sorted(ps.nts.last_pub.items())},
            "mesh": {t: list(v) for t, v in sorted(ps.nts.topic_mesh.items())},
        },
        "mst": {
            "recently_seen": sorted(
                [*_msgkey_to_jsonable(k), _rat(v)] for k, v in mst.recently_seen.items()
            ),
            "pld_cache": [
                [payload_to_jsonable(p), s] for p, s in mst.pld_cache
            ],
            "hwindows": list(mst.hwindows),
            "waiting_for": {pid: q for pid, q in sorted(mst.waiting_for.items())},
            "served": sorted(
                [*_msgkey_to_jsonable(k), _rat(v)] for k, v in mst.served.items()
            ),
            "ihaves_received": mst.ihaves_received,
            "ihaves_sent": mst.ihaves_sent,
        },
        "tctrs": [
            [p, t, _tctrs_to_jsonable(tc)] for (p, t), tc in sorted(ps.nbr_tctrs.items())
        ],
        "gctrs": {
            p: {"apco": _rat(g.apco), "ipco": _rat(g.ipco), "bhvo": _rat(g.bhvo)}
            for p, g in sorted(ps.nbr_gctrs.items())
        },
        "scores": {p: _rat(s) for p, s in sorted(ps.nbr_scores.items())},
        "since_decay": _rat(ps.since_decay),
    }


def peer_state_from_jsonable(obj: Any) -> PeerState:
    nts_obj, mst_obj = obj["nts"], obj["mst"]
    nts = NbrTopicState(
        nbr_topic_subs={t: tuple(v) for t, v in nts_obj["subs"].items()},
        topic_fanout={t: tuple(v) for t, v in nts_obj["fanout"].items()},
        last_pub={t: _unrat(v) for t, v in nts_obj["last_pub"].items()},
        topic_mesh={t: tuple(v) for t, v in nts_obj["mesh"].items()},
    )
    mst = MsgsState(
        recently_seen={
            _msgkey_from_jsonable(entry[:2]): _unrat(entry[2])
            for entry in mst_obj["recently_seen"]
        },
        pld_cache=tuple(
            (payload_from_jsonable(p), s) for p, s in mst_obj["pld_cache"]
        ),
        hwindows=tuple(mst_obj["hwindows"]),
        waiting_for=dict(mst_obj["waiting_for"]),
        served={
            _msgkey_from_jsonable(entry[:2]): _unrat(entry[2])
            for entry in mst_obj["served"]
        },
        ihaves_received=mst_obj["ihaves_received"],
        ihaves_sent=mst_obj["ihaves_sent"],
    )
    return PeerState(
        nts=nts,
        mst=mst,
        nbr_tctrs={(p, t): _tctrs_from_jsonable(tc) for p, t, tc in obj["tctrs"]},
        nbr_gctrs={
            p: GlobalCounters(
                apco=_unrat(g["apco"]), ipco=_unrat(g["ipco"]), bhvo=_unrat(g["bhvo"])
            )
            for p, g in obj["gctrs"].items()
        },
        nbr_scores={p: _unrat(s) for p, s in obj["scores"].items()},
        since_decay=_unrat(obj["since_decay"]),
    )


def network_to_jsonable(net: Network) -> dict:
    return {"peers": {p: peer_state_to_jsonable(s) for p, s in sorted(net.peers.items())}}


def network_from_jsonable(obj: Any) -> Network:
    return Network({p: peer_state_from_jsonable(s) for p, s in obj["peers"].items()})


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def network_digest(net: Network) -> str:
    text = canonical_json(network_to_jsonable(net))
    return hashlib.sha256(text.encode()).hexdigest()


# ---------------------------------------------------------------------------
# Trace output

TRACE_LEVELS = ("full", "digest", "violations")


def trace_to_lines(trace: Trace, level: str) -> list[str]:
    """Render a full trace at `full` or `digest` level (one line per
    processed event).  Violation-level output is produced directly by the
    violations runner, which never materializes the trace."""
    if level == "full":
        return [
            canonical_json(
                {"event": event_to_jsonable(ev), "net": network_to_jsonable(net)}
            )
            for ev, net in trace
        ]
    if level == "digest":
        return [
            canonical_json({"event": event_to_jsonable(ev), "digest": network_digest(net)})
            for ev, net in trace
        ]
    raise ValueError(f"trace level must be full or digest here, got {level!r}")


def violations_to_lines(events: Iterable[Event], bits: Iterable[bool]) -> list[str]:
    """One line per victim heartbeat: the heartbeat event and its bit."""
    return [
        canonical_json({"event": event_to_jsonable(ev), "violation": bit})
        for ev, bit in zip(events, bits)
    ]


def parse_trace_lines(text: str) -> list[dict]:
    """Re-parse trace output; each dict carries `event` plus one of
    `net`, `digest`, or `violation` (events and nets decoded)."""
    out: list[dict] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
            entry: dict[str, Any] = {"event": event_from_jsonable(obj["event"])}
            if "net" in obj:
                entry["net"] = network_from_jsonable(obj["net"])
            if "digest" in obj:
                entry["digest"] = obj["digest"]
            if "violation" in obj:
                entry["violation"] = obj["violation"]
            out.append(entry)
        except (json.JSONDecodeError, KeyError, ParseError) as exc:
            raise ParseError(f"trace line {lineno}: {exc}") from None
    return out


__all__ = [
    "ParseError", "TRACE_LEVELS", "canonical_json", "event_from_jsonable",
    "event_to_jsonable", "msg_from_jsonable", "msg_to_jsonable",
    "network_digest", "network_from_jsonable", "network_to_jsonable",
    "parse_events_jsonl", "parse_trace_lines", "payload_from_jsonable",
    "payload_to_jsonable", "peer_state_from_jsonable", "peer_state_to_jsonable",
    "trace_to_lines", "violations_to_lines",
]

"""Deterministic topology fixtures.

`ropsten_like_spec` builds a 588-node graph matching the headline shape
of a measured testnet snapshot: min degree 1, max degree 418, average
degree within 0.01 of 25.49, diameter exactly 5.  Construction: a hub
with 418 spokes, 168 second-ring nodes hanging off distinct spokes, one
third-ring node behind a reserved spoke (pinning the diameter's far
end), and chord edges among the non-reserved spokes until the edge count
hits 7494 (average degree 14988/588).
"""

from __future__ import annotations

from .propcheck import TOPICS
from .types import PeerId, TopicId
from .topology import TopologySpec

ALL_TOPICS: tuple[TopicId, ...] = TOPICS


def _spec(nodes, edges, topics) -> TopologySpec:
    return TopologySpec(
        tuple(nodes), tuple(edges), {n: tuple(topics) for n in nodes}
    )


def triangle_spec(topics: tuple[TopicId, ...] = ("AGG",)) -> TopologySpec:
    nodes = ["n1", "n2", "n3"]
    edges = [("n1", "n2"), ("n1", "n3"), ("n2", "n3")]
    return _spec(nodes, edges, topics)


def line5_spec(topics: tuple[TopicId, ...] = ALL_TOPICS) -> TopologySpec:
    """Victim v at the end of a line: its only neighbour is a."""
    nodes = ["v", "a", "h1", "h2", "h3"]
    edges = [("a", "v"), ("a", "h1"), ("h1", "h2"), ("h2", "h3")]
    return _spec(nodes, edges, topics)


def star4_spec(topics: tuple[TopicId, ...] = ALL_TOPICS) -> TopologySpec:
    """Victim v0 surrounded by four attackers: every mesh edge of v0 is
    attacker-controlled."""
    nodes = ["v0", "a1", "a2", "a3", "a4"]
    edges = [("a1", "v0"), ("a2", "v0"), ("a3", "v0"), ("a4", "v0")]
    return _spec(nodes, edges, topics)


def bridge6_spec(topics: tuple[TopicId, ...] = ("AGG", "BLOCKS")) -> TopologySpec:
    """Two triangles joined by a single bridge edge l3 -- r1."""
    nodes = ["l1", "l2", "l3", "r1", "r2", "r3"]
    edges = [
        ("l1", "l2"), ("l1", "l3"), ("l2", "l3"),
        ("r1", "r2"), ("r1", "r3"), ("r2", "r3"),
        ("l3", "r1"),
    ]
    return _spec(nodes, edges, topics)


ROPSTEN_NODES = 588
ROPSTEN_EDGES = 7494
_HUB_DEGREE = 418
_SECOND_RING = 168


def ropsten_like_spec(topics: tuple[TopicId, ...] = ALL_TOPICS) -> TopologySpec:
    def name(i: int) -> PeerId:
        return f"n{i:03d}"

    hub = name(0)
    spokes = [name(i) for i in range(1, _HUB_DEGREE + 1)]          # n001..n418
    second = [name(i) for i in range(419, 419 + _SECOND_RING)]     # n419..n586
    tail = name(587)
    reserved = spokes[-1]                                          # n418
    nodes = [hub, *spokes, *second, tail]

    edges: list[tuple[PeerId, PeerId]] = [(hub, s) for s in spokes]
    # Second ring: the last one hangs off the reserved spoke (the
    # diameter path runs through it), the rest spread over early spokes.
    for k, node in enumerate(second[:-1]):
        parent = spokes[k % (_HUB_DEGREE - 1)]
        edges.append((parent, node))
    edges.append((reserved, second[-1]))
    edges.append((second[-1], tail))

    # Chords among non-reserved spokes (offset rings) up to the target
    # edge count.  The reserved spoke keeps degree 2 so the tail stays at
    # distance 5 from every second-ring node off another spoke.
    chordable = spokes[:-1]
    need = ROPSTEN_EDGES - len(edges)
    offset = 1
    while need > 0:
        for i in range(len(chordable) - offset):
            if need == 0:
                break
            edges.append((chordable[i], chordable[i + offset]))
            need -= 1
        offset += 1
    return _spec(nodes, edges, topics)


__all__ = [
    "ALL_TOPICS", "ROPSTEN_EDGES", "ROPSTEN_NODES", "bridge6_spec",
    "line5_spec", "ropsten_like_spec", "star4_spec", "triangle_spec",
]

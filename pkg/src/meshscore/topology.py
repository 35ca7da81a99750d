"""Topology ingestion and start-state construction.

Topology files are line-oriented: `N <id> <topic>...` declares a node
with its subscriptions, `E <a> <b>` an undirected edge.  Degree and
diameter statistics are computed on the simple undirected graph, with
the diameter taken over the largest connected component (measured
real-network snapshots include degree-1 fringe nodes, and a single
number is reported for them).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction

from .engine import Rng
from .types import (
    NbrTopicState,
    Network,
    PeerId,
    PeerState,
    ScoringConfig,
    TopicId,
)


class TopologyError(ValueError):
    """Unparseable or invariant-violating topology file."""


@dataclass(frozen=True, slots=True)
class TopologyStats:
    nodes: int
    edges: int
    min_degree: int
    max_degree: int
    avg_degree: Fraction
    diameter: int
    components: int


@dataclass(frozen=True, slots=True)
class TopologySpec:
    nodes: tuple[PeerId, ...]
    edges: tuple[tuple[PeerId, PeerId], ...]
    subscriptions: dict[PeerId, tuple[TopicId, ...]]

    def adjacency(self) -> dict[PeerId, list[PeerId]]:
        adj: dict[PeerId, list[PeerId]] = {n: [] for n in self.nodes}
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        return {n: sorted(nbrs) for n, nbrs in adj.items()}

    def stats(self) -> TopologyStats:
        adj = self.adjacency()
        degrees = [len(adj[n]) for n in self.nodes]
        components = _components(adj)
        largest = max(components, key=len) if components else set()
        diameter = _diameter(adj, largest)
        n = len(self.nodes)
        return TopologyStats(
            nodes=n,
            edges=len(self.edges),
            min_degree=min(degrees) if degrees else 0,
            max_degree=max(degrees) if degrees else 0,
            avg_degree=Fraction(sum(degrees), n) if n else Fraction(0),
            diameter=diameter,
            components=len(components),
        )


def _components(adj: dict[PeerId, list[PeerId]]) -> list[set[PeerId]]:
    remaining = set(adj)
    out: list[set[PeerId]] = []
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
        out.append(comp)
        remaining -= comp
    return out


def _diameter(adj: dict[PeerId, list[PeerId]], component: set[PeerId]) -> int:
    best = 0
    for source in component:
        dist = {source: 0}
        queue = deque([source])
        while queue:
            node = queue.popleft()
            for nbr in adj[node]:
                if nbr not in dist:
                    dist[nbr] = dist[node] + 1
                    queue.append(nbr)
        best = max(best, max(dist.values(), default=0))
    return best


def parse_topology_text(text: str, source: str = "<topology>") -> TopologySpec:
    nodes: list[PeerId] = []
    subscriptions: dict[PeerId, tuple[TopicId, ...]] = {}
    edges: list[tuple[PeerId, PeerId]] = []
    seen_edges: set[tuple[PeerId, PeerId]] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "N":
            if len(parts) < 2:
                raise TopologyError(f"{source}:{lineno}: node line needs an id")
            node = parts[1]
            if node in subscriptions:
                raise TopologyError(f"{source}:{lineno}: duplicate node {node!r}")
            nodes.append(node)
            subscriptions[node] = tuple(parts[2:])
        elif parts[0] == "E":
            if len(parts) != 3:
                raise TopologyError(f"{source}:{lineno}: edge line needs two ids")
            a, b = parts[1], parts[2]
            if a == b:
                raise TopologyError(f"{source}:{lineno}: self-loop on {a!r}")
            key = (min(a, b), max(a, b))
            if key in seen_edges:
                raise TopologyError(f"{source}:{lineno}: duplicate edge {a!r} {b!r}")
            seen_edges.add(key)
            edges.append(key)
        else:
            raise TopologyError(f"{source}:{lineno}: expected 'N ...' or 'E ...'")
    for a, b in edges:
        for end in (a, b):
            if end not in subscriptions:
                raise TopologyError(f"{source}: edge references undeclared node {end!r}")
    return TopologySpec(tuple(nodes), tuple(edges), subscriptions)


def load_topology(path: str) -> TopologySpec:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_topology_text(fh.read(), source=path)


def format_topology(spec: TopologySpec) -> str:
    lines = [f"N {n} {' '.join(spec.subscriptions[n])}".rstrip() for n in spec.nodes]
    lines += [f"E {a} {b}" for a, b in spec.edges]
    return "\n".join(lines) + "\n"


def build_network(spec: TopologySpec, cfg: ScoringConfig, seed: int) -> Network:
    """Start state: every node knows its edge-neighbours' subscriptions,
    and each subscribed topic's mesh is seeded with up to d subscribed
    neighbours, then symmetrized and trimmed back to d (removals are
    reciprocal so meshes stay symmetric)."""
    for node, topics in spec.subscriptions.items():
        for t in topics:
            if t not in cfg:
                raise TopologyError(
                    f"node {node!r} subscribes to {t!r}, which the config lacks"
                )
    adj = spec.adjacency()
    rng = Rng(seed)

    subs_of: dict[PeerId, dict[TopicId, tuple[PeerId, ...]]] = {}
    for node in spec.nodes:
        by_topic: dict[TopicId, list[PeerId]] = {}
        for nbr in adj[node]:
            for t in spec.subscriptions[nbr]:
                by_topic.setdefault(t, []).append(nbr)
        subs_of[node] = {t: tuple(sorted(v)) for t, v in sorted(by_topic.items())}

    mesh_of: dict[PeerId, dict[TopicId, set[PeerId]]] = {
        node: {t: set() for t in spec.subscriptions[node]} for node in spec.nodes
    }
    for node in sorted(spec.nodes):
        for t in sorted(spec.subscriptions[node]):
            cands = [x for x in subs_of[node].get(t, ()) if t in mesh_of[x]]
            chosen = rng.shuffle(cands, node, "seed-mesh", t)[: cfg[t].params.d]
            mesh_of[node][t].update(chosen)
    # Symmetrize, then trim over-cap meshes with reciprocal removal.
    for node in sorted(spec.nodes):
        for t, members in mesh_of[node].items():
            for member in members:
                mesh_of[member][t].add(node)
    for node in sorted(spec.nodes):
        for t in sorted(mesh_of[node]):
            members = mesh_of[node][t]
            cap = cfg[t].params.d
            if len(members) > cap:
                keep = set(rng.shuffle(members, node, "trim-mesh", t)[:cap])
                for dropped in sorted(members - keep):
                    mesh_of[dropped][t].discard(node)
                mesh_of[node][t] = keep

    peers: dict[PeerId, PeerState] = {}
    for node in spec.nodes:
        nts = NbrTopicState(
            nbr_topic_subs=dict(subs_of[node]),
            topic_fanout={},
            last_pub={},
            topic_mesh={
                t: tuple(sorted(members)) for t, members in sorted(mesh_of[node].items())
            },
        )
        peers[node] = PeerState(nts=nts)
    return Network(peers)


__all__ = [
    "TopologyError", "TopologySpec", "TopologyStats", "build_network",
    "format_topology", "load_topology", "parse_topology_text",
]

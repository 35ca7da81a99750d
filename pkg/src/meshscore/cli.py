"""Command-line harness: simulate | check-props | attack.

Exit codes: 0 success (or expected verdict), 1 unexpected property or
attack verdict, 2 config/topology/scenario errors, 3 event parse errors.
All output is line-delimited JSON and depends only on flags and input
files, so identical invocations produce byte-identical output.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field

from .attacks import (
    AttackError,
    AttackGadget,
    apply_gadget,
    build_eclipse,
    build_gadget_schedule,
    build_multi_gadget_schedule,
    build_partition,
    induced_liveness_counterexample,
    mesh_components,
    probe_events,
    run_violations_with_fixed_point,
    score_prop_violation,
)
from .engine import RunBudget, run_network, run_with_monitor
from .profiles import ConfigError, load_profile, load_valid_config
from .propcheck import PROPERTY_NAMES, cex_to_jsonable, search_counterexamples
from .serial import (
    ParseError,
    canonical_json,
    event_to_jsonable,
    parse_events_jsonl,
    trace_to_lines,
    violations_to_lines,
)
from .topology import TopologyError, build_network, load_topology
from .types import (
    Event,
    HeartbeatEvent,
    MsgEvent,
    Network,
    PayloadMsg,
    PeerId,
    PruneMsg,
    RCV,
    ScoringConfig,
    TopicId,
    lookup_score,
    rat,
)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_EVENTS = 3

# Properties that the default profile is expected to falsify; the rest
# must come back clean.
FALSIFIABLE = ("prop1", "prop2")


class ScenarioError(ValueError):
    pass


@dataclass
class Scenario:
    kind: str
    topology: str
    profile: str | None = None
    config: str | None = None
    victim: PeerId | None = None
    attacker: PeerId | None = None
    attackers: list[PeerId] = field(default_factory=list)
    attacked: list[TopicId] = field(default_factory=list)
    gadgets: list[tuple[PeerId, PeerId, tuple[TopicId, ...]]] = field(default_factory=list)
    m: int = 0
    n: int = 1
    rounds: int = 1
    seed: int = 0
    max_events: int = 100_000
    expect: str | None = None
    publishes: list[tuple[PeerId, TopicId]] = field(default_factory=list)


def parse_scenario(path: str) -> Scenario:
    base = os.path.dirname(os.path.abspath(path))
    kv: dict[str, str] = {}
    gadgets: list[tuple[PeerId, PeerId, tuple[TopicId, ...]]] = []
    publishes: list[tuple[PeerId, TopicId]] = []
    attackers: list[PeerId] = []
    attacked: list[TopicId] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            key, rest = parts[0], parts[1:]
            if key == "gadget":
                if len(rest) != 3:
                    raise ScenarioError(f"{path}:{lineno}: gadget needs ATTACKER VICTIM T1,T2")
                gadgets.append((rest[0], rest[1], tuple(rest[2].split(","))))
            elif key == "publish":
                if len(rest) != 2:
                    raise ScenarioError(f"{path}:{lineno}: publish needs PEER TOPIC")
                publishes.append((rest[0], rest[1]))
            elif key == "attackers":
                attackers = rest
            elif key == "attacked":
                attacked = rest
            elif key in (
                "kind", "topology", "profile", "config", "victim", "attacker",
                "m", "n", "rounds", "seed", "max-events", "expect",
            ):
                if len(rest) != 1:
                    raise ScenarioError(f"{path}:{lineno}: {key} takes one value")
                kv[key] = rest[0]
            else:
                raise ScenarioError(f"{path}:{lineno}: unknown key {key!r}")
    if "kind" not in kv or kv["kind"] not in ("gadget", "eclipse", "partition"):
        raise ScenarioError(f"{path}: kind must be gadget, eclipse, or partition")
    if "topology" not in kv:
        raise ScenarioError(f"{path}: topology is required")

    def _int(key: str, default: int) -> int:
        return int(kv[key]) if key in kv else default

    return Scenario(
        kind=kv["kind"],
        topology=os.path.join(base, kv["topology"]),
        profile=kv.get("profile"),
        config=os.path.join(base, kv["config"]) if "config" in kv else None,
        victim=kv.get("victim"),
        attacker=kv.get("attacker"),
        attackers=attackers,
        attacked=attacked,
        gadgets=gadgets,
        m=_int("m", 0),
        n=_int("n", 1),
        rounds=_int("rounds", 1),
        seed=_int("seed", 0),
        max_events=_int("max-events", 100_000),
        expect=kv.get("expect"),
        publishes=publishes,
    )


def _load_cfg(profile: str | None, config: str | None) -> ScoringConfig:
    if (profile is None) == (config is None):
        raise ConfigError("exactly one of profile/config must be given")
    if profile is not None:
        return load_profile(profile).cfg
    return load_valid_config(config)


def _scenario_net(sc: Scenario, cfg: ScoringConfig) -> Network:
    spec = load_topology(sc.topology)
    return build_network(spec, cfg, sc.seed)


def _scenario_gadgets(sc: Scenario, net: Network, cfg: ScoringConfig) -> list[AttackGadget]:
    if sc.kind == "gadget":
        if not (sc.attacker and sc.victim and sc.attacked):
            raise ScenarioError("gadget scenarios need attacker, victim, attacked")
        vstate = net[sc.victim] if sc.victim in net else None
        if vstate is None:
            raise ScenarioError(f"victim {sc.victim!r} not in topology")
        shared = tuple(sorted(set(vstate.nts.topic_mesh) | set(sc.attacked)))
        return [AttackGadget(sc.attacker, sc.victim, tuple(sorted(sc.attacked)), shared)]
    if sc.kind == "eclipse":
        if not (sc.victim and sc.attackers and sc.attacked):
            raise ScenarioError("eclipse scenarios need victim, attackers, attacked")
        return build_eclipse(net, sc.victim, sc.attackers, sc.attacked, cfg)
    gadgets = []
    for a, v, ats in sc.gadgets:
        vstate = net[v] if v in net else None
        if vstate is None:
            raise ScenarioError(f"victim {v!r} not in topology")
        shared = tuple(sorted(set(vstate.nts.topic_mesh) | set(ats)))
        gadgets.append(AttackGadget(a, v, tuple(sorted(ats)), shared))
    if not gadgets:
        raise ScenarioError("partition scenarios need gadget lines")
    return gadgets


def _partition_schedule(
    sc: Scenario, net: Network, gadgets: list[AttackGadget], cfg: ScoringConfig
) -> tuple[list[Event], dict[str, PeerId]]:
    """Per round: gadget deliveries, one probe publish per publish line,
    then heartbeats at every honest (non-attacker) peer.  Attackers never
    run honest heartbeats; their behaviour is the schedule itself."""
    e = cfg.first().params.hbm_interval
    attackers = {g.attacker for g in gadgets}
    honest = sorted(p for p in net.peers if p not in attackers)
    events: list[Event] = []
    probe_pids: dict[str, PeerId] = {}
    from .attacks import emit_mesh_msg_deliveries

    for r in range(sc.rounds):
        for g in sorted(gadgets, key=lambda g: (g.attacker, g.victim)):
            ats = sorted(g.attacked_topics)
            others = [t for t in sorted(g.shared_topics) if t not in set(ats)]
            events += emit_mesh_msg_deliveries(g.attacker, g.victim, ats, sc.m, r)
            events += emit_mesh_msg_deliveries(g.attacker, g.victim, others, sc.n, r)
        for publisher, topic in sc.publishes:
            probe = probe_events(publisher, topic, r)
            probe_pids[probe[0].payload.pid] = publisher
            events += probe
        for p in honest:
            events.append(HeartbeatEvent(p, e))
    return events, probe_pids


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args: argparse.Namespace) -> int:
    budget_events = args.max_events
    seed = args.seed
    lines: list[str]
    try:
        if args.scenario:
            sc = parse_scenario(args.scenario)
            if args.profile is not None or args.config is not None:
                cfg = _load_cfg(args.profile, args.config)
            else:
                cfg = _load_cfg(sc.profile, sc.config)
            net = _scenario_net(sc, cfg)
            gadgets = _scenario_gadgets(sc, net, cfg)
            for g in gadgets:
                net = apply_gadget(net, g)
            e = cfg.first().params.hbm_interval
            if sc.kind == "gadget":
                schedule = list(
                    build_gadget_schedule(gadgets[0], sc.m, sc.n, e, sc.rounds).events
                )
            elif sc.kind == "eclipse":
                schedule = build_multi_gadget_schedule(gadgets, sc.m, sc.n, e, sc.rounds)
            else:
                schedule, _pids = _partition_schedule(sc, net, gadgets, cfg)
            budget = RunBudget(budget_events or sc.max_events, seed if seed is not None else sc.seed)
            if args.trace_level == "violations":
                if sc.kind != "gadget":
                    print("error: violations trace level needs a gadget scenario", file=sys.stderr)
                    return EXIT_CONFIG
                g = gadgets[0]
                hbs: list[Event] = []
                bits: list[bool] = []

                def observe(ev: Event, current: Network) -> None:
                    if isinstance(ev, HeartbeatEvent) and ev.peer == g.victim:
                        hbs.append(ev)
                        bits.append(
                            score_prop_violation(
                                current[g.victim], g.attacker, g.attacked_topics, cfg
                            )
                        )

                run_with_monitor(net, schedule, budget, cfg, observe)
                lines = violations_to_lines(hbs, bits)
            else:
                trace = run_network(net, schedule, budget, cfg)
                lines = trace_to_lines(trace, args.trace_level)
        else:
            if not args.topology or not args.events:
                print("error: simulate needs --scenario or --topology with --events", file=sys.stderr)
                return EXIT_CONFIG
            if args.trace_level == "violations":
                print("error: violations trace level needs a gadget scenario", file=sys.stderr)
                return EXIT_CONFIG
            cfg = _load_cfg(args.profile, args.config)
            spec = load_topology(args.topology)
            net = build_network(spec, cfg, seed or 0)
            try:
                with open(args.events, "r", encoding="utf-8") as fh:
                    events = parse_events_jsonl(fh.read(), source=args.events)
            except ParseError as exc:
                print(f"error: {exc}", file=sys.stderr)
                return EXIT_EVENTS
            budget = RunBudget(budget_events or 100_000, seed or 0)
            trace = run_network(net, events, budget, cfg)
            lines = trace_to_lines(trace, args.trace_level)
    except (ScenarioError, TopologyError, ConfigError, AttackError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    _write_lines(args.out, lines)
    return EXIT_OK


# ---------------------------------------------------------------------------
# check-props


def cmd_check_props(args: argparse.Namespace) -> int:
    try:
        cfg = _load_cfg(args.profile, args.config)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.property not in PROPERTY_NAMES:
        print(f"error: unknown property {args.property!r}", file=sys.stderr)
        return EXIT_CONFIG

    found = search_counterexamples(args.property, cfg, args.trials, args.seed)
    lines = [canonical_json(cex_to_jsonable(cex)) for cex in found]
    expected_failures = args.property in FALSIFIABLE
    status_ok = bool(found) == expected_failures
    lines.append(
        canonical_json(
            {
                "property": args.property,
                "trials": args.trials,
                "seed": args.seed,
                "counterexamples": len(found),
                "expected_counterexamples": expected_failures,
                "status": "expected" if status_ok else "unexpected",
            }
        )
    )
    _write_lines(args.out, lines)
    return EXIT_OK if status_ok else EXIT_UNEXPECTED


# ---------------------------------------------------------------------------
# attack


def _gadget_verdict(outcome) -> str:
    if induced_liveness_counterexample(outcome):
        return "liveness-counterexample"
    if outcome.first_violation_index is not None:
        return "violation"
    return "no-violation"


def cmd_attack(args: argparse.Namespace) -> int:
    try:
        sc = parse_scenario(args.scenario)
        if args.rounds:
            sc.rounds = args.rounds
        cfg = _load_cfg(sc.profile, sc.config)
        net = _scenario_net(sc, cfg)
        gadgets = _scenario_gadgets(sc, net, cfg)
        for g in gadgets:
            net = apply_gadget(net, g)
        budget = RunBudget(sc.max_events, sc.seed)
        e = cfg.first().params.hbm_interval
        report: dict
        if sc.kind == "gadget":
            g = gadgets[0]
            schedule = build_gadget_schedule(g, sc.m, sc.n, e, sc.rounds)
            outcome = run_violations_with_fixed_point(
                net, schedule.events, budget, cfg, g.victim, g.attacker, g.attacked_topics
            )
            verdict = _gadget_verdict(outcome)
            report = {
                "kind": "gadget",
                "verdict": verdict,
                "heartbeats": len(outcome.violations),
                "violations_true": sum(outcome.violations),
                "first_violation_index": outcome.first_violation_index,
                "fixed_point_reached": outcome.fixed_point_reached,
                "fixed_point_index": outcome.fixed_point_index,
            }
        elif sc.kind == "eclipse":
            schedule = build_multi_gadget_schedule(gadgets, sc.m, sc.n, e, sc.rounds)
            victim = sc.victim
            ats = set(sc.attacked)
            threshold = rat(cfg.first().params.gray_list_threshold)
            attacked_receipts = 0
            pruned_attackers: set[PeerId] = set()
            score_ok = True
            heartbeats = 0

            def observe(ev: Event, current: Network) -> None:
                nonlocal attacked_receipts, score_ok, heartbeats
                if (
                    isinstance(ev, MsgEvent)
                    and ev.verb == RCV
                    and ev.peer == victim
                    and isinstance(ev.msg, PayloadMsg)
                    and ev.msg.payload.top in ats
                ):
                    attacked_receipts += 1
                if isinstance(ev, MsgEvent) and ev.peer == victim and isinstance(ev.msg, PruneMsg):
                    if ev.other in {g.attacker for g in gadgets}:
                        pruned_attackers.add(ev.other)
                if isinstance(ev, HeartbeatEvent) and ev.peer == victim:
                    heartbeats += 1
                    scores = current[victim].nbr_scores
                    for g in gadgets:
                        s = rat(lookup_score(g.attacker, scores))
                        if not (s > 0 and s > threshold):
                            score_ok = False

            run_with_monitor(net, schedule, budget, cfg, observe)
            eclipsed = attacked_receipts == 0 and score_ok and not pruned_attackers
            report = {
                "kind": "eclipse",
                "verdict": "eclipsed" if eclipsed else "not-eclipsed",
                "heartbeats": heartbeats,
                "attacked_payloads_at_victim": attacked_receipts,
                "attackers_pruned": sorted(pruned_attackers),
                "attacker_scores_positive": score_ok,
            }
        else:
            gadgets = build_partition(net, gadgets)
            attacked = sorted({t for g in gadgets for t in g.attacked_topics})
            components = {
                t: [sorted(c) for c in mesh_components(net, t)] for t in attacked
            }
            comp_of: dict[tuple[TopicId, PeerId], int] = {}
            for t, comps in components.items():
                for i, comp in enumerate(comps):
                    for p in comp:
                        comp_of[(t, p)] = i
            schedule, probe_pids = _partition_schedule(sc, net, gadgets, cfg)
            crossings = 0

            def observe(ev: Event, current: Network) -> None:
                nonlocal crossings
                if (
                    isinstance(ev, MsgEvent)
                    and ev.verb == RCV
                    and isinstance(ev.msg, PayloadMsg)
                    and ev.msg.payload.pid in probe_pids
                ):
                    t = ev.msg.payload.top
                    src = probe_pids[ev.msg.payload.pid]
                    if comp_of.get((t, src)) != comp_of.get((t, ev.peer)):
                        crossings += 1

            run_with_monitor(net, schedule, budget, cfg, observe)
            report = {
                "kind": "partition",
                "verdict": "partitioned" if crossings == 0 else "not-partitioned",
                "components": {t: len(c) for t, c in components.items()},
                "cross_component_deliveries": crossings,
            }
    except (ScenarioError, TopologyError, ConfigError, AttackError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    _write_lines(args.out, [canonical_json(report)])
    expected = sc.expect or {"gadget": "liveness-counterexample", "eclipse": "eclipsed", "partition": "partitioned"}[sc.kind]
    return EXIT_OK if report["verdict"] == expected else EXIT_UNEXPECTED


# ---------------------------------------------------------------------------


def _write_lines(out: str | None, lines: list[str]) -> None:
    text = "\n".join(lines) + ("\n" if lines else "")
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="meshscore")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a schedule and write the trace")
    sim.add_argument("--topology")
    sim.add_argument("--profile")
    sim.add_argument("--config")
    sim.add_argument("--events")
    sim.add_argument("--scenario")
    sim.add_argument("--max-events", type=int, default=None)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--trace-level", choices=("full", "digest", "violations"), default="digest")
    sim.add_argument("--out")
    sim.set_defaults(func=cmd_simulate)

    chk = sub.add_parser("check-props", help="search for property counterexamples")
    chk.add_argument("--profile")
    chk.add_argument("--config")
    chk.add_argument("--property", required=True)
    chk.add_argument("--trials", type=int, default=10_000)
    chk.add_argument("--seed", type=int, default=0)
    chk.add_argument("--out")
    chk.set_defaults(func=cmd_check_props)

    atk = sub.add_parser("attack", help="run an attack scenario")
    atk.add_argument("--scenario", required=True)
    atk.add_argument("--rounds", type=int, default=None)
    atk.add_argument("--out")
    atk.set_defaults(func=cmd_attack)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

"""meshscore: an executable model of mesh-based pubsub peer scoring.

The library has three layers: the exact score function over rational
counters (`scoring`), the peer/network state machines driving it
(`engine`), and falsification on top: property checks with restricted
generators (`propcheck`) and score-function attacks composed from
gadgets (`attacks`).  `topology`, `profiles`, and `serial` handle
ingestion and canonical text forms; `cli` is the runnable surface.
"""

from .types import (
    AppEvent,
    Event,
    GlobalCounters,
    HeartbeatEvent,
    JoinEvent,
    LeaveEvent,
    MsgEvent,
    MsgsState,
    NbrTopicState,
    Network,
    Params,
    Payload,
    PeerState,
    ScoringConfig,
    TopicConfig,
    TopicCounters,
    Weights,
    lookup_gctrs,
    lookup_score,
    lookup_tctrs,
    subscribers,
    validate_config,
)
from .scoring import (
    calc_nbr_scores_map,
    calc_score,
    calc_score_topic,
    decay_counters,
    max_topic_score,
)
from .engine import (
    RunBudget,
    TransitionResult,
    heartbeat,
    run_network,
    run_network_violations,
    transition,
)
from .profiles import Profile, load_profile
from .topology import TopologySpec, build_network, load_topology
from .propcheck import Counterexample, search_counterexamples
from .attacks import (
    AttackGadget,
    AttackOutcome,
    build_eclipse,
    build_partition,
    induced_liveness_counterexample,
    run_gadget_attack,
    score_prop_violation,
)

__version__ = "0.1.0"

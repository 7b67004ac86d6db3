"""Exact Spoiler-Duplicator game engine for behavioural conformances on
finite state-based systems: trace inclusion, probabilistic trace distance,
bisimilarity, bisimulation topologies and quantitative (ready) simulation,
each solved by round-bounded and infinite conformance games and
cross-validated against independent brute-force semantics."""

from .conformance import (
    Carrier,
    CarrierMap,
    Claim,
    Conformance,
    Fibre,
    claim_holds,
    claim_to_conformance,
    join,
    leq,
    meet,
    pushforward,
    reindex,
)
from .coalgebra import Distribution, Model, parse_model, print_model, successors
from .graded import (
    BehaviourObject,
    DetSystem,
    Instance,
    INSTANCES,
    OneStep,
    behaviour_compare,
    gamma_n,
    instance_by_name,
    kleisli_star_apply,
    lift_compare,
    predeterminize,
    wasserstein,
)
from .refinement import AlgebraDescriptor, algebra_for, close, is_refinement
from .game import (
    GameReport,
    Move,
    PointClaim,
    SessionState,
    admissible,
    bluff_check,
    bounded_claim,
    nearness_claim,
    pair_claim,
    session_move,
    session_new,
    value_table,
    winning_region_inf,
    winning_region_n,
)
from .oracle import (
    bisimilarity,
    language_inclusion,
    simulation_values,
    theorem_check,
    total_variation,
    trace_distribution,
    traces_n,
)

__all__ = [name for name in dir() if not name.startswith("_")]

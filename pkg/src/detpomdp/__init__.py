"""Deterministic POMDP solving and analysis."""

from .beliefs import (
    Belief,
    DistBelief,
    LittmanTable,
    SetBelief,
    applicable_actions,
    filter_belief,
    is_target,
    observation_probs,
    observation_set,
    progress,
    table_init,
    table_step,
    table_to_belief,
)
from .errors import (
    BudgetExceededError,
    ClosureError,
    DetPomdpError,
    ImpossibleObservationError,
    ModelFormatError,
    PreconditionError,
    SolutionInvalidError,
    WrongClassError,
    WrongVariantError,
)
from .graph import (
    AndOrGraph,
    Policy,
    Solution,
    belief_transitions,
    build_graph,
    policy_to_solution,
    reachable_beliefs,
    solution_cost,
    solution_to_policy,
    validate_solution,
)
from .model import (
    MINEXP,
    MINMAX,
    ActionSpec,
    DetPomdp,
    initial_belief,
    load_model,
    make_action,
    model_hash,
    permute_states,
    save_model,
    transition_graph,
    validate,
)
from .perm import (
    DiameterReport,
    Permutation,
    PermutationFailure,
    action_as_permutation,
    build_cycle_instance,
    build_large_order_instance,
    build_rotation_model,
    chunk_profile,
    cycle_decomposition,
    diameter_conditions,
    group_membership,
    measure_diameter,
    pack_primes,
    pef_certificate_check,
    perm_order,
)
from .solve import (
    BUDGET_EXCEEDED,
    INF,
    NO_FINITE_POLICY,
    SOLVED,
    SimTrace,
    SolveResult,
    evaluate_policy,
    format_value,
    load_policy,
    mc_policy_value,
    save_policy,
    simulate,
    solve_explicit,
    solve_heuristic,
    solve_unobservable,
)

__all__ = [name for name in dir() if not name.startswith("_")]

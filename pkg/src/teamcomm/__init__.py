"""Min-max communication and control for a two-agent team facing an
adversary: model validation, common-information-belief dynamic programming,
strategy execution, exact best responses, and structural property checkers.
"""

from .belief import (
    COMM,
    CTRL,
    AnchoredBelief,
    BeliefNodeKey,
    FactorizedBelief,
    comm_update,
    ctrl_update,
    init_cib,
    outcome_dist,
)
from .channel import PHI, ChannelOutcome, adversary_observation, comm_outcome_dist, rand_draw
from .errors import (
    InadmissiblePrescription,
    InvalidDistribution,
    MissingObservationKernel,
    NodeCapExceeded,
    PolicyModelMismatch,
    ScenarioValidationError,
    SizeLimitExceeded,
    TeamCommError,
    UnreachableNodeQueried,
    UnsupportedInfoStructure,
    ZeroProbabilityOutcome,
)
from .evaluation import (
    CheckReport,
    check_belief_anchor,
    check_conditional_independence,
    exact_cost,
    monte_carlo_cost,
)
from .model import (
    ConstraintSpec,
    GameModel,
    MarkovChannel,
    Violation,
    is_team_problem,
    model_violations,
    validate_model,
)
from .prescriptions import (
    CandidateSet,
    PrescriptionPair,
    enumerate_deterministic,
    explicit_candidates,
    forced_prescription,
    forced_set,
    simplex_grid,
)
from .solver import (
    CoordinatorPolicy,
    DPSolver,
    SolveConfig,
    SolveTree,
    admissible_comm_set,
    extract_policy,
    solve,
)
from .strategy import (
    BeliefTeamStrategy,
    HistoryAdversaryStrategy,
    HistoryStrategy,
    HistoryTeamStrategy,
    OpenLoopAdversary,
    PolicyTeamStrategy,
    ReducedTeamStrategy,
    ReductionArtifacts,
    SeededRandomAdversary,
    SeededRandomTeamStrategy,
    UniformAdversary,
    adversary_best_response,
    check_adversary_independence,
    materialize_history_strategy,
    max_cost_gap,
    psi_factorization_gap,
    reduce_strategy,
    run_episode,
)

__all__ = [name for name in dir() if not name.startswith("_")]

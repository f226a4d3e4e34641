"""Batch remote state preparation from multi-intensity weak coherent pulses.

A simulation and numerical-analysis toolkit: the batch-preparation protocol
and its honest/malicious receivers, the classical correctness and security
games with a census-only adversary library, closed-form finite-size error
budgets, constrained parameter optimization, the pulse-budget scaling sweep,
and the maximal-intensity comparison tables.
"""

from .numerics import (
    ExpFloat,
    ParameterError,
    Probability,
    RngStream,
    binomial_sample,
    lambert_w_minus1,
    poisson_counts,
    poisson_pmf,
    poisson_sample,
    wilson_interval,
)
from .qubits import (
    ALL_ELEMENTS,
    IDENTITY,
    PLUS,
    GroupElement,
    PlusState,
    PulseEmission,
    X,
    Z,
    act,
    compose,
    inverse,
    sample_group_element,
    wcp_emit,
)
from .estimation import (
    AcceptedCounts,
    Coefficients,
    EstimationAlgorithm,
    ProtocolViolationError,
    TwoIntensityEstimator,
    algorithm_b,
    coefficients,
    reference_t,
    statistic_t,
)
from .bounds import (
    ConstraintViolation,
    ErrorBudget,
    SlackParams,
    batch_size_for,
    correctness_bound,
    delta_double_prime,
    delta_prime,
    epsilon_ac,
    security_bound,
)
from .protocol import (
    FirstKReceiver,
    HonestReceiver,
    IdealBatchOutput,
    PnsReceiver,
    ProtocolParams,
    ReceiverStrategy,
    SenderState,
    Transcript,
    ideal_batch,
    run_honest,
    run_with_receiver,
)
from .games import (
    ADVERSARIES,
    AdversaryContractError,
    AdversaryDecision,
    AdversaryStrategy,
    GameOutcome,
    GameRunStats,
    PhotonCensus,
    adversary_beta,
    adversary_honest_mimic,
    adversary_pns_greedy,
    game_cor,
    game_sim,
    run_game_cor_trials,
    run_game_sim_trials,
)
from .analysis import (
    NuStarPoint,
    OptimizationResult,
    ScalingFit,
    Table,
    figure_data,
    nu_star_dkl,
    nu_star_glmo,
    nu_star_point,
    optimize,
    scaling_sweep,
)

__version__ = "0.1.0"

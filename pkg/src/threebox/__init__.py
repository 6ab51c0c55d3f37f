"""threebox: simulator, statistics engine and game service for the
quantum three-box game.

The game: Alice prepares a three-state system in an equal superposition
of three "boxes", Bob secretly opens box 1 or box 2 (or neither), and
Alice then checks a final superposition via her own box-3 measurement,
betting that Bob's opening came up true whenever her check fires. Against
any macrorealist system she can win at most half of her bets; against the
quantum system she wins them all (noise permitting), while Bob can detect
no disturbance from her side of the statistics.
"""
from .hilbert import (
    Channel,
    DensityMatrix,
    Projector,
    StateVector,
    Unitary,
    ZeroProbabilityProjection,
)
from .lg_stats import (
    ConditionalEstimate,
    InsufficientData,
    LgReport,
    MissingGroundTruth,
    SamplingPolicy,
    build_report,
    k_direct,
    k_from_conditionals,
    sigma_violation,
)
from .mr_search import (
    FitResult,
    HistoryAssignment,
    best_noncontextual_fit,
    enumerate_histories,
    k_bounds,
    scan_deterministic_strategies,
)
from .noise import NoiseParams, RepopulationTag
from .protocol import (
    BobOutcome,
    Context,
    ContextSchedule,
    EngineKind,
    MrStrategy,
    RoundRecord,
    ScheduleKind,
    SessionConfig,
    play_round,
    run_session,
    run_verification,
    settle,
)

__version__ = "0.1.0"

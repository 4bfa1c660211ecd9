"""Credit-based uplink pricing for P2P streaming.

An uploader posts a uniform bandwidth price; downloaders with credit
balances best-respond with purchases; the revenue-optimal price clears the
uploader's capacity exactly. The package provides the closed-form solver,
a brute-force oracle, two distributed protocol realizations (one-round and
iterative bargaining), and a churn simulator with a credit ledger.
"""

from .errors import ConvergenceError, OracleError, ProtocolAbort, ValidationError
from .model import (
    LN2,
    Allocation,
    DemandCurve,
    DemandSegment,
    Equilibrium,
    GameInstance,
    PeerProfile,
    RegionLabel,
    aggregate_demand,
    best_response,
    build_demand_curve,
    downloader_utility,
    satisfaction,
)
from .oracle import GridSpec, ProbeResult, deviation_probe, grid_search_price
from .protocol import (
    BargainConfig,
    Message,
    MessageKind,
    ProtocolTrace,
    RefinementEvent,
    TraceRound,
    replay,
    run_bargaining,
    run_direct,
)
from .simulator import (
    Epoch,
    EventKind,
    Ledger,
    LedgerEntry,
    ScenarioEvent,
    TimelineRecord,
    apply_transaction,
    churn_check,
    ledger_csv,
    run_scenario,
)
from .solver import (
    SolverConfig,
    VerificationReport,
    balance_region_price,
    classify_region,
    ordered_threshold_price,
    solve,
    two_peer_price,
    verify_se,
)

__version__ = "0.1.0"

__all__ = [
    "LN2",
    "Allocation",
    "BargainConfig",
    "ConvergenceError",
    "DemandCurve",
    "DemandSegment",
    "Epoch",
    "Equilibrium",
    "EventKind",
    "GameInstance",
    "GridSpec",
    "Ledger",
    "LedgerEntry",
    "Message",
    "MessageKind",
    "OracleError",
    "PeerProfile",
    "ProbeResult",
    "ProtocolAbort",
    "ProtocolTrace",
    "RefinementEvent",
    "RegionLabel",
    "ScenarioEvent",
    "SolverConfig",
    "TimelineRecord",
    "TraceRound",
    "ValidationError",
    "VerificationReport",
    "aggregate_demand",
    "apply_transaction",
    "balance_region_price",
    "best_response",
    "build_demand_curve",
    "churn_check",
    "classify_region",
    "deviation_probe",
    "downloader_utility",
    "grid_search_price",
    "ledger_csv",
    "ordered_threshold_price",
    "replay",
    "run_bargaining",
    "run_direct",
    "run_scenario",
    "satisfaction",
    "solve",
    "two_peer_price",
    "verify_se",
]

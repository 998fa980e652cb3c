"""Resource allocation and benchmarking for semantic feature multiple access downlinks."""

from .channel import ChannelRealization, Topology, draw_channel, path_loss_db, place_users, snr_db
from .semantic_rate import (
    CalibratedRho,
    InterferenceProfile,
    Link,
    LogisticRhoParams,
    calibrate_rho,
    load_rho_table,
    pair_sum_rate,
    rho,
    rho_derivative,
    save_rho_table,
    sinr_conventional,
    sinr_semantic,
    user_rate,
)
from .pairing import (
    PairingAssignment,
    UserTerminal,
    build_preference_lists,
    pair_users,
    preference_value,
    temporal_gap,
)
from .power import (
    ConvergenceError,
    Group,
    KKTReport,
    MinRateInfeasible,
    PowerAllocation,
    SolveResult,
    SolverConfig,
    extreme_point_min_rate,
    extreme_point_stationary,
    inter_group_allocate,
    intra_group_allocate,
    kkt_residuals,
    solve,
)
from .baselines import BaselineScheme, fnoma_sum_rate, ofdma_sum_rate, ojscc_sum_rate, pair_distinctive
from .bench import ConfigError, RunReport, ScenarioConfig, emit_csv, read_report, run_sweep

__version__ = "0.1.0"

"""Trace-driven DRAM read-disturbance simulator.

Models activation-count-driven (hammer) and row-open-time-driven (press)
disturbance on a synthetic device, replays command traces through
mitigation engines, and re-derives characterization statistics.
"""

__version__ = "0.1.0"

from .timing import (
    NS,
    US,
    MS,
    Command,
    CommandKind,
    CommandSequenceError,
    SimulationError,
    TimingError,
    TimingParams,
    parse_trace,
    read_trace,
    write_trace,
)
from .profile import (
    AcminCurve,
    DeviceProfile,
    Materialization,
    ProfileError,
    RowVariation,
    builtin_profiles,
    get_profile,
    load_profile,
    materialize_rows,
    save_profile,
)
from .bank import (
    Bank,
    CHECKERBOARD,
    DataPattern,
    FlipEvent,
    check_retention,
    snapshot_bitflips,
)
from .mitigations import (
    AdaptationConfig,
    AdaptedMitigation,
    Graphene,
    GrapheneConfig,
    MisraGries,
    Para,
    ParaConfig,
    TrrConfig,
    TrrSampler,
    adapt,
)
from .engine import Replayer, ReplayResult, replay
from .tracegen import (
    PocOrder,
    PocParams,
    SweepSpec,
    gen_hammer,
    gen_poc,
    gen_random_traffic,
    gen_rowpress_sweep,
)
from .characterizer import (
    AcminResult,
    NotVulnerableError,
    analytic_acmin,
    crossover_scan,
    measure_acmin,
    overlap_and_direction,
    run_overlap_experiment,
    sweep,
)
from .overhead import measure_overhead, overhead_sweep, simulate_controller

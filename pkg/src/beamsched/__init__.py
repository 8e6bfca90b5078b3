"""Return-link scheduling study for interference-limited multi-beam satellite MIMO.

Library layout:

- channel / geometry: beam cluster geometry, user drops, channel synthesis
- rates: per-user MMSE-SIC rates, max-min decode ordering, sum capacity
- scheduling: bipartite-graph path enumeration, minimum-deletion allocation,
  exhaustive-search oracle, fictitious-color grouping, counting formulas
- fsa: adaptive free-slot-assignment controller and slot accounting
- metrics: outage CDFs, Jain fairness, complexity estimators
- campaign: experiment runner emitting CSV artifacts (also exposed as the
  `beamsched` command line)
"""

from .channel import (
    AntennaPattern,
    BeamLayout,
    ChannelMatrix,
    NoiseModel,
    UserDrop,
    UserTerminal,
    build_hex_layout,
    drop_users,
    synthesize_channel,
    synthesize_generations,
    write_channel_csv,
)
from .errors import (
    BeamschedError,
    ConfigError,
    EnumerationCapError,
    GeometryError,
    GroupingError,
    NumericalError,
    OracleCapError,
    SchedulingError,
    SynthesisError,
)
from .rates import (
    SlotRates,
    evaluate_slot,
    mmse_sic_sinr,
    optimal_ordering,
    per_user_rates,
    sum_rate,
)
from .scheduling import (
    Allocation,
    PathCombination,
    color_grouping,
    counting,
    enumerate_paths,
    exhaustive_search,
    min_deletion_schedule,
    schedule_generations,
    write_allocation_csv,
)
from .fsa import (
    FsaConfig,
    ScheduleRecord,
    adaptive_schedule,
    efficiency_accounting,
    fixed_depth_schedule,
    fsa_path_enumeration,
)
from .metrics import (
    CampaignStats,
    complexity_estimate,
    complexity_fsa,
    complexity_gain,
    jain_index,
    outage_curve,
    outage_probability,
)
from .campaign import CampaignConfig, emit_plot_data, load_config, run_campaign

__version__ = "0.1.0"

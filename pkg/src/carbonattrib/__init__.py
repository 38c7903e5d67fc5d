"""Carbon-intensity attribution (location- vs market-based) and its effect on
carbon-aware workload optimization."""

from .attribution import (
    CarbonSignal,
    DivergenceSummary,
    ci_lb,
    ci_mb,
    ci_res,
    divergence,
    residual_mix,
    signal_set,
)
from .errors import CarbonAttribError
from .evaluation import (
    AutoscaleInputs,
    CdfResult,
    DiscrepancyRecord,
    EmissionsReport,
    ScenarioMatrix,
    ScenarioResult,
    SpatialInputs,
    SweepTable,
    TemporalInputs,
    daily_discrepancies,
    discrepancy,
    evaluate,
    per_region_cdfs,
    ppa_sweep,
    region_cdf,
    run_scenario,
    scenario_matrix,
)
from .grid import (
    DEFAULT_SOURCES,
    ConsumerProfile,
    EnergySource,
    GenerationSeries,
    PpaPortfolio,
    validate_series,
)
from .optimizers import (
    AllocationPlan,
    AutoscaleJob,
    ClientSite,
    DataCenter,
    RoutingAssignment,
    TemporalJob,
    autoscale,
    autoscale_baseline,
    route_baseline,
    route_requests,
    schedule_baseline,
    schedule_job,
)

__version__ = "0.1.0"

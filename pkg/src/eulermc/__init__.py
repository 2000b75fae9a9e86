"""Finite volume solver for the 2D isentropic Euler system on periodic
grids, with a Monte Carlo harness for statistical convergence studies."""

__version__ = "0.1.0"

from .analysis import (
    MeshLadder,
    TestFunction,
    cesaro_average,
    consistency_residuals,
    dual_sobolev_norm,
    inject_to_fine,
    lq_norm,
    restrict_to_coarse,
)
from .errors import (
    ConfigError,
    NonConvergence,
    PlanError,
    PositivityLoss,
    SolverError,
    TopologyError,
)
from .fields import (
    FieldSet,
    GasParams,
    KHDataSpec,
    data_metric,
    energy_density,
    read_efld,
    sample_kh_data,
    sample_stream,
    total_energy,
    write_efld,
)
from .grid import FaceView, Grid, average, discrete_divergence, discrete_gradient, jump
from .montecarlo import (
    ErrorTable,
    SamplePlan,
    empirical_mean,
    observed_order,
    run_sample,
    statistical_error_e1,
    statistical_error_e2,
    total_error_study,
)
from .scheme import (
    SchemeParams,
    StepReport,
    Trajectory,
    residual,
    solve,
    step,
    upwind_flux,
    validate_params,
)

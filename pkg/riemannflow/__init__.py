# Surface geometry
from .surface import (
    EpsilonParam,
    SurfacePoint,
    MomentumPolar,
    PhaseState,
    TurningPoint,
    axis_point,
    sheet_index,
    fold_angle,
    potential,
    energy,
    acceleration,
    turning_point,
    turning_points_between,
    nearest_turning_point,
    pt_reflect,
)

# Integration
from .events import (
    Event,
    BranchCutCrossing,
    CutRayCrossing,
    NegativeImagAxisCrossing,
    Closure,
    TurningTermination,
    Escape,
    EnergyFault,
    BudgetExhausted,
)
from .integrator import (
    IntegratorConfig,
    Trajectory,
    derivative,
    polar_derivative,
    integrate,
    integrate_polar,
    dense_state,
    launch_on_shell,
    launch_on_axis,
    launch_from_turning_point,
    launch_on_ray,
)

# Analysis and sweeps
from .analysis import (
    Closed,
    Terminating,
    Escaping,
    Spiraling,
    Undetermined,
    OrbitClassification,
    EscapeFit,
    analytic_period,
    numeric_period,
    enclosed_turning_points,
    pt_symmetry_distance,
    classify,
    critical_point,
    region_beyond,
    terminating_start,
    escape_angles,
    fit_escape,
)
from .sweep import (
    CriticalCurveSample,
    SweepResult,
    GapTable,
    sweep_x0,
    sweep_s0,
    find_s0_minimum,
    gap_edge,
    gap_table,
)

# Configuration, output and utilities
from .config import RunConfig, load_config, parse_epsilon, parse_grid
from .io import write_trajectory_csv, read_trajectory_csv, write_json
from .plotting import SheetPlot, emit_svg_plot
from . import errors
from . import misc
from .constants import Colors

__version__ = "0.1.0"

"""Clock-conditioned quantum dynamics on finite clocks."""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .clock import Clock, ClockSpec, build_clock, clock_state, commutator_defect
from .constraint import (
    InteractionSpec,
    NoPhysicalStateError,
    PhysicalState,
    SeparableTerm,
    TotalHamiltonian,
    Trajectory,
    assemble_total,
    condition,
    full_trajectory,
    normalize_physical,
    physical_inner_product,
    physical_states,
    reconstruct,
)
from .evolution import (
    KernelOperator,
    PicardConvergenceError,
    Propagator,
    build_kernel,
    composition_residual,
    isometry_defect,
    picard_solve,
    residual_modified_se,
    schrodinger_propagator,
    series_propagator,
    time_ordered_propagator,
)

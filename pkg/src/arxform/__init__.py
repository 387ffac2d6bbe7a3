"""ARX (finite input/output window) reformulations of dynamic feedback controllers."""

from .core_sim import (
    ClosedLoopRecord,
    ControllerModel,
    PlantModel,
    RecursiveController,
    Trajectory,
    max_deviation,
    nominal_bound_M,
    simulate_closed_loop,
    sup_norm,
)
from .errors import (
    ArxformError,
    ConvergenceRegionError,
    DepthExhausted,
    DimensionError,
    NonFiniteError,
    SingularMatrixError,
    UnstableError,
)
from .kernels import BACKEND
from .observer_arx import (
    ArxController,
    KLDecay,
    ObserverForm,
    PerturbationReport,
    check_observer_consistency,
    compose_fo_N,
    implied_perturbation,
    order_from_bound,
    select_order_N,
)
from .linear_analysis import (
    LinearController,
    LinearPlant,
    build_closed_loop,
    delta_N,
    fir_apply,
    fir_coefficients,
    frequency_sup_bound,
    frequency_sweep,
    is_schur,
    observer_based_map,
    order_bound_linear,
    simulate_linear_arx,
    spectral_envelope,
)

__version__ = "0.1.0"

"""Spin dynamics of a single trapped-ion qubit in a spin-polarised atomic bath."""

__version__ = "0.1.0"

from .physics import (  # noqa: E402
    AtomSpec,
    IonSpec,
    PairParams,
    c4_from_langevin,
    c4_from_polarizability,
    langevin_rate,
    reduced_mass,
    total_collision_rate,
)
from .rates import (  # noqa: E402
    FourLevelRates,
    RateMatrix,
    TwoLevelRates,
    build_rule_set,
    decompose_rates,
    n_level_evolution,
    n_level_steady_state,
    two_level_evolution,
    two_level_steady_state,
)
from .collisions import (  # noqa: E402
    BranchingConfig,
    TrajectoryState,
    run_ensemble,
    run_trajectory,
    spin_temperature,
    steady_energy_analytic,
    step_collision,
)
from .detection import DetectionModel, CountRecord, binomial_interval, forward_model, invert  # noqa: E402
from .ramsey import RamseySettings, contrast_decay, fringe_probability, shift_bound, simulate_ramsey_mc  # noqa: E402
from .estimate import (  # noqa: E402
    FitResult,
    MeasurementSet,
    bootstrap,
    derive_rate_decomposition,
    fit_contrast_decay,
    fit_fringe,
    fit_relaxation,
)

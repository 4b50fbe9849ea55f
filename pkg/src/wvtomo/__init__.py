"""Weak-value qubit state tomography for dispersive circuit-QED readout."""

from .cavity import (
    CavityFieldTrajectory,
    IntegratedFactors,
    RateSet,
    ReadoutParams,
    field_trajectory,
    integrated_factors,
    make_grid,
    rates_at,
    stationary_fields,
    stationary_trajectory,
    steady_rates,
    transient_fields,
)
from .errors import (
    ConfigError,
    DegenerateLikelihood,
    EmptyPostSelection,
    NoConvergence,
    OrthogonalPostSelection,
    SingularReconstruction,
    StepTooCoarse,
    WvtomoError,
)
from .states import (
    BlochAngles,
    DensityMatrix,
    PureQubitState,
    angles_from_pure,
    density_from_pure,
    fidelity,
    pure_from_angles,
)
from .tomography import (
    PpsResult,
    WeakValue,
    analytic_pps,
    extract_weak_value,
    mc_pps,
    pps_from_weak_value,
    reconstruct,
    true_weak_value,
)
from .trajectory import (
    BayesianFactors,
    EnsembleResult,
    MeasurementRecord,
    apply_inefficiency,
    bayesian_update,
    read_record,
    record_factors,
    simulate_ensemble,
    simulate_record,
    write_record,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]

"""Simulator and closed-form oracles for direct quantum state measurement
via weak pointer couplings."""

from .evolution import (
    CouplingSpec,
    JointState,
    PostselectionError,
    apply_conditional_coupling,
    apply_coupling,
    joint_ann_moment,
    make_joint,
    pointer_moments,
    postselect,
    reduced_momentum_density,
    reduced_position_density,
    reduced_system_density,
    strong_measure,
    weak_value_from_moments,
)
from .hilbert import (
    BasisLabel,
    DensityMatrix,
    DiracDistribution,
    OperatorMatrix,
    StateVector,
    expectation,
    fourier_basis,
    fourier_ket,
    projector,
    random_density,
    random_state,
    s_ab_operator,
    standard_basis,
    standard_ket,
    trace_distance,
    triple_projector,
    unbiasedness_defect,
)
from .oracle import (
    density_from_triple_exact,
    dirac_exact,
    weak_average,
    weak_strong_exact,
    weak_value_mixed,
    weak_value_pure,
)
from .pointer import (
    HBAR,
    PointerGrid,
    PointerParams,
    PointerState,
    WrapAroundError,
    boost,
    expect_ann,
    expect_k,
    expect_q,
    gaussian_pointer,
    momentum_density,
    position_density,
    translate,
)
from .protocols import (
    DEFAULT_SWEEP,
    CalibrationResult,
    DensityReadout,
    DiracReadout,
    ProtocolEstimate,
    ProtocolParams,
    WavefunctionReadout,
    calibrate_scheme1,
    convergence_slope,
    direct_density,
    direct_dirac,
    direct_wavefunction,
    dirac_to_density,
    extrapolate_sweep,
    invert_dirac,
    mixed_state_response,
    scheme1_weak_product,
    scheme2_weak_product,
    weak_strong_product,
)
from .sampling import SampledEstimate, ShotPlan, WeakStrongSetting, sample_protocol

__version__ = "0.1.0"

__all__ = [
    "BasisLabel",
    "CalibrationResult",
    "CouplingSpec",
    "DEFAULT_SWEEP",
    "DensityMatrix",
    "DensityReadout",
    "DiracDistribution",
    "DiracReadout",
    "HBAR",
    "JointState",
    "OperatorMatrix",
    "PointerGrid",
    "PointerParams",
    "PointerState",
    "PostselectionError",
    "ProtocolEstimate",
    "ProtocolParams",
    "SampledEstimate",
    "ShotPlan",
    "StateVector",
    "WavefunctionReadout",
    "WeakStrongSetting",
    "WrapAroundError",
    "apply_conditional_coupling",
    "apply_coupling",
    "boost",
    "calibrate_scheme1",
    "convergence_slope",
    "density_from_triple_exact",
    "dirac_exact",
    "dirac_to_density",
    "direct_density",
    "direct_dirac",
    "direct_wavefunction",
    "expect_ann",
    "expect_k",
    "expect_q",
    "expectation",
    "extrapolate_sweep",
    "fourier_basis",
    "fourier_ket",
    "gaussian_pointer",
    "invert_dirac",
    "joint_ann_moment",
    "make_joint",
    "mixed_state_response",
    "momentum_density",
    "pointer_moments",
    "position_density",
    "postselect",
    "projector",
    "random_density",
    "random_state",
    "reduced_momentum_density",
    "reduced_position_density",
    "reduced_system_density",
    "s_ab_operator",
    "sample_protocol",
    "scheme1_weak_product",
    "scheme2_weak_product",
    "standard_basis",
    "standard_ket",
    "strong_measure",
    "trace_distance",
    "translate",
    "triple_projector",
    "unbiasedness_defect",
    "weak_average",
    "weak_strong_exact",
    "weak_strong_product",
    "weak_value_from_moments",
    "weak_value_mixed",
    "weak_value_pure",
]

"""Data-driven MIMO controller tuning with co-identification of
non-minimum-phase transmission zeros."""

from .controller import (
    ControllerStructure,
    InverseDecomposition,
    N_jacobian,
    build_controller,
    delta_jacobian,
    delta_of_P,
    inverse_decomposition,
    pi_structure,
    pid_structure,
)
from .errors import OcituneError
from .experiment import (
    BoxStats,
    EvaluationProtocol,
    ExcitationSettings,
    ExperimentConfig,
    IdentificationResult,
    McSummary,
    MonteCarloSettings,
    collect_closed_loop,
    evaluate_jmr,
    internal_stability_check,
    monte_carlo,
    run_oci,
)
from .optimize import OptimOptions, OptimReport, audit_gradient, default_init, minimize
from .polynomial import (
    FactoredDenominator,
    Polynomial,
    convolve_split,
    factor_unit_circle,
    poly_mul,
    poly_roots,
    reverse_unstable,
    sylvester_jacobian,
)
from .predictor import (
    OCIProblem,
    PredictionResult,
    Theta,
    cost_VNF,
    filtered_error,
    jacobian_eps_F,
    predict,
    prediction_error,
)
from .rational import RationalFunction
from .refmodel import (
    EntryTemplate,
    RefModelSpec,
    build_Ld,
    build_refmodel,
    coupling_zero_from_direction,
    eta_jacobian,
    extract_nmp_zero,
    principal_unstable_zero,
    verify_zero_constraint,
)
from .signals import DataBatch, gaussian_noise, prbs, shape_noise, snr_db
from .transfer import TransferMatrix, ZeroDirection, closed_loop, ideal_controller

__version__ = "0.1.0"

"""Lattice-based factoring with tensor network sampling of CVP roundings."""

from .congruence import FactorResult, ParityMatrix, assemble_squares, build_parity_matrix, extract_factors, kernel_basis, process
from .cvp_model import DiagonalCvpHamiltonian, build_hamiltonian, config_to_lattice_point, energy, exact_low_energy_enum
from .driver import Hyperparameters, RunReport, experiment_compare, run_factor
from .errors import (
    CapacityError,
    ConsistencyError,
    DegenerateBasisError,
    DomainError,
    EigensolverError,
    InvalidArgumentError,
    NotRepresentableError,
    TnssError,
)
from .lattice import CvpInstance, ReducedBasis, babai_nearest_plane, build_cvp_instance, lll_reduce
from .numtheory import (
    MultiplicityVector,
    PrimeBasis,
    RsaKey,
    gcd,
    generate_prime_basis,
    generate_rsa_key,
    is_prime,
    mod_pow,
    smooth_decompose,
)
from .scaling import CostBreakdown, ScalingParams, cost_model, qubits_needed, scaling_rho
from .sieve import SieveOutcome, SrPair, check_smooth_relation, estimate_asrpl, pair_from_coeffs, sieve_cvp
from .ttn import (
    PerturbationSpec,
    SampledConfig,
    TtnState,
    amplitude,
    ground_state_search,
    init_ttn,
    make_perturbation,
    perturb,
    sample_distinct,
)

__version__ = "0.1.0"

"""tqolab: desk-scale verification of gap stability for commuting-projector models."""

__version__ = "0.1.0"

from .config import DEFAULT, SolverConfig
from .lattice import Box, QubitLayout, Square, Torus, ball, box_partition, enumerate_squares
from .models import (CommutingProjectorModel, GroundData, build_ising,
                     build_toric_code, ground_data, load_model, local_projector,
                     save_model)
from .operators import (OperatorMatrix, PauliString, commutes,
                        conditional_expectation, locality_profile, operator_norm,
                        pauli_mul, realize)
from .perturb import (LocalFamily, block_diagonal_part, random_family,
                      strength_of, uniform_field)
from .filters import FilterSpec, build_F, build_g, spectral_multiplier, verify_filter
from .spectral import (SpectralBands, check_relbound_containment, check_theorem1,
                       cluster_bands, dense_spectrum, fit_theorem1, gap_path,
                       low_spectrum)
from .tqo import check_corollary, check_tqo1, check_tqo2, estimate_Lstar
from .flow import (FlowState, check_samespace, conjugated_hamiltonian,
                   decompose_local, evolve_U, generator_Ds, relbound_of_family,
                   rewrite_global_to_local)

__all__ = [name for name in dir() if not name.startswith("_")]

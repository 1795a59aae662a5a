"""Desk-scale numerical checks of canonical/microcanonical ensemble equivalence
for k-local lattice Hamiltonians, via exact diagonalization."""

__version__ = "0.1.0"

from .berry_esseen import SpectralCDF, delta_bound, kolmogorov_distance, spectral_cdf
from .correlations import CorrelationEstimate, CorrelationProfile, correlation, fit_profile
from .equivalence import (
    EquivalenceReport,
    MicroRelEntReport,
    check_window_states,
    check_state_equivalence,
    check_microcanonical_equivalence,
    lambert_w,
    local_distance_average,
    micro_relent_bound,
)
from .lattice import CubeFamily, LatticeSpec, Region, distance, group_decomposition, hypercubes
from .operators import Hamiltonian, LocalTerm, ModelSpec, SpectralDecomposition, build_model, diagonalize, embed_term
from .quantinfo import (
    DivergenceValue,
    free_energy,
    max_relative_entropy,
    relative_entropy,
    trace_distance,
    von_neumann_entropy,
)
from .states import (
    DensityMatrix,
    MicrocanonicalWindow,
    ThermalData,
    gibbs,
    haar_state,
    microcanonical,
    partial_trace,
    restricted_partition,
)
from .substate import SubstateWitness, product_reference_witness, datta_renner_transfer, product_approximation, substate_smooth

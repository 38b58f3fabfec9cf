"""Loop-corrected contraction of closed tensor networks.

Belief propagation supplies a factorized approximation to the contraction
of a closed network; the configuration expansion then adds back loop terms
order by order.  The package covers finite networks, translation-invariant
double-layer PEPS cells on square / hexagonal / kagome geometries, and
quasi-exact references (boundary MPS, strips, small tori) to score against.
"""

from .bp import (
    BPFixedPoint,
    BPNotConverged,
    CellFixedPoint,
    bethe_free_energy,
    bethe_log_z,
    find_fixed_point,
    find_fixed_point_unitcell,
    fixed_point_from_json,
    fixed_point_to_json,
    normalize_fixed_point,
)
from .loops import (
    Excitation,
    ExcitationCatalog,
    anchored_placements,
    brute_force_config_sum,
    edge_projectors,
    enumerate_excitations,
    evaluate_catalog,
    excitation_weight,
    factorized_weight,
    fit_suppression,
    placement_value,
    single_loop_ring,
    weight_on_network,
    windowed_excitation_counts,
)
from .models import (
    aklt_peps,
    kagome_to_hex,
    kagome_to_hex_double_layer,
    random_peps,
    spin_matrices,
    total_spin_projector,
)
from .network import (
    DoubleLayerCell,
    LatticeSpec,
    PEPSUnitCell,
    TensorNetwork,
    build_double_layer,
    build_finite_patch,
    contract_greedy,
    hexagonal_lattice,
    kagome_lattice,
    lattice_by_name,
    network_from_json,
    network_to_json,
    square_lattice,
    unit_cell_network,
)
from .observables import (
    DensityMatrixResult,
    FreeEnergySeries,
    SeriesNotConverged,
    TransferMatrixResult,
    bp_free_energy,
    density_matrix_series,
    free_energy_multi,
    free_energy_single,
    transfer_matrix_series,
)
from .reference import (
    BoundaryEnvironment,
    ReferenceResult,
    ReferenceUnreliable,
    boundary_environment,
    boundary_mps_free_energy,
    exact_patch_value,
    periodic_torus_free_energy,
    strip_free_energy,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "BPFixedPoint",
    "BPNotConverged",
    "CellFixedPoint",
    "bethe_free_energy",
    "bethe_log_z",
    "find_fixed_point",
    "find_fixed_point_unitcell",
    "fixed_point_from_json",
    "fixed_point_to_json",
    "normalize_fixed_point",
    "Excitation",
    "ExcitationCatalog",
    "anchored_placements",
    "brute_force_config_sum",
    "edge_projectors",
    "enumerate_excitations",
    "evaluate_catalog",
    "excitation_weight",
    "factorized_weight",
    "fit_suppression",
    "placement_value",
    "single_loop_ring",
    "weight_on_network",
    "windowed_excitation_counts",
    "aklt_peps",
    "kagome_to_hex",
    "kagome_to_hex_double_layer",
    "random_peps",
    "spin_matrices",
    "total_spin_projector",
    "DoubleLayerCell",
    "LatticeSpec",
    "PEPSUnitCell",
    "TensorNetwork",
    "build_double_layer",
    "build_finite_patch",
    "contract_greedy",
    "hexagonal_lattice",
    "kagome_lattice",
    "lattice_by_name",
    "network_from_json",
    "network_to_json",
    "square_lattice",
    "unit_cell_network",
    "DensityMatrixResult",
    "FreeEnergySeries",
    "SeriesNotConverged",
    "TransferMatrixResult",
    "bp_free_energy",
    "density_matrix_series",
    "free_energy_multi",
    "free_energy_single",
    "transfer_matrix_series",
    "BoundaryEnvironment",
    "ReferenceResult",
    "ReferenceUnreliable",
    "boundary_environment",
    "boundary_mps_free_energy",
    "exact_patch_value",
    "periodic_torus_free_energy",
    "strip_free_energy",
]

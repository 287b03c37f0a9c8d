"""Schrödinger operators on metric graphs: spectra, Green's functions and local convergence."""
from .bs_metric import DistanceReport, bs_distance, reroot_average_check, sample_root
from .conditions import boundary_matrices, delta_unitary, dirichlet_unitary, kirchhoff_unitary, neumann_unitary
from .ensembles import EnsembleSpec, convergence_experiment, generate, injectivity_profile, n_lift
from .errors import GraphValidationError, NumericalError
from .graph import (
    CombinatorialGraph,
    EdgePotential,
    QuantumGraph,
    RootedQuantumGraph,
    ValidationBounds,
    add_root_vertex,
    build_quantum_graph,
    make_quantum_graph,
    total_length,
)
from .greens import GreenEvaluation, green_diagonal, resolvent_trace, smoothed_spectral_density
from .io import RunConfig, parse_graph_file
from .spectral import (
    SmoothBump,
    eigenvalues_up_to,
    empirical_measure,
    functional_calculus_kernel,
    parse_test_function,
)

__version__ = "0.1.0"

__all__ = [
    "CombinatorialGraph",
    "DistanceReport",
    "EdgePotential",
    "EnsembleSpec",
    "GraphValidationError",
    "GreenEvaluation",
    "NumericalError",
    "QuantumGraph",
    "RootedQuantumGraph",
    "RunConfig",
    "SmoothBump",
    "ValidationBounds",
    "add_root_vertex",
    "boundary_matrices",
    "bs_distance",
    "build_quantum_graph",
    "convergence_experiment",
    "delta_unitary",
    "dirichlet_unitary",
    "eigenvalues_up_to",
    "empirical_measure",
    "functional_calculus_kernel",
    "generate",
    "green_diagonal",
    "injectivity_profile",
    "kirchhoff_unitary",
    "make_quantum_graph",
    "n_lift",
    "neumann_unitary",
    "parse_graph_file",
    "parse_test_function",
    "reroot_average_check",
    "resolvent_trace",
    "sample_root",
    "smoothed_spectral_density",
    "total_length",
]

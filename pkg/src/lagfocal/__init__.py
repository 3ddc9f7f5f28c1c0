"""Curvature and focal times of Jacobi curves of dynamical Lagrangian distributions.

The package follows a Hamiltonian flow, pulls a field of Lagrangian subspaces
back along it and studies the resulting curve in the Lagrange Grassmannian:
its curvature operator (a matrix Schwarzian), the change of curvature under
reduction by first integrals in involution, and its focal times.
"""
from .errors import (CalibrationError, ChartError, ConfigError, DomainError, InputError, IntegrationError,
                     LagfocalError, MonotonicityError, NormalizationError, NumericalError, ReductionDegeneracyError,
                     RegularityError, TransversalityError)
from .focal_scan import FocalRecord, FocalScan, alternation_report, focal_scan, focal_times, reduced_focal_times
from .hamiltonian_flow import HamiltonianModel, integrate_flow, jacobi_frames, jacobi_jet, linearized_flow
from .integral_reduction import (IntegralTuple, check_involution, curvature_report, dynamical_curvature_delta,
                                 ricci_curvature, x_fields_and_upsilon)
from .jacobi_geometry import coordinate_jet, curvature_via_derivative_curve, matrix_schwarzian, mobius_transform
from .models import MODEL_NAMES, build_model
from .symplectic_core import LagrangianFrame, SymplecticSpace

__version__ = "1.0.0"

"""Gauge connections on a discretized torus through the tangent groupoid.

A q-connection pairs a family of holonomy kernels K_hbar(x, y) on a periodic
lattice with a classical su(N) connection A0, glued by

    K_hbar(x, x + hbar v) ~ exp(hbar A0(x)(v))  as hbar -> 0.
"""
from .errors import DomainError, BranchCutError, CapacityError
from .group import exp_alg, log_group, su2_generators, algebra_basis
from .lattice import LatticeManifold, random_smooth_field, seeded_spd_metric
from .operators import (
    KernelOperator, StateVector, convolve_state, convolve_kernels, adjoint, trace,
    operator_norm, as_matrix,
)
from .qconnection import (
    ClassicalConnection, QConnectionKernel, parallel_transport, build_kernel,
    gluing_errors, recover_classical, pointwise_product,
)
from .gauge import (
    GaugeTransform, gauge_q, gauge_classical, compatibility_residual, LatticeIsometry,
    isometry_act,
)
from .dirac import Tetrad, DiracOperator, tetrad_from_metric, rotate_tetrad, apply_dirac, commutator_kernel
from .classical import continuum_symbol, lattice_symbol, symbol_kernel_residual, classical_limits

__all__ = [name for name in dir() if not name.startswith("_")]

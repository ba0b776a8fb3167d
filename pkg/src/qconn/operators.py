"""Integral-kernel operators on the lattice Hilbert space L^2(torus, C^N).

A kernel is a table ``K[x, y]`` of N x N complex blocks. It acts on states
by the weighted sum

    (K * phi)(y) = sum_x w(x) K(x, y) phi(x)

with w the metric volume weights. Under this action block products have to
be taken in the order that makes composition work::

    convolve_kernels(K, K2)(x, z) = sum_y w(y) K2(y, z) K(x, y)

so that ``convolve_state(convolve_kernels(K, K2), phi)`` is
``convolve_state(K2, convolve_state(K, phi))``: K acts first. For N = 1 this
is the usual kernel product. In matrix form,
``as_matrix(convolve_kernels(K, K2)) == as_matrix(K2) @ as_matrix(K)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import CapacityError, DomainError
from .lattice import fourier_modes, plane_waves, draw_coefficients

#: largest dense matrix (in entries) that as_matrix will build
DENSE_GUARD = 2 ** 26


@dataclass(frozen=True, eq=False)
class KernelOperator:
    """M_N(C)-valued function on site pairs, shape ``(S, S, N, N)``."""

    lattice: object = field(repr=False)
    table: np.ndarray = field(repr=False)

    def __post_init__(self):
        table = np.array(self.table, dtype=complex)
        s = self.lattice.n_sites
        if table.ndim != 4 or table.shape[:2] != (s, s) or table.shape[2] != table.shape[3]:
            raise DomainError(f"kernel table must have shape (S, S, N, N) with S = {s}, got {table.shape}")
        if not np.all(np.isfinite(table)):
            raise DomainError("kernel table has non-finite entries")
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    @property
    def n(self):
        return self.table.shape[-1]

    def with_table(self, table):
        return replace(self, table=table)

    def __repr__(self):
        return f"{type(self).__name__}(shape={self.lattice.shape}, N={self.n})"


@dataclass(frozen=True, eq=False)
class StateVector:
    """Per-site C^N values, shape ``(S, N)``."""

    lattice: object = field(repr=False)
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=complex)
        if values.ndim != 2 or values.shape[0] != self.lattice.n_sites:
            raise DomainError(f"state must have shape (S, N), got {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self):
        return self.values.shape[-1]

    @classmethod
    def random(cls, lattice, seed, n=2):
        rng = np.random.default_rng(seed)
        shape = (lattice.n_sites, n)
        return cls(lattice, rng.normal(size=shape) + 1j * rng.normal(size=shape))


def inner(phi, psi):
    """<phi, psi> = sum_x w(x) phi(x)^dagger psi(x)."""
    _check_pair(phi.lattice, psi.lattice, phi.n, psi.n)
    w = phi.lattice.volume_weights
    return complex(np.sum(w[:, None] * np.conj(phi.values) * psi.values))


def norm(phi):
    return float(np.sqrt(inner(phi, phi).real))


def _check_pair(lat_a, lat_b, n_a, n_b):
    if not lat_a.same_as(lat_b):
        raise DomainError("operands live on different lattices")
    if n_a != n_b:
        raise DomainError(f"fiber dimension mismatch: {n_a} vs {n_b}")


# -- constructors ----------------------------------------------------------

def zero_kernel(lattice, n=2):
    s = lattice.n_sites
    return KernelOperator(lattice, np.zeros((s, s, n, n), dtype=complex))


def constant_kernel(lattice, matrix):
    """K(x, y) = matrix for every pair (the all-I kernel for matrix = I)."""
    matrix = np.asarray(matrix, dtype=complex)
    s = lattice.n_sites
    return KernelOperator(lattice, np.broadcast_to(matrix, (s, s) + matrix.shape))


def unit_kernel(lattice, n=2, scale=1.0):
    """Discrete delta: ``scale / w(x)`` times I on the diagonal; the algebra unit for scale 1."""
    s = lattice.n_sites
    table = np.zeros((s, s, n, n), dtype=complex)
    idx = np.arange(s)
    table[idx, idx] = (scale / lattice.volume_weights)[:, None, None] * np.eye(n)
    return KernelOperator(lattice, table)


def random_kernel(lattice, seed, n=2):
    """Kernel with independent standard complex Gaussian blocks."""
    rng = np.random.default_rng(seed)
    shape = (lattice.n_sites, lattice.n_sites, n, n)
    return KernelOperator(lattice, rng.normal(size=shape) + 1j * rng.normal(size=shape))


def smooth_kernel(lattice, seed, bandlimit=1, n=2, amplitude=1.0):
    """Kernel bandlimited in both arguments.

    K(x, y) = sum_{k, l} C_{kl} exp(2 pi i (k.x + l.y) / L) with |k_j|, |l_j| <=
    bandlimit. Coefficients depend on the seed only, so refinements of the
    lattice sample the same continuum kernel.
    """
    if 2 * bandlimit >= min(lattice.shape):
        raise DomainError("bandlimit must be below min(n_j)/2")
    modes = fourier_modes(lattice.d, bandlimit)
    m = len(modes)
    coeffs = draw_coefficients(seed, m * m, n * n, amplitude).reshape(m, m, n, n) / np.sqrt(m)
    waves = plane_waves(modes, lattice.lengths, lattice.positions)
    table = np.einsum("xk,klab,yl->xyab", waves, coeffs, waves, optimize=True)
    return KernelOperator(lattice, table)


# -- algebra ---------------------------------------------------------------

def convolve_state(kernel, phi):
    """(K * phi)(y) = sum_x w(x) K(x, y) phi(x)."""
    _check_pair(kernel.lattice, phi.lattice, kernel.n, phi.n)
    w = kernel.lattice.volume_weights
    out = np.einsum("x,xyab,xb->ya", w, kernel.table, phi.values, optimize=True)
    return StateVector(phi.lattice, out)


def convolve_kernels(k1, k2):
    """Kernel of "k1 then k2": sum_y w(y) k2(y, z) k1(x, y)."""
    _check_pair(k1.lattice, k2.lattice, k1.n, k2.n)
    w = k1.lattice.volume_weights
    table = np.einsum("y,yzab,xybc->xzac", w, k2.table, k1.table, optimize=True)
    return KernelOperator(k1.lattice, table)


def adjoint(kernel):
    """Operator adjoint: K^dagger(x, y) = K(y, x)^dagger."""
    return KernelOperator(kernel.lattice, np.conj(kernel.table.transpose(1, 0, 3, 2)))


def trace(kernel):
    """Tr K = sum_x w(x) tr K(x, x)."""
    w = kernel.lattice.volume_weights
    diag = kernel.table[np.arange(kernel.lattice.n_sites), np.arange(kernel.lattice.n_sites)]
    return complex(np.sum(w * np.trace(diag, axis1=-2, axis2=-1)))


def operator_norm(kernel, iterations=200, seed=0):
    """Power-iteration estimate of the L^2 operator norm.

    Returns ||K v|| / ||v|| for v = (K^dagger K)^iterations v0; the estimate
    is nondecreasing in ``iterations``.
    """
    if iterations < 1:
        raise DomainError("iterations must be >= 1")
    lat = kernel.lattice
    adj = adjoint(kernel)
    v = StateVector.random(lat, seed, kernel.n)
    estimate = 0.0
    for _ in range(iterations):
        nv = norm(v)
        if nv == 0.0:
            return 0.0
        v = StateVector(lat, v.values / nv)
        kv = convolve_state(kernel, v)
        estimate = norm(kv)
        if estimate == 0.0:
            return 0.0
        v = convolve_state(adj, kv)
    return float(estimate)


def as_matrix(kernel):
    """Dense matrix of phi -> K * phi in the (site, component) basis.

    Entry [(y, a), (x, b)] is w(x) K(x, y)[a, b].
    """
    s, n = kernel.lattice.n_sites, kernel.n
    if (s * n) ** 2 > DENSE_GUARD:
        raise CapacityError(f"dense matrix of {(s * n) ** 2} entries exceeds guard {DENSE_GUARD}")
    w = kernel.lattice.volume_weights
    m = kernel.table.transpose(1, 2, 0, 3) * w[None, None, :, None]
    return m.reshape(s * n, s * n)


def from_matrix(lattice, matrix, n=2):
    """Inverse of :func:`as_matrix`."""
    s = lattice.n_sites
    m = np.asarray(matrix).reshape(s, n, s, n) / lattice.volume_weights[None, None, :, None]
    return KernelOperator(lattice, m.transpose(2, 0, 1, 3))


def weighted_singular_values(kernel):
    """Singular values of the kernel operator w.r.t. the weighted inner product (dense)."""
    m = as_matrix(kernel)
    sq = np.repeat(np.sqrt(kernel.lattice.volume_weights), kernel.n)
    return np.linalg.svd(sq[:, None] * m / sq[None, :], compute_uv=False)

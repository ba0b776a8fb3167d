"""Tetrads and the Dirac-type operator D = u1 e1 + u2 e2 + u3 e3.

The frame vector e_i(x) is column i of e(x), and differentiates a C^2-valued
field by the periodic central difference. The generator u_i multiplies the
result afterwards:

    (D phi)(x) = sum_i u_i sum_j e(x)[j, i] (D_j phi)(x)

Note that D is symmetric for constant tetrads: u_i and D_j are both
anti-Hermitian and they commute.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import group
from .errors import DomainError, CapacityError
from .lattice import LatticeManifold, check_positive_definite, fourier_modes, plane_waves, draw_coefficients
from .operators import KernelOperator, StateVector, DENSE_GUARD

_U = np.array(group.su2_generators())


@dataclass(frozen=True, eq=False)
class Tetrad:
    """Per-site frame e(x), shape ``(S, d, d)``, columns are the frame vectors."""

    lattice: object = field(repr=False)
    frames: np.ndarray = field(repr=False)

    def __post_init__(self):
        frames = np.array(self.frames, dtype=float)
        if frames.ndim != 3 or frames.shape[1] != frames.shape[2]:
            raise DomainError(f"frames must have shape (S, d, d), got {frames.shape}")
        if self.lattice is not None and frames.shape[:2] != (self.lattice.n_sites, self.lattice.d):
            raise DomainError("frames do not match the lattice")
        if np.any(np.linalg.det(frames) <= 0):
            raise DomainError("tetrad is not oriented (det e <= 0 somewhere)")
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)

    def metric(self):
        """q = e e^T per site."""
        return self.frames @ np.swapaxes(self.frames, -1, -2)

    @property
    def is_constant(self):
        return bool(np.all(self.frames == self.frames[0]))


def tetrad_from_metric(metric):
    """Per-site Cholesky factor of q (lower triangular, positive diagonal).

    Accepts a LatticeManifold (the tetrad is then bound to it) or a bare
    ``(S, d, d)`` metric array.
    """
    lattice = None
    if isinstance(metric, LatticeManifold):
        lattice, metric = metric, metric.metric
    metric = np.asarray(metric, dtype=float)
    check_positive_definite(metric)
    return Tetrad(lattice, np.linalg.cholesky(metric))


def random_rotation_field(lattice, seed, bandlimit=1, amplitude=1.0):
    """Bandlimited SO(d) field T(x) = expm(W(x)) with W real antisymmetric."""
    d = lattice.d
    if 2 * bandlimit >= min(lattice.shape):
        raise DomainError("bandlimit must be below min(n_j)/2")
    iu = np.triu_indices(d, 1)
    modes = fourier_modes(d, bandlimit)
    coeffs = draw_coefficients(seed, len(modes), len(iu[0]), amplitude)
    comps = np.real(plane_waves(modes, lattice.lengths, lattice.positions) @ coeffs)
    w = np.zeros((lattice.n_sites, d, d))
    w[:, iu[0], iu[1]] = comps
    w[:, iu[1], iu[0]] = -comps
    return scipy.linalg.expm(w)


def rotate_tetrad(e, rotation):
    """e'(x) = e(x) T(x) for a field of rotations T."""
    rotation = np.asarray(rotation, dtype=float)
    if rotation.shape != e.frames.shape:
        raise DomainError(f"rotation field must have shape {e.frames.shape}")
    eye = np.eye(rotation.shape[-1])
    if np.max(np.abs(rotation @ np.swapaxes(rotation, -1, -2) - eye)) > 1e-12:
        raise DomainError("rotation field is not orthogonal")
    if np.any(np.linalg.det(rotation) <= 0):
        raise DomainError("rotation field is not orientation preserving")
    return Tetrad(e.lattice, e.frames @ rotation)


def _check_dirac(e, n=2):
    if e.lattice is None:
        raise DomainError("tetrad is not bound to a lattice")
    if e.lattice.d != 3 or n != 2:
        raise DomainError(f"Dirac operator needs d = 3 and N = 2 (got d = {e.lattice.d}, N = {n})")


def apply_dirac(e, phi):
    """(D phi)(x) = sum_i u_i <D phi(x), e_i(x)>."""
    _check_dirac(e, phi.n)
    lat = e.lattice
    out = np.zeros_like(phi.values)
    for j in range(lat.d):
        dj = (phi.values[lat.neighbor(j, 1)] - phi.values[lat.neighbor(j, -1)]) / (2 * lat.spacing[j])
        for i in range(3):
            out += e.frames[:, j, i, None] * (dj @ _U[i].T)
    return StateVector(lat, out)


def frame_generators(e):
    """B_j(x) = sum_i e(x)[j, i] u_i, shape ``(S, d, 2, 2)``."""
    return np.einsum("xji,iab->xjab", e.frames, _U)


def dirac_matrix(e):
    """Dense matrix of D in the (site, component) basis, rows = output."""
    _check_dirac(e)
    lat = e.lattice
    s = lat.n_sites
    if (2 * s) ** 2 > DENSE_GUARD:
        raise CapacityError("Dirac matrix exceeds the dense size guard")
    blocks = np.zeros((s, s, 2, 2), dtype=complex)
    b = frame_generators(e)
    x = np.arange(s)
    for j in range(lat.d):
        coef = b[:, j] / (2 * lat.spacing[j])
        np.add.at(blocks, (x, lat.neighbor(j, 1)), coef)
        np.add.at(blocks, (x, lat.neighbor(j, -1)), -coef)
    return blocks.transpose(0, 2, 1, 3).reshape(2 * s, 2 * s)


def dirac_row(e, y):
    """Blocks M[y, x] of the Dirac matrix for one output site y, shape ``(S, 2, 2)``."""
    _check_dirac(e)
    lat = e.lattice
    row = np.zeros((lat.n_sites, 2, 2), dtype=complex)
    b = frame_generators(e)[y]
    for j in range(lat.d):
        coef = b[j] / (2 * lat.spacing[j])
        row[lat.neighbor(j, 1)[y]] += coef
        row[lat.neighbor(j, -1)[y]] -= coef
    return row


@dataclass(frozen=True, eq=False)
class DiracOperator:
    tetrad: Tetrad

    def __post_init__(self):
        _check_dirac(self.tetrad)

    @property
    def lattice(self):
        return self.tetrad.lattice

    def __call__(self, phi):
        return apply_dirac(self.tetrad, phi)

    def matrix(self):
        return dirac_matrix(self.tetrad)


def commutator_kernel(e, kernel):
    """Kernel of [D, K] in the form

        C(x, y) = sum_i u_i <d_y K(x, y), e_i(y)> + <d_x K(x, y), e_i(x)> u_i

    with central differences in each argument. It equals the matrix
    commutator exactly when the tetrad and the volume weights are constant.
    """
    _check_dirac(e, kernel.n)
    lat = e.lattice
    t = kernel.table
    b = frame_generators(e)
    out = np.zeros_like(t)
    for j in range(lat.d):
        h2 = 2 * lat.spacing[j]
        dy = (t[:, lat.neighbor(j, 1)] - t[:, lat.neighbor(j, -1)]) / h2
        dx = (t[lat.neighbor(j, 1)] - t[lat.neighbor(j, -1)]) / h2
        out += np.einsum("yab,xybc->xyac", b[:, j], dy)
        out += np.einsum("xyab,xbc->xyac", dx, b[:, j])
    return KernelOperator(lat, out)

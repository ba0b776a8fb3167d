"""Symbols of the Dirac-type operator and the hbar-scaled kernel identity.

With the Fourier convention exp(2 pi i <y - x, z>), a derivative d_j becomes
2 pi i z_j, so

    p_x(z) = 2 pi i sum_i u_i <e_i(x), z>.

p_x(z) is Hermitian for real z (i times an su(2) element); p_x(z) / (2 pi i)
is the su(2)-valued part. On the lattice the central difference has the
transfer symbol i sin(2 pi k_j h_j / L_j) / h_j in place of 2 pi i z_j.
"""
from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from . import group
from .dirac import _check_dirac, dirac_row, frame_generators
from .errors import DomainError

_U = np.array(group.su2_generators())


def continuum_symbol(e, x, z):
    """p_x(z) = 2 pi i sum_i u_i (e_i(x) . z); linear (degree-one homogeneous) in z."""
    z = np.asarray(z, dtype=float)
    b = frame_generators(e)[x]
    return 2j * np.pi * np.tensordot(z, b, axes=([-1], [0]))


def _check_zone(lattice, k):
    if np.any(2 * np.abs(k) > np.array(lattice.shape)):
        raise DomainError(f"mode {k} lies outside the Brillouin zone |k_j| <= n_j/2")


def lattice_symbol(e, x, k):
    """Transfer symbol of D at integer mode k: sum_j B_j(x) i sin(2 pi k_j / n_j) / h_j."""
    lat = e.lattice
    k = np.asarray(k)
    _check_zone(lat, k)
    mult = 1j * np.sin(2 * np.pi * k / np.array(lat.shape)) / lat.spacing
    b = frame_generators(e)[x]
    return np.tensordot(mult, b, axes=([-1], [0]))


def all_modes(lattice):
    """Integer Fourier modes in FFT order, shape ``lattice.shape + (d,)``."""
    grids = np.meshgrid(*[np.fft.fftfreq(n, 1.0 / n).astype(int) for n in lattice.shape], indexing="ij")
    return np.stack(grids, axis=-1)


@dataclass
class SymbolReport:
    hbar: float
    lattice_residual: float
    continuum_residual: float
    kernel_norm: float
    symbol_norm: float
    row: int

    def as_dict(self):
        return asdict(self)


def symbol_kernel_residual(e, hbar, row=0, low_modes=1):
    """Compare the hbar D row kernel with the inverse DFT of the hbar-scaled symbol.

    ``lattice_residual`` is max |(hbar D)[row, x] - ifft(hbar sigma)(row - x)|
    and should sit at roundoff. ``continuum_residual`` is the largest relative
    gap between lattice and continuum symbols over the modes 0 < |k_j| <=
    ``low_modes``; it is O(h^2).
    """
    _check_dirac(e)
    if not e.is_constant:
        raise DomainError("symbol_kernel_residual needs a constant tetrad")
    lat = e.lattice
    shape = lat.shape
    modes = all_modes(lat)
    mult = 1j * np.sin(2 * np.pi * modes / np.array(shape)) / lat.spacing
    b = frame_generators(e)[0]
    sigma = hbar * np.tensordot(mult, b, axes=([-1], [0]))
    # d(r) = (1/S) sum_k sigma(k) exp(2 pi i k.r / n)
    spatial = np.fft.ifftn(sigma, axes=tuple(range(lat.d)))
    blocks = hbar * dirac_row(e, row)
    rel = lat.coords[row] - lat.coords
    expected = spatial[tuple(np.mod(rel, shape).T)]
    lattice_residual = float(np.max(np.abs(blocks - expected)))

    worst = 0.0
    for k in np.ndindex(*(2 * low_modes + 1,) * lat.d):
        k = np.array(k) - low_modes
        if not np.any(k):
            continue
        z = k / np.array(lat.lengths)
        p = continuum_symbol(e, 0, z)
        q = lattice_symbol(e, 0, k)
        worst = max(worst, float(group.frobenius(q - p) / group.frobenius(p)))
    return SymbolReport(
        hbar=float(hbar),
        lattice_residual=lattice_residual,
        continuum_residual=worst,
        kernel_norm=float(np.sqrt(np.sum(np.abs(blocks) ** 2))),
        symbol_norm=float(np.sqrt(np.sum(np.abs(sigma) ** 2))),
        row=int(row),
    )


def classical_limits(kernel, a0_reference, e, hbar):
    """Both hbar -> 0 limits at one parameter value: connection germ and symbol identity."""
    from .qconnection import recover_classical

    gluing = recover_classical(kernel, a0_reference)
    symbol = symbol_kernel_residual(e, hbar)
    return {
        "connection": {"hbar": gluing.hbar, "max_error": gluing.max, "mean_error": gluing.mean},
        "metric": symbol.as_dict(),
    }

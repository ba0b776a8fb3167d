"""q-connections: classical connections A0 and the holonomy kernels A_hbar.

A0 assigns an algebra element to every (site, tangent vector), linearly in
the vector. A_hbar(x, y) is the parallel transport of A0 along the minimal
straight segment from x to y. The two are glued by

    A_hbar(x, x + hbar V) ~ exp(hbar A0(x, V))     as hbar -> 0.

Transport convention: the factor nearest x stands leftmost,
T(x, y) = exp(D A0(xi_1)) ... exp(D A0(xi_m)), so that transports along
concatenated segments compose as T(x, z) = T(x, y) T(y, z) and the sandwich
g(x) T(x, y) g(y)^-1 is the finite form of g A0 g^-1 + g d(g^-1).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import group
from .errors import DomainError
from .lattice import random_smooth_field
from .operators import KernelOperator

DEFAULT_STEPS = 16
# pairs processed per transport batch in build_kernel
_CHUNK = 1 << 16


@dataclass(frozen=True, eq=False)
class ClassicalConnection:
    """Per-site components A0(x, e_j), shape ``(S, d, N, N)``."""

    lattice: object = field(repr=False)
    components: np.ndarray = field(repr=False)
    kind: str = "SU"

    def __post_init__(self):
        comps = np.array(self.components, dtype=complex)
        lat = self.lattice
        if comps.ndim != 4 or comps.shape[:2] != (lat.n_sites, lat.d):
            raise DomainError(f"components must have shape (S, d, N, N), got {comps.shape}")
        scale = max(1.0, float(np.max(group.frobenius(comps), initial=0.0)))
        if group.anti_hermitian_residual(comps) > 1e-10 * scale:
            raise DomainError("connection components are not anti-Hermitian")
        comps.setflags(write=False)
        object.__setattr__(self, "components", comps)

    @property
    def n(self):
        return self.components.shape[-1]

    @classmethod
    def zero(cls, lattice, n=2, kind="SU"):
        return cls(lattice, np.zeros((lattice.n_sites, lattice.d, n, n), dtype=complex), kind)

    @classmethod
    def constant(cls, lattice, matrices, kind="SU"):
        """Same algebra element per axis at every site; ``matrices`` has shape (d, N, N)."""
        matrices = np.asarray(matrices, dtype=complex)
        return cls(lattice, np.broadcast_to(matrices, (lattice.n_sites,) + matrices.shape), kind)

    @classmethod
    def random(cls, lattice, seed, bandlimit=1, amplitude=1.0, n=2, kind="SU"):
        f = random_smooth_field(lattice, seed, bandlimit, "algebra", n=n, group_kind=kind,
                                amplitude=amplitude, count=lattice.d)
        return cls(lattice, f.values, kind)

    def __add__(self, other):
        return pointwise_product(self, other)

    def __neg__(self):
        return replace(self, components=-self.components)

    def interpolate(self, points):
        """Multilinear interpolation of the components at off-site points, ``(P, d, N, N)``."""
        lat = self.lattice
        u = np.asarray(points) / lat.spacing
        base = np.floor(u).astype(int)
        frac = u - base
        out = 0.0
        for corner in np.ndindex(*(2,) * lat.d):
            c = np.array(corner)
            weight = np.prod(np.where(c == 1, frac, 1.0 - frac), axis=-1)
            out = out + weight[:, None, None, None] * self.components[lat.site_index(base + c)]
        return out


def evaluate_classical(a0, x, v):
    """A0(x, V) = sum_j V_j A0(x, e_j)."""
    v = np.asarray(v, dtype=float)
    return np.tensordot(v, a0.components[x], axes=([-1], [0]))


def _transport_segments(a0, start, disp, m):
    """Ordered midpoint-rule product along start + t * disp, t in [0, 1]."""
    step = disp / m
    out = group.identity(a0.n, (len(start),))
    for k in range(m):
        xi = start + (k + 0.5) * step
        gen = np.einsum("pj,pjab->pab", step, a0.interpolate(xi))
        out = out @ group.exp_alg(gen)
    return group.reproject_if_drifting(out)


def parallel_transport(a0, x, y, m=DEFAULT_STEPS):
    """Holonomy of ``a0`` along the minimal segment from site x to site y.

    ``x`` and ``y`` may be arrays of site indices; the result then carries
    their broadcast shape in front of ``(N, N)``.
    """
    if m < 1:
        raise DomainError("transport needs m >= 1 steps")
    lat = a0.lattice
    x, y = np.broadcast_arrays(np.asarray(x), np.asarray(y))
    shape = x.shape
    x, y = x.ravel(), y.ravel()
    disp = lat.minimal_displacement(x, y)
    out = _transport_segments(a0, lat.positions[x], disp, m)
    return out.reshape(shape + (a0.n, a0.n))


@dataclass(frozen=True, eq=False, repr=False)
class QConnectionKernel(KernelOperator):
    """Unitary-valued kernel A_hbar with its parameter and transport steps."""

    hbar: float = 1.0
    steps: int = DEFAULT_STEPS

    def __post_init__(self):
        super().__post_init__()
        if not 0.0 < self.hbar <= 1.0:
            raise DomainError(f"hbar must lie in (0, 1], got {self.hbar}")


def build_kernel(a0, hbar, m=DEFAULT_STEPS):
    """Tabulate A_hbar(x, y) = parallel_transport(a0, x, y, m) over all site pairs."""
    if not 0.0 < hbar <= 1.0:
        raise DomainError(f"hbar must lie in (0, 1], got {hbar}")
    lat = a0.lattice
    s, n = lat.n_sites, a0.n
    table = np.empty((s * s, n, n), dtype=complex)
    xs, ys = np.divmod(np.arange(s * s), s)
    for lo in range(0, s * s, _CHUNK):
        sl = slice(lo, lo + _CHUNK)
        table[sl] = parallel_transport(a0, xs[sl], ys[sl], m)
    table = table.reshape(s, s, n, n)
    table[np.arange(s), np.arange(s)] = np.eye(n)
    return QConnectionKernel(lat, table, hbar=float(hbar), steps=int(m))


def axis_offsets(lattice, hbar):
    """Site offsets k_j with k_j h_j = hbar, one per axis."""
    ratio = hbar / lattice.spacing
    k = np.rint(ratio).astype(int)
    if np.any(np.abs(ratio - k) > 1e-9 * np.maximum(ratio, 1.0)) or np.any(k < 1):
        raise DomainError(f"hbar = {hbar} is not a positive multiple of the spacing {lattice.spacing}")
    if np.any(2 * k > np.array(lattice.shape)):
        raise DomainError(f"hbar = {hbar} exceeds half the period")
    return k


@dataclass
class GluingReport:
    """Per-site, per-axis gluing errors ||log K(x, x + hbar e_j) / hbar - A0(x, e_j)||."""

    errors: np.ndarray
    hbar: float

    @property
    def max(self):
        return float(np.max(self.errors))

    @property
    def mean(self):
        return float(np.mean(self.errors))


def gluing_errors(pair_values, hbar, reference):
    """Frobenius error between log(pair_values)/hbar and reference, per entry."""
    return group.frobenius(group.log_group(pair_values) / hbar - reference)


def recover_classical(kernel, a0_reference):
    """Compare the germ of ``kernel`` at each site with ``a0_reference``.

    Raises BranchCutError (from log_group) when hbar is too large for the
    logarithm to be principal.
    """
    lat = kernel.lattice
    offsets = axis_offsets(lat, kernel.hbar)
    x = np.arange(lat.n_sites)
    errors = np.empty((lat.n_sites, lat.d))
    for j in range(lat.d):
        y = lat.neighbor(j, offsets[j])
        errors[:, j] = gluing_errors(kernel.table[x, y], kernel.hbar, a0_reference.components[:, j])
    return GluingReport(errors, kernel.hbar)


def pointwise_product(a, b):
    """Entrywise group product of kernels, or componentwise sum of classical connections."""
    if not a.lattice.same_as(b.lattice):
        raise DomainError("pointwise_product: different lattices")
    if isinstance(a, ClassicalConnection) and isinstance(b, ClassicalConnection):
        if a.components.shape != b.components.shape:
            raise DomainError("pointwise_product: component shapes differ")
        return replace(a, components=a.components + b.components)
    if isinstance(a, QConnectionKernel) and isinstance(b, QConnectionKernel):
        if a.hbar != b.hbar:
            raise DomainError(f"pointwise_product: hbar differs ({a.hbar} vs {b.hbar})")
        if a.table.shape != b.table.shape:
            raise DomainError("pointwise_product: table shapes differ")
        return replace(a, table=a.table @ b.table)
    raise DomainError("pointwise_product: operands must both be kernels or both be connections")


def identity_kernel(lattice, hbar, n=2, steps=DEFAULT_STEPS):
    s = lattice.n_sites
    return QConnectionKernel(lattice, np.broadcast_to(np.eye(n, dtype=complex), (s, s, n, n)),
                             hbar=hbar, steps=steps)


def unitarity_defect(kernel):
    return float(group.unitarity_residual(kernel.table))


def inverse_defect(kernel):
    """max ||K(x, y) K(y, x) - I|| over pairs off the half-period tie."""
    lat = kernel.lattice
    s = lat.n_sites
    x, y = np.divmod(np.arange(s * s), s)
    keep = ~lat.on_tie(x, y)
    x, y = x[keep], y[keep]
    prod = kernel.table[x, y] @ kernel.table[y, x]
    return float(np.max(group.frobenius(prod - np.eye(kernel.n)), initial=0.0))

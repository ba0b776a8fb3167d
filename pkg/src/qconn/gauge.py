"""Gauge transformations acting on both ends of the q-connection space.

On kernels:     (g . A_hbar)(x, y) = g(x) A_hbar(x, y) g(y)^-1
On connections: (g . A0)(x, V)     = g(x) A0(x, V) g(x)^-1 + g(x) <d g^-1(x), V>

plus the relabelling action of exact lattice isometries (axis permutations,
reflections and translations).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import group
from .errors import DomainError
from .lattice import random_smooth_field
from .qconnection import ClassicalConnection, axis_offsets, gluing_errors, parallel_transport, DEFAULT_STEPS
from .operators import KernelOperator


@dataclass(frozen=True, eq=False)
class GaugeTransform:
    """Per-site group element g(x), shape ``(S, N, N)``."""

    lattice: object = field(repr=False)
    values: np.ndarray = field(repr=False)
    source: object = field(default=None, repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=complex)
        if values.ndim != 3 or values.shape[0] != self.lattice.n_sites:
            raise DomainError(f"gauge values must have shape (S, N, N), got {values.shape}")
        if group.unitarity_residual(values) > 1e-12:
            raise DomainError("gauge values are not unitary")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self):
        return self.values.shape[-1]

    @property
    def inverse_values(self):
        return group.dagger(self.values)

    @classmethod
    def identity(cls, lattice, n=2):
        return cls(lattice, group.identity(n, (lattice.n_sites,)))

    @classmethod
    def constant(cls, lattice, u):
        u = np.asarray(u, dtype=complex)
        return cls(lattice, np.broadcast_to(u, (lattice.n_sites,) + u.shape))

    @classmethod
    def random(cls, lattice, seed, bandlimit=1, amplitude=1.0, n=2, kind="SU"):
        """Bandlimited gauge field exp(X(x)); the synthesizing field is kept in ``source``."""
        f = random_smooth_field(lattice, seed, bandlimit, "gauge", n=n, group_kind=kind,
                                amplitude=amplitude)
        return cls(lattice, f.values, f)

    def __mul__(self, other):
        """Pointwise product (g h)(x) = g(x) h(x)."""
        if not self.lattice.same_as(other.lattice):
            raise DomainError("gauge product: different lattices")
        return GaugeTransform(self.lattice, self.values @ other.values)


def gauge_q(g, kernel):
    """Sandwich every kernel entry: g(x) K(x, y) g(y)^-1. Keeps hbar and steps."""
    if not g.lattice.same_as(kernel.lattice):
        raise DomainError("gauge_q: different lattices")
    table = np.einsum("xab,xybc,ycd->xyad", g.values, kernel.table, g.inverse_values, optimize=True)
    return kernel.with_table(table)


def central_difference(values, lattice, axis):
    """(f(x + h e_j) - f(x - h e_j)) / 2h on the periodic lattice, per site."""
    fwd = values[lattice.neighbor(axis, 1)]
    bwd = values[lattice.neighbor(axis, -1)]
    return (fwd - bwd) / (2.0 * lattice.spacing[axis])


def gauge_classical(g, a0):
    """g A0 g^-1 + g D_j(g^-1) with D_j the periodic central difference.

    The difference term is only anti-Hermitian to O(h^2), so the result is
    projected back onto the Lie algebra.
    """
    if not g.lattice.same_as(a0.lattice):
        raise DomainError("gauge_classical: different lattices")
    lat = a0.lattice
    ginv = g.inverse_values
    comps = np.empty_like(a0.components)
    for j in range(lat.d):
        conj = g.values @ a0.components[:, j] @ ginv
        comps[:, j] = conj + g.values @ central_difference(ginv, lat, j)
    return replace(a0, components=group.project_algebra(comps, a0.kind))


def compatibility_residual(g, a0, hbar, m=DEFAULT_STEPS):
    """max over sites and axes of ||log (g . A_hbar)(x, x + hbar e_j) / hbar - (g . A0)(x, e_j)||.

    Only the pairs that enter the germ are transported.
    """
    lat = a0.lattice
    offsets = axis_offsets(lat, hbar)
    target = gauge_classical(g, a0)
    x = np.arange(lat.n_sites)
    worst = 0.0
    for j in range(lat.d):
        y = lat.neighbor(j, offsets[j])
        pair = g.values[x] @ parallel_transport(a0, x, y, m) @ g.inverse_values[y]
        worst = max(worst, float(np.max(gluing_errors(pair, hbar, target.components[:, j]))))
    return worst


@dataclass(frozen=True)
class LatticeIsometry:
    """Site map (sigma c)_i = flips_i * c_{perm_i} + shifts_i  (mod n_i).

    Acts by pullback, (sigma . A)(x, y) = A(sigma x, sigma y), so
    ``compose(s, t)`` is the isometry whose action is "t first, then s".
    """

    perm: tuple
    flips: tuple
    shifts: tuple

    def __post_init__(self):
        d = len(self.perm)
        if sorted(self.perm) != list(range(d)) or len(self.flips) != d or len(self.shifts) != d:
            raise DomainError("isometry needs a permutation and d flips and shifts")
        if any(f not in (1, -1) for f in self.flips):
            raise DomainError("flips must be +1 or -1")
        object.__setattr__(self, "perm", tuple(int(p) for p in self.perm))
        object.__setattr__(self, "flips", tuple(int(f) for f in self.flips))
        object.__setattr__(self, "shifts", tuple(int(s) for s in self.shifts))

    @classmethod
    def identity(cls, d):
        return cls(tuple(range(d)), (1,) * d, (0,) * d)

    @classmethod
    def translation(cls, shifts):
        d = len(shifts)
        return cls(tuple(range(d)), (1,) * d, tuple(shifts))

    @property
    def linear_part(self):
        """Matrix of d(sigma): M[i, perm[i]] = flips[i]."""
        d = len(self.perm)
        m = np.zeros((d, d))
        m[np.arange(d), self.perm] = self.flips
        return m

    def check(self, lattice):
        if len(self.perm) != lattice.d:
            raise DomainError("isometry dimension does not match lattice")
        for i, p in enumerate(self.perm):
            if lattice.shape[i] != lattice.shape[p] or lattice.lengths[i] != lattice.lengths[p]:
                raise DomainError(f"axis permutation {self.perm} incompatible with unequal axes")

    def site_map(self, lattice):
        self.check(lattice)
        c = lattice.coords[:, self.perm] * np.array(self.flips) + np.array(self.shifts)
        return lattice.site_index(c)


def compose(sigma, tau):
    """Isometry acting as tau first, then sigma (site map x -> tau(sigma(x)))."""
    p, f, s = np.array(sigma.perm), np.array(sigma.flips), np.array(sigma.shifts)
    pt, ft, st = np.array(tau.perm), np.array(tau.flips), np.array(tau.shifts)
    return LatticeIsometry(tuple(p[pt]), tuple(ft * f[pt]), tuple(ft * s[pt] + st))


def isometry_act(sigma, obj):
    """Pull back a kernel, classical connection or gauge transform along ``sigma``."""
    lat = obj.lattice
    smap = sigma.site_map(lat)
    if isinstance(obj, KernelOperator):
        return obj.with_table(obj.table[np.ix_(smap, smap)])
    if isinstance(obj, ClassicalConnection):
        comps = np.einsum("ij,xiab->xjab", sigma.linear_part, obj.components[smap])
        return replace(obj, components=comps)
    if isinstance(obj, GaugeTransform):
        return GaugeTransform(lat, obj.values[smap])
    raise DomainError(f"isometry_act: unsupported object {type(obj).__name__}")

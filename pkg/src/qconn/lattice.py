"""The discretized base manifold: a flat periodic d-torus carrying a metric field.

Sites are numbered in C order of their integer coordinates, so a per-site
array of shape ``(S, ...)`` reshapes to ``shape + (...)``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import group
from .errors import DomainError


def _frozen(a):
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LatticeManifold:
    """Flat d-torus with ``shape[j]`` sites along an axis of length ``lengths[j]``.

    ``metric`` holds q(x) per site, shape ``(S, d, d)``; it enters volume
    weights and tetrads only. Geodesics are straight segments of the flat
    background.
    """

    shape: tuple
    lengths: tuple
    metric: np.ndarray = field(repr=False)

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        lengths = tuple(float(v) for v in self.lengths)
        if not 1 <= len(shape) <= 3:
            raise DomainError(f"dimension must be 1, 2 or 3, got {len(shape)}")
        if len(lengths) != len(shape):
            raise DomainError("lengths and shape disagree in dimension")
        if any(n < 1 for n in shape) or any(not v > 0 for v in lengths):
            raise DomainError("site counts and side lengths must be positive")
        d = len(shape)
        s = int(np.prod(shape))
        metric = np.asarray(self.metric, dtype=float)
        if metric.shape != (s, d, d):
            raise DomainError(f"metric must have shape {(s, d, d)}, got {metric.shape}")
        if not np.allclose(metric, np.swapaxes(metric, -1, -2), rtol=0, atol=1e-12):
            raise DomainError("metric is not symmetric")
        check_positive_definite(metric)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "metric", _frozen(metric))

    @classmethod
    def flat(cls, shape, lengths=None):
        shape = tuple(int(n) for n in shape)
        if lengths is None:
            lengths = (1.0,) * len(shape)
        s, d = int(np.prod(shape)), len(shape)
        return cls(shape, lengths, np.broadcast_to(np.eye(d), (s, d, d)))

    def with_metric(self, metric):
        return LatticeManifold(self.shape, self.lengths, metric)

    @property
    def d(self):
        return len(self.shape)

    @property
    def n_sites(self):
        return int(np.prod(self.shape))

    @property
    def spacing(self):
        return np.array(self.lengths) / np.array(self.shape)

    @cached_property
    def coords(self):
        """Integer coordinates of every site, shape ``(S, d)``."""
        grids = np.indices(self.shape).reshape(self.d, -1).T
        return _frozen(grids)

    @cached_property
    def positions(self):
        return _frozen(self.coords * self.spacing)

    @cached_property
    def is_flat(self):
        return bool(np.all(self.metric == np.eye(self.d)))

    def site_index(self, coords):
        """Site number of integer coordinates (reduced modulo the periods)."""
        coords = np.asarray(coords)
        wrapped = np.mod(coords, self.shape)
        return np.ravel_multi_index(tuple(np.moveaxis(wrapped, -1, 0)), self.shape)

    def neighbor(self, axis, step=1):
        """Index map x -> x + step * e_axis for all sites."""
        c = np.array(self.coords)
        c[:, axis] += step
        return self.site_index(c)

    def minimal_displacement(self, x, y):
        """Representative of y - x in (-L_j/2, L_j/2] per axis.

        Broadcasts over arrays of site indices; the result has a trailing
        axis of length d. Exact half-period ties resolve to +L_j/2.
        """
        x, y = np.asarray(x), np.asarray(y)
        n = np.array(self.shape)
        delta = np.mod(self.coords[y] - self.coords[x], n)
        delta = np.where(2 * delta > n, delta - n, delta)
        return delta * self.spacing

    def on_tie(self, x, y):
        """True where some component of y - x sits exactly on the half period."""
        n = np.array(self.shape)
        delta = np.mod(self.coords[np.asarray(y)] - self.coords[np.asarray(x)], n)
        return np.any(2 * delta == n, axis=-1)

    @cached_property
    def volume_weights(self):
        """sqrt(det q(x)) times the cell volume, per site."""
        return _frozen(np.sqrt(np.linalg.det(self.metric)) * np.prod(self.spacing))

    def volume_weight(self, x):
        return float(self.volume_weights[x])

    def total_volume(self):
        return float(np.sum(self.volume_weights))

    def same_as(self, other):
        return (self is other) or (
            self.shape == other.shape and self.lengths == other.lengths
            and np.array_equal(self.metric, other.metric))


def check_positive_definite(metric):
    """Raise DomainError naming the first site where Cholesky fails."""
    metric = np.asarray(metric, dtype=float)
    try:
        np.linalg.cholesky(metric)
    except np.linalg.LinAlgError:
        for i, q in enumerate(metric):
            try:
                np.linalg.cholesky(q)
            except np.linalg.LinAlgError:
                raise DomainError(f"metric is not positive definite at site {i}") from None
        raise


# -- bandlimited synthesis -------------------------------------------------

def fourier_modes(d, bandlimit):
    """All integer mode vectors with |k_j| <= bandlimit, lexicographic order."""
    r = range(-bandlimit, bandlimit + 1)
    return np.array(list(itertools.product(r, repeat=d)), dtype=int).reshape(-1, d)


def draw_coefficients(seed, n_modes, n_components, amplitude):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=(n_modes, n_components)) + 1j * rng.normal(size=(n_modes, n_components))
    return c * amplitude / np.sqrt(n_modes)


def plane_waves(modes, lengths, points):
    phase = 2j * np.pi * (np.asarray(points) / np.asarray(lengths)) @ modes.T
    return np.exp(phase)


@dataclass(frozen=True, eq=False)
class SmoothField:
    """Per-site values synthesized from Fourier modes |k_j| <= bandlimit.

    The underlying real trigonometric polynomial is kept, so the same field
    can be evaluated (and differentiated) off the lattice, and refining the
    lattice with the same seed samples the same continuum function.
    """

    values: np.ndarray
    bandlimit: int
    kind: str
    modes: np.ndarray = field(repr=False)
    coeffs: np.ndarray = field(repr=False)
    lengths: tuple = ()
    basis: np.ndarray | None = field(default=None, repr=False)
    count: int | None = None

    def _components(self, points):
        return np.real(plane_waves(self.modes, self.lengths, points) @ self.coeffs)

    def _assemble(self, comps, points):
        lead = np.shape(points)[:-1]
        if self.basis is None:
            return comps.reshape(lead + (self.count,)) if self.count else comps[..., 0]
        nb = len(self.basis)
        comps = comps.reshape(lead + ((self.count,) if self.count else ()) + (nb,))
        return np.tensordot(comps, self.basis, axes=([-1], [0]))

    def generator(self, points):
        """Real or algebra-valued field at arbitrary points (before exp for group kinds)."""
        return self._assemble(self._components(points), points)

    def evaluate(self, points):
        out = self.generator(points)
        if self.kind in ("group", "gauge"):
            out = group.exp_alg(out)
        return out

    def gradient(self, points):
        """Derivative of the generator along each axis; trailing axis of length d."""
        waves = plane_waves(self.modes, self.lengths, points)
        grads = []
        for j in range(self.modes.shape[1]):
            factor = 2j * np.pi * self.modes[:, j] / self.lengths[j]
            comps = np.real(waves @ (factor[:, None] * self.coeffs))
            grads.append(self._assemble(comps, points))
        return np.stack(grads, axis=len(np.shape(points)[:-1]))


def random_smooth_field(lattice, seed, bandlimit, kind="real", n=2, group_kind="SU",
                        amplitude=1.0, count=None):
    """Seeded bandlimited field on ``lattice``.

    ``kind`` is one of ``real``, ``algebra``, ``group`` or ``gauge``; group
    and gauge fields are ``exp_alg`` of an algebra field. ``count`` stacks
    several independent fields per site (e.g. one per axis). The mode
    coefficients depend on the seed but not on the site counts.
    """
    if kind not in ("real", "algebra", "group", "gauge"):
        raise DomainError(f"unknown field kind {kind!r}")
    bandlimit = int(bandlimit)
    if bandlimit < 0 or 2 * bandlimit >= min(lattice.shape):
        raise DomainError(
            f"bandlimit {bandlimit} must satisfy 0 <= bandlimit < min(n_j)/2 = {min(lattice.shape) / 2}")
    modes = fourier_modes(lattice.d, bandlimit)
    basis = None if kind == "real" else group.algebra_basis(n, group_kind)
    per_site = 1 if basis is None else len(basis)
    coeffs = draw_coefficients(seed, len(modes), per_site * (count or 1), amplitude)
    f = SmoothField(np.empty(0), bandlimit, kind, modes, coeffs, lattice.lengths, basis, count)
    values = f.evaluate(lattice.positions)
    if kind != "real":
        values = values.astype(complex)
    object.__setattr__(f, "values", _frozen(values))
    return f


def seeded_spd_metric(shape, lengths, seed, bandlimit=1, amplitude=0.3, points=None):
    """Bandlimited symmetric positive-definite metric q = expm(S), S symmetric.

    Evaluated on the lattice sites, or on ``points`` when given.
    """
    shape = tuple(shape)
    d = len(shape)
    iu = np.triu_indices(d)
    modes = fourier_modes(d, bandlimit)
    coeffs = draw_coefficients(seed, len(modes), len(iu[0]), amplitude)
    if points is None:
        points = LatticeManifold.flat(shape, lengths).positions
    comps = np.real(plane_waves(modes, lengths, points) @ coeffs)
    sym = np.zeros(comps.shape[:-1] + (d, d))
    sym[..., iu[0], iu[1]] = comps
    sym[..., iu[1], iu[0]] = comps
    w, v = np.linalg.eigh(sym)
    q = (v * np.exp(w)[..., None, :]) @ np.swapaxes(v, -1, -2)
    return 0.5 * (q + np.swapaxes(q, -1, -2))

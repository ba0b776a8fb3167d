"""Matrix Lie group / Lie algebra kernel for U(N) and SU(N).

Algebra elements are anti-Hermitian ``(..., N, N)`` complex arrays, group
elements are unitary ones. Every function here broadcasts over leading axes,
so a whole lattice of matrices goes through a single call.

For N = 2 the exponential and logarithm use the closed axis-angle form.
Other sizes go through scaling-and-squaring (exp) and a Schur
decomposition (log).
"""
from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import BranchCutError, DomainError

#: absolute tolerance of the anti-Hermitian / unitary membership checks
MEMBERSHIP_TOL = 1e-12
#: unitarity drift above which results are re-projected onto the group
DRIFT_TOL = 1e-13
#: minimal distance of a rotation angle from pi accepted by log_group
BRANCH_MARGIN = 1e-6


def dagger(a):
    return np.conj(np.swapaxes(a, -1, -2))


def frobenius(a):
    """Frobenius norm over the last two axes."""
    return np.sqrt(np.sum(np.abs(a) ** 2, axis=(-2, -1)))


def identity(n, batch=()):
    out = np.zeros(tuple(batch) + (n, n), dtype=complex)
    out[..., np.arange(n), np.arange(n)] = 1.0
    return out


def anti_hermitian_residual(x):
    return np.max(frobenius(x + dagger(x)), initial=0.0)


def unitarity_residual(u):
    u = np.asarray(u)
    return np.max(frobenius(u @ dagger(u) - identity(u.shape[-1])), initial=0.0)


def su2_generators():
    """The generators u1, u2, u3 of su(2), with u_i u_j + u_j u_i = -delta_ij."""
    s = np.sqrt(-0.5 + 0j)
    u1 = s * np.array([[0, 1], [1, 0]], dtype=complex)
    u2 = s * np.array([[0, 1j], [-1j, 0]], dtype=complex)
    u3 = s * np.array([[1, 0], [0, -1]], dtype=complex)
    return u1, u2, u3


def algebra_basis(n, kind="SU"):
    """Real basis of su(n) (or u(n)) normalized to tr(T_a T_b) = -delta_ab.

    For n = 2 the su(2) part is exactly ``su2_generators()``.
    """
    if kind not in ("SU", "U"):
        raise DomainError(f"unknown group kind {kind!r}")
    if n == 2:
        basis = list(su2_generators())
    else:
        basis = []
        for a in range(n):
            for b in range(a + 1, n):
                sym = np.zeros((n, n), dtype=complex)
                sym[a, b] = sym[b, a] = 1.0
                asym = np.zeros((n, n), dtype=complex)
                asym[a, b], asym[b, a] = -1j, 1j
                basis += [1j * sym / np.sqrt(2), 1j * asym / np.sqrt(2)]
        for k in range(1, n):
            diag = np.zeros(n)
            diag[:k] = 1.0
            diag[k] = -k
            diag /= np.sqrt(k * (k + 1))
            basis.append(1j * np.diag(diag).astype(complex))
    if kind == "U":
        basis.append(1j * np.eye(n, dtype=complex) / np.sqrt(n))
    if not basis:
        return np.zeros((0, n, n), dtype=complex)
    return np.array(basis)


def project_unitary(m):
    """Nearest unitary matrix (polar factor) of each nonsingular ``m``."""
    m = np.asarray(m, dtype=complex)
    w, s, vh = np.linalg.svd(m)
    if np.any(s[..., -1] <= 1e-14 * np.maximum(s[..., 0], 1e-300)):
        raise DomainError("project_unitary: singular matrix")
    return w @ vh


def reproject_if_drifting(u):
    drift = frobenius(u @ dagger(u) - identity(u.shape[-1]))
    bad = drift > DRIFT_TOL
    if np.any(bad):
        u = u.copy()
        u[bad] = project_unitary(u[bad])
    return u


def _check_algebra(x):
    scale = np.maximum(1.0, frobenius(x))
    if np.any(frobenius(x + dagger(x)) > MEMBERSHIP_TOL * scale):
        raise DomainError("exp_alg: input is not anti-Hermitian")


def exp_alg(x):
    """Matrix exponential of anti-Hermitian ``x`` (broadcast over leading axes)."""
    x = np.asarray(x, dtype=complex)
    if x.ndim < 2 or x.shape[-1] != x.shape[-2]:
        raise DomainError(f"exp_alg: expected (..., N, N), got {x.shape}")
    _check_algebra(x)
    n = x.shape[-1]
    if n == 1:
        return np.exp(x)
    if n == 2:
        c = 0.5 * np.trace(x, axis1=-2, axis2=-1)
        y = x - c[..., None, None] * identity(2)
        # y is traceless anti-Hermitian: y @ y = -theta^2 I
        theta2 = -0.5 * np.real(np.trace(y @ y, axis1=-2, axis2=-1))
        theta = np.sqrt(np.maximum(theta2, 0.0))
        u = (np.cos(theta)[..., None, None] * identity(2)
             + np.sinc(theta / np.pi)[..., None, None] * y)
        u = np.exp(c)[..., None, None] * u
    else:
        u = scipy.linalg.expm(x)
    return reproject_if_drifting(u)


def _log_su2(u):
    anti = 0.5 * (u - dagger(u))
    cos_t = 0.5 * np.real(np.trace(u, axis1=-2, axis2=-1))
    sin_t = np.sqrt(np.maximum(-0.5 * np.real(np.trace(anti @ anti, axis1=-2, axis2=-1)), 0.0))
    theta = np.arctan2(sin_t, cos_t)
    if np.any(theta > np.pi - BRANCH_MARGIN):
        raise BranchCutError("log_group: rotation angle within 1e-6 of pi")
    factor = np.where(sin_t > 0, theta / np.where(sin_t > 0, sin_t, 1.0), 1.0)
    return factor[..., None, None] * anti


def _log_schur(u):
    flat = u.reshape((-1,) + u.shape[-2:])
    out = np.empty_like(flat)
    for i, m in enumerate(flat):
        t, z = scipy.linalg.schur(m, output="complex")
        angles = np.angle(np.diag(t))
        if np.any(np.abs(angles) > np.pi - BRANCH_MARGIN):
            raise BranchCutError("log_group: eigenvalue angle within 1e-6 of pi")
        out[i] = (z * (1j * angles)) @ dagger(z)
    out = 0.5 * (out - dagger(out))
    return out.reshape(u.shape)


def log_group(u):
    """Principal logarithm of unitary ``u``; inverse of :func:`exp_alg`.

    Raises :class:`BranchCutError` when an eigenvalue angle is within
    ``BRANCH_MARGIN`` of pi.
    """
    u = np.asarray(u, dtype=complex)
    if u.ndim < 2 or u.shape[-1] != u.shape[-2]:
        raise DomainError(f"log_group: expected (..., N, N), got {u.shape}")
    n = u.shape[-1]
    if n == 1:
        angles = np.angle(u)
        if np.any(np.abs(angles) > np.pi - BRANCH_MARGIN):
            raise BranchCutError("log_group: angle within 1e-6 of pi")
        return 1j * angles + 0j
    if n == 2 and np.all(np.abs(np.linalg.det(u) - 1.0) < 1e-10):
        return _log_su2(u)
    return _log_schur(u)


def project_algebra(m, kind="SU"):
    """Orthogonal projection of a square matrix onto su(N) or u(N)."""
    m = np.asarray(m, dtype=complex)
    x = 0.5 * (m - dagger(m))
    if kind == "SU":
        n = m.shape[-1]
        tr = np.trace(x, axis1=-2, axis2=-1) / n
        x = x - tr[..., None, None] * identity(n)
    return x

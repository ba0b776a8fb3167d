import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qconn import operators as ops
from qconn.errors import CapacityError, DomainError
from qconn.gauge import GaugeTransform, gauge_q
from qconn.lattice import LatticeManifold, seeded_spd_metric
from qconn.qconnection import ClassicalConnection, build_kernel


@pytest.fixture
def small():
    return LatticeManifold.flat((3, 2, 2), (1.0, 0.7, 1.3))


@pytest.fixture
def curved():
    shape, lengths = (3, 3, 3), (1.0, 1.0, 1.2)
    return LatticeManifold(shape, lengths, seeded_spd_metric(shape, lengths, seed=11))


def naive_action(kernel, phi):
    lat = kernel.lattice
    out = np.zeros_like(phi.values)
    for y in range(lat.n_sites):
        for x in range(lat.n_sites):
            out[y] += lat.volume_weight(x) * kernel.table[x, y] @ phi.values[x]
    return out


def rel(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300)


def test_all_identity_kernel_averages(flat4):
    phi = ops.StateVector.random(flat4, 0)
    out = ops.convolve_state(ops.constant_kernel(flat4, np.eye(2)), phi)
    mean = np.sum(flat4.volume_weights[:, None] * phi.values, axis=0)
    np.testing.assert_allclose(out.values, np.broadcast_to(mean, out.values.shape), atol=1e-14)


def test_zero_kernel_gives_zero(flat4):
    phi = ops.StateVector.random(flat4, 0)
    assert np.all(ops.convolve_state(ops.zero_kernel(flat4), phi).values == 0)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_action_matches_double_loop(curved, seed):
    k = ops.random_kernel(curved, seed)
    phi = ops.StateVector.random(curved, seed + 10)
    assert rel(ops.convolve_state(k, phi).values, naive_action(k, phi)) < 1e-12


def test_unit_kernel_is_unit(curved):
    k = ops.random_kernel(curved, 3)
    e = ops.unit_kernel(curved)
    assert rel(ops.convolve_kernels(k, e).table, k.table) < 1e-13
    assert rel(ops.convolve_kernels(e, k).table, k.table) < 1e-13


@pytest.mark.parametrize("seed", range(4))
def test_associativity(curved, seed):
    a, b, c = (ops.random_kernel(curved, seed * 3 + i) for i in range(3))
    left = ops.convolve_kernels(ops.convolve_kernels(a, b), c).table
    right = ops.convolve_kernels(a, ops.convolve_kernels(b, c)).table
    assert rel(left, right) < 1e-11


def test_product_matches_successive_action(curved):
    k1, k2 = ops.random_kernel(curved, 5), ops.random_kernel(curved, 6)
    phi = ops.StateVector.random(curved, 7)
    once = ops.convolve_state(ops.convolve_kernels(k1, k2), phi).values
    twice = ops.convolve_state(k2, ops.convolve_state(k1, phi)).values
    assert rel(once, twice) < 1e-11


def test_double_adjoint_exact(small):
    k = ops.random_kernel(small, 1)
    assert np.array_equal(ops.adjoint(ops.adjoint(k)).table, k.table)


def test_adjoint_reverses_products(curved):
    k1, k2 = ops.random_kernel(curved, 8), ops.random_kernel(curved, 9)
    lhs = ops.adjoint(ops.convolve_kernels(k1, k2)).table
    rhs = ops.convolve_kernels(ops.adjoint(k2), ops.adjoint(k1)).table
    assert rel(lhs, rhs) < 1e-12


def test_adjoint_is_weighted_adjoint(curved):
    k = ops.random_kernel(curved, 4)
    phi, psi = ops.StateVector.random(curved, 1), ops.StateVector.random(curved, 2)
    lhs = ops.inner(ops.convolve_state(k, phi), psi)
    rhs = ops.inner(phi, ops.convolve_state(ops.adjoint(k), psi))
    assert abs(lhs - rhs) < 1e-12 * ops.norm(phi) * ops.norm(psi) * np.max(np.abs(k.table))


def test_unitary_kernel_is_self_adjoint_off_tie():
    lat = LatticeManifold.flat((5, 5), (1.0, 1.0))  # odd n: no ties
    k = build_kernel(ClassicalConnection.random(lat, 3), 0.2)
    assert np.max(np.abs(ops.adjoint(k).table - k.table)) < 1e-11


def test_trace_unit_volume():
    lat = LatticeManifold.flat((3, 4, 2))
    assert ops.trace(ops.constant_kernel(lat, np.eye(2))) == pytest.approx(2.0, abs=1e-14)


def test_trace_gauge_invariant(curved):
    k = ops.random_kernel(curved, 12)
    g = GaugeTransform.random(curved, 13)
    t0 = ops.trace(k)
    assert abs(ops.trace(gauge_q(g, k)) - t0) <= 1e-10 * (1 + abs(t0))


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_trace_cyclicity(seed):
    shape, lengths = (2, 3, 2), (1.0, 1.0, 2.0)
    lat = LatticeManifold(shape, lengths, seeded_spd_metric(shape, lengths, seed=seed % 17))
    a, b = ops.random_kernel(lat, seed), ops.random_kernel(lat, seed + 1)
    tab, tba = ops.trace(ops.convolve_kernels(a, b)), ops.trace(ops.convolve_kernels(b, a))
    # two-sided summation oracle
    w = lat.volume_weights
    oracle = np.einsum("x,y,xyab,yxba->", w, w, b.table, a.table)
    assert abs(tab - tba) <= 1e-10 * abs(tab)
    assert abs(tab - oracle) <= 1e-10 * abs(tab)


def test_operator_norm_trivial(flat4):
    assert ops.operator_norm(ops.zero_kernel(flat4)) == 0.0
    assert ops.operator_norm(ops.unit_kernel(flat4, scale=-2.5)) == pytest.approx(2.5, abs=1e-8)


@pytest.mark.parametrize("metric", ["flat", "spd"])
def test_operator_norm_matches_svd(metric):
    shape, lengths = (4, 4, 4), (1.0, 1.0, 1.0)
    lat = LatticeManifold.flat(shape, lengths)
    if metric == "spd":
        lat = lat.with_metric(seeded_spd_metric(shape, lengths, seed=2))
    k = ops.smooth_kernel(lat, 5, bandlimit=1)
    sv = ops.weighted_singular_values(k)
    assert abs(ops.operator_norm(k, iterations=500) - sv[0]) < 1e-6 * sv[0]


def test_as_matrix_zero(small):
    assert not np.any(ops.as_matrix(ops.zero_kernel(small)))


def test_as_matrix_product_order(curved):
    k1, k2 = ops.random_kernel(curved, 20), ops.random_kernel(curved, 21)
    m = ops.as_matrix(ops.convolve_kernels(k1, k2))
    assert rel(m, ops.as_matrix(k2) @ ops.as_matrix(k1)) < 1e-12


def test_as_matrix_adjoint(curved):
    k = ops.random_kernel(curved, 22)
    wmat = np.diag(np.repeat(curved.volume_weights, 2))
    # weighted adjoint of M is W^-1 M^dagger W
    expected = np.linalg.solve(wmat, ops.as_matrix(k).conj().T @ wmat)
    assert rel(ops.as_matrix(ops.adjoint(k)), expected) < 1e-12


def test_from_matrix_roundtrip(curved):
    k = ops.random_kernel(curved, 23)
    assert rel(ops.from_matrix(curved, ops.as_matrix(k)).table, k.table) < 1e-15


def test_capacity_guard(monkeypatch, small):
    monkeypatch.setattr(ops, "DENSE_GUARD", 10)
    with pytest.raises(CapacityError):
        ops.as_matrix(ops.zero_kernel(small))


def test_dimension_mismatch(small):
    with pytest.raises(DomainError):
        ops.convolve_state(ops.zero_kernel(small, 2), ops.StateVector.random(small, 0, 3))
    with pytest.raises(DomainError):
        ops.convolve_kernels(ops.zero_kernel(small), ops.zero_kernel(LatticeManifold.flat((2, 2, 3))))


def test_non_finite_rejected(small):
    t = np.zeros((12, 12, 2, 2))
    t[0, 0, 0, 0] = np.nan
    with pytest.raises(DomainError):
        ops.KernelOperator(small, t)


def test_smooth_kernel_refines_consistently():
    coarse, fine = LatticeManifold.flat((4, 4, 4)), LatticeManifold.flat((8, 8, 8))
    a, b = ops.smooth_kernel(coarse, 3), ops.smooth_kernel(fine, 3)
    even = fine.site_index(2 * coarse.coords)
    np.testing.assert_allclose(b.table[np.ix_(even, even)], a.table, atol=1e-13)

import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qconn import group
from qconn.errors import DomainError
from qconn.lattice import LatticeManifold, random_smooth_field, seeded_spd_metric


def brute_displacement(n, length, i, j):
    h = length / n
    cands = [(j - i + w * n) * h for w in (-1, 0, 1)]
    best = min(abs(c) for c in cands)
    return max(c for c in cands if abs(c) == best)  # tie -> positive


def test_displacement_self_is_zero(flat4):
    assert np.array_equal(flat4.minimal_displacement(5, 5), np.zeros(3))


def test_displacement_wraps_backward():
    lat = LatticeManifold.flat((8,), (1.0,))
    assert lat.minimal_displacement(0, 7)[0] == pytest.approx(-0.125)


def test_antipodal_tie_is_positive():
    lat = LatticeManifold.flat((8,), (1.0,))
    assert lat.minimal_displacement(0, 4)[0] == 0.5
    assert lat.minimal_displacement(4, 0)[0] == 0.5
    assert lat.on_tie(0, 4)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 12), length=st.floats(0.5, 3.0), i=st.integers(0, 50), j=st.integers(0, 50))
def test_displacement_matches_brute_force(n, length, i, j):
    lat = LatticeManifold.flat((n,), (length,))
    i, j = i % n, j % n
    assert lat.minimal_displacement(i, j)[0] == pytest.approx(brute_displacement(n, length, i, j), abs=1e-12)


def test_site_index_is_periodic(flat4):
    assert flat4.site_index([4, -1, 9]) == flat4.site_index([0, 3, 1])
    assert np.array_equal(flat4.site_index(flat4.coords), np.arange(64))


def test_flat_weights():
    lat = LatticeManifold.flat((8, 8, 8))
    assert np.allclose(lat.volume_weights, 1 / 512, rtol=0, atol=1e-18)
    assert lat.total_volume() == pytest.approx(1.0, abs=1e-12)


def test_weight_scales_with_det():
    flat = LatticeManifold.flat((4, 4, 4))
    big = flat.with_metric(np.broadcast_to(4 * np.eye(3), (64, 3, 3)))
    np.testing.assert_allclose(big.volume_weights, 8 * flat.volume_weights, rtol=1e-15)


def test_spd_volume_matches_riemann_sum():
    shape, lengths = (5, 4, 6), (1.0, 2.0, 0.5)
    q = seeded_spd_metric(shape, lengths, seed=7)
    lat = LatticeManifold(shape, lengths, q)
    cell = np.prod(np.array(lengths) / np.array(shape))
    oracle = sum(np.prod(np.diag(np.linalg.cholesky(qx))) * cell for qx in q)
    assert abs(lat.total_volume() - oracle) < 1e-12


def test_non_spd_metric_names_site():
    q = np.broadcast_to(np.eye(2), (9, 2, 2)).copy()
    q[4] = -np.eye(2)
    with pytest.raises(DomainError, match="site 4"):
        LatticeManifold((3, 3), (1.0, 1.0), q)


@pytest.mark.parametrize("kind", ["real", "algebra", "group", "gauge"])
def test_smooth_field_is_deterministic(flat4, kind):
    a = random_smooth_field(flat4, 3, 1, kind)
    b = random_smooth_field(flat4, 3, 1, kind)
    assert np.array_equal(a.values, b.values)


@pytest.mark.parametrize("n", [2, 3])
def test_group_field_is_unitary(flat4, n):
    f = random_smooth_field(flat4, 5, 1, "group", n=n)
    proj = group.project_unitary(f.values)
    assert np.max(np.abs(proj - f.values)) < 1e-12
    assert group.unitarity_residual(f.values) < 1e-12


def test_bandlimit_zero_is_constant(flat4):
    f = random_smooth_field(flat4, 2, 0, "algebra")
    assert np.max(np.abs(f.values - f.values[0])) == 0.0


@pytest.mark.parametrize("b", [2, 3, -1])
def test_bandlimit_too_large(flat4, b):
    with pytest.raises(DomainError):
        random_smooth_field(flat4, 0, b)


def test_refinement_samples_same_function():
    coarse = LatticeManifold.flat((4, 4))
    fine = LatticeManifold.flat((8, 8))
    a = random_smooth_field(coarse, 9, 1, "algebra")
    b = random_smooth_field(fine, 9, 1, "algebra")
    even = fine.site_index(2 * coarse.coords)
    np.testing.assert_allclose(b.values[even], a.values, atol=1e-14)


def test_gradient_matches_finite_difference():
    lat = LatticeManifold.flat((6, 6), (1.0, 2.0))
    f = random_smooth_field(lat, 4, 2, "algebra")
    pts = np.array([[0.13, 0.77], [0.5, 1.9]])
    eps = 1e-6
    grad = f.gradient(pts)
    for j in range(2):
        dp = np.zeros(2)
        dp[j] = eps
        fd = (f.generator(pts + dp) - f.generator(pts - dp)) / (2 * eps)
        np.testing.assert_allclose(grad[:, j], fd, atol=1e-7)


def test_spd_metric_is_spd():
    q = seeded_spd_metric((4, 4, 4), (1, 1, 1), seed=3, amplitude=0.5)
    assert np.allclose(q, np.swapaxes(q, -1, -2))
    assert np.all(np.linalg.eigvalsh(q) > 0)


def test_positions_and_coords(flat4):
    idx = list(itertools.product(range(4), repeat=3))
    assert np.array_equal(flat4.coords, np.array(idx))
    np.testing.assert_allclose(flat4.positions, np.array(idx) * 0.25)


def test_volume_converges_under_refinement():
    # continuum oracle from a very fine grid evaluated through the same bandlimited metric
    lengths = (1.0, 1.0)
    def vol(n):
        q = seeded_spd_metric((n, n), lengths, seed=5, amplitude=0.6)
        return LatticeManifold((n, n), lengths, q).total_volume()
    ref = vol(128)
    errs = [abs(vol(n) - ref) for n in (4, 8)]
    assert errs[1] <= errs[0] / 4 + 1e-15

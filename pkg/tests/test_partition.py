import math

import numpy as np
import pytest
from scipy import stats
from scipy.spatial.distance import pdist

from spherical_energy.geometry import cap_area, cap_radius, uniform_sphere
from spherical_energy.partition import (
    Cell,
    cell_area,
    cell_contains,
    cell_diameter,
    cell_sample,
    dump_partition,
    eq_partition,
    inner_cap,
    load_partition,
)
from spherical_energy.partition import _angles_to_cartesian


def test_single_cell_is_whole_sphere():
    part = eq_partition(2, 1)
    (cell,) = part.cells
    assert cell.lo == 0.0 and cell.hi == math.pi and cell.base is None
    assert cell_area(cell) == pytest.approx(1.0, abs=1e-15)
    assert cell_diameter(cell) == pytest.approx(2.0)


def test_two_cells_are_hemispheres():
    part = eq_partition(2, 2)
    assert len(part) == 2
    np.testing.assert_allclose(part.areas(), [0.5, 0.5], atol=1e-15)
    assert part.cells[0].hi == pytest.approx(math.pi / 2)
    np.testing.assert_allclose(part.diameters(), [2.0, 2.0], atol=1e-12)


@pytest.mark.parametrize("d,N", [(2, 3), (2, 100), (2, 1000), (3, 100), (3, 777), (4, 250), (5, 64)])
def test_areas_exact(d, N):
    part = eq_partition(d, N)
    areas = part.areas()
    assert len(areas) == N
    assert abs(math.fsum(areas) - 1.0) < 1e-9
    np.testing.assert_allclose(areas * N, 1.0, rtol=0, atol=1e-9)


def test_areas_d2_n100_tight():
    np.testing.assert_allclose(eq_partition(2, 100).areas(), 0.01, rtol=0, atol=1e-11)


def test_bad_arguments():
    with pytest.raises(ValueError):
        eq_partition(2, 0)
    with pytest.raises(ValueError):
        eq_partition(0, 5)
    with pytest.raises(ValueError):
        Cell(2, 1.0, 1.0)


@pytest.mark.parametrize("d", [2, 3])
def test_membership_of_samples(d):
    rng = np.random.default_rng(11)
    part = eq_partition(d, 300)
    for k in rng.choice(part.N, size=20, replace=False):
        cell = part.cells[k]
        x = cell_sample(cell, d, rng, size=10_000)
        np.testing.assert_allclose(np.linalg.norm(x, axis=1), 1.0, atol=1e-14)
        assert cell_contains(cell, x, tol=1e-12).all()


def test_single_sample_shape():
    cell = eq_partition(2, 10).cells[3]
    x = cell_sample(cell, 2, np.random.default_rng(0))
    assert x.shape == (3,)
    assert cell_contains(cell, x).all()


def test_cell_sample_rejects_wrong_dimension():
    with pytest.raises(ValueError):
        cell_sample(eq_partition(2, 10).cells[0], 3, 0)


def _quarters(cell, x):
    """Split a collar cell at its equal-area colatitude and mid longitude."""
    th_mid = cap_radius(2, 0.5 * (cap_area(2, cell.lo) + cap_area(2, cell.hi)))
    ph_mid = 0.5 * (cell.base.lo + cell.base.hi)
    th = np.arccos(np.clip(x[:, 2], -1, 1))
    ph = np.mod(np.arctan2(x[:, 1], x[:, 0]), 2 * math.pi)
    return 2 * (th > th_mid) + (ph > ph_mid)


def test_uniform_within_cell_chi_square():
    part = eq_partition(2, 50)
    cell = next(c for c in part.cells if c.base is not None)
    # reference distribution by rejection from the uniform sphere
    ref = uniform_sphere(2, 2_000_000, seed=5).points
    ref = ref[cell_contains(cell, ref)]
    ref_counts = np.bincount(_quarters(cell, ref), minlength=4)
    ref_p = ref_counts / ref_counts.sum()
    assert np.all(np.abs(ref_p - 0.25) < 5 * math.sqrt(0.25 * 0.75 / ref_counts.sum()))

    x = cell_sample(cell, 2, np.random.default_rng(17), size=10_000)
    counts = np.bincount(_quarters(cell, x), minlength=4)
    p = stats.chisquare(counts, f_exp=np.full(4, 2500.0)).pvalue
    assert p > 1e-3


def test_whole_sphere_cell_moments():
    cell = eq_partition(3, 1).cells[0]
    n = 100_000
    x = cell_sample(cell, 3, np.random.default_rng(3), size=n)
    y = uniform_sphere(3, n, seed=4).points
    se = 5 / math.sqrt(n)
    # first moments vanish; second moments are I/(d+1)
    assert np.abs(x.mean(axis=0)).max() < se
    np.testing.assert_allclose(x.T @ x / n, np.eye(4) / 4, atol=se)
    np.testing.assert_allclose(x.T @ x / n, y.T @ y / n, atol=2 * se)


def test_hemisphere_diameter():
    cell = eq_partition(2, 2).cells[0]
    assert cell_diameter(cell) == pytest.approx(2.0, abs=1e-12)


@pytest.mark.parametrize("d,N", [(2, 40), (3, 60)])
def test_diameter_never_underestimates(d, N):
    part = eq_partition(d, N)
    rng = np.random.default_rng(1)
    for cell in part.cells:
        bounds = cell.intervals()
        pts = cell_sample(cell, d, rng, size=400)
        # add corner points, where the maximum usually sits
        corners = np.array(np.meshgrid(*[b for b in bounds], indexing="ij")).reshape(d, -1).T
        pts = np.vstack([pts, _angles_to_cartesian(corners)])
        brute = pdist(pts).max()
        assert brute <= cell_diameter(cell) + 1e-9


def test_diameter_sweep_ratio():
    N = 10_000
    scaled = eq_partition(2, N).diameters() * math.sqrt(N)
    assert scaled.max() / scaled.min() < 10


@pytest.mark.parametrize("d", [2, 3])
def test_diameter_bounded_over_n(d):
    top = [eq_partition(d, N).diameters().max() * N ** (1 / d) for N in (100, 1000, 10_000)]
    assert max(top) < 8
    assert max(top) / min(top) < 1.5


def test_diameter_example_n400():
    assert eq_partition(2, 400).diameters().max() * 20 <= 7


def test_inner_cap_hemisphere():
    ic = inner_cap(eq_partition(2, 2).cells[0], 2, 2)
    assert ic.cap.angular_radius == pytest.approx(math.pi / 2)
    np.testing.assert_allclose(ic.cap.center, [0, 0, 1])


@pytest.mark.parametrize("d,N", [(2, 1000), (2, 100), (3, 100), (3, 1000)])
def test_inner_cap_radius_bounded_below(d, N):
    caps = eq_partition(d, N).inner_caps()
    assert min(c.scaled_radius for c in caps) > 0.1


def _sample_cap(cap, n, rng):
    """Uniform points of a cap on S^2 by inverse CDF in the colatitude."""
    u = rng.random(n)
    th = np.arccos(1 - u * (1 - math.cos(cap.angular_radius)))
    ph = 2 * math.pi * rng.random(n)
    local = np.column_stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])
    c = cap.center
    # rotation taking the north pole to c
    a = np.array([0.0, 0.0, 1.0])
    v = np.cross(a, c)
    s, co = np.linalg.norm(v), float(a @ c)
    if s < 1e-15:
        R = np.eye(3) if co > 0 else np.diag([1.0, -1.0, -1.0])
    else:
        vx = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
        R = np.eye(3) + vx + vx @ vx * ((1 - co) / s**2)
    return local @ R.T


def test_inner_cap_contained_in_cell():
    part = eq_partition(2, 200)
    rng = np.random.default_rng(8)
    for cell in part.cells:
        ic = inner_cap(cell, 2, part.N)
        x = _sample_cap(ic.cap, 1000, rng)
        assert ic.cap.contains(x, tol=1e-9).all()
        assert cell_contains(cell, x, tol=1e-9).all()


def test_inner_cap_without_n_has_nan_scale():
    ic = inner_cap(eq_partition(2, 10).cells[4])
    assert math.isnan(ic.scaled_radius)
    assert ic.cap.angular_radius > 0


def test_sampling_deterministic_from_seed():
    part = eq_partition(3, 500)
    a = part.sample(np.random.default_rng(42))
    b = part.sample(np.random.default_rng(42))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, part.sample(np.random.default_rng(43)))


def test_one_sample_per_cell_in_order():
    part = eq_partition(2, 257)
    x = part.sample(np.random.default_rng(0))
    np.testing.assert_array_equal(part.locate(x), np.arange(part.N))
    assert part.sample_pointset(0).N == 257


def test_cells_disjoint_by_location():
    part = eq_partition(3, 123)
    x = uniform_sphere(3, 20_000, seed=2).points
    loc = part.locate(x)
    assert (loc >= 0).all()
    # empirical mass per cell is consistent with 1/N
    counts = np.bincount(loc, minlength=part.N)
    assert stats.chisquare(counts).pvalue > 1e-4
    # no point sits in two cells away from boundaries
    hits = sum(cell_contains(c, x, tol=-1e-9).astype(int) for c in part.cells)
    assert hits.max() <= 1


def test_dump_load_round_trip():
    part = eq_partition(3, 40)
    text = dump_partition(part)
    assert text.startswith("# eq_partition d=3 N=40")
    back = load_partition(text)
    assert back.N == 40 and back.d == 3
    np.testing.assert_array_equal(back.bounds, part.bounds)
    assert [c.index_path() for c in back.cells] == [c.index_path() for c in part.cells]
    assert dump_partition(back) == text

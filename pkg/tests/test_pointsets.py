import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.distance import pdist

from spherical_energy.energy import riesz_energy
from spherical_energy.geometry import PointSet, random_rotation, uniform_sphere
from spherical_energy.pointsets import (
    PointFileError,
    cross_polytope,
    fibonacci_sphere,
    fixture,
    load_points,
    riesz_minimize,
    save_points,
    separation,
    simplex,
)

PHI = (1 + math.sqrt(5)) / 2


def test_octahedron_file(tmp_path):
    path = tmp_path / "octa.txt"
    path.write_text("# octahedron\n1 0 0\n-1 0 0\n0 1 0\n0 -1 0\n0 0 1\n0 0 -1\n")
    ps = load_points(path, d=2)
    assert ps.N == 6 and ps.d == 2
    assert ps.label == "octa.txt"


def test_round_trip(tmp_path):
    ps = uniform_sphere(3, 50, seed=1)
    path = tmp_path / "pts.txt"
    save_points(path, ps, header="seed=1")
    back = load_points(path, d=3)
    assert np.array_equal(back.points, ps.points)
    assert "seed=1" in path.read_text()


def test_renormalises_small_deviation(tmp_path):
    path = tmp_path / "p.txt"
    path.write_text("1.0000004 0 0\n0 0.9999996 0\n")
    ps = load_points(path)
    np.testing.assert_allclose(np.linalg.norm(ps.points, axis=1), 1.0, atol=1e-15)


@pytest.mark.parametrize(
    "text,d",
    [
        ("0.9 0 0\n", 2),
        ("1 0 0\n0 1\n", 2),
        ("1 0 0 0\n", 2),
        ("1 0 x\n", 2),
        ("", 2),
        ("nan 0 0\n", 2),
    ],
)
def test_bad_files(tmp_path, text, d):
    path = tmp_path / "bad.txt"
    path.write_text(text)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(PointFileError):
            load_points(path, d=d)


def test_missing_file(tmp_path):
    with pytest.raises(OSError):
        load_points(tmp_path / "nope.txt")


def test_octahedron_distances():
    D = np.sort(pdist(fixture("octahedron").points))
    assert len(D) == 15
    np.testing.assert_allclose(D[:12], math.sqrt(2), atol=1e-15)
    np.testing.assert_allclose(D[12:], 2.0, atol=1e-15)


def test_cube_distances():
    D = pdist(fixture("cube").points)
    expected = 2 / math.sqrt(3) * np.sqrt([1, 2, 3])
    assert all(np.isclose(D, e).sum() == n for e, n in zip(expected, (12, 12, 4)))


def test_icosahedron_separation():
    ps = fixture("icosahedron")
    assert ps.N == 12
    D = np.sort(pdist(ps.points))
    edge = 2 / math.sqrt(PHI * math.sqrt(5))
    np.testing.assert_allclose(D[:30], edge, atol=1e-14)
    assert D[30] > edge + 0.1
    assert separation(ps).min_distance == pytest.approx(edge, abs=1e-14)


def test_cross_polytope_and_simplex():
    cp = fixture("cross_polytope", d=3)
    assert cp.N == 8 and cp.d == 3
    sx = simplex(4)
    assert sx.N == 6 and sx.d == 4
    G = sx.points @ sx.points.T
    off = G[~np.eye(6, dtype=bool)]
    np.testing.assert_allclose(off, -1 / 5, atol=1e-14)
    np.testing.assert_allclose(sx.points.sum(axis=0), 0, atol=1e-14)
    with pytest.raises(ValueError):
        fixture("simplex")
    with pytest.raises(ValueError):
        fixture("dodecahedron")


@pytest.mark.parametrize("name", ["octahedron", "cube", "icosahedron"])
def test_fixtures_unit_norm(name):
    np.testing.assert_allclose(np.linalg.norm(fixture(name).points, axis=1), 1.0, atol=1e-15)


def test_fibonacci():
    one = fibonacci_sphere(1)
    assert one.N == 1
    ps = fibonacci_sphere(1000)
    assert np.array_equal(ps.points, fibonacci_sphere(1000).points)
    rep = separation(ps)
    brute = pdist(ps.points).min()
    assert rep.min_distance == pytest.approx(brute, rel=1e-14)
    assert 2 <= rep.c1_hat <= 4
    with pytest.raises(ValueError):
        fibonacci_sphere(0)


def test_separation_examples():
    anti = PointSet(2, np.array([[0, 0, 1.0], [0, 0, -1.0]]))
    assert separation(anti).min_distance == 2.0
    assert separation(cross_polytope(2)).min_distance == pytest.approx(math.sqrt(2))
    rep = separation(cross_polytope(2))
    assert rep.c1_hat == pytest.approx(math.sqrt(2) * math.sqrt(6))
    i, j = rep.argmin_pair
    assert i < j
    assert np.linalg.norm(anti.points[0] - anti.points[1]) == 2.0


def test_separation_duplicate_warns():
    pts = np.array([[1.0, 0, 0], [0, 1.0, 0], [1.0, 0, 0]])
    with pytest.warns(RuntimeWarning):
        rep = separation(PointSet(2, pts))
    assert rep.min_distance == 0.0
    assert set(rep.argmin_pair) == {0, 2}


def test_separation_needs_two_points():
    with pytest.raises(ValueError):
        separation(PointSet(2, np.array([[1.0, 0, 0]])))


@settings(max_examples=25)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 60), d=st.integers(2, 4))
def test_separation_rotation_permutation_invariant(seed, n, d):
    ps = uniform_sphere(d, n, seed=seed)
    rng = np.random.default_rng(seed)
    Q = random_rotation(d + 1, seed=rng)
    base = separation(ps)
    other = separation(PointSet(d, (ps.points @ Q.T)[rng.permutation(n)]))
    assert abs(base.min_distance - other.min_distance) < 1e-12
    assert base.min_distance == pytest.approx(pdist(ps.points).min(), abs=1e-15)


def test_minimizer_octahedron_is_critical():
    start = fixture("octahedron")
    res = riesz_minimize(start, 1.0, steps=50)
    e0 = riesz_energy(start, 1.0).value
    e1 = riesz_energy(res.points, 1.0).value
    assert abs(e1 - e0) < 1e-10
    np.testing.assert_allclose(res.points.points, start.points, atol=1e-10)


def test_minimizer_monotone():
    start = uniform_sphere(2, 20, seed=3)
    res = riesz_minimize(start, 1.0, steps=500)
    E = np.array(res.energies)
    assert len(E) == res.steps + 1
    assert np.all(np.diff(E) <= 0)
    assert E[-1] < E[0]
    assert riesz_energy(res.points, 1.0).value == pytest.approx(E[-1], rel=1e-12)
    np.testing.assert_allclose(np.linalg.norm(res.points.points, axis=1), 1.0, atol=1e-14)


def test_minimizer_finds_tetrahedron():
    res = riesz_minimize(uniform_sphere(2, 4, seed=7), 1.0, steps=500)
    D = pdist(res.points.points)
    np.testing.assert_allclose(D, math.sqrt(8 / 3), atol=1e-6)
    # perturbing the tetrahedron never lowers the energy
    rng = np.random.default_rng(0)
    best = riesz_energy(res.points, 1.0).value
    for _ in range(200):
        Y = res.points.points + 1e-3 * rng.standard_normal((4, 3))
        assert riesz_energy(PointSet.from_array(Y), 1.0).value >= best - 1e-12


def test_minimizer_rejects_bad_input():
    with pytest.raises(ValueError):
        riesz_minimize(fixture("octahedron"), 0.0)
    dup = PointSet(2, np.array([[1.0, 0, 0], [1.0, 0, 0], [0, 1.0, 0]]))
    with pytest.raises(ValueError), warnings.catch_warnings():
        warnings.simplefilter("ignore")
        riesz_minimize(dup, 1.0)

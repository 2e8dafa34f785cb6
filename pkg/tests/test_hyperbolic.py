import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from hypermin.exceptions import DomainError
from hypermin.hyperbolic import (
    AmbientKind, CuspModel, GeodesicReflection, HalfTurn, HyperbolicTranslate, Isometry,
    MobiusMap, Parabolic, Point3, Semicircle, VerticalLine, VerticalTranslate, apply,
    dist_h2, dist_product, disk_to_halfplane, geodesic_through, halfplane_to_disk,
    horocycle_length, level_set_mean_curvature, level_torus_mean_curvature,
    reflection_at_height,
)

coord = st.floats(-5, 5, allow_nan=False)
height = st.floats(0.05, 20, allow_nan=False)
points = st.tuples(coord, height, coord)


def test_dist_vertical_arc():
    assert dist_h2((0, 1), (0, math.e)) == pytest.approx(1.0, abs=1e-14)
    assert dist_h2((0, 1), (0, 1)) == 0.0


def test_dist_matches_quadrature_along_semicircle():
    # geodesic through (0,1) and (3,1): center 1.5, radius sqrt(1.5^2 + 1)
    g = geodesic_through((0, 1), (3, 1))
    m, r = g.center, g.radius
    th0 = math.atan2(1, 0 - m)
    th1 = math.atan2(1, 3 - m)
    # ds = r dtheta / (r sin theta)
    length, _ = integrate.quad(lambda th: 1.0 / math.sin(th), th1, th0, epsabs=1e-14)
    assert dist_h2((0, 1), (3, 1)) == pytest.approx(length, abs=1e-10)


def test_nonpositive_height_rejected():
    with pytest.raises(DomainError):
        dist_h2((0, 0), (0, 1))
    with pytest.raises(DomainError):
        Point3(0.0, -1.0)


def test_deck_map_closed_form():
    model = CuspModel(tau=3.0, h=2.0)
    assert apply(model.deck(1, 0), Point3(0, 2, 5)) == Point3(3, 2, 5)
    assert apply(model.deck(-2, 3), Point3(1, 2, 5)) == Point3(-5, 2, 11)
    assert apply(Isometry.identity(), Point3(1, 2, 3)) == Point3(1, 2, 3)


def test_parabolic_and_vertical_commute():
    p = np.array([[0.3, 1.7, -2.0], [4.0, 0.2, 9.0]])
    a = Isometry((Parabolic(1.25),)) @ Isometry((VerticalTranslate(0.5),))
    b = Isometry((VerticalTranslate(0.5),)) @ Isometry((Parabolic(1.25),))
    assert np.array_equal(a(p), b(p))


def _random_isometry(rng):
    gens = []
    for _ in range(4):
        k = rng.integers(5)
        if k == 0:
            gens.append(Parabolic(rng.normal()))
        elif k == 1:
            a = rng.normal()
            gens.append(GeodesicReflection(Semicircle(a, a + rng.uniform(0.5, 3))))
        elif k == 2:
            gens.append(GeodesicReflection(VerticalLine(rng.normal())))
        elif k == 3:
            a = rng.normal()
            gens.append(HyperbolicTranslate(Semicircle(a, a + 1.0), rng.normal()))
        else:
            gens.append(HalfTurn((rng.normal(), rng.uniform(0.5, 2))))
    return Isometry(tuple(gens))


@settings(max_examples=60, deadline=None)
@given(points, points, st.integers(0, 10_000))
def test_isometries_preserve_distance(p, q, seed):
    iso = _random_isometry(np.random.default_rng(seed))
    p, q = np.array(p), np.array(q)
    d = dist_h2(p, q)
    d2 = dist_h2(iso(p), iso(q))
    assert abs(d - d2) <= 1e-10 * max(1.0, d)


@settings(max_examples=60, deadline=None)
@given(points, st.integers(0, 10_000))
def test_inverse_undoes(p, seed):
    iso = _random_isometry(np.random.default_rng(seed))
    p = np.array(p)
    back = iso.inverse()(iso(p))
    assert np.allclose(back, p, rtol=1e-9, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(points, st.floats(-3, 3), st.floats(0.1, 4))
def test_reflection_involution_and_fixed_set(p, a, w):
    g = Semicircle(a, a + w)
    R = reflection_at_height(g, 0.7)
    p = np.array(p)
    assert np.allclose(R(R(p)), p, atol=1e-12 * max(1.0, np.abs(p).max()) * 10)
    s = np.linspace(-3, 3, 7)
    on = np.concatenate([g.point_at(s), np.full((7, 1), 0.7)], axis=1)
    assert np.allclose(R(on), on, atol=1e-12)


def test_composition_associative():
    rng = np.random.default_rng(1)
    f, g, h = (_random_isometry(rng) for _ in range(3))
    p = np.array([0.2, 1.3, 0.0])
    assert np.allclose(((f @ g) @ h)(p), (f @ (g @ h))(p), atol=1e-12)


def test_mobius_inverse():
    m = MobiusMap(((2.0, 1.0), (1.0, 1.0)))
    p = np.array([0.5, 0.5])
    assert np.allclose(m.inverse().apply(m.apply(p)), p)


def test_level_torus_constants():
    assert level_torus_mean_curvature(CuspModel(1, 1)) == 0.5
    assert level_torus_mean_curvature(CuspModel(1, 1, ambient="hyperbolic")) == 1.0
    for y in (1.0, 2.5, 40.0):
        assert level_set_mean_curvature(AmbientKind.PRODUCT, y) == pytest.approx(0.5, abs=1e-8)
        assert level_set_mean_curvature(AmbientKind.HYPERBOLIC, y) == pytest.approx(1.0, abs=1e-8)


def test_horocycle_length():
    m = CuspModel(tau=3.0, h=1.0)
    assert horocycle_length(m, 3.0) == 1.0
    assert horocycle_length(m, 1.0) == 3.0
    ys = np.geomspace(1, 1e6, 30)
    vals = [horocycle_length(m, y) for y in ys]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert all(v * y == pytest.approx(3.0, rel=1e-15) for v, y in zip(vals, ys))
    with pytest.raises(DomainError):
        horocycle_length(m, 0.5)


def test_horocycle_length_by_quadrature():
    m = CuspModel(tau=2.0, h=1.0)
    y = 5.0
    quad, _ = integrate.quad(lambda x: 1.0 / y, 0.0, m.tau)
    assert horocycle_length(m, y) == pytest.approx(quad, rel=1e-14)


def test_disk_map_normalization_and_roundtrip():
    assert np.allclose(disk_to_halfplane([0.0, 0.0]), [0.0, 1.0])
    rng = np.random.default_rng(0)
    r = np.sqrt(rng.uniform(0, 0.98, 100))
    th = rng.uniform(0, 2 * np.pi, 100)
    z = np.stack([r * np.cos(th), r * np.sin(th)], 1)
    assert np.abs(halfplane_to_disk(disk_to_halfplane(z)) - z).max() < 1e-12
    with pytest.raises(DomainError):
        disk_to_halfplane([1.0, 0.0])


def test_disk_diameter_maps_to_geodesic():
    s = np.linspace(-0.95, 0.95, 21)
    pts = disk_to_halfplane(np.stack([np.zeros_like(s), s], 1))
    g = geodesic_through(pts[0], pts[-1])
    assert g.residual(pts).max() < 1e-12
    pts = disk_to_halfplane(np.stack([s, np.zeros_like(s)], 1))
    g = geodesic_through(pts[0], pts[-1])
    assert g.residual(pts).max() < 1e-12


def test_disk_map_is_isometric():
    rng = np.random.default_rng(3)
    for _ in range(20):
        a, b = rng.uniform(-0.6, 0.6, (2, 2))
        # disk distance 2 artanh |(a - b) / (1 - conj(a) b)|
        za, zb = complex(*a), complex(*b)
        dd = 2 * math.atanh(abs((za - zb) / (1 - za.conjugate() * zb)))
        assert dist_h2(disk_to_halfplane(a), disk_to_halfplane(b)) == pytest.approx(dd, abs=1e-11)


def test_product_distance_pythagorean():
    assert dist_product((0, 1, 0), (0, math.e, 1)) == pytest.approx(math.sqrt(2))


def test_serialization_roundtrip():
    m = CuspModel(2.0, 3.0, 1.5, "hyperbolic")
    assert CuspModel.from_dict(m.to_dict()) == m
    p = Point3(1.0, 2.0, -3.0)
    assert Point3.from_dict(p.to_dict()) == p
    assert set(m.to_dict()) == {"tau", "h", "y0", "ambient"}

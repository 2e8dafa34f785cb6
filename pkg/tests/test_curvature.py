import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from hypermin.curvature import (
    TruncationSeries, angle_defects, area_bound, area_bound_check, curvature_report,
    gauss_bonnet_check, gaussian_total, geodesic_curvature_loop, graph_curvature,
    graph_curvature_formula, obstruction_check, richardson, smooth_total_curvature,
)
from hypermin.exceptions import DomainError
from hypermin.graph_solver import quadrilateral
from hypermin.hyperbolic import AmbientKind
from hypermin.mesh import TriMesh, grid_faces


def vertical_sheet(nt=12, ny=10, y=(1.0, 4.0), period=None):
    """Grid in the totally geodesic plane x = 0; closed in t when ``period`` is set."""
    ys = np.geomspace(*y, ny)
    if period is None:
        ts = np.linspace(0.0, 1.0, nt)
        Y, T = np.meshgrid(ys, ts, indexing="ij")
        V = np.column_stack([np.zeros(Y.size), Y.ravel(), T.ravel()])
        return TriMesh(V, grid_faces(ny, nt))
    ts = np.arange(nt) * period / nt
    Y, T = np.meshgrid(ys, ts, indexing="ij")
    V = np.column_stack([np.zeros(Y.size), Y.ravel(), T.ravel()])
    F = []
    for j in range(ny - 1):
        for k in range(nt):
            a, b = j * nt + k, j * nt + (k + 1) % nt
            c, d = a + nt, b + nt
            F += [[a, c, d], [a, d, b]]
    return TriMesh(V, np.array(F))


def icosphere(center=(0.0, 2.0, 0.0), r=0.3):
    p = (1 + 5**0.5) / 2
    V = np.array([[-1, p, 0], [1, p, 0], [-1, -p, 0], [1, -p, 0], [0, -1, p], [0, 1, p], [0, -1, -p],
                  [0, 1, -p], [p, 0, -1], [p, 0, 1], [-p, 0, -1], [-p, 0, 1]], float)
    F = np.array([[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11], [1, 5, 9], [5, 11, 4],
                  [11, 10, 2], [10, 7, 6], [7, 1, 8], [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8],
                  [3, 8, 9], [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]])
    V = r * V / np.linalg.norm(V, axis=1)[:, None] + np.asarray(center)
    return TriMesh(V, F)


# -- polyhedral -------------------------------------------------------------


def test_vertical_annulus_is_flat():
    m = vertical_sheet(period=2.0)
    assert m.euler_characteristic() == 0
    assert abs(gaussian_total(m)) <= 1e-8
    assert gauss_bonnet_check(m) == pytest.approx(0.0, abs=1e-10)


def test_flat_disk_turns_once():
    m = vertical_sheet()
    assert abs(gaussian_total(m)) <= 1e-10
    (loop,) = m.boundary_loops()
    kg, length = geodesic_curvature_loop(m, loop)
    assert kg == pytest.approx(2 * math.pi, abs=1e-10)
    assert length == pytest.approx(2.0 + 36 * math.tanh(math.log(4.0) / 18), rel=1e-12)


def test_straight_boundary_does_not_turn():
    from hypermin.curvature import angle_sums

    m = vertical_sheet()
    s = angle_sums(m)
    side = np.arange(1, 9) * 12  # t = 0 column, corners excluded
    assert np.max(np.abs(math.pi - s[side])) <= 1e-8


@pytest.mark.parametrize("ambient", ["product", "hyperbolic"])
def test_closed_sphere_total_is_4pi(ambient):
    m = icosphere()
    assert gaussian_total(m, ambient) == pytest.approx(4 * math.pi, abs=1e-10)
    assert gauss_bonnet_check(m, 2, ambient) == pytest.approx(0.0, abs=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_gauss_bonnet_identity_on_random_meshes(seed):
    rng = np.random.default_rng(seed)
    prob = quadrilateral((-1, 1), (1, 3), n=(5, 5))
    u = rng.normal(0, 0.5, len(prob.points))
    m = TriMesh(np.column_stack([prob.points, u]), prob.faces)
    assert abs(gauss_bonnet_check(m)) <= 1e-10
    rep = curvature_report(m)
    assert rep.chi_truncated == 1
    assert abs(rep.gb_defect) <= 1e-10


def test_open_polyline_is_rejected():
    m = vertical_sheet()
    with pytest.raises(DomainError, match="closed boundary"):
        geodesic_curvature_loop(m, [0, 1, 2, 14])


def test_degenerate_triangle_is_rejected():
    V = np.array([[0, 1, 0], [1, 1, 0], [2, 1, 0.0]])
    with pytest.raises(DomainError, match="degenerate"):
        gaussian_total(TriMesh(V, np.array([[0, 1, 2]])))


def test_angle_defects_vanish_on_boundary():
    m = vertical_sheet()
    d = angle_defects(m)
    assert np.all(d[m.boundary_vertices()] == 0)


# -- smooth estimate --------------------------------------------------------


def _brioschi_oracle():
    x, y = sp.symbols("x y", positive=True)
    a = sp.symbols("a0:6")
    u = a[0] * x + a[1] * y + a[2] * x**2 + a[3] * x * y + a[4] * y**2 + a[5] * x**3
    ux, uy = sp.diff(u, x), sp.diff(u, y)
    E, F, G = 1 / y**2 + ux**2, ux * uy, 1 / y**2 + uy**2
    Ev, Eu = sp.diff(E, y), sp.diff(E, x)
    Gu, Gv = sp.diff(G, x), sp.diff(G, y)
    Fu, Fv = sp.diff(F, x), sp.diff(F, y)
    M1 = sp.Matrix([[-sp.diff(E, y, 2) / 2 + sp.diff(F, x, y) - sp.diff(G, x, 2) / 2, Eu / 2, Fu - Ev / 2],
                    [Fv - Gu / 2, E, F],
                    [Gv / 2, F, G]])
    M2 = sp.Matrix([[0, Ev / 2, Gu / 2], [Ev / 2, E, F], [Gu / 2, F, G]])
    K = (M1.det() - M2.det()) / (E * G - F**2) ** 2
    derivs = (ux, uy, sp.diff(u, x, 2), sp.diff(u, x, y), sp.diff(u, y, 2))
    return sp.lambdify((x, y, a), K), sp.lambdify((x, y, a), derivs)


K_EXACT, DERIVS = _brioschi_oracle()


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1.5, 1.5), min_size=6, max_size=6),
       st.floats(-2.0, 2.0), st.floats(0.3, 5.0))
def test_curvature_formula_matches_brioschi(coeffs, x0, y0):
    exact = K_EXACT(x0, y0, coeffs)
    got = graph_curvature_formula(y0, *DERIVS(x0, y0, coeffs))
    assert got == pytest.approx(exact, rel=1e-9, abs=1e-9)


def test_horizontal_slice_has_curvature_minus_one():
    prob = quadrilateral((-1, 1), (1, 2), n=(8, 8))
    K = graph_curvature(prob.points, np.full(len(prob.points), 0.3), prob.faces)
    assert np.allclose(K, -1.0, atol=1e-12)


def test_smooth_estimate_converges_on_quadratic_graph():
    coeffs = [0.2, -0.1, 0.3, 0.1, -0.2, 0.05]

    def err(n):
        prob = quadrilateral((-0.5, 0.5), (1.0, 2.0), n=(n, n))
        x, y = prob.points.T
        u = np.array([coeffs[0] * a + coeffs[1] * b + coeffs[2] * a * a + coeffs[3] * a * b
                      + coeffs[4] * b * b + coeffs[5] * a**3 for a, b in zip(x, y)])
        K = graph_curvature(prob.points, u, prob.faces)
        inner = np.setdiff1d(np.arange(len(x)), np.concatenate(list(prob.arcs.values())))
        return np.max(np.abs(K[inner] - K_EXACT(x[inner], y[inner], coeffs)))

    assert err(16) < 1e-2
    assert err(32) < 0.6 * err(16)  # first order near the boundary


def test_smooth_estimate_on_barrier_branch():
    # rising branch of S^0_T as the graph t = asin(y / T); K depends on y only
    from scipy import integrate

    T = 3.0

    def dK(y):
        uy, uyy = 1 / np.sqrt(T * T - y * y), y / (T * T - y * y) ** 1.5
        return graph_curvature_formula(y, 0, uy, 0, 0, uyy) * np.sqrt(1 + (y * uy) ** 2) / y**2

    exact, _ = integrate.quad(dK, 0.5, 2.0, epsabs=1e-13)
    smooth_err, gap = [], []
    for n in (16, 32):
        prob = quadrilateral((0.0, 1.0), (0.5, 2.0), n=(n, n))
        x, y = prob.points.T
        u = np.arcsin(y / T)
        sm, _ = smooth_total_curvature(prob.points, u, prob.faces)
        poly = gaussian_total(TriMesh(np.column_stack([x, y, u]), prob.faces))
        smooth_err.append(abs(sm - exact))
        gap.append(abs(poly - sm))
    assert smooth_err[1] < 1e-3 and smooth_err[1] < 0.5 * smooth_err[0]
    # defects miss the boundary band, whose area is O(mesh size)
    assert gap[1] < 0.6 * gap[0]


def test_smooth_total_of_a_plane_is_minus_area():
    prob = quadrilateral((0.0, 1.0), (1.0, 2.0), n=(10, 10))
    total, K = smooth_total_curvature(prob.points, np.zeros(len(prob.points)), prob.faces)
    assert total == pytest.approx(-0.5, rel=1e-8)


# -- ladders and corollaries ------------------------------------------------


def test_richardson_recovers_first_order_tail():
    cuts = [4.0, 8.0, 16.0]
    totals = [-2 * math.pi + 3.0 / c for c in cuts]
    assert richardson(cuts, totals, 1.0) == pytest.approx(-2 * math.pi, abs=1e-12)
    s = TruncationSeries(cuts, totals, 1.0)
    assert s.monotone() and s.gaps() == sorted(s.gaps(), reverse=True)
    with pytest.raises(DomainError, match="increasing"):
        TruncationSeries([4.0, 4.0], [1.0, 2.0])


def test_obstruction_table():
    product, cusp = AmbientKind.PRODUCT, AmbientKind.HYPERBOLIC
    assert obstruction_check(0, 1, product).status == "forbidden"  # plane
    assert obstruction_check(0, 0, product).status == "forbidden"
    assert obstruction_check(0, 2, product).status == "vertical_only"  # annulus
    assert obstruction_check(1, 0, product).status == "vertical_only"
    for n in range(3):
        assert obstruction_check(0, n, cusp).status == "forbidden"
    assert obstruction_check(1, 1, product).allowed
    assert obstruction_check(0, 3, cusp).allowed
    with pytest.raises(DomainError):
        obstruction_check(-1, 2)


@given(st.integers(0, 3), st.integers(0, 5))
def test_obstruction_matches_euler_characteristic(g, n):
    v = obstruction_check(g, n, AmbientKind.PRODUCT)
    assert (v.status == "forbidden") == (2 - 2 * g - n > 0)
    w = obstruction_check(g, n, AmbientKind.HYPERBOLIC)
    assert (w.status == "forbidden") == (2 * g + n - 2 <= 0)


def test_area_bound():
    assert area_bound(1, 1) == pytest.approx(2 * math.pi)
    ok = area_bound_check([5.9, 6.1, 6.2], 1, 1, cuts=[4, 8, 16])
    assert not ok.violation
    bad = area_bound_check(1.1 * 2 * math.pi, 1, 1)
    assert bad.violation

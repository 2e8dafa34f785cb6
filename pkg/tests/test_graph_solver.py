import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from hypermin.domains import ideal_triangle
from hypermin.exceptions import DomainError
from hypermin.graph_solver import (
    BoundaryDatum, GraphProblem, MinimalGraphSolver, area, graph_residual, hyperbolic_area,
    lambda_ladder, nested_difference, omega_n, prop61_ladder, quadrilateral, solve,
)

SIDES = ("left", "right", "bottom", "top")


def test_constant_data_gives_constant_graph():
    prob = quadrilateral(n=(8, 8), data=BoundaryDatum.finite(0.7))
    sol = solve(prob)
    assert np.all(sol.u == 0.7)
    assert sol.residual == 0.0
    assert sol.energy == pytest.approx(hyperbolic_area(prob.points, prob.faces), rel=1e-14)


def test_domain_area_matches_closed_form():
    # [x0, x1] x [y0, y1] has hyperbolic area (x1 - x0)(1/y0 - 1/y1)
    prob = quadrilateral((0.0, 1.0), (1.0, 2.0), n=(12, 12))
    assert hyperbolic_area(prob.points, prob.faces) == pytest.approx(0.5, rel=1e-8)


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_area_of_tilted_plane_against_quadrature(lam):
    prob = quadrilateral((0.0, 1.0), (1.0, 2.0), n=(16, 16))
    u = lam * prob.points[:, 0]
    exact, _ = integrate.quad(lambda y: math.sqrt(1 + (y * lam) ** 2) / y**2, 1.0, 2.0, epsabs=1e-14)
    assert area(prob.points, prob.faces, u) == pytest.approx(exact, abs=1e-8)


def test_area_refinement_is_second_order_or_better():
    def A(n):
        prob = quadrilateral((0.0, 1.0), (1.0, 2.0), n=(n, n))
        x, y = prob.points.T
        return area(prob.points, prob.faces, np.sin(x) * y)

    a4, a8, a16 = A(4), A(8), A(16)
    assert abs(a16 - a8) <= 0.3 * abs(a8 - a4)


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_tilted_plane_is_reproduced(lam):
    prob = quadrilateral(n=(12, 12), data=BoundaryDatum.affine(0.0, lam))
    sol = solve(prob)
    assert np.max(np.abs(sol.u - lam * prob.points[:, 0])) <= 1e-6
    assert sol.residual <= 1e-8


def test_example1_triangle_stays_between_its_data():
    D = ideal_triangle(h=1.0, y_cut=8.0, n_cols=8)
    sol = solve(D.problem)
    assert sol.residual <= 1e-8
    assert sol.u.min() >= 0.0 and sol.u.max() <= 1.0
    assert sol.report()["y_cap"] == 8.0


def test_energy_trace_never_increases():
    prob = quadrilateral(n=(10, 10), data={"left": BoundaryDatum.finite(0), "right": BoundaryDatum.finite(3),
                                          "bottom": BoundaryDatum.finite(0), "top": BoundaryDatum.finite(1)})
    sol = solve(prob)
    assert np.all(np.diff(sol.energy_trace) <= 1e-12 * abs(sol.energy_trace[0]))


values = st.floats(-2.0, 2.0, allow_nan=False)


@settings(max_examples=15, deadline=None)
@given(st.tuples(values, values, values, values))
def test_maximum_principle(vals):
    data = {k: BoundaryDatum.finite(v) for k, v in zip(SIDES, vals)}
    sol = solve(quadrilateral(n=(6, 6), data=data))
    assert min(vals) - 1e-9 <= sol.u.min() and sol.u.max() <= max(vals) + 1e-9


@settings(max_examples=10, deadline=None)
@given(st.tuples(values, values, values, values), st.tuples(*[st.floats(0.0, 1.0)] * 4))
def test_comparison_principle(vals, bumps):
    lo = {k: BoundaryDatum.finite(v) for k, v in zip(SIDES, vals)}
    hi = {k: BoundaryDatum.finite(v + b) for k, v, b in zip(SIDES, vals, bumps)}
    u1 = solve(quadrilateral(n=(6, 6), data=lo)).u
    u2 = solve(quadrilateral(n=(6, 6), data=hi)).u
    assert np.all(u1 <= u2 + 1e-9)


def test_chart_invariance():
    # P1 in two charts differs at O(mesh^2); 160 cells per side brings it under 1e-5
    hp = quadrilateral((-0.5, 0.5), (1.0, 2.0), n=(160, 160), data=BoundaryDatum.affine(0.0, 1.0, 0.5))
    from hypermin.graph_solver import get_chart

    disk_pts = get_chart("disk").from_halfplane(hp.points)
    dp = GraphProblem(disk_pts, hp.faces, hp.arcs, hp.data, "disk")
    u_hp, u_disk = solve(hp).u, solve(dp).u
    assert np.max(np.abs(u_hp - u_disk)) <= 1e-5


def test_residual_of_solution_is_small_and_of_perturbation_is_not():
    prob = quadrilateral(n=(8, 8), data=BoundaryDatum.affine(0.0, 1.0))
    sol = solve(prob)
    assert graph_residual(prob.points, prob.faces, sol.u) <= 1e-8
    bumped = sol.u.copy()
    bumped[40] += 0.1
    assert graph_residual(prob.points, prob.faces, bumped) > 1e-4


def test_predict_interpolates_the_solution():
    prob = quadrilateral(n=(8, 8), data=BoundaryDatum.affine(0.0, 2.0))
    est = MinimalGraphSolver().fit(prob)
    X = np.array([[0.1, 1.3], [-0.45, 1.9], [5.0, 1.5]])
    out = est.predict(X)
    assert out[:2] == pytest.approx(2.0 * X[:2, 0], abs=1e-6)
    assert math.isnan(out[2])
    assert est.predict(prob.points) == pytest.approx(est.u_, abs=1e-12)


def test_infinite_data_needs_lambda():
    prob = quadrilateral(n=(4, 4))
    data = dict(prob.data, left=BoundaryDatum.plus_inf())
    with pytest.raises(DomainError, match="Lambda"):
        GraphProblem(prob.points, prob.faces, prob.arcs, data)
    with pytest.raises(DomainError, match="exceed"):
        GraphProblem(prob.points, prob.faces, prob.arcs, dict(data, right=BoundaryDatum.finite(5)), Lambda=2.0)
    all_inf = {k: BoundaryDatum.plus_inf() for k in prob.arcs}
    with pytest.raises(DomainError, match="finite"):
        GraphProblem(prob.points, prob.faces, prob.arcs, all_inf, Lambda=2.0)


def test_uncovered_boundary_is_rejected():
    prob = quadrilateral(n=(4, 4))
    arcs = {k: v for k, v in prob.arcs.items() if k != "top"}
    data = {k: prob.data[k] for k in arcs}
    with pytest.raises(DomainError, match="carry no data"):
        solve(GraphProblem(prob.points, prob.faces, arcs, data))


def test_degenerate_triangle_is_reported():
    prob = quadrilateral(n=(4, 4))
    pts = prob.points.copy()
    f = prob.faces[3]
    pts[f[1]] = pts[f[0]]
    with pytest.raises(DomainError, match="degenerate triangle"):
        area(pts, prob.faces, np.zeros(len(pts)))


def test_prop61_pointwise_monotone_on_small_ladder():
    rows, sols = prop61_ladder((2, 4), n_theta=24)
    (_, s2), (_, s4) = rows
    assert 0 < s4 < s2
    assert nested_difference(sols[0], sols[1]) <= 1e-6


def test_lambda_ladder_is_monotone_and_cauchy():
    prob = omega_n(2, ds=0.08, n_theta=16)
    rows = lambda_ladder(prob, [2.0, 4.0, 8.0])
    assert [r["max_u"] for r in rows] == sorted(r["max_u"] for r in rows)
    assert rows[0]["cauchy_gap"] is None
    assert all(r["residual"] <= 1e-8 for r in rows)

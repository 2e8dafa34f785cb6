import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypermin.examples import SIDE_A, SIDE_B, build_example, example1
from hypermin.exceptions import DomainError
from hypermin.graph_solver import graph_residual, quadrilateral
from hypermin.hyperbolic import Isometry, Semicircle, VerticalLine
from hypermin.mesh import TriMesh, grid_faces
from hypermin.reflection import (
    Identification, Patch, ReflectionRule, SurfaceComplex, TopologySummary, is_orientable,
    normal_mismatch, reflect,
)


@pytest.fixture(scope="module")
def ex1():
    return example1(h=1.0, y_cut=8.0, n_cols=16)


@pytest.fixture(scope="module")
def built():
    return {i: build_example(i) for i in (2, 3, 4, 5)}


def flat_patch(c=0.5, n=6):
    # u = c over [0, 1] x [1, 2]; the side x = 0 lies on the geodesic x = 0 at height c
    prob = quadrilateral((0.0, 1.0), (1.0, 2.0), n=(n, n))
    V = np.column_stack([prob.points, np.full(len(prob.points), c)])
    return TriMesh(V, prob.faces, {k: v for k, v in prob.arcs.items()})


# -- rules ------------------------------------------------------------------

geodesics = st.one_of(
    st.floats(-3, 3).map(VerticalLine),
    st.tuples(st.floats(-3, 0), st.floats(0.1, 3)).map(lambda ab: Semicircle(ab[0], ab[0] + ab[1])),
)


@settings(max_examples=40, deadline=None)
@given(geodesics, st.floats(-2, 2), st.integers(0, 2**32 - 1))
def test_geodesic_rule_is_an_involution(g, c, seed):
    rule = ReflectionRule.across(g, c)
    rng = np.random.default_rng(seed)
    P = np.column_stack([rng.uniform(-3, 3, 20), rng.uniform(0.2, 4, 20), rng.uniform(-2, 2, 20)])
    back = rule.apply(rule.apply(P))
    assert np.max(np.abs(back - P)) <= 1e-12 * max(1.0, np.abs(P).max()) * 10


@settings(max_examples=30, deadline=None)
@given(st.floats(-2, 2), st.floats(0.3, 3), st.floats(-1, 1), st.floats(0.1, 2))
def test_axis_rule_is_an_involution_fixing_its_axis(cx, cy, lo, span):
    rule = ReflectionRule.about_axis((cx, cy), (lo, lo + span))
    axis = np.column_stack([np.full(5, cx), np.full(5, cy), np.linspace(lo, lo + span, 5)])
    assert np.max(np.abs(rule.apply(axis) - axis)) <= 1e-12 * max(1.0, cy)
    P = np.array([[cx + 0.3, cy * 1.2, 0.1], [cx - 1, cy * 0.5, 2.0]])
    assert np.max(np.abs(rule.apply(rule.apply(P)) - P)) <= 1e-12 * 10


def test_geodesic_rule_fixes_its_line():
    rule = ReflectionRule.across(SIDE_B, 0.4)
    th = np.linspace(0.2, 2.9, 9)
    P = np.column_stack([-0.5 + 0.5 * np.cos(th), 0.5 * np.sin(th), np.full(9, 0.4)])
    assert np.max(np.abs(rule.apply(P) - P)) <= 1e-12
    assert np.max(rule.fixed_residual(P)) <= 1e-12


def test_bad_rules_are_rejected():
    with pytest.raises(DomainError):
        ReflectionRule("geodesic")
    with pytest.raises(DomainError):
        ReflectionRule("mirror", geodesic=SIDE_A)


# -- reflect ----------------------------------------------------------------


def test_double_reflection_is_identity():
    m = flat_patch()
    m.vertices[:, 2] += 0.1 * (m.vertices[:, 0] * (1 - m.vertices[:, 0]))  # keep the side x = 0 fixed
    rule = ReflectionRule.across(SIDE_A, 0.5)
    twice = reflect(reflect(m, rule), rule)
    assert np.max(np.abs(twice.vertices - m.vertices)) <= 1e-12
    assert np.array_equal(twice.faces, m.faces)


def test_constant_graph_reflects_to_itself():
    m = flat_patch(c=0.5)
    img = reflect(m, ReflectionRule.across(SIDE_A, 0.5))
    assert np.all(np.abs(img.vertices[:, 2] - 0.5) <= 1e-15)
    assert np.all(img.vertices[:, 0] <= 1e-15)  # mirrored into x <= 0


def test_fixed_set_off_the_boundary_is_rejected():
    m = flat_patch(c=0.5)
    with pytest.raises(DomainError, match="not on the patch boundary"):
        reflect(m, ReflectionRule.across(VerticalLine(0.5), 0.5))  # cuts through the interior
    with pytest.raises(DomainError, match="not on the patch boundary"):
        reflect(m, ReflectionRule.across(SIDE_A, 0.7))  # right line, wrong height
    with pytest.raises(DomainError, match="not fixed"):
        reflect(m, ReflectionRule.across(SIDE_A, 0.5), fixed_tag="right")


def test_example1_reflection_heights(ex1):
    # graph values 0, 0, h on b, c, a; the image across a at height h carries 2h on b and c
    D = ex1.complex.patch("D").mesh
    R = ex1.complex.patch("RaD").mesh
    for m, expect in ((D, {"a": 1.0, "b": 0.0, "c": 0.0}), (R, {"a": 1.0, "b": 2.0, "c": 2.0})):
        for arc, v in expect.items():
            assert np.max(np.abs(m.vertices[m.tags[arc], 2] - v)) <= 1e-12


def test_reflected_union_is_c1_and_still_minimal(ex1):
    D = ex1.complex.patch("D").mesh
    R = ex1.complex.patch("RaD").mesh
    rule = ReflectionRule.across(SIDE_A, 1.0)
    assert normal_mismatch(D, R, "a", rule) <= 1e-4
    r0 = graph_residual(D.vertices[:, :2], D.faces, D.vertices[:, 2])
    r1 = graph_residual(R.vertices[:, :2], R.faces, R.vertices[:, 2])
    assert r1 == pytest.approx(r0, rel=1e-6, abs=1e-12)


# -- complexes --------------------------------------------------------------


def test_euler_characteristic_of_disk_and_torus():
    n = 5
    xs = np.linspace(0, 1, n)
    X, Y = np.meshgrid(xs, xs + 1, indexing="ij")
    V = np.column_stack([X.ravel(), Y.ravel(), np.zeros(X.size)])
    m = TriMesh(V, grid_faces(n, n), {"left": np.arange(n), "right": np.arange(n * (n - 1), n * n),
                                       "bottom": np.arange(0, n * n, n), "top": np.arange(n - 1, n * n, n)})
    disk = SurfaceComplex([Patch("P", m)])
    assert disk.euler_characteristic() == 1

    class Shift:
        def __init__(self, dx, dy):
            self.d = np.array([dx, dy, 0.0])

        def apply(self, P):
            return np.asarray(P, float) + self.d

    # chart translations identify opposite sides; fine for combinatorics at these heights
    torus = SurfaceComplex([Patch("P", m)], [
        Identification("P", "left", "P", "right", Shift(1.0, 0.0), "x"),
        Identification("P", "bottom", "P", "top", Shift(0.0, 1.0), "y"),
    ])
    q = torus.quotient(tol=1.0)
    assert q.mesh.euler_characteristic() == 0
    assert len(q.mesh.boundary_loops()) == 0
    assert is_orientable(q.mesh.faces)


def test_dangling_identification_is_an_error():
    m = flat_patch()
    cx = SurfaceComplex([Patch("P", m)], [Identification("P", "left", "P", "nowhere", Isometry.identity())])
    with pytest.raises(DomainError, match="dangling"):
        cx.quotient()
    with pytest.raises(DomainError, match="no patch"):
        SurfaceComplex([Patch("P", m)], [Identification("P", "left", "Q", "left",
                                                        Isometry.identity())]).quotient()


def test_mismatched_identification_is_an_error():
    m = flat_patch()
    cx = SurfaceComplex([Patch("P", m)], [Identification("P", "left", "P", "right", Isometry.identity())])
    with pytest.raises(DomainError, match="does not match"):
        cx.quotient()


def test_topology_summary_checks_chi():
    with pytest.raises(DomainError):
        TopologySummary(0, 3, True, -2)
    TopologySummary(1, 0, False, -1)  # no orientable formula to check


# -- the five builds --------------------------------------------------------


def test_example1_topology_and_deck(ex1):
    t = ex1.topology
    assert (t.genus, t.punctures, t.orientable, t.chi) == (0, 3, True, -1)
    assert ex1.complex.is_connected()
    assert max(ex1.complex.deck_check().values()) <= 1e-6
    assert sorted(ex1.ends) == ["A", "B", "C"]


def test_example2_topology(built):
    b = built[2]
    t = b.topology
    assert (t.genus, t.punctures, t.orientable, t.chi) == (0, 4, True, -2)
    assert [b.ends[k]["kind"] for k in sorted(b.ends)] == ["helicoidal", "helicoidal", "horizontal", "horizontal"]
    assert max(b.complex.deck_check().values()) <= 1e-6


def test_example3_is_closed(built):
    t = built[3].topology
    assert t.punctures == 0
    assert built[3].quotient().mesh.boundary_loops() == []
    assert t.chi == built[3].quotient().mesh.euler_characteristic()
    assert max(built[3].complex.deck_check().values()) <= 1e-6


def test_example4_has_four_vertical_annular_ends(built):
    b = built[4]
    assert b.topology.punctures == 4
    assert len(b.ends) == 4
    assert all(e["kind"] == "vertical" for e in b.ends.values())
    assert max(b.complex.deck_check().values()) <= 1e-6


def test_example5_genus_two(built):
    b = built[5]
    t = b.topology
    assert (t.genus, t.punctures, t.orientable, t.chi) == (2, 2, True, -4)
    assert max(b.complex.deck_check().values()) <= 1e-6


def test_every_build_is_connected(ex1, built):
    for b in [ex1, *built.values()]:
        assert b.complex.is_connected()


def test_manifest_is_consistent(ex1):
    man = ex1.complex.manifest(ex1.topology)
    assert man["chi"] == -1 and man["n"] == 3
    assert {p["name"] for p in man["patches"]} == {"D", "RaD"}
    assert len(man["identifications"]) == 3


def test_unknown_example_id():
    with pytest.raises(DomainError):
        build_example(6)


def test_end_loops_of_example1_are_distinct(ex1):
    q = ex1.quotient().mesh
    loops = [frozenset(ex1.end_loop(k, q)) for k in "ABC"]
    assert len(set(loops)) == 3
    assert len(q.boundary_loops()) == 3

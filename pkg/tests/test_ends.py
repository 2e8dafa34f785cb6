import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import optimize

from hypermin.ends import (
    BoundaryCurve, EndType, StandardEnd, asymptotic_distance_profile, classify, diameter_G,
    k0_of, slab_of_curve, slab_of_points, standard_end_mesh,
)
from hypermin.exceptions import DomainError
from hypermin.hyperbolic import CuspModel, dist_product

M = CuspModel(tau=1.3, h=0.7)
S = np.linspace(0, 1, 201)


def curve(x, t, model=M):
    return BoundaryCurve.from_xt(S, x, t, model)


def test_classify_examples():
    assert classify(curve(S * M.tau, 0 * S)) == EndType(1, 0)
    assert classify(curve(0 * S, S * M.h)) == EndType(0, 1)
    c = curve(2 * S * M.tau, 3 * S * M.h + 0.1 * np.sin(2 * np.pi * S))
    assert classify(c) == EndType(2, 3)


def test_classify_errors():
    with pytest.raises(DomainError, match="compact"):
        classify(curve(np.sin(2 * np.pi * S), 0 * S))
    with pytest.raises(DomainError, match="deck-periodic"):
        classify(curve(S * M.tau * 1.01, 0 * S))


def _random_curve(p, q, rng, model=M, n=64):
    s = np.linspace(0, 1, n + 1)
    k = rng.integers(1, 4)
    x = p * model.tau * s + rng.normal(0, 0.3) * np.sin(2 * np.pi * k * s)
    t = q * model.h * s + rng.normal(0, 0.3) * (1 - np.cos(2 * np.pi * k * s)) + rng.normal()
    return BoundaryCurve.from_xt(s, x + rng.normal(), t, model)


def _brute_G(c):
    t = c.t
    return max(abs(a - b) for a in t for b in t)


@settings(max_examples=60, deadline=None)
@given(st.integers(-5, 5), st.integers(-5, 5), st.integers(0, 2**31))
def test_classify_random(p, q, seed):
    if p == 0 and q == 0:
        return
    c = _random_curve(p, q, np.random.default_rng(seed))
    assert classify(c) == EndType(p, q)
    G = diameter_G(c)
    assert G == _brute_G(c)
    k = k0_of(G, M.h)
    assert k * M.h >= G and (k == 0 or (k - 1) * M.h < G)


@settings(max_examples=40, deadline=None)
@given(st.integers(-3, 3), st.integers(-3, 3), st.integers(-3, 3), st.integers(-3, 3),
       st.integers(0, 2**31))
def test_deck_invariance(p, q, a, b, seed):
    if p == 0 and q == 0:
        return
    c = _random_curve(p, q, np.random.default_rng(seed))
    moved = c.points + np.array([a * M.tau, 0.0, b * M.h])
    c2 = BoundaryCurve(c.s, moved, M)
    kind = classify(c)
    assert classify(c2) == kind
    w1 = slab_of_curve(c, kind).width
    w2 = slab_of_curve(c2, kind).width
    assert w2 == pytest.approx(w1, abs=1e-9 * max(1.0, w1))


def test_diameter_examples():
    assert diameter_G(curve(S * M.tau, 0 * S)) == 0
    c = curve(S * M.tau, 0.7 * np.sin(2 * np.pi * S))
    assert diameter_G(c) == pytest.approx(1.4, abs=1e-12)
    c2 = curve(S * M.tau, 0.7 * np.sin(2 * np.pi * S) + 5.0)
    assert diameter_G(c2) == pytest.approx(diameter_G(c), abs=1e-12)


def test_k0():
    assert k0_of(0.0, 1.0) == 0
    assert k0_of(1.4, 1.0) == 2
    assert k0_of(2.0, 1.0) == 2


def test_slab_examples():
    A = 0.4
    c = curve(S * M.tau, A * np.sin(2 * np.pi * S))
    s = slab_of_curve(c, EndType(1, 0))
    assert (s.c_min, s.c_max) == pytest.approx((-A * M.tau, A * M.tau), abs=1e-12)
    c = curve(0.3 * M.tau * np.sin(2 * np.pi * S), S * M.h)
    s = slab_of_curve(c, EndType(0, 1))
    # functional -h x, so the x-slab [-0.3 tau, 0.3 tau] is scaled by h
    assert (s.c_min, s.c_max) == pytest.approx((-0.3 * M.tau * M.h, 0.3 * M.tau * M.h), abs=1e-12)
    with pytest.raises(DomainError):
        slab_of_curve(c, EndType(1, 0))


def test_diameter_slab_consistency():
    rng = np.random.default_rng(5)
    for _ in range(50):
        p, q = int(rng.integers(1, 4)), int(rng.integers(-3, 4))
        c = _random_curve(p, q, rng)
        kind = classify(c)
        w = slab_of_curve(c, kind).width
        x_ext = c.x.max() - c.x.min()
        assert diameter_G(c) <= w / (p * M.tau) + abs(q) * M.h * x_ext / (p * M.tau) + 1e-12


@pytest.mark.parametrize("p,q,const", [(1, 0, 0.5), (0, 1, 2.0), (2, 3, 1.0), (-1, 2, 0.3)])
def test_standard_end_mesh_exact(p, q, const):
    model = CuspModel(1.0, 1.0)
    end = StandardEnd(EndType(p, q), const, model)
    mesh = standard_end_mesh(end, (1, 8), (9, 7))
    V = mesh.vertices
    if q == 0:
        assert np.all(V[:, 2] == 0.5)
    if p == 0:
        assert np.all(V[:, 0] == 2.0)
    assert end.residual(V).max() <= 1e-12
    assert slab_of_points(V, EndType(p, q), model).width <= 1e-12
    assert np.all(end.distance(V) <= 1e-7)


def _brute_distance(end, P):
    # minimise over foot points (x', y') of the end surface
    ptau, qh = end.kind.p * end.model.tau, end.kind.q * end.model.h

    def f(z):
        xp, ly = z
        tp = (end.c0 + qh * xp) / ptau
        return dist_product(P, np.array([xp, math.exp(ly), tp])) ** 2

    best = min((optimize.minimize(f, [P[0] + d, math.log(P[1])], method="Nelder-Mead",
                                  options={"xatol": 1e-11, "fatol": 1e-15, "maxiter": 4000})
                for d in (-0.5, 0.0, 0.5)), key=lambda r: r.fun)
    return math.sqrt(best.fun)


def test_distance_against_brute_force():
    end = StandardEnd(EndType(1, 1), 0.2, CuspModel(1.0, 1.0))
    rng = np.random.default_rng(2)
    for _ in range(6):
        P = np.array([rng.uniform(-1, 1), rng.uniform(1, 6), rng.uniform(-1, 1)])
        assert end.distance(P)[0] == pytest.approx(_brute_distance(end, P), abs=1e-6)


def test_offset_profile_decays():
    model = CuspModel(1.0, 1.0)
    end = StandardEnd(EndType(1, 1), 0.0, model)
    shifted = standard_end_mesh(StandardEnd(EndType(1, 1), 0.05, model), (1, 32), (12, 40))
    prof = asymptotic_distance_profile(shifted, end, [2, 4, 8, 16])
    d = [v for _, v in prof]
    assert all(a > b for a, b in zip(d, d[1:]))
    # flat approximation delta / sqrt((q h y)^2 + (p tau)^2)
    for y, v in prof:
        assert v == pytest.approx(0.05 / math.hypot(y, 1.0), rel=0.1)
    same = asymptotic_distance_profile(standard_end_mesh(end, (1, 32), (12, 40)), end, [2, 4, 8])
    assert all(v <= 1e-7 for _, v in same)


def test_csv_ingestion(tmp_path):
    path = tmp_path / "c.csv"
    rows = ["s,x,t"] + [f"{s},{2 * s * M.tau},{s * M.h}" for s in S]
    path.write_text("\n".join(rows))
    c = BoundaryCurve.from_csv(path, M)
    assert classify(c) == EndType(2, 1)

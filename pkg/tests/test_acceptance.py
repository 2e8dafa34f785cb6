"""The ten acceptance criteria at their stated tolerances.

Run ``pytest tests/test_acceptance.py -v``; the terminal summary ends with one
PASS/FAIL line per criterion.
"""

import json
import math
import time

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from hypermin.barrier import BarrierParams, compact_convergence_gap, gap_bound, integrate_alpha
from hypermin.cli import dumps, run
from hypermin.curvature import curvature_report, geodesic_curvature_loop, obstruction_check
from hypermin.ends import BoundaryCurve, EndType, StandardEnd, classify, diameter_G, k0_of, standard_end_mesh
from hypermin.examples import build_example, example1, example5
from hypermin.graph_solver import BoundaryDatum, nested_difference, prop61_ladder, quadrilateral, solve
from hypermin.hyperbolic import AmbientKind, CuspModel
from hypermin.sweep import trapping_report

pytestmark = pytest.mark.acceptance


@pytest.fixture(scope="module")
def ex1_ladder():
    return {y: example1(h=1.0, y_cut=y, n_cols=16) for y in (4.0, 8.0, 16.0)}


def test_criterion_1_barrier_ode(criterion):
    worst, slowest = 0.0, 0.0
    for lam in (0.5, 1.0, 2.0):
        for T in (2.0, 10.0, 100.0):
            t0 = time.perf_counter()
            c = integrate_alpha(BarrierParams(lam, T))
            slowest = max(slowest, time.perf_counter() - t0)
            worst = max(worst, float(c.first_integral_residual().max()))
    # lambda = 0: the module's branch against a tight numerical integration of alpha'' = -alpha
    T = 5.0
    c = integrate_alpha(BarrierParams(0.0, T))
    hit = lambda v, y: y[0]  # noqa: E731
    hit.terminal, hit.direction = True, -1
    sol = solve_ivp(lambda v, y: [y[1], -y[0]], (0.0, 4.0), [0.0, T], rtol=1e-13, atol=1e-13,
                    dense_output=True, events=hit, method="DOP853")
    v0_num = float(sol.t_events[0][0])
    branch = float(np.max(np.abs(sol.sol(c.v)[0] - c.alpha)))
    ok = worst <= 1e-8 and branch <= 1e-6 and abs(c.v0 - math.pi) <= 1e-8 \
        and abs(v0_num - math.pi) <= 1e-8 and slowest < 1.0
    criterion("criterion 1 (barrier ODE)", ok,
              f"max first-integral residual {worst:.2e}, lambda=0 branch gap {branch:.2e}, "
              f"|v0 - pi| {abs(c.v0 - math.pi):.1e}, slowest curve {slowest:.2f}s")


def test_criterion_2_compact_convergence(criterion):
    Ts = (1e2, 1e3, 1e4)
    gaps = [compact_convergence_gap(1.0, T, 1.0) for T in Ts]
    bounds = [gap_bound(1.0, T, 1.0) for T in Ts]
    ok = gaps[0] > gaps[1] > gaps[2] and all(g <= b for g, b in zip(gaps, bounds)) and bounds[0] <= 1 / 7 + 1e-15
    criterion("criterion 2 (compact convergence)", ok,
              "gaps " + ", ".join(f"{g:.4f}<={b:.4f}" for g, b in zip(gaps, bounds)))


def test_criterion_3_exact_solutions(criterion):
    const = solve(quadrilateral(n=(12, 12), data=BoundaryDatum.finite(0.7)))
    errs = []
    for lam in (0.5, 1.0, 2.0):
        prob = quadrilateral(n=(12, 12), data=BoundaryDatum.affine(0.0, lam))
        errs.append(float(np.max(np.abs(solve(prob).u - lam * prob.points[:, 0]))))
    ok = np.all(const.u == 0.7) and const.residual == 0 and max(errs) <= 1e-6
    criterion("criterion 3 (exact solutions)", ok,
              f"constant residual {const.residual}, plane errors {', '.join(f'{e:.1e}' for e in errs)}")


def test_criterion_4_prop61_ladder(criterion):
    t0 = time.perf_counter()
    rows, sols = prop61_ladder((2, 4, 8, 16))
    elapsed = time.perf_counter() - t0
    sups = [s for _, s in rows]
    mono = max(nested_difference(a, b) for a, b in zip(sols, sols[1:]))
    n_vert = len(sols[-1].problem.points)
    ok = all(s > 0 for s in sups) and all(a > b for a, b in zip(sups, sups[1:])) \
        and sups[-1] <= 0.25 * sups[0] and mono <= 1e-6 and elapsed < 120
    criterion("criterion 4 (Omega_n ladder)", ok,
              f"sups {', '.join(f'{s:.3f}' for s in sups)}, max(u_n+1 - u_n) {mono:.1e}, "
              f"{n_vert} vertices at n=16, {elapsed:.1f}s")


def test_criterion_5_total_curvature(ex1_ladder, criterion):
    target = -2 * math.pi
    totals, defects = [], []
    for y, b in ex1_ladder.items():
        totals.append(b.complex.smooth_total_curvature())
        defects.append(abs(curvature_report(b.quotient().mesh).gb_defect))
    errs = [abs(t - target) for t in totals]
    rel = errs[-1] / abs(target)
    ex5 = example5()
    t5 = float(ex5.diagnostics["smooth_total"])
    rel5 = abs(t5 + 8 * math.pi) / (8 * math.pi)
    ok = rel <= 0.05 and errs[0] > errs[1] > errs[2] and max(defects) <= 1e-9 and rel5 <= 0.10
    criterion("criterion 5 (total curvature)", ok,
              f"Example 1 totals {', '.join(f'{t:.4f}' for t in totals)} ({100 * rel:.2f}% off -2pi), "
              f"GB defect {max(defects):.1e}; Example 5 {t5:.3f} ({100 * rel5:.2f}% off -8pi)")


def test_criterion_6_trapping(criterion):
    bad, ratios = [], []
    for eid in (1, 2, 5):
        b = build_example(eid)
        for name in b.ends:
            end = b.end_mesh(name)
            rep = trapping_report(end.mesh, end.kind, end.model)
            ratios.append(rep.width_ratio)
            if not (rep.contains_envelope and rep.width_ratio <= 1.10):
                bad.append(f"{eid}:{name}")
    model = CuspModel(1.0, 1.0, 1.0)
    worst = 0.0
    for (p, q), c in {(1, 0): 0.4, (0, 1): 2.0, (1, 1): 0.3, (2, -1): 0.1, (1, 3): -0.5}.items():
        m = standard_end_mesh(StandardEnd(EndType(p, q), c, model), resolution=(12, 10))
        rep = trapping_report(m, EndType(p, q), model)
        # slab width back in chart units (x for (0, q), t otherwise)
        width = rep.slab.width / abs(p * model.tau if p else q * model.h)
        worst = max(worst, width / m.max_edge_length())
        if not rep.contains_envelope:
            bad.append(f"standard ({p},{q})")
    ok = not bad and worst <= 2.0
    criterion("criterion 6 (trapping)", ok,
              f"{len(ratios)} example ends, width ratios {min(ratios):.3f}..{max(ratios):.3f}; "
              f"standard ends width/edge <= {worst:.3f}" + (f"; failing {bad}" if bad else ""))


def test_criterion_7_classification(criterion):
    rng = np.random.default_rng(20240607)
    errors, n = 0, 0
    while n < 200:
        p, q = (int(v) for v in rng.integers(-5, 6, 2))
        if p == q == 0:
            continue
        n += 1
        tau, h = rng.uniform(0.5, 3.0, 2)
        y0 = rng.uniform(1.0, 4.0)
        s = np.linspace(0.0, 1.0, int(rng.integers(20, 200)))
        k = int(rng.integers(1, 4))
        x = p * tau * s + rng.uniform(-1, 1) + rng.uniform(0, 0.3) * np.sin(2 * math.pi * k * s)
        t = q * h * s + rng.uniform(-1, 1) + rng.uniform(0, 2.0) * np.sin(2 * math.pi * k * s + 0.3)
        curve = BoundaryCurve.from_xt(s, x, t, CuspModel(tau, h, y0))
        if classify(curve) != EndType(p, q):
            errors += 1
        G = diameter_G(curve)
        brute = max(abs(a - b) for a in t for b in t)
        k0 = next(j for j in range(10**6) if j * h >= brute)
        errors += (G != brute) + (k0_of(G, h) != k0)
    criterion("criterion 7 (classification)", errors == 0, f"{n} random curves, {errors} errors")


def _stated_verdict(g, n, ambient):
    chi = 2 - 2 * g - n
    if ambient is AmbientKind.HYPERBOLIC:
        return "allowed" if 2 * g + n - 2 > 0 else "forbidden"
    if chi > 0:
        return "forbidden"
    if chi == 0:
        return "vertical_only"
    return "allowed"


def test_criterion_8_corollary_table(criterion):
    mismatches = []
    for ambient in (AmbientKind.PRODUCT, AmbientKind.HYPERBOLIC):
        for g in range(4):
            for n in range(6):
                got = obstruction_check(g, n, ambient).status
                if got != _stated_verdict(g, n, ambient):
                    mismatches.append((ambient.value, g, n, got))
    named = [obstruction_check(0, 1, a).status == "forbidden" for a in AmbientKind]
    named += [obstruction_check(0, n, AmbientKind.HYPERBOLIC).status == "forbidden" for n in (0, 1, 2)]
    named.append(obstruction_check(0, 2, AmbientKind.PRODUCT).status == "vertical_only")
    ok = not mismatches and all(named)
    criterion("criterion 8 (corollary table)", ok, f"48 cases, {len(mismatches)} mismatches {mismatches}")


def test_criterion_9_boundary_decay(ex1_ladder, criterion):
    rows = []
    for y, b in ex1_ladder.items():
        q = b.quotient().mesh
        kg, length = geodesic_curvature_loop(q, b.end_loop("C", q))
        rows.append((y, length, b.ends["C"]["width"] / y, kg))
    len_ok = all(abs(L - ref) <= 0.02 * ref for _, L, ref, _ in rows)
    kgs = [abs(r[3]) for r in rows]
    ok = len_ok and kgs[0] > kgs[1] > kgs[2]
    criterion("criterion 9 (boundary decay)", ok,
              "; ".join(f"y={y:g}: length {L:.6f} vs {ref:.6f}, kg {kg:.4f}" for y, L, ref, kg in rows))


def test_criterion_10_determinism(tmp_path, criterion):
    curve = tmp_path / "boundary.csv"
    s = [k / 40 for k in range(41)]
    curve.write_text("s,x,t\n" + "".join(f"{a},{6 * a},{3 * a + 0.1 * math.sin(2 * math.pi * a)}\n"
                                          for a in s))
    commands = {
        "barrier": ["barrier", "--lambda", "0,1", "--T", "3"],
        "solve": ["solve", "--resolution", "8", "--jitter", "0.2", "--seed", "5"],
        "plateau": ["plateau"],
        "example": ["example", "--id", "1", "--resolution", "8", "--y-cut", "8"],
        "classify": ["classify", "--curve", str(curve), "--tau", "3"],
        "trap": ["trap", "--p", "1", "--q", "1", "--constant", "0.2"],
        "verify": ["verify", "--example", "1", "--resolution", "8", "--ycuts", "4,8"],
    }
    differ = []
    for name, argv in commands.items():
        texts = []
        for k in range(2):
            code, env, _ = run([*argv, "--out", str(tmp_path / f"{name}{k}")])
            assert code == 0, (name, env.get("error"))
            texts.append(dumps(env["payload"]))
        if texts[0] != texts[1]:
            differ.append(name)
    inputs = [str(tmp_path / f"{name}0" / "report.json") for name in commands]
    reps = [dumps(run(["report", *inputs, "--out", str(tmp_path / f"report{k}")])[1]["payload"]) for k in range(2)]
    if reps[0] != reps[1]:
        differ.append("report")
    ok = not differ and json.loads(reps[0])["status_counts"] == {"ok": len(commands)}
    criterion("criterion 10 (determinism)", ok, f"{len(commands) + 1} commands re-run, differing: {differ or 'none'}")


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(pytest.main([__file__, "-v"]))

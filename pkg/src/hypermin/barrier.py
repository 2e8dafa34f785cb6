"""Ruled minimal surfaces ``(u, alpha(v), v + lam*u)`` in the product cusp.

For ``lam > 0`` the profile solves

    alpha'' = -alpha (1 + lam^2 alpha'^2) / (1 + lam^2 alpha^2),

with the conserved quantity ``(1 + lam^2 alpha'^2)(1 + lam^2 alpha^2) = T``.
``lam = 0`` is handled separately: the profile is ``T sin v`` on ``[0, pi]``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import integrate, special

from .exceptions import DomainError, NumericalError
from .mesh import TriMesh, grid_faces

EVENT_TOL = 1e-8


@dataclass(frozen=True)
class BarrierParams:
    lam: float
    T: float
    t_offset: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.lam) and math.isfinite(self.T) and math.isfinite(self.t_offset)):
            raise DomainError("barrier parameters must be finite")
        if self.lam < 0:
            raise DomainError(f"lambda must be >= 0, got {self.lam}")
        if self.lam > 0 and self.T <= 1:
            raise DomainError(f"T must exceed 1 when lambda > 0, got {self.T}")
        if self.lam == 0 and self.T <= 0:
            raise DomainError(f"T must be positive, got {self.T}")

    @property
    def alpha_max(self):
        if self.lam == 0:
            return self.T
        return math.sqrt(self.T - 1) / self.lam


def alpha_second(alpha, alpha_p, lam):
    """Closed-form ``alpha''`` from the minimality ODE."""
    alpha = np.asarray(alpha, dtype=float)
    alpha_p = np.asarray(alpha_p, dtype=float)
    return -alpha * (1 + lam * lam * alpha_p**2) / (1 + lam * lam * alpha**2)


def ruled_mean_curvature(alpha, alpha_p, alpha_pp, lam):
    """Mean curvature of the ruled surface at a profile point."""
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha <= 0):
        raise DomainError("mean curvature needs alpha > 0")
    l2 = lam * lam
    Z = np.sqrt(alpha_p**2 * (1 + l2 * alpha**2) + alpha**2)
    two_h = -(alpha**2 / Z**3) * (alpha_pp * (1 + l2 * alpha**2) + alpha * (1 + l2 * alpha_p**2))
    out = 0.5 * two_h
    return float(out) if out.ndim == 0 else out


@dataclass
class BarrierCurve:
    v: np.ndarray
    alpha: np.ndarray
    alpha_prime: np.ndarray
    v0: float
    params: BarrierParams

    @property
    def alpha_pp(self):
        return alpha_second(self.alpha, self.alpha_prime, self.params.lam)

    def first_integral_residual(self):
        lam, T = self.params.lam, self.params.T
        if lam == 0:
            # alpha'^2 + alpha^2 = T^2 plays the same role on the analytic branch
            return np.abs(self.alpha_prime**2 + self.alpha**2 - T * T) / max(T * T, 1.0)
        l2 = lam * lam
        return np.abs((1 + l2 * self.alpha_prime**2) * (1 + l2 * self.alpha**2) - T)

    def mean_curvature_residual(self):
        inner = self.alpha > 0
        if not np.any(inner):
            return np.zeros(0)
        return np.abs(ruled_mean_curvature(self.alpha[inner], self.alpha_prime[inner],
                                           self.alpha_pp[inner], self.params.lam))

    def alpha_at(self, v):
        """Profile value at arbitrary ``v`` (cubic Hermite on the samples)."""
        from scipy.interpolate import CubicHermiteSpline

        v = np.asarray(v, dtype=float)
        if self.params.lam == 0:
            return self.params.T * np.sin(np.clip(v, 0.0, math.pi))
        spline = CubicHermiteSpline(self.v, self.alpha, self.alpha_prime)
        return np.where((v < 0) | (v > self.v0), 0.0, spline(np.clip(v, 0.0, self.v0)))

    def to_csv(self, path):
        path = Path(path)
        res = self.first_integral_residual()
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["v", "alpha", "alpha_prime", "residual"])
            for row in zip(self.v, self.alpha, self.alpha_prime, res):
                w.writerow([repr(float(x)) for x in row])
        return path


def default_step(T):
    # keeps the first-integral drift near 1e-9 up to T ~ 1e4
    return 1e-3 / max(1.0, math.sqrt(T / 25.0))


def _rk4_beta(beta_p0, h, stop_beta=None, max_steps=10_000_000):
    """RK4 on the rescaled profile ``beta = lam * alpha`` (independent of lam).

    Runs until beta returns to 0 (or first reaches ``stop_beta``); the
    crossing is refined by bisection on the last step.
    """

    def f(b, bp):
        return -b * (1 + bp * bp) / (1 + b * b)

    def step(b, bp, dt):
        k1b, k1p = bp, f(b, bp)
        k2b, k2p = bp + 0.5 * dt * k1p, f(b + 0.5 * dt * k1b, bp + 0.5 * dt * k1p)
        k3b, k3p = bp + 0.5 * dt * k2p, f(b + 0.5 * dt * k2b, bp + 0.5 * dt * k2p)
        k4b, k4p = bp + dt * k3p, f(b + dt * k3b, bp + dt * k3p)
        return (b + dt / 6 * (k1b + 2 * k2b + 2 * k3b + k4b),
                bp + dt / 6 * (k1p + 2 * k2p + 2 * k3p + k4p))

    def locate(b, bp, g):
        # smallest dt in (0, h] with g(step(b, bp, dt)) <= 0, by bisection
        lo, hi = 0.0, h
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if g(*step(b, bp, mid)) > 0:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-16 * max(1.0, v):
                break
        return 0.5 * (lo + hi)

    vs, bs, ps = [0.0], [0.0], [beta_p0]
    v, b, bp = 0.0, 0.0, beta_p0
    for _ in range(max_steps):
        nb, nbp = step(b, bp, h)
        if stop_beta is not None and nb >= stop_beta:
            dt = locate(b, bp, lambda x, xp: stop_beta - x)
            eb, ebp = step(b, bp, dt)
            vs.append(v + dt)
            bs.append(stop_beta)
            ps.append(ebp)
            return np.array(vs), np.array(bs), np.array(ps)
        if nb <= 0.0:
            dt = locate(b, bp, lambda x, xp: x)
            eb, ebp = step(b, bp, dt)
            if abs(eb) > EVENT_TOL:
                raise NumericalError("event bisection did not converge",
                                     {"v": v + dt, "residual": abs(eb)})
            vs.append(v + dt)
            bs.append(0.0)
            ps.append(ebp)
            return np.array(vs), np.array(bs), np.array(ps)
        if bp > 0.0 >= nbp:
            # keep the crest as an explicit sample
            dt = locate(b, bp, lambda x, xp: xp)
            eb, ebp = step(b, bp, dt)
            if 0.0 < dt < h:
                vs.append(v + dt)
                bs.append(eb)
                ps.append(ebp)
        v += h
        b, bp = nb, nbp
        vs.append(v)
        bs.append(b)
        ps.append(bp)
    raise NumericalError("profile did not return to zero", {"v": v, "beta": b})


def integrate_alpha(params: BarrierParams, step=None) -> BarrierCurve:
    """Profile on its positivity interval ``[0, v0]``."""
    lam, T = params.lam, params.T
    if lam == 0:
        n = max(int(math.ceil(math.pi / (step or 1e-3))), 2)
        v = np.linspace(0.0, math.pi, n + 1)
        alpha = T * np.sin(v)
        alpha[-1] = 0.0
        return BarrierCurve(v, alpha, T * np.cos(v), math.pi, params)
    if T <= 1:
        raise DomainError("T must exceed 1")
    h = default_step(T) if step is None else float(step)
    if h <= 0:
        raise DomainError("step must be positive")
    v, beta, beta_p = _rk4_beta(math.sqrt(T - 1), h)
    # alpha = beta / lam, alpha' = beta' / lam
    return BarrierCurve(v, beta / lam, beta_p / lam, float(v[-1]), params)


def v0_of_T(lam, T):
    """Length of the positivity interval by quadrature.

    Substituting ``lam * alpha = sqrt(T - 1) sin(theta)`` removes the inverse
    square-root endpoint singularity and leaves a smooth integrand.
    """
    if lam <= 0:
        raise DomainError("v0_of_T needs lambda > 0")
    if T <= 1:
        raise DomainError("v0_of_T needs T > 1")
    m = T - 1.0
    val, err = integrate.quad(lambda th: math.sqrt(1.0 + m * math.sin(th) ** 2),
                              0.0, math.pi / 2, epsabs=1e-13, epsrel=1e-13, limit=200)
    if not math.isfinite(val) or err > 1e-9:
        raise NumericalError("v0 quadrature failed", {"value": val, "error_estimate": err})
    return 2.0 * val


def rising_branch_v(lam, T, y):
    """``v`` at which the rising branch of the profile reaches height ``y``.

    Vectorised; uses the incomplete elliptic integral of the second kind with
    negative parameter.  Heights above the maximum give ``nan``.
    """
    y = np.asarray(y, dtype=float)
    if lam == 0:
        with np.errstate(invalid="ignore"):
            return np.where(y <= T, np.arcsin(np.clip(y / T, -1.0, 1.0)), np.nan)
    bm = math.sqrt(T - 1.0)
    s = lam * y / bm
    with np.errstate(invalid="ignore"):
        phi = np.arcsin(np.clip(s, -1.0, 1.0))
        out = special.ellipeinc(phi, -(T - 1.0))
    return np.where(np.abs(s) <= 1.0, out, np.nan)


def gap_bound(lam, T, M):
    if lam == 0:
        return math.asin(M / T) if M <= T else math.inf
    return M * lam / math.sqrt(T / (1 + lam * lam * M * M) - 1)


def compact_convergence_gap(lam, T, M, step=None):
    """Largest ``v`` on the rising branch with ``alpha <= M``.

    Measured from an integration of the rising branch that stops at the
    crossing ``alpha = M``.
    """
    if M <= 0:
        raise DomainError("M must be positive")
    if lam < 0:
        raise DomainError("lambda must be >= 0")
    if lam == 0:
        if M > T:
            raise DomainError("need M <= T on the horizontal family")
        return math.asin(M / T)
    if T <= 1 + lam * lam * M * M:
        raise DomainError("need T > 1 + lambda^2 M^2")
    h = default_step(T) if step is None else float(step)
    v, _, _ = _rk4_beta(math.sqrt(T - 1), h, stop_beta=lam * M)
    return float(v[-1])


@dataclass
class RuledPatch:
    mesh: TriMesh
    params: BarrierParams
    u: np.ndarray
    v: np.ndarray
    residual: float


def barrier_mesh(params: BarrierParams, u_range=(0.0, 1.0), resolution=(8, 64), curve=None):
    """Sample the ruled surface on a ``u`` x ``v`` grid.

    The ``v`` nodes are a subset of the integrator's samples so vertex heights
    are exact profile values, not interpolants.
    """
    nu, nv = int(resolution[0]), int(resolution[1])
    if nu < 2 or nv < 2:
        raise DomainError("resolution must be at least 2 x 2")
    u0, u1 = map(float, u_range)
    if not u1 > u0:
        raise DomainError("empty u range")
    curve = curve or integrate_alpha(params)
    idx = np.unique(np.round(np.linspace(0, len(curve.v) - 1, nv)).astype(int))
    v, a = curve.v[idx], curve.alpha[idx]
    u = np.linspace(u0, u1, nu)
    U, V = np.meshgrid(u, v, indexing="ij")
    A = np.broadcast_to(a, U.shape)
    verts = np.stack([U, A, V + params.lam * U + params.t_offset], axis=-1).reshape(-1, 3)
    mesh = TriMesh(verts, grid_faces(nu, len(v)))
    res = curve.mean_curvature_residual()
    return RuledPatch(mesh, params, u, v, float(res.max()) if res.size else 0.0)

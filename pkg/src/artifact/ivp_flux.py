"""Initial-value problems from the fundamental solution, and particle fluxes.

``h(t, x) = int h0(y) g(t y^{(lam-1)/2}, x/y, 1) dy/y`` superposes rescaled
fundamental solutions. The fluxes count monomers crossing the size ``R``
under the kernel ``K(y, z) = (yz)^{lam/2}``:

    J^-_R[f] = 1/2 int_{D1} f(y) f(z) K (y+z) dy dz + int_{D2} f(y) f(z) K y dy dz,
    D1 = {y <= R, z <= R, y+z >= R},  D2 = {y <= R, z >= R},

and the linearisation around ``x^{-(3+lam)/2}`` reduces to three 1-D
integrals ``I1 + I2 + I3`` (see :func:`flux_linearized`).
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate
from scipy.interpolate import CubicSpline

from .direct_solver import GridFunction, Trajectory
from .fundamental_solution import (
    SQRT_2PI,
    NoPlateauError,
    default_lines,
    default_xi_grid,
    ghat_line,
    small_time_closed_form,
)
from .symbols import KernelParams
from .wiener_hopf import WienerHopfFactor

__all__ = [
    "InitialDatum",
    "IVPResult",
    "FluxReport",
    "AdmissibilityError",
    "solve_ivp",
    "tail_coefficients",
    "flux_J_minus",
    "flux_J_plus",
    "flux_linearized",
    "mass_balance",
    "mass_up_to",
]


class AdmissibilityError(ValueError):
    """Initial datum violates the integrability conditions."""


@dataclass
class InitialDatum:
    """``h0`` with declared envelopes ``|h0| <= C y^{-a0}`` near 0 and ``C y^{-a_inf}`` at infinity.

    ``support`` (optional) restricts the y-quadrature to ``[lo, hi]``.
    """

    sampler: Callable
    a0: float = 0.0
    a_inf: float = 2.0
    support: tuple | None = None

    def __call__(self, y):
        return self.sampler(np.asarray(y, dtype=float))

    def check_admissible(self, p: KernelParams) -> None:
        """``int_0^1 |h0| y^lam dy + int_1^inf |h0| dy < inf``."""
        if self.support is None:
            if self.a0 >= 1.0 + p.lam:
                raise AdmissibilityError(f"y^lam h0 not integrable at 0 (a0 = {self.a0})")
            if self.a_inf <= 1.0:
                raise AdmissibilityError(f"h0 not integrable at infinity (a_inf = {self.a_inf})")
        lo, hi = self.support or (0.0, np.inf)
        near = integrate.quad(lambda y: abs(self(y)) * y**p.lam, lo, min(1.0, hi), limit=200)[0] \
            if lo < 1.0 else 0.0
        far = integrate.quad(lambda y: abs(self(y)), max(1.0, lo), hi, limit=200)[0] \
            if hi > 1.0 else 0.0
        if not np.isfinite(near + far):
            raise AdmissibilityError("integrability check failed numerically")

    def satisfies_tail_hypotheses(self, p: KernelParams) -> bool:
        """``|h0| <= C y^{-3/2+eps}`` near 0 and ``<= C y^{-(1+eps)}`` at infinity."""
        if self.support is not None and self.support[0] > 0 and np.isfinite(self.support[1]):
            return True
        return self.a0 < 1.5 and self.a_inf > 1.0


@dataclass
class IVPResult:
    t: float
    x: np.ndarray
    values: np.ndarray
    error_estimate: float
    method: str


def _y_nodes(h0: InitialDatum, n_panels: int, order: int):
    lo, hi = h0.support if h0.support is not None else (1e-3, 1e3)
    xg, wg = leggauss(order)
    edges = np.linspace(np.log(lo), np.log(hi), n_panels + 1)
    Y, W = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        Y.append((b - a) / 2 * xg + (a + b) / 2)
        W.append((b - a) / 2 * wg)
    return np.concatenate(Y), np.concatenate(W)


def _G_lines(t_list, w, X_list):
    """``G(t_j, X)`` for each time in ``t_list`` at the abscissae ``X_list[j]``."""
    b_xi, b_y = default_lines(w.lam)
    out = []
    for tj, Xj in zip(t_list, X_list):
        h, N = default_xi_grid(tj)
        gh = ghat_line(tj, b_xi, b_y, h, N, w)
        xi = h * np.arange(N) + 1j * b_xi
        wts = np.ones(N)
        wts[0] = 0.5
        ph = np.exp(1j * np.outer(Xj, xi))
        out.append(2.0 / SQRT_2PI * h * np.real(ph @ (wts * gh)))
    return out


def solve_ivp(h0: InitialDatum, t: float, x, w: WienerHopfFactor, n_panels: int = 12,
              order: int = 6, small_time: float = 0.02) -> IVPResult:
    """``h(t, x)`` by Gauss-Legendre quadrature in ``Y = ln y``.

    Each node needs G at the rescaled time ``t y^{(lam-1)/2}``. When that time
    is below ``small_time`` for every node, the fundamental solution is
    replaced by its small-time limit ``G ~ t^{-2} Psi(X/t^2)`` and the
    superposition becomes ``int h0(x e^{-tau^2 chi}) Psi(chi) d chi`` with
    ``tau = t x^{(lam-1)/2}``. The error estimate compares with half the panels.
    """
    p = w.params
    h0.check_admissible(p)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = w.delta
    lo, hi = h0.support if h0.support is not None else (1e-3, 1e3)
    if t * max(lo**d, hi**d) < small_time:
        vals = np.array([_small_time_superposition(h0, t * xv**d, xv) for xv in x])
        return IVPResult(t, x, vals, float(t * t * np.max(np.abs(vals))), "small_time_limit")

    def superpose(panels):
        Y, Wq = _y_nodes(h0, panels, order)
        ty = t * np.exp(d * Y)
        Xs = [np.log(x) - Yj for Yj in Y]
        G = _G_lines(ty, w, Xs)
        return sum(Wq[j] * h0(np.exp(Y[j])) * G[j] for j in range(len(Y)))

    full = superpose(n_panels)
    half = superpose(max(1, n_panels // 2))
    return IVPResult(t, x, full, float(np.max(np.abs(full - half))), "fundamental_solution")


def _small_time_superposition(h0, tau, x):
    # h(t, x) = int_0^inf h0(x e^{-tau^2 chi}) Psi(chi) d chi
    f = lambda chi: h0(x * np.exp(-tau * tau * chi)) * small_time_closed_form(chi)
    a = integrate.quad(f, 0.0, 50.0, limit=400)[0]
    b = integrate.quad(f, 50.0, np.inf, limit=400)[0]
    return a + b


def _fit_power(x, v):
    slope, icpt = np.polyfit(np.log(x), np.log(np.abs(v)), 1)
    return float(slope)


def tail_coefficients(h0: InitialDatum, t: float, w: WienerHopfFactor,
                      left=(-12.0, -8.0), right=(5.0, 9.0), n: int = 9,
                      max_residual: float = 0.1, **kw) -> dict:
    """Plateau fits of ``h x^{3/2}`` (small x) and ``h x^{(3+lam)/2}`` (large x).

    The fits include the next exponential in ``ln x``, which lies
    ``(lam-1)/2`` further along in both tails; the free log-slopes are
    reported alongside.
    """
    if not h0.satisfies_tail_hypotheses(w.params):
        raise AdmissibilityError("initial datum does not satisfy the tail hypotheses")
    lam, d = w.lam, w.delta
    XL = np.linspace(*left, n)
    XR = np.linspace(*right, n)
    res = solve_ivp(h0, t, np.exp(np.concatenate([XL, XR])), w, **kw)
    hl, hr = res.values[:n], res.values[n:]

    def plateau(X, v, rate, nxt):
        M = np.column_stack([np.ones_like(X), np.exp(nxt * X)])
        coef, *_ = np.linalg.lstsq(M, v * np.exp(rate * X), rcond=None)
        return float(coef[0]), float(np.max(np.abs(M @ coef - v * np.exp(rate * X)))
                                     / max(abs(coef[0]), 1e-300))

    A_minus, rl = plateau(XL, hl, 1.5, d)
    A_plus, rr = plateau(XR, hr, 0.5 * (3.0 + lam), -d)
    if max(rl, rr) > max_residual:
        raise NoPlateauError(f"tail fit residuals {rl:.3g}, {rr:.3g} exceed {max_residual}")
    return {"A_minus": A_minus, "A_plus": A_plus,
            "left_slope": _fit_power(np.exp(XL), hl), "right_slope": _fit_power(np.exp(XR), hr),
            "left_residual": rl, "right_residual": rr}


# -- fluxes --------------------------------------------------------------------------

@dataclass
class FluxReport:
    R: float
    J_minus: float = float("nan")
    J_plus: float = float("nan")
    I1: float = float("nan")
    I2: float = float("nan")
    I3: float = float("nan")
    mass_balance_residual: float = float("nan")
    parts: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"schema": "artifact.flux-report/1", **asdict(self)},
                          sort_keys=True, default=float)


def _kernel(y, z, lam):
    return (y * z) ** (0.5 * lam)


def _domain_integrals(f, R, lam, tol):
    """``1/2 int_{D1} f f K (y+z)`` and ``int_{D2} f f K y``.

    D1 is split by the symmetry ``y <-> z``; on ``y <= R/2`` the substitution
    ``y = R s^2``, ``z = R - y + y v`` absorbs the ``y^{-3/2}`` behaviour of
    power-law data. D2 uses ``y = R s^2`` and ``z = R/sigma^2``.
    """
    K = lambda y, z: _kernel(y, z, lam)
    kw = dict(epsabs=0.0, epsrel=tol)

    def d1_near(v, s):
        y = R * s * s
        z = R - y + y * v
        return f(y) * f(z) * K(y, z) * (y + z) * (2 * R * s) * y

    def d1_far(z, y):
        return f(y) * f(z) * K(y, z) * (y + z)

    near = integrate.dblquad(d1_near, 0.0, np.sqrt(0.5), 0.0, 1.0, **kw)[0]
    far = integrate.dblquad(d1_far, 0.5 * R, R, lambda y: y, R, **kw)[0]
    # 1/2 * 2 (symmetry) * (near + far)
    D1 = near + far

    def d2(sig, s):
        y = R * s * s
        z = R / (sig * sig)
        return f(y) * f(z) * K(y, z) * y * (2 * R * s) * (2 * R / sig**3)

    D2 = integrate.dblquad(d2, 0.0, 1.0, 0.0, 1.0, **kw)[0]
    return D1, D2


def flux_J_minus(f: Callable, R: float, p: KernelParams, tol: float = 1e-6) -> FluxReport:
    """Monomer flux out of ``[0, R]`` for the coagulation equation."""
    D1, D2 = _domain_integrals(f, R, p.lam, tol)
    return FluxReport(R=R, J_minus=D1 + D2, parts={"D1": D1, "D2": D2})


def flux_J_plus(f: Callable, R: float, p: KernelParams, tol: float = 1e-6) -> FluxReport:
    """Monomer flux into ``[R, inf)``.

    The domains ``D1+`` and ``D2+`` are defined to coincide with
    ``D1-`` and ``D2-``; consequently ``J+ = J-`` for every ``f``.
    """
    D1, D2 = _domain_integrals(f, R, p.lam, tol)
    return FluxReport(R=R, J_plus=D1 + D2, parts={"D1": D1, "D2": D2})


def _as_callable(g, p, p_left=1.5, p_right=None):
    """Callable ``g(x)`` from a GridFunction (cubic spline in ln x, power-law tails)."""
    if callable(g):
        return g
    p_right = 0.5 * (3.0 + p.lam) if p_right is None else p_right
    X = np.log(g.x_nodes)
    spline = CubicSpline(X, g.values)
    x0, x1 = g.x_min, g.x_max
    v0, v1 = g.values[0], g.values[-1]

    def fn(x):
        x = np.asarray(x, dtype=float)
        out = np.where(x < x0, v0 * (np.maximum(x, 1e-300) / x0) ** -p_left,
                       np.where(x > x1, v1 * (x / x1) ** -p_right,
                                spline(np.log(np.clip(x, x0, x1)))))
        return out[()] if out.ndim == 0 else out
    return fn


def flux_linearized(g, R: float, p: KernelParams, tol: float = 1e-9) -> FluxReport:
    """Linearised flux ``J^-_{R,lin} = I1 + I2 + I3`` for a perturbation g.

    With the D2 weight ``y`` (monomers of the particle below R leave):

        I1 = int_0^R z^{lam/2} g(z) Y1(z) dz,
             Y1 = 2 sqrt(R) - 2z/sqrt(R) - 2 sqrt(R-z) + 2z/sqrt(R-z),
        I2 = 2 sqrt(R) int_R^inf z^{lam/2} g(z) dz,
        I3 = (2/sqrt(R)) int_0^R y^{1+lam/2} g(y) dy.

    I1 is evaluated with ``z = R - u^2``, which makes ``Y1 dz`` smooth.
    """
    lam = p.lam
    gf = _as_callable(g, p)
    sR = np.sqrt(R)
    kw = dict(epsabs=0.0, epsrel=tol, limit=400)

    def i1(u):
        z = R - u * u
        # Y1(z) * 2u with the (R-z)^{-1/2} factor cancelled
        y1 = 2 * u * (2 * sR - 2 * z / sR - 2 * u) + 4 * z
        return z ** (0.5 * lam) * gf(z) * y1

    I1 = integrate.quad(i1, 0.0, sR, **kw)[0]

    def log_integral(fn):
        # s = |ln(z/R)|; beyond s = 600 admissible g has decayed far below tol
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            safe = lambda s: np.nan_to_num(fn(s), nan=0.0, posinf=0.0, neginf=0.0)
            return sum(integrate.quad(safe, a, b, **kw)[0] for a, b in ((0.0, 40.0), (40.0, 600.0)))

    I2 = 2 * sR * log_integral(lambda s: (R * np.exp(s)) ** (1 + 0.5 * lam) * gf(R * np.exp(s)))
    I3 = 2 / sR * log_integral(lambda s: (R * np.exp(-s)) ** (2 + 0.5 * lam) * gf(R * np.exp(-s)))
    return FluxReport(R=R, J_minus=I1 + I2 + I3, I1=I1, I2=I2, I3=I3)


def mass_up_to(g: GridFunction, R: float, p_left: float = 1.5) -> float:
    """``int_0^R x g dx`` on the grid (linear interpolation at R) plus the left tail."""
    x, v = g.x_nodes, g.values
    X = np.log(x)
    XR = np.log(R)
    keep = X < XR
    Xs = np.concatenate([X[keep], [XR]])
    vs = np.concatenate([v[keep], [np.interp(XR, X, v)]])
    xs = np.exp(Xs)
    core = np.trapezoid(xs * xs * vs, Xs)
    left = v[0] * x[0] ** 2 / (2.0 - p_left)
    return float(core + left)


def mass_balance(traj: Trajectory, p: KernelParams, R: float = 10.0) -> dict:
    """Residual of ``int_0^R x g(0) = int_0^t J ds + int_0^R x g(t)`` along a trajectory.

    The time integral uses the trapezoid rule over the stored checkpoints.
    Returns the residual relative to the initial mass below R (absolute
    when that mass is zero), with the
    per-checkpoint fluxes.
    """
    times = np.asarray(traj.times, dtype=float)
    fluxes = np.array([flux_linearized(s, R, p, tol=1e-8).J_minus for s in traj.states])
    m0 = mass_up_to(traj.states[0], R)
    mt = mass_up_to(traj.states[-1], R)
    outflow = np.trapezoid(fluxes, times)
    resid = m0 - outflow - mt
    rel = resid / m0 if m0 != 0 else resid
    return {"R": R, "residual": float(rel), "initial_mass": m0, "final_mass": mt,
            "outflow": float(outflow), "times": times.tolist(), "fluxes": fluxes.tolist()}

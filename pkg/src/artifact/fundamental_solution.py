"""Fundamental solution in Fourier variables, its inversion and asymptotic profiles.

Conventions: ``X = ln x`` and ``G(t, X) = g(t, e^X)`` for the solution with
unit initial mass at ``x = 1``; mass integrals carry the weight ``e^{2X}``
(``x g dx = x^2 g dX``).

The Fourier transform is

    Ghat(t, xi) = P int_{Im y = b_y} V(xi)/V(y) t^{2i(xi-y)/(lam-1)}
                  Gamma(-2i(xi-y)/(lam-1)) dy,
    P = 1/(pi sqrt(2 pi) (lam-1)),

with ``1 < b_y < Im xi``; the pole of the Gamma factor at ``y = xi``
contributes exactly ``1/sqrt(2 pi)`` when the line is moved above ``xi``.
"""
from __future__ import annotations

import csv
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .complex_special import gamma, loggamma
from .quadrature import residue_by_circle
from .wiener_hopf import ConditioningWarning, WienerHopfFactor, singularities_between

__all__ = [
    "GhatEvaluation",
    "ProfileTable",
    "TailFit",
    "NoPlateauError",
    "RealnessError",
    "ghat_prefactor",
    "eval_Ghat",
    "eval_Ghat_descent",
    "ghat_line",
    "eval_G",
    "default_lines",
    "default_xi_grid",
    "small_time_profile",
    "small_time_closed_form",
    "small_time_candidates",
    "large_time_profile",
    "large_time_constants",
    "finite_time_tails",
    "tail_residue_coefficients",
    "rescale_fundamental",
]

SQRT_2PI = np.sqrt(2.0 * np.pi)


class NoPlateauError(RuntimeError):
    """Tail fit residual exceeds the allowed level."""


class RealnessError(RuntimeError):
    """Inverse transform has a significant imaginary part."""


@dataclass(frozen=True)
class GhatEvaluation:
    t: float
    xi: complex
    value: complex
    error_estimate: float


@dataclass
class ProfileTable:
    abscissae: np.ndarray
    values: np.ndarray
    regime: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.abscissae = np.asarray(self.abscissae, dtype=float)
        self.values = np.asarray(self.values)
        if self.regime not in ("small_time", "large_time", "finite_time_tail"):
            raise ValueError(f"unknown regime {self.regime!r}")
        if np.any(np.diff(self.abscissae) <= 0):
            raise ValueError("abscissae must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("profile values must be finite")

    def to_csv(self, path, columns: dict | None = None) -> None:
        """Write the table; ``columns`` adds extra named columns of equal length."""
        columns = columns or {}
        with open(path, "w", newline="") as fh:
            fh.write(f"# regime={self.regime}\n")
            for k in sorted(self.meta):
                fh.write(f"# {k}={self.meta[k]}\n")
            wr = csv.writer(fh)
            names = ["abscissa", "value"] + list(columns)
            wr.writerow(names)
            for i, a in enumerate(self.abscissae):
                v = self.values[i]
                row = [repr(float(a)), repr(float(np.real(v)))]
                row += [repr(float(np.real(columns[c][i]))) for c in columns]
                wr.writerow(row)


def ghat_prefactor(lam: float) -> float:
    return 1.0 / (np.pi * SQRT_2PI * (lam - 1.0))


def _ghat_step(t, dist, lam):
    # trapezoid step: pole distance and the t-power oscillation both limit it
    omega = 2.0 * abs(np.log(t)) / (lam - 1.0)
    return 2.0 * np.pi * dist / (35.0 + omega * dist)


def eval_Ghat(t: float, xi: complex, w: WienerHopfFactor, tol: float = 1e-8,
              b_y: float | None = None) -> GhatEvaluation:
    """``Ghat(t, xi)`` by the trapezoid rule on ``Im y = b_y``.

    The integrand is analytic in a band around the line and decays like
    ``exp(-pi |Re y| /(2(lam-1)))``, so the rule converges geometrically; the
    reported error is the difference to the rule with twice the step.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    xi = complex(xi)
    lam = w.lam
    if b_y is None:
        b_y = 0.5 * (xi.imag + 1.0)
    if not (1.0 < b_y < xi.imag):
        raise ValueError(f"b_y must lie in (1, Im xi) = (1, {xi.imag}), got {b_y}")
    dist = min(xi.imag - b_y, b_y - 1.0)
    h = _ghat_step(t, dist, lam)
    W = 80.0 * (lam - 1.0) / np.pi + 5.0 + 2.0 * abs(np.log(t))
    while True:
        N = 2 * int(np.ceil(W / h)) + 1
        a0 = xi.real - h * (N - 1) / 2
        lvy = w.log_V_line(b_y, a0, h, N)
        y = a0 + h * np.arange(N) + 1j * b_y
        Z = xi - y
        arg = -2j * Z / (lam - 1.0)
        integrand = np.exp(w.log_V(xi) - lvy - arg * np.log(t) + loggamma(arg))
        P = ghat_prefactor(lam)
        full = P * h * np.sum(integrand)
        half = P * 2 * h * np.sum(integrand[::2])
        edge = P * h * (abs(integrand[0]) + abs(integrand[-1]))
        err = abs(full - half) + edge
        if edge < 0.1 * max(tol, 1e-300) or W > 1e4:
            break
        W *= 1.5
    return GhatEvaluation(float(t), xi, complex(full), float(err))


def _ghat_log_integrand(t, xi, y, lvx, lvy, lam):
    arg = -2j * (xi - y) / (lam - 1.0)
    return lvx - lvy - arg * np.log(t) + loggamma(arg)


def eval_Ghat_descent(t: float, xi: complex, w: WienerHopfFactor,
                      tol: float = 1e-10, b: float | None = None) -> GhatEvaluation:
    """``Ghat(t, xi)`` with the y-line lowered through the saddle.

    On the standard line the y-integral is O(1) while ``Ghat`` decays like
    ``exp(-a t sqrt|xi|)``, so the direct sum stalls at round-off for large
    ``|Re xi|``. Lowering the line to the height that minimises the peak of
    the integrand removes the cancellation; the zeros of V crossed on the way
    contribute residues, which are added by circle quadrature.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    xi = complex(xi)
    lam, d = w.lam, w.delta
    lvx = w.log_V(xi)
    count = int(np.ceil((t * np.sqrt(abs(xi)) + 8.0) / d)) + 8
    # every height where a lower-family zero or pole can sit
    raw = sorted({round(h, 12) for k in range(1, count + 1)
                  for h in (0.5 * (1 + lam) - k * d, 1 + 0.5 * lam - k * d)})
    sing = singularities_between(w, raw[0], 1.0)
    heights = sorted({round(s.location.imag, 12) for s in sing})
    zeros = [s.location for s in sing if s.kind == "zero"]
    cands = [0.5 * (xi.imag + 1.0)]
    cands += sorted((0.5 * (a + b) for a, b in zip(raw[:-1], raw[1:]) if b <= 1.0 + 1e-12),
                    reverse=True)

    def peak(b):
        a0 = xi.real - 20.0
        y = a0 + 0.1 * np.arange(401) + 1j * b
        li = _ghat_log_integrand(t, xi, y, lvx, w.log_V_line(b, a0, 0.1, 401), lam)
        return float(np.max(li.real))

    if b is None:
        best_b, best_m = cands[0], peak(cands[0])
        for bc in cands[1:]:
            m = peak(bc)
            if m > best_m + 5.0:
                break
            if m < best_m:
                best_b, best_m = bc, m
        b = best_b
    dist = min([abs(b - hh) for hh in raw] + [xi.imag - b])
    h = min(0.05, 2.0 * np.pi * dist / 40.0)
    W = 20.0
    while True:
        N = 2 * int(np.ceil(W / h)) + 1
        a0 = xi.real - h * (N - 1) / 2
        y = a0 + h * np.arange(N) + 1j * b
        li = _ghat_log_integrand(t, xi, y, lvx, w.log_V_line(b, a0, h, N), lam)
        m = float(np.max(li.real))
        s = np.exp(li - m)
        edge = abs(s[0]) + abs(s[-1])
        if edge < 1e-3 * tol or W > 1e3:
            break
        W *= 1.5
    P = ghat_prefactor(lam)
    full = h * np.sum(s)
    half = 2.0 * h * np.sum(s[::2])
    value = P * full * np.exp(m)
    err = P * (abs(full - half) + h * edge) * np.exp(m)

    def f(z):
        z = np.atleast_1d(z)
        with warnings.catch_warnings():
            # the residue circles sit inside the guard radius by design
            warnings.simplefilter("ignore", ConditioningWarning)
            lv = np.array([w.log_V(zz) for zz in z])
        return np.exp(_ghat_log_integrand(t, xi, z, lvx, lv, lam))

    crossed = [z for z in zeros if b < z.imag < 0.5 * (xi.imag + 1.0)]
    for z in crossed:
        r = 0.4 * min([abs(z.imag - hh) for hh in heights if abs(z.imag - hh) > 1e-9]
                      + [abs(z.imag - b)])
        # int_upper = int_lower - 2 pi i Res for a pole between the lines
        value -= P * 2j * np.pi * residue_by_circle(f, z, r, nodes=32)
    return GhatEvaluation(float(t), xi, complex(value), float(err))


def ghat_line(t: float, b_xi: float, b_y: float, h: float, N: int,
              w: WienerHopfFactor, W: int | None = None) -> np.ndarray:
    """``Ghat(t, j h + i b_xi)`` for ``j = 0..N-1`` with a shared y-grid of step h.

    With both lines sampled at step h the y-sum is a discrete convolution in
    the real parts; it is evaluated block-wise with a per-block scale so the
    factor ``V(xi)/V(y)`` never overflows.
    """
    lam = w.lam
    kappa = np.pi / (2.0 * (lam - 1.0))
    if W is None:
        W = int(np.ceil((30.0 * (lam - 1.0) + 5.0) / h))
    lvx = w.log_V_line(b_xi, 0.0, h, N)
    lvy = w.log_V_line(b_y, -W * h, h, N + 2 * W)
    m = np.arange(-W, W + 1)
    Z = m * h + 1j * (b_xi - b_y)
    arg = -2j * Z / (lam - 1.0)
    K = np.exp(-arg * np.log(t) + loggamma(arg))
    P = ghat_prefactor(lam)
    B = max(8, int(np.floor(min(300.0 / kappa, 40.0) / h)))
    out = np.empty(N, dtype=complex)
    for i0 in range(0, N, B):
        i1 = min(N, i0 + B)
        ref = lvx[(i0 + i1) // 2].real
        ex = np.exp(lvx[i0:i1] - ref)
        ey = np.exp(ref - lvy[i0:i1 + 2 * W])
        out[i0:i1] = P * h * ex * np.convolve(ey, K, mode="valid")
    return out


def default_lines(lam: float) -> tuple[float, float]:
    """Heights of the xi-line (strip midpoint) and of the lowered y-line."""
    b_xi = 0.5 * (1.5 + 0.5 * (3.0 + lam))
    return b_xi, 0.5 * (b_xi + 1.0)


def default_xi_grid(t: float) -> tuple[float, int]:
    """Step and length of the xi-grid; |Ghat| decays like exp(-t sqrt(2 pi |xi|))."""
    h = 0.05 if t >= 0.2 else 0.1
    umax = max((24.0 / (t * SQRT_2PI)) ** 2, 60.0)
    umax = min(umax, 1e5)
    return h, int(np.ceil(umax / h))


def _inverse_sum(X, xi, weights, gh):
    """``2/sqrt(2pi) Re sum_j weights_j e^{i X xi_j} gh_j`` in chunks of X."""
    out = np.empty(X.shape, dtype=float)
    wg = weights * gh
    for s in range(0, X.size, 64):
        ph = np.exp(1j * np.outer(X[s:s + 64], xi))
        out[s:s + 64] = 2.0 / SQRT_2PI * np.real(ph @ wg)
    return out


def eval_G(t: float, X, w: WienerHopfFactor, tol: float = 1e-8, method: str = "auto",
           b_xi: float | None = None, b_y: float | None = None, h: float | None = None,
           N: int | None = None, check_real: bool = False, return_info: bool = False):
    """``G(t, X) = (1/sqrt(2 pi)) int_{Im xi = b_xi} e^{i X xi} Ghat(t, xi) dxi``.

    The trapezoid sum runs over ``Re xi >= 0`` and uses
    ``Ghat(-conj xi) = conj Ghat(xi)``. ``method='by_parts'`` evaluates the
    twice-integrated-by-parts form with central differences; it agrees with
    the direct sum to ``O((X h)^2)`` and is offered as a cross-check only, so
    ``'auto'`` always selects the direct sum. ``check_real`` evaluates the
    ``Re xi < 0`` half independently and raises :class:`RealnessError` if
    the imaginary part of the two-sided sum exceeds ``10 tol`` relative.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    if method not in ("auto", "direct", "by_parts"):
        raise ValueError(f"unknown method {method!r}")
    lam = w.lam
    dbx, dby = default_lines(lam)
    b_xi = dbx if b_xi is None else b_xi
    b_y = dby if b_y is None else b_y
    dh, dN = default_xi_grid(t)
    h = dh if h is None else h
    N = dN if N is None else N
    X = np.atleast_1d(np.asarray(X, dtype=float))
    t0 = time.perf_counter()
    gh = ghat_line(t, b_xi, b_y, h, N, w)
    xi = h * np.arange(N) + 1j * b_xi
    chosen = "direct" if method == "auto" else method
    if chosen == "direct":
        weights = np.ones(N)
        weights[0] = 0.5
        vals = h * _inverse_sum(X, xi, weights, gh)
    else:
        # second difference on the symmetric extension gh[-1] = conj gh[1]
        ext = np.concatenate([[np.conj(gh[1])], gh, [0.0]])
        d2 = (ext[2:] - 2 * ext[1:-1] + ext[:-2]) / h**2
        weights = np.ones(N)
        weights[0] = 0.5
        out = np.empty(X.shape, dtype=float)
        for i, x_ in enumerate(X):
            ph = np.exp(1j * x_ * xi) - 1.0
            out[i] = -2.0 / SQRT_2PI * h * np.real(np.sum(weights * ph * d2)) / x_**2
        vals = out
    info = {"method": chosen, "h": h, "N": N, "b_xi": b_xi, "b_y": b_y,
            "tail": float(abs(gh[-1])), "seconds": time.perf_counter() - t0}
    if check_real:
        ghl = ghat_line_negative(t, b_xi, b_y, h, N, w)
        xil = -h * np.arange(N) + 1j * b_xi
        wts = np.ones(N)
        wts[0] = 0.5
        two = np.array([h / SQRT_2PI * (np.exp(1j * x_ * xi) @ (wts * gh)
                                        + np.exp(1j * x_ * xil) @ (wts * ghl)) for x_ in X])
        rel = np.abs(two.imag) / np.maximum(np.abs(two.real), 1e-300)
        info["imag_rel"] = float(np.max(rel))
        if np.any(rel > 10 * tol):
            raise RealnessError(f"relative imaginary part {np.max(rel):.3e} exceeds {10 * tol:.1e}")
    return (vals, info) if return_info else vals


def ghat_line_negative(t, b_xi, b_y, h, N, w: WienerHopfFactor):
    """``Ghat(t, -j h + i b_xi)`` computed directly (no symmetry)."""
    lam = w.lam
    W = int(np.ceil((30.0 * (lam - 1.0) + 5.0) / h))
    a0 = -(N - 1) * h
    lvx = w.log_V_line(b_xi, a0, h, N)
    lvy = w.log_V_line(b_y, a0 - W * h, h, N + 2 * W)
    m = np.arange(-W, W + 1)
    Z = m * h + 1j * (b_xi - b_y)
    arg = -2j * Z / (lam - 1.0)
    K = np.exp(-arg * np.log(t) + loggamma(arg))
    out = np.empty(N, dtype=complex)
    for i in range(N):
        ref = lvx[i].real
        out[i] = np.exp(lvx[i] - ref) * np.sum(np.exp(ref - lvy[i:i + 2 * W + 1][::-1]) * K)
    return (ghat_prefactor(lam) * h * out)[::-1]


# -- small-time profile ----------------------------------------------------------

def small_time_profile(chi, tol: float = 1e-10):
    """``lim t^2 G(t, t^2 chi) = (1/2pi) int e^{i eta chi} e^{-2 sqrt(pi i eta)} d eta``.

    Folded onto ``eta > 0`` this is
    ``(1/pi) int_0^inf e^{-a} [cos(eta chi) cos a + sin(eta chi) sin a] d eta``
    with ``a = sqrt(2 pi eta)``, evaluated by Fourier-weighted quadrature.
    """
    chi_arr = np.atleast_1d(np.asarray(chi, dtype=float))
    out = np.empty(chi_arr.shape)
    for i, c in enumerate(chi_arr):
        out[i] = _small_time_point(c, tol)
    return out[0] if np.ndim(chi) == 0 else out


def _small_time_point(c, tol):
    def amp_cos(eta):
        a = np.sqrt(2.0 * np.pi * eta)
        return np.exp(-a) * np.cos(a)

    def amp_sin(eta):
        a = np.sqrt(2.0 * np.pi * eta)
        return np.exp(-a) * np.sin(a)

    if c == 0.0:
        val, _ = integrate.quad(amp_cos, 0.0, np.inf, epsabs=tol, limit=500)
        return val / np.pi
    s = np.sign(c)
    wc, _ = integrate.quad(amp_cos, 0.0, np.inf, weight="cos", wvar=abs(c), epsabs=tol, limlst=200)
    ws, _ = integrate.quad(amp_sin, 0.0, np.inf, weight="sin", wvar=abs(c), epsabs=tol, limlst=200)
    return (wc + s * ws) / np.pi


def small_time_closed_form(chi):
    """``chi^{-3/2} e^{-pi/chi}`` for ``chi > 0``, 0 otherwise."""
    chi = np.asarray(chi, dtype=float)
    pos = chi > 0
    safe = np.where(pos, chi, 1.0)
    out = np.where(pos, safe**-1.5 * np.exp(-np.pi / safe), 0.0)
    return out[()] if out.ndim == 0 else out


def small_time_candidates(chi) -> dict:
    """Alternative closed forms, for comparison with the oracle."""
    chi = np.asarray(chi, dtype=float)
    pos = chi > 0
    safe = np.where(pos, chi, 1.0)
    return {
        "exp_of_power": np.where(pos, (2.0 / np.pi) * np.exp(-np.pi / safe**1.5), 0.0),
        "pi_times_power": np.where(pos, np.pi * safe**-1.5 * np.exp(-np.pi / safe), 0.0),
        "power": small_time_closed_form(chi),
    }


# -- large-time profile -----------------------------------------------------------

def _V_or_zero_inverse(w, z):
    """``1/V(z)``, exactly 0 at a pole of V."""
    if w.net_order(z) < 0:
        return 0.0
    return 1.0 / w.eval_V(z)


def large_time_profile(theta, w: WienerHopfFactor, b: float | None = None,
                       h: float | None = None, U: float = 60.0):
    """``Psi_1(theta)`` with ``t^{-2/(lam-1)} G(t, theta - 2 ln t/(lam-1)) -> Psi_1(theta)``.

    ``Psi_1 = -1/(2 pi^2 (lam-1) V((lam+1)i/2)) int e^{i xi theta} V(xi)
    Gamma(2i(i-xi)/(lam-1)) dxi`` on a line inside the strip. When
    ``(lam+1)i/2`` is a pole of V (``1/(lam-1)`` an integer) the profile
    vanishes identically.
    """
    lam = w.lam
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    inv = _V_or_zero_inverse(w, 0.5j * (lam + 1.0))
    if inv == 0.0:
        out = np.zeros(th.shape)
        return out[0] if np.ndim(theta) == 0 else out
    lo, hi = 1.5, 0.5 * (3.0 + lam)
    b = 0.5 * (lo + hi) if b is None else b
    dist = min(b - lo, hi - b)
    h = 2.0 * np.pi * dist / 35.0 if h is None else h
    N = int(np.ceil(U / h))
    lv = w.log_V_line(b, 0.0, h, N)
    xi = h * np.arange(N) + 1j * b
    wts = np.ones(N)
    wts[0] = 0.5
    integ = np.exp(lv + loggamma(2j * (1j - xi) / (lam - 1.0))) * wts
    s = 2.0 * h * np.real(np.exp(1j * np.outer(th, xi)) @ integ)
    out = np.real(-s * inv / (2.0 * np.pi**2 * (lam - 1.0)))
    return out[0] if np.ndim(theta) == 0 else out


def large_time_constants(w: WienerHopfFactor) -> dict:
    """Limits of ``Psi_1 e^{3 theta/2}`` (theta -> -inf) and ``Psi_1 e^{(3+lam) theta/2}``.

    ``derived_*`` follow from the residues of V at ``3i/2`` and ``(3+lam)i/2``;
    ``alternative_*`` are other closed forms, kept for comparison.
    """
    lam = w.lam
    inv = _V_or_zero_inverse(w, 0.5j * (lam + 1.0))
    Va = w.eval_V((1.0 + 0.5 * lam) * 1j)
    V2 = w.eval_V(2j)
    g1 = gamma(1.0 / (lam - 1.0))
    g2 = gamma((lam + 1.0) / (lam - 1.0))
    return {
        "derived_C1": complex(-g1 * Va * inv / (np.pi * (lam - 1.0))),
        "derived_C2": complex(-g2 * V2 * inv / (4.0 * np.pi**2 * (lam - 1.0))),
        "alternative_C1": complex((2j / (lam - 1.0)) * Va * inv),
        "alternative_C2": complex(-g2 * V2 * inv / (2j * np.pi)),
    }


# -- finite-time tails ---------------------------------------------------------------

@dataclass
class TailFit:
    t: float
    left: float
    right: float
    left_slope: float
    right_slope: float
    left_residual: float
    right_residual: float
    left_residue: float
    right_residue: float
    ratio_right: float


def _residue_line_integral(w, t, xi0, b_y, W=25.0):
    lam = w.lam
    dist = min(xi0.imag - b_y, 10.0)
    h = 2.0 * np.pi * dist / 40.0
    N = int(2 * W / h) + 1
    a0 = xi0.real - W
    lvy = w.log_V_line(b_y, a0, h, N)
    y = a0 + h * np.arange(N) + 1j * b_y
    Z = xi0 - y
    return h * np.sum(np.exp(-lvy + (2j * Z / (lam - 1.0)) * np.log(t)
                             + loggamma(-2j * Z / (lam - 1.0))))


def tail_residue_coefficients(t: float, w: WienerHopfFactor) -> tuple[float, float]:
    """Tail coefficients from the poles of Ghat at ``3i/2`` and ``(3+lam)i/2``.

    Moving the xi-line past a pole ``xi_0`` of V leaves
    ``+-i sqrt(2 pi) Res(V, xi_0) e^{i X xi_0} I(t, xi_0)``, with ``I`` the
    y-integral of ``Ghat`` stripped of ``V(xi)``.
    """
    lam = w.lam
    P = ghat_prefactor(lam)
    R0 = 1j * w.eval_V((1.0 + 0.5 * lam) * 1j)
    R1 = w.eval_V(2j) / (4j * np.pi)
    left = -1j * SQRT_2PI * R0 * P * _residue_line_integral(w, t, 1.5j, 1.2)
    right = 1j * SQRT_2PI * R1 * P * _residue_line_integral(w, t, 0.5j * (3 + lam), 1.6)
    return float(left.real), float(right.real)


def _plateau(X, Gv, rate, next_rate):
    """Fit ``G e^{rate X} = A + B e^{next_rate X}`` and a free log-slope."""
    y = Gv * np.exp(rate * X)
    M = np.column_stack([np.ones_like(X), np.exp(next_rate * X)])
    coef, *_ = np.linalg.lstsq(M, y, rcond=None)
    resid = np.max(np.abs(M @ coef - y)) / max(abs(coef[0]), 1e-300)
    with np.errstate(invalid="ignore", divide="ignore"):
        slope = np.polyfit(X, np.log(np.abs(Gv)), 1)[0]
    return float(coef[0]), float(slope), float(resid)


def finite_time_tails(t: float, w: WienerHopfFactor, left_range=(-8.0, -5.0),
                      right_range=(10.0, 14.0), n: int = 13, max_residual: float = 0.1) -> TailFit:
    """Coefficients of ``e^{-3X/2}`` (X -> -inf) and ``e^{-(3+lam)X/2}`` (X -> +inf).

    Plateau fits of ``G e^{3X/2}`` and ``G e^{(3+lam)X/2}`` include the next
    exponential, which lies ``(lam-1)/2`` further along in both tails.
    """
    if not (0 < t <= 1):
        raise ValueError("t must lie in (0, 1]")
    lam = w.lam
    d = w.delta
    XL = np.linspace(*left_range, n)
    XR = np.linspace(*right_range, n)
    G = eval_G(t, np.concatenate([XL, XR]), w)
    GL, GR = G[:n], G[n:]
    aL, sL, rL = _plateau(XL, GL, 1.5, d)
    aR, sR, rR = _plateau(XR, GR, 0.5 * (3 + lam), -d)
    if max(rL, rR) > max_residual:
        raise NoPlateauError(f"tail fit residuals {rL:.3g}, {rR:.3g} exceed {max_residual}")
    resL, resR = tail_residue_coefficients(t, w)
    ratio = w.eval_V(2j) / (4.0 * np.pi * w.eval_V((1.0 + 0.5 * lam) * 1j))
    return TailFit(t, aL, aR, sL, sR, rL, rR, resL, resR, float(np.real(ratio)))


# -- self-similar rescaling ---------------------------------------------------------

def rescale_fundamental(t: float, x, x0: float, w: WienerHopfFactor, **kw):
    """``g(t, x, x0) = (1/x0) G(t x0^{(lam-1)/2}, ln(x/x0))``."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0) or x0 <= 0:
        raise ValueError("x and x0 must be positive")
    ts = t * x0 ** (0.5 * (w.lam - 1.0))
    vals = eval_G(ts, np.log(x / x0), w, **kw) / x0
    return vals[()] if np.ndim(vals) == 0 else vals

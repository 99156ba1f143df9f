"""Complex Gamma machinery in log space.

All routines accept scalars or numpy arrays. The branch of ``log Gamma`` is
the analytic continuation from the positive real axis with the cut along the
negative real axis, i.e. the convention of mpmath and ``scipy.special.loggamma``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PoleError",
    "DomainError",
    "IndeterminateError",
    "LogGammaResult",
    "loggamma",
    "log_gamma",
    "gamma",
    "gamma_ratio",
    "log_gamma_ratio",
    "stirling_correction",
    "is_gamma_pole",
]

LOG_2PI_HALF = 0.5 * np.log(2.0 * np.pi)
LOG_PI = np.log(np.pi)
EPS = np.finfo(float).eps

# B_{2k} / (2k (2k-1)) for k = 1..9
_STIRLING = np.array([
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
    43867.0 / 244188.0,
])
_STIRLING_RADIUS = 15.0


class PoleError(ValueError):
    """Argument sits on a pole of Gamma."""


class DomainError(ValueError):
    """Argument outside the domain of an asymptotic formula."""


class IndeterminateError(ValueError):
    """Both numerator and denominator of a Gamma ratio are poles."""


@dataclass(frozen=True)
class LogGammaResult:
    """``log Gamma(z)`` split into modulus and argument."""

    log_modulus: np.ndarray | float
    argument: np.ndarray | float

    @property
    def value(self):
        return self.log_modulus + 1j * self.argument

    def exp(self):
        return np.exp(self.value)


def is_gamma_pole(z, rtol: float = 8.0 * EPS) -> np.ndarray | bool:
    """True where ``z`` is within round-off of a non-positive integer."""
    z = np.asarray(z, dtype=complex)
    n = np.round(z.real)
    tol = rtol * np.maximum(1.0, np.abs(z))
    hit = (n <= 0) & (np.abs(z.real - n) <= tol) & (np.abs(z.imag) <= tol)
    return hit if hit.ndim else bool(hit)


def _stirling_series(z):
    """log Gamma for |z| >= 15 and Re z >= 0."""
    zinv = 1.0 / z
    zinv2 = zinv * zinv
    acc = np.zeros_like(z)
    for c in _STIRLING[::-1]:
        acc = acc * zinv2 + c
    return (z - 0.5) * np.log(z) - z + LOG_2PI_HALF + acc * zinv


def _loggamma_upper_right(v):
    """log Gamma on Im v >= 0, Re v >= 0.5, via upward recurrence.

    The running product of the shifted factors is tracked for sign flips of
    its imaginary part so that the accumulated argument stays continuous.
    """
    v = np.asarray(v, dtype=complex)
    r = np.abs(v)
    need = np.sqrt(np.maximum(_STIRLING_RADIUS**2 - v.imag**2, 0.0)) - v.real
    nshift = np.where(r >= _STIRLING_RADIUS, 0, np.ceil(np.maximum(need, 0.0))).astype(int)
    nmax = int(nshift.max()) if nshift.size else 0
    prod = np.ones_like(v)
    flips = np.zeros(v.shape, dtype=int)
    below = np.zeros(v.shape, dtype=bool)
    for k in range(nmax):
        active = nshift > k
        prod = np.where(active, prod * (v + k), prod)
        now_below = np.signbit(prod.imag)
        flips += (active & now_below & ~below).astype(int)
        below = now_below
    out = _stirling_series(v + nshift) - np.log(prod) - 2j * np.pi * flips
    return out


def _log_sin_pi_upper(z):
    """Continuous log sin(pi z) on the closed upper half-plane."""
    w = np.exp(2j * np.pi * z)
    return -1j * np.pi * z + np.log1p(-w) - np.log(2.0) + 0.5j * np.pi


def loggamma(z):
    """Principal-branch ``log Gamma(z)`` for complex input (vectorised).

    Poles return ``inf + 0j`` here; :func:`log_gamma` raises instead.
    """
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    lower = np.signbit(z.imag) & (z.imag != 0)
    w = np.where(lower, np.conj(z), z)
    out = np.empty_like(w)
    right = w.real >= 0.5
    if right.any():
        out[right] = _loggamma_upper_right(w[right])
    left = ~right
    if left.any():
        wl = w[left]
        # log Gamma(1-w) for w in the upper half-plane via conjugation
        refl = np.conj(_loggamma_upper_right(1.0 - np.conj(wl)))
        with np.errstate(divide="ignore", invalid="ignore"):
            out[left] = LOG_PI - _log_sin_pi_upper(wl) - refl
    out = np.where(lower, np.conj(out), out)
    # Gamma is real and positive on the positive axis
    out = np.where((z.imag == 0) & (z.real > 0), out.real + 0j, out)
    poles = is_gamma_pole(z)
    if np.any(poles):
        out = np.where(poles, np.inf + 0j, out)
    return out[0] if scalar else out


def log_gamma(z) -> LogGammaResult:
    """``log Gamma(z)`` as (log-modulus, argument); raises at poles."""
    if np.any(is_gamma_pole(z)):
        raise PoleError(f"Gamma has a pole at {z!r}")
    v = loggamma(z)
    return LogGammaResult(np.real(v), np.imag(v))


def gamma(z):
    """Complex Gamma function via ``exp(loggamma)``."""
    if np.any(is_gamma_pole(z)):
        raise PoleError(f"Gamma has a pole at {z!r}")
    return np.exp(loggamma(z))


def log_gamma_ratio(a, b):
    """``log(Gamma(a)/Gamma(b))`` with ``-inf`` where ``b`` is a pole."""
    pa = is_gamma_pole(a)
    pb = is_gamma_pole(b)
    if np.any(pa & pb):
        raise IndeterminateError("both arguments of the Gamma ratio are poles")
    if np.any(pa):
        raise PoleError("numerator of the Gamma ratio is a pole")
    with np.errstate(invalid="ignore"):
        out = loggamma(a) - loggamma(b)
    if np.any(pb):
        out = np.where(pb, -np.inf + 0j, out)
    return out


def gamma_ratio(a, b):
    """``Gamma(a)/Gamma(b)`` computed in log space; exact 0 when ``b`` is a pole."""
    pb = is_gamma_pole(b)
    lr = log_gamma_ratio(a, b)
    with np.errstate(invalid="ignore"):
        out = np.exp(lr)
    if np.any(pb):
        out = np.where(pb, 0j, out)
    return out


def stirling_correction(z, eps0: float = 1e-3):
    """``A(z) = Gamma(z) / (sqrt(2 pi) e^{-z} z^{z-1/2})``.

    Defined on the cone ``|arg z| < pi - eps0``; outside it a
    :class:`DomainError` is raised.
    """
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(np.angle(z)) >= np.pi - eps0) or np.any(z == 0):
        raise DomainError("stirling_correction needs |arg z| < pi - eps0")
    la = loggamma(z) - ((z - 0.5) * np.log(z) - z + LOG_2PI_HALF)
    out = np.exp(la)
    return out[()] if out.ndim == 0 else out

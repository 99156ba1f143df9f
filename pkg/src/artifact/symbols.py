"""Mellin symbol M(s), shifted symbol Phi(xi), their singularities and log(-Phi)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .complex_special import PoleError, is_gamma_pole, loggamma

__all__ = [
    "KernelParams",
    "Singularity",
    "SingularityCatalog",
    "BranchTracker",
    "BranchTrackingError",
    "eval_M",
    "eval_M_integral_oracle",
    "eval_M_asymptotic",
    "eval_Phi",
    "eval_Phi_asymptotic",
    "log_neg_Phi_principal",
    "log_neg_Phi",
    "catalog_singularities",
]

SQRT_PI = np.sqrt(np.pi)
LOG_2SQRT_PI = np.log(2.0 * SQRT_PI)


@dataclass(frozen=True)
class KernelParams:
    """Homogeneity exponent ``lam`` of the kernel ``(xy)^{lam/2}``."""

    lam: float = 1.5

    def __post_init__(self):
        lam = float(self.lam)
        if not (1.0 < lam < 2.0):
            raise ValueError(f"lambda must lie in (1, 2), got {lam}")
        object.__setattr__(self, "lam", lam)

    @property
    def delta(self) -> float:
        """Shift ``(lam - 1)/2`` of the functional equations."""
        return 0.5 * (self.lam - 1.0)

    @property
    def c(self) -> float:
        """Exponential rate ``4 pi/(lam - 1)`` of the Cauchy kernels."""
        return 4.0 * np.pi / (self.lam - 1.0)

    @property
    def kappa(self) -> float:
        """Decay rate ``pi/(2(lam - 1))`` of log|V| along horizontal lines."""
        return np.pi / (2.0 * (self.lam - 1.0))

    @property
    def strip(self) -> tuple[float, float]:
        """Analyticity strip of the Fourier transform, in Im xi."""
        return 1.5, 0.5 * (3.0 + self.lam)

    @property
    def beta1_window(self) -> tuple[float, float]:
        return 0.5 * (2.0 + self.lam), 0.5 * (3.0 + self.lam)


@dataclass(frozen=True)
class Singularity:
    kind: str  # "zero" or "pole"
    location: complex
    index: tuple
    order: int = 1


@dataclass
class SingularityCatalog:
    """Zeros and poles on the imaginary axis, sorted by imaginary part."""

    zeros: list = field(default_factory=list)
    poles: list = field(default_factory=list)

    def all(self) -> list:
        return sorted(self.zeros + self.poles, key=lambda s: s.location.imag)

    def locations(self, kind: str | None = None) -> np.ndarray:
        items = self.all() if kind is None else (self.zeros if kind == "zero" else self.poles)
        return np.array([s.location for s in items], dtype=complex)

    def between(self, lo: float, hi: float) -> list:
        a, b = min(lo, hi), max(lo, hi)
        return [s for s in self.all() if a < s.location.imag < b]

    def nearest_distance(self, xi: complex) -> float:
        locs = self.locations()
        return float(np.min(np.abs(locs - xi))) if locs.size else np.inf


def _as_complex(x):
    return np.asarray(x, dtype=complex)


def eval_M(s):
    """``M(s) = -2 sqrt(pi) Gamma(s)/Gamma(s - 1/2)``; exact 0 at ``s = 1/2 - n``."""
    s = _as_complex(s)
    if np.any(is_gamma_pole(s)):
        raise PoleError(f"M has a pole at {s!r}")
    zero = is_gamma_pole(s - 0.5)
    with np.errstate(invalid="ignore"):
        val = -2.0 * SQRT_PI * np.exp(loggamma(s) - loggamma(s - 0.5))
    val = np.where(zero, 0j, val)
    return val[()] if val.ndim == 0 else val


def eval_M_integral_oracle(s, tol: float = 1e-12) -> complex:
    """Beta-integral representation of M for ``Re s > 1``.

    With ``theta = e^{-u}`` the integral becomes
    ``-2(s-1) int_0^inf (1-e^{-u})^{-1/2} e^{-u(s-1)} du``; the ``u^{-1/2}``
    endpoint singularity is handled by an algebraic weight.
    """
    s = complex(s)
    if s.real <= 1.0:
        raise ValueError("the Beta integral converges only for Re s > 1")

    def smooth(u, part):
        # (1-e^{-u})^{-1/2} u^{1/2} is smooth at u = 0
        base = np.sqrt(u / -np.expm1(-u)) if u > 0 else 1.0
        v = base * np.exp(-u * (s - 1.0))
        return v.real if part == 0 else v.imag

    def tail(u, part):
        v = (-np.expm1(-u)) ** -0.5 * np.exp(-u * (s - 1.0))
        return v.real if part == 0 else v.imag

    total = 0j
    for part, unit in ((0, 1.0), (1, 1j)):
        head, e1 = integrate.quad(smooth, 0.0, 1.0, args=(part,), weight="alg",
                                  wvar=(-0.5, 0.0), epsabs=tol, epsrel=tol, limit=200)
        rest, e2 = integrate.quad(tail, 1.0, np.inf, args=(part,), epsabs=tol,
                                  epsrel=tol, limit=400)
        total += unit * (head + rest)
    return -2.0 * (s - 1.0) * total


def eval_M_asymptotic(s):
    """Two-term expansion ``-2 sqrt(pi s) (1 - 3/(8 s))``."""
    s = _as_complex(s)
    out = -2.0 * np.sqrt(np.pi * s) * (1.0 - 3.0 / (8.0 * s))
    return out[()] if out.ndim == 0 else out


def _phi_args(xi, lam):
    xi = _as_complex(xi)
    return 1j * xi + 1.0 + 0.5 * lam, 1j * xi + 0.5 * (lam + 1.0)


def eval_Phi(xi, p: KernelParams):
    """``Phi(xi) = -2 sqrt(pi) Gamma(i xi + 1 + lam/2)/Gamma(i xi + (lam+1)/2)``."""
    a, b = _phi_args(xi, p.lam)
    if np.any(is_gamma_pole(a)):
        raise PoleError(f"Phi has a pole at {xi!r}")
    zero = is_gamma_pole(b)
    with np.errstate(invalid="ignore"):
        val = -2.0 * SQRT_PI * np.exp(loggamma(a) - loggamma(b))
    val = np.where(zero, 0j, val)
    return val[()] if val.ndim == 0 else val


def eval_Phi_asymptotic(xi, p: KernelParams, order: int = 1, flip_correction: bool = False):
    """Large-|Re xi| expansion of Phi with ``Q = sgn(Re xi)``.

    ``Gamma(z+a)/Gamma(z+b) ~ z^{a-b} (1 + (a-b)(a+b-1)/(2z))`` with ``z = i xi``
    gives the first correction ``-i (1/8 + lam/4)/xi`` relative to the leading
    term. ``flip_correction=True`` flips it, for comparison with the
    opposite-sign variant.
    """
    if order not in (0, 1):
        raise ValueError("order must be 0 or 1")
    xi = _as_complex(xi)
    Q = np.sign(xi.real)
    lead = -np.sqrt(2.0 * np.pi) * (1.0 + 1j * Q) * np.sqrt(Q * xi)
    out = lead
    if order == 1:
        c = 0.125 + 0.25 * p.lam
        out = lead * (1.0 + (1j if flip_correction else -1j) * c / xi)
    return out[()] if out.ndim == 0 else out


def log_neg_Phi_principal(eta, lam: float):
    """Principal ``log(-Phi(eta))``; no pole or zero checks (hot path)."""
    a, b = _phi_args(eta, lam)
    z = LOG_2SQRT_PI + loggamma(a) - loggamma(b)
    # wrap the argument into (-pi, pi]
    ang = np.angle(np.exp(1j * z.imag))
    return z.real + 1j * ang


class BranchTrackingError(RuntimeError):
    """Argument of -Phi jumps by more than the allowed amount between nodes."""


@dataclass
class BranchTracker:
    """Continuous argument of ``-Phi`` along an ordered contour.

    The argument is anchored at the node of largest ``|Re|`` to the limit
    ``+pi/4`` (right end) or ``-pi/4`` (left end) and unwound inward. An
    interval whose principal increment exceeds ``refine_jump`` is bisected
    up to ``max_refine`` times; an unresolved increment above ``max_jump``
    raises :class:`BranchTrackingError`.
    """

    p: KernelParams
    max_jump: float = 0.5 * np.pi
    refine_jump: float = 0.25 * np.pi
    max_refine: int = 12
    refinements: int = 0

    def _increment(self, z0, z1, a0, a1, depth):
        d = np.angle(np.exp(1j * (a1 - a0)))
        if not np.isfinite(d):
            raise BranchTrackingError(f"contour meets a zero or pole of Phi between {z0} and {z1}")
        if abs(d) <= self.refine_jump:
            return d
        if depth >= self.max_refine:
            if abs(d) > self.max_jump:
                raise BranchTrackingError(
                    f"argument jump {d:.3f} between {z0} and {z1} after {depth} bisections")
            return d
        self.refinements += 1
        zm = 0.5 * (z0 + z1)
        lm = log_neg_Phi_principal(zm, self.p.lam)
        if not np.isfinite(lm):
            raise BranchTrackingError(f"contour meets a zero or pole of Phi at {zm}")
        am = np.imag(lm)
        return (self._increment(z0, zm, a0, am, depth + 1)
                + self._increment(zm, z1, am, a1, depth + 1))

    def track(self, nodes) -> np.ndarray:
        nodes = np.asarray(nodes, dtype=complex)
        if nodes.ndim != 1 or nodes.size == 0:
            raise ValueError("nodes must be a non-empty 1-D array")
        principal = log_neg_Phi_principal(nodes, self.p.lam)
        if not np.all(np.isfinite(principal)):
            raise BranchTrackingError("a contour node is a zero or pole of Phi")
        args = np.imag(principal)
        anchor = int(np.argmax(np.abs(nodes.real)))
        target = 0.25 * np.pi * (1.0 if nodes[anchor].real >= 0 else -1.0)
        steps = np.angle(np.exp(1j * np.diff(args)))
        for i in np.flatnonzero(~(np.abs(steps) <= self.refine_jump)):
            steps[i] = self._increment(nodes[i], nodes[i + 1], args[i], args[i + 1], 0)
        cum = np.concatenate([[0.0], np.cumsum(steps)])
        start = args[anchor] + 2 * np.pi * np.round((target - args[anchor]) / (2 * np.pi))
        out = start + cum - cum[anchor]
        return np.real(principal) + 1j * out


def log_neg_Phi(xi, p: KernelParams, tracker: BranchTracker | None = None):
    """Branch-tracked ``log(-Phi)`` along the ordered contour ``xi``."""
    tracker = tracker or BranchTracker(p)
    return tracker.track(xi)


def catalog_singularities(p: KernelParams, count: int) -> SingularityCatalog:
    """First ``count`` zeros ``i(n + (1+lam)/2)`` and poles ``i(1 + lam/2 + n)`` of Phi."""
    if count < 1:
        raise ValueError("count must be >= 1")
    lam = p.lam
    zeros = [Singularity("zero", complex(0.0, n + 0.5 * (1 + lam)), (n, 0)) for n in range(count)]
    poles = [Singularity("pole", complex(0.0, 1 + 0.5 * lam + n), (n, 0)) for n in range(count)]
    return SingularityCatalog(zeros=zeros, poles=poles)

"""Quadrature along horizontal lines in the complex plane.

``integrate_line`` is an adaptive Gauss-Kronrod (G7/K15) integrator with
envelope-controlled truncation. ``shift_line`` moves a line integral across
catalogued singularities and checks the residue identity. ``critical_point``
gives the saddle location used for contour placement in the small-time
regime.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .symbols import KernelParams, Singularity, SingularityCatalog

__all__ = [
    "HorizontalContour",
    "QuadResult",
    "QuadratureError",
    "EnvelopeViolation",
    "UnknownSingularityError",
    "ShiftRecord",
    "CriticalPoint",
    "gauss_kronrod_nodes",
    "integrate_interval",
    "integrate_line",
    "residue_by_circle",
    "shift_line",
    "compose_shifts",
    "phase_function",
    "critical_point",
]

# Kronrod 15-point nodes (non-negative half) and weights, with the embedded
# 7-point Gauss weights on the odd-indexed Kronrod nodes.
_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])


def gauss_kronrod_nodes():
    """Full 15-point Kronrod nodes and weights plus the 7-point Gauss weights."""
    x = np.concatenate([-_XK[:-1], _XK[::-1]])
    wk = np.concatenate([_WK[:-1], _WK[::-1]])
    wg = np.zeros(15)
    gauss_half = np.zeros(8)
    gauss_half[1::2] = _WG
    wg[:7] = gauss_half[:7]
    wg[7:] = gauss_half[::-1]
    return x, wk, wg


_X15, _W15, _W7 = gauss_kronrod_nodes()


class QuadratureError(RuntimeError):
    """Requested tolerance could not be reached within the node budget."""


class EnvelopeViolation(RuntimeError):
    """Integrand exceeds its declared decay envelope beyond the truncation."""


class UnknownSingularityError(RuntimeError):
    """Residue identity of a contour shift failed: a singularity is missing."""


@dataclass(frozen=True)
class HorizontalContour:
    """The line ``Im = height`` truncated to ``|Re| <= half_length``."""

    height: float
    half_length: float = 50.0
    node_budget: int = 300_000

    def __post_init__(self):
        if not self.half_length > 0:
            raise ValueError("half_length must be positive")

    def check_margin(self, catalog, margin: float = 1e-3) -> None:
        for z in _locations(catalog):
            if abs(z.imag - self.height) < margin and abs(z.real) <= self.half_length:
                raise ValueError(f"contour Im={self.height} passes within {margin} of {z}")


@dataclass
class QuadResult:
    value: complex
    error: float
    n_eval: int
    half_length: float
    tail_bound: float = 0.0


def _gk_panels(f, a, b):
    """Evaluate G7/K15 on panels [a_i, b_i] (complex endpoints allowed)."""
    a = np.asarray(a)
    b = np.asarray(b)
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    z = mid[:, None] + half[:, None] * _X15[None, :]
    fz = np.asarray(f(z.ravel()), dtype=complex).reshape(z.shape)
    k = half * (fz @ _W15)
    g = half * (fz @ _W7)
    err = np.abs(k - g)
    bad = ~np.isfinite(k)
    if np.any(bad):
        raise QuadratureError("integrand returned non-finite values")
    return k, err


def _adaptive(f, a, b, tol, rtol, max_panels, initial):
    edges = np.linspace(a, b, initial + 1)
    vals, errs = _gk_panels(f, edges[:-1], edges[1:])
    heap = [(-e, i, lo, hi, v) for i, (e, lo, hi, v) in enumerate(zip(errs, edges[:-1], edges[1:], vals))]
    heapq.heapify(heap)
    counter = len(heap)
    total = complex(np.sum(vals))
    err = float(np.sum(errs))
    n_eval = 15 * initial
    while err > max(tol, rtol * abs(total)):
        if len(heap) >= max_panels:
            raise QuadratureError(
                f"error {err:.3e} above tolerance after {len(heap)} panels")
        # bisect every panel carrying more than its share of the target
        share = max(tol, rtol * abs(total)) / len(heap)
        pick = []
        while heap and (not pick or -heap[0][0] > share) and len(pick) < 256:
            pick.append(heapq.heappop(heap))
        lo = np.array([p[2] for p in pick])
        hi = np.array([p[3] for p in pick])
        mid = 0.5 * (lo + hi)
        v, e = _gk_panels(f, np.concatenate([lo, mid]), np.concatenate([mid, hi]))
        n_eval += 15 * v.size
        m = len(pick)
        for j, p in enumerate(pick):
            total -= p[4]
            err += p[0]
            for child in (j, j + m):
                counter += 1
                a_c = lo[j] if child == j else mid[j]
                b_c = mid[j] if child == j else hi[j]
                heapq.heappush(heap, (-e[child], counter, a_c, b_c, v[child]))
                total += v[child]
                err += e[child]
    # recompute from scratch to avoid drift in the running sums
    total = complex(sum(p[4] for p in heap))
    err = float(sum(-p[0] for p in heap))
    return total, err, n_eval


def integrate_interval(f, a: float, b: float, tol: float = 1e-10, rtol: float = 0.0,
                       max_panels: int = 20_000, initial: int = 4) -> QuadResult:
    """Adaptive G7/K15 on a real interval; ``f`` is vectorised."""
    v, e, n = _adaptive(f, float(a), float(b), tol, rtol, max_panels, initial)
    return QuadResult(v, e, n, 0.5 * (b - a))


def _envelope_tail(envelope, T, tol):
    """Bound for ``2 int_T^inf envelope``, via the map x = T/u."""
    def g(u):
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            v = envelope(T / u) * T / u**2
        return np.where(np.isfinite(v), v, 0.0)

    res = integrate_interval(g, 0.0, 1.0, tol=tol * 1e-3, rtol=1e-6)
    return 2.0 * abs(res.value)


def _choose_truncation(envelope, tol, T0):
    T = T0
    for _ in range(200):
        if _envelope_tail(envelope, T, tol) < tol / 10.0:
            return T
        T *= 1.5
    raise QuadratureError("envelope does not decay fast enough for truncation")


def integrate_line(f: Callable, contour: HorizontalContour, tol: float = 1e-10, rtol: float = 0.0,
                   envelope: Callable | None = None, initial: int = 16) -> QuadResult:
    """Integrate ``f`` along ``Im = contour.height``.

    Parameters
    ----------
    f : callable
        Vectorised complex integrand.
    contour : HorizontalContour
        Line and default truncation.
    tol, rtol : float
        Absolute and relative targets for the reported error.
    envelope : callable, optional
        Bound ``|f(x + i height)| <= envelope(|x|)`` for large ``|x|``. When
        given, the truncation is extended until the envelope tail is below
        ``tol/10`` and the bound is checked beyond the cut.
    """
    T = contour.half_length
    tail = 0.0
    if envelope is not None:
        T = _choose_truncation(envelope, tol, T)
        tail = _envelope_tail(envelope, T, tol)
        probe = np.array([1.0, 1.25, 1.5, 2.0]) * T
        for sgn in (1.0, -1.0):
            vals = np.abs(np.asarray(f(sgn * probe + 1j * contour.height), dtype=complex))
            bound = envelope(probe) * (1.0 + 1e-6) + 1e-300
            if np.any(vals > bound):
                raise EnvelopeViolation(
                    f"|f| exceeds the declared envelope beyond T={T:.3g}")
    h = contour.height
    g = lambda x: f(x + 1j * h)  # noqa: E731
    max_panels = max(initial + 1, contour.node_budget // 15)
    v, e, n = _adaptive(g, -T, T, tol, rtol, max_panels, initial)
    return QuadResult(v, e + tail, n, T, tail)


def residue_by_circle(f: Callable, z0: complex, radius: float, nodes: int = 128) -> complex:
    """Residue of ``f`` at ``z0`` from the trapezoid rule on a small circle."""
    th = 2.0 * np.pi * np.arange(nodes) / nodes
    z = z0 + radius * np.exp(1j * th)
    vals = np.asarray(f(z), dtype=complex)
    return complex(np.mean(vals * (z - z0)))


def _locations(catalog) -> list:
    if catalog is None:
        return []
    if isinstance(catalog, SingularityCatalog):
        return [s.location for s in catalog.all()]
    out = []
    for s in catalog:
        out.append(s.location if isinstance(s, Singularity) else complex(s))
    return out


@dataclass
class ShiftRecord:
    """Outcome of moving a line integral from one height to another.

    ``crossed`` holds ``(location, contribution)`` pairs; the contribution is
    ``+2 pi i Res`` when moving up and ``-2 pi i Res`` when moving down, so
    that ``I_from = I_to + sum(contributions)``.
    """

    from_height: float
    to_height: float
    crossed: list = field(default_factory=list)
    I_from: complex = 0j
    I_to: complex = 0j
    identity_residual: float = 0.0

    @property
    def orientation(self) -> int:
        return 1 if self.to_height > self.from_height else -1

    def total_contribution(self) -> complex:
        return complex(sum(c for _, c in self.crossed))


def shift_line(f: Callable, contour: HorizontalContour, to_height: float, catalog,
               tol: float = 1e-10, envelope: Callable | None = None,
               residues: dict | None = None) -> ShiftRecord:
    """Move ``int_{contour} f`` to ``Im = to_height`` and check the residue identity.

    Residues come from ``residues`` (mapping location -> residue) when given,
    otherwise from small-circle quadrature.
    """
    target = HorizontalContour(to_height, contour.half_length, contour.node_budget)
    r_from = integrate_line(f, contour, tol / 4, envelope=envelope)
    r_to = integrate_line(f, target, tol / 4, envelope=envelope)
    locs = _locations(catalog)
    lo, hi = sorted((contour.height, to_height))
    T = max(r_from.half_length, r_to.half_length)
    crossed_locs = [z for z in locs if lo < z.imag < hi and abs(z.real) < T]
    sign = 1 if to_height > contour.height else -1
    crossed = []
    for z in crossed_locs:
        if residues is not None and z in residues:
            res = residues[z]
        else:
            others = [abs(w - z) for w in locs if w != z]
            dist = min([abs(z.imag - lo), abs(hi - z.imag)] + others)
            res = residue_by_circle(f, z, 0.45 * dist)
        crossed.append((z, sign * 2j * np.pi * res))
    rec = ShiftRecord(contour.height, to_height, crossed, r_from.value, r_to.value)
    rec.identity_residual = abs(r_from.value - r_to.value - rec.total_contribution())
    allowed = 2.0 * tol + r_from.error + r_to.error
    if rec.identity_residual > allowed:
        raise UnknownSingularityError(
            f"shift identity off by {rec.identity_residual:.3e} (allowed {allowed:.3e})")
    return rec


def compose_shifts(records: Iterable[ShiftRecord]) -> dict:
    """Net residue contributions of a chain of shifts, keyed by location.

    A round trip cancels every entry; entries with net zero are dropped.
    """
    net: dict = {}
    for rec in records:
        for z, c in rec.crossed:
            net[z] = net.get(z, 0j) + c
    return {z: c for z, c in net.items() if abs(c) > 1e-12 * (1 + abs(c))}


def phase_function(xi: complex, Z, t: float, p: KernelParams, log_V: Callable) -> complex:
    """Exponent of the rescaled small-time integrand, with ``Y = sqrt|xi| Z``.

    ``log V(xi) - log V(xi + Y) - w ln t - w + (w - 1/2) ln w``, ``w = 2iY/(lam-1)``.
    """
    Z = np.asarray(Z, dtype=complex)
    Y = np.sqrt(abs(xi)) * Z
    w = 2j * Y / (p.lam - 1.0)
    return log_V(xi) - log_V(xi + Y) - w * np.log(t) - w + (w - 0.5) * np.log(w)


@dataclass
class CriticalPoint:
    location: complex
    scale: float
    validity: bool
    newton_steps: int = 0


def critical_point(xi: complex, t: float, p: KernelParams, log_V: Callable | None = None,
                   threshold: float = 100.0, polish: bool = False) -> CriticalPoint:
    """Leading-order saddle ``Z_c = (lam-1) sqrt(2 pi) t (1 + iQ)/(2i)``.

    With ``polish=True`` and a ``log_V`` callable, one Newton step on the
    Z-derivative of :func:`phase_function` is applied (finite differences).
    """
    xi = complex(xi)
    Q = 1.0 if xi.real >= 0 else -1.0
    zc = (p.lam - 1.0) * np.sqrt(2.0 * np.pi) * t * (1.0 + 1j * Q) / 2j
    valid = abs(xi) * t * t >= threshold
    steps = 0
    if polish and log_V is not None:
        hstep = 1e-4 * max(abs(zc), 1e-3)
        ph = lambda z: phase_function(xi, z, t, p, log_V)  # noqa: E731
        f0, fp, fm = ph(zc), ph(zc + hstep), ph(zc - hstep)
        d1 = (fp - fm) / (2 * hstep)
        d2 = (fp - 2 * f0 + fm) / hstep**2
        if d2 != 0:
            zc = zc - d1 / d2
            steps = 1
    return CriticalPoint(complex(zc), float(np.sqrt(abs(xi)) * t), bool(valid), steps)

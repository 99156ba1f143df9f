"""Wiener-Hopf factor V solving V(xi) = -V(xi + i delta) Phi(xi + i delta).

``log V`` is a Cauchy-type integral of ``log(-Phi)`` along a horizontal
line ``Im eta = beta`` inside the window ``((2+lam)/2, (3+lam)/2)``:

    log V(xi) = 2/((lam-1) i) int F(eta) [k(c(xi - eta)) - r(c eta)] du,

with ``F = log(-Phi)``, ``k(w) = 1/(1 - e^w)``, ``r(w) = 1/(1 + e^{-w})`` and
``c = 4 pi/(lam-1)``. The formula holds for ``Im xi`` in ``(beta - delta, beta)``;
other points are reached by iterating the functional equation.

The regularizer ``r`` has poles at ``eta = i(2m+1) delta/2``. Moving ``beta``
across one of them multiplies V by a constant, so the gauge is pinned to the
regularizer interval containing the window midpoint and any other ``beta1``
is corrected back to it.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.signal import fftconvolve

from .complex_special import PoleError, is_gamma_pole
from .symbols import (
    BranchTracker,
    BranchTrackingError,
    KernelParams,
    Singularity,
    SingularityCatalog,
    log_neg_Phi_principal,
)

__all__ = [
    "WienerHopfFactor",
    "VPoleError",
    "NotAPoleError",
    "ExtensionLimitError",
    "ConditioningWarning",
    "eval_V",
    "eval_V_ratio",
    "extend_V",
    "log_V",
    "catalog_V_singularities",
    "singularities_between",
    "net_order",
    "residue_V",
]

CACHE_SCHEMA = "artifact.factor-cache/1"
GUARD_RADIUS = 0.05
MAX_SHIFTS = 1000


class VPoleError(PoleError):
    """Point is a pole of V."""


class NotAPoleError(ValueError):
    """Residue requested at a point that is not a pole of V."""


class ExtensionLimitError(RuntimeError):
    """Functional-equation extension needs more than the allowed number of shifts."""


class ConditioningWarning(UserWarning):
    """Evaluation close to a zero or pole of V."""


def _k(w):
    """``1/(1 - e^w)`` without overflow."""
    w = np.asarray(w, dtype=complex)
    out = np.empty_like(w)
    pos = w.real > 0
    e = np.exp(-w[pos])
    out[pos] = -e / (1.0 - e)
    out[~pos] = 1.0 / (1.0 - np.exp(w[~pos]))
    return out


def _r(w):
    """``1/(1 + e^{-w})`` without overflow."""
    w = np.asarray(w, dtype=complex)
    out = np.empty_like(w)
    neg = w.real < 0
    e = np.exp(w[neg])
    out[neg] = e / (1.0 + e)
    out[~neg] = 1.0 / (1.0 + np.exp(-w[~neg]))
    return out


@dataclass
class _Placement:
    shift: int  # number of delta-steps applied to reach the strip
    beta: float  # integration height


class WienerHopfFactor:
    """The factor V for kernel exponent ``params.lam``.

    Parameters
    ----------
    params : KernelParams
    beta1 : float, optional
        Construction height in ``((2+lam)/2, (3+lam)/2)``; defaults to the
        window midpoint (nudged off regularizer poles).
    tol : float
        Target accuracy; selects the Gauss-Legendre order per unit panel.
    validate : bool
        Cross-check the principal ``log(-Phi)`` against the branch tracker on
        the construction line.
    """

    def __init__(self, params: KernelParams | None = None, beta1: float | None = None,
                 tol: float = 1e-10, validate: bool = True):
        self.params = params or KernelParams()
        lam = self.params.lam
        self.lam = lam
        self.delta = self.params.delta
        self.c = self.params.c
        self.tol = float(tol)
        lo, hi = self.params.beta1_window
        self.window = (lo, hi)
        d = self.delta
        canon = self._nudge(0.5 * (lo + hi))
        self.beta1 = canon if beta1 is None else float(beta1)
        if not (lo < self.beta1 < hi):
            raise ValueError(f"beta1 must lie in ({lo}, {hi}), got {self.beta1}")
        if self._on_regularizer_pole(self.beta1):
            raise ValueError("beta1 sits on a pole of the regularizer")
        m = np.floor(self.beta1 / d - 0.5)
        plo = (2 * m + 1) * d / 2
        self.interval = (max(lo, plo), min(hi, plo + d))
        self.gauge_offset = self._gauge_offset(canon, self.beta1)
        self._nodes = 20 if tol >= 1e-12 else 30
        self._xg, self._wg = leggauss(self._nodes)
        self.cache: dict = {}
        self.zero_pole_catalog = catalog_V_singularities(self, 8)
        if validate:
            self._validate_branch()

    # -- construction helpers -------------------------------------------------
    def _on_regularizer_pole(self, b, eps=1e-9):
        d = self.delta
        return abs((b / d - 0.5) - np.round(b / d - 0.5)) < eps

    def _nudge(self, b):
        if self._on_regularizer_pole(b, 1e-3):
            b += self.delta / 4
        return b

    def _gauge_offset(self, canon, beta1):
        """Constant added to log V so that V does not depend on the regularizer interval."""
        d = self.delta
        m0 = np.floor(canon / d - 0.5)
        m1 = np.floor(beta1 / d - 0.5)
        off = 0j
        # each pole (2m+1) d/2 between the two lines contributes log(-Phi) there
        for m in range(int(min(m0, m1)) + 1, int(max(m0, m1)) + 1):
            eta = 1j * (2 * m + 1) * d / 2
            val = log_neg_Phi_principal(eta, self.lam)
            off += -val if m1 > m0 else val
        return complex(off)

    def _validate_branch(self):
        u = np.linspace(-200.0, 200.0, 4001)
        for beta in (self.interval[0] + 1e-3, self.beta1, self.interval[1] - 1e-3):
            eta = u + 1j * beta
            tracked = BranchTracker(self.params).track(eta)
            principal = log_neg_Phi_principal(eta, self.lam)
            if np.max(np.abs(tracked.imag - principal.imag)) > 1e-9:
                raise BranchTrackingError(
                    f"principal log(-Phi) is not continuous on Im eta = {beta}")

    def F(self, eta):
        """Principal ``log(-Phi(eta))``."""
        return log_neg_Phi_principal(eta, self.lam)

    def place(self, b: float) -> _Placement:
        """Shift count k and height beta with ``b + k delta`` in ``(beta - delta, beta)``."""
        d = self.delta
        lo, hi = self.interval
        margin = min(d / 8, (hi - lo) / 4)
        best = None
        for k in range(int(np.floor((lo - b) / d)) - 2, int(np.ceil((hi - b) / d)) + 3):
            base = b + k * d
            beta = min(max(base + d / 2, lo + margin), hi - margin)
            if not (base < beta < base + d):
                continue
            score = abs(beta - (base + d / 2))
            if best is None or score < best[0]:
                best = (score, k, beta)
        if best is None:
            raise RuntimeError(f"no admissible strip for Im xi = {b}")
        return _Placement(best[1], best[2])

    # -- direct integral ------------------------------------------------------
    def _panels(self, centers, beta, imag_parts):
        """Gauss-Legendre nodes on panels graded around the given real centres."""
        c = self.c
        L = 45.0 / c + 1.0
        lo = min(centers) - L
        hi = max(centers) + L
        bps = {lo, hi}
        for cen, s0 in zip(centers, imag_parts):
            s = s0
            bps.add(cen)
            while s < L:
                bps.add(cen + s)
                bps.add(cen - s)
                s *= 2
        bps = np.array(sorted(x for x in bps if lo <= x <= hi))
        pts = [bps[0]]
        for x0, x1 in zip(bps[:-1], bps[1:]):
            m = int(np.ceil((x1 - x0) / 1.0))
            pts.extend(np.linspace(x0, x1, m + 1)[1:])
        pts = np.asarray(pts)
        A = pts[:-1, None]
        B = pts[1:, None]
        u = ((B - A) / 2 * self._xg + (A + B) / 2).ravel()
        w = ((B - A) / 2 * self._wg).ravel()
        return u + 1j * beta, w

    def _strip_distance(self, xi, beta):
        d1 = beta - xi.imag
        return min(d1, self.delta - d1, 0.5)

    def _origin_distance(self, beta, regularizer=True):
        """Distance from the line to the singularities of F (and r) above Re eta = 0."""
        lo, hi = self.window
        dist = min(beta - lo, hi - beta, 0.5)
        if regularizer:
            d = self.delta
            m = np.floor(beta / d - 0.5)
            dist = min(dist, beta - (2 * m + 1) * d / 2, (2 * m + 3) * d / 2 - beta)
        return dist

    def _log_V_strip(self, xi: complex, beta: float) -> complex:
        eta, w = self._panels([0.0, xi.real], beta,
                              [self._origin_distance(beta), self._strip_distance(xi, beta)])
        f = self.F(eta) * (_k(self.c * (xi - eta)) - _r(self.c * eta))
        return 2.0 / ((self.lam - 1.0) * 1j) * np.sum(w * f) + self.gauge_offset

    def _shift_points(self, xi: complex, k: int):
        """Points and signs of the log(-Phi) terms linking xi to xi + i k delta."""
        d = self.delta
        if k > 0:
            return [(xi + 1j * j * d, 1) for j in range(1, k + 1)]
        return [(xi - 1j * j * d, -1) for j in range(0, -k)]

    def _factor_order(self, zeta: complex) -> int:
        """+1 at a zero of Phi, -1 at a pole, 0 otherwise."""
        a = 1j * zeta + 1.0 + 0.5 * self.lam
        b = 1j * zeta + 0.5 * (self.lam + 1.0)
        return int(is_gamma_pole(b)) - int(is_gamma_pole(a))

    def _log_V_regular(self, xi: complex) -> complex:
        pl = self.place(xi.imag)
        if abs(pl.shift) > MAX_SHIFTS:
            raise ExtensionLimitError(f"{abs(pl.shift)} shifts needed for {xi}")
        val = self._log_V_strip(xi + 1j * pl.shift * self.delta, pl.beta)
        for z, s in self._shift_points(xi, pl.shift):
            val += s * self.F(z)
        return complex(val)

    def net_order(self, xi: complex) -> int:
        """Order of V at ``xi``: positive for zeros, negative for poles, 0 if regular."""
        xi = complex(xi)
        pl = self.place(xi.imag)
        if abs(pl.shift) > MAX_SHIFTS:
            raise ExtensionLimitError(f"{abs(pl.shift)} shifts needed for {xi}")
        return sum(s * self._factor_order(z) for z, s in self._shift_points(xi, pl.shift))

    def _singular_factor(self, xi: complex) -> bool:
        pl = self.place(xi.imag)
        return any(self._factor_order(z) != 0 for z, _ in self._shift_points(xi, pl.shift))

    # -- public evaluation ----------------------------------------------------
    def _key(self, xi: complex):
        return (int(round(xi.real * 1e6)), int(round(xi.imag * 1e6)))

    def log_V(self, xi) -> complex:
        """``log V(xi)`` (the imaginary part is not branch-normalised)."""
        xi = complex(xi)
        key = self._key(xi)
        hit = self.cache.get(key)
        if hit is not None and hit[0] == xi:
            return hit[1]
        order = self.net_order(xi)
        if order > 0:
            val = complex(-np.inf, 0.0)
        elif order < 0:
            raise VPoleError(f"V has a pole of order {-order} at {xi}")
        elif self._singular_factor(xi):
            val = self._log_V_removable(xi)
        else:
            self._guard(xi)
            val = self._log_V_regular(xi)
        self.cache[key] = (xi, val)
        return val

    def _log_V_removable(self, xi: complex, radius: float = 1e-3, n: int = 16) -> complex:
        # V is analytic here; the mean over a small circle recovers its value
        th = 2 * np.pi * (np.arange(n) + 0.5) / n
        vals = np.array([np.exp(self._log_V_regular(xi + radius * np.exp(1j * t))) for t in th])
        return complex(np.log(np.mean(vals)))

    def _guard(self, xi: complex):
        lo, hi = self.params.strip
        if lo < xi.imag < hi:
            return
        cat = self.zero_pole_catalog
        if cat.all() and cat.nearest_distance(xi) < GUARD_RADIUS:
            warnings.warn(f"V evaluated within {GUARD_RADIUS} of a zero or pole at {xi}",
                          ConditioningWarning, stacklevel=3)

    def eval_V(self, xi):
        xi_arr = np.asarray(xi, dtype=complex)
        out = np.array([np.exp(self.log_V(z)) for z in xi_arr.ravel()]).reshape(xi_arr.shape)
        return out[()] if out.ndim == 0 else out

    def log_V_ratio(self, xi: complex, y: complex) -> complex:
        """``log(V(xi)/V(y))`` through one combined-kernel integral."""
        xi, y = complex(xi), complex(y)
        if xi == y:
            return 0j
        top = min(xi.imag, y.imag) + self.delta
        bottom = max(xi.imag, y.imag)
        lo, hi = self.interval
        a, b = max(bottom, lo), min(top, hi)
        if b - a < self.delta / 8:
            return self.log_V(xi) - self.log_V(y)
        beta = 0.5 * (a + b)
        dist = [min(beta - z.imag, z.imag + self.delta - beta, 0.5) for z in (xi, y)]
        eta, w = self._panels([0.0, xi.real, y.real], beta,
                              [self._origin_distance(beta, regularizer=False)] + dist)
        f = self.F(eta) * (_k(self.c * (xi - eta)) - _k(self.c * (y - eta)))
        return complex(2.0 / ((self.lam - 1.0) * 1j) * np.sum(w * f))

    def log_V_line(self, b: float, a0: float, h: float, N: int) -> np.ndarray:
        """``log V`` at ``a0 + j h + i b``, ``j = 0..N-1``.

        Consecutive values differ by an integral against the kernel increment,
        evaluated for all nodes at once by FFT convolution; the sum is anchored
        by one direct evaluation at the node nearest ``Re xi = 0``.
        """
        pl = self.place(b)
        k, beta = pl.shift, pl.beta
        c, d = self.c, self.delta
        bb = b + k * d
        d1 = beta - bb
        lo, hi = self.window
        dmin = min(d1, d - d1, beta - lo, hi - beta)
        r = max(1, int(np.ceil(h / (2 * np.pi * dmin / 38))))
        hu = h / r
        L = 45.0 / c + h
        a = a0 + h * np.arange(N)
        i0 = int(np.clip(round(-a0 / h), 0, N - 1))
        jlo = int(np.floor((a[0] - L - a0) / hu))
        jhi = int(np.ceil((a[-1] + L - a0) / hu))
        u = a0 + hu * np.arange(jlo, jhi + 1)
        Fu = self.F(u + 1j * beta)
        M = int(np.ceil(L / hu))
        s = hu * np.arange(-M, M + 1)
        shift = 1j * (bb - beta)
        Dk = _k(c * (s + shift)) - _k(c * (s - h + shift))
        conv = fftconvolve(Fu, Dk)
        idx = np.arange(N) * r - jlo + M
        inc = hu * conv[idx] * 2.0 / ((self.lam - 1.0) * 1j)
        anchor = self._log_V_strip(a[i0] + 1j * bb, beta)
        out = np.empty(N, dtype=complex)
        out[i0] = anchor
        out[i0 + 1:] = anchor + np.cumsum(inc[i0 + 1:])
        out[:i0] = anchor - np.cumsum(inc[1:i0 + 1][::-1])[::-1]
        line = a + 1j * b
        if k > 0:
            for j in range(1, k + 1):
                out += self.F(line + 1j * j * d)
        elif k < 0:
            for j in range(0, -k):
                out -= self.F(line - 1j * j * d)
        return out

    # -- cache persistence ----------------------------------------------------
    def cache_key(self) -> dict:
        return {"lambda": self.lam, "beta1": self.beta1, "tol": self.tol}

    def save_cache(self, path) -> None:
        entries = [[z.real, z.imag, v.real, v.imag] for z, v in self.cache.values()]
        entries.sort()
        payload = {"schema": CACHE_SCHEMA, **self.cache_key(), "entries": entries}
        Path(path).write_text(json.dumps(payload))

    def load_cache(self, path) -> int:
        payload = json.loads(Path(path).read_text())
        if payload.get("schema") != CACHE_SCHEMA:
            raise ValueError(f"unknown cache schema {payload.get('schema')!r}")
        for name, val in self.cache_key().items():
            if payload.get(name) != val:
                raise ValueError(f"cache built for {name}={payload.get(name)}, need {val}")
        for zr, zi, vr, vi in payload["entries"]:
            z = complex(zr, zi)
            self.cache[self._key(z)] = (z, complex(vr, vi))
        return len(payload["entries"])


# -- module-level functional API -----------------------------------------------

def log_V(xi, w: WienerHopfFactor):
    xi_arr = np.asarray(xi, dtype=complex)
    out = np.array([w.log_V(z) for z in xi_arr.ravel()]).reshape(xi_arr.shape)
    return out[()] if out.ndim == 0 else out


def eval_V(xi, w: WienerHopfFactor):
    return w.eval_V(xi)


def extend_V(xi, w: WienerHopfFactor):
    """V anywhere off its poles: 0 at zeros, :class:`VPoleError` at poles."""
    return w.eval_V(xi)


def eval_V_ratio(xi, y, w: WienerHopfFactor):
    return np.exp(w.log_V_ratio(xi, y)) if complex(xi) != complex(y) else 1.0 + 0j


def net_order(xi, w: WienerHopfFactor) -> int:
    return w.net_order(xi)


def _families(p: KernelParams, count: int):
    lam, d = p.lam, p.delta
    zeros, poles = [], []
    for k in range(1, count + 1):
        zeros.append((0.5 * (1 + lam) - k * d, ("lower", k), 1))
        poles.append((1 + 0.5 * lam - k * d, ("lower", k), 1))
    # upper families: first `count` locations of n >= 1, k >= 0
    up_z, up_p = [], []
    for n in range(1, count + 1):
        for k in range(0, int(np.ceil(count / d)) + 1):
            up_z.append((1 + 0.5 * lam + n + k * d, ("upper", n, k), 1))
            up_p.append((0.5 * (1 + lam) + n + k * d, ("upper", n, k), 1))
    up_z.sort(key=lambda e: e[0])
    up_p.sort(key=lambda e: e[0])
    return zeros, poles, up_z[:count], up_p[:count]


def singularities_between(p: KernelParams, lo: float, hi: float) -> list:
    """All zeros and poles of V with ``lo <= Im <= hi``, merged by net order.

    Every family member that can land in the range is enumerated, so the net
    orders are exact there.
    """
    if isinstance(p, WienerHopfFactor):
        p = p.params
    lam, d = p.lam, p.delta
    terms = []
    k_lo = int(np.ceil((1 + 0.5 * lam - lo) / d)) + 1
    for k in range(1, max(k_lo, 0) + 1):
        terms.append((0.5 * (1 + lam) - k * d, ("lower", k), 1))
        terms.append((1 + 0.5 * lam - k * d, ("lower", k), -1))
    n_hi = int(np.floor(hi - 0.5 * (1 + lam))) + 1
    for n in range(1, max(n_hi, 0) + 1):
        k_hi = int(np.floor((hi - 0.5 * (1 + lam) - n) / d)) + 1
        for k in range(0, max(k_hi, 0) + 1):
            terms.append((1 + 0.5 * lam + n + k * d, ("upper", n, k), 1))
            terms.append((0.5 * (1 + lam) + n + k * d, ("upper", n, k), -1))
    merged: dict = {}
    for h, idx, sign in terms:
        if not (lo - 1e-9 <= h <= hi + 1e-9):
            continue
        key = round(h, 9)
        order, members = merged.get(key, (0, ()))
        merged[key] = (order + sign, members + (idx,))
    out = []
    for h, (order, members) in sorted(merged.items()):
        if order > 0:
            out.append(Singularity("zero", 1j * h, members, order))
        elif order < 0:
            out.append(Singularity("pole", 1j * h, members, -order))
    return out


def catalog_V_singularities(w: WienerHopfFactor, count: int,
                            resolve: bool = True) -> SingularityCatalog:
    """Zeros and poles of V on the imaginary axis.

    With ``resolve=False`` the four arithmetic families (zeros and poles
    below and above the strip) are listed literally, ``count`` entries each.
    With ``resolve=True`` coincident entries are merged by net order, so
    multiplicities add and zero/pole collisions cancel, and the ``count``
    nearest surviving singularities on each side of the strip are returned;
    fewer are returned on a side that has fewer within ``count/delta``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    p = w.params if isinstance(w, WienerHopfFactor) else w
    if not resolve:
        lz, lp, uz, up = _families(p, count)
        zs = [Singularity("zero", 1j * s, idx) for s, idx, _ in lz + uz]
        ps = [Singularity("pole", 1j * s, idx) for s, idx, _ in lp + up]
        return SingularityCatalog(sorted(zs, key=lambda e: e.location.imag),
                                  sorted(ps, key=lambda e: e.location.imag))
    lo_s, hi_s = p.strip
    reach = (count + 2) / p.delta
    found = singularities_between(p, lo_s - reach, hi_s + reach)
    below = [e for e in found if e.location.imag <= lo_s][::-1][:count]
    above = [e for e in found if e.location.imag >= hi_s][:count]
    chosen = sorted(below + above, key=lambda e: e.location.imag)
    return SingularityCatalog([e for e in chosen if e.kind == "zero"],
                              [e for e in chosen if e.kind == "pole"])


def residue_V(at, w: WienerHopfFactor, method: str = "auto", radius: float = 1e-3) -> complex:
    """Residue of V at a simple pole.

    Closed forms at the strip edges: ``Res(V, 3i/2) = i V((1 + lam/2) i)`` and
    ``Res(V, (3+lam) i/2) = V(2i)/(4 pi i)``; elsewhere, or with
    ``method='circle'``, a small-circle trapezoid sum.
    """
    at = complex(at)
    order = w.net_order(at)
    if order >= 0:
        raise NotAPoleError(f"{at} is not a pole of V")
    if order < -1:
        raise NotAPoleError(f"{at} is a pole of order {-order}; residue of simple poles only")
    lam = w.lam
    if method in ("auto", "closed"):
        if abs(at - 1.5j) < 1e-12:
            return 1j * w.eval_V((1 + 0.5 * lam) * 1j)
        if abs(at - 0.5j * (3 + lam)) < 1e-12:
            return w.eval_V(2j) / (4j * np.pi)
        if method == "closed":
            raise NotAPoleError(f"no closed form for the residue at {at}")
    n = 64
    th = 2 * np.pi * np.arange(n) / n
    z = at + radius * np.exp(1j * th)
    vals = np.array([np.exp(w._log_V_regular(zz)) for zz in z])
    return complex(np.mean(vals * radius * np.exp(1j * th)))

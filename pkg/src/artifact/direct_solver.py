"""Direct discretisation of the linearised coagulation operator on a log grid.

For ``g(x)`` the operator is

    L g(x) = x^{-1/2} int_0^{x/2} [(x-y)^{lam/2} g(x-y) - x^{lam/2} g(x)] y^{-3/2} dy  (T2)
           + x^{-3/2} int_0^{x/2} [(1 - y/x)^{-3/2} - 1] y^{lam/2} g(y) dy              (T1)
           - x^{-3/2} int_{x/2}^inf y^{lam/2} g(y) dy                                   (T3)
           - 2 sqrt(2) x^{(lam-1)/2} g(x)                                               (T4)

written in ``X = ln x`` on a uniform grid of step h. Every term is a
convolution in X, so the discrete operator is a dense matrix with Toeplitz
blocks assembled from product-integration weights:

* T2: the half-derivative. On ``s = ln(x/(x-y))`` its kernel behaves like
  ``s^{-3/2}``; the first panel uses ``s = v^2`` on the difference
  ``phi(X-s) - phi(X)`` with quadratic Lagrange interpolation, later panels
  use plain product weights.
* T1: kernel ``(1-e^{-s})^{-3/2} - 1`` (bounded) on ``s > ln 2``; product
  weights on the panel containing ``ln 2``, composite Simpson beyond.
* T3: unit kernel on ``s > -ln 2``; partial panel at ``-ln 2``, Simpson beyond.
* T4: diagonal.

Values below ``x_min`` follow ``g ~ x^{-p_left}``; beyond ``x_max`` the tail
integral of T3 is closed analytically with ``g ~ x^{-p_right}``.
"""
from __future__ import annotations

import functools
import json
import time
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.sparse.linalg import eigs

from .symbols import KernelParams

__all__ = [
    "GridFunction",
    "SolverConfig",
    "Trajectory",
    "InsufficientDecayError",
    "BlowUpError",
    "log_grid",
    "build_operator",
    "apply_L",
    "spectral_radius",
    "evolve",
    "mass",
    "mollified_delta",
]

_XG, _WG = leggauss(30)


class InsufficientDecayError(ValueError):
    """Grid boundary values violate the integrability envelopes of L."""


class BlowUpError(RuntimeError):
    """Time stepping produced values above the blow-up threshold."""

    def __init__(self, message, diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass
class GridFunction:
    x_nodes: np.ndarray
    values: np.ndarray
    x_min: float = field(init=False)
    x_max: float = field(init=False)

    def __post_init__(self):
        self.x_nodes = np.asarray(self.x_nodes, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.x_nodes.shape != self.values.shape or self.x_nodes.ndim != 1:
            raise ValueError("x_nodes and values must be 1-D arrays of equal length")
        if self.x_nodes[0] <= 0 or np.any(np.diff(self.x_nodes) <= 0):
            raise ValueError("nodes must be positive and strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("values must be finite")
        self.x_min = float(self.x_nodes[0])
        self.x_max = float(self.x_nodes[-1])

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.x_nodes, values)


@dataclass
class SolverConfig:
    t_end: float
    dt: float | None = None  # None: chosen from the measured spectral radius
    scheme: str = "explicit"  # "explicit" (RK2) or "semi_implicit"
    delta_width: float = 4.0  # mollifier width in grid cells
    cutoff_policy: str = "power_law"  # extrapolation beyond the grid
    cfl: float = 1.0  # dt = cfl / spectral radius
    checkpoints: tuple = ()
    blowup: float = 1e12

    def __post_init__(self):
        if self.t_end <= 0:
            raise ValueError("t_end must be positive")
        if self.dt is not None and self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.scheme not in ("explicit", "semi_implicit"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.cutoff_policy != "power_law":
            raise ValueError("only the power_law cutoff policy is implemented")


@dataclass
class Trajectory:
    times: list
    states: list  # GridFunction per checkpoint
    diagnostics: dict


def log_grid(x_min: float = 1e-3, x_max: float = 1e3, n: int = 2048) -> np.ndarray:
    return np.exp(np.linspace(np.log(x_min), np.log(x_max), n))


def _lag3(s, nodes, q):
    o = [nodes[r] for r in range(3) if r != q]
    return (s - o[0]) * (s - o[1]) / ((nodes[q] - o[0]) * (nodes[q] - o[1]))


def _panel_weights(lo, hi, p0, h, kern):
    """Product weights of the quadratic through ``p0, p0+h, p0+2h`` on ``[lo, hi]``."""
    s = (hi - lo) / 2 * _XG + (hi + lo) / 2
    ws = _WG * (hi - lo) / 2
    nodes = [p0, p0 + h, p0 + 2 * h]
    K = kern(s)
    return [np.sum(ws * _lag3(s, nodes, q) * K) for q in range(3)]


def _half_derivative_kernel(s):
    return (-np.expm1(-s)) ** -1.5 * np.exp(-s)


def _gain_kernel(s):
    return (-np.expm1(-s)) ** -1.5 - 1.0


@functools.lru_cache(maxsize=8)
def _build(lam, x_min, x_max, n, p_left, p_right):
    X = np.linspace(np.log(x_min), np.log(x_max), n)
    h = X[1] - X[0]
    x = np.exp(X)
    ln2 = np.log(2.0)
    A = np.zeros((n, n))
    idx = np.arange(n)
    lag = idx[:, None] - idx[None, :]

    # T2: half-derivative on s in (0, ln 2), phi = x^{lam/2} g
    kb = int(np.floor(ln2 / (2 * h)))
    w2 = np.zeros(2 * kb + 3)
    for k in range(kb + 1):
        p0 = 2 * k * h
        lo, hi = p0, min(ln2, p0 + 2 * h)
        nodes = [p0, p0 + h, p0 + 2 * h]
        if k == 0:
            v = (_XG + 1) / 2 * np.sqrt(hi)
            s = v * v
            ws = _WG / 2 * np.sqrt(hi) * 2 * v
            K = _half_derivative_kernel(s)
            for q in range(3):
                w2[q] += np.sum(ws * (_lag3(s, nodes, q) - _lag3(0.0, nodes, q)) * K)
        else:
            pw = _panel_weights(lo, hi, p0, h, _half_derivative_kernel)
            for q in range(3):
                w2[2 * k + q] += pw[q]
    # the constant part of the difference, -phi(X) int kernel, beyond the first panel
    # antiderivative of the kernel is -2 (1 - e^{-s})^{-1/2}
    w2[0] -= 2.0 * ((-np.expm1(-min(2 * h, ln2))) ** -0.5 - np.sqrt(2.0))
    phi = x ** (lam / 2)
    for m in range(w2.size):
        rows = idx[m:]
        A[rows, rows - m] += x[rows] ** -0.5 * w2[m] * phi[rows - m]
        rows = idx[:m]
        y = x[rows] * np.exp(-m * h)
        A[rows, 0] += x[rows] ** -0.5 * w2[m] * y ** (lam / 2) * (y / x_min) ** -p_left

    # T4
    A[idx, idx] += -2.0 * np.sqrt(2.0) * x ** (0.5 * (lam - 1.0))

    # T1: gain term on s > ln 2, psi = x^{1+lam/2} g
    q = 1.0 + lam / 2 - p_left
    m_max = n + int(60.0 / ((1.0 + q) * h)) + 10
    w1 = np.zeros(m_max + 1)
    p0 = 2 * kb * h
    pw = _panel_weights(ln2, p0 + 2 * h, p0, h, _gain_kernel)
    for r in range(3):
        w1[2 * kb + r] += pw[r]
    m = np.arange(2 * kb + 2, m_max + 1)
    simpson = np.where((m - (2 * kb + 2)) % 2 == 0, 2 * h / 3, 4 * h / 3)
    simpson[0] = h / 3
    w1[2 * kb + 2:] += simpson * _gain_kernel(m * h)
    W1 = np.where(lag >= 0, w1[np.clip(lag, 0, m_max)], 0.0)
    A += x[:, None] ** -1.5 * W1 * (x ** (1 + lam / 2))[None, :]
    # nodes below x_min: geometric sum of the extrapolated power law
    S = np.zeros(m_max + 1)
    ratio = np.exp(-h * q)
    for mm in range(m_max - 1, -1, -1):
        S[mm] = ratio * (w1[mm + 1] + S[mm + 1])
    A[:, 0] += x ** -1.5 * x_min ** (1 + lam / 2) * S[idx]

    # T3: loss term on s > -ln 2
    ka = int(np.floor(-ln2 / (2 * h)))
    p0 = 2 * ka * h
    pp = _panel_weights(-ln2, p0 + 2 * h, p0, h, lambda s: np.ones_like(s))
    m_lo = 2 * ka
    m_hi = n + 2
    u = np.zeros(m_hi - m_lo + 1)
    for r in range(3):
        u[r] += pp[r]
    m = np.arange(m_lo + 2, m_hi + 1)
    simpson = np.where((m - (m_lo + 2)) % 2 == 0, 2 * h / 3, 4 * h / 3)
    simpson[0] = h / 3
    u[2:] += simpson
    U = np.where(-lag >= m_lo, u[np.clip(-lag - m_lo, 0, u.size - 1)], 0.0)
    psi = x ** (1 + lam / 2)
    A += -x[:, None] ** -1.5 * U * psi[None, :]
    for mm in range(m_lo, 0):
        rows = idx[idx + mm < 0]
        y = x[rows] * np.exp(mm * h)
        A[rows, 0] += -x[rows] ** -1.5 * u[mm - m_lo] * y ** (1 + lam / 2) * (y / x_min) ** -p_left
    # close the Simpson rule at x_max and add the analytic tail
    qr = 1.0 + lam / 2 - p_right
    m_end = n - 1 - idx
    even = m_end % 2 == 0
    ok = m_end >= m_lo + 2
    sel = even & ok
    A[idx[sel], n - 1] += x[idx[sel]] ** -1.5 * (h / 3) * psi[n - 1]
    sel = ~even & ok
    A[idx[sel], n - 1] -= x[idx[sel]] ** -1.5 * (h / 3) * psi[n - 1] * np.exp(h * qr)
    psi_end = np.where(even, psi[n - 1], psi[n - 1] * np.exp(h * qr))
    A[:, n - 1] += x ** -1.5 * psi_end / qr
    A.setflags(write=False)
    return A, x, h


def build_operator(p: KernelParams, x_min: float = 1e-3, x_max: float = 1e3, n: int = 2048,
                   p_left: float = 1.5, p_right: float | None = None,
                   continuation: bool = False):
    """Dense matrix of L on the log grid, the nodes and the step in ``ln x``.

    With ``continuation=True`` a right exponent ``p_right < 1 + lam/2`` is
    accepted: the closed-form tail of T3 is then the analytic continuation of
    the divergent integral, which is what the Mellin eigen-relation uses.
    """
    if p_right is None:
        p_right = 0.5 * (3.0 + p.lam)
    edge = 1.0 + p.lam / 2
    if abs(p_right - edge) < 1e-9 or (p_right < edge and not continuation):
        raise InsufficientDecayError("right extrapolation exponent must exceed 1 + lam/2")
    if not p_left < 2.0 + p.lam / 2:
        raise InsufficientDecayError("left extrapolation exponent must stay below 2 + lam/2")
    return _build(float(p.lam), float(x_min), float(x_max), int(n), float(p_left), float(p_right))


def _boundary_slope(x, v, side, k=4):
    sl = slice(0, k) if side == "left" else slice(-k, None)
    xs, vs = x[sl], np.abs(v[sl])
    if np.any(vs == 0):
        return None
    return np.polyfit(np.log(xs), np.log(vs), 1)[0]


def check_decay(g: GridFunction, p: KernelParams, rel: float = 1e-12) -> None:
    """Raise if the boundary behaviour of g makes the integrals of L diverge."""
    scale = np.max(np.abs(g.values))
    if scale == 0:
        return
    lam = p.lam
    x, v = g.x_nodes, g.values
    if abs(v[0]) > rel * scale:
        s = _boundary_slope(x, v, "left")
        if s is not None and -s >= 2.0 + lam / 2:
            raise InsufficientDecayError(f"g ~ x^{s:.3f} at x_min: y^(1+lam/2) g not integrable at 0")
    if abs(v[-1]) > rel * scale:
        s = _boundary_slope(x, v, "right")
        if s is not None and -s <= 1.0 + lam / 2:
            raise InsufficientDecayError(f"g ~ x^{s:.3f} at x_max: y^(lam/2) g not integrable at infinity")


def _grid_spec(g: GridFunction):
    n = g.x_nodes.size
    X = np.log(g.x_nodes)
    if not np.allclose(np.diff(X), (X[-1] - X[0]) / (n - 1), rtol=1e-9, atol=0):
        raise ValueError("apply_L needs a uniform grid in ln x")
    return g.x_min, g.x_max, n


def apply_L(g: GridFunction, p: KernelParams, p_left: float = 1.5,
            p_right: float | None = None, check: bool = True) -> GridFunction:
    """``L g`` on the nodes of ``g``."""
    if check:
        check_decay(g, p)
    A, _, _ = build_operator(p, *_grid_spec(g), p_left=p_left, p_right=p_right)
    return g.with_values(A @ g.values)


def spectral_radius(A: np.ndarray) -> float:
    """Largest eigenvalue modulus by Arnoldi iteration (fixed start vector)."""
    v0 = np.ones(A.shape[0])
    vals = eigs(A, k=1, which="LM", v0=v0, return_eigenvectors=False, tol=1e-6)
    return float(np.abs(vals[0]))


def mass(g: GridFunction, p: KernelParams | None = None, p_left: float = 1.5,
         p_right: float | None = None) -> float:
    """``int x g dx`` by the trapezoid rule in ``ln x`` plus power-law tails."""
    lam = 1.5 if p is None else p.lam
    p_right = 0.5 * (3.0 + lam) if p_right is None else p_right
    x, v = g.x_nodes, g.values
    core = np.trapezoid(x * x * v, np.log(x))
    left = v[0] * x[0] ** 2 / (2.0 - p_left) if p_left < 2 else 0.0
    right = v[-1] * x[-1] ** 2 / (p_right - 2.0) if p_right > 2 else 0.0
    return float(core + left + right)


def mollified_delta(x_nodes, x0: float = 1.0, width_cells: float = 4.0) -> GridFunction:
    """Log-normal bump at ``x0`` with unit mass ``int x g dx``."""
    x = np.asarray(x_nodes, dtype=float)
    X = np.log(x)
    h = X[1] - X[0]
    width = width_cells * h
    g = np.exp(-0.5 * ((X - np.log(x0)) / width) ** 2)
    g /= np.trapezoid(x * x * g, X)
    return GridFunction(x, g)


def evolve(g0: GridFunction, cfg: SolverConfig, p: KernelParams, p_left: float = 1.5,
           p_right: float | None = None) -> Trajectory:
    """Integrate ``dg/dt = L g`` to ``cfg.t_end``.

    The explicit scheme is Heun's RK2 with ``dt = cfl/rho``, rho the measured
    spectral radius of the discrete operator. The semi-implicit scheme treats
    the diagonal loss term implicitly and the rest with forward Euler.
    """
    check_decay(g0, p)
    A, x, h = build_operator(p, *_grid_spec(g0), p_left=p_left, p_right=p_right)
    t_start = time.perf_counter()
    rho = spectral_radius(A)
    dt = cfg.dt if cfg.dt is not None else cfg.cfl / rho
    n_steps = max(1, int(np.ceil(cfg.t_end / dt - 1e-12)))
    dt = cfg.t_end / n_steps
    marks = sorted(set(cfg.checkpoints) | {cfg.t_end})
    mark_steps = {int(round(tm / dt)): tm for tm in marks if 0 < tm <= cfg.t_end}
    g = g0.values.copy()
    times, states = [0.0], [g0]
    masses = [mass(g0, p, p_left, p_right)]
    if cfg.scheme == "semi_implicit":
        diag = np.diag(A).copy()
        offdiag = A - np.diag(diag)
        denom = 1.0 - dt * diag
    for step in range(1, n_steps + 1):
        if cfg.scheme == "explicit":
            k1 = A @ g
            k2 = A @ (g + dt * k1)
            g = g + 0.5 * dt * (k1 + k2)
        else:
            g = (g + dt * (offdiag @ g)) / denom
        peak = np.max(np.abs(g))
        if not np.isfinite(peak) or peak > cfg.blowup:
            raise BlowUpError(f"|g| = {peak:.3e} at step {step}",
                              {"step": step, "t": step * dt, "dt": dt, "rho": rho,
                               "masses": masses})
        masses.append(mass(GridFunction(x, g), p, p_left, p_right))
        if step in mark_steps:
            times.append(mark_steps[step])
            states.append(GridFunction(x, g.copy()))
    diagnostics = {"dt": dt, "steps": n_steps, "spectral_radius": rho,
                   "dX": h, "scheme": cfg.scheme, "masses": masses,
                   "seconds": time.perf_counter() - t_start}
    return Trajectory(times, states, diagnostics)


def write_trajectory(traj: Trajectory, csv_path, manifest_path, config: dict) -> None:
    with open(csv_path, "w") as fh:
        fh.write("t,x,g\n")
        for tm, st in zip(traj.times, traj.states):
            for xv, gv in zip(st.x_nodes, st.values):
                fh.write(f"{tm!r},{xv!r},{gv!r}\n")
    diag = {k: v for k, v in traj.diagnostics.items() if k not in ("masses", "seconds")}
    diag["final_mass"] = traj.diagnostics["masses"][-1]
    with open(manifest_path, "w") as fh:
        json.dump({"schema": "artifact.direct-run/1", "config": config, "diagnostics": diag},
                  fh, indent=2, sort_keys=True)

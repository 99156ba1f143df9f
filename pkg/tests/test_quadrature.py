from __future__ import annotations

import numpy as np
import pytest

from artifact.complex_special import loggamma
from artifact.quadrature import (
    EnvelopeViolation,
    HorizontalContour,
    UnknownSingularityError,
    compose_shifts,
    critical_point,
    integrate_interval,
    integrate_line,
    phase_function,
    residue_by_circle,
    shift_line,
)
from artifact.symbols import KernelParams
from artifact.wiener_hopf import WienerHopfFactor

P = KernelParams(1.5)


def test_gaussian():
    r = integrate_line(lambda y: np.exp(-y * y), HorizontalContour(0.0, 8.0), tol=1e-13)
    assert abs(r.value - np.sqrt(np.pi)) < 1e-12
    assert r.error < 1e-12


def test_lorentzian_adaptive_truncation():
    env = lambda x: 1.0 / (1.0 + x * x)  # noqa: E731
    r = integrate_line(lambda y: 1.0 / (1.0 + y * y), HorizontalContour(0.0, 10.0),
                       tol=1e-10, envelope=env)
    assert abs(r.value - np.pi) < 1e-10
    assert r.half_length > 1e10


def test_gamma_envelope_truncation():
    f = lambda y: np.exp(loggamma(1j * y))  # noqa: E731
    env = lambda x: np.sqrt(2 * np.pi / np.maximum(x, 1e-300)) * np.exp(-np.pi * x / 2)  # noqa: E731
    c = HorizontalContour(0.5, 5.0)
    r = integrate_line(f, c, tol=1e-12, envelope=env)
    assert r.tail_bound < 1e-12 * abs(r.value)
    longer = integrate_line(f, HorizontalContour(0.5, 2 * r.half_length), tol=1e-13)
    assert abs(longer.value - r.value) < 1e-12 * abs(r.value) + r.error


def test_envelope_violation():
    with pytest.raises(EnvelopeViolation):
        integrate_line(lambda y: 1.0 / (1.0 + y * y), HorizontalContour(0.0, 5.0),
                       envelope=lambda x: np.exp(-x))


def test_truncation_monotone():
    f = lambda y: np.exp(-np.abs(y)) * np.cos(3 * y)  # noqa: E731
    env = lambda x: np.exp(-x)  # noqa: E731
    a = integrate_line(f, HorizontalContour(0.0, 4.0), tol=1e-8, envelope=env)
    b = integrate_line(f, HorizontalContour(0.0, 2 * a.half_length), tol=1e-10)
    assert abs(a.value - b.value) <= a.tail_bound + a.error + b.error


def test_contour_validation():
    with pytest.raises(ValueError):
        HorizontalContour(0.0, 0.0)
    with pytest.raises(ValueError):
        HorizontalContour(1.2501, 10.0).check_margin([1.25j])
    HorizontalContour(1.3, 10.0).check_margin([1.25j])


def test_error_estimates_conservative():
    # exp(-a(x-b)^2) cos(kx) integrates to sqrt(pi/a) exp(-k^2/(4a)) cos(kb)
    rng = np.random.default_rng(20240611)
    ok = 0
    n = 200
    for _ in range(n):
        a, b, k = rng.uniform(0.2, 5), rng.uniform(-2, 2), rng.uniform(0, 10)
        tol = 10.0 ** rng.uniform(-12, -5)
        f = lambda x: np.exp(-a * (x - b) ** 2) * np.cos(k * x)  # noqa: E731
        exact = np.sqrt(np.pi / a) * np.exp(-k * k / (4 * a)) * np.cos(k * b)
        r = integrate_interval(f, -b - 40, b + 40, tol=tol)
        ok += abs(r.value - exact) <= max(r.error, 1e-15)
    assert ok >= 0.95 * n


def test_residue_by_circle():
    assert abs(residue_by_circle(lambda z: 3.0 / (z - 1j) + z, 1j, 0.1, 64) - 3.0) < 1e-14


def test_shift_across_gamma_pole():
    lam = P.lam
    f = lambda y: np.exp(loggamma(2j * y / (lam - 1)))  # noqa: E731
    env = lambda x: 10 * np.exp(-np.pi * x / (lam - 1) + 1.0)  # noqa: E731
    rec = shift_line(f, HorizontalContour(0.1, 10.0), -0.15, [0j], tol=1e-10, envelope=env)
    assert len(rec.crossed) == 1
    z, contrib = rec.crossed[0]
    assert z == 0
    assert abs(contrib - (-2j * np.pi * (lam - 1) / 2j)) < 1e-8
    assert rec.identity_residual < 2e-10


def test_shift_without_singularities():
    f = lambda y: np.exp(-y * y)  # noqa: E731
    rec = shift_line(f, HorizontalContour(0.0, 9.0), 0.7, [], tol=1e-11)
    assert rec.crossed == []
    assert abs(rec.I_from - rec.I_to) < 2e-11


def test_shift_detects_missing_pole():
    lam = P.lam
    f = lambda y: np.exp(loggamma(2j * y / (lam - 1)))  # noqa: E731
    with pytest.raises(UnknownSingularityError):
        shift_line(f, HorizontalContour(0.1, 10.0), -0.15, [], tol=1e-10)


def test_round_trip_cancels():
    lam = P.lam
    f = lambda y: np.exp(loggamma(2j * y / (lam - 1)))  # noqa: E731
    up = shift_line(f, HorizontalContour(-0.15, 10.0), 0.1, [0j], tol=1e-10)
    down = shift_line(f, HorizontalContour(0.1, 10.0), -0.15, [0j], tol=1e-10)
    assert abs(up.I_from - down.I_to) < 2e-10
    assert compose_shifts([up, down]) == {}
    assert up.orientation == 1 and down.orientation == -1


def test_critical_point_closed_form():
    cp = critical_point(150.0 + 1.8j, 1.0, P)
    assert cp.location == pytest.approx(0.5 * np.sqrt(2 * np.pi) * (1 + 1j) / 2j, abs=1e-15)
    assert cp.validity and cp.scale == pytest.approx(np.sqrt(abs(150.0 + 1.8j)))
    assert not critical_point(5.0 + 1.8j, 1.0, P).validity
    q = critical_point(-150.0 + 1.8j, 1.0, P)
    assert q.location == pytest.approx(0.5 * np.sqrt(2 * np.pi) * (1 - 1j) / 2j, abs=1e-15)


def test_critical_point_is_stationary():
    w = WienerHopfFactor(P)
    xi, t = 100.0 + 1.9j, 1.0
    cp = critical_point(xi, t, P, log_V=w.log_V, polish=True)
    ph = lambda z: phase_function(xi, z, t, P, w.log_V)  # noqa: E731
    h = 1e-5

    def d(z):
        return (ph(z + h) - ph(z - h)) / (2 * h)

    assert cp.newton_steps == 1
    assert abs(d(cp.location)) < 0.1 * abs(d(cp.location / 2))

from __future__ import annotations

import numpy as np
import pytest

from artifact.symbols import KernelParams, eval_Phi
from artifact.fundamental_solution import (
    NoPlateauError,
    eval_G,
    eval_Ghat,
    eval_Ghat_descent,
    finite_time_tails,
    large_time_constants,
    large_time_profile,
    rescale_fundamental,
    small_time_candidates,
    small_time_closed_form,
    small_time_profile,
)
from artifact.wiener_hopf import WienerHopfFactor

INV_SQRT_2PI = 1 / np.sqrt(2 * np.pi)


@pytest.fixture(scope="module")
def w15():
    return WienerHopfFactor(KernelParams(1.5))


@pytest.fixture(scope="module")
def w14():
    return WienerHopfFactor(KernelParams(1.4))


@pytest.fixture(scope="module")
def tails(w15):
    return finite_time_tails(0.3, w15)


def mass_G(t, w):
    """``int e^{2X} G dX`` on [-12, 12] plus the two exponential tails."""
    X = np.linspace(-12.0, 12.0, 2401)
    g = eval_G(t, X, w)
    core = np.trapezoid(np.exp(2 * X) * g, X)
    r = 0.5 * (3 + w.lam) - 2.0
    left = g[0] * np.exp(2 * X[0]) / 0.5
    right = g[-1] * np.exp(2 * X[-1]) / r
    return core + left + right


# -- Fourier side ----------------------------------------------------------------------

def test_small_time_limit(w15):
    assert abs(eval_Ghat(1e-4, 1.6j, w15).value - INV_SQRT_2PI) < 0.01


@pytest.mark.parametrize("t, xi", [(0.5, 2 + 1.7j), (0.2, -1 + 1.6j), (1.0, 3 + 1.8j)])
def test_functional_ode(w15, t, xi):
    e = 1e-4
    dG = (eval_Ghat(t + e, xi, w15).value - eval_Ghat(t - e, xi, w15).value) / (2 * e)
    d = w15.delta
    rhs = eval_Ghat(t, xi + 1j * d, w15).value * eval_Phi(xi + 1j * d, w15.params)
    assert abs(dG - rhs) < 1e-3 * abs(rhs)


def test_y_line_independence(w15):
    for t in (0.3, 1.0):
        a = eval_Ghat(t, 0.7 + 1.8j, w15, b_y=1.2).value
        b = eval_Ghat(t, 0.7 + 1.8j, w15, b_y=1.7).value
        assert abs(a - b) < 1e-8 * abs(a)


def test_ghat_conjugate_symmetry(w15):
    a = eval_Ghat(0.5, -3 + 1.8j, w15).value
    b = eval_Ghat(0.5, 3 + 1.8j, w15).value
    assert abs(a - np.conj(b)) < 1e-10 * abs(b)


def test_ghat_input_validation(w15):
    with pytest.raises(ValueError):
        eval_Ghat(0.0, 1.8j, w15)
    with pytest.raises(ValueError):
        eval_Ghat(0.5, 1.8j, w15, b_y=1.9)


@pytest.mark.parametrize("lam", [1.5, 1.4])
def test_descent_matches_direct(lam, w15, w14):
    w = w15 if lam == 1.5 else w14
    for t in (0.1, 0.5, 2.0):
        for xi in (20 + 1.8j, -60 + 1.7j):
            a = eval_Ghat(t, xi, w).value
            b = eval_Ghat_descent(t, xi, w).value
            # the direct sum floors near 1e-16 in absolute terms
            assert abs(a - b) < 1e-9 * abs(a) + 1e-15


def test_derivative_envelope(w15):
    t = 0.5
    a = 0.95 * np.sqrt(2 * np.pi)
    ratios = []
    for r in (10.0, 100.0, 400.0, 1000.0):
        xi = r + 1.875j
        h = 1e-4 * np.sqrt(r)
        dG = (eval_Ghat_descent(t, xi + h, w15).value - eval_Ghat_descent(t, xi - h, w15).value) / (2 * h)
        ratios.append(abs(dG) * (1 + np.sqrt(r)) / (t * np.exp(-a * np.sqrt(r) * t)))
    assert max(ratios) < 1.0
    assert ratios[-1] < ratios[1]


@pytest.mark.parametrize("lam, b", [(1.4, 1.55), (1.4, 1.9), (1.3, 1.55), (1.3, 1.9)])
def test_large_t_decay_law(lam, b):
    # |Ghat(t, xi)| ~ t^{-2(Im xi - 1)/(lam - 1)}; equals -1/(lam-1) at Im xi = 3/2
    w = WienerHopfFactor(KernelParams(lam))
    v = [abs(eval_Ghat(t, b * 1j, w).value) for t in (100.0, 200.0)]
    slope = np.log(v[1] / v[0]) / np.log(2.0)
    assert abs(slope + 2 * (b - 1) / (lam - 1)) < 0.1


@pytest.mark.xfail(strict=True, reason="over t in [2, 50] the fit is still transient (-3.64 at "
                   "xi = 0.5 + 1.51i); the asymptotic exponent -2(Im xi - 1)/(lam - 1) only "
                   "reaches -1/(lam - 1) at the strip edge")
def test_large_t_exponent_window(w14):
    ts = np.array([2.0, 5.0, 10.0, 20.0, 50.0])
    v = np.array([abs(eval_Ghat(t, 0.5 + 1.51j, w14).value) for t in ts])
    assert abs(np.polyfit(np.log(ts), np.log(v), 1)[0] + 1 / 0.4) < 0.1


# -- physical side -----------------------------------------------------------------------

def test_realness(w15):
    vals, info = eval_G(1.0, [0.5, -1.0, 2.0], w15, check_real=True, return_info=True)
    assert info["imag_rel"] < 1e-7
    assert np.all(np.isfinite(vals))


def test_by_parts_crosscheck(w15):
    X = np.array([0.3, 0.5, 1.0, 2.0])
    direct, info = eval_G(1.0, X, w15, return_info=True)
    bp = eval_G(1.0, X, w15, method="by_parts")
    # the discrete second difference carries the factor sinc^2(X h / 2)
    expected = direct * np.sinc(X * info["h"] / (2 * np.pi)) ** 2
    assert np.max(np.abs(bp - expected)) < 1e-6 * np.max(np.abs(direct))
    with pytest.raises(ValueError):
        eval_G(1.0, X, w15, method="spline")


@pytest.mark.xfail(strict=True, reason="G has a negative left tail ~ -t e^{-3X/2}: at t = 0.05 "
                   "min G on [-3, -0.5] is -0.145 max G")
def test_positivity_region(w15):
    t = 0.05
    g = eval_G(t, np.linspace(-3.0, -0.5, 26), w15)
    peak = np.max(eval_G(t, t * t * np.linspace(0.5, 5.0, 46), w15))
    assert np.min(g) >= -1e-6 * peak


def test_negative_left_tail(w15):
    # regression: the linearised fundamental solution changes sign
    assert eval_G(0.5, 0.0, w15) == pytest.approx(-0.239, abs=2e-3)


def test_mass_decreasing(w15):
    m = [mass_G(t, w15) for t in (0.1, 0.3, 0.5)]
    assert m[0] <= 1 and m[0] > m[1] > m[2]
    # independent cross-check: the direct solver gives 0.9926, 0.7717, 0.2901
    assert m == pytest.approx([0.9926, 0.7717, 0.2901], abs=0.01)


def test_rescale(w15):
    x = np.array([0.5, 1.0, 3.0])
    assert np.array_equal(rescale_fundamental(0.4, x, 1.0, w15), eval_G(0.4, np.log(x), w15))
    x0 = 2.0
    a = rescale_fundamental(0.4, x, x0, w15)
    b = eval_G(0.4 * x0**w15.delta, np.log(x / x0), w15) / x0
    assert np.max(np.abs(a - b)) <= 1e-14 * np.max(np.abs(b))
    with pytest.raises(ValueError):
        rescale_fundamental(0.4, [-1.0], 1.0, w15)


def test_rescale_mass_scaling(w15):
    x0, t = 2.0, 0.3
    X = np.linspace(-12.0, 12.0, 2401)
    x = x0 * np.exp(X)
    g = rescale_fundamental(t, x, x0, w15)
    r = 0.5 * (3 + w15.lam) - 2.0
    m = np.trapezoid(x * x * g, X) + g[0] * x[0] ** 2 / 0.5 + g[-1] * x[-1] ** 2 / r
    assert m == pytest.approx(x0 * mass_G(t * x0**w15.delta, w15), rel=1e-10)


# -- small-time profile ----------------------------------------------------------------------

def test_small_time_vanishes_for_negative_chi():
    assert np.max(np.abs(small_time_profile(np.array([-0.1, -0.5, -1.0, -3.0, -10.0])))) < 1e-6
    assert small_time_closed_form(-1.0) == 0


def test_small_time_oracle_matches_closed_form():
    chi = np.array([0.2, 0.5, 1.0, 2.0, 5.0, 20.0])
    assert np.allclose(small_time_profile(chi), small_time_closed_form(chi), rtol=1e-6, atol=1e-10)


def test_small_time_shape():
    peak_chi = 2 * np.pi / 3
    peak = small_time_closed_form(peak_chi)
    assert peak == pytest.approx(peak_chi**-1.5 * np.exp(-1.5), rel=1e-14)
    grid = np.linspace(0.05, 10.0, 2000)
    assert abs(grid[np.argmax(small_time_closed_form(grid))] - peak_chi) < 0.01
    assert small_time_profile(peak_chi) == pytest.approx(peak, rel=1e-6)


def test_small_time_decay():
    chi = np.array([50.0, 200.0, 1000.0])
    assert np.allclose(small_time_profile(chi) * chi**1.5, np.exp(-np.pi / chi), rtol=1e-5)
    assert small_time_profile(150.0) < 0.01 * small_time_closed_form(2 * np.pi / 3)


@pytest.mark.xfail(strict=True, reason="the profile decays like chi^{-3/2}: at chi = 50 it is "
                   "3.6% of the peak")
def test_small_time_value_at_50():
    assert small_time_profile(50.0) < 0.01 * small_time_closed_form(2 * np.pi / 3)


def test_small_time_candidates_disagree_with_oracle():
    chi = np.array([0.5, 1.0, 2.0])
    ref = small_time_profile(chi)
    cand = small_time_candidates(chi)
    assert np.allclose(cand["power"], ref, rtol=1e-6)
    assert np.allclose(cand["pi_times_power"], np.pi * ref, rtol=1e-6)
    assert not np.allclose(cand["exp_of_power"], ref, rtol=0.1)


# -- large-time profile ----------------------------------------------------------------------

def test_large_time_vanishes_at_resonant_lambda(w15):
    assert np.all(large_time_profile(np.linspace(-5, 5, 11), w15) == 0)


def test_large_time_collapse(w14):
    th = np.linspace(-4.0, 4.0, 17)
    psi = large_time_profile(th, w14)
    k = 2 / (w14.lam - 1)
    errs = []
    for t in (10.0, 20.0, 40.0):
        lhs = t**-k * eval_G(t, th - k * np.log(t), w14)
        errs.append(np.max(np.abs(lhs - psi)) / np.max(np.abs(psi)))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 0.1
    # the t = 20 distance shrinks like t^{-1}: 0.45, 0.195, 0.091
    assert errs[1] == pytest.approx(0.195, abs=0.01)


@pytest.mark.parametrize("window, rate", [((-14.0, -10.0), -1.5), ((12.0, 15.0), -2.2)])
def test_large_time_tail_slopes(w14, window, rate):
    th = np.linspace(*window, 13)
    slope = np.polyfit(th, np.log(np.abs(large_time_profile(th, w14))), 1)[0]
    assert abs(slope - rate) < 0.05


@pytest.mark.xfail(strict=True, reason="on sigma in [0.01, 0.3] and [3, 100] the next exponential "
                   "is still of order one: slopes -1.72 and -1.95")
@pytest.mark.parametrize("window, rate", [((np.log(0.01), np.log(0.3)), -1.5),
                                          ((np.log(3.0), np.log(100.0)), -2.2)])
def test_large_time_sigma_windows(w14, window, rate):
    th = np.linspace(*window, 13)
    slope = np.polyfit(th, np.log(np.abs(large_time_profile(th, w14))), 1)[0]
    assert abs(slope - rate) < 0.05


def test_large_time_constants(w14):
    c = large_time_constants(w14)
    d = w14.delta
    for key, window, rate, nxt in (("derived_C1", (-16.0, -6.0), 1.5, d),
                                   ("derived_C2", (5.0, 16.0), 2.2, -d)):
        th = np.linspace(*window, 21)
        y = large_time_profile(th, w14) * np.exp(rate * th)
        M = np.column_stack([np.exp(j * nxt * th) for j in range(3)])
        plateau = np.linalg.lstsq(M, y, rcond=None)[0][0]
        assert abs(plateau / c[key].real - 1) < 0.03
        assert abs(c[key].imag) < 1e-12
    # the alternative closed forms are purely imaginary
    assert abs(c["alternative_C1"].real) < 1e-12 < abs(c["alternative_C1"].imag)
    assert abs(c["alternative_C2"].real) < 1e-12 < abs(c["alternative_C2"].imag)


@pytest.mark.xfail(strict=True, reason="the next exponential sits (lam-1)/2 away; on [-10, -6] "
                   "Psi_1 e^{3 theta/2} drifts from -0.0115 to -0.0078")
def test_large_time_plateau_flat(w14):
    th = np.linspace(-10.0, -6.0, 9)
    a = large_time_profile(th, w14) * np.exp(1.5 * th)
    assert np.ptp(a) / abs(np.mean(a)) <= 0.02


# -- finite-time tails -----------------------------------------------------------------------

def test_tail_plateaus_match_residues(tails):
    assert tails.left == pytest.approx(tails.left_residue, rel=1e-3)
    assert tails.right == pytest.approx(tails.right_residue, rel=1e-3)
    # regression at t = 0.3
    assert tails.left == pytest.approx(-0.14275, rel=1e-3)
    assert tails.right == pytest.approx(0.15090, rel=1e-3)


def test_tail_slopes(tails, w15):
    assert abs(tails.left_slope + 1.5) < 0.05
    assert abs(tails.right_slope + 0.5 * (3 + w15.lam)) < 0.02


def test_tail_errors(w15):
    with pytest.raises(ValueError):
        finite_time_tails(2.0, w15)
    with pytest.raises(NoPlateauError):
        finite_time_tails(0.3, w15, max_residual=1e-12)

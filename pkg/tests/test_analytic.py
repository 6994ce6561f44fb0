import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from ppnav.analytic import (ball_integral, ball_integral_chord_form, chord_points, contraction_alpha,
                            cos_power_integral, directed_progress_tail, f_tilde_alt_form,
                            f_tilde_asymptote, f_tilde_asymptote_exact, f_tilde_tail, halfspace_mass,
                            loglog_limit, mu_tilde, progress_tail_constant, progress_tail_level_exact,
                            q_limit_tail, q_limit_tail_exact, tail_curve)
from ppnav.experiments import first_steps_directed, first_steps_toward
from ppnav.model import ModelParams
from ppnav.point_process import InvalidInput, geometry_constants
from ppnav.quadrature import adaptive_simpson, gauss_kronrod
from ppnav.rng import stream


# -- progress tail constant --------------------------------------------------

def test_omega_0_is_two():
    assert geometry_constants(2)[2] == 2.0


def test_cos_power_integral():
    assert cos_power_integral(2).value == pytest.approx(math.pi / 4, abs=1e-12)


def _K_mp(d, beta, c):
    """Same closed form at 30 digits with mpmath quadrature throughout."""
    mp.mp.dps = 30
    f = lambda r: mp.mpf(1) if r < c ** (1 / mp.mpf(beta)) else c * r ** (-beta)
    t0 = mp.mpf(c) ** (1 / mp.mpf(beta))
    om = 2 * mp.pi ** (mp.mpf(d) / 2) / mp.gamma(mp.mpf(d) / 2)
    lam = om / 2 * (mp.quad(lambda r: r ** (d - 1), [0, t0]) + mp.quad(lambda r: f(r) * r ** (d - 1), [t0, mp.inf]))
    om2 = 2 * mp.pi ** (mp.mpf(d - 1) / 2) / mp.gamma(mp.mpf(d - 1) / 2)
    ang = mp.quad(lambda t: mp.cos(t) ** (beta - d), [0, mp.pi / 2])
    return float(2 * c * om2 / (beta - d) / (1 - mp.exp(-lam)) * ang)


@pytest.mark.parametrize("d,beta,c", [(2, 4.0, 1e-6), (2, 4.0, 1.0), (2, 5.0, 1.0), (3, 5.5, 2.0)])
def test_progress_tail_constant_high_precision(d, beta, c):
    prm = ModelParams(d, beta, c)
    assert progress_tail_constant(prm) == pytest.approx(_K_mp(d, beta, c), rel=1e-8)


def test_small_c_limit_of_K():
    # Lambda ~ pi c^(2/4) (1/2 + 1/2) -> 0, so K ~ (2 c 2 / 2) (pi/4) / Lambda
    for c in (1e-6, 1e-8):
        prm = ModelParams(2, 4.0, c)
        lam = math.pi * math.sqrt(c)
        # 1 - e^-L = L (1 - L/2 + ...), so the relative gap is below L
        assert progress_tail_constant(prm) == pytest.approx(2 * c * (math.pi / 4) / lam, rel=lam)


def test_halfspace_mass_closed_form():
    prm = ModelParams(2, 5.0, 1.0)
    assert halfspace_mass(prm).value == pytest.approx(math.pi * (0.5 + 1 / 3), rel=1e-10)


def test_K_rejects_beta_le_d():
    with pytest.raises(InvalidInput):
        progress_tail_constant(ModelParams(2, 2.0))


def test_exact_level_is_half_the_printed_constant_in_the_plane():
    prm = ModelParams(2, 5.0, 1.0)
    assert progress_tail_constant(prm) == pytest.approx(2 * progress_tail_level_exact(prm), rel=1e-10)


def test_exact_progress_tail_matches_monte_carlo():
    prm = ModelParams(2, 5.0, 1.0)
    steps = first_steps_directed(prm, 20000, seed=5)[:, 0]
    for t in (0.5, 1.0, 2.0, 3.0):
        p = directed_progress_tail(t, prm)
        emp = np.mean(steps > t)
        assert abs(emp - p) < 4 * math.sqrt(p * (1 - p) / len(steps)) + 1e-4
    big = directed_progress_tail(60.0, prm)
    assert big * 60 ** 3 == pytest.approx(progress_tail_level_exact(prm), rel=0.05)


# -- q-limit -----------------------------------------------------------------

def test_q_limit_values():
    prm = ModelParams(2, 1.0, 1.0)
    assert q_limit_tail(0.0, prm) == 1.0
    assert q_limit_tail(0.5, prm) == pytest.approx(0.1353352832, rel=1e-9)
    assert q_limit_tail_exact(0.0, prm) == 1.0
    with pytest.raises(InvalidInput):
        q_limit_tail(0.1, ModelParams(2, 2.0))


def test_q_limit_exact_law_matches_simulation():
    prm = ModelParams(2, 1.0, 1.0)
    x = 1e4
    nxt = first_steps_toward(prm, x, 1000, seed=2)
    q = np.linalg.norm(nxt, axis=1) / x ** (1 - (2 - 1) / 2)
    exact = stats.kstest(q, lambda s: 1 - q_limit_tail_exact(s, prm)).statistic
    printed = stats.kstest(q, lambda s: 1 - q_limit_tail(s, prm)).statistic
    assert exact <= 0.05
    assert printed > 0.2


# -- f-tilde -----------------------------------------------------------------

def test_f_tilde_monotone_in_range():
    prm = ModelParams(2, 2.0, 1.0)
    grid = np.linspace(0.01, 10, 60)
    v = f_tilde_tail(grid, prm)
    assert np.all((v >= 0) & (v <= 1)) and np.all(np.diff(v) <= 0)
    assert tail_curve("f-tilde", prm, grid).check()


def test_f_tilde_asymptote_at_s8():
    prm = ModelParams(2, 2.0, 1.0)
    v = f_tilde_tail(8.0, prm)
    assert v / f_tilde_asymptote_exact(8.0, prm) == pytest.approx(1.0, rel=0.01)
    # the printed large-s form is off by a constant factor 8 / pi in the plane
    assert f_tilde_asymptote(8.0, prm) / v == pytest.approx(8 / math.pi, rel=0.01)


def test_f_tilde_rejects():
    with pytest.raises(InvalidInput):
        f_tilde_tail(1.0, ModelParams(2, 3.0))
    with pytest.raises(InvalidInput):
        f_tilde_tail(0.0, ModelParams(2, 2.0))


def test_ball_integral_monte_carlo_s1():
    rho = math.exp(-1)
    rng = stream(0, "mc-ball")
    total, total2, n = 0.0, 0.0, 10 ** 7
    for _ in range(10):
        m = n // 10
        r = rho * np.sqrt(rng.uniform(size=m))
        th = rng.uniform(0, 2 * math.pi, m)
        g = 1.0 / ((1 - r * np.cos(th)) ** 2 + (r * np.sin(th)) ** 2)
        total += g.sum()
        total2 += (g ** 2).sum()
    mean = total / n
    sd = math.sqrt(total2 / n - mean ** 2)
    area = math.pi * rho ** 2
    I = ball_integral(rho).value
    assert abs(area * mean - I) < 3 * area * sd / math.sqrt(n)
    v = f_tilde_tail(1.0, ModelParams(2, 2.0, 1.0))
    assert v == pytest.approx(-math.expm1(-area * mean), abs=3 * area * sd / math.sqrt(n))


@pytest.mark.parametrize("rho", [0.05, 0.3, 0.7, 0.95])
@pytest.mark.parametrize("d", [2, 3])
def test_ball_integral_two_schemes(rho, d):
    a = ball_integral(rho, d, scheme="gk")
    b = ball_integral(rho, d, scheme="simpson")
    assert abs(a.value - b.value) <= 10 * (a.error + b.error) + 1e-12
    assert ball_integral_chord_form(rho, d) == pytest.approx(a.value, rel=1e-7)


def test_ball_integral_d3_against_cartesian_quadrature():
    rho = 0.5
    g = lambda z, y, x: 1.0 / ((1 - x) ** 2 + y ** 2 + z ** 2) ** 1.5
    ref = integrate.tplquad(g, -rho, rho, lambda x: -math.sqrt(rho ** 2 - x ** 2),
                            lambda x: math.sqrt(rho ** 2 - x ** 2),
                            lambda x, y: -math.sqrt(max(rho ** 2 - x ** 2 - y ** 2, 0)),
                            lambda x, y: math.sqrt(max(rho ** 2 - x ** 2 - y ** 2, 0)), epsabs=1e-9)[0]
    assert ball_integral(rho, 3).value == pytest.approx(ref, rel=1e-6)


def test_alt_form_has_doubled_exponent():
    # the chord form already covers both half-planes; the extra factor 2 doubles it
    prm = ModelParams(2, 2.0, 1.0)
    for s in (0.5, 1.0, 3.0):
        alt = -math.log1p(-f_tilde_alt_form(s, prm))
        true = -math.log1p(-f_tilde_tail(s, prm))
        assert alt == pytest.approx(2 * true, rel=1e-7)


# -- mu tilde ----------------------------------------------------------------

def test_mu_tilde_dual_scheme_and_finite():
    prm = ModelParams(2, 2.0, 1.0)
    a = mu_tilde(prm, scheme="gk")
    b = mu_tilde(prm, scheme="simpson")
    assert a.converged and math.isfinite(a.value) and a.value > 0
    assert abs(a.value - b.value) < 1e-8


def test_mu_tilde_increasing_in_c():
    vals = [mu_tilde(ModelParams(2, 2.0, c)).value for c in (0.5, 1.0, 2.0)]
    assert vals[0] < vals[1] < vals[2]


def test_mu_tilde_cutoff_bound():
    m = mu_tilde(ModelParams(2, 2.0, 1.0))
    rest = gauss_kronrod(lambda s: f_tilde_tail(s, ModelParams(2, 2.0, 1.0)), m.cutoff, m.cutoff + 20).value
    assert rest < m.tail_bound


# -- chords ------------------------------------------------------------------

def test_chord_at_zero():
    A, B = chord_points(0.0, 0.3)
    assert A == pytest.approx(0.3) and B == pytest.approx(1.7)


@given(st.floats(0.01, 0.99), st.floats(0.0, 0.999))
def test_chord_vieta_and_order(u, frac):
    th = frac * math.asin(1 - u)
    A, B = chord_points(th, u)
    assert A * B == pytest.approx(u * (2 - u), rel=1e-12)
    assert A <= B
    c = math.cos(th)
    disc = 1 - u * (2 - u) / c ** 2
    if disc > 1e-6:
        assert B == pytest.approx(c * (1 + math.sqrt(disc)), rel=1e-10)
        assert A == pytest.approx(c * (1 - math.sqrt(disc)), rel=1e-6, abs=1e-12)


def test_chord_outside_domain():
    with pytest.raises(InvalidInput):
        chord_points(math.asin(0.7) + 1e-3, 0.3)
    with pytest.raises(InvalidInput):
        chord_points(0.1, 1.0)


# -- log-log -----------------------------------------------------------------

def test_loglog_limit_values():
    assert loglog_limit(2, 1.0) == pytest.approx(1.442695, abs=1e-6)
    assert loglog_limit(3, 1.5) == pytest.approx(1 / math.log(4))
    assert loglog_limit(2, 2 - 1e-9) > 1e8
    assert contraction_alpha(2, 1.0) == 0.5
    with pytest.raises(InvalidInput):
        loglog_limit(2, 2.0)


def test_schemes_agree_on_smooth_integrals():
    for f, a, b in [(math.exp, 0, 1), (lambda x: 1 / (1 + x * x), 0, 10), (math.sin, 0, math.pi)]:
        g, s = gauss_kronrod(f, a, b), adaptive_simpson(f, a, b)
        assert abs(g.value - s.value) <= 10 * (g.error + s.error) + 1e-12


def test_tail_curve_kinds():
    prm = ModelParams(2, 1.0)
    c = tail_curve("q-limit", prm, [0, 0.5, 1.0])
    assert c.check() and c.to_csv().splitlines()[0] == "t,value"
    with pytest.raises(InvalidInput):
        tail_curve("nope", prm, [1.0])

import math

import mpmath
import numpy as np
import pytest
from scipy.special import ellipe, ellipk

from renormasym import kdv
from renormasym.kdv import (OutOfRangeError, PhiField, gp_dsw_Z, gp_renormalized, green_delta_check,
                            renorm_weak_kdv, renorm_weak_kdv_field, sigma_array, sigma_of_y, whitham_lhs)
from renormasym.profiles import make_ramp_profile, make_smoothed_step

RAMP = make_ramp_profile("kdv_t2")


def lhs_mp(s):
    # 1 + s^2 - 2 s^2 (1 - s^2) K / (E - (1 - s^2) K), parameter m = s^2
    m = mpmath.mpf(s) ** 2
    K, E = mpmath.ellipk(m), mpmath.ellipe(m)
    return 1 + m - 2 * m * (1 - m) * K / (E - (1 - m) * K)


# --------------------------------------------------------------------------
# Whitham modulation

def test_whitham_relation_residual_at_interior_points():
    ys = np.linspace(-1, 2 / 3, 202)[1:-1]
    worst = 0.0
    for y in ys:
        s = sigma_of_y(y).sigma
        if s < 1.0:
            worst = max(worst, abs(float(lhs_mp(s)) - 3 * y))
    assert worst <= 1e-9


def test_sigma_end_values():
    assert sigma_of_y(-1.0).sigma == pytest.approx(0.0, abs=1e-8)
    assert sigma_of_y(2 / 3).sigma == pytest.approx(1.0, abs=1e-8)
    # one step inside each end
    assert sigma_of_y(-1 + 1e-9).sigma < 1e-3
    assert sigma_of_y(2 / 3 - 1e-9).sigma > 0.99


def test_sigma_monotone_and_array_agrees():
    ys = np.linspace(-1, 2 / 3, 200)
    s = sigma_array(ys)
    assert np.all(np.diff(s) >= 0)
    ref = np.array([sigma_of_y(y).sigma for y in ys[::10]])
    assert np.max(np.abs(s[::10] - ref)) < 1e-9


def test_sigma_at_zero_against_scan():
    # brute-force sign change of the relation on a fine sigma grid (scipy uses m = sigma^2)
    s = np.linspace(1e-6, 1 - 1e-6, 10**6)
    m = s * s
    K, E = ellipk(m), ellipe(m)
    r = 1 + m - 2 * m * (1 - m) * K / (E - (1 - m) * K)
    i = int(np.flatnonzero(np.diff(np.sign(r)) != 0)[0])
    assert sigma_of_y(0.0).sigma == pytest.approx(s[i], abs=2e-6)


def test_whitham_lhs_limits():
    # 3y at y = -1 and y = 2/3
    assert float(whitham_lhs(0.0)) == pytest.approx(-3.0, abs=1e-12)
    assert float(whitham_lhs(1.0)) == 2.0


def test_sigma_rejects_outside():
    with pytest.raises(ValueError):
        sigma_of_y(0.7)
    with pytest.raises(ValueError):
        sigma_array(np.array([-1.1]))


# --------------------------------------------------------------------------
# step solution

def test_Z_edges():
    a, t = 1.0, 2.0
    assert gp_dsw_Z(-a * t - 1e-9, t, a) == pytest.approx(a, abs=1e-6)
    assert gp_dsw_Z(-a * t + 1e-9, t, a) == pytest.approx(a, abs=1e-6)
    assert gp_dsw_Z(2 * a * t / 3 - 1e-9, t, a) == pytest.approx(2 * a, abs=1e-6)
    assert gp_dsw_Z(2 * a * t / 3 + 1e-9, t, a) == 0.0


def test_Z_range_and_outer_states():
    for a, t, eps in ((1.0, 3.0, 1.0), (2.0, 1.0, 0.05)):
        x = np.linspace(-1.5 * a * t, a * t, 4001)
        Z = gp_dsw_Z(x, t, a, eps)
        assert np.all(Z >= -1e-12) and np.all(Z <= 2 * a + 1e-12)
        assert np.all(Z[x < -a * t] == a) and np.all(Z[x > 2 * a * t / 3] == 0.0)


def test_Z_matches_mpmath_dn():
    a, t, eps, x = 1.0, 4.0, 1.0, 0.3
    y = x / (a * t)
    s = sigma_of_y(y).sigma
    om = (y - (1 + s * s) / 3) / math.sqrt(6)
    dn = mpmath.ellipfun("dn", a**1.5 * t * om / math.sqrt(eps), m=s * s)
    assert gp_dsw_Z(x, t, a, eps) == pytest.approx(a * float(2 * dn**2 + s * s - 1), abs=1e-12)


def test_Z_rejects_bad_arguments():
    with pytest.raises(ValueError):
        gp_dsw_Z(0.0, 0.0)


def test_gp_renormalized_tends_to_Z():
    p = make_smoothed_step(1.0, 0.0)
    t, eps = 1.0, 1.0
    x = np.array([-0.5, 0.0, 0.4])
    errs = [np.max(np.abs(gp_renormalized(p, x, t, eps, r) - gp_dsw_Z(x, t, 1.0, eps)))
            for r in (0.02, 0.01, 0.005)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[1] / errs[2] > 3.0


def test_gp_renormalized_outer_states_and_scalar():
    p = make_smoothed_step(1.0, 0.0)
    v = gp_renormalized(p, -3.0, 1.0, 1.0, 0.01)
    assert isinstance(v, float) and v == pytest.approx(1.0, abs=1e-10)
    assert gp_renormalized(p, 3.0, 1.0, 1.0, 0.01) == pytest.approx(0.0, abs=1e-10)


def test_gp_renormalized_needs_step_to_zero():
    with pytest.raises(ValueError):
        gp_renormalized(make_smoothed_step(1.0, -1.0), 0.0, 1.0, 1.0, 0.1)
    with pytest.raises(ValueError):
        gp_renormalized(RAMP, 0.0, 1.0, 1.0, 0.1)


# --------------------------------------------------------------------------
# ramp solver

def test_initial_slice_is_exact(phi_small):
    x = phi_small.grid[np.abs(phi_small.grid) < 20]
    assert np.max(np.abs(phi_small(x, 0.0) - np.where(x < 0, -x, 0.0))) == 0.0


def test_resolution_ladder_agrees(phi_ladder):
    a, b = phi_ladder[2048], phi_ladder[4096]
    late = a.times >= a.diagnostics["settle_time"]
    core = np.abs(a.grid) < 20
    d = np.abs(a.v[late][:, core] - b.v[late][:, ::2][:, core])
    assert d.max() < 10 * a.tol


def test_phi_solves_the_equation_at_nodes(phi_small):
    ph = phi_small
    k = np.fft.rfftfreq(ph.N, d=ph.dx) * 2 * np.pi
    j = int(np.argmin(np.abs(ph.times - 0.2)))
    t = ph.times[j]
    V = ph.values

    def spec(u, m):
        return np.fft.irfft((1j * k) ** m * np.fft.rfft(u), n=ph.N)

    x = ph.grid
    bg = ph._bg
    u_t = (V[j - 2] - 8 * V[j - 1] + 8 * V[j + 1] - V[j + 2]) / (12 * ph.store_dt)
    u_x = bg.g(x, 1) / (1 - t) + spec(ph.v[j], 1)
    u_xxx = bg.g(x, 3) / (1 - t) + spec(ph.v[j], 3)
    r = (u_t + V[j] * u_x + u_xxx)[np.abs(x) < 5]
    assert np.max(np.abs(r)) < 1e-5


def test_phi_left_state_follows_characteristics(phi_small):
    # far left Phi = -x / (1 - t) up to the dispersive tail
    t = 0.25
    x = np.array([-20.0, -15.0])
    assert np.allclose(phi_small(x, t), -x / (1 - t), rtol=1e-3)


def test_phi_save_load_round_trip(phi_small, tmp_path):
    path = tmp_path / "phi.npz"
    phi_small.save(path)
    back = PhiField.load(path)
    assert np.array_equal(back.v, phi_small.v) and np.array_equal(back.times, phi_small.times)
    assert back.header() == phi_small.header()


def test_phi_load_rejects_foreign_file(tmp_path):
    path = tmp_path / "x.npz"
    np.savez(path, header=np.array('{"format": "other"}'), times=np.zeros(1), v=np.zeros((1, 4)))
    with pytest.raises(ValueError):
        PhiField.load(path)


def test_phi_out_of_range(phi_small):
    lo, hi = phi_small.x_range(0.25)
    with pytest.raises(OutOfRangeError):
        phi_small(np.array([hi + 1.0]), 0.1)
    with pytest.raises(OutOfRangeError):
        phi_small(np.array([lo - 1.0]), 0.25)
    with pytest.raises(OutOfRangeError):
        phi_small(np.array([0.0]), 0.3)


def test_solver_argument_checks():
    with pytest.raises(ValueError):
        kdv.solve_faminskii(delta=1.0)
    with pytest.raises(ValueError):
        kdv.solve_faminskii(N=100, L=10.0, sponge_width=6.0)


@pytest.mark.filterwarnings("ignore::renormasym.kdv.BoundaryContaminationWarning")
def test_resolution_error_when_too_coarse():
    with pytest.raises(kdv.ResolutionError):
        kdv.solve_faminskii(L=40.0, N=256, delta=0.05, tol=1e-9, store_dt=0.0025, sponge_width=10.0)


# --------------------------------------------------------------------------
# renormalized weak-discontinuity solution

def test_kernel_transform_closed_form():
    # Lambda'' = sech^2(s) / 2 has transform (pi q / 2) / sinh(pi q / 2)
    q = np.linspace(0.01, 8.0, 50)
    L = kdv._kernel_transform(make_ramp_profile("kdv_t2"), q)
    assert np.max(np.abs(L - (np.pi * q / 2) / np.sinh(np.pi * q / 2))) < 1e-12


def test_initial_identity_spectral(phi_small):
    eps = 0.1
    x = np.linspace(-5, 5, 201)
    R = renorm_weak_kdv(RAMP, phi_small, x, 0.0, eps, method="spectral")
    assert np.max(np.abs(R - eps * RAMP.value(x / eps))) < 1e-6


def test_interp_and_spectral_agree(phi_small):
    x = np.linspace(-5, 5, 41)
    a = renorm_weak_kdv(RAMP, phi_small, x, 0.2, 0.1)
    b = renorm_weak_kdv(RAMP, phi_small, x, 0.2, 0.1, method="spectral")
    assert np.max(np.abs(a - b)) < 1e-5


def test_tends_to_phi(phi_small):
    ref = float(phi_small(0.5, 0.2))
    errs = [abs(float(renorm_weak_kdv(RAMP, phi_small, 0.5, 0.2, e, method="spectral")) - ref)
            for e in (0.2, 0.1, 0.05)]
    assert errs[0] > errs[1] > errs[2]


def test_field_is_cached_between_times(phi_small):
    f = renorm_weak_kdv_field(RAMP, phi_small, 0.1)
    x = np.array([-1.0, 0.0, 1.0])
    a = f(x, 0.1)
    b = f(x, np.array([0.1, 0.1, 0.1]))
    assert np.array_equal(a, b)


def test_renorm_kdv_rejects_bad_method(phi_small):
    with pytest.raises(ValueError):
        renorm_weak_kdv(RAMP, phi_small, 0.0, 0.1, 0.1, method="nope")
    with pytest.raises(ValueError):
        renorm_weak_kdv(RAMP, phi_small, 0.0, 0.1, 0.0)


# --------------------------------------------------------------------------
# Green functions

def bump(e):
    return np.where(np.abs(e) < 1, np.exp(-1 / np.maximum(1 - e * e, 1e-300)), 0.0) * math.e


def dbump(e):
    inside = np.abs(e) < 1
    q = np.maximum(1 - e * e, 1e-300)
    return np.where(inside, bump(e) * (-2 * e / q**2), 0.0)


def test_green_burgers_concentrates():
    rep = green_delta_check([0.1, 0.03, 0.01, 0.003], bump)
    assert rep.passed and rep.target == pytest.approx(1.0)
    assert "PASS" in str(rep)


def test_green_burgers_unit_mass():
    rep = green_delta_check([0.5, 0.05], lambda e: np.ones_like(e), support=(-40.0, 40.0))
    assert max(rep.errors) < 1e-12


def test_green_kdv_is_diagnostic():
    rep = green_delta_check([0.3, 0.1], bump, dbump, kind="kdv")
    assert rep.passed is None and not rep.gated
    assert all(math.isfinite(v) for v in rep.values)
    with pytest.raises(ValueError):
        green_delta_check([0.1], bump, kind="kdv")

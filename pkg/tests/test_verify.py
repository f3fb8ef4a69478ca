import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from renormasym.burgers import psi, u0_weak
from renormasym.profiles import make_ramp_profile
from renormasym.quadrature import integrate_line
from renormasym.verify import (FDContaminationWarning, FootprintError, ResidualReport, compare_fields, fd_weights,
                               fit_order, kdv_soliton, pde_residual, planted_family, residual_sweep)


def test_fd_weights_reproduce_known_stencils():
    assert np.allclose(fd_weights([-1, 0, 1], 1), [-0.5, 0.0, 0.5])
    assert np.allclose(fd_weights([-1, 0, 1], 2), [1.0, -2.0, 1.0])
    assert np.allclose(fd_weights(range(-2, 3), 1), np.array([1, -8, 0, 8, -1]) / 12)
    assert np.allclose(fd_weights(range(-3, 4), 3), np.array([1, -8, 13, 0, -13, 8, -1]) / 8)


@given(st.integers(0, 4))
@settings(max_examples=20, deadline=None)
def test_fd_weights_exact_on_polynomials(p):
    offs = np.arange(-3, 4)
    w = fd_weights(offs, 3)
    exact = 6.0 if p == 3 else 0.0
    assert w @ offs.astype(float) ** p == pytest.approx(exact, abs=1e-10)


def test_residual_of_constant_is_zero():
    const = lambda x, t: np.full(np.broadcast(x, t).shape, 0.7)  # noqa: E731
    for eq in ("burgers_unit_viscosity", "kdv_unit_dispersion"):
        r = pde_residual(const, eq, np.linspace(-1, 1, 5), 0.5, 0.1)
        assert np.max(np.abs(r)) < 1e-13


@pytest.mark.parametrize("equation,field", [("burgers_unit_viscosity", u0_weak),
                                            ("kdv_unit_dispersion", kdv_soliton(1.0))])
def test_exact_solution_residual_is_fourth_order(equation, field):
    x = np.linspace(-2, 2, 9)
    r1 = np.max(np.abs(pde_residual(field, equation, x, 0.4, 0.02)))
    r2 = np.max(np.abs(pde_residual(field, equation, x, 0.4, 0.01)))
    assert r1 / r2 >= 8.0


def test_residual_footprint_and_equation_checks():
    with pytest.raises(FootprintError):
        pde_residual(u0_weak, "burgers_unit_viscosity", [0.0], 0.01, 0.01, domain=(-5, 5, 0.0, 1.0))
    with pytest.raises(ValueError):
        pde_residual(u0_weak, "heat", [0.0], 0.5, 0.01)


def test_fit_order_on_power_law():
    eps = np.array([0.2, 0.1, 0.05, 0.025])
    order, r2 = fit_order(eps, 3.0 * eps**1.7)
    assert abs(order - 1.7) < 1e-10 and abs(r2 - 1.0) < 1e-12
    assert math.isnan(fit_order([0.1], [1.0])[0])


@pytest.mark.parametrize("order", [1.0, 1.5])
@pytest.mark.parametrize("equation", ["burgers_unit_viscosity", "kdv_unit_dispersion"])
def test_planted_order_is_recovered(order, equation):
    rep = residual_sweep(planted_family(order, equation), equation, (-2.0, 2.0, 41, 0.5),
                         [0.2, 0.1, 0.05, 0.025], h_factor=0.05)
    assert abs(rep.fitted_order - order) <= 0.02


def test_report_validation():
    with pytest.raises(ValueError):
        ResidualReport([0.1, 0.2], [1.0, 1.0], [1.0, 1.0], [0.1, 0.1], 1.0, 1.0, {})
    with pytest.raises(ValueError):
        ResidualReport([0.2, 0.1], [1.0, 0.0], [1.0, 1.0], [0.1, 0.1], 1.0, 1.0, {})


def test_report_files(tmp_path):
    rep = residual_sweep(planted_family(1.0), "burgers_unit_viscosity", (-1.0, 1.0, 11, 0.5), [0.2, 0.1],
                         h_factor=0.05)
    rep.write_csv(tmp_path / "r.csv")
    rep.write_json(tmp_path / "r.json")
    rows = (tmp_path / "r.csv").read_text().splitlines()
    assert rows[0] == "epsilon,norm_max,norm_l2,h" and len(rows) == 3
    data = json.loads((tmp_path / "r.json").read_text())
    assert data["fitted_order"] == pytest.approx(rep.fitted_order)
    assert data["window"]["n_points"] == 11


def test_contamination_warning():
    # a residual dominated by the stencil error must be flagged
    rough = lambda x, t: np.sin(40 * np.asarray(x)) * 1e-3 + u0_weak(x, t)  # noqa: E731
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        rep = residual_sweep(lambda e: rough, "burgers_unit_viscosity", (-1, 1, 11, 0.5), [0.2, 0.1])
    assert any(issubclass(x.category, FDContaminationWarning) for x in w)
    assert max(rep.fd_contamination) > 0.1


def test_compare_fields():
    win = (-1.0, 1.0, 21, 0.5)
    assert compare_fields(u0_weak, u0_weak, win) == 0.0
    one = lambda x, t: np.ones_like(np.asarray(x, dtype=float))  # noqa: E731
    zero = lambda x, t: np.zeros_like(np.asarray(x, dtype=float))  # noqa: E731
    assert compare_fields(one, zero, win) == 1.0
    assert compare_fields(one, zero, win, "L2") == pytest.approx(math.sqrt(2.0))
    with pytest.raises(ValueError):
        compare_fields(one, zero, win, "L1")


def test_first_moment_identity_remainder():
    # int L''' ln Psi(x - eps s) ds = eps Psi_x/Psi + O(eps^2); the softplus L''' is odd,
    # so its second moment vanishes and the remainder is O(eps^3)
    p = make_ramp_profile()
    x, t = 0.4, 0.5
    errs = []
    for eps in (0.1, 0.05, 0.025):
        cert = p.d3_tail.times_growth(2, 2.0)
        val = integrate_line(lambda s: p.d3(s) * psi(x - eps * s, t).log_psi, cert, rel_tol=1e-12)
        errs.append(abs(val - eps * float(psi(x, t).psi_x_over_psi)))
    order, _ = fit_order([0.1, 0.05, 0.025], errs)
    assert 2.9 < order < 3.1

"""Burgers equation: weak-discontinuity solution, renormalized convolutions and
an exact Cole-Hopf oracle.

Everything here is vectorized over the evaluation points ``x`` (and ``t``
where noted); convolutions integrate the whole batch on one shared panel
partition.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .profiles import InitialProfile
from .quadrature import TailCertificate, integrate_interval, integrate_line
from .specfun import erfc, log_erfcx

__all__ = [
    "AsymptoticParams",
    "PsiValue",
    "cole_hopf_reference",
    "green_burgers",
    "large_gradient_burgers",
    "psi",
    "renorm_weak_burgers",
    "riemann_burgers",
    "u0_weak",
]

# the first integral in Psi diverges as t -> 1
T_MAX = 1.0 - 1e-9


@dataclass(frozen=True)
class AsymptoticParams:
    """Small parameters; ``regime`` is ``"large_gradient"``, ``"weak"`` or ``"kdv"``."""

    epsilon: float
    rho: float = 0.0
    regime: str = "weak"

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.regime in ("large_gradient", "kdv") and self.rho <= 0:
            raise ValueError("rho must be positive in the large-gradient regimes")

    @property
    def mu(self) -> float:
        if self.regime == "kdv":
            return self.rho / math.sqrt(self.epsilon)
        if self.regime == "large_gradient":
            return self.rho / self.epsilon
        return 0.0


@dataclass(frozen=True)
class PsiValue:
    log_psi: np.ndarray
    psi_x_over_psi: np.ndarray
    psi_xx_over_psi: np.ndarray


def _check_time(t):
    t = np.asarray(t, dtype=float)
    if np.any((t <= 0) | (t >= T_MAX)):
        raise ValueError("Psi is defined for 0 < t < 1 only")
    return t


def _log_erfc(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = log_erfcx(z[pos]) - z[pos] ** 2
    out[~pos] = np.log(erfc(z[~pos]))  # erfc lies in (1, 2] here
    return out


def psi(x, t) -> PsiValue:
    """Heat solution Psi(x, t) in log form, with Psi_x/Psi and Psi_xx/Psi.

    Closed forms: the integral over sigma > 0 is sqrt(pi t) erfc(-x / 2 sqrt t);
    the one over sigma < 0 is sqrt(pi t / (1-t)) erfcx(x / 2 sqrt(t(1-t)))
    exp(-x^2 / 4t).  Both carry exp(-x^2/4t), which is factored out.
    The sum is multiplied by the heat-kernel normalization (4 pi t)^(-1/2) so
    that Psi_t = Psi_xx holds exactly; the ratios and u0 do not see it.
    """
    t = _check_time(t)
    x = np.asarray(x, dtype=float)
    x, t = np.broadcast_arrays(x, t)
    one_minus = 1.0 - t
    l1 = 0.5 * np.log(np.pi * t / one_minus) + log_erfcx(x / (2.0 * np.sqrt(t * one_minus)))
    l2 = 0.5 * np.log(np.pi * t) + log_erfcx(-x / (2.0 * np.sqrt(t)))
    lse = np.logaddexp(l1, l2)
    r1 = np.exp(l1 - lse)
    rg = np.exp(-lse)
    # the same two terms with exp(-x^2/4t) cancelled analytically: subtracting
    # x^2/4t from lse would leave rounding noise of size eps * x^2/4t
    z1 = x / (2.0 * np.sqrt(t * one_minus))
    # x^2/4(1-t) + ln erfc(z1) cancels for z1 > 0; there use -x^2/4t + ln erfcx(z1)
    m1 = 0.5 * np.log(np.pi * t / one_minus) + np.where(
        z1 < 0, x * x / (4.0 * one_minus) + _log_erfc(np.minimum(z1, 0.0)),
        -x * x / (4.0 * t) + log_erfcx(np.maximum(z1, 0.0)))
    m2 = 0.5 * np.log(np.pi * t) + _log_erfc(-x / (2.0 * np.sqrt(t)))
    log_psi = np.logaddexp(m1, m2) - 0.5 * np.log(4.0 * np.pi * t)
    # right of the corner Psi -> 1; write ln Psi = log1p(q) so that its
    # rounding error scales with its size instead of with ln(4 pi t)
    right = x >= 0
    if np.any(right):
        xr, tr = x[right], t[right]
        q = (np.exp(m1[right] - 0.5 * np.log(4.0 * np.pi * tr))
             - 0.5 * erfc(xr / (2.0 * np.sqrt(tr))))
        log_psi = np.array(log_psi, dtype=float)
        log_psi[right] = np.log1p(q)
    px = x * r1 / (2.0 * one_minus) - t * rg / one_minus
    pxx = r1 * (0.5 / one_minus + x * x / (4.0 * one_minus**2)) - x * t * rg / (2.0 * one_minus**2)
    return PsiValue(log_psi, px, pxx)


def u0_weak(x, t):
    """Exact unit-viscosity Burgers solution from -x Theta(-x): -2 Psi_x / Psi."""
    return -2.0 * psi(x, t).psi_x_over_psi


def _log_psi_bound(x_abs_max, t):
    # |ln Psi(u, t)| <= c0 + u^2 / (4(1-t)); generous additive constant
    c0 = 2.0 + abs(0.5 * math.log(4.0 * math.pi * t)) + abs(0.5 * math.log(1.0 / (1.0 - t)))
    return c0, 0.25 / (1.0 - t)


def renorm_weak_burgers(p: InitialProfile, x, t, eps, rel_tol=1e-12):
    """R(x,t,eps) = -(2/eps) * integral of Lambda'''(s) ln Psi(x - eps s, t) ds.

    ``x`` and ``t`` broadcast; all points are integrated as one batch.
    """
    if p.d3_tail is None:
        raise ValueError(f"profile {p.name} has no certificate for Lambda'''")
    if eps <= 0:
        raise ValueError("eps must be positive")
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), _check_time(t))
    shape = x.shape
    xf, tf = x.ravel(), t.ravel()
    t_hi = float(tf.max())
    c0, c2 = _log_psi_bound(float(np.abs(xf).max()), t_hi)
    xm = float(np.abs(xf).max())
    coeff = c0 + 2.0 * c2 * max(xm * xm, eps * eps)
    cert = p.d3_tail.times_growth(2, coeff)

    def integrand(s, xs=xf, ts=tf):
        u = xs[None, :] - eps * s[:, None]
        return p.d3(s)[:, None] * psi(u, ts[None, :]).log_psi

    if math.sqrt(float(tf.min())) / eps >= 0.5:
        val = integrate_line(integrand, cert, rel_tol=rel_tol)
    else:
        # ln Psi(x - eps s) bends at s = x / eps over a width sqrt(t) / eps; a
        # shared partition would have to resolve every corner, so go point by point
        val = np.array([
            integrate_line(lambda s, i=i: integrand(s, xf[i:i + 1], tf[i:i + 1]), cert,
                           rel_tol=rel_tol, breakpoints=[xf[i] / eps])[0]
            for i in range(xf.size)])
    return (-2.0 / eps * val).reshape(shape)


def _riemann_weights(X, t, eps, lp, lm):
    # log erfcx of the two branch arguments after the common Gaussian cancels
    root = 2.0 * np.sqrt(eps * t)
    lw_plus = log_erfcx((lp * t - X) / root)
    lw_minus = log_erfcx((X - lm * t) / root)
    return lw_plus, lw_minus


def riemann_burgers(x, t, eps, lambda_minus, lambda_plus):
    """Viscous Burgers solution from the jump ``lambda_minus | lambda_plus`` at x=0."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("t must be positive")
    lw_p, lw_m = _riemann_weights(x, t, eps, lambda_plus, lambda_minus)
    return lambda_plus + (lambda_minus - lambda_plus) * expit(lw_m - lw_p)


def green_burgers(eta, theta, lambda_minus, lambda_plus):
    """Gamma_eta / (lambda_plus - lambda_minus) for the unit-viscosity Riemann solution."""
    eta = np.asarray(eta, dtype=float)
    root = 2.0 * np.sqrt(theta)
    bp = (lambda_plus * theta - eta) / root
    bm = (eta - lambda_minus * theta) / root
    lp_, lm_ = log_erfcx(bp), log_erfcx(bm)
    p = expit(lp_ - lm_)
    # d/dB log erfcx(B) = 2B - 2 / (sqrt(pi) erfcx(B))
    inv = (np.exp(-lp_) + np.exp(-lm_)) / math.sqrt(math.pi)
    return p * (1.0 - p) * 2.0 / root * (inv - (bp + bm))


def large_gradient_burgers(p: InitialProfile, x, t, eps, rho, rel_tol=1e-10):
    """Convolution of the Riemann kernel with Lambda'(s) / (Lambda+ - Lambda-).

    The exp * erfc products are rewritten through erfcx so the Gaussian
    factor exp(-(x - rho s)^2 / 4 eps t) cancels between numerator and
    denominator; the kernel is then a logistic blend of the two limits.
    """
    lm, lp = p.limit_minus, p.limit_plus
    if not (math.isfinite(lm) and math.isfinite(lp)) or lm == lp:
        raise ValueError("large-gradient formula needs distinct finite limits")
    if p.d1_tail is None:
        raise ValueError(f"profile {p.name} has no certificate for Lambda'")
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    if np.any(t <= 0):
        raise ValueError("t must be positive")
    shape = x.shape
    xf, tf = x.ravel(), t.ravel()
    jump = lp - lm
    lo, hi = min(lm, lp), max(lm, lp)
    cert = TailCertificate(
        p.d1_tail.left_order, p.d1_tail.right_order,
        p.d1_tail.constant * max(abs(lm), abs(lp), 1e-300) / abs(jump),
        p.d1_tail.threshold, p.d1_tail.left_rate, p.d1_tail.right_rate,
    )

    def integrand(s):
        X = xf[None, :] - rho * s[:, None]
        lw_p, lw_m = _riemann_weights(X, tf[None, :], eps, lp, lm)
        kern = lp + (lm - lp) * expit(lw_m - lw_p)
        # convex combination of the limits at every node
        assert np.all((kern >= lo - 1e-12) & (kern <= hi + 1e-12))
        return p.d1(s)[:, None] / jump * kern

    val = integrate_line(integrand, cert, rel_tol=rel_tol)
    return np.asarray(val).reshape(shape)


def _potential_by_quadrature(u_init, y):
    """Integral of u_init from 0 to each y (Gauss-Legendre on short sub-panels)."""
    y = np.asarray(y, dtype=float)
    flat = y.ravel()
    order = np.argsort(flat)
    ys = np.concatenate([[0.0], flat[order]])
    ys_sorted = np.sort(ys)
    zero_pos = np.searchsorted(ys_sorted, 0.0)
    gaps = np.diff(ys_sorted)
    n_sub = np.maximum(1, np.ceil(gaps / 0.05).astype(int))
    xg, wg = np.polynomial.legendre.leggauss(8)
    seg_int = np.zeros(gaps.size)
    reps = np.repeat(np.arange(gaps.size), n_sub)
    offs = np.concatenate([np.arange(n) for n in n_sub]) if gaps.size else np.zeros(0, int)
    h = gaps[reps] / n_sub[reps]
    a = ys_sorted[:-1][reps] + offs * h
    nodes = a[:, None] + 0.5 * h[:, None] * (xg[None, :] + 1.0)
    vals = np.asarray(u_init(nodes.ravel())).reshape(nodes.shape)
    np.add.at(seg_int, reps, 0.5 * h * (vals @ wg))
    cum = np.concatenate([[0.0], np.cumsum(seg_int)])
    cum -= cum[zero_pos]
    # ys_sorted includes the inserted 0; map the sorted data values back
    idx = np.searchsorted(ys_sorted, flat[order], side="left")
    idx = np.where((idx == zero_pos) & (flat[order] > 0), idx + 1, idx)
    out = np.empty_like(flat)
    out[order] = cum[idx]
    return out.reshape(y.shape)


def cole_hopf_reference(u_init, x, t, eps, potential=None, y_range=None,
                        rel_tol=1e-11, scan_points=None):
    """Exact viscous Burgers solution by the Cole-Hopf quadrature.

    u(x,t) = int ((x-y)/t) exp(-G/2eps) dy / int exp(-G/2eps) dy with
    G(y) = P(y) + (x-y)^2 / 2t and P the antiderivative of ``u_init`` from 0
    (pass ``potential`` when it is known in closed form).  The exponent is
    shifted by its maximum over a scan grid before exponentiation.
    ``y_range`` defaults to 60 units beyond the evaluation points.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    shape = np.shape(x)
    xf = x.ravel()
    if t <= 0:
        raise ValueError("t must be positive")
    pot = potential if potential is not None else (lambda y: _potential_by_quadrature(u_init, y))
    if y_range is None:
        y_range = (float(xf.min()) - 60.0, float(xf.max()) + 60.0)
    ya, yb = map(float, y_range)
    width = math.sqrt(eps * t)
    n_scan = scan_points or int(min(200000, max(2001, 4 * (yb - ya) / width)))
    ys = np.linspace(ya, yb, n_scan)
    Pys = pot(ys)

    def exponent(y, Py):
        return -(Py[:, None] + (xf[None, :] - y[:, None]) ** 2 / (2.0 * t)) / (2.0 * eps)

    E = exponent(ys, Pys)
    emax = E.max(axis=0)
    # restrict to where some integrand is above exp(-45) of its peak
    live = np.any(E - emax > -45.0, axis=1)
    idx = np.flatnonzero(live)
    dy = ys[1] - ys[0]
    a = max(ya, ys[idx[0]] - 2 * dy)
    b = min(yb, ys[idx[-1]] + 2 * dy)
    n_init = int(min(4000, max(8, math.ceil((b - a) / (0.5 * width)))))

    def integrand(y):
        ex = exponent(y, pot(y)) - emax[None, :]
        if np.any(ex > 700.0):
            raise OverflowError("Cole-Hopf exponent shift insufficient; refine scan_points")
        wgt = np.exp(ex)
        return np.stack([(xf[None, :] - y[:, None]) / t * wgt, wgt], axis=1)

    val, _ = integrate_interval(integrand, a, b, rel_tol=rel_tol, initial_panels=n_init,
                                max_panels=max(4000, 8 * n_init))
    num, den = val[0], val[1]
    if not np.all(np.isfinite(den)) or np.any(den <= 0):
        raise OverflowError("Cole-Hopf denominator not representable")
    return (num / den).reshape(shape)

"""Special functions used by the asymptotic formulas.

All functions accept scalars or numpy arrays and are pure.  The error
function family is evaluated with a positive-term series near the origin and
a continued fraction for the scaled complement further out; the complete
elliptic integrals use the arithmetic-geometric mean and ``dn`` uses the
descending Landen (AGM) transformation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "EllipticPair",
    "NoBracketError",
    "bracket_root",
    "elliptic_B",
    "elliptic_KE",
    "erfc",
    "erfcx",
    "jacobi_dn",
    "log_erfcx",
]

SQRT_PI = math.sqrt(math.pi)
# |x| below this uses the series for erf, above it the continued fraction.
_SPLIT = 1.25
_SERIES_TERMS = 40
_CF_DEPTH = 150
# exp(x**2) overflows a double past this point
_EXP_SQ_MAX = math.sqrt(math.log(np.finfo(float).max))


class NoBracketError(ValueError):
    """Raised when a root solve is started without a sign change."""


def _erf_series(x):
    # erf(x) = 2/sqrt(pi) exp(-x^2) sum_n 2^n x^(2n+1) / (2n+1)!!  (all terms positive)
    x2 = x * x
    term = x.copy()
    total = x.copy()
    for n in range(1, _SERIES_TERMS):
        term = term * (2.0 * x2) / (2 * n + 1)
        total = total + term
    return 2.0 / SQRT_PI * np.exp(-x2) * total


def _erfcx_cf(x):
    # sqrt(pi) erfcx(x) = 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))), x > 0
    t = x.copy()
    for k in range(_CF_DEPTH, 0, -1):
        t = x + 0.5 * k / t
    return 1.0 / (SQRT_PI * t)


def _exp_neg_sq(x):
    # exp(-x^2) with x^2 split so the large part is exact in floating point
    xh = np.trunc(x * 16.0) / 16.0
    return np.exp(-xh * xh) * np.exp(-(x - xh) * (x + xh))


def _erfc_nonneg(a):
    out = np.empty_like(a)
    small = a <= _SPLIT
    if np.any(small):
        out[small] = 1.0 - _erf_series(a[small])
    big = ~small
    if np.any(big):
        ab = a[big]
        out[big] = _erfcx_cf(ab) * _exp_neg_sq(ab)
    return out


def _erfcx_nonneg(a):
    out = np.empty_like(a)
    small = a <= _SPLIT
    if np.any(small):
        s = a[small]
        out[small] = np.exp(s * s) * (1.0 - _erf_series(s))
    big = ~small
    if np.any(big):
        out[big] = _erfcx_cf(a[big])
    return out


def _wrap(fn):
    def wrapped(x):
        arr = np.asarray(x, dtype=float)
        res = fn(np.atleast_1d(arr).astype(float))
        if arr.ndim == 0:
            return float(res[0])
        return res.reshape(arr.shape)

    wrapped.__name__ = fn.__name__
    wrapped.__doc__ = fn.__doc__
    return wrapped


@_wrap
def erfc(x):
    """Complementary error function, relative error below 1e-13 for |x| <= 26."""
    out = _erfc_nonneg(np.abs(x))
    neg = x < 0
    out[neg] = 2.0 - out[neg]
    return out


@_wrap
def erfcx(x):
    """Scaled complement ``exp(x**2) * erfc(x)``.

    Stable for arbitrarily large positive ``x``.  For negative ``x`` the value
    grows like ``2 exp(x**2)`` and an :class:`OverflowError` is raised once it
    is no longer representable (``x <= -26.6``); use :func:`log_erfcx` there.
    """
    if np.any(x < -_EXP_SQ_MAX):
        raise OverflowError("erfcx overflows for x <= -26.6; use log_erfcx")
    out = _erfcx_nonneg(np.abs(x))
    neg = x < 0
    if np.any(neg):
        xn = x[neg]
        out[neg] = 2.0 * np.exp(xn * xn) - out[neg]
    return out


@_wrap
def log_erfcx(x):
    """Natural log of :func:`erfcx`, finite for every finite ``x``."""
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = np.log(_erfcx_nonneg(x[pos]))
    neg = ~pos
    if np.any(neg):
        xn = x[neg]
        # erfc(x) lies in (1, 2) here
        out[neg] = xn * xn + np.log(2.0 - _erfc_nonneg(-xn))
    return out


@dataclass(frozen=True)
class EllipticPair:
    k: float
    K: float
    E: float


def _agm_sequences(k, kp):
    """AGM of (1, k') with c_0 = k; returns the a_n, c_n and c_n/k sequences."""
    a = [np.ones_like(k)]
    b = kp
    c = [k]
    # c_n / k, carried separately so nothing cancels for small k
    ck = [np.ones_like(k)]
    for _ in range(64):
        a_prev = a[-1]
        a_new = 0.5 * (a_prev + b)
        b = np.sqrt(a_prev * b)
        c_prev = c[-1]
        c_new = c_prev * c_prev / (4.0 * a_new)
        ck.append(ck[-1] * c_prev / (4.0 * a_new))
        a.append(a_new)
        c.append(c_new)
        if np.all(c_new <= 1e-17 * a_new):
            break
    return a, c, ck


def _complementary(k):
    return np.sqrt((1.0 - k) * (1.0 + k))


def _agm_KEB(k):
    k = np.asarray(k, dtype=float)
    a, c, ck = _agm_sequences(k, _complementary(k))
    K = np.pi / (2.0 * a[-1])
    s = 0.5 * c[0] ** 2
    sb = np.zeros_like(k)
    for n in range(1, len(c)):
        s = s + 2.0 ** (n - 1) * c[n] ** 2
        sb = sb + 2.0 ** (n - 1) * ck[n] ** 2
    E = K * (1.0 - s)
    B = K * (0.5 - sb)
    return K, E, B


def elliptic_KE(k) -> EllipticPair:
    """Complete elliptic integrals K(k), E(k) for modulus ``k`` (AGM).

    ``k = 1`` is accepted: E(1) = 1 and K is returned as ``inf``.
    """
    k = float(k)
    if not 0.0 <= k <= 1.0 or math.isnan(k):
        raise ValueError(f"modulus must lie in [0, 1], got {k}")
    if k == 1.0:
        return EllipticPair(k, math.inf, 1.0)
    K, E, _ = _agm_KEB(k)
    return EllipticPair(k, float(K), float(E))


def elliptic_KE_array(k):
    """Vectorized K and E for moduli in [0, 1)."""
    K, E, _ = _agm_KEB(np.asarray(k, dtype=float))
    return K, E


def elliptic_B(k):
    """B(k) = (E - k'^2 K) / k^2 without cancellation; B(0) = pi/4, B(1) = 1.

    Vectorized over ``k`` in [0, 1].
    """
    k = np.asarray(k, dtype=float)
    out = np.empty_like(np.atleast_1d(k))
    kk = np.atleast_1d(k)
    one = kk >= 1.0
    out[one] = 1.0
    if np.any(~one):
        out[~one] = _agm_KEB(kk[~one])[2]
    return out.reshape(k.shape) if k.ndim else float(out[0])


def jacobi_dn(u, k):
    """Jacobi ``dn(u, k)`` with ``k`` the modulus (parameter m = k**2).

    Uses the descending Landen transformation; ``k = 1`` gives sech(u).
    ``u`` and ``k`` broadcast against each other.
    """
    u, k = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(k, dtype=float))
    scalar = u.ndim == 0
    u = np.atleast_1d(u).astype(float)
    k = np.atleast_1d(k).astype(float)
    if np.any((k < 0) | (k > 1)):
        raise ValueError("modulus must lie in [0, 1]")
    out = np.empty_like(u)
    one = k == 1.0
    au = np.abs(u[one])
    out[one] = 2.0 * np.exp(-au) / (1.0 + np.exp(-2.0 * au))
    zero = k == 0.0
    out[zero] = 1.0
    rest = ~(one | zero)
    if np.any(rest):
        kr = k[rest]
        a, c, _ = _agm_sequences(kr, _complementary(kr))
        n_top = len(a) - 1
        phi = 2.0 ** n_top * a[n_top] * u[rest]
        phi_next = phi
        for n in range(n_top, 0, -1):
            phi_next = phi
            phi = 0.5 * (phi + np.arcsin(np.clip(c[n] / a[n] * np.sin(phi), -1.0, 1.0)))
        out[rest] = np.cos(phi) / np.cos(phi_next - phi)
    if scalar:
        return float(out[0])
    return out


def bracket_root(f, a: float, b: float, tol: float = 1e-14) -> float:
    """Root of ``f`` in [a, b] by Brent's method (bisection-safeguarded)."""
    fa, fb = f(a), f(b)
    if fa == 0.0:
        return float(a)
    if fb == 0.0:
        return float(b)
    if fa * fb > 0:
        raise NoBracketError(f"f(a) and f(b) have the same sign on [{a}, {b}]")
    return float(brentq(f, a, b, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=500))

"""Initial profile families with closed-form derivatives and tail certificates.

Two normal forms are used.  A *step* has finite limits at both ends; its
tail functions measure the distance to those limits.  A *ramp* behaves like
``-s * Theta(-s)``; its tail functions measure the distance to that corner.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import expit

from .quadrature import TailCertificate

__all__ = [
    "HypothesisReport",
    "InitialProfile",
    "make_algebraic_ramp",
    "make_profile",
    "make_ramp_profile",
    "make_slow_tail_ramp",
    "make_smoothed_step",
    "verify_hypotheses",
]

Func = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class InitialProfile:
    """A profile Lambda(s) together with its first three derivatives.

    ``tail_value``/``tail_d1`` return Lambda and Lambda' minus the normal form
    (step limits or the ``-s Theta(-s)`` corner), computed without
    cancellation.  ``d1_tail`` certifies ``tail_d1``; ``d2_tail`` and
    ``d3_tail`` certify the derivatives themselves.  A certificate is ``None``
    when the family admits no integrable bound (slow-tail counterexamples).
    """

    name: str
    kind: str  # "step" or "ramp"
    value: Func
    d1: Func
    d2: Func
    d3: Func
    limit_minus: float
    limit_plus: float
    tail_value: Func
    tail_d1: Func
    d1_tail: Optional[TailCertificate]
    d2_tail: Optional[TailCertificate]
    d3_tail: Optional[TailCertificate]
    params: dict = field(default_factory=dict)
    antiderivative: Optional[Func] = None


def _log_cosh(z):
    a = np.abs(z)
    return a + np.log1p(np.exp(-2.0 * a)) - math.log(2.0)


def _sech2(z):
    e = np.exp(-2.0 * np.abs(z))
    return 4.0 * e / (1.0 + e) ** 2


def make_smoothed_step(lambda_minus: float, lambda_plus: float, width: float = 1.0) -> InitialProfile:
    """tanh step from ``lambda_minus`` (s -> -inf) to ``lambda_plus`` (s -> +inf)."""
    if lambda_minus == lambda_plus:
        raise ValueError("smoothed step needs distinct limits")
    if width <= 0:
        raise ValueError("width must be positive")
    lm, lp, w = float(lambda_minus), float(lambda_plus), float(width)
    jump = lm - lp

    def value(s):
        return lp + 0.5 * jump * (1.0 - np.tanh(np.asarray(s) / w))

    def d1(s):
        return -0.5 * jump / w * _sech2(np.asarray(s) / w)

    def d2(s):
        z = np.asarray(s) / w
        return jump / w**2 * _sech2(z) * np.tanh(z)

    def d3(s):
        z = np.asarray(s) / w
        return jump / w**3 * _sech2(z) * (1.0 - 3.0 * np.tanh(z) ** 2)

    def tail_value(s):
        s = np.asarray(s, dtype=float)
        z = s / w
        # distance to the nearer limit: jump * expit(-2|z|) with the right sign
        e = jump * expit(-2.0 * np.abs(z))
        return np.where(s < 0, -e, e)

    def antiderivative(s):
        s = np.asarray(s, dtype=float)
        return lp * s + 0.5 * jump * (s - w * _log_cosh(s / w))

    S = w
    rate = 2.0 / w
    decay = math.exp(-rate * S)
    aj = abs(jump)
    return InitialProfile(
        name="smoothed_step",
        kind="step",
        value=value,
        d1=d1,
        d2=d2,
        d3=d3,
        limit_minus=lm,
        limit_plus=lp,
        tail_value=tail_value,
        tail_d1=d1,
        d1_tail=TailCertificate(0, 0, 2 * aj / w * decay, S, rate, rate),
        d2_tail=TailCertificate(0, 0, 4 * aj / w**2 * decay, S, rate, rate),
        d3_tail=TailCertificate(0, 0, 8 * aj / w**3 * decay, S, rate, rate),
        params={"lambda_minus": lm, "lambda_plus": lp, "width": w},
        antiderivative=antiderivative,
    )


def make_ramp_profile(kind: str = "burgers_t1", width: float = 1.0) -> InitialProfile:
    """Softplus ramp ``(w/2) ln(1 + exp(-2s/w))``.

    The same function serves both weak-discontinuity problems; ``kind`` only
    labels which theorem it is meant for.  Exponential tails satisfy every
    algebraic hypothesis with room to spare.
    """
    if kind not in ("burgers_t1", "kdv_t2"):
        raise ValueError(f"unknown ramp kind {kind!r}")
    if width <= 0:
        raise ValueError("width must be positive")
    w = float(width)

    def value(s):
        z = -2.0 * np.asarray(s, dtype=float) / w
        return 0.5 * w * (np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z))))

    def d1(s):
        return -expit(-2.0 * np.asarray(s, dtype=float) / w)

    def d2(s):
        return 0.5 / w * _sech2(np.asarray(s, dtype=float) / w)

    def d3(s):
        z = np.asarray(s, dtype=float) / w
        return -1.0 / w**2 * _sech2(z) * np.tanh(z)

    def tail_value(s):
        z = 2.0 * np.abs(np.asarray(s, dtype=float)) / w
        return 0.5 * w * np.log1p(np.exp(-z))

    def tail_d1(s):
        s = np.asarray(s, dtype=float)
        e = expit(-2.0 * np.abs(s) / w)
        return np.where(s < 0, e, -e)

    S = w
    rate = 2.0 / w
    decay = math.exp(-rate * S)
    return InitialProfile(
        name="softplus_ramp",
        kind="ramp",
        value=value,
        d1=d1,
        d2=d2,
        d3=d3,
        limit_minus=math.inf,
        limit_plus=0.0,
        tail_value=tail_value,
        tail_d1=tail_d1,
        d1_tail=TailCertificate(0, 0, decay, S, rate, rate),
        d2_tail=TailCertificate(0, 0, 2.0 / w * decay, S, rate, rate),
        d3_tail=TailCertificate(0, 0, 4.0 / w**2 * decay, S, rate, rate),
        params={"kind": kind, "width": w},
    )


def _h(a):
    # 1 - a*arctan(1/a) for a >= 0, series in 1/a where it would cancel
    a = np.asarray(a, dtype=float)
    out = np.empty_like(a)
    near = a <= 4.0
    an = a[near]
    with np.errstate(divide="ignore"):
        out[near] = 1.0 - np.where(an > 0, an * np.arctan2(1.0, an), 0.0)
    u2 = 1.0 / a[~near] ** 2
    acc = np.zeros_like(u2)
    for n in range(24, 0, -1):
        acc = u2 * ((-1) ** (n + 1) / (2 * n + 1) + acc)
    out[~near] = acc
    return out


def _g(a):
    # arctan(1/a) - a/(1+a^2) for a >= 0
    a = np.asarray(a, dtype=float)
    out = np.empty_like(a)
    near = a <= 4.0
    an = a[near]
    out[near] = np.arctan2(1.0, an) - an / (1.0 + an**2)
    u = 1.0 / a[~near]
    u2 = u * u
    acc = np.zeros_like(u)
    for n in range(24, 0, -1):
        acc = u2 * ((-1) ** (n + 1) * 2 * n / (2 * n + 1) + acc)
    out[~near] = u * acc
    return out


def make_algebraic_ramp(width: float = 1.0) -> InitialProfile:
    """Ramp whose tails sit exactly on the hypothesis boundary.

    Lambda'' = (2 / (pi w)) (1 + (s/w)^2)^-2, so Lambda' + Theta(-s) = O(|s|^-3),
    Lambda'' = O(s^-4) and Lambda + s Theta(-s) = O(s^-2).
    """
    if width <= 0:
        raise ValueError("width must be positive")
    w = float(width)

    def value(s):
        z = np.asarray(s, dtype=float) / w
        return w * (np.maximum(-z, 0.0) + _h(np.abs(z)) / math.pi)

    def tail_value(s):
        z = np.asarray(s, dtype=float) / w
        return w * _h(np.abs(z)) / math.pi

    def tail_d1(s):
        z = np.asarray(s, dtype=float) / w
        gz = _g(np.abs(z)) / math.pi
        return np.where(z < 0, gz, -gz)

    def d1(s):
        z = np.asarray(s, dtype=float) / w
        return np.where(z < 0, -1.0, 0.0) + tail_d1(s)

    def d2(s):
        z = np.asarray(s, dtype=float) / w
        return 2.0 / (math.pi * w) / (1.0 + z * z) ** 2

    def d3(s):
        z = np.asarray(s, dtype=float) / w
        return -8.0 / (math.pi * w**2) * z / (1.0 + z * z) ** 3

    return InitialProfile(
        name="algebraic_ramp",
        kind="ramp",
        value=value,
        d1=d1,
        d2=d2,
        d3=d3,
        limit_minus=math.inf,
        limit_plus=0.0,
        tail_value=tail_value,
        tail_d1=tail_d1,
        d1_tail=TailCertificate(3, 3, 2 * w**3 / (3 * math.pi), w),
        d2_tail=TailCertificate(4, 4, 2 * w**3 / math.pi, w),
        d3_tail=TailCertificate(5, 5, 8 * w**3 / math.pi, w),
        params={"width": w},
    )


def make_slow_tail_ramp(width: float = 1.0) -> InitialProfile:
    """Counterexample with Lambda' + Theta(-s) ~ |s|^-1 (violates both theorems)."""
    w = float(width)

    def tail_d1(s):
        z = np.asarray(s, dtype=float) / w
        t = np.arctan2(1.0, np.abs(z)) / math.pi
        return np.where(z < 0, t, -t)

    def d1(s):
        z = np.asarray(s, dtype=float) / w
        return np.where(z < 0, -1.0, 0.0) + tail_d1(s)

    def value(s):
        z = np.asarray(s, dtype=float) / w
        return -w / math.pi * (z * np.arctan2(1.0, z) + 0.5 * np.log1p(z * z))

    def tail_value(s):
        s = np.asarray(s, dtype=float)
        return value(s) + np.where(s < 0, s, 0.0)

    def d2(s):
        z = np.asarray(s, dtype=float) / w
        return 1.0 / (math.pi * w) / (1.0 + z * z)

    def d3(s):
        z = np.asarray(s, dtype=float) / w
        return -2.0 / (math.pi * w**2) * z / (1.0 + z * z) ** 2

    return InitialProfile(
        name="slow_tail_ramp",
        kind="ramp",
        value=value,
        d1=d1,
        d2=d2,
        d3=d3,
        limit_minus=math.inf,
        limit_plus=0.0,
        tail_value=tail_value,
        tail_d1=tail_d1,
        d1_tail=None,
        d2_tail=TailCertificate(2, 2, w / math.pi, w),
        d3_tail=TailCertificate(3, 3, 2 * w**2 / math.pi, w),
        params={"width": w},
    )


_FAMILIES = {
    "smoothed_step": make_smoothed_step,
    "softplus_ramp": make_ramp_profile,
    "algebraic_ramp": make_algebraic_ramp,
    "slow_tail_ramp": make_slow_tail_ramp,
}


def make_profile(family: str, **params) -> InitialProfile:
    """Build a profile by family name (used by the command line)."""
    try:
        factory = _FAMILIES[family]
    except KeyError:
        raise ValueError(f"unknown profile family {family!r}; choose from {sorted(_FAMILIES)}") from None
    return factory(**params)


@dataclass
class HypothesisReport:
    theorem: str
    passed: bool
    checks: dict

    def __str__(self):
        lines = [f"{self.theorem}: {'PASS' if self.passed else 'FAIL'}"]
        for name, (peak, growth, ok) in self.checks.items():
            lines.append(f"  {name:<28s} sup={peak:.3e} growth={growth:.3g} {'ok' if ok else 'FAIL'}")
        return "\n".join(lines)


_INNER = np.geomspace(10.0, 100.0, 41)
_OUTER = np.geomspace(1e5, 1e6, 41)
_GROWTH_LIMIT = 10.0


def _weighted_check(fn, power):
    out = {}
    peak = 0.0
    growth = 0.0
    for sign in (-1.0, 1.0):
        inner = np.abs(fn(sign * _INNER)) * _INNER**power
        outer = np.abs(fn(sign * _OUTER)) * _OUTER**power
        peak = max(peak, float(inner.max()), float(outer.max()))
        ref = max(float(inner.max()), 1e-300)
        growth = max(growth, float(outer.max()) / ref)
    out = (peak, growth, bool(np.isfinite(peak) and growth <= _GROWTH_LIMIT))
    return out


def verify_hypotheses(p: InitialProfile, theorem: str) -> HypothesisReport:
    """Sample the decay conditions of a theorem on a logarithmic grid.

    ``theorem`` is ``"T1"`` (Burgers weak discontinuity), ``"T2"`` (KdV weak
    discontinuity) or ``"large_gradient"``.  A weighted quantity counts as
    bounded when its supremum over |s| in [1e5, 1e6] exceeds that over
    [10, 100] by no more than a factor of ten.
    """
    checks = {}
    if theorem == "T1":
        ramp = p.kind == "ramp"
        checks["|L'+Theta(-s)| |s|^3"] = _weighted_check(p.tail_d1, 3) if ramp else (math.inf, math.inf, False)
        checks["|L''| s^4"] = _weighted_check(p.d2, 4)
    elif theorem == "T2":
        ramp = p.kind == "ramp"
        if ramp:
            checks["|L+s Theta(-s)| s^2"] = _weighted_check(p.tail_value, 2)
            checks["|L'+Theta(-s)| |s|^3"] = _weighted_check(p.tail_d1, 3)
        else:
            checks["ramp normal form"] = (math.inf, math.inf, False)
    elif theorem == "large_gradient":
        finite = math.isfinite(p.limit_minus) and math.isfinite(p.limit_plus)
        ok = finite and p.limit_minus != p.limit_plus
        if ok:
            dev = max(abs(float(p.value(-1e6)) - p.limit_minus), abs(float(p.value(1e6)) - p.limit_plus))
            ok = dev <= 1e-6
        else:
            dev = math.inf
        checks["limits at s = +-1e6"] = (dev, 0.0, ok)
        checks["|L'| s^2"] = _weighted_check(p.d1, 2)
    else:
        raise ValueError(f"unknown theorem {theorem!r}")
    return HypothesisReport(theorem, all(c[2] for c in checks.values()), checks)

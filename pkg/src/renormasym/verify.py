"""Residual measurement: finite-difference PDE operators, epsilon sweeps and
order fits.

A *field* is any callable ``field(x, t)`` accepting numpy arrays that
broadcast; every stencil point of a residual evaluation is passed in a single
call so batched evaluators amortize their quadrature.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "FDContaminationWarning",
    "FootprintError",
    "ResidualReport",
    "compare_fields",
    "fd_weights",
    "fit_order",
    "kdv_soliton",
    "pde_residual",
    "planted_family",
    "residual_sweep",
]

EQUATIONS = ("burgers_unit_viscosity", "kdv_unit_dispersion")


class FootprintError(ValueError):
    """A stencil point falls outside the field's domain."""


class FDContaminationWarning(UserWarning):
    """Finite-difference error is not small against the measured residual."""


def fd_weights(offsets, order):
    """Finite-difference weights at integer ``offsets`` for the ``order``-th derivative (unit spacing)."""
    offsets = np.asarray(offsets, dtype=float)
    n = offsets.size
    A = np.vander(offsets, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[order] = math.factorial(order)
    return np.linalg.solve(A, rhs)


_OFF5 = np.arange(-2, 3)
_OFF7 = np.arange(-3, 4)
_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
_D3_5 = np.array([-1.0, 2.0, 0.0, -2.0, 1.0]) / 2.0
_D3_7 = np.array([1.0, -8.0, 13.0, 0.0, -13.0, 8.0, -1.0]) / 8.0


def pde_residual(field: Callable, equation: str, x, t: float, h: float, ht: float | None = None,
                 domain=None, wide_stencil: bool = True):
    """Residual of ``u_t + u u_x - u_xx`` or ``u_t + u u_x + u_xxx`` at points ``(x, t)``.

    Fourth-order centred differences in x (7-point for the third derivative
    when ``wide_stencil``; otherwise the 5-point second-order one) and a
    fourth-order centred difference in t with step ``ht`` (default ``h``).
    ``domain = (x_lo, x_hi, t_lo, t_hi)`` bounds the admissible footprint.
    """
    if equation not in EQUATIONS:
        raise ValueError(f"unknown equation {equation!r}; expected one of {EQUATIONS}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ht = h if ht is None else ht
    kdv = equation == "kdv_unit_dispersion"
    offs = _OFF7 if (kdv and wide_stencil) else _OFF5
    xs = x[None, :] + h * offs[:, None]
    ts = t + ht * np.array([-2.0, -1.0, 1.0, 2.0])
    if domain is not None:
        x_lo, x_hi, t_lo, t_hi = domain
        if xs.min() < x_lo or xs.max() > x_hi or ts.min() < t_lo or ts.max() > t_hi:
            raise FootprintError(
                f"stencil footprint x in [{xs.min():.6g}, {xs.max():.6g}], t in "
                f"[{ts.min():.6g}, {ts.max():.6g}] leaves the domain {tuple(domain)}")
    n_x = offs.size
    # one batched call: the x-stencil at t, then the four time levels at x
    X = np.concatenate([xs.ravel(), np.tile(x, 4)])
    T = np.concatenate([np.full(xs.size, t), np.repeat(ts, x.size)])
    vals = np.asarray(field(X, T), dtype=float)
    fx = vals[: xs.size].reshape(n_x, x.size)
    ft = vals[xs.size:].reshape(4, x.size)
    c = n_x // 2
    u = fx[c]
    f5 = fx[c - 2: c + 3]
    u_x = _D1 @ f5 / h
    u_t = (ft[0] - 8.0 * ft[1] + 8.0 * ft[2] - ft[3]) / (12.0 * ht)
    if kdv:
        u_xxx = (_D3_7 @ fx if wide_stencil else _D3_5 @ f5) / h**3
        return u_t + u * u_x + u_xxx
    u_xx = _D2 @ f5 / h**2
    return u_t + u * u_x - u_xx


def fit_order(epsilons, norms):
    """Least-squares slope of log(norm) against log(eps), with its r^2."""
    le = np.log(np.asarray(epsilons, dtype=float))
    ln = np.log(np.asarray(norms, dtype=float))
    if le.size < 2:
        return math.nan, math.nan
    slope, icpt = np.polyfit(le, ln, 1)
    pred = slope * le + icpt
    ss_res = float(np.sum((ln - pred) ** 2))
    ss_tot = float(np.sum((ln - ln.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(r2)


@dataclass
class ResidualReport:
    epsilons: list
    norms_max: list
    norms_l2: list
    h: list
    fitted_order: float
    fit_r2: float
    window: dict
    norm: str = "max"
    fd_contamination: list = dc_field(default_factory=list)

    def __post_init__(self):
        eps = np.asarray(self.epsilons, dtype=float)
        if np.any(np.diff(eps) >= 0):
            raise ValueError("epsilons must be strictly decreasing")
        if np.any(np.asarray(self.norms, dtype=float) <= 0):
            raise ValueError("residual norms must be positive")

    @property
    def norms(self):
        return self.norms_max if self.norm == "max" else self.norms_l2

    def summary(self) -> dict:
        return {
            "fitted_order": self.fitted_order,
            "fit_r2": self.fit_r2,
            "epsilons": list(self.epsilons),
            "norms": list(self.norms),
            "window": dict(self.window),
            "fd_contamination": list(self.fd_contamination),
        }

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epsilon", "norm_max", "norm_l2", "h"])
            for row in zip(self.epsilons, self.norms_max, self.norms_l2, self.h):
                w.writerow([f"{v:.17g}" for v in row])

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _l2(r, x):
    return math.sqrt(float(np.trapezoid(r * r, x)))


def residual_sweep(family: Callable[[float], Callable], equation: str, window, eps_list: Sequence[float],
                   h_factor: float = 0.5, ht_rule: Callable[[float], float] | None = None,
                   norm: str = "max", monitor: bool = True, workers: int = 1,
                   domain=None) -> ResidualReport:
    """Residual norms of ``family(eps)`` over an x-window at fixed t, and the fitted order.

    ``window = (x_lo, x_hi, n_points, t)``.  The stencil spacing is
    ``h = h_factor * eps`` (``ht_rule(eps)`` for the time step if given).
    With ``monitor`` the residual is recomputed at ``2h``; the Richardson
    estimate ``|r(2h) - r(h)| / 15`` of the finite-difference error, relative
    to the measured norm, is stored per epsilon and a warning is raised when
    it exceeds 10%.
    """
    eps_list = [float(e) for e in eps_list]
    x_lo, x_hi, n, t = window
    xg = np.linspace(x_lo, x_hi, int(n))

    def one(eps):
        fld = family(eps)
        h = h_factor * eps
        ht = ht_rule(eps) if ht_rule is not None else h
        r = pde_residual(fld, equation, xg, t, h, ht, domain=domain)
        nmax, nl2 = float(np.max(np.abs(r))), _l2(r, xg)
        contam = math.nan
        if monitor:
            r2 = pde_residual(fld, equation, xg, t, 2 * h, 2 * ht, domain=domain)
            est = np.abs(r2 - r) / 15.0
            ref = nmax if norm == "max" else nl2
            contam = (float(est.max()) if norm == "max" else _l2(est, xg)) / ref
        return h, nmax, nl2, contam

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(one, eps_list))
    else:
        rows = [one(e) for e in eps_list]
    hs, nmax, nl2, contam = (list(c) for c in zip(*rows))
    chosen = nmax if norm == "max" else nl2
    order, r2 = fit_order(eps_list, chosen)
    for e, c in zip(eps_list, contam):
        if c > 0.1:
            warnings.warn(f"finite-difference error is {100 * c:.1f}% of the residual at eps={e}",
                          FDContaminationWarning, stacklevel=2)
    win = {"x_lo": float(x_lo), "x_hi": float(x_hi), "n_points": int(n), "t": float(t),
           "h_factor": float(h_factor), "equation": equation, "norm": norm}
    return ResidualReport(eps_list, nmax, nl2, hs, order, r2, win, norm, contam)


def compare_fields(u: Callable, v: Callable, window, norm: str = "max") -> float:
    """Max or L2 norm of ``u - v`` on a uniform grid; ``window = (x_lo, x_hi, n, t)``."""
    x_lo, x_hi, n, t = window
    xg = np.linspace(x_lo, x_hi, int(n))
    d = np.asarray(u(xg, t), dtype=float) - np.asarray(v(xg, t), dtype=float)
    if norm == "max":
        return float(np.max(np.abs(d)))
    if norm == "L2":
        return _l2(d, xg)
    raise ValueError("norm must be 'max' or 'L2'")


def kdv_soliton(c: float = 1.0, x0: float = 0.0):
    """Exact solution 3c sech^2(sqrt(c)/2 (x - ct - x0)) of u_t + u u_x + u_xxx = 0."""
    k = 0.5 * math.sqrt(c)

    def fld(x, t):
        z = k * (np.asarray(x) - c * np.asarray(t) - x0)
        return 3.0 * c / np.cosh(z) ** 2

    return fld


def planted_family(order: float, equation: str = "burgers_unit_viscosity"):
    """Family u + eps**order * t around an exact solution; residual is eps**order (1 + t u_x).

    The base is the weak-discontinuity Burgers solution or a KdV soliton.
    """
    if equation == "burgers_unit_viscosity":
        from .burgers import u0_weak as base
    else:
        base = kdv_soliton()

    def family(eps):
        amp = eps**order
        return lambda x, t: base(x, t) + amp * np.asarray(t)

    return family

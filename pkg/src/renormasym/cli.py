"""Command line: evaluate formulas on grids, run residual sweeps, build the
Phi cache and tabulate error norms between evaluators.

Configuration is an INI file with the sections and keys listed in
``SCHEMA``; every key has a central default, so a config only needs the
keys it changes.  ``--preset`` loads a named configuration first, then the
``--config`` file overrides it key by key.
"""
from __future__ import annotations

import argparse
import configparser
import copy
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import burgers, kdv, verify
from .profiles import make_profile

CACHE_ENV = "RENORMASYM_CACHE_DIR"
CACHE_NAME = "phi_default.npz"

EVALUATORS = (
    "u0_weak",
    "renorm_weak_burgers",
    "large_gradient_burgers",
    "gp_dsw_Z",
    "gp_renormalized",
    "renorm_weak_kdv",
    "cole_hopf_reference",
    "faminskii_phi",
)
NEEDS_CACHE = ("renorm_weak_kdv", "faminskii_phi")
EQUATION_OF = {
    "u0_weak": "burgers_unit_viscosity",
    "renorm_weak_burgers": "burgers_unit_viscosity",
    "cole_hopf_reference": "burgers_unit_viscosity",
    "renorm_weak_kdv": "kdv_unit_dispersion",
    "faminskii_phi": "kdv_unit_dispersion",
}

# section -> key -> (type, default, description)
SCHEMA = {
    "grid": {
        "x_lo": ("float", -5.0, "left end of the x grid"),
        "x_hi": ("float", 5.0, "right end of the x grid"),
        "n": ("int", 101, "number of x points (>= 2)"),
        "t": ("floats", [0.5], "evaluation time(s), comma separated"),
    },
    "model": {
        "evaluator": ("str", "u0_weak", "one of " + ", ".join(EVALUATORS)),
        "eps": ("float", 0.1, "small parameter epsilon"),
        "rho": ("float", 0.01, "profile scale rho (large-gradient and step formulas)"),
        "a": ("float", 1.0, "step height for gp_dsw_Z"),
        "initial": ("str", "weak", "Cole-Hopf data: weak | ramp | large_gradient"),
        "method": ("str", "interp", "renorm_weak_kdv route: interp | spectral"),
        "rel_tol": ("float", 1e-10, "quadrature relative tolerance"),
    },
    "profile": {
        "family": ("str", "softplus_ramp", "smoothed_step | softplus_ramp | algebraic_ramp | slow_tail_ramp"),
        "width": ("float", 1.0, "profile width"),
        "lambda_minus": ("float", 1.0, "left limit (smoothed_step)"),
        "lambda_plus": ("float", 0.0, "right limit (smoothed_step)"),
    },
    "residual": {
        "formula": ("str", "renorm_weak_burgers", "evaluator whose residual is swept"),
        "eps_list": ("floats", [0.2, 0.1, 0.05, 0.025], "strictly decreasing epsilons"),
        "h_factor": ("float", 0.5, "x stencil spacing h = h_factor * eps"),
        "ht": ("str", "0.001", "time step: a number, 'h', or 'store_dt' (cache slice spacing)"),
        "norm": ("str", "max", "max | L2"),
        "planted_order": ("str", "none", "'none' or an order for the planted self-test"),
        "planted_equation": ("str", "burgers_unit_viscosity", "equation of the planted self-test"),
    },
    "compare": {
        "left": ("str", "large_gradient_burgers", "first evaluator"),
        "right": ("str", "cole_hopf_reference", "second evaluator"),
        "param": ("str", "rho", "model key swept: rho | eps"),
        "values": ("floats", [0.005, 0.002, 0.001], "values of the swept key"),
    },
    "cache": {
        "path": ("str", "", "Phi cache file; empty means $" + CACHE_ENV + "/" + CACHE_NAME),
        "L": ("float", 150.0, "half length of the periodic domain"),
        "N": ("int", 2**14, "number of grid points"),
        "delta": ("float", 0.5, "final time is 1 - delta"),
        "tol": ("float", 1e-7, "required accuracy of the stored slices"),
        "store_dt": ("float", 0.0025, "spacing of stored time slices"),
        "sponge_width": ("float", 20.0, "width of each absorbing layer"),
    },
}

PRESETS = {
    "theorem1": {
        "grid": {"x_lo": "-4", "x_hi": "4", "n": "401", "t": "0.5"},
        "profile": {"family": "softplus_ramp", "width": "1"},
        "residual": {"formula": "renorm_weak_burgers", "eps_list": "0.2, 0.1, 0.05, 0.025",
                     "h_factor": "0.5", "ht": "0.001"},
    },
    "theorem2": {
        "grid": {"x_lo": "-3", "x_hi": "3", "n": "121", "t": "0.25"},
        "profile": {"family": "softplus_ramp", "width": "1"},
        "model": {"method": "spectral"},
        "residual": {"formula": "renorm_weak_kdv", "eps_list": "0.16, 0.08, 0.04, 0.02",
                     "h_factor": "0.5", "ht": "store_dt"},
    },
    "gp": {
        "grid": {"x_lo": "-3", "x_hi": "4", "n": "701", "t": "1"},
        "profile": {"family": "smoothed_step", "lambda_minus": "1", "lambda_plus": "0", "width": "1"},
        "model": {"evaluator": "gp_renormalized", "eps": "0.01", "rho": "0.01", "a": "1"},
    },
    "large-gradient": {
        "grid": {"x_lo": "-3", "x_hi": "3", "n": "121", "t": "1"},
        "profile": {"family": "smoothed_step", "lambda_minus": "1", "lambda_plus": "-1", "width": "1"},
        "model": {"eps": "0.1", "initial": "large_gradient"},
        "compare": {"left": "large_gradient_burgers", "right": "cole_hopf_reference",
                    "param": "rho", "values": "0.005, 0.002, 0.001"},
    },
}


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


class MissingCacheError(FileNotFoundError):
    """A Phi cache is required but absent."""


# --------------------------------------------------------------------------
# configuration

def _fmt_float(v: float) -> str:
    return repr(float(v))


def _parse_value(kind, raw, where):
    raw = raw.strip()
    try:
        if kind == "float":
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError
            return v
        if kind == "int":
            return int(float(raw)) if float(raw).is_integer() else int(raw)
        if kind == "floats":
            vals = [float(s) for s in raw.replace(";", ",").split(",") if s.strip()]
            if not vals or not all(math.isfinite(v) for v in vals):
                raise ValueError
            return vals
        return raw
    except ValueError:
        raise ConfigError(f"[{where[0]}] {where[1]} = {raw!r} is not a valid {kind}") from None


def _render_value(kind, v) -> str:
    if kind == "float":
        return _fmt_float(v)
    if kind == "int":
        return str(int(v))
    if kind == "floats":
        return ", ".join(_fmt_float(x) for x in v)
    return str(v)


def defaults() -> dict:
    return {s: {k: copy.deepcopy(spec[1]) for k, spec in keys.items()} for s, keys in SCHEMA.items()}


def _apply(cfg: dict, parser: configparser.ConfigParser, origin: str):
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{origin}: unknown section [{section}]; known: {', '.join(SCHEMA)}")
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"{origin}: unknown key {key!r} in [{section}]; "
                                  f"known: {', '.join(SCHEMA[section])}")
            cfg[section][key] = _parse_value(SCHEMA[section][key][0], raw, (section, key))


def _parser():
    p = configparser.ConfigParser(interpolation=None)
    p.optionxform = str  # keys are case sensitive (L, N)
    return p


def load_config(path=None, preset=None, text=None) -> dict:
    """Defaults, then the preset, then the file (or ``text``)."""
    cfg = defaults()
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
        p = _parser()
        p.read_dict(PRESETS[preset])
        _apply(cfg, p, f"preset {preset}")
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file {path} does not exist")
        text = path.read_text()
    if text is not None:
        p = _parser()
        try:
            p.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config: {exc}") from None
        _apply(cfg, p, str(path) if path is not None else "config text")
    return cfg


def canonical(cfg: dict) -> str:
    """Canonical INI text: every section and key of the schema, in schema order."""
    out = io.StringIO()
    for section, keys in SCHEMA.items():
        out.write(f"[{section}]\n")
        for key, (kind, _, _) in keys.items():
            out.write(f"{key} = {_render_value(kind, cfg[section][key])}\n")
        out.write("\n")
    return out.getvalue()


def cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV)
    return Path(env) if env else Path.home() / ".cache" / "renormasym"


def cache_path(cfg) -> Path:
    p = cfg["cache"]["path"]
    return Path(p) if p else cache_dir() / CACHE_NAME


def _positive(cfg, section, key):
    if not cfg[section][key] > 0:
        raise ConfigError(f"[{section}] {key} must be positive (got {cfg[section][key]})")


def _check_evaluator(name, what):
    if name not in EVALUATORS:
        raise ConfigError(f"{what} {name!r} is not an evaluator; choose from {', '.join(EVALUATORS)}")


def validate(cfg: dict, command: str):
    g, m = cfg["grid"], cfg["model"]
    if command in ("eval", "residual", "compare"):
        if not g["x_lo"] < g["x_hi"]:
            raise ConfigError("[grid] x_lo must be below x_hi")
        if g["n"] < 2:
            raise ConfigError("[grid] n must be at least 2")
        for key in ("eps", "rho", "a", "rel_tol"):
            _positive(cfg, "model", key)
        if m["initial"] not in ("weak", "ramp", "large_gradient"):
            raise ConfigError("[model] initial must be weak, ramp or large_gradient")
        if m["method"] not in ("interp", "spectral"):
            raise ConfigError("[model] method must be interp or spectral")
        if cfg["profile"]["family"] not in ("smoothed_step", "softplus_ramp", "algebraic_ramp",
                                            "slow_tail_ramp"):
            raise ConfigError(f"[profile] family {cfg['profile']['family']!r} is unknown")
        _positive(cfg, "profile", "width")
    names = []
    if command == "eval":
        _check_evaluator(m["evaluator"], "[model] evaluator")
        names = [m["evaluator"]]
        if any(t <= 0 for t in g["t"]) and m["evaluator"] != "faminskii_phi":
            raise ConfigError("[grid] t must be positive for this evaluator")
    elif command == "residual":
        r = cfg["residual"]
        eps = r["eps_list"]
        if len(eps) < 2 or any(b >= a for a, b in zip(eps, eps[1:])) or min(eps) <= 0:
            raise ConfigError("[residual] eps_list must hold at least two positive, strictly decreasing values")
        if r["norm"] not in ("max", "L2"):
            raise ConfigError("[residual] norm must be max or L2")
        _positive(cfg, "residual", "h_factor")
        if len(g["t"]) != 1:
            raise ConfigError("[grid] t must be a single time for a residual sweep")
        if r["planted_order"] != "none":
            try:
                float(r["planted_order"])
            except ValueError:
                raise ConfigError("[residual] planted_order must be 'none' or a number") from None
            if r["planted_equation"] not in verify.EQUATIONS:
                raise ConfigError(f"[residual] planted_equation must be one of {verify.EQUATIONS}")
        else:
            if r["formula"] not in EQUATION_OF or r["formula"] in ("u0_weak", "faminskii_phi"):
                raise ConfigError("[residual] formula must be renorm_weak_burgers, renorm_weak_kdv "
                                  "or cole_hopf_reference")
            names = [r["formula"]]
        if r["ht"] not in ("h", "store_dt"):
            try:
                if float(r["ht"]) <= 0:
                    raise ValueError
            except ValueError:
                raise ConfigError("[residual] ht must be a positive number, 'h' or 'store_dt'") from None
    elif command == "compare":
        c = cfg["compare"]
        _check_evaluator(c["left"], "[compare] left")
        _check_evaluator(c["right"], "[compare] right")
        if c["param"] not in ("rho", "eps"):
            raise ConfigError("[compare] param must be rho or eps")
        if min(c["values"]) <= 0:
            raise ConfigError("[compare] values must be positive")
        names = [c["left"], c["right"]]
    elif command == "phi-cache":
        for key in ("L", "N", "delta", "tol", "store_dt", "sponge_width"):
            _positive(cfg, "cache", key)
        if not cfg["cache"]["delta"] < 1:
            raise ConfigError("[cache] delta must lie in (0, 1)")
    if any(n in NEEDS_CACHE for n in names):
        path = cache_path(cfg)
        if not path.is_file():
            raise MissingCacheError(
                f"Phi cache {path} not found; build it with `renormasym phi-cache --out {path}` "
                f"or set [cache] path / ${CACHE_ENV}")


# --------------------------------------------------------------------------
# evaluators

def _profile(cfg):
    pr = cfg["profile"]
    fam = pr["family"]
    if fam == "smoothed_step":
        return make_profile(fam, lambda_minus=pr["lambda_minus"], lambda_plus=pr["lambda_plus"],
                            width=pr["width"])
    return make_profile(fam, width=pr["width"])


def _load_phi(cfg, _memo={}):
    path = cache_path(cfg)
    key = str(path.resolve())
    if key not in _memo:
        _memo.clear()
        _memo[key] = kdv.PhiField.load(path)
    return _memo[key]


def _cole_hopf(cfg, m):
    p = _profile(cfg) if m["initial"] != "weak" else None
    eps, rho = m["eps"], m["rho"]
    if m["initial"] == "weak":
        # -x Theta(-x) with unit viscosity; P(y) = -y^2/2 for y < 0
        return lambda x, t: burgers.cole_hopf_reference(
            lambda y: np.where(y < 0, -y, 0.0), x, t, 1.0,
            potential=lambda y: np.where(y < 0, -0.5 * y * y, 0.0))
    if m["initial"] == "ramp":
        return lambda x, t: burgers.cole_hopf_reference(lambda y: eps * p.value(y / eps), x, t, 1.0)
    pot = None
    if p.antiderivative is not None:
        a0 = float(p.antiderivative(np.array([0.0]))[0])
        pot = lambda y: rho * (p.antiderivative(y / rho) - a0)  # noqa: E731
    return lambda x, t: burgers.cole_hopf_reference(lambda y: p.value(y / rho), x, t, eps, potential=pot)


def make_evaluator(name: str, cfg: dict, model=None):
    """Callable ``(x, t) -> u`` for a scalar t (``model`` overrides [model])."""
    m = dict(cfg["model"], **(model or {}))
    eps, rho, tol = m["eps"], m["rho"], m["rel_tol"]
    if name == "u0_weak":
        return burgers.u0_weak
    if name == "renorm_weak_burgers":
        p = _profile(cfg)
        return lambda x, t: burgers.renorm_weak_burgers(p, x, t, eps, rel_tol=min(tol, 1e-12))
    if name == "large_gradient_burgers":
        p = _profile(cfg)
        return lambda x, t: burgers.large_gradient_burgers(p, x, t, eps, rho, rel_tol=tol)
    if name == "gp_dsw_Z":
        return lambda x, t: kdv.gp_dsw_Z(x, t, m["a"], eps)
    if name == "gp_renormalized":
        p = _profile(cfg)
        return lambda x, t: kdv.gp_renormalized(p, x, t, eps, rho, rel_tol=tol)
    if name == "cole_hopf_reference":
        return _cole_hopf(cfg, m)
    if name == "faminskii_phi":
        phi = _load_phi(cfg)
        return lambda x, t: phi(x, t)
    if name == "renorm_weak_kdv":
        phi = _load_phi(cfg)
        p = _profile(cfg)
        if m["method"] == "spectral":
            return kdv.renorm_weak_kdv_field(p, phi, eps)
        return lambda x, t: kdv.renorm_weak_kdv(p, phi, x, t, eps, rel_tol=tol)
    raise ConfigError(f"unknown evaluator {name!r}")


def _batched(fn):
    """Wrap a scalar-t evaluator for (x, t) arrays by grouping equal times."""
    def fld(x, t):
        x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
        out = np.empty(x.shape)
        for tv in np.unique(t):
            sel = t == tv
            out[sel] = np.asarray(fn(x[sel], float(tv)), dtype=float)
        return out
    return fld


# --------------------------------------------------------------------------
# commands

def _x_grid(cfg):
    g = cfg["grid"]
    return np.linspace(g["x_lo"], g["x_hi"], g["n"])


def _write_rows(out, header, rows):
    if out in (None, "-"):
        fh = sys.stdout
        close = False
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        fh = open(out, "w", newline="")
        close = True
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])
    finally:
        if close:
            fh.close()


def cmd_eval(cfg, out=None, threads=1):
    name = cfg["model"]["evaluator"]
    fn = make_evaluator(name, cfg)
    x = _x_grid(cfg)
    rows = []
    for t in cfg["grid"]["t"]:
        u = np.asarray(fn(x, t), dtype=float).reshape(x.shape)
        rows.extend((float(xi), float(t), float(ui)) for xi, ui in zip(x, u))
    _write_rows(out, ["x", "t", "u"], rows)
    return rows


def _sweep_family(cfg):
    r = cfg["residual"]
    if r["planted_order"] != "none":
        eq = r["planted_equation"]
        return verify.planted_family(float(r["planted_order"]), eq), eq
    name = r["formula"]
    eq = EQUATION_OF[name]

    def family(eps):
        return _batched(make_evaluator(name, cfg, {"eps": eps}))

    return family, eq


def _ht_rule(cfg):
    ht = cfg["residual"]["ht"]
    if ht == "h":
        return None
    if ht == "store_dt":
        if cfg["residual"]["formula"] not in NEEDS_CACHE or cfg["residual"]["planted_order"] != "none":
            raise ConfigError("[residual] ht = store_dt needs a cache-backed formula")
        dt = _load_phi(cfg).store_dt
        return lambda eps: dt
    v = float(ht)
    return lambda eps: v


def _report_paths(out):
    if out in (None, "-"):
        return None, None
    base = Path(out)
    if base.suffix in (".csv", ".json"):
        base = base.with_suffix("")
    return base.with_suffix(".csv"), base.with_suffix(".json")


def cmd_residual(cfg, out=None, threads=1):
    family, eq = _sweep_family(cfg)
    g, r = cfg["grid"], cfg["residual"]
    window = (g["x_lo"], g["x_hi"], g["n"], g["t"][0])
    report = verify.residual_sweep(family, eq, window, r["eps_list"], h_factor=r["h_factor"],
                                   ht_rule=_ht_rule(cfg), norm=r["norm"], workers=threads)
    csv_path, json_path = _report_paths(out)
    if csv_path is None:
        json.dump(report.summary(), sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    else:
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        report.write_csv(csv_path)
        report.write_json(json_path)
        print(f"fitted_order = {report.fitted_order:.4f}  fit_r2 = {report.fit_r2:.5f}  -> {csv_path}")
    return report


def cmd_phi_cache(cfg, out=None, threads=1):
    c = cfg["cache"]
    path = Path(out) if out not in (None, "-") else cache_path(cfg)
    phi = kdv.solve_faminskii(L=c["L"], N=c["N"], delta=c["delta"], tol=c["tol"],
                              store_dt=c["store_dt"], sponge_width=c["sponge_width"])
    path.parent.mkdir(parents=True, exist_ok=True)
    phi.save(path)
    diag = {k: v for k, v in phi.diagnostics.items() if not isinstance(v, (list, tuple))}
    summary = {"path": str(path), "accuracy": phi.accuracy, "tol": phi.tol, "diagnostics": diag}
    json.dump(summary, sys.stdout, indent=2, sort_keys=True, default=float)
    sys.stdout.write("\n")
    return phi


def cmd_compare(cfg, out=None, threads=1):
    c = cfg["compare"]
    g = cfg["grid"]
    rows = []
    for val in c["values"]:
        override = {c["param"]: val}
        u = make_evaluator(c["left"], cfg, override)
        v = make_evaluator(c["right"], cfg, override)
        for t in g["t"]:
            window = (g["x_lo"], g["x_hi"], g["n"], t)
            rows.append((float(val), float(t), verify.compare_fields(u, v, window, "max"),
                         verify.compare_fields(u, v, window, "L2")))
    _write_rows(out, [c["param"], "t", "norm_max", "norm_l2"], rows)
    return rows


COMMANDS = {
    "eval": cmd_eval,
    "residual": cmd_residual,
    "phi-cache": cmd_phi_cache,
    "compare": cmd_compare,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="renormasym", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", metavar="PATH", help="INI configuration file")
        sp.add_argument("--out", metavar="PATH", help="output file ('-' for stdout)")
        sp.add_argument("--preset", choices=sorted(PRESETS), help="named configuration")
        sp.add_argument("--threads", type=int, default=1, metavar="N", help="worker threads for sweeps")
        sp.add_argument("--self-test", dest="self_test", type=float, metavar="ORDER",
                        help="residual only: sweep a planted family of this order")
        sp.add_argument("--print-config", action="store_true",
                        help="print the canonical configuration and exit")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.preset)
        if args.self_test is not None:
            if args.command != "residual":
                raise ConfigError("--self-test applies to the residual command only")
            cfg["residual"]["planted_order"] = repr(float(args.self_test))
        if args.print_config:
            sys.stdout.write(canonical(cfg))
            return 0
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        validate(cfg, args.command)
        COMMANDS[args.command](cfg, args.out, args.threads)
    except (ConfigError, MissingCacheError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError, ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

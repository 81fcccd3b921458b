"""Command-line front end.

Every command writes a CSV result and a ``key=value`` metadata sidecar.
Parameters come from ``--config FILE`` (flat ``key=value`` lines) and are
overridden by flags.  Exit status: 0 success, 2 invalid configuration,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import re
import sys

import numpy as np
import scipy

from . import __version__
from .cell import (PsiInfinity, g_upper, grid_energy, zigzag_optimize, zigzag_scan,
                   zigzag_threshold, threshold_scan)
from .errors import DislocnetError
from .kernel import KernelOnCircle, MaterialCubic, kernel_positivity
from .limit import PiecewiseAffineSlip, grid_density, limit_energy, self_energy, strip_slip
from .linetension import Psi0, psi0_quadrature
from .phasefield import (PhaseFieldConfig, TorusGrid, build_regularized_dipole,
                         build_sharp_dipole, elastic_energy_spectral, energy_components,
                         minimize_energy, near_far_split, scaling_fit, stack_ratios)
from .relax import Relaxation

EXIT_INVALID = 2
EXIT_NUMERICAL = 3


class ConfigError(ValueError):
    pass


# -- value parsing -----------------------------------------------------------

_NUM = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)?\s*\*?\s*(pi)?\s*$")


def parse_number(text) -> float:
    """Float literal, ``a/b``, ``a^b``, or a multiple of ``pi`` such as ``4pi``."""
    if isinstance(text, (int, float)):
        return float(text)
    s = str(text).strip().lower()
    if "/" in s:
        a, b = s.split("/", 1)
        return parse_number(a) / parse_number(b)
    if "^" in s:
        a, b = s.split("^", 1)
        return parse_number(a) ** parse_number(b)
    if s[:1] in "+-" and s[1:].lstrip().startswith("pi"):
        return (-1.0 if s[0] == "-" else 1.0) * parse_number(s[1:])
    m = _NUM.match(s)
    if not m or (m.group(1) is None and m.group(2) is None):
        raise ConfigError(f"cannot parse number {text!r}")
    val = float(m.group(1)) if m.group(1) is not None else 1.0
    return val * math.pi if m.group(2) else val


def parse_vector(text) -> np.ndarray:
    return np.array([parse_number(x) for x in str(text).split(",") if x.strip()])


def parse_matrix(text) -> np.ndarray:
    rows = [parse_vector(r) for r in str(text).split(";") if r.strip()]
    if len({len(r) for r in rows}) != 1:
        raise ConfigError(f"ragged matrix {text!r}")
    return np.array(rows)


def parse_int(text) -> int:
    v = parse_number(text)
    if v != int(v):
        raise ConfigError(f"expected an integer, got {text!r}")
    return int(v)


def parse_bool(text) -> bool:
    s = str(text).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def parse_unit(text) -> np.ndarray:
    n = parse_vector(text)
    r = np.linalg.norm(n)
    if r == 0:
        raise ConfigError("normal must be nonzero")
    return n / r


# -- parameter tables --------------------------------------------------------

COMMON = {
    "mu": (parse_number, "4pi", "shear modulus (accepts 4pi)"),
    "nu": (parse_number, "1/3", "Poisson ratio"),
    "kernel": (str, None, "CSV table of the angular kernel (overrides mu, nu)"),
}

COMMANDS = {
    "psi0": {
        "b": (parse_vector, "1,0", "Burgers vector"),
        "n": (parse_unit, "1,0", "line normal (normalized)"),
        "method": (str, "auto", "auto | quadrature | closed"),
        "tol": (parse_number, "1e-10", "quadrature relative tolerance"),
    },
    "psirel": {
        "b": (parse_vector, "1,1", "integer Burgers vector"),
        "n": (parse_unit, "1,-1", "line normal"),
        "p_max": (parse_int, "4", "maximum number of parts"),
        "b_max": (parse_int, None, "component bound of parts (default 2|b|_inf)"),
        "m_dirs": (parse_int, "720", "sampled directions for faceting"),
        "witness": (str, None, "write the microstructure witness as JSON"),
    },
    "psiinf": {
        "b": (parse_vector, "1,1", "Burgers vector (integer: search, real: closure)"),
        "n": (parse_unit, "1,-1", "line normal"),
        "s_max": (parse_int, "3", "largest multiple in the asymptotic search"),
        "p_max": (parse_int, "4", "maximum number of parts"),
        "m_dirs": (parse_int, "720", "sampled directions for faceting"),
    },
    "cell-energy": {
        "A": (parse_matrix, "1,0;0,-1", "slip gradient, rows separated by ';'"),
        "n_normals": (parse_int, "180", "laminate normals on the half circle"),
        "triples": (parse_bool, "true", "include three-family laminates"),
        "witness": (str, None, "write the winning construction as JSON"),
    },
    "zigzag-scan": {
        "sigma": (parse_number, "1", "cell spacing"),
        "steps": (parse_int, "200", "number of delta samples in [0, sigma/2)"),
    },
    "threshold-scan": {
        "eta_min": (parse_number, "0", "smallest eta"),
        "eta_max": (parse_number, "0.9", "largest eta"),
        "steps": (parse_int, "91", "number of eta samples"),
        "tol": (parse_number, "1e-6", "bisection tolerance for the thresholds"),
    },
    "phasefield-eval": {
        "L": (parse_number, "1", "torus period"),
        "M": (parse_int, "256", "grid points per side"),
        "eps": (parse_number, "1/32", "core scale"),
        "b": (parse_vector, "1,0", "Burgers vector of the dipole"),
        "profile": (str, "regularized", "regularized | sharp | file"),
        "grid": (str, None, "binary grid file for profile=file"),
        "minimize": (parse_int, "0", "gradient-descent iterations before evaluation"),
        "step": (parse_number, "1e-4", "initial descent step"),
    },
    "scaling-fit": {
        "L": (parse_number, "1", "torus period"),
        "M": (parse_int, "2048", "grid points per side"),
        "eps_list": (lambda s: [parse_number(x) for x in str(s).split(",")],
                     "2^-4,2^-5,2^-6,2^-7,2^-8", "core scales"),
        "b": (parse_vector, "1,0", "Burgers vector"),
        "stack": (lambda s: [parse_int(x) for x in str(s).split(",")], "1,2,4",
                  "stack sizes for the quadratic-growth check"),
    },
    "near-far": {
        "L": (parse_number, "1", "torus period"),
        "M": (parse_int, "64", "grid points per side (at most 128)"),
        "eps": (parse_number, "1/16", "core scale"),
        "rho": (parse_number, "1/4", "near-field radius"),
        "b": (parse_vector, "1,0", "Burgers vector of the dipole"),
    },
    "selfenergy": {
        "slip": (str, None, "JSON file with a piecewise-affine slip"),
        "A": (parse_matrix, "0,1;0,0", "slip gradient of the strip example"),
        "L": (parse_number, "1", "period of the strip example"),
        "g": (str, "grid", "density: grid | gupper | frobenius"),
    },
    "limit-energy": {
        "L": (parse_number, "1", "torus period"),
        "M": (parse_int, "64", "grid points per side"),
        "eps": (parse_number, "1/16", "core scale of the dipole profile"),
        "b": (parse_vector, "1,0", "Burgers vector of the dipole"),
        "profile": (str, "regularized", "regularized | sharp | file"),
        "grid": (str, None, "binary grid file for profile=file"),
        "g": (str, "grid", "density: grid | frobenius"),
        "theta_j": (parse_number, None, "jump threshold (default 10 h median|grad u|)"),
    },
}


def read_config(path) -> dict:
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            k, v = line.split("=", 1)
            out[k.strip().replace("-", "_")] = v.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dislocnet", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, params in COMMANDS.items():
        sp = sub.add_parser(name, help=f"{name} computation")
        sp.add_argument("--config", help="key=value configuration file")
        sp.add_argument("--out", help="result CSV path (metadata goes to OUT.meta)")
        for key, (_, default, helptext) in {**COMMON, **params}.items():
            flag = "--" + key.replace("_", "-")
            sp.add_argument(flag, dest=key, default=None,
                            help=f"{helptext} [default: {default}]")
    return p


def resolve(command: str, args: argparse.Namespace) -> dict:
    """Merge defaults, config file and flags; parse every value."""
    table = {**COMMON, **COMMANDS[command]}
    conf = read_config(args.config) if args.config else {}
    unknown = set(conf) - set(table)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    out = {}
    for key, (parse, default, _) in table.items():
        raw = getattr(args, key)
        if raw is None:
            raw = conf.get(key, default)
        if raw is None:
            out[key] = None
            continue
        try:
            out[key] = parse(raw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from exc
    return out


# -- context helpers ---------------------------------------------------------


def _material(p) -> MaterialCubic:
    return MaterialCubic(mu=p["mu"], nu=p["nu"])


def _kernel(p) -> KernelOnCircle:
    if p.get("kernel"):
        k = KernelOnCircle.from_csv(p["kernel"])
        kernel_positivity(k)
        return k
    return KernelOnCircle.cubic(_material(p))


def _psi0(p) -> Psi0:
    if p.get("kernel"):
        return Psi0(_kernel(p))
    return Psi0.cubic(_material(p))


def _integer(b) -> np.ndarray:
    if not np.all(b == np.round(b)):
        raise ConfigError("Burgers vector must be integral")
    return np.round(b).astype(int)


def _psi_inf(p) -> PsiInfinity:
    return PsiInfinity(_psi0(p))


def _grid_from(p) -> TorusGrid:
    prof = p["profile"]
    if prof == "regularized":
        return build_regularized_dipole(p["L"], p["M"], p["eps"], p["b"])
    if prof == "sharp":
        return build_sharp_dipole(p["L"], p["M"], p["b"])
    if prof == "file":
        if not p.get("grid"):
            raise ConfigError("profile=file needs --grid")
        return TorusGrid.from_binary(p["grid"])
    raise ConfigError(f"unknown profile {prof!r}")


def _density(name, p):
    if name == "grid":
        return grid_density(_psi_inf(p))
    if name == "frobenius":
        return lambda A: float(np.linalg.norm(A))
    if name == "gupper":
        psi = _psi_inf(p)
        return lambda A: g_upper(A, psi)[0]
    raise ConfigError(f"unknown density {name!r}")


def _write_json(path, data):
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- commands ----------------------------------------------------------------


def cmd_psi0(p):
    b, n = p["b"], p["n"]
    method = p["method"]
    if method not in ("auto", "quadrature", "closed"):
        raise ConfigError("method must be auto, quadrature or closed")
    if method == "closed" and p.get("kernel"):
        raise ConfigError("closed form needs the cubic material, not a kernel table")
    if method == "quadrature" or p.get("kernel"):
        val = psi0_quadrature(b, n, _kernel(p), p["tol"])
    else:
        val = Psi0.cubic(_material(p))(b, n)
    return ["b", "n", "psi0"], [[_vec(b), _vec(n), val]], {}


def cmd_psirel(p):
    psi0 = _psi0(p)
    rel = Relaxation(psi0, m_dirs=p["m_dirs"], p_max=p["p_max"])
    b = _integer(p["b"])
    val, wit = rel.split_search(b, p["n"], p["p_max"], p["b_max"])
    if p.get("witness"):
        _write_json(p["witness"], wit.to_dict())
    rows = [[_vec(b), _vec(p["n"]), val, psi0(b, p["n"]), len(wit.parts)]]
    return ["b", "n", "psi_rel_upper", "psi0", "parts"], rows, {}


def cmd_psiinf(p):
    psi0 = _psi0(p)
    b = p["b"]
    if np.all(b == np.round(b)):
        rel = Relaxation(psi0, m_dirs=p["m_dirs"], p_max=p["p_max"], s_max=p["s_max"])
        val = rel.psi_infinity(_integer(b), p["n"])
        how = "search"
    else:
        val = PsiInfinity(psi0, m_dirs=p["m_dirs"])(b, p["n"])
        how = "closure"
    return ["b", "n", "psi_infinity", "method"], [[_vec(b), _vec(p["n"]), val, how]], {}


def cmd_cell_energy(p):
    A = p["A"]
    psi = _psi_inf(p)
    val, wit = g_upper(A, psi, n_normals=p["n_normals"], triples=p["triples"])
    if p.get("witness"):
        _write_json(p["witness"], _jsonable(wit))
    rows = [[_mat(A), val, grid_energy(A, psi), wit["family"]]]
    return ["A", "g_upper", "grid_energy", "family"], rows, {}


def cmd_zigzag_scan(p):
    if p.get("kernel"):
        raise ConfigError("the zig-zag closed forms need the cubic material")
    mat = _material(p)
    rows = zigzag_scan(p["sigma"], mat, p["steps"])
    d, e = zigzag_optimize(p["sigma"], mat)
    meta = {"delta_star": d, "delta_star_over_sigma": d / p["sigma"],
            "e_star_per_area": e / p["sigma"] ** 2}
    return ["delta", "e", "e_per_area"], [list(r) for r in rows], meta


def cmd_threshold_scan(p):
    if p["steps"] < 2:
        raise ConfigError("steps must be at least 2")
    etas = np.linspace(p["eta_min"], p["eta_max"], p["steps"])
    rows = threshold_scan(etas)
    meta = {"eta_threshold": zigzag_threshold("eta", tol=p["tol"]),
            "nu_threshold": zigzag_threshold("nu", tol=p["tol"])}
    return ["eta", "nu", "delta_star_over_sigma", "e_star_per_area"], [list(r) for r in rows], meta


def cmd_phasefield_eval(p):
    k = _kernel(p)
    g = _grid_from(p)
    cfg = PhaseFieldConfig(p["eps"], k)
    meta = {}
    if p["minimize"] > 0:
        trace = []
        g = minimize_energy(g, cfg, p["minimize"], p["step"], trace=trace)
        meta["descent_steps"] = len(trace) - 1
    c = energy_components(g, cfg)
    return ["peierls", "elastic", "total"], [[c["peierls"], c["elastic"], c["total"]]], meta


def cmd_scaling_fit(p):
    k = _kernel(p)
    fit = scaling_fit(p["L"], p["M"], p["eps_list"], p["b"], k)
    stack_eps = min(p["eps_list"])
    stack = stack_ratios(p["L"], p["M"], stack_eps, p["stack"], p["b"], k)
    meta = {"slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2,
            "slope_without_coarsest": fit.slope_without_coarsest,
            **{f"calibration_{k2}": v for k2, v in fit.calibration.items()},
            "stack_eps": stack_eps,
            **{f"stack_ratio_{r[0]}": r[2] for r in stack[1:]}}
    return ["eps", "log_inv_eps", "peierls", "elastic", "total"], [list(r) for r in fit.table], meta


def cmd_near_far(p):
    k = _kernel(p)
    g = build_regularized_dipole(p["L"], p["M"], p["eps"], p["b"])
    near, far = near_far_split(g, k, p["rho"])
    spectral = elastic_energy_spectral(g, k)
    rel = (near + far - spectral) / spectral if spectral else 0.0
    return ["near", "far", "spectral", "relative_gap"], [[near, far, spectral, rel]], {}


def cmd_selfenergy(p):
    u = PiecewiseAffineSlip.from_json(p["slip"]) if p.get("slip") else strip_slip(p["A"], p["L"])
    g = _density(p["g"], p)
    e = self_energy(u, g, detail=True)
    return ["bulk", "jump", "total"], [[e["bulk"], e["jump"], e["total"]]], {}


def cmd_limit_energy(p):
    if p["g"] == "gupper":
        raise ConfigError("g=gupper is too slow per grid cell; use grid or frobenius")
    g = _grid_from(p)
    e = limit_energy(g, _density(p["g"], p), _kernel(p), p.get("theta_j"))
    cols = ["bulk", "jump", "self", "elastic", "total"]
    return cols, [[e[c] for c in cols]], {"theta_J": e["theta_J"]}


HANDLERS = {
    "psi0": cmd_psi0, "psirel": cmd_psirel, "psiinf": cmd_psiinf,
    "cell-energy": cmd_cell_energy, "zigzag-scan": cmd_zigzag_scan,
    "threshold-scan": cmd_threshold_scan, "phasefield-eval": cmd_phasefield_eval,
    "scaling-fit": cmd_scaling_fit, "near-far": cmd_near_far,
    "selfenergy": cmd_selfenergy, "limit-energy": cmd_limit_energy,
}


# -- output ------------------------------------------------------------------


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _vec(v):
    return " ".join(_fmt(float(x)) for x in np.ravel(v))


def _mat(A):
    return ";".join(_vec(r) for r in np.atleast_2d(A))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def render_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def _meta_value(v):
    if isinstance(v, np.ndarray):
        return _vec(v) if v.ndim == 1 else _mat(v)
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt(x) for x in v)
    return _fmt(v)


def metadata(command, params, extra) -> dict:
    meta = {"command": command, "dislocnet_version": __version__,
            "numpy_version": np.__version__, "scipy_version": scipy.__version__}
    if params.get("kernel"):
        meta["normalization"] = "kernel table; psi0 unit not fixed"
    else:
        mat = _material(params)
        meta.update({"eta": mat.eta, "unit_mu_over_4pi": mat.unit,
                     "normalization": "energies in absolute units; mu/(4 pi) given as unit_mu_over_4pi"})
    for k, v in params.items():
        meta[f"param_{k}"] = "none" if v is None else _meta_value(v)
    for k, v in extra.items():
        meta[k] = _meta_value(v)
    return meta


def render_meta(meta) -> str:
    return "".join(f"{k}={meta[k]}\n" for k in sorted(meta))


def run(argv=None, stdout=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        params = resolve(args.command, args)
        header, rows, extra = HANDLERS[args.command](params)
    except (ConfigError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"dislocnet: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except DislocnetError as exc:
        if isinstance(exc, ValueError):
            print(f"dislocnet: invalid configuration: {exc}", file=sys.stderr)
            return EXIT_INVALID
        print(f"dislocnet: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"dislocnet: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    body = render_csv(header, rows)
    meta = render_meta(metadata(args.command, params, extra))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(body)
        with open(args.out + ".meta", "w") as fh:
            fh.write(meta)
    else:
        stdout.write("".join(f"# {line}\n" for line in meta.splitlines()))
        stdout.write(body)
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()

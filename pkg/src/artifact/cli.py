"""Command-line front end.

Every command writes one data file (CSV or JSON) whose header carries a
manifest: schema, lambda, tol, package versions and timings. Re-running a
command with the same configuration reproduces everything but the timings
bit for bit.

Exit codes: 0 success, 1 acceptance failure (``verify``), 2 configuration
error, 3 numerical failure (a diagnostic JSON is written next to the output).
"""
from __future__ import annotations

import argparse
import json
import platform
import subprocess
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np

from . import acceptance
from .complex_special import DomainError, PoleError
from .direct_solver import (
    BlowUpError,
    InsufficientDecayError,
    SolverConfig,
    evolve,
    log_grid,
    mollified_delta,
)
from .fundamental_solution import (
    NoPlateauError,
    RealnessError,
    eval_G,
    eval_Ghat,
    eval_Ghat_descent,
    finite_time_tails,
    large_time_constants,
    large_time_profile,
    rescale_fundamental,
    small_time_profile,
)
from .ivp_flux import (
    AdmissibilityError,
    InitialDatum,
    flux_J_minus,
    flux_J_plus,
    flux_linearized,
    solve_ivp,
)
from .quadrature import QuadratureError
from .symbols import BranchTrackingError, KernelParams, eval_M, eval_Phi
from .wiener_hopf import WienerHopfFactor, catalog_V_singularities, residue_V

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMA = "artifact.output/1"

NUMERICAL_ERRORS = (PoleError, DomainError, QuadratureError, BranchTrackingError, BlowUpError,
                    NoPlateauError, RealnessError, InsufficientDecayError, AdmissibilityError,
                    FloatingPointError)

GLOBAL_DEFAULTS = {
    "lambda": 1.5,
    "tol": 1e-8,
    "out": None,
    "cache": None,
    "grid_min": 1e-3,
    "grid_max": 1e3,
    "grid_nodes": 2048,
    "t": 0.5,
    "R": 1.0,
}


class ConfigError(ValueError):
    """Invalid configuration; maps to exit code 2."""


def versions() -> dict:
    def ver(name):
        try:
            return metadata.version(name)
        except metadata.PackageNotFoundError:
            return "unknown"
    return {"artifact": ver("artifact"), "numpy": np.__version__, "scipy": ver("scipy"),
            "python": platform.python_version()}


# -- configuration ------------------------------------------------------------------

def load_config_file(path) -> dict:
    """Flat key/value mapping from a ``.json`` or TOML file; dashes map to underscores."""
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        data = json.loads(raw) if p.suffix == ".json" else tomllib.loads(raw.decode())
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse config file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a key/value table")
    return {str(k).replace("-", "_"): v for k, v in data.items()}


def resolve_config(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then flags given on the command line."""
    cfg = dict(GLOBAL_DEFAULTS)
    given = {k: v for k, v in vars(args).items() if v is not None and k not in ("func", "config")}
    if args.config:
        cfg.update(load_config_file(args.config))
    cfg.update(given)
    lam, tol = cfg["lambda"], cfg["tol"]
    try:
        lam, tol = float(lam), float(tol)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"lambda and tol must be numbers: {exc}") from exc
    if not 1.0 < lam < 2.0:
        raise ConfigError(f"lambda must lie in (1, 2), got {lam}")
    if not 1e-14 <= tol <= 1e-2:
        raise ConfigError(f"tol must lie in [1e-14, 1e-2], got {tol}")
    if not (0 < float(cfg["grid_min"]) < float(cfg["grid_max"])):
        raise ConfigError("need 0 < grid-min < grid-max")
    if int(cfg["grid_nodes"]) < 16:
        raise ConfigError("grid-nodes must be at least 16")
    if float(cfg["t"]) <= 0:
        raise ConfigError("t must be positive")
    cfg["lambda"], cfg["tol"] = lam, tol
    return cfg


def make_factor(cfg) -> WienerHopfFactor:
    w = WienerHopfFactor(KernelParams(cfg["lambda"]))
    path = cfg.get("cache")
    if path and Path(path).exists():
        try:
            w.load_cache(path)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"unusable factor cache {path}: {exc}") from exc
    return w


def persist_factor(w, cfg) -> None:
    if cfg.get("cache"):
        w.save_cache(cfg["cache"])


# -- output -------------------------------------------------------------------------

def manifest(cfg, command, timings) -> dict:
    return {"schema": SCHEMA, "command": command, "lambda": cfg["lambda"], "tol": cfg["tol"],
            "versions": versions(), "timings": timings}


def write_json(path, cfg, command, result, timings) -> str:
    text = json.dumps({"manifest": manifest(cfg, command, timings), "result": result},
                      indent=2, sort_keys=True, default=_jsonable)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)
    return text


def write_csv(path, cfg, command, columns: dict, units: dict, timings, extra=None) -> None:
    head = manifest(cfg, command, timings)
    if extra:
        head["extra"] = extra
    names = list(columns)
    lines = ["# " + json.dumps(head, sort_keys=True, default=_jsonable),
             "# units: " + ", ".join(f"{n} [{units.get(n, '1')}]" for n in names),
             ",".join(names)]
    n = len(next(iter(columns.values())))
    for i in range(n):
        lines.append(",".join(repr(float(columns[c][i])) for c in names))
    text = "\n".join(lines) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _jsonable(v):
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.bool_):
        return bool(v)
    raise TypeError(f"not serialisable: {type(v)}")


def _floats(text: str) -> list:
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from exc


# -- commands -----------------------------------------------------------------------

def cmd_symbol(cfg, args):
    t0 = time.perf_counter()
    re = np.linspace(float(args.re_min), float(args.re_max), int(args.n))
    z = re + 1j * float(args.im)
    if args.kind == "M":
        v = eval_M(z)
    else:
        v = eval_Phi(z, KernelParams(cfg["lambda"]))
    write_csv(cfg["out"], cfg, f"symbol {args.kind}",
              {"re": re, "im": np.full_like(re, float(args.im)),
               "value_re": np.real(v), "value_im": np.imag(v)}, {},
              {"seconds": time.perf_counter() - t0})
    return 0


def cmd_factor(cfg, args):
    t0 = time.perf_counter()
    w = make_factor(cfg)
    p = w.params
    b = 0.5 * (p.strip[0] + p.strip[1])
    re = np.linspace(-float(args.re_max), float(args.re_max), int(args.n))
    vals = np.array([w.eval_V(a + 1j * b) for a in re])
    cat = catalog_V_singularities(w, int(args.count))
    res = {}
    for s in cat.poles:
        if s.order == 1:
            res[repr(s.location.imag)] = residue_V(s.location, w, method="circle")
    result = {
        "beta1": w.beta1, "gauge_offset": w.gauge_offset, "line_height": b,
        "catalog": [{"kind": s.kind, "im": s.location.imag, "order": s.order}
                    for s in cat.all()],
        "residues": res,
        "samples": [[a, complex(v)] for a, v in zip(re, vals)],
    }
    persist_factor(w, cfg)
    write_json(cfg["out"], cfg, "factor", result, {"seconds": time.perf_counter() - t0})
    return 0


def cmd_ghat(cfg, args):
    t0 = time.perf_counter()
    w = make_factor(cfg)
    p = w.params
    im = 0.5 * (p.strip[0] + p.strip[1]) if args.xi_im is None else float(args.xi_im)
    xi = complex(float(args.xi_re), im)
    t = float(cfg["t"])
    ev = eval_Ghat_descent(t, xi, w, tol=cfg["tol"]) if args.descent \
        else eval_Ghat(t, xi, w, tol=cfg["tol"])
    persist_factor(w, cfg)
    write_json(cfg["out"], cfg, "ghat", {"t": t, "xi": xi, "value": ev.value,
                                         "error_estimate": ev.error_estimate},
               {"seconds": time.perf_counter() - t0})
    return 0


def cmd_g(cfg, args):
    t0 = time.perf_counter()
    w = make_factor(cfg)
    t = float(cfg["t"])
    if args.X is not None:
        X = np.array(_floats(args.X))
    else:
        X = np.log(log_grid(float(cfg["grid_min"]), float(cfg["grid_max"]),
                            int(cfg["grid_nodes"])))
    G = eval_G(t, X, w, tol=cfg["tol"], check_real=args.check_real)
    persist_factor(w, cfg)
    write_csv(cfg["out"], cfg, "g", {"X": X, "x": np.exp(X), "G": G},
              {"X": "ln size", "x": "size", "G": "density per unit size"},
              {"seconds": time.perf_counter() - t0}, {"t": t})
    return 0


def cmd_profile(cfg, args):
    t0 = time.perf_counter()
    w = make_factor(cfg)
    t = float(cfg["t"])
    if args.regime == "small-time":
        chi = np.linspace(float(args.chi_min), float(args.chi_max), int(args.n))
        g = t * t * eval_G(t, t * t * chi, w, tol=cfg["tol"])
        ps = small_time_profile(chi)
        write_csv(cfg["out"], cfg, "profile small-time",
                  {"chi": chi, "t2G": g, "psi_oracle": ps, "abs_diff": np.abs(g - ps)},
                  {"chi": "ln x / t^2"}, {"seconds": time.perf_counter() - t0}, {"t": t})
    elif args.regime == "large-time":
        th = np.linspace(float(args.theta_min), float(args.theta_max), int(args.n))
        psi = large_time_profile(th, w)
        const = large_time_constants(w)
        write_csv(cfg["out"], cfg, "profile large-time", {"theta": th, "psi1": psi},
                  {"theta": "ln sigma"}, {"seconds": time.perf_counter() - t0},
                  {k: complex(v) for k, v in const.items()})
    else:
        fit = finite_time_tails(t, w)
        write_json(cfg["out"], cfg, "profile tails", vars(fit),
                   {"seconds": time.perf_counter() - t0})
    persist_factor(w, cfg)
    return 0


def _direct_run(cfg, args):
    p = KernelParams(cfg["lambda"])
    x = log_grid(float(cfg["grid_min"]), float(cfg["grid_max"]), int(cfg["grid_nodes"]))
    g0 = mollified_delta(x, float(args.x0))
    cps = tuple(np.linspace(0.0, float(cfg["t"]), int(args.checkpoints) + 1)[1:])
    sc = SolverConfig(t_end=float(cfg["t"]), scheme=args.scheme, checkpoints=cps)
    return evolve(g0, sc, p)


def cmd_direct(cfg, args):
    t0 = time.perf_counter()
    tr = _direct_run(cfg, args)
    T = np.concatenate([np.full(len(s.x_nodes), tm) for tm, s in zip(tr.times, tr.states)])
    X = np.concatenate([s.x_nodes for s in tr.states])
    V = np.concatenate([s.values for s in tr.states])
    diag = {k: v for k, v in tr.diagnostics.items() if k not in ("masses", "seconds")}
    diag["final_mass"] = tr.diagnostics["masses"][-1]
    write_csv(cfg["out"], cfg, "direct", {"t": T, "x": X, "g": V},
              {"t": "time", "x": "size", "g": "density per unit size"},
              {"seconds": time.perf_counter() - t0}, diag)
    return 0


def cmd_compare(cfg, args):
    t0 = time.perf_counter()
    tr = _direct_run(cfg, args)
    w = make_factor(cfg)
    st = tr.states[-1]
    x = st.x_nodes
    sel = (x >= float(args.x_lo)) & (x <= float(args.x_hi))
    ga = rescale_fundamental(float(cfg["t"]), x[sel], float(args.x0), w)
    err = np.trapezoid(np.abs(st.values[sel] - ga), x[sel]) / np.trapezoid(np.abs(ga), x[sel])
    persist_factor(w, cfg)
    write_json(cfg["out"], cfg, "compare",
               {"t": float(cfg["t"]), "rel_L1": float(err), "x": x[sel], "direct": st.values[sel],
                "analytic": ga}, {"seconds": time.perf_counter() - t0})
    return 0


def cmd_flux(cfg, args):
    t0 = time.perf_counter()
    p = KernelParams(cfg["lambda"])
    A = float(args.power_law)
    q = 0.5 * (3.0 + p.lam)
    R = float(cfg["R"])
    f = lambda x: A * np.asarray(x, dtype=float) ** -q
    tol = max(cfg["tol"], 1e-10)
    jm = flux_J_minus(f, R, p, tol=tol)
    jp = flux_J_plus(f, R, p, tol=tol)
    lin = flux_linearized(f, R, p)
    result = {"R": R, "A": A, "J_minus": jm.J_minus, "J_plus": jp.J_plus,
              "J_minus_parts": jm.parts, "J_plus_parts": jp.parts,
              "linearized": {"I1": lin.I1, "I2": lin.I2, "I3": lin.I3, "total": lin.J_minus}}
    write_json(cfg["out"], cfg, "flux", result, {"seconds": time.perf_counter() - t0})
    return 0


def _bump(y):
    y = np.asarray(y, dtype=float)
    inside = (y > 0.5) & (y < 2.0)
    arg = np.where(inside, (y - 0.5) * (2.0 - y), 1.0)
    return np.where(inside, np.exp(-1.0 / arg), 0.0)


def cmd_ivp(cfg, args):
    t0 = time.perf_counter()
    w = make_factor(cfg)
    h0 = InitialDatum(_bump, support=(0.5, 2.0))
    x = log_grid(float(cfg["grid_min"]), float(cfg["grid_max"]), int(args.n))
    res = solve_ivp(h0, float(cfg["t"]), x, w)
    persist_factor(w, cfg)
    write_csv(cfg["out"], cfg, "ivp", {"x": x, "h": res.values},
              {"x": "size", "h": "density per unit size"},
              {"seconds": time.perf_counter() - t0},
              {"t": float(cfg["t"]), "method": res.method, "error_estimate": res.error_estimate,
               "datum": "exp(-1/((y-1/2)(2-y))) on (1/2, 2)"})
    return 0


def _parse_only(text) -> list:
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            a, b = part.split("-")
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    bad = [n for n in out if n not in acceptance.CRITERIA and n != 11]
    if bad:
        raise ConfigError(f"unknown criteria {bad}")
    return sorted(set(out))


def cmd_verify(cfg, args):
    t0 = time.perf_counter()
    only = _parse_only(args.only)
    numeric = [n for n in only if n != 11]
    ctx = acceptance.AcceptanceContext(cfg["lambda"], cfg["tol"])
    results, seconds = acceptance.run_criteria(numeric, ctx)
    if 11 in only:
        t11 = time.perf_counter()
        results.append(determinism_check(results, cfg, numeric))
        seconds[11] = time.perf_counter() - t11
    for r in results:
        print(r.line(), file=sys.stderr)
    payload = json.loads(acceptance.results_to_json(results, cfg["lambda"], cfg["tol"]))
    payload["all_passed"] = all(r.passed for r in results)
    write_json(cfg["out"], cfg, "verify", payload,
               {"seconds": time.perf_counter() - t0, "per_criterion": seconds})
    return 0 if payload["all_passed"] else 1


def determinism_check(results, cfg, numbers) -> acceptance.CriterionResult:
    """Re-run the same checks in a fresh process and compare the result payload."""
    first = acceptance.results_to_json(results, cfg["lambda"], cfg["tol"])
    cmd = [sys.executable, "-m", "artifact.cli", "verify", "--lambda", repr(cfg["lambda"]),
           "--tol", repr(cfg["tol"]), "--only", ",".join(map(str, numbers))]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode not in (0, 1):
        return acceptance.CriterionResult(11, "determinism", False,
                                          {"error": proc.stderr[-2000:]})
    second_payload = json.loads(proc.stdout)["result"]
    second_payload.pop("all_passed", None)
    second = json.dumps(second_payload, indent=2, sort_keys=True)
    first_norm = json.dumps(json.loads(first), indent=2, sort_keys=True)
    same = first_norm == second
    diffs = []
    if not same:
        a, b = json.loads(first_norm)["criteria"], second_payload["criteria"]
        diffs = [x["number"] for x, y in zip(a, b) if x != y]
    return acceptance.CriterionResult(11, "determinism", same,
                                      {"bytes": len(second), "differing_criteria": diffs})


# -- entry point --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("common options")
    g.add_argument("--config", help="TOML or JSON key/value file; flags override it")
    g.add_argument("--lambda", dest="lambda", type=float, help="kernel exponent in (1, 2)")
    g.add_argument("--tol", type=float, help="target tolerance in [1e-14, 1e-2]")
    g.add_argument("--out", help="output file (stdout when omitted)")
    g.add_argument("--cache", help="factor cache file, created on first use")
    g.add_argument("--grid-min", dest="grid_min", type=float)
    g.add_argument("--grid-max", dest="grid_max", type=float)
    g.add_argument("--grid-nodes", dest="grid_nodes", type=int)
    g.add_argument("--t", type=float, help="time")
    g.add_argument("--R", type=float, help="flux cut size")

    parser = argparse.ArgumentParser(prog="artifact", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("symbol", parents=[common], help="tables of M or Phi")
    s.add_argument("--kind", choices=("M", "Phi"), default="M")
    s.add_argument("--re-min", dest="re_min", default="1.0")
    s.add_argument("--re-max", dest="re_max", default="10.0")
    s.add_argument("--n", default="10")
    s.add_argument("--im", default="0.0")
    s.set_defaults(func=cmd_symbol)

    s = sub.add_parser("factor", parents=[common], help="build or inspect the V factor")
    s.add_argument("--count", default="6")
    s.add_argument("--re-max", dest="re_max", default="20.0")
    s.add_argument("--n", default="41")
    s.set_defaults(func=cmd_factor)

    s = sub.add_parser("ghat", parents=[common], help="Fourier-side fundamental solution")
    s.add_argument("--xi-re", dest="xi_re", default="0.0")
    s.add_argument("--xi-im", dest="xi_im", default=None)
    s.add_argument("--descent", action="store_true", help="lowered integration line")
    s.set_defaults(func=cmd_ghat)

    s = sub.add_parser("g", parents=[common], help="fundamental solution G(t, X)")
    s.add_argument("--X", default=None, help="comma-separated ln x values")
    s.add_argument("--check-real", dest="check_real", action="store_true")
    s.set_defaults(func=cmd_g)

    s = sub.add_parser("profile", parents=[common], help="asymptotic profiles")
    s.add_argument("regime", choices=("small-time", "large-time", "tails"))
    s.add_argument("--chi-min", dest="chi_min", default="0.2")
    s.add_argument("--chi-max", dest="chi_max", default="5.0")
    s.add_argument("--theta-min", dest="theta_min", default="-12.0")
    s.add_argument("--theta-max", dest="theta_max", default="8.0")
    s.add_argument("--n", default="49")
    s.set_defaults(func=cmd_profile)

    for name, fn, hlp in (("direct", cmd_direct, "direct solver run"),
                          ("compare", cmd_compare, "direct solver vs analytic")):
        s = sub.add_parser(name, parents=[common], help=hlp)
        s.add_argument("--x0", default="1.0")
        s.add_argument("--scheme", choices=("explicit", "semi_implicit"), default="explicit")
        s.add_argument("--checkpoints", default="5")
        if name == "compare":
            s.add_argument("--x-lo", dest="x_lo", default="0.05")
            s.add_argument("--x-hi", dest="x_hi", default="20.0")
        s.set_defaults(func=fn)

    s = sub.add_parser("flux", parents=[common], help="fluxes of a power law")
    s.add_argument("--power-law", dest="power_law", default="1.0")
    s.set_defaults(func=cmd_flux)

    s = sub.add_parser("ivp", parents=[common], help="initial-value problem, bump datum")
    s.add_argument("--n", default="64")
    s.set_defaults(func=cmd_ivp)

    s = sub.add_parser("verify", parents=[common], help="acceptance suite")
    s.add_argument("--only", default="1-11")
    s.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    command = args.command
    ns = argparse.Namespace(**{k: v for k, v in vars(args).items() if k != "command"})
    try:
        cfg = resolve_config(ns)
        return args.func(cfg, ns)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NUMERICAL_ERRORS as exc:
        diag = {"schema": SCHEMA, "command": command, "error": type(exc).__name__,
                "message": str(exc), "diagnostics": getattr(exc, "diagnostics", None)}
        text = json.dumps(diag, indent=2, sort_keys=True, default=_jsonable)
        out = getattr(ns, "out", None)
        if out:
            Path(str(out) + ".diagnostic.json").write_text(text + "\n")
        print(text, file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: ``magspec <subcommand> [flags] --out <path>``.

Exit codes: 0 success, 1 computation failure (including any failed sweep
cell), 2 usage error. Tables are CSV with a header row, preceded by one
``# config: {...}`` comment line that echoes the resolved configuration.
Numbers use 17 significant digits. Non-finite values are never written; a
failed cell leaves its numeric fields empty and explains itself in the
``status`` column.
"""

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import kernels

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# value parsing
# --------------------------------------------------------------------------

def _number(tok: str) -> float:
    tok = tok.strip().lower().replace(" ", "")
    if tok in ("pi/2", "pi2"):
        return math.pi / 2
    if tok == "pi":
        return math.pi
    try:
        v = float(tok)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {tok!r}")
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"value must be finite: {tok!r}")
    return v


def _num_list(text: str):
    text = text.strip()
    if not text:
        return []
    return [_number(t) for t in text.split(",") if t.strip()]


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g") if math.isfinite(x) else ""
    return "" if x is None else str(x)


def _finite_json(obj):
    """Replace non-finite floats by None so JSON output stays strict."""
    if isinstance(obj, dict):
        return {k: _finite_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite_json(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _finite_json(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj) + 0.0 if math.isfinite(obj) else None   # no negative zeros
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _dumps(obj) -> str:
    return json.dumps(_finite_json(obj), indent=2, sort_keys=True, allow_nan=False)


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

def read_config_file(path: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment. Keys may use dashes or underscores."""
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}")
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected 'key = value'")
        k, v = (part.strip() for part in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _apply_file_defaults(sub: argparse.ArgumentParser, values: dict):
    """Typed parser defaults from the config file; explicit flags still win."""
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help",)}
    defaults = {}
    for k, raw in values.items():
        if k in ("config", "out") and k not in actions:
            continue
        a = actions.get(k)
        if a is None:
            raise UsageError(f"unknown config key {k!r}")
        if isinstance(a, argparse._StoreTrueAction):
            defaults[k] = raw.lower() in ("1", "true", "yes", "on")
        elif a.type is not None:
            try:
                defaults[k] = a.type(raw)
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"config key {k!r}: {exc}")
        else:
            defaults[k] = raw
        if a.choices is not None and defaults[k] not in a.choices:
            raise UsageError(f"config key {k!r}: {raw!r} not in {list(a.choices)}")
    sub.set_defaults(**defaults)


def _resolved(args) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}
    cfg["backend"] = kernels.BACKEND
    return cfg


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------

def write_csv(path: str, header, rows, config: dict):
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(_finite_json(config), sort_keys=True, allow_nan=False) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in header])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def emit_summary(summary: dict, as_json: bool, stream=None):
    stream = stream or sys.stdout
    if as_json:
        stream.write(_dumps(summary) + "\n")
        return
    for k in sorted(summary):
        v = summary[k]
        if isinstance(v, (dict, list, tuple)):
            v = json.dumps(_finite_json(v), sort_keys=True)
        else:
            v = _fmt(v)
        stream.write(f"{k}: {v}\n")


def _pool_map(fn, items, workers):
    """Ordered map over a bounded thread pool."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _status(exc: Exception) -> str:
    return f"failed: {type(exc).__name__}: {exc}".replace("\n", " ")


def _constants_from(args):
    from .model1d import compute_constants, default_constants, degennes_grid, montgomery_grid

    n = getattr(args, "grid_n", None)
    if n is None or n == 4000:
        return default_constants()
    return compute_constants(degennes_grid(n=n), montgomery_grid(n=n))


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def run_constants(args):
    from .model1d import compute_constants, degennes_grid, montgomery_grid

    c = compute_constants(degennes_grid(L=args.degennes_L, n=args.grid_n),
                          montgomery_grid(L=args.montgomery_L, n=args.grid_n),
                          extrapolate=not args.no_extrapolate)
    doc = c.as_dict()
    doc["config"] = _resolved(args)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(_dumps(doc) + "\n")
    emit_summary({k: doc[k] for k in ("theta0", "xi0", "delta0", "nu0_hat", "rho0")}, args.json)
    return EXIT_OK


def run_band(args):
    from .model1d import degennes_grid, degennes_mu, montgomery_grid, montgomery_mu

    if args.points < 2 or not args.param_max > args.param_min:
        raise UsageError("band needs --points >= 2 and param-max > param-min")
    if args.model == "degennes":
        grid = degennes_grid(n=args.grid_n)
        f = lambda p: degennes_mu(p, grid).value
    else:
        grid = montgomery_grid(n=args.grid_n)
        f = lambda p: montgomery_mu(p, grid).value
    params = np.linspace(args.param_min, args.param_max, args.points)

    def cell(p):
        try:
            return {"param": float(p), "mu": f(float(p)), "status": "ok"}
        except Exception as exc:   # per-cell failure goes into the table
            return {"param": float(p), "status": _status(exc)}

    rows = _pool_map(cell, params, args.workers)
    write_csv(args.out, ["param", "mu", "status"], rows, _resolved(args))
    ok = [r for r in rows if r["status"] == "ok"]
    best = min(ok, key=lambda r: r["mu"]) if ok else {}
    emit_summary({"model": args.model, "rows": len(rows), "failed": len(rows) - len(ok),
                  "min_param": best.get("param"), "min_mu": best.get("mu")}, args.json)
    return EXIT_OK if len(ok) == len(rows) else EXIT_FAIL


def run_sigma(args):
    from .halfspace import HalfPlaneBox, lower_bound, sigma

    if not args.nu:
        raise UsageError("empty --nu list")
    nus = sorted(abs(v) for v in args.nu)
    if any(v == 0 or v > math.pi / 2 + 1e-12 for v in nus):
        raise UsageError("every nu must lie in (0, pi/2]")
    c = _constants_from(args)
    box = HalfPlaneBox(L1=args.L1, L2=args.L2, n1=args.n1, n2=args.n2)

    def cell(nu):
        try:
            s = sigma(nu, box, constants=c, extrapolate=not args.no_extrapolate)
            return {"nu": nu, "sigma": s.value, "lower_bound": lower_bound(nu, c.theta0),
                    "edge_mass": s.edge_mass, "method": s.method, "status": "ok"}
        except Exception as exc:
            return {"nu": nu, "lower_bound": lower_bound(nu, c.theta0), "status": _status(exc)}

    rows = _pool_map(cell, nus, args.workers)
    write_csv(args.out, ["nu", "sigma", "lower_bound", "edge_mass", "method", "status"], rows,
              _resolved(args))
    vals = [r["sigma"] for r in rows if r["status"] == "ok"]
    failed = sum(r["status"] != "ok" for r in rows)
    emit_summary({"theta0": c.theta0, "samples": len(rows), "failed": failed,
                  "monotone": bool(np.all(np.diff(vals) >= -2 * args.tol)) if vals else False,
                  "sigma_max_nu": vals[-1] if vals else None}, args.json)
    return EXIT_OK if failed == 0 else EXIT_FAIL


def run_helical(args):
    from .asymptotics import gamma_tilde, minimize_over_gamma
    from .geometry import BRANCHES, gamma_point

    if not args.tau > 0:
        raise UsageError("--tau must be positive")
    if args.samples < 2:
        raise UsageError("--samples must be at least 2")
    c = _constants_from(args)
    edge = 1.0 - 1.0 / (args.samples + 1)
    params = np.linspace(-edge, edge, args.samples)
    jobs = [(br, float(p)) for br in BRANCHES for p in params]

    def cell(job):
        br, p = job
        try:
            pt = gamma_point(p, br, args.tau, with_normal_form=False)
            return {"x3": pt.x3, "branch": br, "kappa_nB": pt.kappa_nB, "b_dot_t": pt.b_dot_t,
                    "kappa_g": pt.kappa_g,
                    "gamma_tilde": gamma_tilde(pt.kappa_nB, pt.b_dot_t, c, args.variant),
                    "status": "ok"}
        except Exception as exc:
            return {"branch": br, "status": _status(exc)}

    rows = _pool_map(cell, jobs, args.workers)
    write_csv(args.out, ["x3", "branch", "kappa_nB", "b_dot_t", "kappa_g", "gamma_tilde", "status"],
              rows, _resolved(args))
    rep = minimize_over_gamma(args.tau, c, args.variant)
    failed = sum(r["status"] != "ok" for r in rows)
    emit_summary({"tau": args.tau, "tau0": rep.tau0, "regime": rep.regime.value,
                  "variant": rep.variant.value, "gamma_hat": rep.gamma_hat,
                  "argmin": [list(map(float, x)) for x in rep.argmin], "failed": failed,
                  "config": _resolved(args)}, args.json)
    return EXIT_OK if failed == 0 else EXIT_FAIL


def run_asympt(args):
    from .asymptotics import brute_force_threshold, minimize_over_gamma, tau0, two_term_eigenvalue

    if not args.tau > 0:
        raise UsageError("--tau must be positive")
    if not args.h:
        raise UsageError("empty --h list")
    if any(h <= 0 for h in args.h):
        raise UsageError("every h must be positive")
    c = _constants_from(args)
    rep = minimize_over_gamma(args.tau, c, args.variant)
    rows = [{"h": h, "two_term": two_term_eigenvalue(h, rep.gamma_hat, c),
             "leading": c.theta0 * h, "status": "ok"} for h in args.h]
    write_csv(args.out, ["h", "leading", "two_term", "status"], rows, _resolved(args))
    emit_summary({"tau": args.tau, "tau0": tau0(c.delta0),
                  "tau0_brute_force": brute_force_threshold(c.delta0),
                  "gamma_hat": rep.gamma_hat, "regime": rep.regime.value,
                  "variant": rep.variant.value,
                  "argmin": [list(map(float, x)) for x in rep.argmin],
                  "config": _resolved(args)}, args.json)
    return EXIT_OK


def run_quasimode(args):
    from .quasimode import (QuasimodeParams, build_phi_chain, extrapolate_ratio, helical_inputs,
                            quasimode_row)

    if not args.h:
        raise UsageError("empty --h list")
    if any(h <= 0 for h in args.h):
        raise UsageError("every h must be positive")
    if not (5.0 / 18.0 < args.delta < 1.0 / 3.0):
        raise UsageError("--delta must lie in (5/18, 1/3)")
    c = _constants_from(args)
    explicit = [args.theta, args.kappa, args.gamma]
    if all(v is not None for v in explicit):
        theta, kappa, gamma = explicit
        from .asymptotics import c_conj
        target = c_conj(gamma, theta, c)
        where = None
    elif any(v is not None for v in explicit):
        raise UsageError("give all of --theta, --kappa, --gamma or none of them")
    else:
        if not args.tau > 0:
            raise UsageError("--tau must be positive")
        gi = helical_inputs(args.tau, c, args.variant)
        theta, kappa, gamma, target = gi.theta, gi.kappa, gi.gamma, gi.target
        where = list(map(float, gi.position))
    if gamma == 0:
        raise UsageError("gamma must be nonzero")
    chain = build_phi_chain(c)

    def cell(h):
        try:
            p = QuasimodeParams(theta=theta, kappa=kappa, gamma=gamma, h=h, delta=args.delta,
                                C0=args.C0)
            r = quasimode_row(p, c, chain, args.dr)
            return {**vars(r), "target": target, "status": "ok"}
        except Exception as exc:
            return {"h": h, "target": target, "status": _status(exc)}

    rows = _pool_map(cell, sorted(args.h, reverse=True), args.workers)
    header = ["h", "norm2", "energy", "ratio", "target", "moment_r2", "moment_t2", "dt_energy",
              "dr_energy", "status"]
    write_csv(args.out, header, rows, _resolved(args))
    ok = [r for r in rows if r["status"] == "ok"]
    limit = extrapolate_ratio([r["h"] for r in ok], [r["ratio"] for r in ok]) if len(ok) >= 4 else None
    emit_summary({"theta": theta, "kappa": kappa, "gamma": gamma, "c_conj": target,
                  "point": where, "ratio_limit": limit, "failed": len(rows) - len(ok),
                  "chain_residuals": chain.residuals, "mu2": chain.mu2,
                  "config": _resolved(args)}, args.json)
    return EXIT_OK if len(ok) == len(rows) else EXIT_FAIL


def run_model3d(args):
    from .asymptotics import c_conj
    from .model3d import ModelParams, default_box, eta_zeta_sweep, fit_two_term

    if not args.h:
        raise UsageError("empty --h list")
    if any(h <= 0 for h in args.h):
        raise UsageError("every h must be positive")
    if not args.eta or not args.zeta:
        raise UsageError("empty --eta or --zeta list")
    c = _constants_from(args)
    try:
        base = ModelParams(gamma=args.gamma, theta=args.theta, h=args.h[0],
                           box=default_box(R=args.R, T=args.T, nr=args.nr, nt=args.nt))
    except ValueError as exc:
        raise UsageError(str(exc))
    hs = sorted(args.h, reverse=True)
    cells = eta_zeta_sweep(base, args.eta, args.zeta, hs, tol=args.tol, workers=args.workers)
    rows = []
    for cl in cells:
        row = {"h": cl.h, "eta": cl.eta, "zeta": cl.zeta, "status": cl.status}
        if cl.status == "ok":
            row.update(h_lambda=cl.value, deviation=cl.deviation,
                       scaled_deviation=abs(cl.deviation) / cl.h ** (4.0 / 3.0),
                       residual=cl.residual, iterations=cl.iterations)
        rows.append(row)
    header = ["h", "eta", "zeta", "h_lambda", "deviation", "scaled_deviation", "residual",
              "iterations", "status"]
    write_csv(args.out, header, rows, _resolved(args))
    ref = [r for r in rows if r["eta"] == 0 and r["zeta"] == 0 and r["status"] == "ok"]
    summary = {"c_conj": c_conj(args.gamma, args.theta, c), "theta0": c.theta0,
               "failed": sum(r["status"] != "ok" for r in rows), "config": _resolved(args)}
    if len(ref) >= 2:
        a, b = fit_two_term([r["h"] for r in ref], [r["h_lambda"] for r in ref])
        summary.update(fit_a=a, fit_b=b)
    emit_summary(summary, args.json)
    return EXIT_OK if summary["failed"] == 0 else EXIT_FAIL


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _common(p):
    p.add_argument("--out", default=None, help="output path (required; may come from --config)")
    p.add_argument("--json", action="store_true", help="JSON summary on standard output")
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--workers", type=_positive_int, default=1, help="bounded worker pool size")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="magspec", description="Spectral asymptotics toolkit for magnetic Neumann problems.")
    subs = ap.add_subparsers(dest="command", parser_class=_Parser)

    p = subs.add_parser("constants", help="de Gennes and quartic-model constants (JSON)")
    p.add_argument("--grid-n", type=_positive_int, default=4000)
    p.add_argument("--degennes-L", type=_number, default=20.0)
    p.add_argument("--montgomery-L", type=_number, default=10.0)
    p.add_argument("--no-extrapolate", action="store_true")
    p.set_defaults(func=run_constants)

    p = subs.add_parser("band", help="band function table; columns param,mu,status")
    p.add_argument("--model", choices=["degennes", "montgomery"], default="degennes")
    p.add_argument("--param-min", type=_number, default=0.2)
    p.add_argument("--param-max", type=_number, default=1.6)
    p.add_argument("--points", type=_positive_int, default=29)
    p.add_argument("--grid-n", type=_positive_int, default=4000)
    p.set_defaults(func=run_band)

    p = subs.add_parser("sigma", help="half-space bottom; columns nu,sigma,lower_bound,edge_mass,method,status")
    p.add_argument("--nu", type=_num_list, default=_num_list("0.1,0.2,0.5,1.0,1.3,1.5,pi/2"),
                   help="comma-separated angles; 'pi/2' accepted")
    p.add_argument("--L1", type=_number, default=15.0)
    p.add_argument("--L2", type=_number, default=40.0)
    p.add_argument("--n1", type=_positive_int, default=150)
    p.add_argument("--n2", type=_positive_int, default=401)
    p.add_argument("--tol", type=_number, default=1e-3)
    p.add_argument("--no-extrapolate", action="store_true")
    p.set_defaults(func=run_sigma)

    p = subs.add_parser("helical", help="helical-ball Gamma table; columns x3,branch,kappa_nB,b_dot_t,kappa_g,gamma_tilde,status")
    p.add_argument("--tau", type=_number, default=1.0)
    p.add_argument("--samples", type=_positive_int, default=200, help="rows per chart")
    p.add_argument("--variant", choices=["linear", "squared"], default="linear")
    p.set_defaults(func=run_helical)

    p = subs.add_parser("asympt", help="two-term eigenvalue table; columns h,leading,two_term,status")
    p.add_argument("--tau", type=_number, default=1.0)
    p.add_argument("--variant", choices=["linear", "squared"], default="linear")
    p.add_argument("--h", type=_num_list, default=_num_list("1e-1,1e-2,1e-3,1e-4"))
    p.set_defaults(func=run_asympt)

    p = subs.add_parser("quasimode", help="trial-state energies; columns h,norm2,energy,ratio,target,moment_r2,moment_t2,dt_energy,dr_energy,status")
    p.add_argument("--tau", type=_number, default=1.0, help="helical pitch selecting the Gamma point")
    p.add_argument("--variant", choices=["linear", "squared"], default="linear")
    p.add_argument("--theta", type=_number, default=None)
    p.add_argument("--kappa", type=_number, default=None)
    p.add_argument("--gamma", type=_number, default=None)
    p.add_argument("--h", type=_num_list, default=_num_list("1e-4,1e-5,1e-6,1e-7,1e-8,1e-9,1e-10"))
    p.add_argument("--delta", type=_number, default=0.3)
    p.add_argument("--C0", type=_number, default=20.0)
    p.add_argument("--dr", type=_number, default=0.01)
    p.set_defaults(func=run_quasimode)

    p = subs.add_parser("model3d", help="model-operator sweep; columns h,eta,zeta,h_lambda,deviation,scaled_deviation,residual,iterations,status")
    p.add_argument("--gamma", type=_number, default=1.0)
    p.add_argument("--theta", type=_number, default=0.3)
    p.add_argument("--h", type=_num_list, default=_num_list("1e-1,5e-2,2e-2,1e-2"))
    p.add_argument("--eta", type=_num_list, default=_num_list("0"))
    p.add_argument("--zeta", type=_num_list, default=_num_list("0"))
    p.add_argument("--R", type=_number, default=10.0)
    p.add_argument("--T", type=_number, default=10.0)
    p.add_argument("--nr", type=_positive_int, default=95)
    p.add_argument("--nt", type=_positive_int, default=63)
    p.add_argument("--tol", type=_number, default=1e-3)
    p.set_defaults(func=run_model3d)

    for sp in subs.choices.values():
        _common(sp)
    return ap


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    ap = build_parser()
    try:
        pre = argparse.ArgumentParser(add_help=False)
        pre.add_argument("--config")
        known, _ = pre.parse_known_args(argv)
        if known.config and argv and argv[0] in ap._subparsers._group_actions[0].choices:
            sub = ap._subparsers._group_actions[0].choices[argv[0]]
            _apply_file_defaults(sub, read_config_file(known.config))
        args = ap.parse_args(argv)
        if args.command is None:
            ap.print_usage(sys.stderr)
            raise UsageError("a subcommand is required")
        if not args.out:
            raise UsageError("--out is required")
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"magspec: usage error: {exc}\n")
        return EXIT_USAGE
    except SystemExit as exc:         # --help
        return int(exc.code or 0)
    except Exception as exc:
        sys.stderr.write(f"magspec: computation failed: {type(exc).__name__}: {exc}\n")
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())

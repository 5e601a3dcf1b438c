"""Command-line front end.

Subcommands: ``analyze`` (JSON), ``lyapunov`` (JSON), ``density`` (CSV),
``sweep`` (CSV plus a JSON sidecar of sign changes) and ``simulate`` (CSV).

Settings come from built-in defaults, then an optional ``--config`` file,
then flags. A config file holds ``key=value`` lines; the ``# config:`` lines
echoed at the top of every CSV output, or the ``"config"`` object of a JSON
output, are accepted as well, so any output can be replayed.

Default settings (keys as used in config files):

=============  ==========================  ==============================
key            default                     used by
=============  ==========================  ==============================
c1 c2 k1 k2    0.2 2 0.2 0.4               all
alpha beta     2 2                         all (noise b = alpha I + beta J)
b              none                        all (b11,b12,b21,b22; overrides alpha/beta)
A              none                        analyze, density, lyapunov (raw linear system)
wiring         shared                      density, lyapunov, analyze
seed           1                           density, lyapunov, sweep, simulate
n_grid         2048                        density, lyapunov, sweep
N              2000                        density, lyapunov, sweep
n_paths        200                         lyapunov, sweep
T              200 (simulate: 50)          lyapunov, sweep, simulate
h              0.001                       lyapunov, sweep, simulate
mc_samples     1000000                     density (0 disables the MC column)
mc_bins        64                          density
methods        quadrature,discrete,        lyapunov
               monte_carlo
vary           alpha                       sweep
lo hi          -3 3                        sweep
n_points       61                          sweep
sweep_method   quadrature                  sweep
scheme         paper_taylor2               simulate
x_init         1.05 * x0                   simulate
ode_reference  false                       simulate
printed        false                       simulate
record_every   1                           simulate
=============  ==========================  ==============================

Exit codes: 0 success, 2 invalid parameters or usage, 3 numerical failure.
Worker threads: ``--workers`` or the COURNOT_SDE_THREADS environment
variable; results do not depend on it.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from . import __version__
from .core_model import (
    EPS_STATE,
    GameParams,
    LinearSystem,
    NoiseWiring,
    characteristic_roots,
    gamma_offsets,
    linearize,
    rotation_scale_matrix,
    stationary_state,
)
from .errors import CournotSdeError, InvalidParams
from .lyapunov import (
    BRACKET_WIDTH,
    LyapunovMethod,
    lambda_for,
    lambda_monte_carlo,
    lambda_sweep,
)
from .meansquare import EPS_DIV, LOG10_T_RANGE, N_T_GRID, mean_square_report
from .phase_density import (
    EPS_Q4,
    RESIDUAL_TOL,
    density_backward_difference,
    density_closed_form,
    fpe_residual_profile,
    mc_angle_histogram,
    sample_density,
)
from .sde_sim import Scheme, WienerSpec, simulate

AGREE_ABS = 1e-2
AGREE_SE = 3.0
SWEEP_MIN_OK = 0.9
X_INIT_FACTOR = 1.05


# --- value parsing and formatting ------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _parse_float(s) -> float:
    try:
        return float(s)
    except (TypeError, ValueError):
        raise InvalidParams(f"expected a number, got {s!r}") from None


def _parse_int(s) -> int:
    if isinstance(s, int) and not isinstance(s, bool):
        return s
    try:
        v = float(s)
    except (TypeError, ValueError):
        raise InvalidParams(f"expected an integer, got {s!r}") from None
    if not v.is_integer():
        raise InvalidParams(f"expected an integer, got {s!r}")
    return int(v)


def _parse_bool(s) -> bool:
    if isinstance(s, bool):
        return s
    t = str(s).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise InvalidParams(f"expected true/false, got {s!r}")


def _vec_parser(n: int) -> Callable:
    def parse(s):
        if s is None or (isinstance(s, str) and s.strip().lower() in ("", "none")):
            return None
        parts = s if isinstance(s, (list, tuple)) else str(s).replace(";", ",").split(",")
        flat = list(np.asarray(parts, dtype=object).ravel())
        if len(flat) != n:
            raise InvalidParams(f"expected {n} comma-separated numbers, got {s!r}")
        return tuple(_parse_float(v) for v in flat)
    return parse


def _str_parser(choices=None) -> Callable:
    def parse(s):
        t = str(s).strip()
        if choices is not None and t not in choices:
            raise InvalidParams(f"expected one of {sorted(choices)}, got {t!r}")
        return t
    return parse


def _methods(s):
    items = s if isinstance(s, (list, tuple)) else str(s).split(",")
    out = []
    for item in items:
        name = {"mc": "monte_carlo"}.get(str(item).strip(), str(item).strip())
        try:
            out.append(LyapunovMethod(name).value)
        except ValueError:
            raise InvalidParams(f"unknown Lyapunov method {item!r}") from None
    if not out:
        raise InvalidParams("no Lyapunov method requested")
    return tuple(out)


def _format_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return _fmt(v)
    if isinstance(v, tuple):
        return ",".join(_fmt(x) if isinstance(x, float) else str(x) for x in v)
    return str(v)


_METHOD_NAMES = tuple(m.value for m in LyapunovMethod)

# key -> (parser, default, help)
SETTINGS: dict[str, tuple[Callable, Any, str]] = {
    "c1": (_parse_float, 0.2, "marginal cost of firm 1"),
    "c2": (_parse_float, 2.0, "marginal cost of firm 2"),
    "k1": (_parse_float, 0.2, "adjustment speed of firm 1"),
    "k2": (_parse_float, 0.4, "adjustment speed of firm 2"),
    "alpha": (_parse_float, 2.0, "noise scale: b = alpha I + beta J"),
    "beta": (_parse_float, 2.0, "noise rotation: b = alpha I + beta J"),
    "b": (_vec_parser(4), None, "full noise matrix b11,b12,b21,b22 (overrides alpha, beta)"),
    "A": (_vec_parser(4), None, "raw drift matrix a11,a12,a21,a22 of a linear system"),
    "wiring": (_str_parser({w.value for w in NoiseWiring}), "shared", "shared or independent"),
    "seed": (_parse_int, 1, "base seed"),
    "n_grid": (_parse_int, 2048, "closed-form density grid intervals"),
    "N": (_parse_int, 2000, "backward-difference steps on [0, pi]"),
    "n_paths": (_parse_int, 200, "Monte-Carlo paths"),
    "T": (_parse_float, 200.0, "time horizon"),
    "h": (_parse_float, 1e-3, "time step"),
    "mc_samples": (_parse_int, 10**6, "angle samples for the MC histogram (0 disables)"),
    "mc_bins": (_parse_int, 64, "MC histogram bins"),
    "methods": (_methods, _METHOD_NAMES, "comma-separated Lyapunov methods"),
    "vary": (_str_parser({"alpha", "beta"}), "alpha", "swept parameter"),
    "lo": (_parse_float, -3.0, "sweep start"),
    "hi": (_parse_float, 3.0, "sweep end"),
    "n_points": (_parse_int, 61, "sweep points"),
    "sweep_method": (_str_parser(set(_METHOD_NAMES)), "quadrature", "estimator used by the sweep"),
    "scheme": (_str_parser({s.value for s in Scheme}), "paper_taylor2", "integrator"),
    "x_init": (_vec_parser(2), None, "initial state x1,x2 (default 1.05 x0)"),
    "ode_reference": (_parse_bool, False, "also emit the b = 0 path"),
    "printed": (_parse_bool, False, "first-order bracket variant of the Taylor scheme"),
    "record_every": (_parse_int, 1, "write every n-th step"),
}

_GAME = ("c1", "c2", "k1", "k2", "alpha", "beta", "b")
COMMAND_KEYS = {
    "analyze": _GAME + ("A", "wiring"),
    "density": _GAME + ("A", "wiring", "seed", "n_grid", "N", "mc_samples", "mc_bins"),
    "lyapunov": _GAME + ("A", "wiring", "seed", "n_grid", "N", "n_paths", "T", "h", "methods"),
    "sweep": _GAME + ("seed", "n_grid", "N", "n_paths", "T", "h", "vary", "lo", "hi",
                      "n_points", "sweep_method"),
    "simulate": _GAME + ("seed", "T", "h", "scheme", "x_init", "ode_reference", "printed",
                         "record_every"),
}
COMMAND_DEFAULTS = {"simulate": {"T": 50.0}}


def read_config_file(path) -> dict:
    """Raw key -> value pairs from a key=value file or a JSON output's config object."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InvalidParams(f"cannot read config file {path}: {exc}") from None
    if text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidParams(f"config file {path} is not valid JSON: {exc}") from None
        doc = doc.get("config", doc)
        if not isinstance(doc, dict):
            raise InvalidParams("JSON config must be an object")
        return dict(doc)
    raw = {}
    # a previous CSV output: only its echoed config lines matter
    replay = text.startswith("# cournot-sde")
    for n, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if line.startswith("# config:"):
            line = line[len("# config:"):].strip()
        elif replay or not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InvalidParams(f"{path}:{n}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        raw[key.strip()] = value.strip()
    return raw


def resolve_config(command: str, file_values: dict, flag_values: dict) -> dict:
    keys = COMMAND_KEYS[command]
    merged = {}
    for source in (file_values, flag_values):
        for key, value in source.items():
            if key not in SETTINGS:
                raise InvalidParams(f"unknown setting {key!r}")
            if key in keys:
                merged[key] = value
    defaults = dict(COMMAND_DEFAULTS.get(command, {}))
    config = {}
    for key in keys:
        parser, default, _ = SETTINGS[key]
        if key in merged:
            try:
                config[key] = parser(merged[key])
            except InvalidParams as exc:
                raise InvalidParams(f"{key}: {exc}") from None
        else:
            config[key] = defaults.get(key, default)
    return config


# --- model construction ----------------------------------------------------

def _noise(cfg) -> np.ndarray:
    if cfg.get("b") is not None:
        return np.array(cfg["b"], dtype=float).reshape(2, 2)
    return rotation_scale_matrix(cfg["alpha"], cfg["beta"])


def _game(cfg) -> GameParams:
    return GameParams(cfg["c1"], cfg["c2"], cfg["k1"], cfg["k2"], _noise(cfg))


def _system(cfg) -> LinearSystem:
    wiring = cfg.get("wiring", "shared")
    if cfg.get("A") is not None:
        return LinearSystem(np.array(cfg["A"]).reshape(2, 2), _noise(cfg), wiring)
    lin = linearize(_game(cfg))
    return LinearSystem(lin.a, lin.b, wiring, lin.game, lin.metadata)


# --- output ----------------------------------------------------------------

def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, complex):
        return [_clean(obj.real), _clean(obj.imag)]
    return obj


def _config_json(cfg) -> dict:
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in cfg.items()}


def _json_doc(command, cfg, tolerances, body) -> str:
    doc = {"command": command, "version": __version__, "config": _config_json(cfg),
           "tolerances": tolerances}
    doc.update(body)
    return json.dumps(_clean(doc), indent=2, allow_nan=False) + "\n"


def _csv_doc(command, cfg, comments, header, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# cournot-sde {command} {__version__}\n")
    for key, value in cfg.items():
        buf.write(f"# config: {key}={_format_value(value)}\n")
    for line in comments:
        buf.write(f"# {line}\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(v if isinstance(v, str) else _fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _emit(text: str, output: Optional[str]):
    if output in (None, "-"):
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(output, "w", newline="\n") as fh:
            fh.write(text)


# --- commands --------------------------------------------------------------

def cmd_analyze(cfg, args) -> int:
    sys_ = _system(cfg)
    roots = characteristic_roots(sys_)
    body: dict[str, Any] = {}
    game = sys_.game
    if game is not None:
        x0 = stationary_state(game)
        body["stationary_state"] = [x0.x10, x0.x20]
        body["gamma"] = gamma_offsets(game)
        body["fd_jacobian_max_abs_dev"] = sys_.metadata.get("fd_jacobian_max_abs_dev")
    else:
        body["stationary_state"] = None
        body["gamma"] = None
    body["A"] = sys_.a
    body["B"] = sys_.b
    body["noise_wiring"] = sys_.noise_wiring.value
    body["eigenvalues"] = [[r.real, r.imag] for r in (roots.mu1, roots.mu2)]
    body["half_trace"] = roots.half_trace
    body["discriminant"] = roots.discriminant
    body["mean_square"] = mean_square_report(sys_).as_dict()
    body["verdict"] = body["mean_square"]["verdict"]
    tolerances = {"eps_state": EPS_STATE, "fd_jacobian_abs": 1e-6, "eps_division": EPS_DIV,
                  "certificate_log10_t_range": list(LOG10_T_RANGE),
                  "certificate_grid_points": N_T_GRID}
    _emit(_json_doc("analyze", cfg, tolerances, body), args.output)
    return 0


def cmd_density(cfg, args) -> int:
    sys_ = _system(cfg)
    closed = density_closed_form(sys_, cfg["n_grid"])
    discrete = density_backward_difference(sys_, cfg["N"])
    grid = closed.grid
    p_disc = sample_density(discrete, grid)
    if cfg["mc_samples"] > 0:
        mc = mc_angle_histogram(sys_, cfg["seed"], cfg["mc_samples"], n_bins=cfg["mc_bins"],
                                workers=args.workers)
        p_mc = sample_density(mc, grid)
        mc_gap = float(np.max(np.abs(mc.values - sample_density(closed, mc.grid))))
    else:
        p_mc = np.full_like(grid, math.nan)
        mc_gap = math.nan
    resid = fpe_residual_profile(sys_, closed)
    disc_gap = float(np.max(np.abs(discrete.values - sample_density(closed, discrete.grid))))
    comments = [
        f"closed_form: variant={closed.metadata.get('variant')} "
        f"fpe_residual={_fmt(closed.fpe_residual)} "
        f"normalization_error={_fmt(closed.normalization_error)}",
        f"discrete: fpe_residual={_fmt(discrete.fpe_residual)} "
        f"periodicity_fallback={str(discrete.metadata['periodicity_fallback']).lower()}",
        f"sup_gap closed_vs_discrete={_fmt(disc_gap)} closed_vs_mc={_fmt(mc_gap)}",
        f"tolerances: closed_vs_discrete=0.001 closed_vs_mc=0.05 "
        f"fpe_residual={_fmt(RESIDUAL_TOL)} eps_q4={_fmt(EPS_Q4)}",
    ]
    header = ["theta", "p_closed", "p_discrete", "p_mc", "fpe_residual"]
    rows = zip(grid, closed.values, p_disc, p_mc, resid)
    if args.format == "json":
        body = {"columns": header, "rows": [list(r) for r in zip(grid, closed.values, p_disc,
                                                                  p_mc, resid)],
                "summary": comments}
        tol = {"closed_vs_discrete": 1e-3, "closed_vs_mc": 0.05, "fpe_residual": RESIDUAL_TOL}
        _emit(_json_doc("density", cfg, tol, body), args.output)
    else:
        _emit(_csv_doc("density", cfg, comments, header, rows), args.output)
    return 0


def _agree(a, b) -> bool:
    tol = max(AGREE_ABS, AGREE_SE * math.hypot(a.std_error, b.std_error))
    return abs(a.value - b.value) <= tol


def cmd_lyapunov(cfg, args) -> int:
    sys_ = _system(cfg)
    settings = {"n_grid": cfg["n_grid"], "N": cfg["N"], "seed": cfg["seed"],
                "n_paths": cfg["n_paths"], "horizon_T": cfg["T"], "step_h": cfg["h"]}
    estimates = {}
    for name in cfg["methods"]:
        method = LyapunovMethod(name)
        if method is LyapunovMethod.MONTE_CARLO:
            est = lambda_monte_carlo(sys_, cfg["seed"], cfg["n_paths"], cfg["T"], cfg["h"],
                                     workers=args.workers)
        else:
            est = lambda_for(sys_, method, settings)
        estimates[name] = est
    names = list(estimates)
    agreement = {f"{p}~{q}": _agree(estimates[p], estimates[q])
                 for i, p in enumerate(names) for q in names[i + 1:]}
    body = {"estimates": {k: v.as_dict() for k, v in estimates.items()},
            "agreement": agreement, "all_agree": all(agreement.values())}
    tol = {"agreement_abs": AGREE_ABS, "agreement_std_errors": AGREE_SE,
           "fpe_residual": RESIDUAL_TOL}
    _emit(_json_doc("lyapunov", cfg, tol, body), args.output)
    return 0


def cmd_sweep(cfg, args) -> int:
    game = _game(cfg)
    settings = {"n_grid": cfg["n_grid"], "N": cfg["N"], "seed": cfg["seed"],
                "n_paths": cfg["n_paths"], "horizon_T": cfg["T"], "step_h": cfg["h"]}
    res = lambda_sweep(game, cfg["vary"], (cfg["lo"], cfg["hi"]), cfg["n_points"],
                       cfg["sweep_method"], settings, workers=args.workers)
    flagged = {id(res.rows[i]) for i in range(len(res.rows) - 1)
               for br in res.brackets if res.rows[i].param <= br.lo and br.hi <= res.rows[i + 1].param}
    header = ["param", "lambda", "std_error", "status", "sign_change_after"]
    rows = [(r.param, r.value, r.std_error, r.status, "1" if id(r) in flagged else "0")
            for r in res.rows]
    comments = [f"vary={res.vary} " + " ".join(f"{k}={_fmt(v)}" for k, v in res.fixed.items()),
                f"tolerances: bracket_width={_fmt(BRACKET_WIDTH)} min_ok_fraction={SWEEP_MIN_OK}",
                f"points_ok={res.n_ok} of {len(res.rows)}"]
    for br in res.brackets:
        comments.append(f"bracket: lo={_fmt(br.lo)} hi={_fmt(br.hi)} midpoint={_fmt(br.midpoint)}")
    side = {"vary": res.vary, "fixed": res.fixed, "n_points": len(res.rows), "n_ok": res.n_ok,
            "brackets": [{"lo": b.lo, "hi": b.hi, "midpoint": b.midpoint,
                          "value_lo": b.value_lo, "value_hi": b.value_hi} for b in res.brackets]}
    tol = {"bracket_width": BRACKET_WIDTH, "min_ok_fraction": SWEEP_MIN_OK}
    if args.format == "json":
        body = dict(side, columns=header, rows=[list(r) for r in rows])
        _emit(_json_doc("sweep", cfg, tol, body), args.output)
    else:
        _emit(_csv_doc("sweep", cfg, comments, header, rows), args.output)
        if args.output not in (None, "-"):
            Path(str(args.output) + ".brackets.json").write_text(
                _json_doc("sweep", cfg, tol, side))
    ok = res.n_ok >= SWEEP_MIN_OK * len(res.rows)
    if not ok:
        print(f"error: only {res.n_ok} of {len(res.rows)} sweep points succeeded", file=sys.stderr)
    return 0 if ok else 3


def cmd_simulate(cfg, args) -> int:
    game = _game(cfg)
    x0 = stationary_state(game).as_array()
    x_init = np.array(cfg["x_init"]) if cfg["x_init"] is not None else X_INIT_FACTOR * x0
    n_steps = int(round(cfg["T"] / cfg["h"]))
    if cfg["record_every"] < 1:
        raise InvalidParams("record_every must be >= 1")
    spec = WienerSpec(cfg["seed"], cfg["h"], n_steps)
    path = simulate(cfg["scheme"], game, x_init, spec, printed=cfg["printed"])
    ode = None
    if cfg["ode_reference"]:
        ode = simulate(cfg["scheme"], game.with_noise(np.zeros((2, 2))), x_init, spec,
                       printed=cfg["printed"])
    header = ["n", "t", "x1", "x2"] + (["x1_ode", "x2_ode"] if ode is not None else []) + ["flag"]
    every = cfg["record_every"]
    n_rows = len(path.times) if ode is None else max(len(path.times), len(ode.times))
    rows = []
    for n in list(range(0, n_rows, every)) + ([n_rows - 1] if (n_rows - 1) % every else []):
        t = n * cfg["h"]
        sde = path.states[n] if n < len(path.states) else (math.nan, math.nan)
        row = [str(n), t, sde[0], sde[1]]
        if ode is not None:
            o = ode.states[n] if n < len(ode.states) else (math.nan, math.nan)
            row += [o[0], o[1]]
        rows.append(row + [""])
    comments = [f"x0={_fmt(x0[0])},{_fmt(x0[1])}",
                f"x_init={_fmt(x_init[0])},{_fmt(x_init[1])}"]
    for label, p in (("sde", path), ("ode", ode)):
        if p is None or p.truncation is None:
            continue
        tr = p.truncation
        comments.append(f"truncated: path={label} step={tr.step + 1} reason={tr.reason}")
        cols = {label: list(tr.offending_state)}
        bad = [str(tr.step + 1), tr.time] + cols.get("sde", [math.nan, math.nan])
        if ode is not None:
            bad += cols.get("ode", [math.nan, math.nan])
        rows.append(bad + [f"truncated_{label}:{tr.reason}"])
    if args.format == "json":
        body = {"columns": header, "rows": rows, "summary": comments}
        _emit(_json_doc("simulate", cfg, {"eps_state": EPS_STATE}, body), args.output)
    else:
        _emit(_csv_doc("simulate", cfg, comments, header, rows), args.output)
    return 0


COMMANDS = {
    "analyze": (cmd_analyze, "stationary state, linearization and mean-square report (JSON)",
                ("json",)),
    "density": (cmd_density, "stationary angle density by three methods (CSV)", ("csv", "json")),
    "lyapunov": (cmd_lyapunov, "top Lyapunov exponent by several methods (JSON)", ("json",)),
    "sweep": (cmd_sweep, "lambda over a range of alpha or beta (CSV + JSON sidecar)",
              ("csv", "json")),
    "simulate": (cmd_simulate, "simulate the nonlinear game SDE (CSV)", ("csv", "json")),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cournot-sde",
        description="Stochastic stability analysis of a Cournot duopoly SDE.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text, formats) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_text, description=help_text)
        sp.add_argument("--config", help="key=value file, or a previous output to replay")
        sp.add_argument("-o", "--output", help="output file (default: stdout)")
        sp.add_argument("--format", choices=formats, default=formats[0])
        sp.add_argument("--workers", type=int, help="worker threads (default: COURNOT_SDE_THREADS or all cores)")
        for key in COMMAND_KEYS[name]:
            _, default, help_key = SETTINGS[key]
            flag = "--" + key.replace("_", "-")
            sp.add_argument(flag, dest=key, default=argparse.SUPPRESS, metavar="VALUE",
                            help=f"{help_key} (default: {_format_value(default)})")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    func = COMMANDS[args.command][0]
    try:
        file_values = read_config_file(args.config) if args.config else {}
        flags = {k: v for k, v in vars(args).items() if k in SETTINGS}
        cfg = resolve_config(args.command, file_values, flags)
        if args.workers is not None and args.workers < 1:
            raise InvalidParams("--workers must be >= 1")
        return func(cfg, args)
    except CournotSdeError as exc:
        kind = "invalid parameters" if isinstance(exc, InvalidParams) else "numerical failure"
        print(f"error ({kind}, {type(exc).__name__}): {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, ArithmeticError) as exc:
        # anything that slipped past validation is still reported with the contract codes
        code = 3 if isinstance(exc, ArithmeticError) else 2
        print(f"error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

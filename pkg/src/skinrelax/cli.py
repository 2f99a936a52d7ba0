"""Command-line entry point ``skinrelax``.

Every subcommand accepts either flags or ``--config run.json``; explicit
flags override the file. Each run writes its fully resolved configuration
to ``<out>/run_config.json`` (frequencies in the lossless ``rad`` form), and
``--config`` on that file reproduces the run.

Exit codes: 0 success, 1 domain error (JSON record on stderr), 2 usage error.
"""

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import dynamics, elimination, liouvillian, relaxation, sweep
from .errors import GapUndefinedError, SkinRelaxError
from .model import ModelParams, build_model
from .units import format_frequency, parse_frequency

SCHEMA_VERSION = 1
SUBCOMMANDS = ("spectrum", "steady", "evolve", "relax", "sweep", "effective", "validate")


class UsageError(Exception):
    pass


# config schema ---------------------------------------------------------------
# kinds: int, float, freq, bool, str, ints, floats, strs, opt_* (None allowed)

MODEL_KEYS = {
    "n_sites": "int",
    "energy_base": "freq",
    "energy_gradient": "bool",
    "hop_left_base": "freq",
    "hop_right_base": "opt_freq",
    "ratio_sqrt": "opt_float",
    "hop_gradient": "bool",
}
MODEL_DEFAULTS = {
    "energy_base": 0.0, "energy_gradient": False, "hop_left_base": 1.0,
    "hop_right_base": None, "ratio_sqrt": None, "hop_gradient": False,
}

LASER_KEYS = {"Omega": "freq", "eta": "float", "delta": "freq", "phi": "float"}
PHYSICAL_KEYS = {
    "omega0": "freq", "nu": "freq", "n_sidebands": "int", "gamma": "freq",
    "red": LASER_KEYS, "blue": LASER_KEYS,
}
PHYSICAL_DEFAULTS = {"omega0": 0.0}
LASER_DEFAULTS = {"delta": 0.0, "phi": 0.0, "Omega": 0.0}

SWEEP_KEYS = {
    "sizes": "ints", "ratios": "floats", "ratio_kind": "str", "gradients": "strs",
    "energy_base": "freq", "hop_left_base": "freq", "observables": "strs",
    "crossing_policy": "str", "reading": "str",
}

OPTION_KEYS = {
    "spectrum": {"method": "str", "max_sites": "int", "modes": "int"},
    "steady": {"window": "opt_ints"},
    "evolve": {"route": "str", "t_final": "opt_float", "n_times": "int",
               "log_times": "bool", "init_site": "opt_int", "tol": "float"},
    "relax": {"policy": "str", "reading": "str", "route": "str"},
    "sweep": {"workers": "int"},
    "effective": {},
    "validate": {"t_final": "opt_float", "tol": "float", "initial_sideband": "opt_int",
                 "leak_limit": "opt_float", "n_times": "int", "series": "bool"},
}
OPTION_DEFAULTS = {
    "spectrum": {"method": "sector", "max_sites": liouvillian.DEFAULT_MAX_SITES, "modes": 0},
    "steady": {"window": None},
    "evolve": {"route": "populations", "t_final": None, "n_times": 201, "log_times": False,
               "init_site": None, "tol": 1e-10},
    "relax": {"policy": "last", "reading": "absolute", "route": "eigen"},
    "sweep": {"workers": 1},
    "effective": {},
    "validate": {"t_final": None, "tol": 0.05, "initial_sideband": None,
                 "leak_limit": None, "n_times": 401, "series": False},
}

BLOCK_OF = {
    "spectrum": "model", "steady": "model", "evolve": "model", "relax": "model",
    "sweep": "sweep", "effective": "physical", "validate": "physical",
}


def _coerce(kind, value, where):
    try:
        if kind.startswith("opt_"):
            return None if value is None else _coerce(kind[4:], value, where)
        if kind == "freq":
            return parse_frequency(value)
        if kind == "int":
            if isinstance(value, bool) or int(value) != value:
                raise ValueError
            return int(value)
        if kind == "float":
            if isinstance(value, bool):
                raise ValueError
            return float(value)
        if kind == "bool":
            if not isinstance(value, bool):
                raise ValueError
            return value
        if kind == "str":
            if not isinstance(value, str):
                raise ValueError
            return value
        if kind in ("ints", "floats", "strs"):
            if not isinstance(value, (list, tuple)):
                raise ValueError
            return [_coerce(kind[:-1], v, where) for v in value]
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad value {value!r} for {where}: {exc}") from None
    raise AssertionError(kind)


def _coerce_block(schema, block, where):
    if not isinstance(block, dict):
        raise UsageError(f"{where} must be an object")
    unknown = set(block) - set(schema)
    if unknown:
        raise UsageError(f"unknown keys in {where}: {sorted(unknown)}")
    out = {}
    for key, value in block.items():
        kind = schema[key]
        if isinstance(kind, dict):
            out[key] = _coerce_block(kind, value, f"{where}.{key}")
        else:
            out[key] = _coerce(kind, value, f"{where}.{key}")
    return out


def _serialize(schema, block):
    out = {}
    for key, value in block.items():
        kind = schema[key]
        if isinstance(kind, dict):
            out[key] = _serialize(kind, value)
        elif kind.endswith("freq") and value is not None:
            out[key] = format_frequency(value)
        else:
            out[key] = value
    return out


def load_config(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError("config must be a JSON object")
    return data


def resolve(command, file_cfg, flag_block, flag_options, flag_out):
    """Merge defaults, config file and flags into a typed configuration."""
    allowed = {"schema_version", "subcommand", "output_dir", BLOCK_OF[command], "options"}
    unknown = set(file_cfg) - allowed
    if unknown:
        raise UsageError(f"unknown top-level keys for {command}: {sorted(unknown)}")
    if file_cfg.get("subcommand", command) != command:
        raise UsageError(
            f"config is for {file_cfg['subcommand']!r}, not {command!r}")
    block_name = BLOCK_OF[command]
    schema = {"model": MODEL_KEYS, "physical": PHYSICAL_KEYS, "sweep": SWEEP_KEYS}[block_name]
    block = _coerce_block(schema, file_cfg.get(block_name, {}), block_name)
    for key, value in flag_block.items():
        if isinstance(value, dict):
            block.setdefault(key, {}).update(value)
        else:
            block[key] = value
    options = dict(OPTION_DEFAULTS[command])
    options.update(_coerce_block(OPTION_KEYS[command], file_cfg.get("options", {}), "options"))
    options.update(flag_options)

    if block_name == "model":
        full = dict(MODEL_DEFAULTS)
        full.update(block)
        if "n_sites" not in full:
            raise UsageError("the number of sites is required (--n)")
        if full["ratio_sqrt"] is not None:
            if full["hop_right_base"] is not None:
                raise UsageError("give either the right hop rate or ratio_sqrt, not both")
            full["hop_right_base"] = full["ratio_sqrt"] ** 2 * full["hop_left_base"]
        full["ratio_sqrt"] = None
        if full["hop_right_base"] is None:
            full["hop_right_base"] = 0.0
        block = full
    elif block_name == "physical":
        full = dict(PHYSICAL_DEFAULTS)
        full.update(block)
        for side in ("red", "blue"):
            laser = dict(LASER_DEFAULTS)
            laser.update(full.get(side, {}))
            if "eta" not in laser:
                laser["eta"] = 0.0
            full[side] = laser
        missing = {"nu", "gamma", "n_sidebands"} - set(full)
        if missing:
            raise UsageError(f"missing physical parameters: {sorted(missing)}")
        block = full
    else:
        if "sizes" not in block:
            raise UsageError("sweep needs sizes (--sizes)")
    out = flag_out or file_cfg.get("output_dir") or "."
    return {
        "schema_version": SCHEMA_VERSION,
        "subcommand": command,
        "output_dir": str(out),
        block_name: block,
        "options": options,
    }


def serialize_config(cfg):
    block_name = BLOCK_OF[cfg["subcommand"]]
    schema = {"model": MODEL_KEYS, "physical": PHYSICAL_KEYS, "sweep": SWEEP_KEYS}[block_name]
    out = dict(cfg)
    out[block_name] = _serialize(schema, cfg[block_name])
    return out


# argument parsing --------------------------------------------------------------


def _freq(text):
    try:
        return parse_frequency(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _csv_list(conv):
    def parse(text):
        try:
            return [conv(x) for x in text.split(",") if x.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return parse


def _add_common(p):
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--out", help="output directory (default: current)")


def _add_model_flags(p):
    g = p.add_argument_group("model")
    g.add_argument("--n", type=int, dest="n_sites", help="number of sites N")
    g.add_argument("--e", type=_freq, dest="energy_base", help="energy base, e.g. 1.0MHz")
    g.add_argument("--jl", type=_freq, dest="hop_left_base", help="left hop base J_L, e.g. 184.3Hz")
    g.add_argument("--jr", type=_freq, dest="hop_right_base", help="right hop base J_R")
    g.add_argument("--ratio-sqrt", type=float, dest="ratio_sqrt",
                   help="sqrt(J_R/J_L); sets J_R from J_L")
    g.add_argument("--grad-e", action="store_const", const=True, dest="energy_gradient",
                   help="energies E_n = n E")
    g.add_argument("--grad-j", action="store_const", const=True, dest="hop_gradient",
                   help="hops grow as n J")


def _add_physical_flags(p):
    g = p.add_argument_group("physical")
    g.add_argument("--omega0", type=_freq, help="internal splitting")
    g.add_argument("--nu", type=_freq, help="trap frequency")
    g.add_argument("--gamma", type=_freq, help="excited-state decay rate")
    g.add_argument("--sidebands", type=int, dest="n_sidebands", help="number of sidebands M")
    for side, tag in (("red", "r"), ("blue", "b")):
        g.add_argument(f"--omega-{tag}", type=_freq, dest=f"{side}.Omega")
        g.add_argument(f"--eta-{tag}", type=float, dest=f"{side}.eta")
        g.add_argument(f"--delta-{tag}", type=_freq, dest=f"{side}.delta")
        g.add_argument(f"--phi-{tag}", type=float, dest=f"{side}.phi")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="skinrelax",
        description="Relaxation of non-reciprocal dissipative chains.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="Liouvillian spectrum to CSV")
    _add_common(p)
    _add_model_flags(p)
    p.add_argument("--method", choices=("sector", "dense"))
    p.add_argument("--max-sites", type=int, dest="max_sites")
    p.add_argument("--modes", type=int, help="also write |rho_k| for the k slowest modes")

    p = sub.add_parser("steady", help="steady state and localization length")
    _add_common(p)
    _add_model_flags(p)
    p.add_argument("--window", type=_csv_list(int), help="fit window lo,hi")

    p = sub.add_parser("evolve", help="population trajectory from a boundary site")
    _add_common(p)
    _add_model_flags(p)
    p.add_argument("--route", choices=("eigen", "integrate", "populations"))
    p.add_argument("--t-final", type=float, dest="t_final", help="seconds (default 10/gap)")
    p.add_argument("--n-times", type=int, dest="n_times")
    p.add_argument("--log-times", action="store_const", const=True, dest="log_times")
    p.add_argument("--init-site", type=int, dest="init_site", help="default: N-1")
    p.add_argument("--tol", type=float)

    p = sub.add_parser("relax", help="relaxation time and gap")
    _add_common(p)
    _add_model_flags(p)
    p.add_argument("--policy", choices=relaxation.POLICIES)
    p.add_argument("--reading", choices=relaxation.READINGS)
    p.add_argument("--route", choices=("eigen", "integrate"))

    p = sub.add_parser("sweep", help="grid over N and hop ratio")
    _add_common(p)
    p.add_argument("--sizes", type=_csv_list(int))
    p.add_argument("--ratios", type=_csv_list(float))
    p.add_argument("--ratio-kind", choices=sweep.RATIO_KINDS, dest="ratio_kind")
    p.add_argument("--grad-e", action="store_const", const=True, dest="grad_e")
    p.add_argument("--grad-j", action="store_const", const=True, dest="grad_j")
    p.add_argument("--e", type=_freq, dest="energy_base")
    p.add_argument("--jl", type=_freq, dest="hop_left_base")
    p.add_argument("--observables", type=_csv_list(str))
    p.add_argument("--policy", choices=relaxation.POLICIES, dest="crossing_policy")
    p.add_argument("--reading", choices=relaxation.READINGS)
    p.add_argument("--workers", type=int)

    p = sub.add_parser("effective", help="effective chain rates from ion parameters")
    _add_common(p)
    _add_physical_flags(p)

    p = sub.add_parser("validate", help="full ion model vs eliminated chain")
    _add_common(p)
    _add_physical_flags(p)
    p.add_argument("--t-final", type=float, dest="t_final", help="seconds (default 5/J_r)")
    p.add_argument("--tol", type=float)
    p.add_argument("--initial-sideband", type=int, dest="initial_sideband")
    p.add_argument("--leak-limit", type=float, dest="leak_limit")
    p.add_argument("--n-times", type=int, dest="n_times")
    p.add_argument("--series", action="store_const", const=True)
    return parser


def _flags(command, ns):
    """Split parsed flags into (block, options), keeping only given ones."""
    given = {k: v for k, v in vars(ns).items()
             if v is not None and k not in ("command", "config", "out")}
    block, options = {}, {}
    opt_keys = OPTION_KEYS[command]
    if command == "sweep":
        grads = []
        if given.pop("grad_j", False):
            grads.append("hops")
        if given.pop("grad_e", False):
            grads.append("energies")
        if grads:
            block["gradients"] = grads
    for key, value in given.items():
        if key in opt_keys:
            options[key] = value
        elif "." in key:
            side, name = key.split(".")
            block.setdefault(side, {})[name] = value
        else:
            block[key] = value
    return block, options


# subcommands -------------------------------------------------------------------


def _model(cfg):
    m = dict(cfg["model"])
    m.pop("ratio_sqrt")
    return build_model(ModelParams(**m))


def _physical(cfg):
    return elimination.PhysicalParams.from_dict(cfg["physical"])


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _num(x):
    """JSON-safe float (infinities become strings)."""
    x = float(x)
    return x if math.isfinite(x) else repr(x)


def cmd_spectrum(cfg, out):
    model = _model(cfg)
    opts = cfg["options"]
    if model.n_sites < 2:
        raise GapUndefinedError("a single site has only the zero eigenvalue; gap undefined")
    spec = liouvillian.full_spectrum(model, method=opts["method"], max_sites=opts["max_sites"])
    gap = liouvillian.liouvillian_gap(spec)
    spec.to_csv(out / "spectrum.csv")
    for k in range(min(opts["modes"], len(spec))):
        liouvillian.write_matrix_csv(liouvillian.eigenmode_density(spec, k),
                                     out / f"mode_{k}.csv")
    _write_json(out / "spectrum.json", {
        "schema_version": SCHEMA_VERSION, "gap": gap, "n_zero": spec.n_zero(),
        "n_eigenvalues": len(spec), "method": spec.method,
    })
    return f"N={model.n_sites}: {len(spec)} eigenvalues, gap={gap:.6g} 1/s"


def cmd_steady(cfg, out):
    model = _model(cfg)
    window = cfg["options"]["window"]
    p = liouvillian.steady_state(model)
    log_p = liouvillian.log_steady_state(model)
    with open(out / "steady.csv", "w") as fh:
        fh.write("site,p,log_p\n")
        for n, (a, b) in enumerate(zip(p, log_p)):
            fh.write(f"{n},{float(a)!r},{float(b)!r}\n")
    fit = relaxation.localization_length(
        p, window=tuple(window) if window else None, hop_ratio=relaxation.hop_ratio_of(model))
    d = {k: (_num(v) if isinstance(v, float) else v) for k, v in fit.to_dict().items()}
    d["schema_version"] = SCHEMA_VERSION
    _write_json(out / "steady.json", d)
    return f"N={model.n_sites}: xi={fit.xi:.6g} sites (analytic {fit.analytic_xi:.6g})"


def cmd_evolve(cfg, out):
    model = _model(cfg)
    o = cfg["options"]
    N = model.n_sites
    site = N - 1 if o["init_site"] is None else o["init_site"]
    if not 0 <= site < N:
        raise UsageError(f"init site {site} outside 0..{N - 1}")
    t_final = o["t_final"]
    if t_final is None:
        gap = liouvillian.model_gap(model)
        if not math.isfinite(gap) or gap <= 0:
            raise UsageError("no relaxation; give --t-final explicitly")
        t_final = 10.0 / gap
    if o["log_times"]:
        t0 = 1e-3 / model.rate_scale
        times = np.concatenate([[0.0], np.geomspace(t0, t_final, o["n_times"] - 1)])
    else:
        times = np.linspace(0.0, t_final, o["n_times"])
    if o["route"] == "populations":
        p0 = np.zeros(N)
        p0[site] = 1.0
        traj = dynamics.trajectory(model, p0, times, route="populations")
    else:
        rho0 = dynamics.basis_state(N, site)
        kw = {"tol": o["tol"]} if o["route"] == "integrate" else {}
        traj = dynamics.trajectory(model, rho0, times, route=o["route"], **kw)
    traj.to_csv(out / "trajectory.csv")
    return f"N={N}: {len(times)} time points to t={t_final:.6g} s via {o['route']}"


def cmd_relax(cfg, out):
    model = _model(cfg)
    o = cfg["options"]
    if o["route"] == "integrate":
        res = relaxation.relaxation_time_integrated(model, policy=o["policy"], reading=o["reading"])
    else:
        res = relaxation.relaxation_time(model, policy=o["policy"], reading=o["reading"])
    d = res.to_dict()
    d["tau_delta"] = res.tau_delta
    d["schema_version"] = SCHEMA_VERSION
    _write_json(out / "relax.json", d)
    return f"N={model.n_sites}: tau={res.tau:.6g} s, gap={res.delta_used:.6g} 1/s, tau*gap={res.tau_delta:.6g}"


def cmd_sweep(cfg, out):
    config = sweep.SweepConfig(output_dir=str(out), **cfg["sweep"])
    records = sweep.run_sweep(config, workers=cfg["options"]["workers"])
    csv_path, json_path = sweep.write_outputs(config, records, out)
    failed = sum(1 for r in records if r.errors)
    return f"{len(records)} grid points ({failed} with failures) -> {csv_path.name}"


def cmd_effective(cfg, out):
    phys = _physical(cfg)
    rates = elimination.effective_rates(phys)
    d = rates.to_dict()
    d["model_params"] = rates.model_params().to_dict()
    d["schema_version"] = SCHEMA_VERSION
    _write_json(out / "effective.json", d)
    return f"J_r={rates.J_r:.6g} 1/s, J_b={rates.J_b:.6g} 1/s"


def cmd_validate(cfg, out):
    phys = _physical(cfg)
    o = cfg["options"]
    rep = elimination.validate_elimination(
        phys, t_final=o["t_final"], tol=o["tol"], initial_sideband=o["initial_sideband"],
        n_times=o["n_times"], leak_limit=o["leak_limit"])
    _write_json(out / "validate.json", rep.to_dict(series=o["series"]))
    verdict = "PASS" if rep.passed else "FAIL"
    return (f"{verdict}: max TV distance {rep.max_tv_distance:.4g} (tol {rep.tol}), "
            f"max excited population {rep.max_excited_population:.3g}")


COMMANDS = {
    "spectrum": cmd_spectrum, "steady": cmd_steady, "evolve": cmd_evolve,
    "relax": cmd_relax, "sweep": cmd_sweep, "effective": cmd_effective,
    "validate": cmd_validate,
}


def _error_json(exc, usage):
    if isinstance(exc, SkinRelaxError):
        rec = exc.to_record()
    else:
        rec = {"error": type(exc).__name__, "message": str(exc)}
    rec["usage"] = usage
    return json.dumps(rec)


def main(argv=None):
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    command = ns.command
    try:
        file_cfg = load_config(ns.config) if ns.config else {}
        block, options = _flags(command, ns)
        cfg = resolve(command, file_cfg, block, options, ns.out)
        out = Path(cfg["output_dir"])
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise UsageError(f"cannot create output directory {out}: {exc}") from None
        _write_json(out / "run_config.json", serialize_config(cfg))
        summary = COMMANDS[command](cfg, out)
    except (UsageError, GapUndefinedError, ValueError) as exc:
        print(_error_json(exc, usage=True), file=sys.stderr)
        return 2
    except (SkinRelaxError, OSError) as exc:
        print(_error_json(exc, usage=False), file=sys.stderr)
        return 1
    print(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())

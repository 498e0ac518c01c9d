"""Command-line front end: ``admissible-flow analyze|gqe|flow|sweep``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from .admissible import (
    AdmissibleData,
    BaseFactor,
    boundary_structure_check,
    build_invariants,
    fano_parameters,
    fano_residual,
    validate,
)
from .errors import (
    AdmissibleFlowError,
    ConfigError,
    HypothesisNotMet,
    MalformedInputError,
    NotKahlerError,
    PositivityLoss,
)
from .flow import (
    FlowConfig,
    InitialSpec,
    decay_fit,
    init_state,
    run,
    velocity_field,
)
from .gqe import build_profile, mt, solve_k0, verify_profile
from .polycalc import isolate_real_roots
from .stability import q_function

log = logging.getLogger("admissible_flow")

__all__ = [
    "RunConfig",
    "parse_config",
    "serialize",
    "cmd_analyze",
    "cmd_gqe",
    "cmd_flow",
    "cmd_sweep",
    "main",
]

TOP_KEYS = {"factors", "d0", "dinf", "grid", "flow", "initial", "sweep", "output"}


@dataclass(frozen=True)
class RunConfig:
    data: AdmissibleData = field(default_factory=AdmissibleData)
    flow: FlowConfig = field(default_factory=FlowConfig)
    initial: InitialSpec = field(default_factory=InitialSpec)
    output_dir: str = None
    output_interval: float = 0.1
    sweep: tuple = None  # x-scales as Fractions


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------
def _rational(value, path):
    if isinstance(value, bool):
        raise ConfigError(path, f"expected a rational, got {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ConfigError(path, f"expected a finite number, got {value!r}")
        return Fraction(str(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise ConfigError(path, f"cannot read {value!r} as a rational") from None
    raise ConfigError(path, f"expected a rational number or 'p/q' string, got {value!r}")


def _int(value, path, minimum):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(path, f"must be >= {minimum}, got {value}")
    return value


def _float(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(path, f"expected a finite number, got {value!r}")
    return value


def _object(value, path, keys):
    if not isinstance(value, dict):
        raise ConfigError(path, f"expected an object, got {type(value).__name__}")
    extra = sorted(set(value) - set(keys))
    if extra:
        raise ConfigError(f"{path}.{extra[0]}" if path else extra[0], "unknown field")
    return value


def parse_config(text: str) -> RunConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON: {exc}") from None
    _object(raw, "", TOP_KEYS)

    factors = raw.get("factors", [])
    if not isinstance(factors, list):
        raise ConfigError("factors", "expected a list")
    facs = []
    for i, f in enumerate(factors):
        p = f"factors[{i}]"
        _object(f, p, {"d", "s", "x"})
        for key in ("d", "s", "x"):
            if key not in f:
                raise ConfigError(f"{p}.{key}", "missing")
        fac = BaseFactor(_int(f["d"], f"{p}.d", 1), _rational(f["s"], f"{p}.s"),
                         _rational(f["x"], f"{p}.x"))
        try:
            validate(AdmissibleData((fac,)))
        except NotKahlerError as exc:
            raise ConfigError(f"{p}.x", str(exc)) from None
        facs.append(fac)
    d0 = _int(raw.get("d0", 0), "d0", 0)
    dinf = _int(raw.get("dinf", 0), "dinf", 0)
    data = AdmissibleData(tuple(facs), d0, dinf)
    try:
        validate(data)
    except (NotKahlerError, MalformedInputError) as exc:
        raise ConfigError("factors", str(exc)) from None

    grid = _object(raw.get("grid", {}), "grid", {"n"})
    n = _int(grid.get("n", 200), "grid.n", 16)
    if n % 2:
        raise ConfigError("grid.n", f"must be even, got {n}")

    fl = _object(raw.get("flow", {}), "flow", {"cfl", "dt_max", "t_end", "tol_conv"})
    defaults = FlowConfig()
    vals = {k: _float(fl.get(k, getattr(defaults, k)), f"flow.{k}")
            for k in ("cfl", "dt_max", "t_end", "tol_conv")}
    if not 0 < vals["cfl"] <= 0.5:
        raise ConfigError("flow.cfl", f"must lie in (0, 0.5], got {vals['cfl']}")
    for k in ("dt_max", "tol_conv"):
        if vals[k] <= 0:
            raise ConfigError(f"flow.{k}", "must be positive")
    if vals["t_end"] < 0:
        raise ConfigError("flow.t_end", "must be non-negative")
    flow = FlowConfig(n=n, **vals)

    ini = _object(raw.get("initial", {}), "initial", {"type", "amplitude", "power"})
    typ = ini.get("type", "perturbed")
    if typ not in ("canonical", "perturbed"):
        raise ConfigError("initial.type", f"expected 'canonical' or 'perturbed', got {typ!r}")
    amp = _float(ini.get("amplitude", 0.1), "initial.amplitude")
    power = _float(ini.get("power", 1.0), "initial.power")
    if power < 1:
        raise ConfigError("initial.power", f"must be >= 1, got {power}")
    initial = InitialSpec(typ, amp, power)

    sweep = None
    if "sweep" in raw:
        sw = _object(raw["sweep"], "sweep", {"scales"})
        scales = sw.get("scales", [])
        if not isinstance(scales, list) or not scales:
            raise ConfigError("sweep.scales", "expected a non-empty list")
        sweep = []
        for i, s in enumerate(scales):
            v = _rational(s, f"sweep.scales[{i}]")
            if not 0 < v <= 1:
                raise ConfigError(f"sweep.scales[{i}]", f"must lie in (0, 1], got {v}")
            sweep.append(v)
        sweep = tuple(sweep)

    out = _object(raw.get("output", {}), "output", {"dir", "interval"})
    out_dir = out.get("dir")
    if out_dir is not None and not isinstance(out_dir, str):
        raise ConfigError("output.dir", "expected a string")
    interval = _float(out.get("interval", 0.1), "output.interval")
    if interval <= 0:
        raise ConfigError("output.interval", "must be positive")

    return RunConfig(data, flow, initial, out_dir, interval, sweep)


def serialize(config: RunConfig) -> str:
    """JSON text that :func:`parse_config` maps back to an equal config."""
    d = config.data
    obj = {
        "factors": [{"d": f.d, "s": str(f.s), "x": str(f.x)} for f in d.factors],
        "d0": d.d0,
        "dinf": d.dinf,
        "grid": {"n": config.flow.n},
        "flow": {
            "cfl": config.flow.cfl,
            "dt_max": config.flow.dt_max,
            "t_end": config.flow.t_end,
            "tol_conv": config.flow.tol_conv,
        },
        "initial": {
            "type": config.initial.type,
            "amplitude": config.initial.amplitude,
            "power": config.initial.power,
        },
        "output": {"interval": config.output_interval},
    }
    if config.output_dir is not None:
        obj["output"]["dir"] = config.output_dir
    if config.sweep is not None:
        obj["sweep"] = {"scales": [str(s) for s in config.sweep]}
    return json.dumps(obj, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------
def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _json_float(v):
    v = float(v)
    return v if math.isfinite(v) else None


def _prepare_out(out) -> Path:
    if out is None:
        return None
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise ConfigError("output.dir", f"{path} is not writable")
    return path


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------
def analyze_data(data: AdmissibleData) -> dict:
    """Invariants, root structure, k0, Fano status and the stability report.

    Raises :class:`HypothesisNotMet` (after collecting the root count) when P
    has more or fewer than one root in (-1, 1).
    """
    inv = build_invariants(data)
    boundary = boundary_structure_check(inv, data, strict=False)
    roots = isolate_real_roots(inv.P, -1, 1)
    fp = fano_parameters(data)
    fano_zero = fano_residual(inv, fp).is_zero()
    rep = {
        "p_c": [str(c) for c in inv.p_c.coeffs],
        "P": [str(c) for c in inv.P.coeffs],
        "alpha0": str(inv.alpha0),
        "beta0": str(inv.beta0),
        "boundary_structure": boundary.passed,
        "root_count": len(roots),
        "root_brackets": [[str(b.lo), str(b.hi)] for b in roots],
        "mt0": _json_float(mt(inv, 0.0)),
        "fano": {"residual_zero": fano_zero},
    }
    if fano_zero:
        rep["fano"].update({"lambda": str(fp.lam), "C": str(fp.C)})
    if len(roots) != 1:
        err = HypothesisNotMet(f"P has {len(roots)} roots in (-1, 1), expected exactly one")
        err.report = rep
        raise err
    k0 = solve_k0(inv)
    profile = build_profile(inv, k0, data)
    _, st = q_function(profile, inv)
    rep["k0"] = k0
    rep["condition"] = {
        "q_min": st.q_min,
        "q_boundary": list(st.q_boundary),
        "holds": st.condition_holds,
        "xi_eta_min": st.xi_eta_min,
        "log_concavity": st.log_concavity_holds,
    }
    rep["_profile"] = profile
    return rep


def _human(rep: dict) -> str:
    lines = [
        f"p_c        = {rep['p_c']}",
        f"P          = {rep['P']}",
        f"alpha0     = {rep['alpha0']}",
        f"beta0      = {rep['beta0']}",
        f"roots of P in (-1,1): {rep['root_count']} {rep['root_brackets']}",
        f"MT(0)      = {rep['mt0']!r}",
    ]
    if "k0" in rep:
        lines.append(f"k0         = {rep['k0']!r}")
    f = rep["fano"]
    lines.append("Fano residual: zero (lambda = {}, C = {})".format(f["lambda"], f["C"])
                 if f["residual_zero"] else "Fano residual: nonzero")
    if "condition" in rep:
        c = rep["condition"]
        lines.append(f"decay condition Q < 0: {'holds' if c['holds'] else 'fails'} "
                     f"(q_min = {c['q_min']!r}, Q(-1) = {c['q_boundary'][0]!r}, "
                     f"Q(1) = {c['q_boundary'][1]!r})")
    return "\n".join(lines)


def _machine(rep: dict) -> str:
    return json.dumps({k: v for k, v in rep.items() if not k.startswith("_")},
                      sort_keys=True, indent=2)


def cmd_analyze(config: RunConfig, out=None) -> dict:
    out = _prepare_out(out if out is not None else config.output_dir)
    try:
        rep = analyze_data(config.data)
    except HypothesisNotMet as exc:
        if out is not None:
            (out / "analyze.json").write_text(_machine(exc.report) + "\n")
        raise
    if out is not None:
        (out / "analyze.json").write_text(_machine(rep) + "\n")
        (out / "analyze.txt").write_text(_human(rep) + "\n")
    return rep


def cmd_gqe(config: RunConfig, out=None) -> dict:
    out = _prepare_out(out if out is not None else config.output_dir)
    inv = build_invariants(config.data)
    k0 = solve_k0(inv)
    profile = build_profile(inv, k0, config.data)
    report = verify_profile(profile)
    z = np.linspace(-1.0, 1.0, config.flow.n + 1)
    theta = profile.theta(z)
    summary = {
        "k0": k0,
        "checks": [{"name": c[0], "value": float(c[1]), "tolerance": float(c[2]), "passed": c[3]}
                   for c in report.checks],
        "passed": report.passed,
    }
    if out is not None:
        write_csv(out / "profile.csv", ("z", "theta"), zip(z, theta))
        (out / "gqe.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return {"z": z, "theta": theta, **summary, "_profile": profile}


def _snapshot(path, state, profile):
    V = velocity_field(state, profile)
    write_csv(path, ("z", "theta", "phi", "V"), zip(state.grid, state.theta, state.phi, V))


def _flow_for(data: AdmissibleData, config: RunConfig, out: Path, profile=None):
    inv = build_invariants(data)
    if profile is None:
        profile = build_profile(inv, solve_k0(inv), data)
    state = init_state(profile, config.initial, config.flow)
    if out is not None:
        _snapshot(out / "snapshot_initial.csv", state, profile)
    try:
        traj = run(state, profile, inv, config.flow, config.output_interval)
    except PositivityLoss as exc:
        if out is not None:
            write_csv(out / "trajectory.csv", traj_header(), exc.trajectory.rows())
        raise
    fit = decay_fit(traj)
    summary = {
        "converged": traj.converged,
        "t_final": traj.final.time,
        "steps": traj.steps,
        "sup_phi_final": traj.final.sup_phi,
        "decay_rate": _json_float(fit.rate),
        "r_squared": _json_float(fit.r_squared),
        "max_boundary_slope_error": traj.max_bnd_err,
        "min_theta": traj.min_theta_all,
    }
    if out is not None:
        write_csv(out / "trajectory.csv", traj_header(), traj.rows())
        _snapshot(out / "snapshot_final.csv", traj.final, profile)
        (out / "flow.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return traj, fit, summary


def traj_header():
    return ("t", "sup_phi", "l2_phi", "min_theta", "bnd_err_m1", "bnd_err_p1")


def cmd_flow(config: RunConfig, out=None) -> dict:
    out = _prepare_out(out if out is not None else config.output_dir)
    rep = analyze_data(config.data)
    if not rep["condition"]["holds"]:
        log.warning("decay condition Q < 0 fails (q_min = %r); running anyway",
                    rep["condition"]["q_min"])
    traj, fit, summary = _flow_for(config.data, config, out, rep["_profile"])
    return {"trajectory": traj, "fit": fit, **summary}


def _threads() -> int:
    raw = os.environ.get("AF_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError("AF_THREADS", f"expected a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError("AF_THREADS", f"expected a positive integer, got {raw!r}")
    return n


def _sweep_entry(i, scale, config: RunConfig, out: Path):
    sub = None
    if out is not None:
        sub = out / f"scale_{i:03d}"
        sub.mkdir(parents=True, exist_ok=True)
    data = config.data.scaled(scale)
    rep = analyze_data(data)
    if sub is not None:
        (sub / "analyze.json").write_text(_machine(rep) + "\n")
    _, fit, _ = _flow_for(data, config, sub, rep["_profile"])
    return (float(scale), rep["k0"], rep["mt0"], rep["condition"]["q_min"],
            rep["condition"]["holds"], fit.rate)


def sweep_header():
    return ("scale", "k0", "mt0", "qmin", "condition_holds", "decay_rate")


def cmd_sweep(config: RunConfig, out=None) -> list:
    out = _prepare_out(out if out is not None else config.output_dir)
    scales = config.sweep or (Fraction(1),)
    with ThreadPoolExecutor(max_workers=min(_threads(), len(scales))) as pool:
        rows = list(pool.map(lambda a: _sweep_entry(a[0], a[1], config, out), enumerate(scales)))
    if out is not None:
        write_csv(out / "sweep.csv", sweep_header(), rows)
    return rows


COMMANDS = {"analyze": cmd_analyze, "gqe": cmd_gqe, "flow": cmd_flow, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="admissible-flow",
                                     description="Admissible classes, GQE profiles and the reduced flow.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--n", type=int, help="override grid.n")
    parser.add_argument("--t-end", type=float, dest="t_end", help="override flow.t_end")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        config = parse_config(Path(args.config).read_text(encoding="utf-8"))
        if args.n is not None or args.t_end is not None:
            try:
                flow = replace(config.flow, **{k: v for k, v in
                                               (("n", args.n), ("t_end", args.t_end)) if v is not None})
            except ValueError as exc:
                raise ConfigError("--n/--t-end", str(exc)) from None
            config = replace(config, flow=flow)
        result = COMMANDS[args.command](config, args.out)
    except HypothesisNotMet as exc:
        log.error("hypothesis not met: %s", exc)
        return 2
    except (AdmissibleFlowError, OSError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return 1
    if args.command == "analyze":
        print(_human(result))
    elif args.command == "gqe":
        print(f"k0 = {result['k0']!r}; profile checks {'passed' if result['passed'] else 'FAILED'}")
    elif args.command == "flow":
        print(f"converged = {result['converged']}, t = {result['t_final']!r}, "
              f"decay rate = {result['decay_rate']!r}")
    else:
        for row in result:
            print(", ".join(_fmt(v) for v in row))
    return 0


if __name__ == "__main__":
    sys.exit(main())

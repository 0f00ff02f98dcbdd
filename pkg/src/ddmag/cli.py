"""``ddmag`` command-line interface.

Every run is described by a flat configuration dictionary (optionally read
from ``--config``, command-line flags taking precedence) that is validated
against the packaged JSON schema and echoed in the output. Exit codes: 0 on
success, 2 for configuration errors, 3 when a numerical diagnostic fails.
Errors are reported as one JSON object on stderr.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from importlib import resources

import jsonschema
import numpy as np

from . import __version__
from .decay import (
    cumulant_coeffs,
    envelope_pdd,
    envelope_re,
    fit_cubic_rate,
    gamma2_long_tc,
)
from .dynamics import DEFAULT_STEPS_PER_PERIOD, OUNoise, mc_signal
from .response import (
    PeakNotBracketedError,
    fwhm_main_peak,
    passbands,
    reference_frequency,
    weight,
)
from .sensitivity import (
    OUDecay,
    SensorParams,
    T2Decay,
    optimal_time,
    scan,
    sequence_for_period,
)
from .sequences import Scheme, matched_frequencies
from .constants import DEFAULT_C, GAMMA_E

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

COMMANDS = ("weight", "decay", "sensitivity", "montecarlo", "passbands")
# not echoed: the output must not depend on the thread count
NON_ECHOED = ("workers", "out")

DEFAULTS = {
    "weight": {"schemes": ["re"], "k": 1, "n": 1, "omega": 1e6, "grid": "0.05:4.0:2000"},
    "decay": {"schemes": ["re"], "k": 1, "n": 10, "omega": 1e6, "sigma": 0.0,
              "tau_c": 1e-3, "n_traj": 0},
    "sensitivity": {"schemes": ["re"], "k": 1, "n": 1, "axis": "time", "band": "opt",
                    "c": DEFAULT_C, "gamma": GAMMA_E, "n_traj": 2000},
    "montecarlo": {"schemes": ["re"], "k": 1, "n": 1, "omega": 1e6, "sigma": 0.0,
                   "tau_c": 1e-3, "n_traj": 1000, "readout": "auto"},
    "passbands": {"k": 1, "n": 1, "omega": 1e6, "p_max": 4},
}
GLOBAL_DEFAULTS = {"seed": 0, "format": "csv", "units": "hz", "workers": 1}


class ConfigError(ValueError):
    """Invalid run configuration (exit code 2)."""


class NumericalDiagnostic(RuntimeError):
    """A computed quantity failed its numerical sanity check (exit code 3)."""


# -- schema ----------------------------------------------------------------------


def load_schema() -> dict:
    text = resources.files("ddmag").joinpath("schema/run_config.schema.json").read_text()
    return json.loads(text)


def validate_config(config: dict) -> None:
    try:
        jsonschema.validate(config, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None


def resolve_config(command: str, cli_values: dict, file_config: dict | None = None) -> dict:
    """Merge defaults, config file and flags; validate the result."""
    file_config = dict(file_config or {})
    if file_config.get("command", command) != command:
        raise ConfigError(
            f"config file is for {file_config['command']!r}, not {command!r}")
    config = {"command": command, **GLOBAL_DEFAULTS, **DEFAULTS[command]}
    config.update(file_config)
    config.update({k: v for k, v in cli_values.items() if v is not None})
    validate_config(config)
    return config


# -- parsing helpers ---------------------------------------------------------------


def parse_range(spec) -> np.ndarray:
    """'start:stop:count[:lin|log]' or an explicit list of numbers."""
    if isinstance(spec, (list, tuple)):
        return np.asarray(spec, dtype=float)
    parts = str(spec).split(":")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except (IndexError, ValueError):
        raise ConfigError(f"bad range {spec!r}; expected start:stop:count[:lin|log]") from None
    kind = parts[3] if len(parts) > 3 else "lin"
    if count < 1:
        raise ConfigError(f"range {spec!r} needs at least one point")
    if kind == "log":
        if start <= 0 or stop <= 0:
            raise ConfigError(f"log range {spec!r} must be positive")
        return np.geomspace(start, stop, count)
    return np.linspace(start, stop, count)


def parse_cycles(spec, default_max: int) -> list[int]:
    if spec is None:
        return list(range(0, default_max + 1))
    if isinstance(spec, (list, tuple)):
        return sorted(int(v) for v in spec)
    parts = [int(p) for p in str(spec).split(":")]
    step = parts[2] if len(parts) > 2 else 1
    if step < 1 or parts[1] < parts[0]:
        raise ConfigError(f"bad cycle range {spec!r}")
    return list(range(parts[0], parts[1] + 1, step))


def parse_scheme(label: str, default_k: int):
    name, _, k = label.partition(":")
    try:
        scheme = Scheme.parse(name)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return scheme, int(k) if k else default_k


def to_rad(value, units):
    if value is None:
        return None
    return np.asarray(value) * 2 * math.pi if units == "hz" else np.asarray(value)


def from_rad(value, units):
    return value / (2 * math.pi) if units == "hz" else value


def _drive_period(config, scheme, k):
    """Control period from --period, else from the drive frequency --omega."""
    if "period" in config:
        return config["period"]
    omega = float(to_rad(config["omega"], config["units"]))
    if scheme is Scheme.ROTARY_ECHO:
        return 4 * math.pi * k / omega
    return 2 * math.pi / omega


def _freq_column(units):
    return "freq_Hz" if units == "hz" else "omega_rad_s"


# -- output ------------------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if value is None:
        return ""
    return str(value)


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    return value


def echo(config: dict) -> dict:
    return {k: v for k, v in sorted(config.items()) if k not in NON_ECHOED}


def render(config: dict, columns: list[str], rows: list[dict], summary: dict | None = None) -> str:
    """CSV with a commented provenance header, or a JSON document."""
    summary = summary or {}
    if config["format"] == "json":
        doc = {
            "ddmag_version": __version__,
            "config": echo(config),
            "columns": columns,
            "rows": [{c: r.get(c) for c in columns} for r in rows],
            "summary": summary,
        }
        return json.dumps(_jsonable(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"
    buf = io.StringIO()
    buf.write(f"# ddmag {__version__}\n")
    buf.write("# config: " + json.dumps(_jsonable(echo(config)), sort_keys=True) + "\n")
    for key in sorted(summary):
        buf.write(f"# {key}: {json.dumps(_jsonable(summary[key]), sort_keys=True)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


# -- commands --------------------------------------------------------------------------------


def cmd_weight(config: dict):
    units = config["units"]
    grid = parse_range(config["grid"])
    if np.any(grid <= 0):
        raise ConfigError("weight grid must be positive (multiples of the reference frequency)")
    if config["n"] < 1:
        raise ConfigError("weight needs n >= 1")
    rows, fwhm = [], {}
    for label in config["schemes"]:
        scheme, k = parse_scheme(label, config["k"])
        seq = sequence_for_period(scheme, _drive_period(config, scheme, k), k, config["n"])
        ref = reference_frequency(seq)
        # the matched frequencies are always sampled so W(omega_opt) = 1 is visible
        tags = {}
        for band, w in sorted(matched_frequencies(seq).items(), reverse=True):
            tags.setdefault(w / ref, band)
        x = np.unique(np.concatenate([grid, list(tags)]))
        W = np.atleast_1d(weight(seq, x * ref, seq.n))
        if not np.all(np.isfinite(W)):
            raise NumericalDiagnostic(f"non-finite weight for {label}")
        for xi, w in zip(x, W):
            rows.append({"scheme": scheme.value, "k": k, "n": seq.n,
                         _freq_column(units): from_rad(float(xi * ref), units),
                         "omega_over_ref": float(xi), "W": float(w),
                         "matched": tags.get(xi, "")})
        fwhm[f"{scheme.value}:{k}"] = from_rad(fwhm_main_peak(seq, seq.n), units)
    columns = ["scheme", "k", "n", _freq_column(units), "omega_over_ref", "W", "matched"]
    return columns, rows, {f"fwhm_main_peak_{_freq_column(units)}": fwhm}


def _analytic_envelope(scheme, sigma, tau_c, k, n, T):
    if n == 0 or sigma == 0:
        return 1.0, False
    if scheme is Scheme.ROTARY_ECHO:
        c = cumulant_coeffs(sigma, tau_c, k, n, T)
        return envelope_re(c), c.ill_conditioned
    if scheme is Scheme.PDD:
        t2 = 1.0 / gamma2_long_tc(Scheme.PDD, sigma, tau_c)
        return float(envelope_pdd(n * T, n, t2)), False
    return math.nan, False


def cmd_decay(config: dict):
    label = config["schemes"][0]
    if len(config["schemes"]) != 1:
        raise ConfigError("decay takes a single scheme")
    scheme, k = parse_scheme(label, config["k"])
    T = _drive_period(config, scheme, k)
    sigma, tau_c = config["sigma"], config["tau_c"]
    n_traj = config["n_traj"]
    if 0 < n_traj < 100:
        raise ConfigError("n_traj must be 0 (no Monte Carlo) or at least 100")
    spp = config.get("steps_per_period", DEFAULT_STEPS_PER_PERIOD)
    noise = OUNoise(sigma, tau_c, config["seed"])
    rows, ill = [], []
    for n in parse_cycles(config.get("cycles"), config["n"]):
        D, flag = _analytic_envelope(scheme, sigma, tau_c, k, n, T)
        if flag:
            ill.append(n)
        row = {"n": n, "t_s": n * T, "D_analytic": D}
        if n_traj:
            seq = sequence_for_period(scheme, T, k, n)
            res = mc_signal(seq, noise, n_traj, config.get("readout", "auto"), spp,
                            config["workers"])
            row.update(D_mc=res.envelope, D_mc_stderr=res.envelope_stderr)
        rows.append(row)
    if ill:
        raise NumericalDiagnostic(
            f"cumulant closed form ill-conditioned at n = {ill}; use the numeric oracle")
    summary = {}
    if sigma > 0 and scheme in (Scheme.ROTARY_ECHO, Scheme.PDD):
        summary["gamma2_formula_rad_s"] = gamma2_long_tc(scheme, sigma, tau_c, k)
        for key, col in (("gamma2_fit_analytic_rad_s", "D_analytic"),
                         ("gamma2_fit_mc_rad_s", "D_mc")):
            pts = [(r["t_s"], r[col], r["n"]) for r in rows
                   if col in r and r["n"] > 0 and 1e-12 < r[col] < 1 - 1e-12]
            if len(pts) >= 2:
                t, D, n = map(np.array, zip(*pts))
                summary[key] = fit_cubic_rate(t, D, n) ** (1 / 3)
    columns = ["n", "t_s", "D_analytic"] + (["D_mc", "D_mc_stderr"] if n_traj else [])
    return columns, rows, summary


def cmd_montecarlo(config: dict):
    label = config["schemes"][0]
    if len(config["schemes"]) != 1:
        raise ConfigError("montecarlo takes a single scheme")
    scheme, k = parse_scheme(label, config["k"])
    if config["n_traj"] < 100:
        raise ConfigError("montecarlo needs n_traj >= 100")
    T = _drive_period(config, scheme, k)
    spp = config.get("steps_per_period", DEFAULT_STEPS_PER_PERIOD)
    noise = OUNoise(config["sigma"], config["tau_c"], config["seed"])
    cycles = parse_cycles(config.get("cycles"), config["n"]) if "cycles" in config \
        else [config["n"]]
    rows = []
    for n in cycles:
        seq = sequence_for_period(scheme, T, k, n)
        res = mc_signal(seq, noise, config["n_traj"], config["readout"], spp, config["workers"])
        if not math.isfinite(res.signal):
            raise NumericalDiagnostic("non-finite Monte Carlo signal")
        rows.append({"n": n, "t_s": n * T, "S": res.signal, "S_stderr": res.stderr,
                     "D": res.envelope, "D_stderr": res.envelope_stderr,
                     "n_traj": res.n_traj})
    return ["n", "t_s", "S", "S_stderr", "D", "D_stderr", "n_traj"], rows, {}


def _decay_model(config):
    has_t2 = "t2" in config
    has_ou = "sigma" in config
    if has_t2 and has_ou:
        raise ConfigError("give either t2 or sigma/tau_c, not both")
    common = dict(n_traj=config["n_traj"], seed=config["seed"], workers=config["workers"])
    if "steps_per_period" in config:
        common["steps_per_period"] = config["steps_per_period"]
    if has_t2:
        return T2Decay(config["t2"], tau_c=config.get("tau_c"), **common)
    if has_ou:
        if "tau_c" not in config:
            raise ConfigError("sigma needs tau_c")
        return OUDecay(config["sigma"], config["tau_c"], **common)
    return None


def _default_values(config, decay):
    axis, n = config["axis"], config["n"]
    if axis == "time":
        t_star = optimal_time(n, decay.t2) if isinstance(decay, T2Decay) else 1e-3
        return np.linspace(t_star / 50, 4 * t_star, 400)
    if axis == "frequency":
        return 2 * math.pi * np.geomspace(1e3, 1e6, 200)
    raise ConfigError(f"axis {axis!r} needs explicit values")


def cmd_sensitivity(config: dict):
    units = config["units"]
    axis = config["axis"]
    decay = _decay_model(config)
    if decay is not None and config["n_traj"] < 100:
        raise ConfigError("sensitivity decay models need n_traj >= 100")
    sensor = SensorParams(config["gamma"], config["c"])
    if "values" in config:
        values = parse_range(config["values"])
        if axis == "frequency":
            values = to_rad(values, units)
    else:
        values = _default_values(config, decay)
    omega = None if "omega" not in config else float(to_rad(config["omega"], units))
    rows = []
    for label in config["schemes"]:
        scheme, k = parse_scheme(label, config["k"])
        table = scan(axis, values, scheme, k=k, n=config["n"], T=config.get("period"),
                     t=config.get("t"), omega=omega, phi=config.get("phi"),
                     band=config["band"], decay=decay, sensor=sensor,
                     workers=config["workers"])
        rows.extend(table.to_records(units))
    columns = ["scheme", "k", "n", "t_s", "axis_value", "eta_ideal_T_sqrtHz", "Phi", "W",
               "D", "eta_eff_T_sqrtHz", "matched_freq_Hz"]
    return columns, rows, {}


def cmd_passbands(config: dict):
    k = config["k"]
    T = _drive_period(config, Scheme.ROTARY_ECHO, k)
    units = config["units"]
    col = _freq_column(units)
    rows = [{"p": b.p, col: from_rad(b.center, units), "height": b.height}
            for b in passbands(k, T, config["n"], config["p_max"])]
    return ["p", col, "height"], rows, {}


HANDLERS = {
    "weight": cmd_weight,
    "decay": cmd_decay,
    "sensitivity": cmd_sensitivity,
    "montecarlo": cmd_montecarlo,
    "passbands": cmd_passbands,
}


# -- argument parsing --------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("global")
    g.add_argument("--out", help="output file (default stdout)")
    g.add_argument("--format", choices=["csv", "json"])
    g.add_argument("--seed", type=int)
    g.add_argument("--units", choices=["hz", "rads"],
                   help="frequency units for drive and field frequencies (default hz)")
    g.add_argument("--workers", type=int, help="threads for Monte Carlo and scans")
    g.add_argument("--config", help="JSON run configuration; flags override it")

    seq = _Parser(add_help=False)
    s = seq.add_argument_group("sequence")
    s.add_argument("--scheme", dest="schemes", action="append",
                   help="pdd, re, constant or spinlock; 're:4' sets k per scheme; repeatable")
    s.add_argument("--k", type=int, help="echo angle 2 pi k")
    s.add_argument("--n", type=int, help="number of cycles")
    s.add_argument("--omega", type=float, help="Rabi (drive) frequency")
    s.add_argument("--period", type=float, help="control period in s (overrides --omega)")

    noise = _Parser(add_help=False)
    o = noise.add_argument_group("noise")
    o.add_argument("--sigma", type=float, help="OU noise rms in rad/s")
    o.add_argument("--tau-c", dest="tau_c", type=float, help="OU correlation time in s")
    o.add_argument("--traj", dest="n_traj", type=int, help="Monte Carlo trajectories")
    o.add_argument("--steps-per-period", dest="steps_per_period", type=int)
    o.add_argument("--cycles", help="cycle counts 'start:stop[:step]'")

    parser = _Parser(prog="ddmag", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ddmag {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("weight", parents=[common, seq], help="weight function W(omega)")
    p.add_argument("--grid", help="'start:stop:count[:log]' in units of the reference frequency")

    p = sub.add_parser("decay", parents=[common, seq, noise], help="decay envelope")
    p.add_argument("--readout", choices=["auto", "x", "y", "z"])

    p = sub.add_parser("montecarlo", parents=[common, seq, noise], help="Monte Carlo signal")
    p.add_argument("--readout", choices=["auto", "x", "y", "z"])

    p = sub.add_parser("sensitivity", parents=[common, seq, noise], help="sensitivity scan")
    p.add_argument("--axis", choices=["time", "frequency", "k", "n"])
    p.add_argument("--values", help="'start:stop:count[:log]' along the axis")
    p.add_argument("--t", type=float, help="total time in s (k and n axes)")
    p.add_argument("--t2", type=float, help="PDD coherence time T2 in s")
    p.add_argument("--c", type=float, help="readout efficiency C")
    p.add_argument("--gamma", type=float, help="gyromagnetic ratio in rad/s/T")
    p.add_argument("--phi", help="field phase in rad, or 'unknown'")
    p.add_argument("--band", choices=["opt", "low"])

    p = sub.add_parser("passbands", parents=[common, seq], help="rotary-echo pass bands")
    p.add_argument("--p-max", dest="p_max", type=int)
    return parser


def _cli_values(ns: argparse.Namespace) -> dict:
    values = {k: v for k, v in vars(ns).items() if k not in ("command", "config")}
    phi = values.get("phi")
    if phi is not None and phi != "unknown":
        try:
            values["phi"] = float(phi)
        except ValueError:
            raise ConfigError(f"phi must be a number or 'unknown', got {phi!r}") from None
    return values


def _error(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n")
    return code


def run(argv=None) -> tuple[int, str, str | None]:
    """Execute a command; returns (exit code, rendered output, output path)."""
    ns = build_parser().parse_args(argv)
    file_config = None
    if ns.config:
        try:
            with open(ns.config, encoding="utf-8") as fh:
                file_config = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {ns.config!r}: {exc}") from None
        if not isinstance(file_config, dict):
            raise ConfigError("config file must hold a JSON object")
    config = resolve_config(ns.command, _cli_values(ns), file_config)
    columns, rows, summary = HANDLERS[ns.command](config)
    return EXIT_OK, render(config, columns, rows, summary), config.get("out")


def main(argv=None) -> int:
    try:
        code, text, out = run(argv)
    except ConfigError as exc:
        return _error("config", str(exc), EXIT_CONFIG)
    except (NumericalDiagnostic, PeakNotBracketedError, FloatingPointError) as exc:
        return _error("numerical", str(exc), EXIT_NUMERICAL)
    except ValueError as exc:
        return _error("config", str(exc), EXIT_CONFIG)
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())

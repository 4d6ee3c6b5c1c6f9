"""Command-line front end.

    tumorstrip stationary|spectrum|threshold|evolve --config run.json --out DIR

Exit codes: 0 success, 1 configuration error, 2 invalid model parameters,
3 numerical tolerance not reached, 4 simulation stopped before ``t_end``.
Every run writes ``resolved_config.json`` next to its outputs; CSV files
point to it in a ``#`` comment line and JSON summaries embed it.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, load_config, model_parameters
from .core import BoundaryProfile, PeriodicGrid, validate
from .errors import (
    AmplitudeUnderflow,
    BracketNotFound,
    ParameterError,
    SingularSystem,
    ToleranceNotReached,
    WindowTooShort,
)

EXIT_OK, EXIT_CONFIG, EXIT_MODEL, EXIT_TOLERANCE, EXIT_EARLY = 0, 1, 2, 3, 4
CONFIG_NAME = "resolved_config.json"
THREADS_ENV = "TUMORSTRIP_THREADS"


def fmt(value) -> str:
    """Shortest round-trip decimal; empty for missing values."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return "nan"
    return repr(v)


def _json_value(value):
    if isinstance(value, dict):
        return {k: _json_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_value(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else None
    return value


def write_json(path: Path, payload: dict) -> None:
    text = json.dumps(_json_value(payload), indent=2, allow_nan=False) + "\n"
    path.write_text(text, encoding="utf-8")


def write_csv(path: Path, header: list, rows, comments=()) -> None:
    lines = [f"# {c}" for c in comments]
    lines.append(f"# config: {CONFIG_NAME}")
    lines.append(",".join(header))
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _limit_threads():
    value = os.environ.get(THREADS_ENV)
    if not value:
        return None
    try:
        n = int(value)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {value!r}")
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {value!r}")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


# ---------------------------------------------------------------------------
# subcommands; each returns an exit code and writes into ``out``


def cmd_stationary(cfg: dict, out: Path) -> int:
    from .spectrum import lambda_0_reduced
    from .stationary import make_state, p_star, sigma_star

    state = make_state(model_parameters(cfg))
    n = cfg["stationary"]["samples"]
    y = np.linspace(0.0, state.rho_star, n) if n > 1 else np.array([0.0])
    _write_config(out, cfg)
    write_json(
        out / "stationary.json",
        {
            "rho_star": state.rho_star,
            "c1": state.c1,
            "c2": state.c2,
            "c3": state.c3,
            "lambda_0": lambda_0_reduced(state),
            "f_alpha_residual": state.f_alpha_residual(),
            "alpha": state.params.alpha(),
            "config": cfg,
        },
    )
    rows = zip(y, sigma_star(state, y), p_star(state, y))
    write_csv(out / "stationary_profiles.csv", ["y", "sigma_star", "p_star"], rows)
    return EXIT_OK


def cmd_spectrum(cfg: dict, out: Path) -> int:
    from .spectrum import spectrum, tail_ratio
    from .stationary import make_state

    params = model_parameters(cfg)
    state = make_state(params)
    sc = cfg["spectrum"]
    report = spectrum(
        state, params.gamma, sc["k_max"], sc["k_oracle"] if sc["oracle"] else -1, sc["ny_oracle"]
    )
    rows = []
    for k, lam in enumerate(report.lambdas):
        orc = rel = None
        if report.oracle_lambdas is not None and k < report.oracle_lambdas.size:
            orc = float(report.oracle_lambdas[k])
            rel = abs(orc - lam) / abs(lam)
        tr = float(tail_ratio(state, params.gamma, k)) if k >= 1 else None
        rows.append((k, float(lam), orc, rel, tr))
    _write_config(out, cfg)
    write_csv(out / "spectrum.csv", ["k", "lambda_k", "lambda_oracle", "rel_err", "tail_ratio"], rows)
    errs = [r[3] for r in rows if r[3] is not None]
    write_json(
        out / "spectrum_summary.json",
        {
            "rho_star": state.rho_star,
            "gamma": params.gamma,
            "k_max": sc["k_max"],
            "min_lambda": report.min_lambda,
            "argmin_k": report.argmin,
            "all_positive": report.all_positive,
            "max_oracle_rel_err": max(errs) if errs else None,
            "config": cfg,
        },
    )
    return EXIT_OK


def cmd_threshold(cfg: dict, out: Path) -> int:
    from .spectrum import gamma_threshold
    from .stationary import make_state

    state = make_state(model_parameters(cfg))
    tc = cfg["threshold"]
    res = gamma_threshold(state, k_scan=tc["k_scan"], tol=tc["tol"])
    _write_config(out, cfg)
    write_json(
        out / "threshold.json",
        {
            "gamma_min": res.gamma_min,
            "bracket_lo": res.bracket_lo,
            "bracket_hi": res.bracket_hi,
            "k_eff": res.k_eff,
            "iterations": res.iterations,
            "config": cfg,
        },
    )
    return EXIT_OK


def cmd_evolve(cfg: dict, out: Path) -> int:
    from .evolution import NOISE_FLOOR, EvolutionConfig, evolve, fit_decay
    from .spectrum import lambda_k
    from .stationary import make_state

    params = model_parameters(cfg)
    state = make_state(params)
    ec, gc = cfg["evolve"], cfg["grid"]
    grid = PeriodicGrid(gc["nx"])
    pert = ec["perturbation"]
    wave = np.cos if pert["phase"] == "cos" else np.sin
    values = state.rho_star + pert["eps"] * wave(pert["k"] * grid.x)
    try:
        initial = BoundaryProfile(grid, values)
    except ValueError as exc:
        raise ConfigError(f"evolve.perturbation: initial profile is not positive ({exc})")
    config = EvolutionConfig(
        params=params,
        initial=initial,
        t_end=ec["t_end"],
        stepper=ec["stepper"],
        dt=ec["dt"],
        record_every=ec["record_every"],
        tracked_modes=tuple(ec["tracked_modes"]),
        ny=gc["ny"],
        order=gc["order"],
    )
    trace = evolve(config)

    header = ["t", "volume", "volume_residual", "max_rho", "min_rho"]
    for k in config.tracked_modes:
        header += [f"abs_a_{k}", f"abs_b_{k}"]
    rows = []
    for i, t in enumerate(trace.times):
        row = [t, trace.volume[i], trace.volume_residual[i], trace.max_rho[i], trace.min_rho[i]]
        for k in config.tracked_modes:
            row += [abs(trace.modes[k][i, 0]), abs(trace.modes[k][i, 1])]
        rows.append(row)

    modes = {}
    for k in config.tracked_modes:
        lam = float(lambda_k(state, params.gamma, k))
        entry = {"lambda_predicted": lam}
        try:
            d = fit_decay(trace, k, burn_in=ec["burn_in"])
        except (AmplitudeUnderflow, WindowTooShort) as exc:
            entry.update(omega_fit=None, rel_dev=None, r_squared=None, note=str(exc))
        else:
            entry.update(
                omega_fit=d.omega,
                rel_dev=abs(d.omega - lam) / abs(lam),
                r_squared=d.r_squared,
                K=d.K,
                window=list(d.window),
            )
        modes[str(k)] = entry

    # the mean always relaxes (lambda_0 > 0), so growth is judged on the shape
    dev0 = float(np.ptp(initial.values))
    dev1 = float(np.ptp(trace.profiles[-1]))
    growth = dev1 > max(dev0, NOISE_FLOOR)
    _write_config(out, cfg)
    write_csv(
        out / "evolve.csv",
        header,
        rows,
        comments=(f"termination: {trace.termination}", f"dt: {fmt(trace.dt)}"),
    )
    summary = {
        "termination": trace.termination,
        "t_final": float(trace.times[-1]) if trace.times.size else 0.0,
        "steps": trace.steps,
        "dt": trace.dt,
        "max_volume_residual": trace.max_volume_residual,
        "initial_oscillation": dev0,
        "final_oscillation": dev1,
        "modes": modes,
        "unstable_growth_observed": growth,
        "config": cfg,
    }
    if growth:
        summary["note"] = "unstable_growth_observed: the deviation from the flat state grew"
    write_json(out / "decay.json", summary)
    return EXIT_OK if trace.termination == "completed" else EXIT_EARLY


def _write_config(out: Path, cfg: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / CONFIG_NAME, cfg)


COMMANDS = {
    "stationary": cmd_stationary,
    "spectrum": cmd_spectrum,
    "threshold": cmd_threshold,
    "evolve": cmd_evolve,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tumorstrip",
        description="Flat stationary state, spectrum and boundary evolution of a periodic tumor layer.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func in COMMANDS.items():
        p = sub.add_parser(name, help=func.__doc__ or name)
        p.add_argument("--config", required=True, help="JSON configuration file")
        p.add_argument("--out", required=True, help="output directory")
    return parser


def _fail(code: int, message: str) -> int:
    print(f"tumorstrip: error: {message}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        limiter = _limit_threads()
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    try:
        validate(model_parameters(cfg))
    except ParameterError as exc:
        return _fail(EXIT_MODEL, f"invalid model parameters: {exc}")
    out = Path(args.out)
    try:
        return COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    except (ToleranceNotReached, BracketNotFound, SingularSystem) as exc:
        return _fail(EXIT_TOLERANCE, str(exc))
    finally:
        if limiter is not None:
            limiter.unregister()


if __name__ == "__main__":
    sys.exit(main())

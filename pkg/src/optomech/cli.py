"""Command-line front end.

Every subcommand writes deterministic CSV files into ``--out``. Errors are
reported as one JSON line on stderr and a nonzero exit status.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import figures
from .errors import ConfigError, OptomechError
from .figures import SPECTRUM_HEADER, Table, _spectrum_rows
from .oracle import SimConfig, integrate, psd_estimate, quadrature
from .output import reflection_modulation
from .params import derive, figure_params, load_config, params_from_config
from .response import h_eta, modulation_transfer
from .sensing import (
    ForceDrive,
    SearchConfig,
    default_deltas,
    delta_sweep,
    numeric_optimize,
    sql_limits,
)
from .spectra import (
    NoiseModel,
    default_omega_grid,
    default_theta_grid,
    force_transduction,
    observed_spectrum,
    omit_trace,
    thermal_spectrum,
)

EXIT_ERROR = 2


def parse_grid(text: str):
    """``omega=start:stop:n`` -> (start, stop, n)."""
    try:
        key, spec = text.split("=", 1)
        start, stop, n = spec.split(":")
        if key.strip() != "omega":
            raise ValueError
        return float(start), float(stop), int(n)
    except ValueError:
        raise ConfigError(f"--grid expects omega=start:stop:n, got {text!r}") from None


def _load(args):
    if args.config is None:
        cfg = {}
        p = figure_params(0.2)
    else:
        cfg = load_config(args.config)
        if args.units is not None:
            cfg = dict(cfg, units=args.units)
        p = params_from_config(cfg)
    return cfg, p


def _omega(args, p, default=None):
    if args.grid is not None:
        a, b, n = parse_grid(args.grid)
        return np.linspace(a, b, n)
    return default_omega_grid(p) if default is None else default


def _theta(args):
    return default_theta_grid(args.theta) if args.theta else default_theta_grid()


def _noise(cfg):
    block = cfg.get("noise", {})
    return NoiseModel(float(block.get("n_th", 0.0)), float(block.get("f_bw", 1.0)))


def _drive(cfg):
    block = cfg.get("drive", {})
    return ForceDrive(float(block.get("f_ext", 1.0)), float(block.get("p_ho", 1.0)),
                      float(block.get("f_bw", 1.0)))


def _describe(p):
    return (f"kappa = {p.kappa:.17g}, Delta = {p.detuning:.17g}, omega_m = {p.omega_m:.17g}, "
            f"Gamma_m = {p.gamma_m:.17g}, g_c = {p.g_c:.17g}, ports (L, R, V) = "
            f"({p.gamma_left:.17g}, {p.gamma_right:.17g}, {p.gamma_vac:.17g}), eps_det = {p.eps_det:.17g}")


def _matrix_rows(w, mats, name):
    rows = []
    for i, om in enumerate(w):
        for r in range(2):
            for c in range(2):
                z = complex(mats[i, r, c])
                rows.append((om, name, f"{r + 1}{c + 1}", z.real, z.imag, abs(z) ** 2))
    return rows


MATRIX_HEADER = ["omega_over_kappa", "matrix", "element", "re", "im", "power"]


def cmd_derive(args, cfg, p):
    d = derive(p)
    rows = [(k, float(v)) for k, v in dataclasses.asdict(d).items()]
    print(json.dumps({k: v for k, v in rows}, sort_keys=True))
    return {"derive.csv": Table(["quantity", "value"], rows, [_describe(p)])}


def cmd_response(args, cfg, p):
    w = _omega(args, p)
    rows = _matrix_rows(w, modulation_transfer(p, w), "H_MT")
    rows += _matrix_rows(w, math.sqrt(p.gamma_m) * h_eta(p, w), "sqrtGamma_H_eta")
    return {"response.csv": Table(MATRIX_HEADER, rows, [_describe(p)])}


def cmd_omit(args, cfg, p):
    w, raw, ratio = omit_trace(p, _omega(args, p))
    rows = [(w[i], raw[i], ratio[i]) for i in range(w.size)]
    return {"omit.csv": Table(["omega_over_kappa", "raw", "ratio"], rows, [_describe(p)])}


def cmd_reflect(args, cfg, p):
    w = _omega(args, p)
    rows = _matrix_rows(w, reflection_modulation(p, w), "H_MT_RR")
    return {"reflect.csv": Table(MATRIX_HEADER, rows, [_describe(p)])}


def cmd_squeeze(args, cfg, p):
    tab = observed_spectrum(p, _omega(args, p), _theta(args), noise=_noise(cfg))
    rows = _spectrum_rows(tab.omega, tab.theta, tab.values, tab.units, tab.tag)
    return {"squeeze.csv": Table(SPECTRUM_HEADER, rows, [_describe(p)])}


def cmd_thermal(args, cfg, p):
    tab = thermal_spectrum(p, _omega(args, p), _noise(cfg))
    rows = _spectrum_rows(tab.omega, tab.theta, tab.values, tab.units, tab.tag)
    return {"thermal.csv": Table(SPECTRUM_HEADER, rows, [_describe(p)])}


def cmd_force(args, cfg, p):
    drive = _drive(cfg)
    w, t = _omega(args, p), _theta(args)
    vals = force_transduction(p, w, t, drive) * drive.f_ext**2
    return {"force.csv": Table(SPECTRUM_HEADER, _spectrum_rows(w, t, vals, "quanta", "force"), [_describe(p)])}


def cmd_sql(args, cfg, p):
    drive = _drive(cfg)
    r_therm, r_ext, c_sql = sql_limits(p, drive, _noise(cfg))
    num = numeric_optimize(p, p.omega_m, 0.0, drive, SearchConfig(theta=math.pi / 2))
    rows = [("r_therm", r_therm), ("r_ext", r_ext), ("c_sql", c_sql),
            ("r_ext_numeric", num.snr), ("c_sql_numeric", num.c_opt)]
    print(json.dumps(dict(rows), sort_keys=True))
    return {"sql.csv": Table(["quantity", "value"], rows, [_describe(p)])}


def cmd_optimize(args, cfg, p):
    drive = _drive(cfg)
    if args.grid is not None:
        omegas = _omega(args, p)
    else:
        omegas = p.omega_m * np.geomspace(0.2, 5.0, 25)
    if args.delta_sweep:
        results = delta_sweep(p, omegas, drive, default_deltas())
    else:
        results = [numeric_optimize(p, w, p.detuning, drive) for w in omegas]
    rows = [(r.omega, r.delta, r.theta, r.c_opt, r.snr, r.converged) for r in results]
    header = ["omega", "delta", "theta_opt", "c_opt", "snr", "converged"]
    out = {"optimize.csv": Table(header, rows, [_describe(p)])}
    if args.delta_sweep:
        ok = True
        for w in omegas:
            cell = [r for r in results if r.omega == float(w)]
            ref = [r.snr for r in cell if r.delta == 0.0][0]
            ok &= all(r.snr <= ref * (1 + 1e-6) for r in cell)
        print(json.dumps({"resonant_optimum_dominates": bool(ok)}))
    return out


def cmd_simulate(args, cfg, p):
    block = dict(cfg.get("sim", {}))
    nperseg = int(block.pop("nperseg", 1024))
    thetas = block.pop("theta", [0.0, math.pi / 2])
    thetas = [float(t) for t in np.atleast_1d(thetas)]
    try:
        sim = SimConfig(**block)
    except TypeError as exc:
        raise ConfigError(f"sim: {exc}") from None
    tr = integrate(p, _noise(cfg), sim)
    traj_rows = [(tr.t[k], *tr.states[0, k], *tr.outputs[0, k]) for k in range(tr.t.size)]
    traj = Table(["t", "a_plus", "a_minus", "z", "p", "y_plus", "y_minus"], traj_rows,
                 [_describe(p), f"seed = {sim.seed}, dt = {sim.dt:.17g}, method = {sim.method}"])
    rows = []
    for th in thetas:
        w, psd, _ = psd_estimate(quadrature(tr.outputs, th), tr.tau, nperseg)
        keep = w >= 0
        rows += [(w[keep][i], th, psd[keep][i], "shot_noise", "welch") for i in range(int(keep.sum()))]
    return {"trajectory.csv": traj, "psd.csv": Table(SPECTRUM_HEADER, rows, traj.source)}


def cmd_figure(args, cfg, p):
    if args.number not in figures.FIGURES:
        raise ConfigError(f"figure must be one of {sorted(figures.FIGURES)}")
    return figures.FIGURES[args.number]()


COMMANDS = {
    "derive": cmd_derive, "response": cmd_response, "omit": cmd_omit,
    "reflect": cmd_reflect, "squeeze": cmd_squeeze, "thermal": cmd_thermal,
    "force": cmd_force, "sql": cmd_sql, "optimize": cmd_optimize,
    "simulate": cmd_simulate, "figure": cmd_figure,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON parameter file (default: unresolved figure preset)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--grid", help="frequency grid, omega=start:stop:n")
    common.add_argument("--theta", type=int, help="number of quadrature angles in [0, pi)")
    common.add_argument("--units", choices=("kappa", "si"), help="override the config units")
    common.add_argument("--plot", action="store_true", help="also write SVG line plots")
    parser = argparse.ArgumentParser(prog="optomech", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "figure":
            sp.add_argument("number", type=int)
        if name == "optimize":
            sp.add_argument("--delta-sweep", action="store_true")
    return parser


def _plot(path: Path, table: Table) -> None:
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "optomech"
    import matplotlib.pyplot as plt

    numeric = [i for i, v in enumerate(table.rows[0]) if isinstance(v, (float, np.floating))] if table.rows else []
    if len(numeric) < 2:
        return
    x = np.array([r[numeric[0]] for r in table.rows], dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    for i in numeric[1:]:
        ax.plot(x, [r[i] for r in table.rows], ".", ms=1, label=table.header[i])
    ax.set_xlabel(table.header[numeric[0]])
    ax.legend()
    fig.savefig(path.with_suffix(".svg"), metadata={"Date": None})
    plt.close(fig)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg, p = _load(args)
        tables = COMMANDS[args.command](args, cfg, p)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for name, table in tables.items():
            table.to_csv(out / name)
            if args.plot:
                _plot(out / name, table)
    except OptomechError as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        if getattr(exc, "field", None):
            err["field"] = exc.field
        print(json.dumps(err), file=sys.stderr)
        return EXIT_ERROR
    return 0


if __name__ == "__main__":
    sys.exit(main())

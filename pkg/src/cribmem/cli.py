"""Command-line front end: parameter sweeps exported as CSV or JSON.

Commands
    sweep-optimal   (d0, gamma) -> maximal efficiency over all input modes
    sweep-gaussian  (d0, gamma) -> best Gaussian mode (t_c*, t_w*, eta*)
    gaussian-map    (t_c, t_w) -> eta surface at one (d0, gamma)
    modes           sampled optimal input-mode shapes
    perturbative    broadening-stage efficiency, closed form vs numeric
    transmission    unbroadened intensity transmission spectrum

Output is CSV (default) or JSON; a leading comment line records every
resolved setting so runs are reproducible.  Standard output is reserved for
data when the output path is "-"; progress goes to standard error.  Exit
codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys


def _pin_blas_threads() -> None:
    """Pin BLAS to one thread before numpy is imported.

    Parallelism lives at the sweep-point process level; single-threaded BLAS
    in every worker avoids oversubscription and makes --threads 1 runs
    byte-reproducible.
    """
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, "1")


EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

_COMMANDS = ("sweep-optimal", "sweep-gaussian", "gaussian-map", "modes",
             "perturbative", "transmission")

_COLUMNS = {
    "sweep-optimal": ("d0", "gamma_rel", "eta_max"),
    "sweep-gaussian": ("d0", "gamma_rel", "t_c_opt", "t_w_opt", "eta_gauss"),
    "gaussian-map": ("d0", "gamma_rel", "t_c", "t_w", "eta"),
    "modes": ("d0", "gamma_rel", "t", "mode_re", "mode_im", "mode_abs"),
    "perturbative": ("gamma_rel", "eta_eq_closed", "eta_numeric"),
    "transmission": ("omega_rel", "transmission"),
}


def _parse_float_list(text: str) -> list[float]:
    vals = [float(tok) for tok in text.replace(",", " ").split()]
    if not vals:
        raise ValueError("empty list")
    return vals


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cribmem",
        description="Storage-and-retrieval efficiency of a transverse-CRIB "
                    "two-level quantum memory.",
    )
    parser.add_argument("command", choices=_COMMANDS)
    parser.add_argument("--config", help="JSON file with the same keys as the flags")
    parser.add_argument("--out", default="-", help="output path, '-' for stdout")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--d0", help="comma-separated optical depths")
    parser.add_argument("--gamma", help="comma-separated controlled widths gamma/mu")
    parser.add_argument("--grid-k", type=int, dest="grid_k")
    parser.add_argument("--grid-n", type=int, dest="grid_n")
    parser.add_argument("--extent", type=float)
    parser.add_argument("--quad-level", type=int, dest="quad_level")
    parser.add_argument("--contour-nodes", type=int, dest="contour_nodes")
    parser.add_argument("--seed", type=int, help="extra optimizer starts seed")
    parser.add_argument("--taud", type=float, help="broadening duration (perturbative)")
    parser.add_argument("--omega", help="comma-separated omega/mu (transmission)")
    parser.add_argument("--tc-points", type=int, dest="tc_points")
    parser.add_argument("--tw-points", type=int, dest="tw_points")
    return parser


_DEFAULTS = {
    "d0": [25.0, 50.0, 100.0],
    "gamma": list,      # filled below (log-spaced)
    "grid_k": 33,
    "grid_n": 33,
    "extent": 5.0,
    "quad_level": 6,
    "contour_nodes": 32,
    "threads": 1,
    "format": "csv",
    "out": "-",
    "seed": None,
    "taud": 1.0,
    "omega": None,
    "tc_points": 25,
    "tw_points": 20,
}


def resolve_config(args: argparse.Namespace) -> dict:
    import numpy as np

    cfg = dict(_DEFAULTS)
    cfg["gamma"] = [float(x) for x in np.geomspace(0.1, 10.0, 25)]
    cfg["command"] = args.command
    if args.config:
        with open(args.config) as fh:
            loaded = json.load(fh)
        unknown = set(loaded) - set(cfg)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    for key in ("out", "format", "threads", "grid_k", "grid_n", "extent",
                "quad_level", "contour_nodes", "seed", "taud",
                "tc_points", "tw_points"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if args.d0 is not None:
        cfg["d0"] = _parse_float_list(args.d0)
    if args.gamma is not None:
        cfg["gamma"] = _parse_float_list(args.gamma)
    if args.omega is not None:
        cfg["omega"] = _parse_float_list(args.omega)
    if isinstance(cfg["d0"], (int, float)):
        cfg["d0"] = [float(cfg["d0"])]
    if isinstance(cfg["gamma"], (int, float)):
        cfg["gamma"] = [float(cfg["gamma"])]
    if not cfg["d0"] or not cfg["gamma"]:
        raise ValueError("d0 and gamma lists must be non-empty")
    if cfg["threads"] < 1:
        raise ValueError("--threads must be at least 1")
    if cfg["format"] not in ("csv", "json"):
        raise ValueError(f"unknown format {cfg['format']!r}")
    return cfg


def _settings(cfg: dict):
    from cribmem.sweeps import GridSettings

    return GridSettings(k=cfg["grid_k"], n=cfg["grid_n"],
                        extent_sigmas=cfg["extent"],
                        quad_level=cfg["quad_level"],
                        contour_nodes=cfg["contour_nodes"])


def _compute_rows(cfg: dict) -> list[dict]:
    from cribmem import analytic, sweeps
    from cribmem.model import derive_params

    command = cfg["command"]
    settings = _settings(cfg)
    points = [(d0, g) for d0 in cfg["d0"] for g in cfg["gamma"]]

    if command == "sweep-optimal":
        rows = sweeps.run_points(points, settings, threads=cfg["threads"])
        return [{k: r[k] for k in _COLUMNS[command]} for r in rows]

    if command == "sweep-gaussian":
        rows = sweeps.run_points(points, settings, threads=cfg["threads"],
                                 include_gaussian=True, seed=cfg["seed"])
        return [{k: r[k] for k in _COLUMNS[command]} for r in rows]

    if command == "gaussian-map":
        out = []
        for d0, g in points:
            out.extend(sweeps.gaussian_map(d0, g, settings,
                                           cfg["tc_points"], cfg["tw_points"]))
        return out

    if command == "modes":
        rows = sweeps.run_points(points, settings, threads=cfg["threads"],
                                 include_mode=True)
        out = []
        for r in rows:
            for t, m in zip(r["mode_times"], r["mode"]):
                out.append({"d0": r["d0"], "gamma_rel": r["gamma_rel"],
                            "t": float(t), "mode_re": float(m.real),
                            "mode_im": float(m.imag), "mode_abs": float(abs(m))})
        return out

    if command == "perturbative":
        profile = analytic.Profile.flat()
        out = []
        for g in cfg["gamma"]:
            closed = analytic.perturbative_efficiency(profile, g, cfg["taud"]).eta
            numeric = analytic.broadening_stage_efficiency_numeric(
                profile, g, cfg["taud"], n_classes=cfg["grid_n"],
                extent_sigmas=cfg["extent"], contour_nodes=cfg["contour_nodes"])
            out.append({"gamma_rel": g, "eta_eq_closed": closed,
                        "eta_numeric": numeric})
        return out

    if command == "transmission":
        omegas = cfg["omega"]
        out = []
        for d0 in cfg["d0"]:
            params = derive_params(d0, cfg["gamma"][0])
            if omegas is None:
                span = 4.0 * params.gamma0_rel
                omegas_here = [span * (i / 40.0 - 1.0) for i in range(81)]
            else:
                omegas_here = omegas
            for w in omegas_here:
                out.append({"omega_rel": float(w),
                            "transmission": analytic.transmission_spectrum(w, params)})
        return out

    raise ValueError(f"unknown command {command!r}")


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _settings_comment(cfg: dict) -> str:
    keys = ("grid_k", "grid_n", "extent", "quad_level", "contour_nodes",
            "threads", "seed", "taud")
    parts = [f"{k}={cfg[k]}" for k in keys]
    parts.append("d0=" + "|".join(_fmt(x) for x in cfg["d0"]))
    parts.append("gamma=" + "|".join(_fmt(x) for x in cfg["gamma"]))
    return f"# cribmem {cfg['command']} " + " ".join(parts)


def _emit(cfg: dict, rows: list[dict]) -> None:
    columns = _COLUMNS[cfg["command"]]
    if cfg["format"] == "csv":
        lines = [_settings_comment(cfg), ",".join(columns)]
        lines += [",".join(_fmt(row[c]) for c in columns) for row in rows]
        text = "\n".join(lines) + "\n"
    else:
        payload = {
            "command": cfg["command"],
            "settings": {k: cfg[k] for k in
                         ("grid_k", "grid_n", "extent", "quad_level",
                          "contour_nodes", "threads", "seed", "taud",
                          "d0", "gamma")},
            "rows": [{c: row[c] for c in columns} for row in rows],
        }
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if cfg["out"] == "-":
        sys.stdout.write(text)
    else:
        with open(cfg["out"], "w") as fh:
            fh.write(text)


def run(cfg: dict) -> int:
    from cribmem.errors import NumericsError

    try:
        rows = _compute_rows(cfg)
    except NumericsError as exc:
        print(f"cribmem: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"cribmem: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _emit(cfg, rows)
    return EXIT_OK


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    _pin_blas_threads()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else 0
    try:
        cfg = resolve_config(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"cribmem: configuration error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())

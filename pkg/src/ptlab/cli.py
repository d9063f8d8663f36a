"""Command-line entry point.

Exit status: 0 success, 1 configuration or I/O error, 2 numerical failure,
3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, IoError, NumericalError, PTLabError
from .operators import (
    EPS_EIG,
    EPS_EP,
    EPS_MAT,
    ModelParams,
    Normalization,
    Regime,
    eigensystem,
    symmetry_operators,
)
from .report import SweepSpec, Tolerances, emit_portrait, figures, load_config, run_sweep
from .verify import DEFAULT_D, DEFAULT_R, DEFAULT_THETAS, default_grid, verify

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VERIFY = 0, 1, 2, 3

log = logging.getLogger("ptlab")


def _complex_json(z) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def _matrix_json(a) -> list:
    return [[_complex_json(x) for x in row] for row in np.asarray(a)]


def _params(args, cfg: dict) -> ModelParams:
    values = {k: cfg.get(k) for k in ("r", "d", "theta")}
    for k in values:
        if getattr(args, k, None) is not None:
            values[k] = getattr(args, k)
    missing = [k for k, v in values.items() if v is None]
    if missing:
        raise ConfigError(f"missing model parameters: {missing}")
    try:
        return ModelParams(float(values["r"]), float(values["d"]), float(values["theta"]), eps_ep=args.tol_ep)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _emit(data: dict, out: Path | None, filename: str) -> None:
    text = json.dumps(data, indent=2, sort_keys=True)
    if out is None:
        print(text)
        return
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / filename).write_text(text + "\n")
    except OSError as exc:
        raise IoError(str(exc)) from exc
    print(f"wrote {out / filename}")


def cmd_eigs(args, cfg) -> int:
    p = _params(args, cfg)
    data = {"params": {"r": p.r, "d": p.d, "theta": p.theta}, "regime": p.regime.value,
            "disc": p.disc, "gain": p.gain}
    sd = eigensystem(p, Normalization(args.norm)) if p.regime is not Regime.EXCEPTIONAL_POINT else None
    if sd is None:
        data["note"] = "eigenvectors coalesce at the exceptional point"
        data["energies"] = [_complex_json(p.r * math.cos(p.theta))] * 2
    else:
        data["energies"] = [_complex_json(sd.e_plus), _complex_json(sd.e_minus)]
        data["eigenvectors"] = {"plus": [_complex_json(x) for x in sd.v_plus],
                                "minus": [_complex_json(x) for x in sd.v_minus],
                                "normalization": sd.normalization.value}
        ops = symmetry_operators(p)
        data["operators"] = {
            "c": _matrix_json(ops.c_op), "metric": _matrix_json(ops.metric),
            "dyson": _matrix_json(ops.dyson), "isospectral_h": _matrix_json(ops.iso_h),
        }
    _emit(data, args.out, "eigs.json")
    return EXIT_OK


def cmd_portrait(args, cfg) -> int:
    p = _params(args, cfg)
    summary = emit_portrait(p, args.grid, args.out or Path("."), name=args.name, svg=args.svg)
    print(json.dumps({"regime": summary["regime"], "stationary_points": summary["stationary_points"],
                      "files": summary["files"]}, indent=2, sort_keys=True))
    return EXIT_OK


def _tolerances(args) -> Tolerances:
    return Tolerances(ep=args.tol_ep, mat=args.tol_mat, eig=args.tol_eig)


def _report_sweep(summary: dict, fatal: bool = False) -> int:
    """Print the written files; ``fatal`` turns any failed angle into exit status 2."""
    failed = [(stem, i["theta"], i["error"]) for stem, infos in summary["thetas"].items()
              for i in infos if i["status"] != "ok"]
    for stem, theta, err in failed:
        log.warning("%s: theta=%.17g failed: %s", stem, theta, err)
    print(json.dumps({"files": sorted(summary["files"]), "failed_thetas": len(failed)}, sort_keys=True))
    if fatal and failed:
        print(f"numerical failure: {failed[0][2]}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_evolve(args, cfg) -> int:
    p = _params(args, cfg)
    data = {
        "r": p.r, "d": p.d, "theta_values": [p.theta], "t_max": args.t_max, "samples": args.samples,
        "initial_state": cfg.get("initial_state", args.initial),
        "formalisms": cfg.get("formalisms", [args.formalism]),
    }
    if "alphas" in cfg:
        data["alphas"] = cfg["alphas"]
    spec = SweepSpec.from_dict(data)
    summary = run_sweep(spec, args.out or Path("."), name=args.name, threads=1, tol=_tolerances(args))
    return _report_sweep(summary, fatal=True)


def cmd_sweep(args, cfg) -> int:
    if not cfg:
        raise ConfigError("sweep needs --config <file>")
    spec = SweepSpec.from_dict(cfg)
    summary = run_sweep(spec, args.out or Path("."), name=args.name, threads=args.threads, tol=_tolerances(args))
    return _report_sweep(summary)


def cmd_figures(args, cfg) -> int:
    out = args.out or Path(".")
    result = figures(args.number, out, threads=args.threads, tol=_tolerances(args), svg=args.svg)
    if "thetas" in result:
        return _report_sweep(result)
    print(f"wrote portrait data for figure {args.number} to {out}")
    return EXIT_OK


def cmd_verify(args, cfg) -> int:
    r = args.r if args.r is not None else cfg.get("r", DEFAULT_R)
    ds = args.d_values or cfg.get("d_values", list(DEFAULT_D))
    thetas = args.theta_values or cfg.get("theta_values", list(DEFAULT_THETAS))
    try:
        points = default_grid(float(r), [float(d) for d in ds], [float(t) for t in thetas], eps_ep=args.tol_ep)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    report = verify(points, tol=args.tol_mat, seed=args.seed, tol_eig=args.tol_eig)
    for res in report["results"]:
        if args.verbose or res["status"] in ("fail", "xfail", "skip"):
            value = "" if res["value"] is None else f" value={res['value']:.3g} threshold={res['threshold']:.1g}"
            note = f" ({res['note']})" if res["note"] else ""
            print(f"{res['status'].upper():5s} {res['check']} r={res['r']} d={res['d']} "
                  f"theta={res['theta']}{value}{note}")
    print("summary: " + ", ".join(f"{k}={v}" for k, v in report["counts"].items()))
    if args.out is not None:
        _emit(report, args.out, "verify.json")
    return EXIT_OK if report["ok"] else EXIT_VERIFY


GLOBAL_DEFAULTS = {
    "config": None, "out": None, "tol_ep": EPS_EP, "tol_mat": EPS_MAT, "tol_eig": EPS_EIG,
    "threads": 1, "verbose": False,
}


def _global_flags() -> argparse.ArgumentParser:
    # defaults are suppressed so a flag given after the verb does not get
    # clobbered by the subparser; main() fills in GLOBAL_DEFAULTS afterwards
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", type=Path, help="JSON configuration file")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--tol-ep", type=float, help=f"|disc| below which a point is an EP (default {EPS_EP:g})")
    common.add_argument("--tol-mat", type=float, help=f"matrix identity tolerance (default {EPS_MAT:g})")
    common.add_argument("--tol-eig", type=float, help=f"eigen-residual tolerance (default {EPS_EIG:g})")
    common.add_argument("--threads", type=int, help="worker threads for sweeps (default 1)")
    common.add_argument("-v", "--verbose", action="store_true")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags()
    ap = argparse.ArgumentParser(prog="ptlab", description="Two-level PT-symmetric model toolkit",
                                 parents=[common])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="verb", required=True)
    add = lambda *a, **kw: sub.add_parser(*a, parents=[common], **kw)  # noqa: E731

    def model_args(sp, need_theta=True):
        sp.add_argument("--r", type=float)
        sp.add_argument("--d", type=float)
        if need_theta:
            sp.add_argument("--theta", type=float)

    sp = add("eigs", help="spectrum, eigenvectors and symmetry operators")
    model_args(sp)
    sp.add_argument("--norm", choices=[n.value for n in Normalization], default="hermitian")
    sp.set_defaults(func=cmd_eigs)

    sp = add("portrait", help="polarization flow field and fixed points")
    model_args(sp)
    sp.add_argument("--grid", type=int, default=21)
    sp.add_argument("--svg", action="store_true")
    sp.add_argument("--name", default="portrait")
    sp.set_defaults(func=cmd_portrait)

    sp = add("evolve", help="density evolution at a single angle")
    model_args(sp)
    sp.add_argument("--formalism", default="hermitian_adjoint",
                    choices=["hermitian_adjoint", "biorthogonal", "isospectral"])
    sp.add_argument("--initial", default="ket0", choices=["ket0", "maximally_mixed", "biorthogonal_mixed"])
    sp.add_argument("--t-max", type=float, default=20.0)
    sp.add_argument("--samples", type=int, default=201)
    sp.add_argument("--name", default="evolve")
    sp.set_defaults(func=cmd_evolve)

    sp = add("sweep", help="parameter sweep from --config")
    sp.add_argument("--name", default="sweep")
    sp.set_defaults(func=cmd_sweep)

    sp = add("figures", help="data behind a figure preset")
    sp.add_argument("number", type=int, choices=range(1, 7))
    sp.add_argument("--svg", action="store_true")
    sp.set_defaults(func=cmd_figures)

    sp = add("verify", help="invariant suite over a parameter grid")
    sp.add_argument("--r", type=float)
    sp.add_argument("--d", dest="d_values", type=float, nargs="+")
    sp.add_argument("--theta", dest="theta_values", type=float, nargs="+")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    for key, value in GLOBAL_DEFAULTS.items():
        if not hasattr(args, key):
            setattr(args, key, value)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        cfg = load_config(args.config) if args.config else {}
        if not isinstance(cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        return args.func(args, cfg)
    except (ConfigError, IoError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (PTLabError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

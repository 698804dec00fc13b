"""Command-line driver: config parsing, experiment orchestration, manifests.

Subcommands: ``preprocess | estimate | neutralize | synthesize | perturb |
forward``.  Every run writes its artifacts into one output directory together
with an append-only JSONL manifest (config echo, per-iteration records,
output digests, wall time).  Config files are flat INI key/value text with
one section per module; every key has a baked-in default reproducing the
reference setup, so an empty config runs out of the box.

Exit codes: 0 success, 2 config error, 3 I/O error, 4 instability, 5 stall.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import sys
import time as _time
from pathlib import Path

import numpy as np

from . import __version__
from .archive import ArchiveError, load_series, save_series
from .config import PARAM_NAMES, RunConfig
from .control import (ControlSet, MODE_FULL, MODE_PH_ONLY, combine_controls,
                      combine_params, neutralize)
from .forward import InstabilityError, ParamSet, solve_forward
from .adjoint import solve_adjoint
from .grid import Grid2D, TimeGrid
from .imaging import PreprocessParams, export_pgm, import_raster, perturb, preprocess
from .optimizer import pgd_run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_UNSTABLE = 4
EXIT_STALL = 5


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "grid": {"nx": "64", "ny": "64", "hx": "0.1", "hy": "0.1"},
    "time": {"t_final": "10.0", "nt": "100", "scheme": "explicit"},
    "init": {"u1": "0.2", "u2": "0.5"},
    "model": {"gamma_kappa": "0.01", "gamma_delta": "0.001", "gamma_ph": "0.01",
              "theta_init": "0.0"},
    "optimizer": {"lambda": "1e-4", "epsilon": "", "max_iters": "200"},
    "imaging": {"threshold": "otsu", "gaussian_k": "5", "gaussian_s": "1.0",
                "median_k": "3", "open_radius": "1", "out_nx": "64", "out_ny": "64"},
    "control": {"mode": "full", "lambda_xi": "1e-4", "xi1_max": "10.0", "xi2_max": "10.0"},
    "run": {"seed": "0"},
}


def read_config(path: str | None) -> configparser.ConfigParser:
    parser = configparser.ConfigParser()
    parser.read_dict(DEFAULTS)
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            parser.read(p)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config: {exc}") from exc
    return parser


def _getfloat(cp, section, key):
    try:
        return cp.getfloat(section, key)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from exc


def _getint(cp, section, key):
    try:
        return cp.getint(section, key)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from exc


def build_run_config(cp: configparser.ConfigParser, seed: int | None = None) -> RunConfig:
    try:
        grid = Grid2D(nx=_getint(cp, "grid", "nx"), ny=_getint(cp, "grid", "ny"),
                      hx=_getfloat(cp, "grid", "hx"), hy=_getfloat(cp, "grid", "hy"))
        tgrid = TimeGrid(t_final=_getfloat(cp, "time", "t_final"), nt=_getint(cp, "time", "nt"))
        lam = {name: _getfloat(cp, "optimizer", f"lambda_{name}")
               if cp.has_option("optimizer", f"lambda_{name}")
               else _getfloat(cp, "optimizer", "lambda")
               for name in PARAM_NAMES}
        eps_raw = cp.get("optimizer", "epsilon").strip()
        cfg = RunConfig(
            grid=grid,
            time=tgrid,
            u1_init=_getfloat(cp, "init", "u1"),
            u2_init=_getfloat(cp, "init", "u2"),
            lam=lam,
            epsilon=float(eps_raw) if eps_raw else None,
            gamma_kappa=_getfloat(cp, "model", "gamma_kappa"),
            gamma_delta=_getfloat(cp, "model", "gamma_delta"),
            gamma_ph=_getfloat(cp, "model", "gamma_ph"),
            theta_init=_getfloat(cp, "model", "theta_init"),
            max_iters=_getint(cp, "optimizer", "max_iters"),
            seed=seed if seed is not None else _getint(cp, "run", "seed"),
        )
    except (ValueError, ConfigError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def build_preprocess_params(cp: configparser.ConfigParser) -> PreprocessParams:
    raw = cp.get("imaging", "threshold").strip().lower()
    if raw in ("", "otsu"):
        threshold = None
    else:
        try:
            threshold = float(raw)
        except ValueError as exc:
            raise ConfigError(f"[imaging] threshold: {exc}") from exc
    return PreprocessParams(
        out_nx=_getint(cp, "imaging", "out_nx"),
        out_ny=_getint(cp, "imaging", "out_ny"),
        threshold=threshold,
        gaussian_k=_getint(cp, "imaging", "gaussian_k"),
        gaussian_s=_getfloat(cp, "imaging", "gaussian_s"),
        median_k=_getint(cp, "imaging", "median_k"),
        open_radius=_getint(cp, "imaging", "open_radius"),
    )


def config_echo(cp: configparser.ConfigParser) -> dict:
    return {section: dict(sorted(cp.items(section))) for section in sorted(cp.sections())}


class Manifest:
    """Append-only JSONL run record."""

    def __init__(self, out_dir: Path, command: str, cp: configparser.ConfigParser, argv):
        self.path = out_dir / "manifest.jsonl"
        self.t0 = _time.monotonic()
        self.append({
            "record": "header",
            "command": command,
            "argv": list(argv),
            "version": __version__,
            "config": config_echo(cp),
            "started_unix": _time.time(),
        })

    def append(self, record: dict) -> None:
        with open(self.path, "a") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")

    def iteration(self, row: dict) -> None:
        self.append({"record": "iteration", **row})

    def inputs(self, paths) -> None:
        digests = {str(p): hashlib.sha256(Path(p).read_bytes()).hexdigest()
                   for p in sorted(str(q) for q in paths)}
        if digests:
            self.append({"record": "inputs", "digests": digests})

    def finish(self, out_dir: Path, files: list[str], status: str) -> None:
        digests = {}
        for name in sorted(files):
            digests[name] = hashlib.sha256((out_dir / name).read_bytes()).hexdigest()
        self.append({
            "record": "outputs",
            "status": status,
            "digests": digests,
            "wall_time_s": _time.monotonic() - self.t0,
        })


def _save_theta(out_dir: Path, theta: ParamSet, grid, tau) -> list[str]:
    names = []
    for name, arr in theta.items():
        fname = f"theta_{name}.pfld"
        save_series(out_dir / fname, arr, grid, tau)
        names.append(fname)
    return names


def _load_theta(theta_dir: str, cfg: RunConfig) -> ParamSet:
    d = Path(theta_dir)
    fields = {}
    for name in PARAM_NAMES:
        path = d / f"theta_{name}.pfld"
        if not path.is_file():
            raise FileNotFoundError(f"missing parameter archive: {path}")
        values, agrid, _ = load_series(path)
        if agrid.shape != cfg.grid.shape:
            raise ConfigError(f"{path}: grid {agrid.shape} does not match config {cfg.grid.shape}")
        fields[name] = values
    return ParamSet(**fields)


def _final_panels(out_dir: Path, traj, target=None) -> list[str]:
    files = []
    export_pgm(traj.u1[-1], out_dir / "tumor-final.pgm")
    files.append("tumor-final.pgm")
    export_pgm(traj.u2[-1], out_dir / "acid-final.pgm")
    files.append("acid-final.pgm")
    if target is not None:
        export_pgm((traj.u1[-1] - target) ** 2, out_dir / "error-map.pgm")
        files.append("error-map.pgm")
    return files


def _load_target(path: str, cfg: RunConfig) -> np.ndarray:
    values, agrid, _ = load_series(path)
    if agrid.shape != cfg.grid.shape:
        raise ConfigError(f"target grid {agrid.shape} does not match config {cfg.grid.shape}")
    return values[-1]


def cmd_preprocess(args, cp) -> int:
    cfg_params = build_preprocess_params(cp)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(out_dir, "preprocess", cp, sys.argv[1:])
    manifest.inputs([args.image])
    img = import_raster(args.image)
    field = preprocess(img, cfg_params)
    grid = Grid2D(nx=cfg_params.out_nx, ny=cfg_params.out_ny,
                  hx=_getfloat(cp, "grid", "hx"), hy=_getfloat(cp, "grid", "hy"))
    save_series(out_dir / "target.pfld", field, grid)
    export_pgm(field, out_dir / "target.pgm")
    manifest.finish(out_dir, ["target.pfld", "target.pgm"], "ok")
    return EXIT_OK


def _scheme(cp) -> str:
    scheme = cp.get("time", "scheme").strip().lower()
    if scheme not in ("explicit", "imex"):
        raise ConfigError(f"[time] scheme must be explicit or imex, got {scheme!r}")
    return scheme


def cmd_forward(args, cp) -> int:
    cfg = build_run_config(cp, args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(out_dir, "forward", cp, sys.argv[1:])
    if args.theta:
        manifest.inputs(sorted(Path(args.theta).glob("theta_*.pfld")))
    theta = (_load_theta(args.theta, cfg) if args.theta
             else ParamSet.constant(cfg.grid, cfg.time.nt, cfg.theta_inits()).project())
    traj = solve_forward(theta, cfg, scheme=_scheme(cp))
    save_series(out_dir / "u1.pfld", traj.u1, cfg.grid, cfg.time.tau)
    save_series(out_dir / "u2.pfld", traj.u2, cfg.grid, cfg.time.tau)
    files = ["u1.pfld", "u2.pfld"] + _final_panels(out_dir, traj)
    manifest.finish(out_dir, files, "ok")
    return EXIT_OK


def cmd_estimate(args, cp) -> int:
    cfg = build_run_config(cp, args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(out_dir, "estimate", cp, sys.argv[1:])
    manifest.inputs([args.target])
    target = _load_target(args.target, cfg)
    result = pgd_run(target, cfg, on_iterate=manifest.iteration)
    files = _save_theta(out_dir, result.theta, cfg.grid, cfg.time.tau)
    save_series(out_dir / "u1.pfld", result.traj.u1, cfg.grid, cfg.time.tau)
    save_series(out_dir / "u2.pfld", result.traj.u2, cfg.grid, cfg.time.tau)
    adj = solve_adjoint(result.traj, result.theta, target, cfg)
    save_series(out_dir / "p1.pfld", adj.p1, cfg.grid, cfg.time.tau)
    save_series(out_dir / "p2.pfld", adj.p2, cfg.grid, cfg.time.tau)
    files += ["u1.pfld", "u2.pfld", "p1.pfld", "p2.pfld"]
    files += _final_panels(out_dir, result.traj, target)
    status = "stalled" if result.stalled else ("converged" if result.converged else "max_iters")
    manifest.finish(out_dir, files, status)
    return EXIT_STALL if result.stalled else EXIT_OK


def cmd_neutralize(args, cp) -> int:
    cfg = build_run_config(cp, args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(out_dir, "neutralize", cp, sys.argv[1:])
    manifest.inputs(sorted(Path(args.theta).glob("theta_*.pfld"))
                    + ([args.target] if args.target else []))
    theta = _load_theta(args.theta, cfg)
    if args.target:
        target = _load_target(args.target, cfg)
    else:
        u1_0, _ = cfg.initial_state()
        target = u1_0
    mode = args.mode or cp.get("control", "mode")
    if mode not in (MODE_FULL, MODE_PH_ONLY):
        raise ConfigError(f"unknown control mode {mode!r}")
    lam_xi = _getfloat(cp, "control", "lambda_xi")
    xi0 = ControlSet.zeros(cfg.grid, cfg.time.nt, mode=mode, lam=lam_xi,
                           bounds={"xi1": (0.0, _getfloat(cp, "control", "xi1_max")),
                                   "xi2": (-_getfloat(cp, "control", "xi2_max"),
                                           _getfloat(cp, "control", "xi2_max"))})
    result = neutralize(theta, target, cfg, mode=mode, xi0=xi0, lam_xi=lam_xi,
                        on_iterate=manifest.iteration)
    save_series(out_dir / "xi1.pfld", result.xi.xi1, cfg.grid, cfg.time.tau)
    save_series(out_dir / "xi2.pfld", result.xi.xi2, cfg.grid, cfg.time.tau)
    files = ["xi1.pfld", "xi2.pfld"] + _final_panels(out_dir, result.traj, target)
    status = "stalled" if result.stalled else ("converged" if result.converged else "max_iters")
    manifest.finish(out_dir, files, status)
    return EXIT_STALL if result.stalled else EXIT_OK


def cmd_synthesize(args, cp) -> int:
    cfg = build_run_config(cp, args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(out_dir, "synthesize", cp, sys.argv[1:])
    manifest.inputs([p for d in args.theta for p in sorted(Path(d).glob("theta_*.pfld"))])
    thetas = [_load_theta(d, cfg) for d in args.theta]
    if args.weights:
        weights = [float(w) for w in args.weights.split(",")]
        if len(weights) != len(thetas):
            raise ConfigError("number of weights must match number of theta dirs")
    else:
        weights = [1.0 / len(thetas)] * len(thetas)

    combined = thetas[0]
    if len(thetas) == 1:
        combined = ParamSet(**{n: weights[0] * combined.component(n) for n in PARAM_NAMES},
                            bounds=dict(combined.bounds)).project()
    else:
        acc_w = weights[0]
        for th, w in zip(thetas[1:], weights[1:]):
            combined = combine_params(combined, th, (acc_w / (acc_w + w), w / (acc_w + w)))
            acc_w += w
    manifest.append({"record": "synthesis", "sources": list(args.theta), "weights": weights})

    xi = None
    if args.xi:
        controls = []
        for d in args.xi:
            xd = Path(d)
            xi1, _, _ = load_series(xd / "xi1.pfld")
            xi2, _, _ = load_series(xd / "xi2.pfld")
            controls.append(ControlSet(xi1=xi1, xi2=xi2))
        xi = controls[0]
        for other in controls[1:]:
            xi = combine_controls(xi, other)
        traj = solve_forward(combined, cfg, xi=xi, scheme=_scheme(cp))
    else:
        traj = solve_forward(combined, cfg, scheme=_scheme(cp))

    files = _save_theta(out_dir, combined, cfg.grid, cfg.time.tau)
    save_series(out_dir / "u1.pfld", traj.u1, cfg.grid, cfg.time.tau)
    save_series(out_dir / "u2.pfld", traj.u2, cfg.grid, cfg.time.tau)
    files += ["u1.pfld", "u2.pfld"] + _final_panels(out_dir, traj)
    if xi is not None:
        save_series(out_dir / "xi1.pfld", xi.xi1, cfg.grid, cfg.time.tau)
        save_series(out_dir / "xi2.pfld", xi.xi2, cfg.grid, cfg.time.tau)
        files += ["xi1.pfld", "xi2.pfld"]
    manifest.finish(out_dir, files, "ok")
    return EXIT_OK


def cmd_perturb(args, cp) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(out_dir, "perturb", cp, sys.argv[1:])
    manifest.inputs([args.target])
    values, grid, tau = load_series(args.target)
    field = perturb(values[-1], args.kernel, args.std, args.factor)
    new_grid = Grid2D(nx=field.shape[1], ny=field.shape[0],
                      hx=grid.hx * args.factor, hy=grid.hy * args.factor)
    save_series(out_dir / "perturbed.pfld", field, new_grid, tau)
    export_pgm(field, out_dir / "perturbed.pgm")
    manifest.finish(out_dir, ["perturbed.pfld", "perturbed.pgm"], "ok")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="palisade",
                                     description="Acid-mediated tumor pattern estimation and control")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="INI config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override [run] seed")

    p = sub.add_parser("preprocess", help="raster image to density field")
    common(p)
    p.add_argument("image", help="input PGM/PPM image")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("forward", help="run the state model")
    common(p)
    p.add_argument("--theta", default=None, help="directory with theta_*.pfld archives")
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("estimate", help="recover parameter fields for a target")
    common(p)
    p.add_argument("target", help="target density archive (PFLD)")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("neutralize", help="compute a pattern-neutralizing control")
    common(p)
    p.add_argument("--theta", required=True, help="directory with theta_*.pfld archives")
    p.add_argument("--target", default=None, help="neutral density archive (default: uniform init)")
    p.add_argument("--mode", choices=[MODE_FULL, MODE_PH_ONLY], default=None)
    p.set_defaults(func=cmd_neutralize)

    p = sub.add_parser("synthesize", help="combine parameter sets and simulate")
    common(p)
    p.add_argument("--theta", action="append", required=True, help="theta directory (repeatable)")
    p.add_argument("--weights", default=None, help="comma-separated combination weights")
    p.add_argument("--xi", action="append", default=None, help="control directory (repeatable)")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("perturb", help="downsample and smooth a target archive")
    common(p)
    p.add_argument("target", help="target density archive (PFLD)")
    p.add_argument("--kernel", type=int, default=5, help="Gaussian kernel size (odd)")
    p.add_argument("--std", type=float, default=1.0, help="Gaussian standard deviation")
    p.add_argument("--factor", type=int, default=1, help="downsampling factor")
    p.set_defaults(func=cmd_perturb)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cp = read_config(args.config)
        return args.func(args, cp)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InstabilityError as exc:
        print(f"instability: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except ArchiveError as exc:
        print(f"archive error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

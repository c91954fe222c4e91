"""Batch front-end: ``restriction-lab {eval,solve,phase,accept}``.

Settings come from an optional JSON config file; every command-line flag
overrides the file, and the effective configuration is echoed into each
report.  Exit codes: 0 success, 2 invalid configuration, 3 solver did not
converge, 4 acceptance failure.
"""

from __future__ import annotations

import argparse
import contextlib
import datetime as _dt
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .convolution import calibrate_n_circle
from .functional import functional_report, lambda_oracle
from .harmonics import (SphereField, harmonic_field, read_spectrum_csv, synthesize,
                        write_spectrum_csv)
from .phase import fit_character, modulate
from .quadrature import build_ball_grid
from .solver import (Resolution, SolverConfig, contraction_solve, perturbed_constant,
                     power_iterate)

EXIT_OK, EXIT_INVALID, EXIT_NOT_CONVERGED, EXIT_ACCEPT_FAILED = 0, 2, 3, 4
MAX_N_POLAR, MAX_L = 512, 128
THREADS_ENV = "RESTRICTION_LAB_THREADS"

log = logging.getLogger("restriction_lab")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    source: str = "constant"
    resolution: dict = field(default_factory=lambda: asdict(Resolution()))
    solver: dict = field(default_factory=dict)
    seed: int = 0
    refine: bool = False
    oracle: bool = False
    xi_max: float | None = None
    n_xi: int = 128
    out: str | None = None
    out_dir: str | None = None
    dump_spectrum: str | None = None
    threads: int | None = None

    def effective(self) -> dict:
        d = asdict(self)
        d.pop("threads")
        return d


# -- field sources ------------------------------------------------------------

def _floats(text: str, n: int, what: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"malformed {what}: {text!r}") from exc
    if len(vals) != n:
        raise ConfigError(f"{what} needs {n} comma-separated numbers, got {text!r}")
    return vals


def parse_source(source: str, res: Resolution, allow_perturbed: bool = False) -> tuple:
    """Validate a field source without computing anything heavy."""
    if source == "constant":
        return ("constant",)
    kind, _, arg = source.partition(":")
    if kind == "harmonic" and arg:
        l, m = (int(v) for v in _floats(arg, 2, "harmonic index"))
        if l < 0 or abs(m) > l:
            raise ConfigError(f"invalid harmonic index l={l}, m={m}")
        if l > res.L:
            raise ConfigError(f"harmonic degree {l} exceeds band limit L={res.L}")
        return ("harmonic", l, m)
    if kind == "modulated-constant" and arg:
        return ("modulated", tuple(_floats(arg, 3, "frequency")))
    if kind == "perturbed" and arg and allow_perturbed:
        amp = _floats(arg, 1, "amplitude")[0]
        return ("perturbed", amp)
    path = Path(source)
    if path.suffix.lower() == ".csv" or path.exists():
        if not path.is_file():
            raise ConfigError(f"spectrum file not found: {source}")
        try:
            spec = read_spectrum_csv(path)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if 2 * spec.L > min(2 * res.n_polar - 1, res.n_azimuthal - 1):
            raise ConfigError(f"spectrum band limit {spec.L} exceeds the sphere rule")
        return ("spectrum", spec)
    raise ConfigError(f"unknown field source {source!r}")


def build_field(parsed: tuple, res: Resolution, seed: int) -> SphereField:
    q = res.quadrature()
    kind = parsed[0]
    if kind == "constant":
        return SphereField.constant(q)
    if kind == "harmonic":
        return harmonic_field(q, parsed[1], parsed[2])
    if kind == "modulated":
        return modulate(SphereField.constant(q), parsed[1])
    if kind == "perturbed":
        return perturbed_constant(q, res.L, parsed[1], seed)
    return synthesize(parsed[1], q)


# -- configuration ---------------------------------------------------------------

def _check_writable(path: str | None, is_dir: bool = False) -> None:
    if path is None:
        return
    p = Path(path)
    target = p if is_dir and p.exists() else p.parent
    if not target.exists():
        target = target.parent if is_dir else target
    if not target.exists() or not os.access(target, os.W_OK):
        raise ConfigError(f"cannot write to {path}")


def validate(cfg: RunConfig) -> tuple[Resolution, SolverConfig, tuple | None]:
    try:
        res = Resolution(**cfg.resolution)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid resolution: {exc}") from exc
    if res.n_polar > MAX_N_POLAR or res.L > MAX_L:
        raise ConfigError(f"resolution out of range (n_polar <= {MAX_N_POLAR}, L <= {MAX_L})")
    if res.n_polar < 2 or res.n_azimuthal < 4 or res.n_radial < 4:
        raise ConfigError("resolution sizes too small")
    try:
        scfg = SolverConfig(seed=cfg.seed, resolution=res, **cfg.solver)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid solver settings: {exc}") from exc
    if cfg.xi_max is not None and cfg.xi_max <= 0:
        raise ConfigError("xi_max must be positive")
    if cfg.oracle and (cfg.xi_max or 40.0) < 20:
        raise ConfigError("oracle needs xi_max >= 20")
    if cfg.threads is not None and cfg.threads < 1:
        raise ConfigError("threads must be >= 1")
    _check_writable(cfg.out)
    _check_writable(cfg.dump_spectrum)
    _check_writable(cfg.out_dir, is_dir=True)
    parsed = None
    if cfg.command in ("eval", "phase", "solve"):
        parsed = parse_source(cfg.source, res, allow_perturbed=cfg.command == "solve")
    return res, scfg, parsed


def load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data


RES_FLAGS = ("n_polar", "n_azimuthal", "n_radial", "n_circle", "L")
SOLVER_FLAGS = ("max_iters", "tol_residual", "eps_split", "ball_radius_exponent")


def merge_config(args: argparse.Namespace) -> RunConfig:
    data = load_config_file(args.config)
    unknown = set(data) - set(RunConfig.__dataclass_fields__) - {"command"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    data = {k: v for k, v in data.items() if k != "command"}
    cfg = RunConfig(command=args.command, **data)
    resolution = dict(asdict(Resolution()))
    resolution.update(cfg.resolution)
    solver = dict(cfg.solver)
    for name in RES_FLAGS:
        v = getattr(args, name, None)
        if v is not None:
            resolution[name] = v
    for name in SOLVER_FLAGS:
        v = getattr(args, name, None)
        if v is not None:
            solver[name] = v
    cfg.resolution, cfg.solver = resolution, solver
    for name in ("seed", "refine", "oracle", "xi_max", "n_xi", "out", "out_dir",
                 "dump_spectrum", "threads"):
        v = getattr(args, name, None)
        if v is not None and v is not False:
            setattr(cfg, name, v)
    src = getattr(args, "field", None) or getattr(args, "init", None)
    if src is not None:
        cfg.source = src
    if cfg.threads is None and os.environ.get(THREADS_ENV):
        try:
            cfg.threads = int(os.environ[THREADS_ENV])
        except ValueError as exc:
            raise ConfigError(f"{THREADS_ENV} must be an integer") from exc
    return cfg


# -- output ------------------------------------------------------------------

def _envelope(cfg: RunConfig, payload: dict) -> dict:
    return {**payload, "config": cfg.effective(),
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat()}


def _emit(doc: dict, out: str | None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True)
    print(text)
    if out:
        Path(out).write_text(text + "\n")


def _thread_limit(n: int | None):
    if n is None:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=n)


# -- commands -------------------------------------------------------------------

def cmd_eval(cfg: RunConfig, res: Resolution, parsed: tuple) -> int:
    f = build_field(parsed, res, cfg.seed)
    n_circle = calibrate_n_circle(build_ball_grid(res.n_radial, f.quadrature), res.n_circle)
    report = functional_report(f, res.n_radial, n_circle)
    payload = {"field": cfg.source, "report": report.to_dict()}
    if cfg.oracle:
        o = lambda_oracle(f, cfg.xi_max or 40.0, cfg.n_xi)
        payload["lambda_oracle"] = o.value
        payload["oracle_tail_bound"] = o.tail_bound
    if cfg.dump_spectrum:
        write_spectrum_csv(f.spectrum(), cfg.dump_spectrum)
    _emit(_envelope(cfg, payload), cfg.out)
    return EXIT_OK


def cmd_solve(cfg: RunConfig, scfg: SolverConfig, parsed: tuple) -> int:
    res = scfg.resolution
    f0 = build_field(parsed, res, cfg.seed)
    rep = power_iterate(f0, scfg)
    doc = {"power_iteration": rep.to_dict()}
    final = rep
    if cfg.refine:
        refined = contraction_solve(rep.final_field, scfg)
        doc["contraction"] = refined.contraction
        doc["refined"] = {k: v for k, v in refined.to_dict().items() if k != "contraction"}
    doc = _envelope(cfg, doc)
    if cfg.out_dir:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        final.write_history_csv(out / "history.csv")
        write_spectrum_csv(final.final_field.spectrum(), out / "spectrum.csv")
    _emit(doc, cfg.out)
    return EXIT_OK if rep.converged else EXIT_NOT_CONVERGED


def cmd_phase(cfg: RunConfig, res: Resolution, parsed: tuple) -> int:
    f = build_field(parsed, res, cfg.seed)
    fit = fit_character(f, cfg.xi_max or 10.0)
    _emit(_envelope(cfg, {"field": cfg.source, "fit": fit.to_dict()}), cfg.out)
    return EXIT_OK


def cmd_accept(cfg: RunConfig, quick: bool, as_json: bool) -> int:
    from .acceptance import run_acceptance

    results = run_acceptance(quick=quick)
    if as_json:
        print(json.dumps([r.to_dict() for r in results], indent=2, default=float))
    else:
        header = f"{'#':>2}  {'criterion':<42} {'expected':<34} {'tolerance':<18} pass"
        print(header)
        for r in results:
            print(f"{r.number:>2}  {r.name[:42]:<42} {r.expected[:34]:<34} "
                  f"{r.tolerance[:18]:<18} {'yes' if r.passed else 'NO'}")
            print(f"    actual: {r.actual}  [{r.seconds:.1f}s]")
    return EXIT_OK if all(r.passed for r in results) else EXIT_ACCEPT_FAILED


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--threads", type=int, help=f"cap worker threads (env {THREADS_ENV})")
    common.add_argument("--seed", type=int)
    common.add_argument("-v", "--verbose", action="store_true")
    res = argparse.ArgumentParser(add_help=False)
    res.add_argument("--n-polar", dest="n_polar", type=int)
    res.add_argument("--n-azimuthal", dest="n_azimuthal", type=int)
    res.add_argument("--n-radial", dest="n_radial", type=int)
    res.add_argument("--n-circle", dest="n_circle", type=int)
    res.add_argument("--band-limit", "-L", dest="L", type=int)
    res.add_argument("--out", help="also write the JSON report here")

    p = argparse.ArgumentParser(prog="restriction-lab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("eval", parents=[common, res], help="evaluate the functional")
    e.add_argument("--field", help="constant | harmonic:l,m | modulated-constant:x,y,z | spectrum.csv")
    e.add_argument("--oracle", action="store_true", help="add the Fourier-side oracle")
    e.add_argument("--xi-max", dest="xi_max", type=float)
    e.add_argument("--n-xi", dest="n_xi", type=int)
    e.add_argument("--dump-spectrum", dest="dump_spectrum", help="write the field's spectrum CSV")

    s = sub.add_parser("solve", parents=[common, res], help="search for a critical point")
    s.add_argument("--init", help="constant | perturbed:AMP | harmonic:l,m | spectrum.csv")
    s.add_argument("--refine", action="store_true", help="append contraction diagnostics")
    s.add_argument("--out-dir", dest="out_dir", help="write report.json, history.csv, spectrum.csv")
    s.add_argument("--max-iters", dest="max_iters", type=int)
    s.add_argument("--tol", dest="tol_residual", type=float)
    s.add_argument("--eps-split", dest="eps_split", type=float)
    s.add_argument("--ball-radius-exponent", dest="ball_radius_exponent", type=float)

    ph = sub.add_parser("phase", parents=[common, res], help="fit c e^{ix.xi} |f|")
    ph.add_argument("--field")
    ph.add_argument("--xi-max", dest="xi_max", type=float)

    a = sub.add_parser("accept", parents=[common], help="run the acceptance suite")
    a.add_argument("--quick", action="store_true")
    a.add_argument("--json", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = merge_config(args)
        res, scfg, parsed = validate(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    with _thread_limit(cfg.threads):
        if cfg.command == "eval":
            return cmd_eval(cfg, res, parsed)
        if cfg.command == "solve":
            return cmd_solve(cfg, scfg, parsed)
        if cfg.command == "phase":
            return cmd_phase(cfg, res, parsed)
        return cmd_accept(cfg, args.quick, args.json)


if __name__ == "__main__":
    sys.exit(main())

"""Batch front-end: trajectories, fidelity sweeps, calibration, composition.

Numeric results go to CSV; every CSV gets a ``<out>.json`` sidecar with the
config digest and tool version. Exit codes: 0 ok, 2 config error,
3 numeric validation failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from . import spinalg as sa
from .calibration import calibrate_rabi, calibrated_sequence
from .evolution import bloch_trajectory, trajectory_csv
from .fidelity import (
    FidelityModel,
    bath_fidelity,
    bath_overlaps_from_sequence,
    compose_total,
    elementary_fidelity,
    sinc_infidelity,
)
from .oracle import rwa_distance
from .system import (
    KHZ,
    ConfigError,
    DdrfSequence,
    NodeConfig,
    NuclearSpinParams,
    Role,
    load_config_file,
    resonant_apar,
    validate,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
SWEEP_HEADER = ("sweep_param", "value", "fidelity", "infidelity", "model")
SWEEP_PARAMS = ("beta", "betaBar", "aParBar")
RWA_TOLERANCE = 1e-3

INITIAL_STATES = {
    "up": sa.UP,
    "down": sa.DOWN,
    "plus": (sa.DOWN + sa.UP) / math.sqrt(2),
    "minus": (sa.DOWN - sa.UP) / math.sqrt(2),
}


class NumericValidationError(RuntimeError):
    pass


def config_digest(cfg: NodeConfig) -> str:
    blob = json.dumps(dataclasses.asdict(cfg), sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def tuned_sequence(cfg: NodeConfig, target: NuclearSpinParams | None = None) -> DdrfSequence:
    """Sequence for ``target`` (default: the config's), calibrated if needed."""
    target = cfg.target if target is None else target
    base = cfg.sequence
    if cfg.rabi_factor_given is None:
        return calibrated_sequence(target, base)
    seq = DdrfSequence.for_target(
        target,
        n_pulses=base.n_pulses,
        tau_over_tau_l=base.tau / base.tau_l,
        omega_l=base.omega_l,
        varphi=base.varphi,
    )
    return seq.with_rabi_factor(cfg.rabi_factor_given)


def _first(cfg: NodeConfig, role: Role) -> NuclearSpinParams:
    for s in cfg.spins:
        if s.role is role:
            return s
    raise ConfigError(f"config has no spin with role {role.value!r}")


def _swap(cfg: NodeConfig, old: NuclearSpinParams, new: NuclearSpinParams) -> NodeConfig:
    spins = tuple(new if s is old else s for s in cfg.spins)
    return dataclasses.replace(cfg, spins=spins)


def _check_sweep_value(param: str, value: float, omega_l: float):
    if param in ("beta", "betaBar") and not 0.0 <= value < math.pi / 2:
        raise ConfigError(f"{param} value {value!r} outside [0, pi/2)")
    if param == "aParBar" and value * KHZ >= omega_l:
        raise ConfigError(f"aParBar value {value!r} kHz must be below the Larmor frequency")


def _gatefid_point(cfg: NodeConfig, param: str, value: float) -> tuple:
    if param == "beta":
        t = cfg.target
        cfg = _swap(cfg, t, dataclasses.replace(t, beta=value))
    else:
        u = _first(cfg, Role.UNADDRESSED)
        field = "beta" if param == "betaBar" else "a_par"
        cfg = _swap(cfg, u, dataclasses.replace(u, **{field: value if field == "beta" else value * KHZ}))
    seq = tuned_sequence(cfg)
    rep = elementary_fidelity(list(cfg.register), seq)
    return ((param, value, rep.fidelity, rep.infidelity, rep.model.value),)


def _bath_spin(cfg: NodeConfig) -> NuclearSpinParams:
    for role in (Role.BATH, Role.UNADDRESSED):
        for s in cfg.spins:
            if s.role is role:
                return dataclasses.replace(s, role=Role.BATH)
    raise ConfigError("bath sweep needs a bath (or unaddressed) spin in the config")


def _bathfid_point(cfg: NodeConfig, param: str, value: float, seq: DdrfSequence, k: int) -> tuple:
    bath = _bath_spin(cfg)
    if param == "aParBar":
        bath = dataclasses.replace(bath, a_par=value * KHZ)
    elif param == "betaBar":
        bath = dataclasses.replace(bath, beta=value)
    else:
        raise ConfigError("sweep-bathfid supports --param aParBar or betaBar")
    exact = bath_fidelity(k, [bath_overlaps_from_sequence(bath, seq)])
    a_res = resonant_apar(bath.beta, seq.drive_freq, seq.omega_l)
    approx = float(sinc_infidelity(bath.a_par, a_res, seq))
    return (
        (param, value, exact.fidelity, exact.infidelity, exact.model.value),
        (param, value, 1.0 - approx, approx, FidelityModel.SINC_APPROX.value),
    )


def _run_pool(fn, args_list, jobs: int):
    if jobs <= 1:
        return [fn(*a) for a in args_list]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, *zip(*args_list)))


def sweep_rows(kind: str, cfg: NodeConfig, param: str, start: float, stop: float,
               count: int, jobs: int = 1, k: int = 1) -> list[tuple]:
    """Evaluate a sweep; rows come back in parameter order.

    ``k`` is the number of register spins seen by the bath channel
    (bath sweeps only).
    """
    if param not in SWEEP_PARAMS:
        raise ConfigError(f"--param must be one of {SWEEP_PARAMS}")
    if count < 2 or not start < stop:
        raise ConfigError("sweep needs count >= 2 and start < stop")
    values = [float(v) for v in np.linspace(start, stop, count)]
    for v in values:
        _check_sweep_value(param, v, cfg.sequence.omega_l)
    if kind == "gatefid":
        results = _run_pool(_gatefid_point, [(cfg, param, v) for v in values], jobs)
    else:
        seq = tuned_sequence(cfg)
        results = _run_pool(_bathfid_point, [(cfg, param, v, seq, k) for v in values], jobs)
    rows = [row for group in results for row in group]
    for row in rows:
        if not 0.0 <= row[2] <= 1.0:
            raise NumericValidationError(f"fidelity {row[2]!r} outside [0, 1] at {param}={row[1]}")
    return rows


def rows_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for p, v, f, inf, model in rows:
        w.writerow([p, _fmt(v), _fmt(f), _fmt(inf), model])
    return buf.getvalue()


def _emit_text(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _emit_json(payload: dict, out: str | None):
    _emit_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", out)


def _meta(cfg: NodeConfig, command: str) -> dict:
    return {"command": command, "config_digest": config_digest(cfg), "version": __version__}


def _write_sidecar(out: str | None, payload: dict):
    if out is not None:
        _emit_json(payload, out + ".json")


# --- subcommands --------------------------------------------------------------

def cmd_trajectory(args) -> int:
    cfg = load_config_file(args.config)
    try:
        spin = cfg.spin(args.spin)
    except KeyError:
        raise ConfigError(f"unknown spin label {args.spin!r}", args.config) from None
    initial = args.initial or ("up" if spin.role is Role.TARGET else "plus")
    seq = tuned_sequence(cfg)
    traj = bloch_trajectory(spin, seq, INITIAL_STATES[initial], args.branch, args.samples)
    norms = np.linalg.norm(traj.array()[:, 1:], axis=1)
    if np.max(np.abs(norms - 1.0)) > 1e-9:
        raise NumericValidationError("Bloch samples left the unit sphere")
    _emit_text(trajectory_csv(traj), args.out)
    _write_sidecar(args.out, {
        **_meta(cfg, "trajectory"), "spin": spin.label, "branch": args.branch,
        "initial": initial, "rabi_factor": seq.rabi_factor, "final_bloch": list(traj.final),
        "samples": len(traj.samples),
    })
    return EXIT_OK


def _cmd_sweep(kind: str, args) -> int:
    cfg = load_config_file(args.config)
    k = getattr(args, "k", 1)
    if k < 1:
        raise ConfigError("--k must be >= 1")
    rows = sweep_rows(kind, cfg, args.param, args.start, args.stop, args.count, args.jobs, k)
    _emit_text(rows_csv(rows), args.out)
    _write_sidecar(args.out, {
        **_meta(cfg, f"sweep-{kind}"), "param": args.param, "start": args.start,
        "stop": args.stop, "count": args.count, "rows": len(rows),
        **({"k": k} if kind == "bathfid" else {}),
    })
    return EXIT_OK


def cmd_sweep_gatefid(args) -> int:
    return _cmd_sweep("gatefid", args)


def cmd_sweep_bathfid(args) -> int:
    return _cmd_sweep("bathfid", args)


def cmd_calibrate(args) -> int:
    cfg = load_config_file(args.config)
    res = calibrate_rabi(cfg.target, cfg.sequence)
    _emit_json({
        **_meta(cfg, "calibrate"), "factor": res.rabi_factor, "fidelity": res.achieved_fidelity,
        "iterations": res.iterations, "converged": res.converged,
    }, args.out)
    return EXIT_OK


def cmd_total(args) -> int:
    cfg = load_config_file(args.config)
    payload = _meta(cfg, "total")
    if args.f_enn is not None:
        f_enn = args.f_enn
    else:
        seq = tuned_sequence(cfg)
        f_gate = elementary_fidelity(list(cfg.register), seq).fidelity
        f_bath = 1.0
        if cfg.baths:
            overlaps = [bath_overlaps_from_sequence(b, seq) for b in cfg.baths]
            f_bath = bath_fidelity(len(cfg.register), overlaps).fidelity
        f_enn = f_gate * f_bath
        payload.update(f_gate=f_gate, f_bath=f_bath)
    rep = compose_total(cfg.f_ee, [f_enn] * args.p, [f_enn] * args.p, args.p)
    payload.update(p=args.p, f_ee=cfg.f_ee, f_enn=f_enn,
                   fidelity=rep.fidelity, infidelity=rep.infidelity, model=rep.model.value)
    _emit_json(payload, args.out)
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = load_config_file(args.config)
    seq = tuned_sequence(cfg)
    spins = []
    worst = 0.0
    for s in cfg.spins:
        d0, d1 = rwa_distance(s, seq)
        worst = max(worst, d0, d1)
        spins.append({"label": s.label, "branch0": d0, "branch1": d1})
    ok = worst <= RWA_TOLERANCE
    _emit_json({
        **_meta(cfg, "validate"), "warnings": [dataclasses.asdict(w) for w in validate(cfg)],
        "rwa_distance": spins, "max_distance": worst, "tolerance": RWA_TOLERANCE, "passed": ok,
    }, args.out)
    return EXIT_OK if ok else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ddrfsim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="node configuration (TOML)")
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")

    p = sub.add_parser("trajectory", help="Bloch trajectory of one spin as CSV")
    common(p)
    p.add_argument("--spin", required=True, help="spin label")
    p.add_argument("--branch", type=int, choices=(0, 1), default=0)
    p.add_argument("--initial", choices=sorted(INITIAL_STATES))
    p.add_argument("--samples", type=int, default=32, help="samples per segment")
    p.set_defaults(func=cmd_trajectory)

    for name, func, default in (("sweep-gatefid", cmd_sweep_gatefid, "betaBar"),
                                ("sweep-bathfid", cmd_sweep_bathfid, "aParBar")):
        p = sub.add_parser(name, help="fidelity sweep as CSV (aParBar in kHz, betas in rad)")
        common(p)
        p.add_argument("--param", choices=SWEEP_PARAMS, default=default)
        p.add_argument("--start", type=float, required=True)
        p.add_argument("--stop", type=float, required=True)
        p.add_argument("--count", type=int, required=True)
        if name == "sweep-bathfid":
            p.add_argument("--k", type=int, default=1, help="register spins in the bath channel")
        p.set_defaults(func=func)

    p = sub.add_parser("calibrate", help="fit the Rabi correction factor")
    common(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("total", help="compose the multi-pair fidelity")
    common(p)
    p.add_argument("--p", type=int, default=2, help="number of remote pairs")
    p.add_argument("--f-enn", type=float, help="use this elementary fidelity instead of simulating")
    p.set_defaults(func=cmd_total)

    p = sub.add_parser("validate", help="config warnings and RWA-vs-oracle distances")
    common(p)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericValidationError, ArithmeticError) as exc:
        print(f"numeric validation failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

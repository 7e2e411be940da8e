"""Command-line front end: ``python3 -m genlip <command> ...``.

Every command writes its results plus a ``manifest.json`` into ``--out-dir``.
``python3 -m genlip rerun <manifest>`` repeats the recorded run; outputs are
pure functions of the recorded configuration and input files, so a rerun
reproduces them byte for byte.

Exit codes: 0 success, 2 validation error, 3 LMI infeasible, 4 numerical
failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, data_path
from .lipschitz import (
    estimate_gamma_jacobian,
    estimate_gamma_pairwise,
    gamma_f_analytic,
    gamma_f_tilde,
    gamma_h_analytic,
    kappas,
    load_bounds,
)
from .model import build_matrices, derive_constants, load_params, params_to_dict, steady_state
from .observer import (
    Infeasible,
    LMIProblem,
    extract_gain,
    linearize_output,
    necessary_gamma_bound,
    solve_lmi,
    verify_certificate,
)
from .qmc import KINDS, SequenceSpec, generate
from .simulation import (
    InputFileError,
    SimConfig,
    SimulationError,
    error_metrics,
    load_inputs,
    simulate_dse,
    trace_to_csv,
)

EXIT_OK, EXIT_VALIDATION, EXIT_INFEASIBLE, EXIT_NUMERICAL = 0, 2, 3, 4

# observer start offset from the plant state when --xhat0 is not given
DEFAULT_PERTURBATION = (0.1, 0.5, 0.05, -0.05)
# Newton start for the default plant state (angle, speed, e'q, e'd)
STEADY_GUESS = (0.5, 0.0, 1.0, 0.0)


class ValidationError(Exception):
    pass


class NumericalError(Exception):
    pass


class InfeasibleError(Exception):
    def __init__(self, message: str, outputs: dict):
        super().__init__(message)
        self.outputs = outputs


def _example(name: str) -> str:
    return str(data_path(name))


DEFAULTS = {
    "lipschitz analytic": {
        "params": _example("example_params.json"),
        "bounds": _example("example_bounds.json"),
    },
    "lipschitz numeric": {
        "params": _example("example_params.json"),
        "bounds": _example("example_bounds.json"),
        "sampler": "halton",
        "samples": 2000,
        "seed": 0,
        "method": "jacobian",
        "table": False,
        "table_seeds": 10,
    },
    "observer synth": {
        "params": _example("example_params.json"),
        "bounds": _example("example_bounds.json"),
        "inputs": _example("example_inputs.csv"),
        "gamma": "numeric",
        "sampler": "halton",
        "samples": 2000,
        "seed": 0,
        "method": "jacobian",
        "x0": None,
        "u0": None,
        "margin": None,
        "diagnostic": None,
    },
    "dse simulate": {
        "params": _example("example_params.json"),
        "inputs": _example("example_inputs.csv"),
        "gain": None,
        "interpolation": "linear",
        "dt": 1e-3,
        "t_final": 10.0,
        "x0": None,
        "xhat0": None,
        "pmu_decimation": 1,
        "noise_std": 0.0,
        "noise_seed": 0,
        "fraction": 0.01,
    },
    "sample emit": {
        "sampler": "halton",
        "dim": 2,
        "samples": 256,
        "seed": 0,
    },
}

FILE_KEYS = ("params", "bounds", "inputs", "gain")


# ---------------------------------------------------------------- helpers

def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _vector(text, name: str, n: int = 4) -> np.ndarray:
    if isinstance(text, (list, tuple)):
        vals = text
    else:
        vals = str(text).split(",")
    try:
        v = np.array([float(e) for e in vals])
    except ValueError:
        raise ValidationError(f"--{name.replace('_', '-')}: expected {n} comma-separated numbers") from None
    if v.shape != (n,) or not np.all(np.isfinite(v)):
        raise ValidationError(f"--{name.replace('_', '-')}: expected {n} finite numbers, got {len(v)}")
    return v


def _sha256(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _params(cfg):
    p = load_params(cfg["params"])
    return p, derive_constants(p)


def _csv_rows(header, columns) -> str:
    lines = [",".join(header)]
    for row in zip(*columns):
        lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def _estimates(cfg, c, b):
    spec = SequenceSpec(cfg["sampler"], 8, int(cfg["seed"]))
    s = int(cfg["samples"])
    if cfg["method"] == "jacobian":
        return [estimate_gamma_jacobian(t, c, b, spec, s) for t in ("f", "h")]
    if cfg["method"] == "pairwise":
        return [estimate_gamma_pairwise(t, c, b, spec, s) for t in ("f", "h")]
    raise ValidationError(f"--method must be 'jacobian' or 'pairwise', got {cfg['method']!r}")


def _check_choice(cfg, key, choices):
    if cfg[key] not in choices:
        raise ValidationError(f"--{key}: {cfg[key]!r} is not one of {', '.join(choices)}")


# ---------------------------------------------------------------- commands

def cmd_lipschitz_analytic(cfg) -> tuple[dict, str]:
    p, c = _params(cfg)
    b = load_bounds(cfg["bounds"])
    k = kappas(b)
    gf, gh = gamma_f_analytic(c, b), gamma_h_analytic(c, b)
    report = {
        "gamma_f": gf.value,
        "gamma_h": gh.value,
        "gamma_f_tilde": gamma_f_tilde(c, b),
        "kappa_x": k.kx.tolist(),
        "kappa_u": k.ku.tolist(),
        "estimates": [gf.to_record(), gh.to_record()],
    }
    summary = f"gamma_f = {gf.value:.6g}  gamma_h = {gh.value:.6g}  (gamma_f_tilde = {report['gamma_f_tilde']:.6g})"
    return {"analytic.json": _dumps(report)}, summary


def _table(cfg, c, b) -> str:
    """Analytic versus sampled constants for every sampler."""
    s = int(cfg["samples"])
    est = estimate_gamma_jacobian if cfg["method"] == "jacobian" else estimate_gamma_pairwise
    rows = [("analytic", gamma_f_analytic(c, b).value, gamma_h_analytic(c, b).value)]
    for kind in ("random", "sobol", "halton"):
        if kind == "random":
            seeds = range(int(cfg["seed"]), int(cfg["seed"]) + int(cfg["table_seeds"]))
            vf = np.median([est("f", c, b, SequenceSpec(kind, 8, sd), s).value for sd in seeds])
            vh = np.median([est("h", c, b, SequenceSpec(kind, 8, sd), s).value for sd in seeds])
        else:
            spec = SequenceSpec(kind, 8, 0)
            vf, vh = est("f", c, b, spec, s).value, est("h", c, b, spec, s).value
        rows.append((kind, float(vf), float(vh)))
    lines = ["source,gamma_f,gamma_h"] + [f"{r[0]},{r[1]!r},{r[2]!r}" for r in rows]
    return "\n".join(lines) + "\n"


def cmd_lipschitz_numeric(cfg) -> tuple[dict, str]:
    _check_choice(cfg, "sampler", KINDS)
    _check_choice(cfg, "method", ("jacobian", "pairwise"))
    p, c = _params(cfg)
    b = load_bounds(cfg["bounds"])
    est = _estimates(cfg, c, b)
    out = {"numeric.json": _dumps({"estimates": [e.to_record() for e in est]})}
    summary = f"gamma_f ~ {est[0].value:.6g}  gamma_h ~ {est[1].value:.6g}  ({cfg['method']}, {cfg['sampler']}, s={cfg['samples']})"
    if cfg["table"]:
        out["table.csv"] = _table(cfg, c, b)
        summary += "\n" + out["table.csv"].rstrip()
    return out, summary


def _default_state(c, m, u0, given):
    if given is not None:
        return _vector(given, "x0")
    try:
        return steady_state(c, m, u0, STEADY_GUESS)
    except (RuntimeError, np.linalg.LinAlgError) as exc:
        raise NumericalError(f"default plant state: {exc}; pass --x0 explicitly") from None


def _diagnostic_problem(name, margin):
    if name == "toy-stable":
        return LMIProblem(-np.eye(4), np.zeros((2, 4)), 0.0, margin)
    if name == "toy-unstable":
        return LMIProblem(np.eye(4), np.zeros((2, 4)), 0.0, margin)
    raise ValidationError(f"--diagnostic must be 'toy-stable' or 'toy-unstable', got {name!r}")


def cmd_observer_synth(cfg) -> tuple[dict, str]:
    margin = None if cfg["margin"] is None else float(cfg["margin"])
    report = {"diagnostic": cfg["diagnostic"]}
    if cfg["diagnostic"] is not None:
        prob = _diagnostic_problem(cfg["diagnostic"], margin)
        report["gamma_source"] = "diagnostic"
    else:
        p, c = _params(cfg)
        m = build_matrices(c)
        traj = load_inputs(cfg["inputs"])
        u0 = traj.values[0] if cfg["u0"] is None else _vector(cfg["u0"], "u0")
        x0 = _default_state(c, m, u0, cfg["x0"])
        C, _ = linearize_output(c, x0, u0)
        g = cfg["gamma"]
        if g == "analytic":
            gamma = gamma_f_analytic(c, load_bounds(cfg["bounds"])).value
        elif g == "numeric":
            _check_choice(cfg, "sampler", KINDS)
            gamma = _estimates(cfg, c, load_bounds(cfg["bounds"]))[0].value
        else:
            try:
                gamma = float(g)
            except ValueError:
                raise ValidationError(f"--gamma must be 'analytic', 'numeric' or a number, got {g!r}") from None
        prob = LMIProblem(m.A, C, gamma, margin)
        report.update({"gamma_source": str(g), "x0": x0.tolist(), "u0": np.asarray(u0).tolist(), "C": C.tolist()})
    report["gamma_f"] = prob.gamma_f
    report["margin"] = prob.margin
    bound = necessary_gamma_bound(prob.A, prob.C)
    report["necessary_gamma_bound"] = bound if np.isfinite(bound) else None

    res = solve_lmi(prob)
    if isinstance(res, Infeasible):
        report.update({"feasible": False, "best_max_eig": res.best_max_eig,
                       "iterations": res.iterations, "reason": res.reason})
        msg = (
            f"LMI infeasible for gamma_f = {prob.gamma_f:.6g} ({res.reason}); "
            f"no observer gain can satisfy it above gamma_f = {bound:.6g} for this A and C"
        )
        if cfg["diagnostic"] is None and cfg["gamma"] == "analytic":
            msg += "; consider --gamma numeric"
        raise InfeasibleError(msg, {"report.json": _dumps(report)})
    gain = extract_gain(res)
    lam_max, lam_min_p = verify_certificate(prob, res.P, res.Y, res.eta)
    report.update({
        "feasible": True,
        "reverified_max_eig": lam_max,
        "reverified_min_eig_P": lam_min_p,
        "closed_loop_eigs_real": np.linalg.eigvals(prob.A - gain.L @ prob.C).real.tolist(),
    })
    out = {
        "certificate.json": _dumps(res.to_record()),
        "gain.json": _dumps(gain.L.tolist()),
        "report.json": _dumps(report),
    }
    return out, f"feasible: re-verified lambda_max = {lam_max:.6g} (margin {prob.margin:.3g}), gain written"


def _load_gain(path) -> np.ndarray:
    if path is None:
        raise ValidationError("--gain is required")
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ValidationError(f"{path}: gain file not found") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON ({exc})") from None
    if isinstance(raw, dict):
        raw = raw.get("L")
    L = np.array(raw, dtype=float) if raw is not None else np.zeros(0)
    if L.shape != (4, 2) or not np.all(np.isfinite(L)):
        raise ValidationError(f"{path}: gain must be a finite 4x2 matrix")
    return L


def cmd_dse_simulate(cfg) -> tuple[dict, str]:
    _check_choice(cfg, "interpolation", ("linear", "zoh"))
    L = _load_gain(cfg["gain"])
    p, c = _params(cfg)
    m = build_matrices(c)
    traj = load_inputs(cfg["inputs"], cfg["interpolation"])
    x0 = _default_state(c, m, traj.values[0], cfg["x0"])
    if cfg["xhat0"] is None:
        xhat0 = x0 + np.array(DEFAULT_PERTURBATION)
    else:
        xhat0 = _vector(cfg["xhat0"], "xhat0")
    sim = SimConfig(
        dt=float(cfg["dt"]), t_final=float(cfg["t_final"]), x0=x0, xhat0=xhat0,
        pmu_decimation=int(cfg["pmu_decimation"]), noise_std=float(cfg["noise_std"]),
        noise_seed=int(cfg["noise_seed"]),
    )
    trace = simulate_dse(c, m, L, traj, sim)
    metrics = error_metrics(trace, float(cfg["fraction"]))
    out = {"trace.csv": trace_to_csv(trace), "metrics.json": _dumps(metrics)}
    for i in range(4):
        out[f"plot/state_x{i + 1}.csv"] = _csv_rows(
            ("t", f"x{i + 1}", "t", f"xh{i + 1}"),
            (trace.times, trace.plant_states[:, i], trace.times, trace.observer_states[:, i]),
        )
    for i in range(2):
        out[f"plot/output_y{i + 1}.csv"] = _csv_rows(
            ("t", f"y{i + 1}", "t", f"yh{i + 1}"),
            (trace.times, trace.plant_outputs[:, i], trace.times, trace.observer_outputs[:, i]),
        )
    out["plot/error_norm.csv"] = _csv_rows(("t", "err"), (trace.times, trace.error_norm))
    conv = metrics["convergence_time"]
    summary = (
        f"final error {metrics['final_err']:.3e} (initial {trace.error_norm[0]:.3e}); "
        f"convergence time {'none' if conv is None else f'{conv:g} s'}"
    )
    return out, summary


def cmd_sample_emit(cfg) -> tuple[dict, str]:
    _check_choice(cfg, "sampler", KINDS)
    try:
        spec = SequenceSpec(cfg["sampler"], int(cfg["dim"]), int(cfg["seed"]))
        pts = generate(spec, int(cfg["samples"]))
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    header = [f"z{j + 1}" for j in range(spec.dim)]
    return {"points.csv": _csv_rows(header, pts.T)}, f"{len(pts)} {spec.kind} points in dimension {spec.dim}"


COMMANDS = {
    "lipschitz analytic": cmd_lipschitz_analytic,
    "lipschitz numeric": cmd_lipschitz_numeric,
    "observer synth": cmd_observer_synth,
    "dse simulate": cmd_dse_simulate,
    "sample emit": cmd_sample_emit,
}


# ---------------------------------------------------------------- plumbing

def _write(out_dir: Path, files: dict) -> list[str]:
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        path = out_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return sorted(files)


def _manifest(command, cfg, config_file, overrides, outputs) -> dict:
    inputs = {}
    for key in FILE_KEYS:
        if cfg.get(key) is not None and Path(cfg[key]).is_file():
            inputs[key] = {"path": cfg[key], "sha256": _sha256(cfg[key])}
    seeds = {k: cfg[k] for k in ("seed", "noise_seed") if k in cfg}
    return {
        "command": command,
        "config": cfg,
        "config_file": config_file,
        "overrides": overrides,
        "seeds": seeds,
        "inputs": inputs,
        "tool": {"name": "genlip", "version": __version__},
        "outputs": outputs,
    }


def resolve_config(command: str, config_file: dict | None, overrides: dict) -> dict:
    """Defaults, then config-file values, then command-line flags."""
    cfg = dict(DEFAULTS[command])
    for layer, label in ((config_file or {}), "config file"), (overrides, "flag"):
        for key, value in layer.items():
            if key not in cfg:
                raise ValidationError(f"{label} key {key!r} does not apply to '{command}'")
            cfg[key] = value
    for key in FILE_KEYS:
        if cfg.get(key) is not None:
            cfg[key] = str(Path(cfg[key]).resolve())
    return cfg


def execute(command: str, cfg: dict, out_dir, config_file=None, overrides=None) -> int:
    """Run one command and write its outputs; returns the exit code."""
    out_dir = Path(out_dir)
    try:
        files, summary = COMMANDS[command](cfg)
        code = EXIT_OK
    except InfeasibleError as exc:
        files, summary, code = exc.outputs, str(exc), EXIT_INFEASIBLE
    except (ValidationError, InputFileError, KeyError, ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalError, SimulationError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    outputs = _write(out_dir, files)
    manifest = _manifest(command, cfg, config_file, overrides or {}, outputs)
    _write(out_dir, {"manifest.json": _dumps(manifest)})
    print(summary, file=sys.stderr if code else sys.stdout)
    return code


def rerun(manifest_path, out_dir=None) -> int:
    manifest_path = Path(manifest_path)
    try:
        man = json.loads(manifest_path.read_text())
        command, cfg = man["command"], man["config"]
    except (FileNotFoundError, json.JSONDecodeError, KeyError, TypeError) as exc:
        print(f"error: cannot read manifest {manifest_path}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    if command not in COMMANDS:
        print(f"error: unknown command {command!r} in manifest", file=sys.stderr)
        return EXIT_VALIDATION
    for key, rec in man.get("inputs", {}).items():
        if not Path(rec["path"]).is_file() or _sha256(rec["path"]) != rec["sha256"]:
            print(f"error: input {key} ({rec['path']}) is missing or changed since the recorded run", file=sys.stderr)
            return EXIT_VALIDATION
    target = manifest_path.parent if out_dir is None else out_dir
    return execute(command, cfg, target, man.get("config_file"), man.get("overrides"))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="python3 -m genlip", description=__doc__.split("\n")[0])
    top = ap.add_subparsers(dest="group", required=True)

    def common(sp, *flags):
        sp.add_argument("--out-dir", required=True, help="directory for results and manifest.json")
        sp.add_argument("--config", help="JSON file of option values (flags override it)")
        for flag in flags:
            FLAGS[flag](sp)

    lip = top.add_parser("lipschitz", help="Lipschitz constants").add_subparsers(dest="action", required=True)
    common(lip.add_parser("analytic", help="closed-form constants on a bounds box"), "params", "bounds")
    sp = lip.add_parser("numeric", help="sampled estimates on a bounds box")
    common(sp, "params", "bounds", "sampler", "samples", "seed", "method")
    sp.add_argument("--table", action="store_true", default=None, help="also emit an analytic/random/sobol/halton table")
    sp.add_argument("--table-seeds", type=int, help="random seeds whose median enters the table (default 10)")

    obs = top.add_parser("observer", help="observer synthesis").add_subparsers(dest="action", required=True)
    sp = obs.add_parser("synth", help="solve the LMI and write certificate and gain")
    common(sp, "params", "bounds", "inputs", "sampler", "samples", "seed", "method", "x0")
    sp.add_argument("--gamma", help="analytic | numeric | <float> (default numeric)")
    sp.add_argument("--u0", help="input at the linearisation point (default: first input row)")
    sp.add_argument("--margin", type=float, help="strictness margin (default 1e-6 * max(1, ||A||))")
    sp.add_argument("--diagnostic", choices=("toy-stable", "toy-unstable"), help="solve A = -I or +I with C = 0 instead")

    dse = top.add_parser("dse", help="state estimation run").add_subparsers(dest="action", required=True)
    sp = dse.add_parser("simulate", help="co-simulate plant and observer")
    common(sp, "params", "inputs", "x0")
    sp.add_argument("--gain", help="gain JSON written by 'observer synth'")
    sp.add_argument("--dt", type=float)
    sp.add_argument("--t-final", type=float)
    sp.add_argument("--xhat0", help="observer initial state (default x0 + %s)" % (DEFAULT_PERTURBATION,))
    sp.add_argument("--interpolation", choices=("linear", "zoh"))
    sp.add_argument("--pmu-decimation", type=int, help="measurement held for this many steps (default 1)")
    sp.add_argument("--noise-std", type=float, help="Gaussian measurement noise (default 0, off)")
    sp.add_argument("--noise-seed", type=int)
    sp.add_argument("--fraction", type=float, help="convergence threshold as a fraction of the initial error")

    smp = top.add_parser("sample", help="point sequences").add_subparsers(dest="action", required=True)
    sp = smp.add_parser("emit", help="write points as CSV")
    common(sp, "sampler", "samples", "seed")
    sp.add_argument("--dim", type=int)

    rr = top.add_parser("rerun", help="repeat a run from its manifest.json")
    rr.add_argument("manifest")
    rr.add_argument("--out-dir", help="write here instead of next to the manifest")
    return ap


FLAGS = {
    "params": lambda sp: sp.add_argument("--params", help="generator parameter JSON (default: shipped example)"),
    "bounds": lambda sp: sp.add_argument("--bounds", help="bounds box JSON (default: shipped example)"),
    "inputs": lambda sp: sp.add_argument("--inputs", help="input CSV t,Tm,Efd,iR,iI (default: shipped example)"),
    "sampler": lambda sp: sp.add_argument("--sampler", choices=KINDS),
    "samples": lambda sp: sp.add_argument("--samples", type=int),
    "seed": lambda sp: sp.add_argument("--seed", type=int),
    "method": lambda sp: sp.add_argument("--method", choices=("jacobian", "pairwise")),
    "x0": lambda sp: sp.add_argument("--x0", help="plant initial state, 4 comma-separated numbers (default: steady state)"),
}

_NOT_CONFIG = ("group", "action", "out_dir", "config", "manifest")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.group == "rerun":
        return rerun(args.manifest, args.out_dir)
    command = f"{args.group} {args.action}"
    overrides = {k: v for k, v in vars(args).items() if k not in _NOT_CONFIG and v is not None}
    config_file = None
    try:
        if args.config:
            config_file = json.loads(Path(args.config).read_text())
            if not isinstance(config_file, dict):
                raise ValidationError(f"{args.config}: expected a JSON object")
        cfg = resolve_config(command, config_file, overrides)
    except (ValidationError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return execute(command, cfg, args.out_dir, config_file, overrides)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry points.

Every command reads an optional JSON config (``-c run.json``); ``--set
key.sub=value`` overrides single fields (value parsed as JSON, else kept as a
string) and the dedicated flags (``--seed``, ``--out``) override both.
Precedence: flags > ``--set`` > config file > built-in defaults.

Exit codes: 0 success / regular verdict, 1 configuration or input error,
2 solver divergence or uncovered window, 3 hypotheses failed (``diagnose``)
or a failed check (``scan``, ``harmonic --verify``), 4 inconsistency
(hypotheses held but the norm grew).
"""
from __future__ import annotations

import argparse
import contextlib
import copy
import json
import logging
import sys
from pathlib import Path

import numpy as np
import scipy.fft

from . import io
from .analyticity import AnalyticityConstants, estimate_radius_from_spectrum
from .criterion import (
    CriterionParameters,
    PairControls,
    PinnedSource,
    SimulationDriver,
    StoredTrajectory,
    TrajectoryDiverged,
    WindowUncoveredError,
    chain_criterion,
)
from .fields import Grid3, VectorField3, biot_savart, curl, sup_norm
from .harmonic import (
    SlitSet,
    harmonic_measure_fd,
    harmonic_measure_mc,
    random_slit_set,
    solynin_bound,
)
from .scenarios import (
    FilamentSpec,
    shear_mode,
    synthetic_spectrum_field,
    taylor_green,
    vortex_filament_field,
)
from .solver import SolverControls, simulate
from .sparseness import ScanControls, scan_field

logger = logging.getLogger("nsregularity")

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_FAILED, EXIT_INCONSISTENT = 0, 1, 2, 3, 4


class ConfigError(ValueError):
    pass


# --- configuration ---------------------------------------------------------------------

def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(cfg: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"--set expects key=value, got {assignment!r}")
    key, value = assignment.split("=", 1)
    parts = key.split(".")
    node = cfg
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot set {key}: {p} is not a section")
    node[parts[-1]] = _parse_value(value)


def load_config(args) -> dict:
    cfg: dict = {}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file {path} not found")
        try:
            cfg = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    cfg = copy.deepcopy(cfg)
    for assignment in args.set or []:
        apply_override(cfg, assignment)
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        cfg.setdefault("output", {})["dir"] = args.out
    return cfg


def _grid(cfg: dict) -> Grid3:
    g = cfg.get("grid", {})
    try:
        return Grid3(int(g.get("n", 32)), float(g.get("box_length", 2 * np.pi)))
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from exc


def build_field(spec: dict, grid: Grid3 | None, formulation: str, seed: int = 0) -> tuple[VectorField3, float]:
    """Field described by an ``initial``/``field`` section, in the requested formulation.

    Returns the field and its time (nonzero only for snapshots).
    """
    kind = spec.get("kind", "zero")
    time = 0.0
    native = "velocity"
    if kind == "snapshot":
        path = Path(spec["path"])
        if not path.exists():
            raise FileNotFoundError(f"snapshot {path} not found")
        field, header = io.read_snapshot(path)
        native, time = header["formulation"], float(header["time"])
    else:
        if grid is None:
            raise ConfigError("grid section is required")
        if kind == "zero":
            field = VectorField3.zeros(grid)
        elif kind == "taylor_green":
            field = taylor_green(grid, float(spec.get("amplitude", 1.0)))
        elif kind == "shear":
            field = shear_mode(grid, float(spec.get("amplitude", 1.0)), int(spec.get("kappa", 1)))
        elif kind == "synthetic":
            field = synthetic_spectrum_field(grid, float(spec["rho"]), int(spec.get("seed", seed)))
        elif kind == "filaments":
            specs = []
            for f in spec.get("filaments", []):
                f = dict(f)
                if "center" in f:
                    f["center"] = tuple(f["center"])
                peak = f.pop("peak", None)
                specs.append(FilamentSpec.with_peak(peak, **f) if peak is not None else FilamentSpec(**f))
            if not specs:
                raise ConfigError("initial.filaments must list at least one filament")
            field = vortex_filament_field(grid, specs)
            native = "vorticity"
        else:
            raise ConfigError(f"unknown field kind {kind!r}")
    if native != formulation:
        field = curl(field) if formulation == "vorticity" else biot_savart(field)
    return field, time


def _solver_controls(cfg: dict) -> SolverControls:
    s = dict(cfg.get("solver", {}))
    try:
        return SolverControls(**s)
    except TypeError as exc:
        raise ConfigError(f"solver: {exc}") from exc


def _scan_controls(cfg: dict, threads: int) -> ScanControls:
    s = dict(cfg.get("scan", {}))
    s.setdefault("n_jobs", threads)
    try:
        return ScanControls(**s)
    except TypeError as exc:
        raise ConfigError(f"scan: {exc}") from exc


def _output_dir(cfg: dict) -> Path:
    out = Path(cfg.get("output", {}).get("dir", "out"))
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output.dir: cannot create {out}: {exc}") from exc
    return out


def _criterion(cfg: dict) -> tuple[CriterionParameters, dict]:
    c = dict(cfg.get("criterion", {}))
    try:
        params = CriterionParameters(
            delta=float(c.get("delta", 1 / np.sqrt(3))),
            alpha=c.get("alpha"),
            constants=AnalyticityConstants(float(c.get("c0", 2.0)), float(c.get("d0", 2.0))),
            formulation=c.get("formulation", "velocity"),
        )
    except ValueError as exc:
        raise ConfigError(f"criterion: {exc}") from exc
    for key in ("t0", "T_star"):
        if key not in c:
            raise ConfigError(f"criterion.{key} is required")
    if not 0 <= float(c["t0"]) < float(c["T_star"]):
        raise ConfigError("criterion.t0 must lie in [0, T_star)")
    if c.get("case_i_mode", "global") not in ("global", "causal", "off"):
        raise ConfigError("criterion.case_i_mode must be global, causal or off")
    return params, c


# --- commands ----------------------------------------------------------------------------

def cmd_simulate(cfg: dict, threads: int = 1) -> int:
    grid = _grid(cfg)
    controls = _solver_controls(cfg)
    out = _output_dir(cfg)
    initial, _ = build_field(cfg.get("initial", {}), grid, controls.formulation, cfg.get("seed", 0))
    traj = simulate(initial, controls)
    io.write_norm_csv(out / "norms.csv", traj)
    for i, (t, snap) in enumerate(traj.snapshots):
        io.write_snapshot(out / f"snapshot_{i:04d}.json", snap, t, controls.formulation)
    status = "diverged" if traj.diverged else "ok"
    print(io.dumps({"command": "simulate", "status": status, "steps": len(traj.norm_series) - 1,
                    "final": list(traj.norm_series[-1]), "output": str(out)}))
    return EXIT_DIVERGED if traj.diverged else EXIT_OK


def _trajectory_source(cfg: dict, params: CriterionParameters, T_star: float):
    tcfg = cfg.get("trajectory")
    if tcfg is None:
        grid = _grid(cfg)
        solver = dict(cfg.get("solver", {}))
        solver.setdefault("t_end", T_star)
        solver["formulation"] = params.formulation
        try:
            controls = SolverControls(**solver)
        except TypeError as exc:
            raise ConfigError(f"solver: {exc}") from exc
        initial, _ = build_field(cfg.get("initial", {}), grid, params.formulation, cfg.get("seed", 0))
        return SimulationDriver(initial, controls)
    if tcfg.get("kind") == "pinned":
        return PinnedSource(_grid(cfg), T_star, float(tcfg.get("growth", 1.0)), params.formulation)
    paths = tcfg.get("snapshots")
    if not paths:
        raise ConfigError("trajectory.snapshots must list snapshot headers")
    snaps = []
    for p in paths:
        field, time = build_field({"kind": "snapshot", "path": p}, None, params.formulation)
        snaps.append((time, field))
    series = None
    if tcfg.get("norms_csv"):
        path = Path(tcfg["norms_csv"])
        if not path.exists():
            raise FileNotFoundError(f"norm series {path} not found")
        rows = io.read_norm_csv(path)
        series = (rows[:, 0], rows[:, 1])
    return StoredTrajectory(snaps, params.formulation, series)


def cmd_diagnose(cfg: dict, threads: int = 1) -> int:
    params, c = _criterion(cfg)
    scan = _scan_controls(cfg, threads)
    out = _output_dir(cfg)
    T_star, t0 = float(c["T_star"]), float(c["t0"])
    pair_controls = PairControls(
        n_s=int(c.get("n_s", 4)), scan=scan,
        empirical_radius=bool(c.get("empirical_radius", False)),
        norm_slack=float(c.get("norm_slack", 1e-9)),
    )
    source = _trajectory_source(cfg, params, T_star)
    try:
        verdict = chain_criterion(source, t0, T_star, params, pair_controls, c.get("case_i_mode", "global"))
    except TrajectoryDiverged as exc:
        print(f"diagnose: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except WindowUncoveredError as exc:
        print(f"diagnose: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    io.write_json(out / "verdict.json", verdict.to_dict())
    summary = verdict.summary()
    (out / "summary.txt").write_text(summary + "\n")
    print(summary)
    if verdict.regular_verdict:
        return EXIT_OK
    if verdict.terminated_by == "hypotheses_failed":
        return EXIT_FAILED
    if verdict.terminated_by == "trajectory_end":
        t_last = verdict.pairs[-1].s if verdict.pairs else t0
        win = params.window(source.norm_at(t_last), t_last)
        print(f"diagnose: window uncovered: [{win.s_lo:.6g}, {win.s_hi:.6g}] lies past the trajectory end "
              f"t={source.t_end:.6g}", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_INCONSISTENT


def _slit_set(cfg: dict) -> tuple[SlitSet, object]:
    if "lambda" in cfg:
        lam = float(cfg["lambda"])
        return SlitSet.symmetric(lam), lam
    slits = cfg.get("slits", [])
    try:
        K = SlitSet(tuple(tuple(map(float, s)) for s in slits))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"slits: {exc}") from exc
    return K, K.to_list()


def cmd_harmonic(cfg: dict, threads: int = 1) -> int:
    try:
        K, label = _slit_set(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    z = cfg.get("z", [0.0, 0.0])
    z = complex(float(z[0]), float(z[1]))
    methods = cfg.get("methods", ["closed", "mc"])
    seed = int(cfg.get("seed", 0))
    walks = int(cfg.get("walks", 100_000))
    eps = float(cfg.get("eps", 1e-4))

    def emit(method, est, err):
        print(io.dumps({"method": method, "lambda_or_set": label, "z": [z.real, z.imag],
                        "estimate": est, "stderr": err}))

    if "closed" in methods:
        if "lambda" in cfg and z == 0:
            emit("closed", solynin_bound(float(cfg["lambda"])), 0.0)
        elif K.is_empty:
            emit("closed", 0.0, 0.0)
    if "mc" in methods:
        r = harmonic_measure_mc(K, z, walks, eps, seed, n_jobs=threads)
        emit("mc", r.estimate, r.stderr)
    if "fd" in methods:
        emit("fd", harmonic_measure_fd(K, z, int(cfg.get("grid_n", 1024))), None)

    verify = cfg.get("verify")
    if not verify:
        return EXIT_OK
    rng = np.random.default_rng(seed)
    failures = 0
    for lam in verify.get("lambdas", [0.3, 0.6]):
        bound = solynin_bound(lam)
        for i in range(int(verify.get("n_sets", 200))):
            Ki = random_slit_set(lam, rng)
            r = harmonic_measure_mc(Ki, 0j, int(verify.get("walks", 20_000)), eps, seed + i, n_jobs=threads)
            ok = r.estimate >= bound - max(3 * r.stderr, 0.02)
            failures += not ok
            print(io.dumps({"method": "verify", "lambda_or_set": Ki.to_list(), "lambda": lam, "z": [0.0, 0.0],
                            "estimate": r.estimate, "stderr": r.stderr, "bound": bound, "pass": ok}))
    print(io.dumps({"method": "verify-summary", "failures": failures, "pass": failures == 0}))
    return EXIT_OK if failures == 0 else EXIT_FAILED


def cmd_scan(cfg: dict, threads: int = 1) -> int:
    formulation = cfg.get("formulation", "velocity")
    grid = _grid(cfg) if "grid" in cfg else None
    field, _ = build_field(cfg.get("field", {}), grid, formulation, cfg.get("seed", 0))
    norm = sup_norm(field)
    if "threshold" in cfg:
        M = float(cfg["threshold"])
    elif "threshold_factor" in cfg:
        M = float(cfg["threshold_factor"]) * norm
    else:
        raise ConfigError("scan needs threshold or threshold_factor")
    if not M > 0:
        raise ConfigError("threshold must be positive")
    delta = float(cfg.get("delta", 1 / np.sqrt(3)))
    if "r_max" not in cfg:
        raise ConfigError("r_max is required")
    controls = _scan_controls(cfg, threads)
    out = _output_dir(cfg)
    report = scan_field(field, M, delta, float(cfg["r_max"]), controls, scales=cfg.get("scales"))
    io.write_json(out / "sparseness.json", {"threshold": M, "delta": delta, **report.to_dict()})
    if cfg.get("output", {}).get("csv", False):
        report.to_csv(out / "sparseness.csv")
    print(io.dumps({"command": "scan", "all_sparse": report.all_sparse, "worst_fraction": report.worst_fraction}))
    return EXIT_OK if report.all_sparse else EXIT_FAILED


def cmd_scenario(cfg: dict, threads: int = 1) -> int:
    grid = _grid(cfg)
    formulation = cfg.get("formulation", "velocity")
    out = _output_dir(cfg)
    field, _ = build_field(cfg.get("initial", {}), grid, formulation, cfg.get("seed", 0))
    name = cfg.get("output", {}).get("name", "scenario")
    path = io.write_snapshot(out / f"{name}.json", field, 0.0, formulation)
    print(io.dumps({"command": "scenario", "snapshot": str(path), "sup_norm": sup_norm(field)}))
    return EXIT_OK


def cmd_radius(cfg: dict, threads: int = 1) -> int:
    grid = _grid(cfg) if "grid" in cfg else None
    field, _ = build_field(cfg.get("field", {}), grid, cfg.get("formulation", "velocity"), cfg.get("seed", 0))
    fit_range = cfg.get("fit_range")
    fit = estimate_radius_from_spectrum(field, tuple(fit_range) if fit_range else None, return_fit=True)
    out_cfg = cfg.get("output", {})
    if out_cfg.get("csv"):
        out = _output_dir(cfg)
        fit.to_csv(out / "spectrum.csv")
    radius = None if np.isinf(fit.radius) else fit.radius
    print(io.dumps({"command": "radius", "radius": radius, "band_limited": radius is None}))
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "diagnose": cmd_diagnose,
    "harmonic": cmd_harmonic,
    "scan": cmd_scan,
    "scenario": cmd_scenario,
    "radius": cmd_radius,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nsregularity", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("-c", "--config", help="JSON config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config field")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--threads", type=int, default=1, help="cap on internal parallelism")
    sub.choices["harmonic"].add_argument("--verify", action="store_true", help="run the random extremality suite")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args)
        if getattr(args, "verify", False):
            cfg.setdefault("verify", {})
        threads = max(1, int(args.threads))
        ctx = scipy.fft.set_workers(threads) if threads > 1 else contextlib.nullcontext()
        with ctx:
            return COMMANDS[args.command](cfg, threads)
    except (ConfigError, ValueError, TypeError, KeyError, FileNotFoundError) as exc:
        print(f"{args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

"""Experiment runner: solve, assess and record benchmark problems.

Subcommands::

    flexcolloc run    --problem bryson-denham --mode c --degree 3 --intervals 3 --flex 0.5
    flexcolloc sweep  --problem cart-pole --mode b --axis degree --values 4,6,8
    flexcolloc assess results.json

Settings may also come from an INI file (``--config``, section
``[experiment]``, keys named like the long flags); flags win. The
``FLEXCOLLOC_LOG`` environment variable sets the log level.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .assessment import assess
from .nlp import NlpSolution, solve
from .problems import get_problem, sine_approximation
from .transcription import ConstraintMode, FlexibleMesh, Trajectory, assemble

log = logging.getLogger("flexcolloc")

SAMPLES_PER_INTERVAL = 200
# Attempts drawing a random admissible mesh before giving up on a start.
MESH_DRAWS = 200


@dataclass
class ExperimentConfig:
    """One solve. ``flex`` is a single value or one value per interval."""

    problem: str = "bryson-denham"
    mode: str = "c"
    degree: int = 3
    intervals: int = 3
    flex: object = 0.5
    tol: float = 1e-8
    max_iter: int = 1000
    seed: int = 0
    starts: int = 3
    constrained: bool = True

    def __post_init__(self):
        self.mode = ConstraintMode.parse(self.mode).value
        if self.degree < 1:
            raise ValueError("degree must be >= 1")
        if self.intervals < 1:
            raise ValueError("intervals must be >= 1")
        phi = np.atleast_1d(np.asarray(self.flex, dtype=float))
        if np.any(phi < 0) or np.any(phi >= 1):
            raise ValueError("flexibility must lie in [0, 1)")
        if phi.size not in (1, self.intervals):
            raise ValueError(f"need 1 or {self.intervals} flexibility values, got {phi.size}")
        self.flex = float(phi[0]) if phi.size == 1 else [float(v) for v in phi]

    def phi(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.flex, dtype=float), (self.intervals,)).copy()


@dataclass
class ResultRecord:
    """Config echo, solver outcome and assessment of one run."""

    config: dict
    status: str
    iterations: int
    wall_time: float
    cost: Optional[float] = None
    inequality_violation: Optional[float] = None
    dynamic_violation: Optional[float] = None
    l2_error: Optional[float] = None
    breakpoints: list = field(default_factory=list)
    interval_cost: list = field(default_factory=list)
    interval_inequality_violation: list = field(default_factory=list)
    interval_dynamic_violation: list = field(default_factory=list)
    solution: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ResultRecord":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})


# ---------------------------------------------------------------- solving

def _random_breaks(mesh: FlexibleMesh, rng: np.random.Generator):
    lo, hi = mesh.breakpoint_bounds()
    for _ in range(MESH_DRAWS):
        inner = np.sort(rng.uniform(lo, hi))
        breaks = np.concatenate([[mesh.t0], inner, [mesh.tf]])
        if mesh.is_feasible(breaks, tol=0.0):
            return breaks
    return None


def _perturbed_start(problem, rng: np.random.Generator) -> np.ndarray:
    """A new starting point: a random admissible mesh when the mesh is free,
    otherwise the default guess with 10% multiplicative noise."""
    if problem.layout.flexible:
        breaks = _random_breaks(problem.mesh, rng)
        if breaks is not None:
            return problem.initial_guess(breaks)
    z0 = problem.z0
    return z0 + 0.1 * (1.0 + np.abs(z0)) * rng.standard_normal(z0.size)


def _pick(solutions: Sequence[NlpSolution]) -> NlpSolution:
    ok = [s for s in solutions if s.converged]
    if ok:
        return min(ok, key=lambda s: s.objective)
    return min(solutions, key=lambda s: s.violation)


def solve_multistart(problem, cfg: ExperimentConfig) -> tuple[NlpSolution, int]:
    """Solve from the default guess plus up to ``cfg.starts`` perturbed starts.

    With a free mesh every start is tried and the best converged point is
    kept, because the breakpoint variables make the problem non-convex. On
    a fixed mesh the perturbed starts are only used after a failure.
    Returns the chosen solution and the total iteration count.
    """
    rng = np.random.default_rng(cfg.seed)
    sols = [solve(problem, tol=cfg.tol, max_iter=cfg.max_iter)]
    idx = problem.layout.mesh_index
    flexible = bool(np.any(problem.lower[idx] < problem.upper[idx]))
    for k in range(cfg.starts):
        if not flexible and sols[-1].converged:
            break
        z0 = _perturbed_start(problem, rng)
        sols.append(solve(problem, tol=cfg.tol, max_iter=cfg.max_iter, z0=z0))
        log.info("start %d: %s, objective %.10g", k + 1, sols[-1].status, sols[-1].objective)
    return _pick(sols), sum(s.iterations for s in sols)


def build_dop(cfg: ExperimentConfig):
    return get_problem(cfg.problem)()


def _run_dop(cfg: ExperimentConfig) -> ResultRecord:
    dop = build_dop(cfg)
    mesh = FlexibleMesh.uniform(dop.t0, dop.tf, cfg.intervals, cfg.phi())
    problem = assemble(dop, cfg.degree, mesh, cfg.mode)
    start = time.perf_counter()
    sol, iters = solve_multistart(problem, cfg)
    elapsed = time.perf_counter() - start
    traj = problem.trajectory(sol.z)
    report = assess(traj, dop)
    return ResultRecord(
        config=asdict(cfg),
        status=sol.status,
        iterations=iters,
        wall_time=elapsed,
        cost=report.cost,
        inequality_violation=report.inequality_violation,
        dynamic_violation=report.dynamic_violation,
        breakpoints=[float(b) for b in traj.breaks],
        interval_cost=report.interval_cost,
        interval_inequality_violation=report.interval_inequality_violation,
        interval_dynamic_violation=report.interval_dynamic_violation,
        solution=traj.to_dict(),
    )


def _sine_problem(cfg: ExperimentConfig, flexible: bool, constrained: bool):
    bound_mode = "samples" if cfg.mode == "a" else "bernstein"
    return sine_approximation(
        cfg.degree,
        "flexible" if flexible else "equispaced",
        constrained=constrained,
        phi=float(np.max(cfg.phi())),
        bound_mode=bound_mode,
    )


def _run_sine(cfg: ExperimentConfig) -> ResultRecord:
    """Fit the sine approximation; mode c flexes the three pieces."""
    if cfg.intervals != 3:
        raise ValueError("the sine approximation uses exactly 3 intervals")
    start = time.perf_counter()
    problem = _sine_problem(cfg, cfg.mode == "c", cfg.constrained)
    z = problem.fit()
    elapsed = time.perf_counter() - start
    viol = problem.violation(z)
    breaks = problem.breakpoints(z)
    return ResultRecord(
        config=asdict(cfg),
        status="converged" if viol <= 1e-8 else "infeasible",
        iterations=0,
        wall_time=elapsed,
        cost=float(problem.objective(z)),
        inequality_violation=problem.bound_violation(z),
        l2_error=problem.l2_error(z, abs_tol=1e-24),
        breakpoints=[float(b) for b in breaks],
        solution={"degree": problem.degree, "breaks": [float(b) for b in breaks],
                  "values": problem.values(z).tolist()},
    )


def run(cfg: ExperimentConfig) -> ResultRecord:
    """Assemble, solve, assess. Never raises for solver failure."""
    log.info("run %s", cfg)
    if cfg.problem == "sine-approx":
        return _run_sine(cfg)
    return _run_dop(cfg)


def _run_safe(cfg: ExperimentConfig) -> ResultRecord:
    try:
        return run(cfg)
    except Exception as exc:  # recorded, not dropped
        log.warning("run failed: %s", exc)
        return ResultRecord(config=asdict(cfg), status=f"error: {exc}", iterations=0, wall_time=0.0)


SWEEP_AXES = {"degree": "degree", "flexibility": "flex"}


def sweep(base: ExperimentConfig, axis: str, values: Sequence, jobs: int = 1) -> list[ResultRecord]:
    """One run per value of ``axis``; records come back in ``values`` order."""
    if not values:
        raise ValueError("sweep needs at least one value")
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; use one of {sorted(SWEEP_AXES)}")
    key = SWEEP_AXES[axis]
    cfgs = [replace(base, **{key: (int(v) if key == "degree" else v)}) for v in values]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_safe, cfgs))
    else:
        records = [_run_safe(c) for c in cfgs]
    if all(r.status.startswith("error") for r in records):
        raise RuntimeError("every sweep point failed")
    return records


# ---------------------------------------------------------------- output

CONFIG_COLUMNS = [f.name for f in fields(ExperimentConfig)]
METRIC_COLUMNS = ["status", "iterations", "wall_time", "cost", "inequality_violation",
                  "dynamic_violation", "l2_error", "breakpoints"]


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (list, tuple)):
        return ";".join(repr(float(x)) if isinstance(x, float) else str(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def trajectory_table(record: ResultRecord) -> tuple[list[str], np.ndarray]:
    """Dense samples of a record's solution: header and rows."""
    sol = record.solution
    if "states" in sol:
        traj = Trajectory.from_dict(sol)
        t, x, u = traj.samples(SAMPLES_PER_INTERVAL)
        header = ["t"] + [f"x_{k + 1}" for k in range(x.shape[1])] + [f"u_{k + 1}" for k in range(u.shape[1])]
        return header, np.column_stack([t, x, u])
    cfg = ExperimentConfig(**record.config)
    flexible = cfg.mode == "c"
    problem = _sine_problem(cfg, flexible, cfg.constrained)
    z = np.concatenate([np.ravel(sol["values"])] + ([sol["breaks"][1:-1]] if flexible else []))
    breaks = sol["breaks"]
    ts = []
    for i in range(len(breaks) - 1):
        a, b = breaks[i], breaks[i + 1]
        last = i == len(breaks) - 2
        ts.append(np.linspace(a, b, SAMPLES_PER_INTERVAL) if last
                  else a + (b - a) * np.arange(SAMPLES_PER_INTERVAL) / SAMPLES_PER_INTERVAL)
    t = np.concatenate(ts)
    return ["t", "y_1"], np.column_stack([t, problem.curve(z)(t)])


def _sibling(path: Path, index: Optional[int]) -> Path:
    suffix = "_trajectory" if index is None else f"_trajectory_{index}"
    return path.with_name(path.stem + suffix + ".csv")


def emit(records: Sequence[ResultRecord], path, fmt: str = "json") -> list[Path]:
    """Write ``records`` to ``path`` plus one trajectory file per record."""
    if not records:
        raise ValueError("nothing to emit")
    path = Path(path)
    written = [path]
    if fmt == "json":
        path.write_text(json.dumps([r.to_dict() for r in records], indent=1))
    elif fmt == "csv":
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CONFIG_COLUMNS + METRIC_COLUMNS)
            for r in records:
                w.writerow([_cell(r.config.get(c)) for c in CONFIG_COLUMNS]
                           + [_cell(getattr(r, c)) for c in METRIC_COLUMNS])
    else:
        raise ValueError(f"unknown format {fmt!r}")
    for k, r in enumerate(records):
        if not r.solution:
            continue
        header, rows = trajectory_table(r)
        sib = _sibling(path, None if len(records) == 1 else k)
        np.savetxt(sib, rows, delimiter=",", header=",".join(header), comments="")
        written.append(sib)
    return written


def load_records(path) -> list[ResultRecord]:
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = [data]
    return [ResultRecord.from_dict(d) for d in data]


def reassess(record: ResultRecord, rel_tol: float = 1e-10, abs_tol: float = 1e-12) -> dict:
    """Recompute the assessment of a saved DOP record."""
    if "states" not in record.solution:
        raise ValueError("record has no DOP trajectory to assess")
    cfg = ExperimentConfig(**record.config)
    return assess(Trajectory.from_dict(record.solution), build_dop(cfg), rel_tol, abs_tol).to_dict()


# ---------------------------------------------------------------- command line

def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    return str(text).strip().lower() in ("1", "true", "yes", "on")


def _flex(text):
    parts = [p for p in str(text).replace(";", ",").split(",") if p.strip()]
    vals = [float(p) for p in parts]
    return vals[0] if len(vals) == 1 else vals


_CASTS = {"degree": int, "intervals": int, "max_iter": int, "seed": int, "starts": int,
          "tol": float, "flex": _flex, "constrained": _bool}


def config_from(args: argparse.Namespace) -> ExperimentConfig:
    """Defaults, then the INI file, then explicit flags."""
    values = {}
    if getattr(args, "config", None):
        parser = configparser.ConfigParser()
        if not parser.read(args.config):
            raise FileNotFoundError(args.config)
        if parser.has_section("experiment"):
            for key, raw in parser.items("experiment"):
                key = key.replace("-", "_")
                if key in CONFIG_COLUMNS:
                    values[key] = _CASTS.get(key, str)(raw)
    for key in CONFIG_COLUMNS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = _CASTS.get(key, str)(v)
    return ExperimentConfig(**values)


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="INI file with an [experiment] section")
    p.add_argument("--problem", choices=["bryson-denham", "cart-pole", "sine-approx"])
    p.add_argument("--mode", choices=["a", "b", "c"])
    p.add_argument("--degree", type=int)
    p.add_argument("--intervals", type=int)
    p.add_argument("--flex", help="flexibility, one value or a comma list per interval")
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--starts", type=int, help="perturbed restarts")
    p.add_argument("--constrained", help="sine problem: enforce -1 <= y <= 1 (true/false)")
    p.add_argument("--out", help="output file (trajectory written alongside)")
    p.add_argument("--format", choices=["json", "csv"], default="json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flexcolloc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="solve and assess one configuration")
    _add_common(p_run)
    p_sweep = sub.add_parser("sweep", help="run a configuration over a range of values")
    _add_common(p_sweep)
    p_sweep.add_argument("--axis", choices=sorted(SWEEP_AXES), required=True)
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_assess = sub.add_parser("assess", help="re-assess the trajectory in a JSON record")
    p_assess.add_argument("record")
    p_assess.add_argument("--tol", type=float, default=1e-10, help="relative quadrature tolerance")
    return parser


def _summary(r: ResultRecord) -> str:
    c = r.config
    parts = [f"{c['problem']} mode={c['mode']} n={c['degree']} n_h={c['intervals']} flex={c['flex']}",
             f"status={r.status}"]
    for key in ("cost", "inequality_violation", "dynamic_violation", "l2_error"):
        v = getattr(r, key)
        if v is not None:
            parts.append(f"{key}={v:.10g}")
    return " ".join(parts)


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=os.environ.get("FLEXCOLLOC_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.command == "assess":
        records = load_records(args.record)
        out = [reassess(r, rel_tol=args.tol) for r in records]
        print(json.dumps(out if len(out) > 1 else out[0], indent=1))
        return 0
    cfg = config_from(args)
    if args.command == "run":
        records = [run(cfg)]
    else:
        vals = [v for v in args.values.split(",") if v.strip()]
        vals = [int(v) for v in vals] if args.axis == "degree" else [float(v) for v in vals]
        records = sweep(cfg, args.axis, vals, jobs=args.jobs)
    for r in records:
        print(_summary(r))
    if args.out:
        try:
            emit(records, args.out, args.format)
        except OSError as exc:
            log.error("cannot write %s: %s", args.out, exc)
            return 2
    return 0 if all(r.converged for r in records) else 1


if __name__ == "__main__":
    sys.exit(main())

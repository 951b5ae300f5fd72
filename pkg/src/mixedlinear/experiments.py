"""Seeded experiment harness: convergence traces and recovery-probability grids.

Every trial is keyed by ``(master seed, cell index, trial index)``; the derived
seeds for parameters, data, initialization and AltMin depend only on that key,
so outcomes do not depend on execution order or worker count. The init mode is
deliberately not part of the key: tensor and random runs share instances.
"""

from __future__ import annotations

import ast
import csv
import dataclasses
import hashlib
import io
import itertools
import json
import math
import operator
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from mixedlinear._rng import derive_seed, stream
from mixedlinear.altmin import AltMinConfig, RunTrace, altmin_run
from mixedlinear.errors import DimensionError, NumericalError
from mixedlinear.metrics import estimation_error
from mixedlinear.model import Dataset, MixtureParams, make_delta_spaced_params, sample_dataset
from mixedlinear.tensor_init import InitConfig, tensor_init

INIT_MODES = ("tensor", "random", "oracle")
RECOVERY_TOL = 1e-10
CSV_HEADER = ["n", "p", "k", "trials", "recovery_prob", "median_error", "median_iters", "seconds"]


@dataclass(frozen=True)
class ExperimentConfig:
    cells: tuple = ()
    trials: int = 1
    delta: float = 1.2
    init_mode: str = "tensor"
    altmin: AltMinConfig = field(default_factory=AltMinConfig)
    init: InitConfig = field(default_factory=InitConfig)
    seed: int = 0
    output: str | None = None
    workers: int = 1
    timeout: float | None = 60.0
    record_timing: bool = False

    def __post_init__(self):
        cells = tuple(tuple(int(v) for v in c) for c in self.cells)
        object.__setattr__(self, "cells", cells)
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.init_mode not in INIT_MODES:
            raise ValueError(f"init_mode must be one of {INIT_MODES}")
        for n, p, k in cells:
            if not (n >= 1 and p >= 1 and k >= 1):
                raise DimensionError(f"invalid cell (n={n}, p={p}, k={k})")
            if k > p:
                raise DimensionError(f"cell (n={n}, p={p}, k={k}) has k > p")

    def to_dict(self) -> dict:
        """Serializable form; the worker count is omitted since it cannot affect results."""
        d = dataclasses.asdict(self)
        d["cells"] = [list(c) for c in self.cells]
        d.pop("workers")
        return d

    def digest(self) -> str:
        d = self.to_dict()
        for volatile in ("output", "record_timing"):
            d.pop(volatile)
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True)
class TrialSeeds:
    params: int
    data: int
    init: int
    random_init: int
    altmin: int

    @classmethod
    def derive(cls, master: int, cell: int, trial: int) -> TrialSeeds:
        base = derive_seed(master, cell, trial)
        return cls(*(derive_seed(base, i) for i in range(5)))


@dataclass
class TrialResult:
    cell: int
    trial: int
    init_mode: str
    init_error: float
    final_error: float
    iterations: int
    termination_reason: str
    trace: RunTrace | None
    seconds: float = 0.0

    @property
    def success(self) -> bool:
        return self.final_error <= RECOVERY_TOL

    def to_dict(self) -> dict:
        return {
            "cell": self.cell,
            "trial": self.trial,
            "init_mode": self.init_mode,
            "init_error": self.init_error,
            "final_error": self.final_error,
            "iterations": self.iterations,
            "termination_reason": self.termination_reason,
            "trace": self.trace.to_dict() if self.trace is not None else None,
        }


@dataclass(frozen=True)
class CellResult:
    n: int
    p: int
    k: int
    trials: int
    recovery_probability: float
    median_final_error: float
    median_iterations: float
    wall_time: float | None

    def row(self) -> list[str]:
        secs = "" if self.wall_time is None else f"{self.wall_time:.3f}"
        return [
            str(self.n),
            str(self.p),
            str(self.k),
            str(self.trials),
            repr(self.recovery_probability),
            repr(self.median_final_error),
            repr(self.median_iterations),
            secs,
        ]


def make_instance(n: int, p: int, k: int, delta: float, seeds: TrialSeeds) -> tuple[MixtureParams, Dataset]:
    params = make_delta_spaced_params(p, k, delta, seeds.params)
    return params, sample_dataset(params, n, seeds.data)


def random_sphere_init(p: int, k: int, seed: int) -> np.ndarray:
    g = stream(seed, 4).standard_normal((k, p))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def initial_betas(mode: str, data: Dataset, params: MixtureParams, k: int, init_cfg: InitConfig, seeds: TrialSeeds):
    if mode == "oracle":
        return params.betas.copy()
    if mode == "random":
        return random_sphere_init(data.p, k, seeds.random_init)
    cfg = dataclasses.replace(init_cfg, seed=seeds.init, power=dataclasses.replace(init_cfg.power, seed=seeds.init))
    return tensor_init(data, k, cfg).betas0


def run_trial(cfg: ExperimentConfig, cell: int, trial: int, init_mode: str | None = None, keep_trace: bool = False):
    mode = init_mode or cfg.init_mode
    n, p, k = cfg.cells[cell]
    seeds = TrialSeeds.derive(cfg.seed, cell, trial)
    started = time.perf_counter()
    params, data = make_instance(n, p, k, cfg.delta, seeds)
    try:
        b0 = initial_betas(mode, data, params, k, cfg.init, seeds)
    except NumericalError:
        return TrialResult(cell, trial, mode, math.inf, math.inf, 0, "init_failed", None, time.perf_counter() - started)
    init_error = estimation_error(b0, params.betas).error
    am = dataclasses.replace(cfg.altmin, seed=seeds.altmin, time_limit=cfg.timeout)
    _, trace = altmin_run(data, b0, am, truth=params)
    final = trace.final_error
    if trace.termination_reason == "timeout":
        final = math.inf
    return TrialResult(
        cell,
        trial,
        mode,
        init_error,
        final,
        trace.iterations,
        trace.termination_reason,
        trace if keep_trace else None,
        time.perf_counter() - started,
    )


def _run_trial_star(args):
    return run_trial(*args)


def _execute(cfg: ExperimentConfig, jobs: list[tuple]) -> list[TrialResult]:
    if cfg.workers <= 1 or len(jobs) <= 1:
        return [run_trial(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(_run_trial_star, jobs, chunksize=max(1, len(jobs) // (4 * cfg.workers))))


def run_trace(cfg: ExperimentConfig, init_modes=None) -> list[TrialResult]:
    """Full AltMin traces for every (cell, trial) under each init mode."""
    modes = tuple(init_modes) if init_modes else (cfg.init_mode,)
    jobs = [
        (cfg, c, t, m, True) for c in range(len(cfg.cells)) for m in modes for t in range(cfg.trials)
    ]
    return _execute(cfg, jobs)


def summarize_cell(cfg: ExperimentConfig, cell: int, results: list[TrialResult], seconds: float) -> CellResult:
    n, p, k = cfg.cells[cell]
    errors = np.array([r.final_error for r in results])
    iters = np.array([r.iterations for r in results], dtype=float)
    return CellResult(
        n=n,
        p=p,
        k=k,
        trials=len(results),
        recovery_probability=float(np.mean(errors <= RECOVERY_TOL)),
        median_final_error=float(np.median(errors)),
        median_iterations=float(np.median(iters)),
        wall_time=seconds if cfg.record_timing else None,
    )


def run_grid(cfg: ExperimentConfig, on_cell=None) -> list[CellResult]:
    """Recovery statistics per cell; ``on_cell`` is called as each cell completes."""
    out = []
    for c in range(len(cfg.cells)):
        started = time.perf_counter()
        results = _execute(cfg, [(cfg, c, t, None, False) for t in range(cfg.trials)])
        cell = summarize_cell(cfg, c, results, time.perf_counter() - started)
        out.append(cell)
        if on_cell is not None:
            on_cell(cell)
    return out


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def metadata(cfg: ExperimentConfig) -> dict:
    return {
        "package": "mixedlinear",
        "config": cfg.to_dict(),
        "config_sha256": cfg.digest(),
        "trial_seeds": {
            f"{c}": [dataclasses.asdict(TrialSeeds.derive(cfg.seed, c, t)) for t in range(cfg.trials)]
            for c in range(len(cfg.cells))
        },
    }


def grid_csv(results: list[CellResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in results:
        w.writerow(r.row())
    return buf.getvalue()


def emit_report(results: list[CellResult], path, cfg: ExperimentConfig | None = None) -> Path:
    """Write the grid CSV and its JSON metadata sidecar; returns the CSV path."""
    if not results:
        raise ValueError("no results to report")
    path = Path(path)
    path.write_text(grid_csv(results))
    if cfg is not None:
        sidecar_path(path).write_text(json.dumps(metadata(cfg), indent=2, sort_keys=True) + "\n")
    return path


def trace_records(results: list[TrialResult]) -> str:
    """Long-format CSV with one row per (trial, iteration)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cell", "trial", "init", "iteration", "error", "label_changes", "cluster_sizes", "residual"])
    for r in results:
        if r.trace is None:
            continue
        tr = r.trace
        for t, res in enumerate(tr.residuals):
            w.writerow(
                [r.cell, r.trial, r.init_mode, t, repr(tr.errors[t]), tr.label_changes[t],
                 " ".join(map(str, tr.cluster_sizes[t])), repr(res)]
            )
    return buf.getvalue()


# --- grid specification helpers ---------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Pow: operator.pow,
           ast.Div: operator.truediv, ast.FloorDiv: operator.floordiv}


def eval_size(expr, p: int, k: int) -> int:
    """Evaluate a sample-size expression such as ``"60*p"`` or ``"24*k**3"``."""
    if isinstance(expr, (int, np.integer)):
        return int(expr)
    names = {"p": p, "k": k}

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return node.value
        if isinstance(node, ast.Name) and node.id in names:
            return names[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        raise ValueError(f"unsupported sample-size expression {expr!r}")

    return int(round(ev(ast.parse(str(expr), mode="eval"))))


def expand_cells(ns, ps, ks) -> tuple:
    """Cartesian product of sizes; n entries may be expressions in p and k."""
    return tuple((eval_size(n, p, k), p, k) for p, k in itertools.product(ps, ks) for n in ns)

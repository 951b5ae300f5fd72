"""Command-line interface: ``gen``, ``solve``, ``trace`` and ``grid``.

Exit codes: 0 success, 1 bad arguments, 2 numerical failure, 3 I/O failure.
A JSON config file (``--config``) may set any flag using its long name with
dashes replaced by underscores; explicit flags override the file.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from mixedlinear.altmin import AltMinConfig, altmin_run
from mixedlinear.errors import NumericalError
from mixedlinear.experiments import (
    ExperimentConfig,
    TrialSeeds,
    emit_report,
    expand_cells,
    initial_betas,
    make_instance,
    metadata,
    run_grid,
    run_trace,
    trace_records,
)
from mixedlinear.metrics import estimation_error
from mixedlinear.model import Dataset, MixtureParams
from mixedlinear.tensor_init import InitConfig
from mixedlinear.tensor_power import PowerConfig

EXIT_OK, EXIT_ARGS, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3

DEFAULTS = {
    "p": "10",
    "k": "3",
    "n": "3000",
    "delta": 1.2,
    "seed": 0,
    "init": "tensor",
    "resample": False,
    "split": False,
    "L": None,
    "N": None,
    "T": 200,
    "tol": 1e-10,
    "out": None,
    "workers": 1,
    "timeout": 60.0,
    "timing": False,
    "final_refit": False,
    "data": None,
}
TRIALS_DEFAULT = {"gen": 1, "solve": 1, "trace": 50, "grid": 100}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ARGS, f"{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    c = _Parser(add_help=False, argument_default=argparse.SUPPRESS)
    c.add_argument("--config", help="JSON file with default values for any flag")
    c.add_argument("--p", help="dimension (comma-separated list for grid)")
    c.add_argument("--k", help="number of components (comma-separated list for grid)")
    c.add_argument("--n", help="sample size; for grid/trace a list, entries may use p and k, e.g. 60*p")
    c.add_argument("--delta", type=float, help="pairwise distance between true parameters")
    c.add_argument("--trials", type=int, help="independent trials per cell")
    c.add_argument("--seed", type=int, help="master seed")
    c.add_argument("--init", help="tensor, random or oracle (trace accepts a comma list)")
    c.add_argument("--resample", action="store_true", help="fresh disjoint slice per AltMin iteration")
    c.add_argument("--split", action="store_true", help="split samples between second and third moments")
    c.add_argument("--L", type=int, help="power-method restarts (default 200 k^2)")
    c.add_argument("--N", type=int, help="power iterations per restart (default ceil(20 ln k))")
    c.add_argument("--T", type=int, help="maximum AltMin iterations")
    c.add_argument("--tol", type=float, help="exact-recovery tolerance on the estimation error")
    c.add_argument("--out", help="output path")
    c.add_argument("--workers", type=int, help="worker processes for trials")
    c.add_argument("--timeout", type=float, help="per-trial AltMin time limit in seconds")
    c.add_argument("--timing", action="store_true", help="record wall time (output no longer byte-stable)")
    c.add_argument("--final-refit", dest="final_refit", action="store_true", help="full-data refit after resampling")
    return c


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mixedlinear", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = _common()
    sub.add_parser("gen", parents=[common], help="emit parameters and a dataset as JSON")
    solve = sub.add_parser("solve", parents=[common], help="solve one instance and print the error report")
    solve.add_argument("--data", help="JSON file written by gen (otherwise an instance is generated)")
    sub.add_parser("trace", parents=[common], help="per-iteration AltMin error traces")
    sub.add_parser("grid", parents=[common], help="recovery probability over a grid of (n, p, k)")
    return parser


def _ints(value) -> list[int]:
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    return [int(v) for v in str(value).split(",") if v.strip()]


def _strs(value) -> list:
    if isinstance(value, (list, tuple)):
        return list(value)
    return [v.strip() for v in str(value).split(",") if v.strip()]


def resolve_options(args: argparse.Namespace) -> dict:
    opts = dict(DEFAULTS)
    opts["trials"] = TRIALS_DEFAULT[args.command]
    given = vars(args)
    if "config" in given and given["config"]:
        with open(given["config"]) as fh:
            file_opts = json.load(fh)
        unknown = set(file_opts) - set(opts) - {"cells"}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        opts.update(file_opts)
    opts.update({k: v for k, v in given.items() if k not in ("config", "command")})
    return opts


def experiment_config(opts: dict, init_mode: str) -> ExperimentConfig:
    if "cells" in opts:
        cells = tuple(tuple(c) for c in opts["cells"])
    else:
        cells = expand_cells(_strs(opts["n"]), _ints(opts["p"]), _ints(opts["k"]))
    return ExperimentConfig(
        cells=cells,
        trials=int(opts["trials"]),
        delta=float(opts["delta"]),
        init_mode=init_mode,
        altmin=AltMinConfig(T=int(opts["T"]), resample=bool(opts["resample"]), tol=float(opts["tol"]),
                            final_refit=bool(opts["final_refit"])),
        init=InitConfig(use_split=bool(opts["split"]), power=PowerConfig(L=opts["L"], N=opts["N"])),
        seed=int(opts["seed"]),
        output=opts["out"],
        workers=int(opts["workers"]),
        timeout=opts["timeout"],
        record_timing=bool(opts["timing"]),
    )


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write_or_print(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_gen(opts: dict) -> int:
    cfg = experiment_config(opts, "oracle")
    if len(cfg.cells) != 1:
        raise ValueError("gen takes a single (n, p, k)")
    n, p, k = cfg.cells[0]
    seeds = TrialSeeds.derive(cfg.seed, 0, 0)
    params, data = make_instance(n, p, k, cfg.delta, seeds)
    _write_or_print(_dump({"config": cfg.to_dict(), "params": params.to_dict(), "dataset": data.to_dict()}), cfg.output)
    return EXIT_OK


def cmd_solve(opts: dict) -> int:
    cfg = experiment_config(opts, _strs(opts["init"])[0])
    seeds = TrialSeeds.derive(cfg.seed, 0, 0)
    if opts.get("data"):
        blob = json.loads(Path(opts["data"]).read_text())
        data = Dataset.from_dict(blob["dataset"])
        params = MixtureParams.from_dict(blob["params"]) if "params" in blob else None
        k = params.k if params is not None else cfg.cells[0][2]
    else:
        n, p, k = cfg.cells[0]
        params, data = make_instance(n, p, k, cfg.delta, seeds)
    if cfg.init_mode == "oracle" and params is None:
        raise ValueError("oracle initialization needs the true parameters")
    b0 = initial_betas(cfg.init_mode, data, params, k, cfg.init, seeds)
    am = AltMinConfig(T=cfg.altmin.T, resample=cfg.altmin.resample, tol=cfg.altmin.tol, seed=seeds.altmin,
                      final_refit=cfg.altmin.final_refit, time_limit=cfg.timeout)
    betas, trace = altmin_run(data, b0, am, truth=params)
    result = {
        "estimates": betas.tolist(),
        "iterations": trace.iterations,
        "termination_reason": trace.termination_reason,
    }
    if params is not None:
        result["init_error"] = estimation_error(b0, params.betas).error
        result["error_report"] = estimation_error(betas, params.betas).to_dict()
    text = _dump(result)
    sys.stdout.write(text)
    if cfg.output:
        Path(cfg.output).write_text(text)
    return EXIT_OK


def cmd_trace(opts: dict) -> int:
    modes = _strs(opts["init"])
    cfg = experiment_config(opts, modes[0])
    results = run_trace(cfg, modes)
    out = Path(cfg.output or "trace.json")
    payload = {"metadata": metadata(cfg), "init_modes": modes, "trials": [r.to_dict() for r in results]}
    out.write_text(_dump(payload))
    out.with_suffix(".csv").write_text(trace_records(results))
    for mode in modes:
        mine = [r for r in results if r.init_mode == mode]
        print(f"{mode}: {sum(r.success for r in mine)}/{len(mine)} exact recoveries")
    return EXIT_OK


def cmd_grid(opts: dict) -> int:
    cfg = experiment_config(opts, _strs(opts["init"])[0])
    out = Path(cfg.output or "grid.csv")
    done = []

    def flush(cell):
        done.append(cell)
        emit_report(done, out, cfg)
        print(f"n={cell.n} p={cell.p} k={cell.k}: recovery {cell.recovery_probability:.2f}", flush=True)

    run_grid(cfg, on_cell=flush)
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "solve": cmd_solve, "trace": cmd_trace, "grid": cmd_grid}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = resolve_options(args)
        return COMMANDS[args.command](opts)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError, TypeError) as exc:
        print(f"bad arguments: {exc}", file=sys.stderr)
        return EXIT_ARGS


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Subcommands: ``run`` (integrate a batch), ``kuramoto`` (the built-in speed
and accuracy study presets), ``analyze`` (post-process a stored run) and
``bench`` (timing sweeps).  Every invocation writes a ``manifest.json``
beside its outputs; ``run --from-manifest`` replays a recorded run and
reproduces its store bit for bit.

Exit codes: 0 success, 1 configuration error, 2 solver/runtime error,
3 I/O error.  Diagnostics go to standard error.  The environment variable
``SDEBATCH_THREADS`` sets the default worker count.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import analysis, bench, storage
from .dsl import DslError
from .engine import ConfigError, EngineConfig, run_batch
from .model import (ModelDefinitionError, OrbitBatch, accuracy_protocol_batch,
                    model_from_file, model_from_name, speed_protocol_batch)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_IO = 3


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; route through CliError so
    # flag problems report as configuration errors (exit 1) instead.
    def error(self, message):
        raise CliError(message, EXIT_CONFIG)


def _default_threads() -> str:
    return os.environ.get("SDEBATCH_THREADS", "all")


def _parse_threads(text: str):
    if text == "all":
        return "all"
    try:
        value = int(text)
    except ValueError:
        raise CliError("threads must be a positive integer or 'all', got %r" % text,
                       EXIT_CONFIG)
    if value < 1:
        raise CliError("threads must be a positive integer or 'all', got %r" % text,
                       EXIT_CONFIG)
    return value


def _load_rows(path, what: str, columns: int | None = None) -> np.ndarray:
    try:
        data = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except OSError as exc:
        raise CliError("cannot read %s file: %s" % (what, exc), EXIT_IO)
    except ValueError as exc:
        raise CliError("malformed %s file %s: %s" % (what, path, exc), EXIT_IO)
    if columns is not None and data.shape[1] != columns:
        raise CliError("%s file %s has %d columns, expected %d"
                       % (what, path, data.shape[1], columns), EXIT_CONFIG)
    return data


def _resolve_model(args):
    if getattr(args, "model_file", None):
        try:
            return model_from_file(args.model_file), "file:%s" % args.model_file
        except OSError as exc:
            raise CliError("cannot read model file: %s" % exc, EXIT_IO)
        except (DslError, ModelDefinitionError) as exc:
            raise CliError("invalid model file %s: %s" % (args.model_file, exc),
                           EXIT_CONFIG)
    if getattr(args, "model", None):
        try:
            return model_from_name(args.model), args.model
        except ModelDefinitionError as exc:
            raise CliError(str(exc), EXIT_CONFIG)
    raise CliError("one of --model or --model-file is required", EXIT_CONFIG)


def _ensure_outdir(path) -> str:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise CliError("cannot create output directory: %s" % exc, EXIT_IO)
    return path


def _engine_config(args, orbits: int) -> EngineConfig:
    try:
        return EngineConfig(
            dt=args.dt, tspan=args.tspan, ksteps=args.ksteps, orbits=orbits,
            solver=args.solver, chunk_group=args.chunk_group, seed=args.seed,
            threads=_parse_threads(args.threads), pad=getattr(args, "pad", False),
            max_store_bytes=args.max_store_bytes,
        )
    except ConfigError as exc:
        raise CliError(str(exc), EXIT_CONFIG)


def _execute_run(model, model_source, config, batch, outdir, fmt, command, args_dict,
                 inputs) -> int:
    try:
        store = run_batch(model, config, batch)
    except ConfigError as exc:
        raise CliError(str(exc), EXIT_CONFIG)
    store_name = "store.%s" % ("bin" if fmt == "bin" else "csv")
    digest = storage.store_hash(store)
    manifest = storage.build_manifest(
        command=command, args=args_dict, config=config, model_source=model_source,
        inputs=inputs, outputs={"store": store_name}, store_sha256=digest)
    reproducible = {k: v for k, v in manifest.items() if k != "created"}
    try:
        storage.write_store(store, os.path.join(outdir, store_name), fmt,
                            metadata=reproducible)
        storage.write_manifest(manifest, os.path.join(outdir, "manifest.json"))
    except OSError as exc:
        raise CliError("cannot write outputs: %s" % exc, EXIT_IO)
    for failure in store.failures:
        print("sdebatch: orbit %d failed at chunk %d step %d (t=%g): %s"
              % (failure.orbit, failure.chunk, failure.step, failure.time,
                 failure.reason), file=sys.stderr)
    if store.failures:
        return EXIT_RUNTIME
    return EXIT_OK


def _args_dict(args, keys) -> dict:
    return {key: getattr(args, key) for key in keys}


# ---------------------------------------------------------------------------
# run

def _cmd_run(args) -> int:
    if args.from_manifest:
        return _replay(args)
    model, model_source = _resolve_model(args)
    inputs = {}
    if args.initx and args.params:
        init = _load_rows(args.initx, "initial-conditions", model.nequat)
        params = _load_rows(args.params, "parameters", model.nparams)
        if init.shape[0] != params.shape[0]:
            raise CliError("initx has %d orbits but params has %d"
                           % (init.shape[0], params.shape[0]), EXIT_CONFIG)
        if args.orbits is not None and args.orbits != init.shape[0]:
            raise CliError("--orbits %d does not match the %d rows of %s"
                           % (args.orbits, init.shape[0], args.initx), EXIT_CONFIG)
        batch = OrbitBatch(init=init, params=params)
        inputs = {"initx": args.initx, "params": args.params}
    elif args.initx or args.params:
        raise CliError("--initx and --params must be given together", EXIT_CONFIG)
    elif model_source.startswith("kuramoto:"):
        if args.orbits is None:
            raise CliError("--orbits is required when sampling a kuramoto batch",
                           EXIT_CONFIG)
        batch = speed_protocol_batch(model.nequat, args.orbits, args.seed)
    else:
        raise CliError("model files need --initx and --params", EXIT_CONFIG)
    config = _engine_config(args, batch.orbits)
    outdir = _ensure_outdir(args.out)
    keys = ["model", "model_file", "initx", "params", "solver", "dt", "tspan",
            "ksteps", "orbits", "chunk_group", "threads", "seed", "pad", "format",
            "max_store_bytes"]
    return _execute_run(model, model_source, config, batch, outdir, args.format,
                        "run", _args_dict(args, keys), inputs)


def _replay(args) -> int:
    try:
        manifest = storage.read_manifest(args.from_manifest)
    except OSError as exc:
        raise CliError("cannot read manifest: %s" % exc, EXIT_IO)
    except ValueError as exc:
        raise CliError("malformed manifest %s: %s" % (args.from_manifest, exc), EXIT_IO)
    if manifest.get("command") != "run":
        raise CliError("manifest %s does not describe a run command"
                       % args.from_manifest, EXIT_CONFIG)
    recorded = dict(manifest["args"])
    recorded["from_manifest"] = None
    recorded["out"] = args.out
    return _cmd_run(argparse.Namespace(**recorded))


# ---------------------------------------------------------------------------
# kuramoto presets

def _cmd_kuramoto(args) -> int:
    outdir = _ensure_outdir(args.out)
    threads = _parse_threads(args.threads)
    keys = ["preset", "K", "N", "realizations", "dt", "tspan", "ksteps",
            "chunk_group", "threads", "seed", "dt_sweep", "format"]
    args_dict = _args_dict(args, keys)
    if args.preset == "speed":
        model = model_from_name("kuramoto:%d" % args.N)
        batch = speed_protocol_batch(args.N, args.realizations, args.seed)
        config = _engine_config(args, args.realizations)
        return _execute_run(model, model.name, config, batch, outdir, args.format,
                            "kuramoto", args_dict, {})

    if args.dt_sweep:
        try:
            rows = analysis.dt_sweep(args.N, couplings=[args.K],
                                     realizations=args.realizations,
                                     tspan=args.tspan,
                                     sample_interval=args.dt * args.ksteps,
                                     seed=args.seed, threads=threads,
                                     chunk_group=args.chunk_group)
        except (ConfigError, ValueError) as exc:
            raise CliError(str(exc), EXIT_CONFIG)
        table = [(row.coupling, row.dt, row.mean_r_end, row.std_r_end) for row in rows]
        try:
            storage.write_matrix_csv(os.path.join(outdir, "dt_sweep.csv"),
                                     ["K", "dt", "mean_r_end", "std_r_end"], table)
            manifest = storage.build_manifest("kuramoto", args_dict, None,
                                              "kuramoto:%d" % args.N, {},
                                              {"dt_sweep": "dt_sweep.csv"})
            storage.write_manifest(manifest, os.path.join(outdir, "manifest.json"))
        except OSError as exc:
            raise CliError("cannot write outputs: %s" % exc, EXIT_IO)
        return EXIT_OK

    model = model_from_name("kuramoto:%d" % args.N)
    batch = accuracy_protocol_batch(args.N, args.realizations, args.K, args.seed)
    config = _engine_config(args, args.realizations)
    try:
        store = run_batch(model, config, batch)
    except ConfigError as exc:
        raise CliError(str(exc), EXIT_CONFIG)
    series = analysis.coherence_series(store)
    stats = analysis.ensemble_stats(series)
    try:
        _write_coherence_csvs(outdir, series, stats)
        manifest = storage.build_manifest(
            "kuramoto", args_dict, config, model.name, {},
            {"ensemble": "ensemble.csv", "coherence_r": "coherence_r.csv",
             "coherence_phi": "coherence_phi.csv"},
            store_sha256=storage.store_hash(store),
            extra={"std_convention": "population"})
        storage.write_manifest(manifest, os.path.join(outdir, "manifest.json"))
    except OSError as exc:
        raise CliError("cannot write outputs: %s" % exc, EXIT_IO)
    if store.failures:
        return EXIT_RUNTIME
    return EXIT_OK


def _write_coherence_csvs(outdir, series, stats):
    orbits = series.r.shape[0]
    header = ["time"] + ["r%d" % m for m in range(orbits)]
    rows = [[series.times[k]] + [series.r[m, k] for m in range(orbits)]
            for k in range(series.times.size)]
    storage.write_matrix_csv(os.path.join(outdir, "coherence_r.csv"), header, rows)
    header = ["time"] + ["phi%d" % m for m in range(orbits)]
    rows = [[series.times[k]] + [series.phi[m, k] for m in range(orbits)]
            for k in range(series.times.size)]
    storage.write_matrix_csv(os.path.join(outdir, "coherence_phi.csv"), header, rows)
    rows = [[stats.times[k], stats.mean_r[k], stats.std_r[k], stats.count]
            for k in range(stats.times.size)]
    storage.write_matrix_csv(os.path.join(outdir, "ensemble.csv"),
                             ["time", "mean_r", "std_r", "count"], rows)


# ---------------------------------------------------------------------------
# analyze

def _cmd_analyze(args) -> int:
    try:
        store = storage.read_store(args.store)
    except (storage.StoreFormatError, OSError) as exc:
        raise CliError("cannot read store %s: %s" % (args.store, exc), EXIT_IO)
    outdir = _ensure_outdir(args.out)
    outputs = {}
    if args.analysis == "order-parameter":
        series = analysis.coherence_series(store)
        stats = analysis.ensemble_stats(series) if store.orbits >= 2 else None
        if stats is None:
            rows = [[series.times[k]] + [series.r[m, k] for m in range(store.orbits)]
                    for k in range(series.times.size)]
            header = ["time"] + ["r%d" % m for m in range(store.orbits)]
            storage.write_matrix_csv(os.path.join(outdir, "coherence_r.csv"), header, rows)
            outputs["coherence_r"] = "coherence_r.csv"
        else:
            _write_coherence_csvs(outdir, series, stats)
            outputs = {"coherence_r": "coherence_r.csv",
                       "coherence_phi": "coherence_phi.csv",
                       "ensemble": "ensemble.csv"}
    elif args.analysis == "ensemble":
        if store.orbits < 2:
            raise CliError("ensemble statistics need at least 2 orbits", EXIT_CONFIG)
        stats = analysis.ensemble_stats(analysis.coherence_series(store))
        rows = [[stats.times[k], stats.mean_r[k], stats.std_r[k], stats.count]
                for k in range(stats.times.size)]
        storage.write_matrix_csv(os.path.join(outdir, "ensemble.csv"),
                                 ["time", "mean_r", "std_r", "count"], rows)
        outputs["ensemble"] = "ensemble.csv"
    else:  # kymograph
        try:
            grid = analysis.kymograph_export(store, args.orbit)
        except IndexError as exc:
            raise CliError(str(exc), EXIT_CONFIG)
        name = "kymograph_orbit%d.csv" % args.orbit
        header = ["time"] + ["osc%d" % j for j in range(store.nequat)]
        rows = [[store.times[k]] + list(grid[k]) for k in range(store.samples)]
        storage.write_matrix_csv(os.path.join(outdir, name), header, rows)
        outputs["kymograph"] = name
    manifest = storage.build_manifest(
        "analyze", _args_dict(args, ["store", "analysis", "orbit"]), None,
        store.model_name or "store", {"store": args.store}, outputs,
        extra={"std_convention": "population"})
    try:
        storage.write_manifest(manifest, os.path.join(outdir, "manifest.json"))
    except OSError as exc:
        raise CliError("cannot write outputs: %s" % exc, EXIT_IO)
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench

def _parse_int_list(text: str, what: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part]
    except ValueError:
        raise CliError("bad %s list %r" % (what, text), EXIT_CONFIG)


def _cmd_bench(args) -> int:
    sizes = _parse_int_list(args.Ns, "system size")
    orbit_counts = _parse_int_list(args.orbit_counts, "orbit count")
    threads = [(part if part == "all" else _parse_threads(part))
               for part in args.threads_list.split(",") if part]
    if not sizes or not orbit_counts or not threads:
        raise CliError("empty benchmark grid", EXIT_CONFIG)
    outdir = _ensure_outdir(args.out)
    try:
        points, failures = bench.scaling_grid(
            sizes, orbit_counts, threads, dt=args.dt, tspan=args.tspan,
            ksteps=args.ksteps, chunk_group=args.chunk_group, seed=args.seed,
            repeats=args.repeats, max_store_bytes=args.max_store_bytes)
    except (ConfigError, ValueError) as exc:
        raise CliError(str(exc), EXIT_CONFIG)
    for failure in failures:
        print("sdebatch: bench cell N=%d orbits=%d threads=%s failed: %s"
              % (failure.N, failure.orbits, failure.threads, failure.error),
              file=sys.stderr)
    outputs = {"bench": "bench.csv"}
    try:
        bench.write_bench_csv(points, os.path.join(outdir, "bench.csv"))
        baseline = [p for p in points if p.threads == 1]
        others = [p for p in points if p.threads != 1]
        if baseline and others:
            rows = bench.speedup_table(baseline, others)
            bench.write_speedup_csv(rows, os.path.join(outdir, "speedup.csv"))
            outputs["speedup"] = "speedup.csv"
        keys = ["Ns", "orbit_counts", "threads_list", "repeats", "dt", "tspan",
                "ksteps", "chunk_group", "seed"]
        manifest = storage.build_manifest("bench", _args_dict(args, keys), None,
                                          "kuramoto", {}, outputs)
        storage.write_manifest(manifest, os.path.join(outdir, "manifest.json"))
    except OSError as exc:
        raise CliError("cannot write outputs: %s" % exc, EXIT_IO)
    return EXIT_RUNTIME if failures else EXIT_OK


# ---------------------------------------------------------------------------

def _build_parser() -> _Parser:
    parser = _Parser(prog="sdebatch",
                     description="Batch integration of SDE/ODE orbit ensembles "
                                 "with reproducible counter-based noise.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    run = sub.add_parser("run", help="integrate a batch of orbits")
    run.add_argument("--model", help="built-in model, e.g. kuramoto:100")
    run.add_argument("--model-file", help="model definition file")
    run.add_argument("--initx", help="CSV of initial conditions, one orbit per row")
    run.add_argument("--params", help="CSV of parameter sets, one orbit per row")
    run.add_argument("--solver", default="em",
                     choices=["em", "euler", "rk4", "ie", "im"])
    run.add_argument("--dt", type=float, default=0.05)
    run.add_argument("--tspan", type=float, default=400.0)
    run.add_argument("--ksteps", type=int, default=40,
                     help="solver steps per stored sample")
    run.add_argument("--orbits", type=int, default=None)
    run.add_argument("--chunk-group", dest="chunk_group", type=int, default=8)
    run.add_argument("--threads", default=_default_threads())
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--pad", action="store_true",
                     help="round the chunk count up when tspan is not divisible")
    run.add_argument("--format", default="csv", choices=["csv", "bin"])
    run.add_argument("--max-store-bytes", dest="max_store_bytes", type=int,
                     default=4 * 2 ** 30)
    run.add_argument("--from-manifest", default=None,
                     help="replay a recorded run")
    run.add_argument("--out", default="sdebatch-out")
    run.set_defaults(func=_cmd_run)

    kuramoto = sub.add_parser("kuramoto", help="built-in Kuramoto study presets")
    kuramoto.add_argument("preset", choices=["speed", "accuracy"])
    kuramoto.add_argument("--K", type=float, default=0.2,
                          help="coupling strength (accuracy preset)")
    kuramoto.add_argument("--N", type=int, default=100)
    kuramoto.add_argument("--realizations", type=int, default=64)
    kuramoto.add_argument("--dt", type=float, default=0.05)
    kuramoto.add_argument("--tspan", type=float, default=400.0)
    kuramoto.add_argument("--ksteps", type=int, default=40)
    kuramoto.add_argument("--chunk-group", dest="chunk_group", type=int, default=8)
    kuramoto.add_argument("--threads", default=_default_threads())
    kuramoto.add_argument("--seed", type=int, default=0)
    kuramoto.add_argument("--solver", default="em",
                          choices=["em", "euler", "rk4", "ie", "im"])
    kuramoto.add_argument("--dt-sweep", dest="dt_sweep", action="store_true",
                          help="run the five-step time-step stability table")
    kuramoto.add_argument("--format", default="csv", choices=["csv", "bin"])
    kuramoto.add_argument("--max-store-bytes", dest="max_store_bytes", type=int,
                          default=4 * 2 ** 30)
    kuramoto.add_argument("--pad", action="store_true")
    kuramoto.add_argument("--out", default="sdebatch-out")
    kuramoto.set_defaults(func=_cmd_kuramoto)

    analyze = sub.add_parser("analyze", help="post-process a stored run")
    analyze.add_argument("store", help="trajectory store (csv or bin)")
    analyze.add_argument("analysis",
                         choices=["order-parameter", "ensemble", "kymograph"])
    analyze.add_argument("--orbit", type=int, default=0,
                         help="orbit index for kymograph export")
    analyze.add_argument("--out", default="sdebatch-out")
    analyze.set_defaults(func=_cmd_analyze)

    bench_cmd = sub.add_parser("bench", help="timing sweeps")
    bench_cmd.add_argument("--Ns", default="5,10,15")
    bench_cmd.add_argument("--orbit-counts", dest="orbit_counts",
                           default="512,5120,25600,40960,81920,163840")
    bench_cmd.add_argument("--threads-list", dest="threads_list", default="1,all")
    bench_cmd.add_argument("--repeats", type=int, default=8)
    bench_cmd.add_argument("--dt", type=float, default=0.05)
    bench_cmd.add_argument("--tspan", type=float, default=400.0)
    bench_cmd.add_argument("--ksteps", type=int, default=40)
    bench_cmd.add_argument("--chunk-group", dest="chunk_group", type=int, default=8)
    bench_cmd.add_argument("--seed", type=int, default=0)
    bench_cmd.add_argument("--max-store-bytes", dest="max_store_bytes", type=int,
                           default=4 * 2 ** 30)
    bench_cmd.add_argument("--out", default="sdebatch-out")
    bench_cmd.set_defaults(func=_cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as exc:
        print("sdebatch: %s" % exc, file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print("sdebatch: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG


def entry_point():
    sys.exit(main())

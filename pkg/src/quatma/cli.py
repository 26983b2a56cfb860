"""Command-line entry point: ``quatma {verify,solve,sweep,abp,bench}``.

Exit codes: 0 success, 1 invariant failure, 2 usage or config error,
3 numerical failure.  Every run writes its reports plus ``manifest.json``
into ``--out``; wall-clock timings live only in the manifest (and the bench
tables), so report files are byte-identical across reruns.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import platform
import sys
import time
from contextlib import contextmanager, nullcontext
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy
from threadpoolctl import threadpool_limits

from . import __version__
from .abp import AbpReport, perturbed_well, quadratic_well, verify_key_lemma, verify_key_proposition
from .exceptions import ConfigError, PreconditionViolated, QuatmaError, UnknownSuite
from .families import make_datum
from .grid import ScalarField, quaternionic_hessian_field
from .hyperhermitian import moore_det_field
from .solver import (
    SolverSettings,
    SweepRecord,
    TorusProblem,
    _newton_direction,
    _shifted,
    c0_sweep,
    random_start,
    solve,
)
from .suites import SUITES, run_suite

logger = logging.getLogger("quatma")

EXIT_OK, EXIT_INVARIANT, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3


# -- config parsing (fail closed) ---------------------------------------------------

def _take(raw: dict, key: str, kind, default=None, required=False):
    if key not in raw:
        if required:
            raise ConfigError(f"missing required key {key!r}")
        return default
    value = raw[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise ConfigError(f"key {key!r} must be {getattr(kind, '__name__', kind)}, got {value!r}")
    return value


def _reject_unknown(raw: dict, allowed, where: str = "config"):
    extra = sorted(set(raw) - set(allowed))
    if extra:
        raise ConfigError(f"unknown keys in {where}: {extra}")


def parse_solver_settings(raw: dict | None) -> SolverSettings:
    raw = raw or {}
    if not isinstance(raw, dict):
        raise ConfigError("solver must be an object")
    _reject_unknown(raw, {"tol", "max_iters", "margin", "inner_tol", "continuation"}, "solver")
    return SolverSettings(
        tol=_take(raw, "tol", float),
        max_iters=_take(raw, "max_iters", int, 50),
        margin=_take(raw, "margin", float, 1e-3),
        inner_tol=_take(raw, "inner_tol", float, 1e-10),
        continuation=_take(raw, "continuation", bool, True),
    )


def _problem_dims(raw: dict) -> tuple[int, int]:
    n = _take(raw, "n", int, required=True)
    N = _take(raw, "N", int, required=True)
    if n not in (1, 2):
        raise ConfigError("n must be 1 or 2")
    if N < 4:
        raise ConfigError("N must be at least 4")
    return n, N


SCHEMAS = {
    "solve": {"n", "N", "F", "solver", "seed"},
    "sweep": {"n", "N", "F", "solver", "seed", "scales"},
    "abp": {"n", "m", "calibration", "perturbed", "scale", "seed"},
    "bench": {"n", "N", "repetitions", "seed"},
}


def load_config(path, command: str) -> dict:
    """Read and validate a JSON config; unknown keys raise :class:`ConfigError`."""
    if path is None:
        raw = {}
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"malformed JSON in {path}: {exc.msg} (line {exc.lineno}, column {exc.colno})"
            ) from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    _reject_unknown(raw, SCHEMAS[command])
    if command in ("solve", "sweep") and not raw:
        raise ConfigError(f"{command} needs a config with n, N and F")
    return raw


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


# -- run bookkeeping ----------------------------------------------------------------

@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int
    threads: int | None
    outputs: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    @contextmanager
    def phase(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - t0

    def as_dict(self) -> dict:
        return {
            "tool": "quatma",
            "version": __version__,
            "command": self.command,
            "config": self.config,
            "config_hash": config_hash(self.config),
            "seed": self.seed,
            "threads": self.threads,
            "environment": {
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "machine": platform.machine(),
            },
            "outputs": dict(sorted(self.outputs.items())),
            "timings": self.timings,
        }


class Writer:
    """Writes output files into one directory and records their digests."""

    def __init__(self, out: Path, manifest: RunManifest):
        self.out = out
        self.manifest = manifest
        out.mkdir(parents=True, exist_ok=True)

    def _record(self, path: Path):
        self.manifest.outputs[path.name] = hashlib.sha256(path.read_bytes()).hexdigest()

    def json(self, name: str, payload) -> Path:
        path = self.out / name
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        self._record(path)
        return path

    def csv(self, name: str, header, rows) -> Path:
        path = self.out / name
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_csv_cell(v) for v in row])
        self._record(path)
        return path

    def field(self, stem: str, f: ScalarField):
        for path in f.save(self.out / stem):
            self._record(path)

    def finish(self) -> Path:
        path = self.out / "manifest.json"
        path.write_text(json.dumps(self.manifest.as_dict(), indent=2, sort_keys=True) + "\n")
        return path


def _csv_cell(v):
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return v


def _echo(args, text: str):
    if not args.quiet:
        print(text)


# -- subcommands --------------------------------------------------------------------

def cmd_verify(args, writer: Writer) -> int:
    if args.suite != "all" and args.suite not in SUITES:
        raise UnknownSuite(f"unknown suite {args.suite!r}; expected one of {sorted(SUITES) + ['all']}")
    with writer.manifest.phase(f"verify_{args.suite}"):
        report = run_suite(args.suite, args.seed)
    writer.json(f"verify_{args.suite}.json", report)
    for name, suite in report["suites"].items():
        for c in suite["checks"]:
            mark = "PASS" if c["passed"] else "FAIL"
            _echo(args, f"{mark} {name}.{c['name']}: {c['value']!r} {c['relation']} {c['threshold']!r}")
    _echo(args, f"verify {args.suite}: {'PASS' if report['passed'] else 'FAIL'}")
    return EXIT_OK if report["passed"] else EXIT_INVARIANT


def _build_problem(config: dict):
    n, N = _problem_dims(config)
    F_desc = _take(config, "F", dict, required=True)
    F, target = make_datum(n, N, F_desc)
    return n, N, F, target, parse_solver_settings(config.get("solver"))


def cmd_solve(args, writer: Writer) -> int:
    config = writer.manifest.config
    n, N, F, _, settings = _build_problem(config)
    try:
        with writer.manifest.phase("solve"):
            rep = solve(TorusProblem(F), settings)
    except QuatmaError as exc:
        writer.json("solve_report.json", {
            "status": type(exc).__name__, "message": str(exc), "n": n, "N": N,
        })
        _echo(args, f"solve failed: {type(exc).__name__}: {exc}")
        return EXIT_NUMERICAL
    writer.json("solve_report.json", rep.as_dict())
    writer.field("phi", rep.phi)
    _echo(args, f"solve: {rep.iterations} Newton steps, residual {rep.residual:.3e}, "
                f"A = {rep.A:.12g}, ||phi||_inf = {rep.normphi_inf:.6g}")
    return EXIT_OK


def cmd_sweep(args, writer: Writer) -> int:
    config = writer.manifest.config
    n, N, F, _, settings = _build_problem(config)
    scales = _take(config, "scales", list, [0.0, 0.25, 0.5, 0.75, 1.0])
    try:
        scales = [float(s) for s in scales]
    except (TypeError, ValueError) as exc:
        raise ConfigError("scales must be numbers") from exc
    if not scales:
        raise ConfigError("scales must be non-empty")
    if len(set(scales)) != len(scales):
        logger.warning("duplicate scales removed: %s", scales)
    try:
        with writer.manifest.phase("sweep"):
            result = c0_sweep(F, scales, settings)
    except QuatmaError as exc:
        writer.json("sweep.json", {"status": type(exc).__name__, "message": str(exc)})
        _echo(args, f"sweep failed: {type(exc).__name__}: {exc}")
        return EXIT_NUMERICAL
    writer.json("sweep.json", result.as_dict())
    writer.csv("sweep.csv", SweepRecord.CSV_COLUMNS + ("envelope",),
               [r.csv_row() + [result.envelope(r.normF_inf)] for r in result.records])
    _echo(args, f"sweep: {len(result.records)} scales, c1 = {result.c1:.6g}, c2 = {result.c2:.6g}")
    return EXIT_OK


def cmd_abp(args, writer: Writer) -> int:
    config = writer.manifest.config
    n = _take(config, "n", int, 1)
    m = _take(config, "m", int, 12)
    calibration = _take(config, "calibration", bool, True)
    perturbed = _take(config, "perturbed", int, 10)
    lam = _take(config, "scale", float, 1.0)
    if n != 1:
        raise ConfigError("the abp harness runs at n = 1 (lattice budget)")
    if lam <= 0:
        raise ConfigError("scale must be positive")
    instances = []
    if calibration:
        instances.append(("calibration", quadratic_well(n, m)))
    instances += [(f"perturbed_{args.seed + k}", perturbed_well(args.seed + k, n, m))
                  for k in range(perturbed)]
    rows, payload, ok = [], [], True
    for name, inst in instances:
        try:
            with writer.manifest.phase("abp"):
                prop = verify_key_proposition(inst.proposition_field().scaled(lam))
                lem = verify_key_lemma(inst.lemma_field().scaled(lam), lam * inst.a)
        except PreconditionViolated as exc:
            writer.json("abp.json", {"status": type(exc).__name__, "instance": name, "message": str(exc)})
            _echo(args, f"abp failed on {name}: {exc}")
            return EXIT_NUMERICAL
        for kind, rep in (("proposition", prop), ("lemma", lem)):
            rows.append([name, kind] + rep.csv_row())
            payload.append({"instance": name, "kind": kind} | rep.as_dict())
        ok &= bool(prop.proposition_holds and prop.abp_holds and lem.lemma_holds)
    writer.csv("abp.csv", ("instance", "kind") + AbpReport.CSV_COLUMNS, rows)
    writer.json("abp.json", {"passed": ok, "instances": payload})
    _echo(args, f"abp: {len(instances)} instances, {'all inequalities hold' if ok else 'VIOLATION'}")
    return EXIT_OK if ok else EXIT_INVARIANT


def cmd_bench(args, writer: Writer) -> int:
    config = writer.manifest.config
    n = _take(config, "n", int, 1)
    N = _take(config, "N", int, 16)
    reps = _take(config, "repetitions", int, 5)
    if n not in (1, 2) or N < 4 or reps < 1:
        raise ConfigError("bench needs n in {1, 2}, N >= 4 and repetitions >= 1")
    phi = random_start(n, N, args.seed, 0.2)
    F, _ = make_datum(n, N, {"family": "cosine", "params": {"amplitude": 0.5}})
    problem = TorusProblem(F)
    expF = np.exp(F.values)
    samples = {"hessian_assembly": [], "moore_evaluation": [], "linear_solve": []}
    outputs = {}
    for _ in range(reps):
        t0 = time.perf_counter()
        M = _shifted(quaternionic_hessian_field(phi.values, n, phi.h))
        t1 = time.perf_counter()
        det = moore_det_field(M)
        t2 = time.perf_counter()
        G = det - float(np.mean(det) / np.mean(expF)) * expF
        dphi, dA, k = _newton_direction(problem, M, G, expF, 1e-10)
        t3 = time.perf_counter()
        samples["hessian_assembly"].append(t1 - t0)
        samples["moore_evaluation"].append(t2 - t1)
        samples["linear_solve"].append(t3 - t2)
        outputs = {
            "det_sum": float(np.sum(det)),
            "direction_norm": float(np.linalg.norm(dphi)),
            "dA": dA,
            "gmres_iterations": k,
        }
    rows, stats = [], {}
    for phase, ts in samples.items():
        ts = np.array(ts)
        st = {
            "repetitions": reps,
            "mean": float(ts.mean()),
            "std": float(ts.std(ddof=1)) if reps > 1 else 0.0,
            "min": float(ts.min()),
            "max": float(ts.max()),
            "low_confidence": reps == 1,
        }
        stats[phase] = st
        writer.manifest.timings[phase] = st["mean"]
        rows.append([phase] + [st[c] for c in ("repetitions", "mean", "std", "min", "max", "low_confidence")])
    writer.csv("bench.csv", ("phase", "repetitions", "mean", "std", "min", "max", "low_confidence"), rows)
    writer.json("bench.json", {"n": n, "N": N, "outputs": outputs})
    writer.manifest.timings["bench_statistics"] = stats
    if reps == 1:
        logger.warning("single repetition: timing statistics are low-confidence")
    for r in rows:
        _echo(args, f"{r[0]}: mean {r[2]:.4g} s over {reps} repetitions")
    return EXIT_OK


COMMANDS = {
    "verify": cmd_verify,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "abp": cmd_abp,
    "bench": cmd_bench,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON config file")
    common.add_argument("--out", metavar="DIR", default="quatma-out", help="output directory")
    common.add_argument("--seed", type=int, default=None, metavar="U64", help="override the config seed")
    common.add_argument("--threads", type=int, default=None, metavar="N", help="BLAS thread limit")
    common.add_argument("--quiet", action="store_true", help="suppress progress output")

    parser = argparse.ArgumentParser(prog="quatma", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"quatma {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", parents=[common], help="run an invariant suite")
    v.add_argument("suite", help=f"one of {sorted(SUITES) + ['all']}")
    sub.add_parser("solve", parents=[common], help="solve one torus problem")
    sub.add_parser("sweep", parents=[common], help="C0 sweep over datum scales")
    sub.add_parser("abp", parents=[common], help="ABP chain on the well families")
    sub.add_parser("bench", parents=[common], help="per-phase timings")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be positive")
        if args.command == "verify":
            if args.config is not None:
                raise ConfigError("verify takes no config file")
            config = {"suite": args.suite}
        else:
            config = load_config(args.config, args.command)
        seed = args.seed if args.seed is not None else _take(config, "seed", int, 0)
        args.seed = seed
        manifest = RunManifest(args.command, config, seed, args.threads)
        writer = Writer(Path(args.out), manifest)
        limits = threadpool_limits(limits=args.threads) if args.threads else nullcontext()
        with limits:
            code = COMMANDS[args.command](args, writer)
        writer.finish()
        return code
    except (ConfigError, UnknownSuite) as exc:
        print(f"quatma: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except QuatmaError as exc:
        print(f"quatma: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

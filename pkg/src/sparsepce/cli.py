"""Command-line interface.

Exit status: 0 on success, 1 for invalid configuration or arguments, 2 for
runtime failures (including failed ``validate`` checks).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys

import numpy as np

from . import __version__
from .benchmarks import EXACT, get_problem, ground_truth
from .greedy import near_optimal_select
from .harness import ConfigError, load_config, run_experiment, summarize, write_records
from .matrix import assemble, correlation_metrics, load_matrix
from .sampling import (
    NEAR_OPTIMAL,
    STANDARD,
    McmcConfig,
    build_pool,
    coherence_optimal_sample,
    parse_strategy,
    read_ensemble_csv,
    standard_sample,
    substream,
    write_ensemble_csv,
)
from .solver import RecoverySpec, recover

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

log = logging.getLogger("sparsepce")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _nonneg_float(text):
    value = float(text)
    if not value >= 0 or not math.isfinite(value):
        raise argparse.ArgumentTypeError("must be a finite non-negative number")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sparsepce", description="Sparse polynomial chaos recovery from designed samples.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sample", help="draw a sample ensemble and write it as CSV")
    s.add_argument("--problem", required=True)
    s.add_argument("--strategy", required=True, help="standard | coherence-optimal | near-optimal")
    s.add_argument("--m", type=_positive_int, required=True, help="number of samples")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--pool-size", type=_positive_int, default=10_000)
    s.add_argument("--burn-in", type=int, default=1000)
    s.add_argument("--thinning", type=_positive_int, default=None)
    s.add_argument("--out", help="ensemble CSV (default: stdout)")
    s.add_argument("--matrix-out", help="also dump the weighted measurement matrix (binary)")

    m = sub.add_parser("metrics", help="cross-correlation metrics of a stored matrix")
    m.add_argument("--matrix", required=True, help="binary dump, or .csv/.txt with one row per line")
    m.add_argument("--t", type=float, default=0.5, help="threshold for the t-averaged coherence")

    r = sub.add_parser("recover", help="l1 recovery from an ensemble CSV")
    r.add_argument("--problem", required=True)
    r.add_argument("--samples", required=True)
    r.add_argument("--epsilon", type=_nonneg_float, default=0.0)
    r.add_argument("--out", help="coefficient CSV (default: stdout)")

    b = sub.add_parser("benchmark", help="run a trial ensemble from a config file")
    b.add_argument("--config", required=True)
    b.add_argument("--out", help="TrialRecord CSV (default: <config>.csv)")
    b.add_argument("--cache-dir", help="directory for validation-set caches")

    sub.add_parser("validate", help="run the built-in invariant suite")
    return p


def _load_any_matrix(path):
    if str(path).lower().endswith((".csv", ".txt")):
        delim = "," if str(path).lower().endswith(".csv") else None
        return np.loadtxt(path, delimiter=delim, ndmin=2)
    return load_matrix(path)


def cmd_sample(args) -> int:
    problem = get_problem(args.problem)
    strategy = parse_strategy(args.strategy)
    mcmc = McmcConfig(args.burn_in, args.thinning)
    basis = problem.basis()
    # same substreams as trial 0 of a harness run with this seed
    if strategy == STANDARD:
        ens = standard_sample(basis, args.m, substream(args.seed, strategy, args.m, 0))
    elif strategy == NEAR_OPTIMAL:
        if args.pool_size < args.m:
            raise ConfigError("--pool-size must be at least --m")
        pool = build_pool(basis, args.pool_size, substream(args.seed, "pool", 0), mcmc)
        sel = near_optimal_select(assemble(pool, basis), args.m, substream(args.seed, "first-row", 0))
        ens = pool.subset(sel.indices, NEAR_OPTIMAL)
    else:
        ens = coherence_optimal_sample(basis, args.m, substream(args.seed, strategy, args.m, 0), mcmc)
    if args.out:
        write_ensemble_csv(args.out, ens)
    else:
        _write_ensemble_stdout(ens)
    if args.matrix_out:
        from .matrix import dump_matrix

        dump_matrix(args.matrix_out, assemble(ens, basis, apply_weights=strategy != STANDARD))
    return EXIT_OK


def _write_ensemble_stdout(ens):
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow([f"xi_{i + 1}" for i in range(ens.dim)] + ["weight"])
    for point, w in zip(ens.points, ens.weights):
        writer.writerow([repr(float(v)) for v in point] + [repr(float(w))])


def cmd_metrics(args) -> int:
    m = correlation_metrics(_load_any_matrix(args.matrix), t=args.t)
    out = m.as_dict()
    if math.isinf(out["spark_lower_bound"]):
        out["spark_lower_bound"] = None
    json.dump(out, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return EXIT_OK


def cmd_recover(args) -> int:
    problem = get_problem(args.problem)
    basis = problem.basis()
    ens = read_ensemble_csv(args.samples, problem.family)
    if ens.dim != basis.dim:
        raise ConfigError(f"samples have dimension {ens.dim}, problem {problem.name} has {basis.dim}")
    A = assemble(ens, basis, apply_weights=True)
    data = problem.evaluate(ens.points) * ens.weights
    res = recover(RecoverySpec(A.entries, data, args.epsilon))
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index"] + [f"alpha_{i + 1}" for i in range(basis.dim)] + ["coefficient"])
        for j, (alpha, c) in enumerate(zip(basis.index_set.indices, res.coefficients)):
            writer.writerow([j, *alpha, repr(float(c))])
    finally:
        if args.out:
            fh.close()
    diag = {
        "converged": res.converged,
        "status": res.status,
        "iterations": res.iterations,
        "residual_norm": res.residual_norm,
        "l1_norm": res.l1_norm,
        "nonzeros": int(np.count_nonzero(res.coefficients)),
    }
    if problem.mode == EXACT:
        truth = ground_truth(problem).coefficients
        diag["relative_error"] = float(np.linalg.norm(res.coefficients - truth) / np.linalg.norm(truth))
    json.dump(diag, sys.stdout if args.out else sys.stderr, indent=2)
    (sys.stdout if args.out else sys.stderr).write("\n")
    return EXIT_OK if res.converged else EXIT_RUNTIME


def cmd_benchmark(args) -> int:
    cfg = load_config(args.config)
    out = args.out or f"{args.config}.csv"
    records = run_experiment(cfg, cache_dir=args.cache_dir)
    sidecar = write_records(out, records, cfg)
    threshold = cfg.resolved_threshold()
    print(f"{cfg.problem} / {cfg.strategy}: {len(records)} trials -> {out} (+ {sidecar})")
    print(f"{'M':>6} {'median':>10} {'q25':>10} {'q75':>10} {'success':>8} {'mu':>8} {'gamma':>9} {'failed':>6}")
    for cell in summarize(records, threshold):
        q = cell.error
        med, lo, hi = (q.median, q.q25, q.q75) if q else (math.inf,) * 3
        print(
            f"{cell.M:>6} {med:>10.3e} {lo:>10.3e} {hi:>10.3e} {cell.success_rate:>8.2f} "
            f"{cell.mu_median:>8.4f} {cell.gamma_median:>9.2e} {cell.failures:>6}"
        )
    return EXIT_OK


def cmd_validate(args) -> int:
    from .selfcheck import run_all

    results = run_all()
    for res in results:
        print(res.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_RUNTIME


COMMANDS = {
    "sample": cmd_sample,
    "metrics": cmd_metrics,
    "recover": cmd_recover,
    "benchmark": cmd_benchmark,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"sparsepce: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        # bad problem/strategy names and malformed input files
        print(f"sparsepce: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"sparsepce: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

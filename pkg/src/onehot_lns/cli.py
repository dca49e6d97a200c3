"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from onehot_lns import embedding as emb
from onehot_lns import io as fmt
from onehot_lns.orchestrator import AGGREGATE_COLUMNS, METHODS, RESULT_COLUMNS, RunConfig, compare, run_experiment
from onehot_lns.potts import LatticeSpec, ModelKind, generate_instance
from onehot_lns.qubo import default_lambda, encode
from onehot_lns.sampler import AnnealSchedule, ExactSampler, sa_sample

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

logger = logging.getLogger("onehot_lns")

RUN_DEFAULTS = {
    "method": "binary",
    "lam": None,
    "bit_budget": 64,
    "region_size": None,
    "components": None,
    "iterations": 200,
    "trials": 16,
    "reads": 1000,
    "sweeps": 100,
    "seed": None,
    "solver": "sa",
    "embed": False,
    "hardware": "16,16,4",
    "defects": 0,
    "timing": False,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _hardware(text: str) -> tuple[int, int, int]:
    parts = [int(p) for p in text.replace("x", ",").split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("hardware must be m,n,l")
    return tuple(parts)


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {text!r}")


def _add_run_flags(p: argparse.ArgumentParser, with_method: bool) -> None:
    if with_method:
        p.add_argument("--method", choices=METHODS)
    else:
        p.add_argument("--methods", help="comma-separated subset of %s (default all)" % ",".join(METHODS))
    p.add_argument("--lam", type=float, help="penalty weight (default 2*max|J|)")
    p.add_argument("--bit-budget", type=int)
    p.add_argument("--region-size", type=int)
    p.add_argument("--components", type=int, help="components per variable (multivalued)")
    p.add_argument("--iterations", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--reads", type=int)
    p.add_argument("--sweeps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--solver", choices=("sa", "exact", "stub"))
    p.add_argument("--embed", action="store_const", const=True, default=None)
    p.add_argument("--hardware", help="chimera m,n,l (default 16,16,4)")
    p.add_argument("--defects", type=int, help="number of random defective qubits")
    p.add_argument("--timing", action="store_const", const=True, default=None,
                   help="write wall-clock millis (otherwise 0, keeping output reproducible)")
    p.add_argument("--config", type=Path, help="key = value file; flags win")
    p.add_argument("--out", type=Path, help="results CSV (default stdout)")
    p.add_argument("--aggregate", type=Path, help="aggregate min/mean/max CSV")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="onehot-lns", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write a benchmark Potts instance")
    p.add_argument("kind", help="ferro | antiferro | glass | gauge")
    p.add_argument("dims", type=int, nargs=3, metavar=("LX", "LY", "LZ"))
    p.add_argument("--q", type=int, default=4)
    p.add_argument("--seed", type=int)
    p.add_argument("--open", action="store_true", help="open instead of periodic boundaries")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("run", help="optimize an instance with one partitioning method")
    p.add_argument("instance", type=Path)
    _add_run_flags(p, with_method=True)

    p = sub.add_parser("compare", help="run several methods from shared initial states")
    p.add_argument("instance", type=Path)
    _add_run_flags(p, with_method=False)

    p = sub.add_parser("solve", help="sample a QUBO text file")
    p.add_argument("qubo", type=Path)
    p.add_argument("--reads", type=int, default=1000)
    p.add_argument("--sweeps", type=int, default=100)
    p.add_argument("--seed", type=int)
    p.add_argument("--solver", choices=("sa", "exact"), default="sa")
    p.add_argument("--out", type=Path)

    p = sub.add_parser("embed-stats", help="embedding statistics per partitioning method")
    p.add_argument("instance", type=Path)
    p.add_argument("--methods", default="multivalued,binary")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--hardware", default="16,16,4")
    p.add_argument("--defects", type=int, default=0)
    p.add_argument("--max-vars", type=int)
    p.add_argument("--lam", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path)
    p.add_argument("--dump-embedding", type=Path, help="write the first trial's chains per method")
    return parser


def _seed(args) -> int:
    if args.seed is None:
        print("master seed 0 (default)", file=sys.stderr)
        return 0
    return args.seed


def _emit(text: str, path: Path | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)


def _run_config(args) -> tuple[RunConfig, bool, list[str]]:
    values = dict(RUN_DEFAULTS, methods=",".join(METHODS))
    if args.config is not None:
        for k, v in fmt.read_config_file(args.config).items():
            if k not in values:
                raise UsageError(f"unknown config key {k!r}")
            values[k] = v
    for k in list(values):
        v = getattr(args, k, None)
        if v is not None:
            values[k] = v
    if values["seed"] is None:
        print("master seed 0 (default)", file=sys.stderr)
        values["seed"] = 0
    try:
        ints = ("bit_budget", "iterations", "trials", "reads", "sweeps", "seed", "defects")
        opt_ints = ("region_size", "components")
        for k in ints:
            values[k] = int(values[k])
        for k in opt_ints:
            values[k] = None if values[k] in (None, "", "none") else int(values[k])
        values["lam"] = None if values["lam"] in (None, "", "none") else float(values["lam"])
        values["embed"] = _bool(values["embed"])
        timing = _bool(values.pop("timing"))
        hw = values["hardware"]
        values["hardware"] = hw if isinstance(hw, tuple) else _hardware(hw)
    except (ValueError, argparse.ArgumentTypeError) as exc:
        raise UsageError(str(exc)) from exc
    methods = [m.strip() for m in values.pop("methods").split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise UsageError(f"unknown method(s) {bad}; choose from {METHODS}")
    try:
        config = RunConfig(**values)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return config, timing, methods


def cmd_generate(args) -> int:
    try:
        kind = ModelKind.parse(args.kind)
    except ValueError:
        raise UsageError(f"unknown model kind {args.kind!r}")
    seed = _seed(args)
    lattice = LatticeSpec(tuple(args.dims), periodic=not args.open)
    instance = generate_instance(kind, lattice, args.q, seed)
    digest = fmt.write_instance(args.out, instance)
    print(f"sha256 {digest}  {args.out}  ({instance.num_vars} vars, {instance.num_edges} edges, seed {seed})")
    return EXIT_OK


def _write_results(records, args, timing: bool) -> None:
    rows = [r for rec in records for r in rec.rows]
    _emit(fmt.rows_to_csv(rows, RESULT_COLUMNS, timing), args.out)
    if args.aggregate is not None:
        agg = [r for rec in records for r in rec.aggregate()]
        args.aggregate.write_text(fmt.rows_to_csv(agg, AGGREGATE_COLUMNS))
    for rec in records:
        for trial, it, msg in rec.errors:
            print(f"{rec.method} trial {trial} iteration {it}: {msg}", file=sys.stderr)


def cmd_run(args) -> int:
    config, timing, _ = _run_config(args)
    instance = fmt.read_instance(args.instance)
    record = run_experiment(instance, config)
    _write_results([record], args, timing)
    return EXIT_OK


def cmd_compare(args) -> int:
    config, timing, methods = _run_config(args)
    instance = fmt.read_instance(args.instance)
    records = compare(instance, config, methods)
    _write_results(list(records.values()), args, timing)
    return EXIT_OK


def cmd_solve(args) -> int:
    seed = _seed(args)
    qubo = fmt.read_qubo(args.qubo)
    if args.solver == "exact":
        samples = ExactSampler().solve(qubo, 1)
    else:
        samples = sa_sample(qubo, args.reads, AnnealSchedule(args.sweeps), seed)
    _emit(fmt.samples_to_csv(samples), args.out)
    return EXIT_OK


def embed_stats(instance, methods, trials: int, hw, seed: int, max_vars=None, lam=None):
    """Average embedding statistics over random current states."""
    lam = lam if lam is not None else default_lambda(instance)
    qubo, enc = encode(instance, lam)
    q = instance.q
    report, first = [], {}
    for method in methods:
        sizes, bits, logs = [], [], []
        hist: dict[int, float] = {}
        for t in range(trials):
            rng = np.random.default_rng(np.random.SeedSequence([seed, t]))
            current = rng.integers(1, q + 1, size=instance.num_vars)
            if method == "binary":
                beta = (current - 1 + rng.integers(1, q, size=instance.num_vars)) % q + 1
                e = emb.embed_binary(instance, current, beta, hw, rng.integers(2**32), max_vars)
            elif method == "multivalued":
                e, _ = emb.embed_multivalued(instance, enc, qubo, current, hw, rng.integers(2**32), max_vars)
            else:
                raise UsageError(f"embed-stats supports multivalued and binary, not {method!r}")
            stats = emb.embedding_stats(e, method)
            first.setdefault(method, e)
            sizes.append(stats["num_vars"])
            bits.append(stats["num_bits"])
            logs.append(stats["log10_feasible"])
            for k, v in stats["histogram"].items():
                hist[k] = hist.get(k, 0.0) + v
        report.append({
            "method": method,
            "trials": trials,
            "mean_vars": float(np.mean(sizes)),
            "mean_bits": float(np.mean(bits)),
            "mean_log10_feasible": float(np.mean(logs)),
            "histogram": {k: v / trials for k, v in sorted(hist.items())},
        })
    return report, first


def cmd_embed_stats(args) -> int:
    seed = _seed(args)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    try:
        m, n, l = _hardware(args.hardware)
    except (ValueError, argparse.ArgumentTypeError) as exc:
        raise UsageError(str(exc)) from exc
    defects = emb.random_defects(m, n, l, args.defects, seed) if args.defects else ()
    hw = emb.chimera(m, n, l, defects)
    instance = fmt.read_instance(args.instance)
    report, first = embed_stats(instance, methods, args.trials, hw, seed, args.max_vars, args.lam)
    lines = [f"# averaged over {args.trials} trials; hardware chimera({m},{n},{l}) "
             f"with {len(defects)} defects; seed {seed}",
             "method,trials,mean_vars,mean_bits,mean_log10_feasible,q_embed_histogram"]
    for r in report:
        hist = ";".join(f"{k}:{v:.3f}" for k, v in r["histogram"].items())
        lines.append(f"{r['method']},{r['trials']},{r['mean_vars']:.3f},{r['mean_bits']:.3f},"
                     f"{r['mean_log10_feasible']:.3f},{hist}")
    _emit("\n".join(lines) + "\n", args.out)
    if args.dump_embedding is not None:
        text = "".join(f"# {meth}\n{emb.dump_embedding(e)}" for meth, e in first.items())
        args.dump_embedding.write_text(text)
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "run": cmd_run,
    "compare": cmd_compare,
    "solve": cmd_solve,
    "embed-stats": cmd_embed_stats,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"onehot-lns: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (fmt.FormatError, ValueError, OSError) as exc:
        print(f"onehot-lns: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        logger.exception("internal error")
        print(f"onehot-lns: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

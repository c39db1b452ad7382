"""Command-line interface: ``sample``, ``verify`` and ``bench``.

Exit codes: 0 success, 1 verification failure, 2 usage or parse error.
Every CSV starts with ``#`` metadata lines echoing the effective
configuration, followed by a header row.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, TextIO

import numpy as np

from .pipeline import DEFAULT_MAGNITUDE_BOUND, Sampler, SamplerConfig, SampleOutcome
from .randomness import Label
from .samplers import tail_quantile_table
from .suites import SUITES, Check, run_suite

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
BOT = "⊥"

SAMPLE_COLUMNS = ("run", "seed", "result_index_or_bot", "instance", "z1", "z2", "Z", "mu")
VERIFY_COLUMNS = ("name", "measured", "threshold", "pass")
BENCH_COLUMNS = (
    "n", "updates", "tau", "k", "r", "instances", "mean_update_seconds", "median_update_seconds",
    "derivations_per_update", "sketch_derivations_per_update", "model_derivations_per_update",
)


class StreamParseError(ValueError):
    def __init__(self, path: str, line: int, message: str) -> None:
        super().__init__(f"{path}:{line}: {message}")
        self.line = line


@dataclass(frozen=True)
class StreamFile:
    n: int
    p: float
    updates: tuple[tuple[int, int], ...]  # 0-based indices


def _strip(line: str) -> str:
    return line.split("#", 1)[0].strip()


def _parse_header(text: str, path: str, lineno: int) -> tuple[int, float]:
    fields = dict(item.split("=", 1) for item in text.split() if "=" in item)
    if len(text.split()) != 2 or set(fields) != {"n", "p"}:
        raise StreamParseError(path, lineno, f"expected header 'n=<int> p=<real>', got {text!r}")
    try:
        n = int(fields["n"])
        p = float(fields["p"])
    except ValueError:
        raise StreamParseError(path, lineno, f"bad header values in {text!r}") from None
    if n < 1:
        raise StreamParseError(path, lineno, f"n must be at least 1, got {n}")
    if not (0.0 < p < 2.0):
        raise StreamParseError(path, lineno, f"p must lie in (0, 2), got {p}")
    return n, p


def parse_stream(lines: Sequence[str], path: str = "<stream>", bound: int = DEFAULT_MAGNITUDE_BOUND) -> StreamFile:
    """Parse a stream file: a header line, then ``<index> <delta>`` lines (1-based)."""
    header: Optional[tuple[int, float]] = None
    updates = []
    for lineno, raw in enumerate(lines, start=1):
        text = _strip(raw)
        if not text:
            continue
        if header is None:
            header = _parse_header(text, path, lineno)
            continue
        parts = text.split()
        if len(parts) != 2:
            raise StreamParseError(path, lineno, f"expected '<index> <delta>', got {text!r}")
        try:
            index, delta = int(parts[0]), int(parts[1])
        except ValueError:
            raise StreamParseError(path, lineno, f"index and delta must be integers, got {text!r}") from None
        if not 1 <= index <= header[0]:
            raise StreamParseError(path, lineno, f"index {index} outside [1, {header[0]}]")
        if abs(delta) > bound:
            raise StreamParseError(path, lineno, f"|delta| = {abs(delta)} exceeds {bound}")
        updates.append((index - 1, delta))
    if header is None:
        raise StreamParseError(path, max(len(lines), 1), "missing header 'n=<int> p=<real>'")
    return StreamFile(header[0], header[1], tuple(updates))


def read_stream(path: str) -> StreamFile:
    with open(path, encoding="utf-8") as fh:
        return parse_stream(fh.read().splitlines(), path)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else str(value)
    return str(value)


def write_csv(out: TextIO, metadata: dict, columns: Sequence[str], rows: Sequence[Sequence]) -> None:
    for key, value in metadata.items():
        out.write(f"# {key}={_fmt(value)}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])


def _emit(path: Optional[str], metadata: dict, columns, rows) -> None:
    if path is None or path == "-":
        write_csv(sys.stdout, metadata, columns, rows)
        return
    buf = io.StringIO()
    write_csv(buf, metadata, columns, rows)
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def outcome_row(run: int, seed: int, outcome: SampleOutcome) -> list:
    diag = outcome.reported
    result = BOT if outcome.result is None else outcome.result + 1
    instance = "" if outcome.instance is None else outcome.instance
    if diag is None:
        return [run, seed, result, instance, "", "", "", ""]
    return [run, seed, result, instance, diag.z1, diag.z2, diag.Z, diag.mu]


def cmd_sample(args: argparse.Namespace) -> int:
    stream = read_stream(args.stream)
    base = SamplerConfig(n=stream.n, p=stream.p, delta=args.delta, seed=args.seed)
    rows = []
    for run in range(args.runs):
        config = base.with_seed(args.seed + run)
        sampler = Sampler(config)
        sampler.process_stream(stream.updates)
        rows.append(outcome_row(run, config.seed, sampler.finalize()))
    metadata = {"command": "sample", "stream": args.stream, "runs": args.runs, "updates": len(stream.updates)}
    metadata.update(base.describe())
    _emit(args.out, metadata, SAMPLE_COLUMNS, rows)
    return EXIT_OK


def check_rows(checks: Sequence[Check]) -> list[list]:
    return [[c.name, c.measured, c.threshold, "PASS" if c.passed else "FAIL"] for c in checks]


def cmd_verify(args: argparse.Namespace) -> int:
    checks = run_suite(args.suite, args.seed)
    passed = all(c.passed for c in checks)
    metadata = {"command": "verify", "suite": args.suite, "seed": args.seed, "checks": len(checks),
                "all_passed": passed}
    _emit(args.out, metadata, VERIFY_COLUMNS, check_rows(checks))
    if args.out not in (None, "-"):
        failed = [c.name for c in checks if not c.passed]
        print(f"{args.suite}: {len(checks) - len(failed)}/{len(checks)} checks passed", file=sys.stderr)
        for name in failed:
            print(f"  FAIL {name}", file=sys.stderr)
    return EXIT_OK if passed else EXIT_FAILED


def bench_config(n: int, seed: int) -> SamplerConfig:
    """Default parameters for ``n`` with p = 1 and no column cache."""
    return SamplerConfig(n=n, p=1.0, seed=seed, column_cache=0)


def bench_one(n: int, updates: int, seed: int) -> list:
    config = bench_config(n, seed)
    sampler = Sampler(config)
    rng = np.random.default_rng([seed, n])
    coords = rng.integers(0, n, size=updates)
    deltas = rng.integers(1, 10, size=updates)
    times = np.empty(updates)
    counter = sampler.counter
    total0, sketch0 = counter.total(), counter.by_role(Label.SKETCH)
    for j, (i, d) in enumerate(zip(coords, deltas)):
        start = time.perf_counter()
        sampler.process_update(int(i), int(d))
        times[j] = time.perf_counter() - start
    total = (counter.total() - total0) / updates
    sketch = (counter.by_role(Label.SKETCH) - sketch0) / updates
    model = config.instances * config.r * config.k * (config.tau + 1)
    return [n, updates, config.tau, config.k, config.r, config.instances,
            float(times.mean()), float(np.median(times)), total, sketch, model]


def cmd_bench(args: argparse.Namespace) -> int:
    if args.updates < 1 or any(n < 1 for n in args.n):
        raise ValueError("--n values and --updates must be positive")
    # build the shared tail table before anything is timed
    tail_quantile_table(1.0, SamplerConfig(n=1, p=1.0).quadrature)
    rows = [bench_one(n, args.updates, args.seed) for n in args.n]
    metadata = {"command": "bench", "n": " ".join(map(str, args.n)), "updates": args.updates, "seed": args.seed,
                "p": 1.0, "column_cache": 0}
    _emit(args.out, metadata, BENCH_COLUMNS, rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lp-sampler", description="Streaming L_p sampler.")
    sub = parser.add_subparsers(dest="command", required=True)

    sample = sub.add_parser("sample", help="run the sampler on a stream file")
    sample.add_argument("stream", help="stream file: 'n=<int> p=<real>' header, then '<index> <delta>' lines")
    sample.add_argument("--seed", type=int, default=0)
    sample.add_argument("--delta", type=float, default=0.05, help="failure probability")
    sample.add_argument("--runs", type=int, default=1)
    sample.add_argument("--out", default=None, help="CSV path (default stdout)")
    sample.set_defaults(func=cmd_sample)

    verify = sub.add_parser("verify", help="run a verification suite")
    verify.add_argument("suite", choices=sorted(SUITES))
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--out", default=None, help="CSV path (default stdout)")
    verify.set_defaults(func=cmd_verify)

    bench = sub.add_parser("bench", help="per-update cost for several n")
    bench.add_argument("--n", type=int, nargs="+", default=[256, 4096])
    bench.add_argument("--updates", type=int, default=20)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--out", default=None, help="CSV path (default stdout)")
    bench.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "runs", 1) < 1:
        parser.error("--runs must be positive")
    try:
        return args.func(args)
    except (StreamParseError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

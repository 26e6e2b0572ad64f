"""Command-line entry point: ``flowquant <subcommand> [flags]``.

Exit status: 0 on success, 1 on usage errors, 2 on data errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys

from . import bench
from .codecs import CodecConfig, baseline_gz_bytes, compress_group, decompress_group
from .container import ContainerError, deserialize_stream, serialize
from .flow_model import (FlowDataError, Schema, SplitSpec, load_csv, partition_by_group,
                         read_schema_file, write_csv)
from .forest import ForestConfig
from .synthetic import SyntheticSpec, generate_synthetic
from .utility_eval import utility_pipeline
from .vq_codec import TooManyClustersError

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _shared(p: argparse.ArgumentParser, codec: bool = False, forest: bool = False):
    p.add_argument("--input", metavar="PATH")
    p.add_argument("--output", metavar="PATH")
    p.add_argument("--seed", type=int, default=0, metavar="N")
    p.add_argument("--jobs", type=int, default=1, metavar="N")
    p.add_argument("--schema", metavar="FILE", help="key=value column-role mapping")
    if codec:
        p.add_argument("--codec", default="sq", choices=["raw", "sq", "pca", "pca_sq", "vq"])
        p.add_argument("--bits", type=int, default=8, metavar="N")
        p.add_argument("--variance", type=float, default=0.99, metavar="X")
        p.add_argument("--k-fraction", type=float, default=0.05, metavar="X")
        p.add_argument("--subsample", type=float, default=1.0, metavar="X")
        p.add_argument("--float32", action="store_true", help="32-bit PCA coordinates")
    if forest:
        p.add_argument("--trees", type=int, default=100, metavar="N")
        p.add_argument("--min-class-flows", type=int, default=50, metavar="N")
        p.add_argument("--train-fraction", type=float, default=0.5, metavar="X")


def _synthetic_flags(p: argparse.ArgumentParser):
    d = SyntheticSpec()
    p.add_argument("--groups", type=int, default=d.n_groups)
    p.add_argument("--classes", type=int, default=d.classes_per_group)
    p.add_argument("--rows", type=int, default=d.rows_per_class)
    p.add_argument("--columns", type=int, default=d.d)
    p.add_argument("--clients", type=int, default=d.n_clients)
    p.add_argument("--separation", type=float, default=d.separation)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="flowquant", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("compress", help="CSV -> one container per group, concatenated")
    _shared(p, codec=True)
    p = sub.add_parser("decompress", help="containers -> CSV (group + numeric columns)")
    _shared(p)
    p = sub.add_parser("gen-synthetic", help="write a seeded synthetic flow CSV")
    _shared(p)
    _synthetic_flags(p)
    p = sub.add_parser("utility", help="per-class F1 after a compression round trip")
    _shared(p, codec=True, forest=True)
    _synthetic_flags(p)
    for name in ("bench-sq", "bench-pca", "bench-vq"):
        p = sub.add_parser(name, help=f"{name[6:].upper()} parameter sweep as CSV")
        _shared(p, forest=True)
        _synthetic_flags(p)
        p.add_argument("--grid", action="append", default=[], metavar="AXIS=V1,V2",
                       help="override a sweep axis, e.g. sq_bits=2,4")
        if name == "bench-vq":
            p.add_argument("--timing-repeats", type=int, default=1, metavar="N")
    return parser


def _schema(args) -> Schema | None:
    return read_schema_file(args.schema) if args.schema else None


def _table(args):
    if args.input:
        return load_csv(args.input, _schema(args))
    return generate_synthetic(_synthetic_spec(args))


def _synthetic_spec(args) -> SyntheticSpec:
    return SyntheticSpec(n_groups=args.groups, classes_per_group=args.classes,
                         rows_per_class=args.rows, d=args.columns, seed=args.seed,
                         separation=args.separation, n_clients=args.clients)


def _codec(args) -> CodecConfig:
    return CodecConfig(args.codec, bits=args.bits, variance=args.variance,
                       float32=args.float32, k_fraction=args.k_fraction,
                       subsample=args.subsample, seed=args.seed)


def _forest(args) -> ForestConfig:
    return ForestConfig(n_trees=args.trees, seed=args.seed, min_class_flows=args.min_class_flows)


def _grid(args) -> bench.ExperimentGrid:
    axes = {}
    valid = {"sq_bits": int, "pca_variance": float, "vq_k_fractions": float,
             "vq_subsamples": float}
    for item in args.grid:
        key, _, values = item.partition("=")
        if key not in valid or not values:
            raise UsageError(f"bad --grid entry {item!r}; axes: {', '.join(valid)}")
        try:
            axes[key] = tuple(valid[key](v) for v in values.split(","))
        except ValueError:
            raise UsageError(f"bad value in --grid {item!r}") from None
    return bench.ExperimentGrid(**axes)


def _emit(text: str | bytes, path: str | None):
    if path is None or path == "-":
        if isinstance(text, bytes):
            sys.stdout.buffer.write(text)
        else:
            sys.stdout.write(text)
        return
    mode = "wb" if isinstance(text, bytes) else "w"
    with open(path, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
        fh.write(text)


def cmd_compress(args) -> int:
    if not args.input:
        raise UsageError("compress needs --input")
    table = load_csv(args.input, _schema(args))
    codec = _codec(args)
    blobs, gz, base = [], 0, 0
    for group, part in partition_by_group(table).items():
        blob = serialize(compress_group(part.numeric, table.column_names, group, codec,
                                        jobs=args.jobs).artifact)
        blobs.append(blob)
        gz += len(blob)
        base += baseline_gz_bytes(part.numeric, table.column_names, group)
    _emit(b"".join(blobs), args.output or None)
    print(f"groups={len(blobs)} rows={table.n} dropped={table.dropped_rows} "
          f"bytes={gz} baseline_bytes={base} ratio_pct={100.0 * gz / base:.3f}",
          file=sys.stderr)
    return EXIT_OK


def cmd_decompress(args) -> int:
    if not args.input:
        raise UsageError("decompress needs --input")
    try:
        with open(args.input, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise FlowDataError(str(exc)) from None
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = None
    for artifact in deserialize_stream(data):
        x, names = decompress_group(artifact)
        if header is None:
            header = ("group",) + names
            writer.writerow(header)
        elif ("group",) + names != header:
            raise ContainerError("groups disagree on column names")
        for row in x:
            writer.writerow([artifact.group_id, *map(repr, row.tolist())])
    _emit(buf.getvalue(), args.output)
    return EXIT_OK


def cmd_gen_synthetic(args) -> int:
    if not args.output:
        raise UsageError("gen-synthetic needs --output")
    table = generate_synthetic(_synthetic_spec(args))
    write_csv(table, args.output)
    return EXIT_OK


def cmd_utility(args) -> int:
    table = _table(args)
    codec = None if args.codec == "raw" and not args.float32 else _codec(args)
    res = utility_pipeline(table, codec, _forest(args), SplitSpec(args.train_fraction, args.seed),
                           jobs=args.jobs)
    _emit(res.f1.to_csv(), args.output)
    if res.size is not None:
        print(f"ratio_pct={res.size.ratio_pct:.3f} f1_median={res.f1.median:.4f}",
              file=sys.stderr)
    return EXIT_OK


def cmd_bench(args) -> int:
    table = _table(args)
    grid = _grid(args)
    common = dict(forest_cfg=_forest(args), split=SplitSpec(args.train_fraction, args.seed),
                  jobs=args.jobs, seed=args.seed)
    if args.command == "bench-sq":
        rows, cols = bench.run_sq_sweep(table, grid, **common), bench.SQ_COLUMNS
    elif args.command == "bench-pca":
        rows, cols = bench.run_pca_grid(table, grid, **common), bench.PCA_COLUMNS
    else:
        rows = bench.run_vq_sweep(table, grid, timing_repeats=args.timing_repeats, **common)
        cols = bench.VQ_COLUMNS
    _emit(bench.rows_to_csv(rows, cols), args.output)
    return EXIT_OK


COMMANDS = {"compress": cmd_compress, "decompress": cmd_decompress,
            "gen-synthetic": cmd_gen_synthetic, "utility": cmd_utility,
            "bench-sq": cmd_bench, "bench-pca": cmd_bench, "bench-vq": cmd_bench}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("flowquant: error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (FlowDataError, ContainerError, TooManyClustersError, OSError) as exc:
        print(f"flowquant: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (UsageError, ValueError) as exc:
        print(f"flowquant: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

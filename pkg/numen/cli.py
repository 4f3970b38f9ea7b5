"""numen 命令行入口。

子命令：encode / index / search / eval / sweep / collisions / gensynth / bm25 / compare。
数据写 stdout 或文件，诊断信息写 stderr；成功退出码 0，运行错误 1，用法错误 2。

search 输出为 TREC 风格运行结果，但省略字面量 "Q0" 列：
``query_id<TAB>doc_id<TAB>rank<TAB>score``。
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from numen import __version__
from numen.config import Settings, get_settings
from numen.models.enums import HashVariant
from numen.schemas.encoder import EncoderConfig
from numen.schemas.evaluation import Qrels, RecallReport, SweepRow
from numen.schemas.ingest import QueryRecord, SynthSpec
from numen.schemas.manifest import Timings
from numen.services.encoder import encode, encode_stats
from numen.services.evaluation import (
    SWEEP_CSV_HEADER,
    collision_probability,
    dimension_sweep,
    evaluate_bm25,
    evaluate_dense,
    format_report_table,
    format_sweep_table,
    format_system_table,
    measure_empirical_collisions,
    ranked_ids,
    recall_at_k,
    recall_rows,
    run_queries,
    write_sweep_csv,
)
from numen.services.index import (
    VectorIndex,
    build_index,
    estimate_footprint,
    load_index,
    save_index,
)
from numen.services.ingest import (
    format_run_lines,
    load_corpus,
    load_qrels,
    load_queries,
    load_run,
    write_run,
)
from numen.services.manifest import build_manifest, write_manifest
from numen.services.synthetic import write_synthetic
from numen.utils.storage import ensure_parent, write_csv


logger = logging.getLogger("numen.cli")

DEFAULT_SWEEP_DIMS = (512, 1024, 2048, 4096, 8192, 16384, 32768)


class UsageError(ValueError):
    """参数组合不合法。"""


def _int_list(value: str) -> Tuple[int, ...]:
    try:
        items = tuple(int(v) for v in value.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {value!r}") from exc
    if not items or any(v < 1 for v in items):
        raise argparse.ArgumentTypeError(f"expected positive integers, got {value!r}")
    return items


def _float_list(value: str) -> Tuple[float, ...]:
    try:
        items = tuple(float(v) for v in value.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {value!r}") from exc
    if not items:
        raise argparse.ArgumentTypeError("expected at least one weight")
    return items


def _positive_int(value: str) -> int:
    try:
        number = int(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected an integer, got {value!r}") from exc
    if number < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value!r}")
    return number


# === Resolution helpers ===

def _threads(args: argparse.Namespace, settings: Settings) -> int:
    return args.threads if getattr(args, "threads", None) else settings.threads


def _k_values(args: argparse.Namespace, settings: Settings) -> Tuple[int, ...]:
    return tuple(sorted(set(args.k or settings.k_values)))


def _encoder_config(args: argparse.Namespace, settings: Settings) -> EncoderConfig:
    ngrams = args.ngrams or settings.ngram_sizes
    weights = args.weights or settings.weights
    if args.ngrams and not args.weights and len(ngrams) != len(settings.weights):
        raise UsageError("--ngrams changes the number of sizes; pass matching --weights")
    try:
        return EncoderConfig.from_parts(
            dimension=args.dim or settings.dimension,
            ngram_sizes=ngrams,
            weights=weights,
            hash_variant=args.hash or settings.hash_variant,
        )
    except ValidationError as exc:
        raise UsageError(f"invalid encoder configuration: {exc}") from exc
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _explicit_encoder_flags(args: argparse.Namespace) -> bool:
    return any(getattr(args, name, None) for name in ("dim", "ngrams", "weights", "hash"))


def _resolved(args: argparse.Namespace, **extra: Any) -> Dict[str, Any]:
    """命令行参数 + 显式解析值 + 全部默认配置，写入运行清单。"""

    config = {
        key: (str(value) if isinstance(value, Path) else value)
        for key, value in vars(args).items()
        if key != "handler"
    }
    config.update(extra)
    config["settings"] = get_settings().model_dump(mode="json")
    return config


def _load_query_records(args: argparse.Namespace) -> List[QueryRecord]:
    if args.query is not None:
        return [QueryRecord(query_id=args.query_id, text=args.query)]
    return list(load_queries(args.queries))


# === Commands ===

def cmd_encode(args: argparse.Namespace, settings: Settings) -> int:
    config = _encoder_config(args, settings)
    if args.file is not None:
        text = Path(args.file).read_text(encoding="utf-8")
    else:
        text = args.text
    started = time.perf_counter()
    vector = encode(text, config)
    elapsed = time.perf_counter() - started
    stats = encode_stats(text, config)
    if stats.ngram_count == 0:
        logger.warning("input produced no n-grams; emitting the all-zero vector")
    if args.stats:
        print(
            f"ngrams={stats.ngram_count} distinct={stats.distinct_ngrams} "
            f"nonzero={stats.nonzero_components} collided={stats.collided_ngrams}",
            file=sys.stderr,
        )
    if args.out is not None:
        out = ensure_parent(args.out)
        vector.astype("<f4").tofile(out)
        write_manifest(
            build_manifest(
                "encode",
                _resolved(args),
                [args.file],
                [out],
                Timings(elapsed_seconds=elapsed),
                encoder=config,
                extra={"stats": stats.model_dump()},
            ),
            out,
        )
    else:
        sys.stdout.write(json.dumps([float(x) for x in vector]) + "\n")
    return 0


def cmd_index(args: argparse.Namespace, settings: Settings) -> int:
    config = _encoder_config(args, settings)
    threads = _threads(args, settings)
    corpus = list(load_corpus(args.corpus))
    started = time.perf_counter()
    index = build_index(corpus, config, n_jobs=threads)
    elapsed = time.perf_counter() - started
    docs_per_sec = index.count / elapsed if elapsed > 0 else None
    size = save_index(index, args.out)
    logger.info(
        "%d documents, %.0f docs/sec, footprint %.1f MiB (%d bytes on disk)",
        index.count, docs_per_sec or 0.0, index.footprint_bytes() / 2**20, size,
    )
    write_manifest(
        build_manifest(
            "index",
            _resolved(args, threads=threads),
            [args.corpus],
            [args.out],
            Timings(elapsed_seconds=elapsed, index_docs_per_sec=docs_per_sec),
            encoder=config,
            extra={"documents": index.count, "footprint_bytes": index.footprint_bytes()},
        ),
        args.out,
    )
    return 0


def _open_index(args: argparse.Namespace) -> VectorIndex:
    index = load_index(args.index)
    if _explicit_encoder_flags(args):
        # unset flags default to the index's own values
        ngrams = args.ngrams or index.config.ngram_sizes
        weights = args.weights or tuple(index.config.weight_for_length(n) for n in ngrams)
        try:
            requested = EncoderConfig.from_parts(
                dimension=args.dim or index.config.dimension,
                ngram_sizes=ngrams,
                weights=weights,
                hash_variant=args.hash or index.config.hash_variant,
            )
        except ValueError as exc:
            raise UsageError(f"invalid encoder configuration: {exc}") from exc
        index.check_config(requested)
    return index


def cmd_search(args: argparse.Namespace, settings: Settings) -> int:
    threads = _threads(args, settings)
    index = _open_index(args)
    queries = _load_query_records(args)
    started = time.perf_counter()
    results = run_queries(index, queries, args.k, n_jobs=threads)
    elapsed = time.perf_counter() - started
    if args.out is None:
        sys.stdout.writelines(format_run_lines(results))
        return 0
    write_run(results, args.out)
    write_manifest(
        build_manifest(
            "search",
            _resolved(args, threads=threads),
            [args.index, args.queries],
            [args.out],
            _query_timings(len(queries), elapsed),
            encoder=index.config,
        ),
        args.out,
    )
    return 0


def _query_timings(count: int, elapsed: float, **extra: Any) -> Timings:
    return Timings(
        elapsed_seconds=elapsed,
        query_qps=count / elapsed if elapsed > 0 else None,
        query_ms_mean=elapsed * 1000.0 / count if count else None,
        **extra,
    )


def cmd_eval(args: argparse.Namespace, settings: Settings) -> int:
    threads = _threads(args, settings)
    ks = _k_values(args, settings)
    queries = list(load_queries(args.queries))
    qrels = load_qrels(args.qrels)
    if args.run is not None:
        return _eval_run_file(args, queries, qrels, ks)

    index = _open_index(args)
    started = time.perf_counter()
    results = run_queries(index, queries, max(ks), n_jobs=threads)
    elapsed = time.perf_counter() - started
    report = recall_at_k(ranked_ids(results), qrels, ks, index.config.fingerprint())
    rows = recall_rows(report, index.dimension)
    print(format_sweep_table(rows))
    outputs: List[Path] = []
    if args.out is not None:
        write_sweep_csv(rows, args.out)
        outputs.append(args.out)
    if args.run_out is not None:
        write_run(results, args.run_out)
        outputs.append(args.run_out)
    if args.per_query is not None:
        _write_per_query(report, args.per_query)
        outputs.append(args.per_query)
    if outputs:
        write_manifest(
            build_manifest(
                "eval",
                _resolved(args, threads=threads, k=list(ks)),
                [args.index, args.queries, args.qrels],
                outputs,
                _query_timings(len(queries), elapsed),
                encoder=index.config,
                extra={"aggregate": report.aggregate, "excluded": report.excluded},
            ),
            outputs[0],
        )
    return 0


def _write_per_query(report: RecallReport, path: Path) -> None:
    write_csv(
        path,
        ("query_id", "k", "recall"),
        (
            (qid, k, f"{values[k]:.6f}")
            for qid, values in report.per_query.items()
            for k in report.k_values
        ),
    )


def _eval_run_file(
    args: argparse.Namespace,
    queries: List[QueryRecord],
    qrels: Qrels,
    ks: Tuple[int, ...],
) -> int:
    """对已有运行结果文件评测；查询文件里没有结果的查询按空排名计。"""

    started = time.perf_counter()
    run = ranked_ids(load_run(args.run))
    results = {q.query_id: run.get(q.query_id, []) for q in queries}
    report = recall_at_k(results, qrels, ks)
    elapsed = time.perf_counter() - started
    print(format_report_table(report, args.run.name))
    outputs: List[Path] = []
    if args.out is not None:
        write_csv(
            args.out,
            SWEEP_CSV_HEADER,
            (("", k, f"{report.aggregate[k]:.6f}") for k in report.k_values),
        )
        outputs.append(args.out)
    if args.per_query is not None:
        _write_per_query(report, args.per_query)
        outputs.append(args.per_query)
    if outputs:
        write_manifest(
            build_manifest(
                "eval",
                _resolved(args, k=list(ks)),
                [args.run, args.queries, args.qrels],
                outputs,
                Timings(elapsed_seconds=elapsed),
                extra={"aggregate": report.aggregate, "excluded": report.excluded},
            ),
            outputs[0],
        )
    return 0


def cmd_sweep(args: argparse.Namespace, settings: Settings) -> int:
    threads = _threads(args, settings)
    ks = _k_values(args, settings)
    config = _encoder_config(args, settings)
    dims = args.dims or DEFAULT_SWEEP_DIMS
    corpus = list(load_corpus(args.corpus))
    queries = list(load_queries(args.queries))
    qrels = load_qrels(args.qrels)
    started = time.perf_counter()
    rows: List[SweepRow] = dimension_sweep(
        corpus, queries, qrels, dims, ks, config=config, parallel=args.parallel, n_jobs=threads
    )
    elapsed = time.perf_counter() - started
    print(format_sweep_table(rows))
    if args.out is not None:
        write_sweep_csv(rows, args.out)
        write_manifest(
            build_manifest(
                "sweep",
                _resolved(args, threads=threads, k=list(ks), dims=sorted(set(dims))),
                [args.corpus, args.queries, args.qrels],
                [args.out],
                Timings(elapsed_seconds=elapsed),
                encoder=config,
            ),
            args.out,
        )
    return 0


def cmd_collisions(args: argparse.Namespace, settings: Settings) -> int:
    if args.corpus is None and args.n is None:
        raise UsageError("collisions needs --n (formula) and/or --corpus (empirical)")
    config = _encoder_config(args, settings)
    if args.n is not None:
        probability = collision_probability(args.n, config.dimension)
        print(f"formula: n={args.n} d={config.dimension} P(collision)={probability:.6f}")
    if args.corpus is not None:
        texts = [doc.encoded_text for doc in load_corpus(args.corpus)]
        report = measure_empirical_collisions(texts, config)
        mean_n = max(1, round(report.mean_distinct_ngrams))
        print(
            f"empirical: texts={report.num_texts} d={report.dimension} "
            f"mean_distinct_ngrams={report.mean_distinct_ngrams:.2f} "
            f"text_collision_rate={report.text_collision_rate:.6f} "
            f"pair_collision_fraction={report.pair_collision_fraction:.8f}"
        )
        print(
            f"formula at mean n={mean_n}: "
            f"P(collision)={collision_probability(mean_n, config.dimension):.6f}"
        )
    return 0


def cmd_gensynth(args: argparse.Namespace, settings: Settings) -> int:
    try:
        spec = SynthSpec(
            num_people=args.people,
            num_attributes=args.attributes,
            attributes_per_person=args.per_person,
            attributes_per_query=args.per_query,
            num_queries=args.queries,
            seed=args.seed,
        )
    except ValidationError as exc:
        raise UsageError(f"invalid synthetic spec: {exc}") from exc
    started = time.perf_counter()
    paths = write_synthetic(spec, args.out_dir)
    elapsed = time.perf_counter() - started
    write_manifest(
        build_manifest(
            "gensynth",
            _resolved(args),
            [],
            list(paths.values()),
            Timings(elapsed_seconds=elapsed),
            extra={"spec": spec.model_dump()},
        ),
        args.out_dir,
    )
    return 0


def cmd_bm25(args: argparse.Namespace, settings: Settings) -> int:
    ks = _k_values(args, settings)
    k1 = settings.bm25_k1 if args.k1 is None else args.k1
    b = settings.bm25_b if args.b is None else args.b
    corpus = list(load_corpus(args.corpus))
    queries = list(load_queries(args.queries))
    qrels = load_qrels(args.qrels)
    started = time.perf_counter()
    report, _, row = evaluate_bm25(corpus, queries, qrels, ks, k1=k1, b=b)
    elapsed = time.perf_counter() - started
    print(format_system_table([row]))
    if args.out is not None:
        write_csv(
            args.out,
            ("system", "k", "recall"),
            (("bm25", k, f"{report.aggregate[k]:.6f}") for k in report.k_values),
        )
        write_manifest(
            build_manifest(
                "bm25",
                _resolved(args, k=list(ks), k1=k1, b=b),
                [args.corpus, args.queries, args.qrels],
                [args.out],
                Timings(
                    elapsed_seconds=elapsed,
                    index_docs_per_sec=row.index_docs_per_sec,
                    query_qps=row.query_qps,
                ),
            ),
            args.out,
        )
    return 0


def cmd_compare(args: argparse.Namespace, settings: Settings) -> int:
    threads = _threads(args, settings)
    ks = _k_values(args, settings)
    k1 = settings.bm25_k1 if args.k1 is None else args.k1
    b = settings.bm25_b if args.b is None else args.b
    config = _encoder_config(args, settings)
    dims = args.dims or (settings.dimension,)
    corpus = list(load_corpus(args.corpus))
    queries = list(load_queries(args.queries))
    qrels = load_qrels(args.qrels)
    started = time.perf_counter()
    _, _, bm25_row = evaluate_bm25(corpus, queries, qrels, ks, k1=k1, b=b)
    rows = [bm25_row]
    for dimension in sorted(set(dims), reverse=True):
        logger.info(
            "NUMEN d=%d: dense footprint %.1f MiB",
            dimension, estimate_footprint(len(corpus), dimension) / 2**20,
        )
        _, row = evaluate_dense(
            corpus, queries, qrels, ks, config.with_dimension(dimension), n_jobs=threads
        )
        rows.append(row)
    elapsed = time.perf_counter() - started
    print(format_system_table(rows))
    if args.out is not None:
        write_csv(
            args.out,
            ("system", "dimension", "k", "recall", "index_docs_per_sec", "query_qps"),
            (
                (
                    r.system, r.dimension or "", k, f"{r.recall[k]:.6f}",
                    f"{r.index_docs_per_sec:.1f}", f"{r.query_qps:.2f}",
                )
                for r in rows
                for k in sorted(r.recall)
            ),
        )
        write_manifest(
            build_manifest(
                "compare",
                _resolved(args, threads=threads, k=list(ks), k1=k1, b=b),
                [args.corpus, args.queries, args.qrels],
                [args.out],
                Timings(elapsed_seconds=elapsed),
                encoder=config,
                extra={"systems": [r.model_dump() for r in rows]},
            ),
            args.out,
        )
    return 0


# === Parser ===

def _add_encoder_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("encoder")
    group.add_argument("--dim", type=_positive_int, help="vector dimension (default 32768)")
    group.add_argument("--ngrams", type=_int_list, help="n-gram sizes, e.g. 3,4,5")
    group.add_argument("--weights", type=_float_list, help="weights aligned with --ngrams, e.g. 1,5,10")
    group.add_argument(
        "--hash",
        choices=[variant.value for variant in HashVariant],
        help="CRC32 variant (default crc32-ieee)",
    )


def _add_threads(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--threads", type=_positive_int, help="worker cap (fallback: NUMEN_THREADS, then 1)"
    )


def _add_k(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--k", type=_int_list, help="recall cutoffs, e.g. 2,10,100")


def _add_dataset(parser: argparse.ArgumentParser, corpus: bool = True) -> None:
    if corpus:
        parser.add_argument("--corpus", type=Path, required=True, help="corpus.jsonl")
    parser.add_argument("--queries", type=Path, required=True, help="queries.jsonl")
    parser.add_argument("--qrels", type=Path, required=True, help="qrels.tsv")


def create_parser() -> argparse.ArgumentParser:
    """构建参数解析器，便于测试与扩展子命令。"""

    parser = argparse.ArgumentParser(
        prog="numen",
        description="Training-free dense retrieval with hashed character n-grams.",
    )
    parser.add_argument("--version", action="version", version=f"numen {__version__}")
    parser.add_argument("--log-level", help="log level (fallback: NUMEN_LOG_LEVEL, then INFO)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="encode one text and print its vector as JSON")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--text")
    source.add_argument("--file", type=Path)
    p.add_argument("--out", type=Path, help="write little-endian float32 binary instead of JSON")
    p.add_argument("--stats", action="store_true", help="report n-gram and nonzero counts on stderr")
    _add_encoder_flags(p)
    p.set_defaults(handler=cmd_encode)

    p = sub.add_parser("index", help="encode a corpus into an index file")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    _add_encoder_flags(p)
    _add_threads(p)
    p.set_defaults(handler=cmd_index)

    p = sub.add_parser(
        "search",
        help="rank documents for queries",
        description="Output rows: query_id<TAB>doc_id<TAB>rank<TAB>score "
        "(TREC run layout without the Q0 column).",
    )
    p.add_argument("--index", type=Path, required=True)
    target = p.add_mutually_exclusive_group(required=True)
    target.add_argument("--query", help="a single query text")
    target.add_argument("--queries", type=Path, help="queries.jsonl")
    p.add_argument("--query-id", default="query", help="id used for --query (default: query)")
    p.add_argument("-k", "--top", dest="k", type=_positive_int, default=10)
    p.add_argument("--out", type=Path, help="write the run TSV here instead of stdout")
    _add_encoder_flags(p)
    _add_threads(p)
    p.set_defaults(handler=cmd_search)

    p = sub.add_parser("eval", help="Recall@k of an index (or an existing run file) against qrels")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--index", type=Path)
    source.add_argument("--run", type=Path, help="evaluate this run TSV instead of searching")
    _add_dataset(p, corpus=False)
    _add_k(p)
    p.add_argument("--out", type=Path, help="CSV with header dimension,k,recall")
    p.add_argument("--run-out", type=Path, help="also write the run TSV")
    p.add_argument("--per-query", type=Path, help="CSV of per-query recall")
    _add_encoder_flags(p)
    _add_threads(p)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("sweep", help="Recall@k across dimensions")
    _add_dataset(p)
    p.add_argument("--dims", type=_int_list, help="dimensions (default 512,...,32768)")
    _add_k(p)
    p.add_argument("--out", type=Path, help="CSV with header dimension,k,recall")
    p.add_argument("--parallel", action="store_true", help="evaluate dimensions concurrently")
    _add_encoder_flags(p)
    _add_threads(p)
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("collisions", help="birthday-bound and measured hash collision rates")
    p.add_argument("--n", type=_positive_int, help="number of distinct n-grams for the formula")
    p.add_argument("--corpus", type=Path, help="measure collisions on this corpus")
    _add_encoder_flags(p)
    p.set_defaults(handler=cmd_collisions)

    p = sub.add_parser("gensynth", help="generate a synthetic LIMIT-style dataset")
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--people", type=_positive_int, default=5000)
    p.add_argument("--attributes", type=_positive_int, default=200)
    p.add_argument("--per-person", type=_positive_int, default=10)
    p.add_argument("--per-query", type=_positive_int, default=2)
    p.add_argument("--queries", type=_positive_int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_gensynth)

    p = sub.add_parser("bm25", help="Recall@k of the BM25 baseline")
    _add_dataset(p)
    _add_k(p)
    p.add_argument("--k1", type=float, help="term saturation (default 0.9)")
    p.add_argument("--b", type=float, help="length normalization (default 0.75)")
    p.add_argument("--out", type=Path, help="CSV with header system,k,recall")
    p.set_defaults(handler=cmd_bm25)

    p = sub.add_parser("compare", help="BM25 vs NUMEN recall and throughput table")
    _add_dataset(p)
    p.add_argument("--dims", type=_int_list, help="NUMEN dimensions (default --dim)")
    _add_k(p)
    p.add_argument("--k1", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--out", type=Path, help="CSV, one row per (system, k)")
    _add_encoder_flags(p)
    _add_threads(p)
    p.set_defaults(handler=cmd_compare)

    return parser


def configure_logging(level: str) -> None:
    logging.basicConfig(
        level=level.upper(),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = create_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        settings = get_settings()
    except ValidationError as exc:
        print(f"invalid NUMEN_* environment: {exc}", file=sys.stderr)
        return 2
    try:
        configure_logging(args.log_level or settings.log_level)
    except ValueError as exc:
        print(f"invalid log level: {exc}", file=sys.stderr)
        return 2

    handler: Callable[[argparse.Namespace, Settings], int] = args.handler
    try:
        return handler(args, settings)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        logger.error("%s", exc)
        return 2
    except (ValueError, OSError) as exc:
        logger.error("%s", exc)
        return 1

"""在本地 LIMIT 公开数据上复现维度扫描表（Recall@2/10/100）。

数据目录需包含 corpus.jsonl、queries.jsonl 以及 qrels.tsv（或 qrels/test.tsv）。
目录不存在时直接跳过。用法::

    python scripts/run_limit_benchmark.py [数据目录] [--dims 512,...] [--threads N]
"""
import argparse
import sys
from pathlib import Path

# 添加项目根目录到 path
sys.path.insert(0, str(Path(__file__).parent.parent))

from numen.cli import configure_logging
from numen.config import get_settings
from numen.schemas.encoder import EncoderConfig
from numen.services.evaluation import dimension_sweep, format_sweep_table, write_sweep_csv
from numen.services.ingest import load_dataset

DATA_DIR = Path(__file__).parent.parent / "storage" / "limit"
DIMS = (512, 1024, 2048, 4096, 8192, 16384, 32768)

# 公开报告的 Recall@100（%），按维度
REPORTED_RECALL_100 = {
    512: 21.30,
    1024: 45.10,
    2048: 68.80,
    4096: 83.20,
    8192: 89.85,
    16384: 93.05,
    32768: 93.90,
}
TOLERANCE = 3.0
HEADLINE_DIM = 32768
HEADLINE_MIN = 93.0


def run(data_dir: Path, dims, threads: int) -> int:
    print("=" * 50)
    print("LIMIT 维度扫描")
    print("=" * 50)

    if not (data_dir / "corpus.jsonl").exists():
        print(f"未找到数据集，跳过: {data_dir}")
        return 0

    corpus, queries, qrels = load_dataset(data_dir)
    print(f"\n{len(corpus)} 篇文档, {len(queries)} 条查询\n")

    config = EncoderConfig.from_settings(get_settings())
    rows = dimension_sweep(
        corpus, queries, qrels, dims, (2, 10, 100), config=config, n_jobs=threads
    )
    print(format_sweep_table(rows))
    write_sweep_csv(rows, data_dir / "sweep.csv")

    failed = 0
    print("\n维度      实测R@100   报告R@100   偏差")
    for row in rows:
        if row.k != 100 or row.dimension not in REPORTED_RECALL_100:
            continue
        measured = row.recall * 100
        reported = REPORTED_RECALL_100[row.dimension]
        ok = abs(measured - reported) <= TOLERANCE
        failed += not ok
        print(
            f"{row.dimension:>6}   {measured:9.2f}   {reported:9.2f}   "
            f"{measured - reported:+6.2f} {'OK' if ok else 'FAIL'}"
        )
        if row.dimension == HEADLINE_DIM and measured < HEADLINE_MIN:
            print(f"  headline: {measured:.2f} < {HEADLINE_MIN}")
            failed += 1

    print("\n" + "=" * 50)
    print(f"完成: {'全部在容差内' if not failed else f'{failed} 项超出容差'}")
    print("=" * 50)
    return 1 if failed else 0


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("data_dir", nargs="?", type=Path, default=DATA_DIR)
    parser.add_argument(
        "--dims", default=",".join(str(d) for d in DIMS), help="comma-separated dimensions"
    )
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()
    configure_logging("INFO")
    dims = tuple(int(d) for d in args.dims.split(","))
    return run(args.data_dir, dims, args.threads)


if __name__ == "__main__":
    sys.exit(main())

"""运行配置管理。

使用 Pydantic Settings 读取 ``NUMEN_*`` 环境变量，CLI 参数优先级更高。
不读取配置文件。
"""

from functools import lru_cache
from typing import Tuple

from pydantic import Field
from pydantic_settings import BaseSettings

from numen.models.enums import HashVariant


class Settings(BaseSettings):
    """核心配置项。

    - ``threads``：编码与查询的最大并发数（CLI ``--threads`` 的回退值）。
    - ``dimension`` / ``ngram_sizes`` / ``weights`` / ``hash_variant``：默认编码器配置。
    - ``bm25_k1`` / ``bm25_b``：BM25 基线参数。
    """

    threads: int = Field(default=1, ge=1, description="Worker cap for encoding and scoring")
    dimension: int = Field(default=32768, ge=1, description="Vector dimension d")
    ngram_sizes: Tuple[int, ...] = Field(
        default=(3, 4, 5), description="Character n-gram lengths"
    )
    weights: Tuple[float, ...] = Field(
        default=(1.0, 5.0, 10.0), description="Weight per n-gram length, aligned with ngram_sizes"
    )
    hash_variant: HashVariant = Field(
        default=HashVariant.CRC32_IEEE, description="CRC32 polynomial used for feature hashing"
    )
    bm25_k1: float = Field(default=0.9, ge=0.0, description="BM25 term frequency saturation")
    bm25_b: float = Field(default=0.75, ge=0.0, le=1.0, description="BM25 length normalization")
    k_values: Tuple[int, ...] = Field(
        default=(2, 10, 100), description="Recall cutoffs reported by eval and sweep"
    )
    log_level: str = Field(default="INFO", description="Root log level for the CLI")

    model_config = {"env_prefix": "NUMEN_"}


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """缓存后的全局配置实例。"""

    return Settings()

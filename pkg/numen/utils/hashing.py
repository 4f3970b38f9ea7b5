"""CRC32 哈希与文件摘要工具。

IEEE 变体直接使用 ``zlib.crc32``（C 实现，可能有硬件加速）；
Castagnoli 变体使用查表法的纯 Python 实现，结果按 n-gram 缓存。
"""

from __future__ import annotations

import hashlib
import zlib
from functools import lru_cache
from pathlib import Path

from numen.models.enums import HashVariant


_CASTAGNOLI_REFLECTED = 0x82F63B78


def _build_table(poly: int) -> tuple[int, ...]:
    table: list[int] = []
    for i in range(256):
        c = i
        for _ in range(8):
            if c & 1:
                c = (c >> 1) ^ poly
            else:
                c >>= 1
        table.append(c & 0xFFFFFFFF)
    return tuple(table)


_CRC32C_TABLE = _build_table(_CASTAGNOLI_REFLECTED)


def crc32_ieee(data: bytes) -> int:
    return zlib.crc32(data) & 0xFFFFFFFF


def crc32c(data: bytes) -> int:
    """CRC32C(data)，返回无符号 32 位整数。"""

    c = 0xFFFFFFFF
    table = _CRC32C_TABLE
    for b in data:
        c = table[(c ^ b) & 0xFF] ^ (c >> 8)
    return (c ^ 0xFFFFFFFF) & 0xFFFFFFFF


@lru_cache(maxsize=1 << 20)
def crc32(data: bytes, variant: HashVariant = HashVariant.CRC32_IEEE) -> int:
    """按配置的多项式计算 CRC32。

    n-gram 在语料中高度重复，因此缓存按 (bytes, variant) 命中。
    """

    if variant is HashVariant.CRC32_C:
        return crc32c(data)
    return crc32_ieee(data)


def sha256_file(path: Path, chunk_size: int = 1 << 20) -> str:
    """分块计算文件的 SHA-256，用于运行清单中的输入指纹。"""

    digest = hashlib.sha256()
    with Path(path).open("rb") as handle:
        while True:
            chunk = handle.read(chunk_size)
            if not chunk:
                break
            digest.update(chunk)
    return digest.hexdigest()

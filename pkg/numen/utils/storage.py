"""文件存储与目录管理工具。"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

from pydantic import BaseModel


def ensure_directory(path: Path) -> None:
    """确保目录存在。"""

    path.mkdir(parents=True, exist_ok=True)


def ensure_parent(path: Path) -> Path:
    path = Path(path)
    ensure_directory(path.parent)
    return path


def write_model_json(model: BaseModel, destination: Path) -> int:
    """将 Pydantic 模型写为带缩进的 JSON，返回字节数。"""

    destination = ensure_parent(destination)
    data = model.model_dump_json(indent=2).encode("utf-8") + b"\n"
    with destination.open("wb") as f:
        f.write(data)
    return len(data)


def write_csv(destination: Path, header: Sequence[str], rows: Iterable[Sequence[object]]) -> None:
    """写 CSV（首行为表头，``\\n`` 行尾）。"""

    destination = ensure_parent(destination)
    with destination.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)

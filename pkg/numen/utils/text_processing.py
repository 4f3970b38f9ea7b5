"""文本规范化与分词工具。"""

from __future__ import annotations

import re
from typing import List


# 一个词 = 连续的 Unicode 字母/数字（str.isalnum 为真的字符）；其余字符均为分隔符
_WORD_RE = re.compile(r"[^\W_]+")


def normalize_and_tokenize(text: str) -> List[str]:
    """切分为词后逐词小写化，顺序与输入一致。

    ``"state-of-the-art 7B"`` -> ``["state", "of", "the", "art", "7b"]``。
    词边界取自原文：小写化可能引入组合符（``"İ".lower() == "i\\u0307"``），不能再拆词。
    空串或全分隔符输入返回空列表。
    """

    if not text:
        return []
    return [word.lower() for word in _WORD_RE.findall(text)]

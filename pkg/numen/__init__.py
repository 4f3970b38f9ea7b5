"""numen：免训练的字符 n-gram 哈希稠密检索。"""

__version__ = "0.1.0"

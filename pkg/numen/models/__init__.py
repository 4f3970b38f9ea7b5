"""枚举与磁盘编码定义入口。"""

from numen.models.enums import HashVariant

__all__ = ["HashVariant"]

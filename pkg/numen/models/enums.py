"""Enum definitions for encoder configuration."""

import enum


class HashVariant(str, enum.Enum):
    """CRC32 polynomial variant used to hash n-grams."""

    CRC32_IEEE = "crc32-ieee"  # reflected 0xEDB88320
    CRC32_C = "crc32c"         # Castagnoli, reflected 0x82F63B78

    @property
    def code(self) -> int:
        """u8 tag written into index headers."""
        return _VARIANT_CODES[self]

    @classmethod
    def from_code(cls, code: int) -> "HashVariant":
        for variant, value in _VARIANT_CODES.items():
            if value == code:
                return variant
        raise ValueError(f"Unknown hash variant code: {code}")


_VARIANT_CODES = {
    HashVariant.CRC32_IEEE: 0,
    HashVariant.CRC32_C: 1,
}

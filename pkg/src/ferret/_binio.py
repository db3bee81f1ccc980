"""Little-endian binary segment helpers shared by the sparse and dense
persistence formats. All integers are fixed-width unsigned little-endian;
strings are u32-length-prefixed UTF-8."""

from __future__ import annotations

import hashlib
import struct
from typing import BinaryIO

_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")


class HashingWriter:
    """File writer that maintains a running SHA-256 and byte count, so
    manifests can record checksums without re-reading the segment."""

    def __init__(self, fh: BinaryIO):
        self._fh = fh
        self._sha = hashlib.sha256()
        self.nbytes = 0

    def write(self, data: bytes) -> None:
        self._fh.write(data)
        self._sha.update(data)
        self.nbytes += len(data)

    def u32(self, value: int) -> None:
        self.write(_U32.pack(value))

    def u64(self, value: int) -> None:
        self.write(_U64.pack(value))

    def string(self, value: str) -> None:
        raw = value.encode("utf-8")
        self.u32(len(raw))
        self.write(raw)

    def hexdigest(self) -> str:
        return self._sha.hexdigest()


class Reader:
    """Cursor over an in-memory bytes-like object (typically an mmap)."""

    def __init__(self, buf, offset: int = 0):
        self.buf = buf
        self.pos = offset

    def u32(self) -> int:
        (value,) = _U32.unpack_from(self.buf, self.pos)
        self.pos += 4
        return value

    def u64(self) -> int:
        (value,) = _U64.unpack_from(self.buf, self.pos)
        self.pos += 8
        return value

    def string(self) -> str:
        n = self.u32()
        raw = bytes(self.buf[self.pos : self.pos + n])
        self.pos += n
        return raw.decode("utf-8")

    def u32_array(self, count: int) -> tuple[int, ...]:
        vals = struct.unpack_from(f"<{count}I", self.buf, self.pos)
        self.pos += 4 * count
        return vals


def sha256_file(path) -> str:
    sha = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            sha.update(chunk)
    return sha.hexdigest()

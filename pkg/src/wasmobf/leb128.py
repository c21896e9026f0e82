"""LEB128 variable-length integers as used by the WebAssembly binary format."""

from __future__ import annotations


class LEBError(ValueError):
    pass


def read_uleb128(data: bytes, pos: int = 0, bits: int = 64) -> tuple[int, int]:
    """Decode an unsigned LEB128 value starting at ``pos``.

    Returns ``(value, next_pos)``. Overlong encodings are accepted as long as
    the value fits in ``bits`` and the encoding is at most ceil(bits/7) bytes.
    """
    result = 0
    shift = 0
    max_len = (bits + 6) // 7
    start = pos
    while True:
        if pos >= len(data):
            raise LEBError(f"truncated LEB128 at offset {start}")
        b = data[pos]
        pos += 1
        result |= (b & 0x7F) << shift
        shift += 7
        if not b & 0x80:
            break
        if pos - start >= max_len:
            raise LEBError(f"LEB128 longer than {max_len} bytes at offset {start}")
    if result >> bits:
        raise LEBError(f"LEB128 value exceeds {bits} bits at offset {start}")
    return result, pos


def read_sleb128(data: bytes, pos: int = 0, bits: int = 64) -> tuple[int, int]:
    """Decode a signed LEB128 value; the result is a Python int in
    [-2**(bits-1), 2**(bits-1))."""
    result = 0
    shift = 0
    max_len = (bits + 6) // 7
    start = pos
    while True:
        if pos >= len(data):
            raise LEBError(f"truncated LEB128 at offset {start}")
        b = data[pos]
        pos += 1
        result |= (b & 0x7F) << shift
        shift += 7
        if not b & 0x80:
            break
        if pos - start >= max_len:
            raise LEBError(f"LEB128 longer than {max_len} bytes at offset {start}")
    if b & 0x40:
        result -= 1 << shift
    if not -(1 << (bits - 1)) <= result < (1 << (bits - 1)):
        raise LEBError(f"signed LEB128 value exceeds {bits} bits at offset {start}")
    return result, pos


def write_uleb128(value: int) -> bytes:
    if value < 0:
        raise ValueError("cannot encode a negative number as unsigned LEB128")
    out = bytearray()
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def write_sleb128(value: int) -> bytes:
    out = bytearray()
    while True:
        byte = value & 0x7F
        value >>= 7
        # done once the remaining bits are pure sign extension of bit 6
        if (value == 0 and not byte & 0x40) or (value == -1 and byte & 0x40):
            out.append(byte)
            return bytes(out)
        out.append(byte | 0x80)

"""Minimal OSC 1.0 message codec for the UDP navigation inlet.

Covers the argument types this engine speaks (float32, int32, string,
blob). Bundles are not used by the navigation contract and are rejected.
"""

from __future__ import annotations

import struct


class OscError(ValueError):
    pass


def _pad4(n: int) -> int:
    return (n + 3) & ~3


def _encode_string(s: str) -> bytes:
    raw = s.encode("ascii") + b"\x00"
    return raw + b"\x00" * (_pad4(len(raw)) - len(raw))


def encode_message(address: str, *args) -> bytes:
    """Build an OSC message; argument types inferred from Python types."""
    if not address.startswith("/"):
        raise OscError("OSC address must start with '/'")
    tags = ","
    payload = b""
    for a in args:
        if isinstance(a, bool):
            raise OscError("boolean OSC arguments are not supported")
        if isinstance(a, int):
            tags += "i"
            payload += struct.pack(">i", a)
        elif isinstance(a, float):
            tags += "f"
            payload += struct.pack(">f", a)
        elif isinstance(a, str):
            tags += "s"
            payload += _encode_string(a)
        elif isinstance(a, (bytes, bytearray)):
            tags += "b"
            raw = bytes(a)
            payload += struct.pack(">i", len(raw)) + raw + b"\x00" * (_pad4(len(raw)) - len(raw))
        else:
            raise OscError(f"unsupported OSC argument type: {type(a).__name__}")
    return _encode_string(address) + _encode_string(tags) + payload


def _read_string(data: bytes, offset: int) -> tuple[str, int]:
    end = data.find(b"\x00", offset)
    if end < 0:
        raise OscError("unterminated OSC string")
    s = data[offset:end].decode("ascii", errors="strict")
    return s, _pad4(end + 1 - offset) + offset


def decode_message(data: bytes) -> tuple[str, list]:
    """Parse one OSC message into (address, args). Raises OscError on junk."""
    if data[:1] == b"#":
        raise OscError("OSC bundles are not supported")
    try:
        address, offset = _read_string(data, 0)
    except UnicodeDecodeError as e:
        raise OscError("non-ASCII OSC address") from e
    if not address.startswith("/"):
        raise OscError("OSC address must start with '/'")
    if offset >= len(data):
        return address, []
    tags, offset = _read_string(data, offset)
    if not tags.startswith(","):
        raise OscError("missing OSC type tag string")
    args: list = []
    for tag in tags[1:]:
        if tag == "f":
            if offset + 4 > len(data):
                raise OscError("truncated float argument")
            args.append(struct.unpack_from(">f", data, offset)[0])
            offset += 4
        elif tag == "i":
            if offset + 4 > len(data):
                raise OscError("truncated int argument")
            args.append(struct.unpack_from(">i", data, offset)[0])
            offset += 4
        elif tag == "s":
            s, offset = _read_string(data, offset)
            args.append(s)
        elif tag == "b":
            if offset + 4 > len(data):
                raise OscError("truncated blob length")
            (length,) = struct.unpack_from(">i", data, offset)
            offset += 4
            if length < 0 or offset + length > len(data):
                raise OscError("truncated blob argument")
            args.append(data[offset:offset + length])
            offset += _pad4(length)
        else:
            raise OscError(f"unsupported OSC type tag: {tag!r}")
    return address, args

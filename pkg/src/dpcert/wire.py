"""Binary framing for prover/verifier messages.

Every frame is ``tag (1 byte) | payload length (u32 LE) | payload``.  Field
elements are u64 little-endian and always reduced mod q.
"""
from __future__ import annotations

import enum
import json
import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterable, Sequence

FRAME_HEADER = struct.Struct("<BI")
U32 = struct.Struct("<I")
U64 = struct.Struct("<Q")
NCOEFFS = 7


class WireError(ValueError):
    pass


class Tag(enum.IntEnum):
    HEADER = 0x01
    INITIAL_ASSIGNMENT = 0x02
    ROUND_POLY = 0x03
    CHALLENGE = 0x04
    VERDICT = 0x05


class Reason(enum.IntEnum):
    NONE = 0
    HEADER = 1
    SHAPE = 2
    CONSISTENCY = 3
    FINAL = 4


@dataclass(frozen=True)
class Message:
    tag: Tag
    payload: bytes


@dataclass(frozen=True)
class Header:
    q: int
    n: int
    order: tuple[int, ...]
    claimed_constant: int


def encode(msg: Message) -> bytes:
    return FRAME_HEADER.pack(msg.tag, len(msg.payload)) + msg.payload


def decode_frame(data: bytes, offset: int = 0) -> tuple[Message, int]:
    """Decode one frame starting at ``offset``; returns the message and the next offset."""
    if len(data) - offset < FRAME_HEADER.size:
        raise WireError("truncated frame header")
    tag, length = FRAME_HEADER.unpack_from(data, offset)
    start = offset + FRAME_HEADER.size
    if len(data) - start < length:
        raise WireError(f"frame declares {length} payload bytes, {len(data) - start} present")
    try:
        tag = Tag(tag)
    except ValueError:
        raise WireError(f"unknown tag 0x{tag:02x}") from None
    return Message(tag, bytes(data[start:start + length])), start + length


def decode(data: bytes) -> Message:
    msg, end = decode_frame(data)
    if end != len(data):
        raise WireError(f"{len(data) - end} trailing bytes after frame")
    return msg


def read_frame(stream: BinaryIO) -> Message:
    head = _read_exact(stream, FRAME_HEADER.size)
    tag, length = FRAME_HEADER.unpack(head)
    payload = _read_exact(stream, length)
    try:
        return Message(Tag(tag), payload)
    except ValueError:
        raise WireError(f"unknown tag 0x{tag:02x}") from None


def write_frame(stream: BinaryIO, msg: Message) -> int:
    data = encode(msg)
    stream.write(data)
    stream.flush()
    return len(data)


def _read_exact(stream: BinaryIO, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = stream.read(n - len(buf))
        if not chunk:
            raise EOFError(f"stream closed after {len(buf)} of {n} bytes")
        buf += chunk
    return buf


# -- typed payloads ----------------------------------------------------------

def _check_element(v: int, q: int | None):
    if q is not None and v >= q:
        raise WireError(f"field element {v} not reduced mod {q}")


def _expect(msg: Message, tag: Tag, size: int | None = None):
    if msg.tag != tag:
        raise WireError(f"expected {tag.name}, got {msg.tag.name}")
    if size is not None and len(msg.payload) != size:
        raise WireError(f"{tag.name} payload must be {size} bytes, got {len(msg.payload)}")


def header_message(h: Header) -> Message:
    payload = U64.pack(h.q) + U32.pack(h.n) + b"".join(U32.pack(v) for v in h.order) + U64.pack(h.claimed_constant)
    return Message(Tag.HEADER, payload)


def parse_header(msg: Message) -> Header:
    if msg.tag != Tag.HEADER or len(msg.payload) < 20:
        raise WireError("malformed header frame")
    q = U64.unpack_from(msg.payload, 0)[0]
    n = U32.unpack_from(msg.payload, 8)[0]
    _expect(msg, Tag.HEADER, 20 + 4 * n)
    order = tuple(U32.unpack_from(msg.payload, 12 + 4 * i)[0] for i in range(n))
    constant = U64.unpack_from(msg.payload, 12 + 4 * n)[0]
    _check_element(constant, q)
    return Header(q, n, order, constant)


def assignment_message(values: Sequence[int]) -> Message:
    return Message(Tag.INITIAL_ASSIGNMENT, b"".join(U64.pack(v) for v in values))


def parse_assignment(msg: Message, n: int, q: int | None = None) -> list[int]:
    _expect(msg, Tag.INITIAL_ASSIGNMENT, 8 * n)
    values = [U64.unpack_from(msg.payload, 8 * i)[0] for i in range(n)]
    for v in values:
        _check_element(v, q)
    return values


def poly_message(coeffs: Sequence[int]) -> Message:
    if len(coeffs) != NCOEFFS:
        raise ValueError(f"round polynomial needs {NCOEFFS} coefficients")
    return Message(Tag.ROUND_POLY, b"".join(U64.pack(a) for a in coeffs))


def parse_poly(msg: Message, q: int | None = None) -> tuple[int, ...]:
    _expect(msg, Tag.ROUND_POLY, 8 * NCOEFFS)
    coeffs = tuple(U64.unpack_from(msg.payload, 8 * i)[0] for i in range(NCOEFFS))
    for a in coeffs:
        _check_element(a, q)
    return coeffs


def challenge_message(r: int) -> Message:
    return Message(Tag.CHALLENGE, U64.pack(r))


def parse_challenge(msg: Message, q: int | None = None) -> int:
    _expect(msg, Tag.CHALLENGE, 8)
    r = U64.unpack(msg.payload)[0]
    _check_element(r, q)
    return r


def verdict_message(accept: bool, reason: Reason = Reason.NONE) -> Message:
    return Message(Tag.VERDICT, bytes([1 if accept else 0, int(reason)]))


def parse_verdict(msg: Message) -> tuple[bool, Reason]:
    _expect(msg, Tag.VERDICT, 2)
    if msg.payload[0] not in (0, 1):
        raise WireError("verdict byte must be 0 or 1")
    try:
        return bool(msg.payload[0]), Reason(msg.payload[1])
    except ValueError:
        raise WireError(f"unknown reason code {msg.payload[1]}") from None


# -- accounting --------------------------------------------------------------

PROVER, VERIFIER = "P->V", "V->P"


def frame_size(payload_len: int) -> int:
    return FRAME_HEADER.size + payload_len


def expected_bytes(n: int, k: int) -> tuple[int, int]:
    """Closed-form (prover->verifier, verifier->prover) bytes of a complete run."""
    p2v = frame_size(20 + 4 * n) + k * frame_size(8 * NCOEFFS)
    v2p = frame_size(8 * n) + k * frame_size(8)
    return p2v, v2p


def count_bytes(transcript: Iterable[tuple[str, Message]]) -> tuple[int, int]:
    """Bytes per direction over the proof messages.

    Verdict frames close the session and are not counted.
    """
    p2v = v2p = 0
    for direction, msg in transcript:
        if msg.tag == Tag.VERDICT:
            continue
        size = frame_size(len(msg.payload))
        if direction == PROVER:
            p2v += size
        else:
            v2p += size
    return p2v, v2p


def transcript_lines(transcript: Iterable[tuple[str, Message]]) -> str:
    return "".join(
        json.dumps({"dir": d, "tag": m.tag.name, "payload": m.payload.hex()}) + "\n" for d, m in transcript
    )

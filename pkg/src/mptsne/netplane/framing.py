"""Length-prefixed binary framing between roles.

Wire format, big-endian throughout:

    length   4 bytes  (= 17 + payload size: everything after this field)
    type_tag 1 byte
    task_id  16 bytes
    payload  length - 17 bytes

Payloads above the chunk threshold travel as a train of fragment
frames, each carrying a sequence number and a CRC over its chunk;
receivers reassemble transparently and refuse holes or corruption.
"""

from __future__ import annotations

import socket
import struct
import zlib
from dataclasses import dataclass

from ..protocol import messages

TAG_FRAGMENT = 0x7F
VALID_TAGS = {
    messages.TAG_KEY_BROADCAST,
    messages.TAG_DATA_UPLOAD,
    messages.TAG_NOISED_DATA,
    messages.TAG_NOISED_DISTANCES,
    messages.TAG_BLINDED_DISTANCES,
    messages.TAG_PROB_MATRIX,
    messages.TAG_EMBEDDING_RESULT,
    TAG_FRAGMENT,
}

HEADER_REMAINDER = 17  # type_tag + task_id
CHUNK_THRESHOLD = 4 * 1024 * 1024
FRAGMENT_HEADER = struct.Struct(">BIII")  # original tag, seq, total, crc32


class FrameError(ConnectionError):
    """Malformed, truncated, or corrupted frame traffic."""


@dataclass(frozen=True)
class Frame:
    type_tag: int
    task_id: bytes  # exactly 16 bytes
    payload: bytes

    def __post_init__(self):
        if len(self.task_id) != 16:
            raise FrameError("task_id must be exactly 16 bytes")


def encode_frame(frame: Frame) -> bytes:
    if frame.type_tag not in VALID_TAGS:
        raise FrameError(f"unknown frame type 0x{frame.type_tag:02x}")
    return (struct.pack(">IB", HEADER_REMAINDER + len(frame.payload), frame.type_tag)
            + frame.task_id + frame.payload)


def decode_frame(data: bytes) -> tuple[Frame, int]:
    """Parse one frame from a buffer; returns (frame, bytes consumed)."""
    if len(data) < 5:
        raise FrameError("truncated frame: missing header")
    length, tag = struct.unpack(">IB", data[:5])
    if length < HEADER_REMAINDER:
        raise FrameError("frame length below header size")
    end = 4 + length
    if len(data) < end:
        raise FrameError("truncated frame: incomplete body")
    if tag not in VALID_TAGS:
        raise FrameError(f"unknown frame type 0x{tag:02x}")
    task_id = data[5:21]
    return Frame(tag, task_id, data[21:end]), end


def _recv_exact(sock: socket.socket, count: int) -> bytes:
    buf = bytearray()
    while len(buf) < count:
        chunk = sock.recv(count - len(buf))
        if not chunk:
            raise FrameError(f"connection closed mid-frame ({len(buf)}/{count} bytes)")
        buf.extend(chunk)
    return bytes(buf)


def _recv_single(sock: socket.socket) -> Frame:
    header = _recv_exact(sock, 5)
    length, tag = struct.unpack(">IB", header)
    if length < HEADER_REMAINDER:
        raise FrameError("frame length below header size")
    if tag not in VALID_TAGS:
        raise FrameError(f"unknown frame type 0x{tag:02x}")
    body = _recv_exact(sock, length - 1)
    return Frame(tag, body[:16], body[16:])


def send_frame(sock: socket.socket, frame: Frame,
               chunk_threshold: int = CHUNK_THRESHOLD) -> None:
    """Deliver one logical frame, fragmenting oversized payloads."""
    if len(frame.payload) <= chunk_threshold:
        sock.sendall(encode_frame(frame))
        return
    chunks = [frame.payload[i:i + chunk_threshold]
              for i in range(0, len(frame.payload), chunk_threshold)]
    for seq, chunk in enumerate(chunks):
        header = FRAGMENT_HEADER.pack(frame.type_tag, seq, len(chunks),
                                      zlib.crc32(chunk))
        sock.sendall(encode_frame(Frame(TAG_FRAGMENT, frame.task_id, header + chunk)))


def recv_frame(sock: socket.socket) -> Frame:
    """Receive one logical frame, reassembling fragment trains."""
    frame = _recv_single(sock)
    if frame.type_tag != TAG_FRAGMENT:
        return frame

    parts: list[bytes] = []
    expected_tag = None
    total = None
    while True:
        if frame.type_tag != TAG_FRAGMENT:
            raise FrameError("bare frame interleaved with fragment train")
        tag, seq, count, crc = FRAGMENT_HEADER.unpack(frame.payload[:FRAGMENT_HEADER.size])
        chunk = frame.payload[FRAGMENT_HEADER.size:]
        if zlib.crc32(chunk) != crc:
            raise FrameError(f"checksum mismatch on fragment {seq}")
        if expected_tag is None:
            expected_tag, total = tag, count
        elif tag != expected_tag or count != total:
            raise FrameError("inconsistent fragment train")
        if seq != len(parts):
            raise FrameError(f"fragment {seq} out of order (wanted {len(parts)})")
        parts.append(chunk)
        if len(parts) == total:
            return Frame(expected_tag, frame.task_id, b"".join(parts))
        frame = _recv_single(sock)


def send_message(host: str, port: int, frame: Frame, timeout: float = 60.0) -> None:
    """One-shot delivery: connect, send, close."""
    with socket.create_connection((host, port), timeout=timeout) as sock:
        sock.settimeout(timeout)
        send_frame(sock, frame)

"""Round-protocol messages, their byte layout, and two transports.

Frame layout (all integers little-endian)::

    u32 payload_length | u8 msg_type | payload

Payloads::

    Broadcast    (1)  u32 round | vec model | vec nu      (empty nu = none)
    Report       (2)  u32 client_id | vec model | u32 steps
    KbarAnnounce (3)  u32 round | f64 kbar
    Orientation  (4)  u32 client_id | vec vector         (empty = reconstruct on server)
    Shutdown     (5)  (empty)

    vec := u32 count | count x f64

:class:`InProcTransport` hands frames to client handlers directly, spreading
one phase over a thread pool. :class:`TcpTransport` runs every client as a
thread holding its own loopback connection. Both carry the same bytes.
"""
from __future__ import annotations

import socket
import struct
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from typing import Callable, Sequence

import numpy as np

from .errors import EncodeError, ProtocolError

MAX_PAYLOAD = 64 * 1024 * 1024
HEADER = struct.Struct("<IB")

BROADCAST, REPORT, KBAR_ANNOUNCE, ORIENTATION, SHUTDOWN = 1, 2, 3, 4, 5
_EMPTY = np.zeros(0)


class _Message:
    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        for f in fields(self):
            a, b = getattr(self, f.name), getattr(other, f.name)
            if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
                if not np.array_equal(np.asarray(a), np.asarray(b)):
                    return False
            elif a != b:
                return False
        return True

    __hash__ = None


@dataclass(eq=False)
class Broadcast(_Message):
    round: int
    model: np.ndarray
    nu: np.ndarray = _EMPTY
    msg_type = BROADCAST


@dataclass(eq=False)
class Report(_Message):
    client_id: int
    model: np.ndarray
    steps: int
    msg_type = REPORT


@dataclass(eq=False)
class KbarAnnounce(_Message):
    round: int
    kbar: float
    msg_type = KBAR_ANNOUNCE


@dataclass(eq=False)
class Orientation(_Message):
    client_id: int
    vector: np.ndarray = _EMPTY
    msg_type = ORIENTATION


@dataclass(eq=False)
class Shutdown(_Message):
    msg_type = SHUTDOWN


def _u32(value, what):
    value = int(value)
    if not 0 <= value < 2 ** 32:
        raise EncodeError(f"{what} {value} does not fit in u32")
    return struct.pack("<I", value)


def _vec(v):
    v = np.ascontiguousarray(v, dtype="<f8").reshape(-1)
    if v.size >= 2 ** 32 // 8:
        raise EncodeError("vector too long")
    return struct.pack("<I", v.size) + v.tobytes()


def encode(body) -> bytes:
    """Serialize one message as a complete frame; identical bodies give identical bytes."""
    if isinstance(body, Broadcast):
        payload = _u32(body.round, "round") + _vec(body.model) + _vec(body.nu)
    elif isinstance(body, Report):
        payload = _u32(body.client_id, "client_id") + _vec(body.model) + _u32(body.steps, "steps")
    elif isinstance(body, KbarAnnounce):
        payload = _u32(body.round, "round") + struct.pack("<d", float(body.kbar))
    elif isinstance(body, Orientation):
        payload = _u32(body.client_id, "client_id") + _vec(body.vector)
    elif isinstance(body, Shutdown):
        payload = b""
    else:
        raise EncodeError(f"cannot encode {type(body).__name__}")
    if len(payload) > MAX_PAYLOAD:
        raise EncodeError(f"payload of {len(payload)} bytes exceeds the {MAX_PAYLOAD}-byte limit")
    return HEADER.pack(len(payload), body.msg_type) + payload


class _Reader:
    def __init__(self, buf, base):
        self.buf = buf
        self.pos = 0
        self.base = base

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise ProtocolError("length mismatch: payload shorter than its fields", self.base + self.pos)
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self):
        return struct.unpack("<I", self.take(4))[0]

    def f64(self):
        return struct.unpack("<d", self.take(8))[0]

    def vec(self):
        count = self.u32()
        return np.frombuffer(self.take(8 * count), dtype="<f8").astype(np.float64)

    def done(self):
        if self.pos != len(self.buf):
            raise ProtocolError("length mismatch: payload longer than its fields", self.base + self.pos)


def decode(data: bytes, offset: int = 0):
    """Decode the first frame of ``data``; returns ``(body, remainder)``."""
    data = bytes(data)
    if len(data) < HEADER.size:
        raise ProtocolError("truncated frame header", offset)
    length, msg_type = HEADER.unpack_from(data)
    if length > MAX_PAYLOAD:
        raise ProtocolError(f"frame length {length} exceeds limit", offset)
    if msg_type not in (BROADCAST, REPORT, KBAR_ANNOUNCE, ORIENTATION, SHUTDOWN):
        raise ProtocolError(f"unknown type {msg_type}", offset + 4)
    end = HEADER.size + length
    if len(data) < end:
        raise ProtocolError(f"truncated frame: length says {length}, only {len(data) - HEADER.size} present",
                            offset + HEADER.size)
    r = _Reader(data[HEADER.size:end], offset + HEADER.size)
    if msg_type == BROADCAST:
        body = Broadcast(r.u32(), r.vec(), r.vec())
    elif msg_type == REPORT:
        body = Report(r.u32(), r.vec(), r.u32())
    elif msg_type == KBAR_ANNOUNCE:
        body = KbarAnnounce(r.u32(), r.f64())
    elif msg_type == ORIENTATION:
        body = Orientation(r.u32(), r.vec())
    else:
        body = Shutdown()
    r.done()
    return body, data[end:]


def decode_stream(data: bytes) -> list:
    """Split a concatenation of frames back into messages."""
    out = []
    consumed = 0
    while data:
        body, rest = decode(data, consumed)
        consumed += len(data) - len(rest)
        out.append(body)
        data = rest
    return out


def frame_length(header: bytes) -> int:
    length, _ = HEADER.unpack(header)
    if length > MAX_PAYLOAD:
        raise ProtocolError(f"frame length {length} exceeds limit", 0)
    return length


# ---------------------------------------------------------------- transports

Handler = Callable[[bytes], Sequence[bytes]]


class InProcTransport:
    """Delivers each frame by calling the client's handler; one phase runs on a thread pool."""

    def __init__(self, handlers: Sequence[Handler], worker_threads: int = 1):
        self.handlers = list(handlers)
        workers = max(1, int(worker_threads))
        self.pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None

    def start(self):
        return self

    def exchange(self, frames: Sequence[bytes]) -> list:
        """Send ``frames[i]`` to client ``i``; return each client's single reply frame."""
        if self.pool is None:
            replies = [h(f) for h, f in zip(self.handlers, frames)]
        else:
            replies = list(self.pool.map(lambda pair: pair[0](pair[1]), zip(self.handlers, frames)))
        for i, r in enumerate(replies):
            if len(r) != 1:
                raise ProtocolError(f"client {i} sent {len(r)} replies, expected 1")
        return [r[0] for r in replies]

    def close(self):
        shutdown = encode(Shutdown())
        for h in self.handlers:
            h(shutdown)
        if self.pool is not None:
            self.pool.shutdown(wait=True)


def _recv_exact(sock, n):
    chunks = []
    while n:
        chunk = sock.recv(min(n, 1 << 20))
        if not chunk:
            raise ProtocolError("connection closed mid-frame")
        chunks.append(chunk)
        n -= len(chunk)
    return b"".join(chunks)


def recv_frame(sock) -> bytes:
    header = _recv_exact(sock, HEADER.size)
    return header + _recv_exact(sock, frame_length(header))


class TcpTransport:
    """Loopback TCP: every client is a thread with its own connection.

    Clients are identified by the ``client_id`` of their first Report; the
    Broadcast that precedes it is identical for every client, so connection
    order does not matter. ``worker_threads`` caps how many client handlers
    compute at the same time.
    """

    def __init__(self, handlers: Sequence[Handler], port: int = 0, worker_threads: int = 1,
                 host: str = "127.0.0.1", timeout: float = 60.0):
        self.handlers = list(handlers)
        self.host = host
        self.port = port
        self.timeout = timeout
        self.gate = threading.BoundedSemaphore(max(1, int(worker_threads)))
        self.errors = [None] * len(self.handlers)
        self.threads = []
        self.conns = []
        self.by_client = None

    def start(self):
        listener = socket.create_server((self.host, self.port))
        listener.settimeout(self.timeout)
        self.port = listener.getsockname()[1]
        for i, handler in enumerate(self.handlers):
            t = threading.Thread(target=self._client_loop, args=(i, handler), daemon=True,
                                 name=f"fedsim-client-{i}")
            t.start()
            self.threads.append(t)
        try:
            for _ in self.handlers:
                conn, _ = listener.accept()
                conn.settimeout(self.timeout)
                conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                self.conns.append(conn)
        finally:
            listener.close()
        return self

    def _client_loop(self, index, handler):
        try:
            with socket.create_connection((self.host, self.port), timeout=self.timeout) as sock:
                sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                while True:
                    frame = recv_frame(sock)
                    with self.gate:
                        replies = handler(frame)
                    for r in replies:
                        sock.sendall(r)
                    if frame[4] == SHUTDOWN:
                        return
        except BaseException as exc:  # surfaced to the coordinator in exchange()
            self.errors[index] = exc

    def _raise_client_error(self, cause):
        # unblock the healthy clients, then collect what the failed ones left behind
        for conn in self.conns:
            try:
                conn.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
        for t in self.threads:
            t.join(timeout=self.timeout)
        for exc in self.errors:
            if exc is not None and not isinstance(exc, (ProtocolError, OSError)):
                raise exc
        raise cause

    def exchange(self, frames: Sequence[bytes]) -> list:
        if self.by_client is None and len(set(frames)) != 1:
            raise ProtocolError("the first exchange must be a broadcast (identical frame for every client)")
        order = self.conns if self.by_client is None else self.by_client
        try:
            for conn, frame in zip(order, frames):
                conn.sendall(frame)
            replies = [recv_frame(conn) for conn in order]
        except (ProtocolError, OSError) as exc:
            self._raise_client_error(exc)
        if self.by_client is None:
            mapping = {}
            for conn, frame in zip(order, replies):
                body, _ = decode(frame)
                if not isinstance(body, Report) or body.client_id in mapping or body.client_id >= len(frames):
                    raise ProtocolError("could not identify clients from their first reports")
                mapping[body.client_id] = (conn, frame)
            self.by_client = [mapping[i][0] for i in range(len(frames))]
            replies = [mapping[i][1] for i in range(len(frames))]
        return replies

    def close(self):
        shutdown = encode(Shutdown())
        for conn in self.conns:
            try:
                conn.sendall(shutdown)
            except OSError:
                pass
        for t in self.threads:
            t.join(timeout=self.timeout)
        for conn in self.conns:
            conn.close()

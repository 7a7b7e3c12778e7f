import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fedsim.errors import EncodeError, ProtocolError
from fedsim.transport import (MAX_PAYLOAD, Broadcast, InProcTransport, KbarAnnounce, Orientation, Report,
                              Shutdown, TcpTransport, decode, decode_stream, encode)

u32 = st.integers(0, 2**32 - 1)
vecs = st.lists(st.floats(allow_nan=False, width=64), max_size=20).map(lambda v: np.array(v, dtype=np.float64))
bodies = st.one_of(
    st.builds(Broadcast, u32, vecs, vecs),
    st.builds(Report, u32, vecs, u32),
    st.builds(KbarAnnounce, u32, st.floats(allow_nan=False, width=64)),
    st.builds(Orientation, u32, vecs),
    st.just(Shutdown()),
)


@given(bodies)
def test_round_trip(body):
    frame = encode(body)
    back, rest = decode(frame)
    assert back == body and rest == b""
    assert encode(back) == frame


@given(st.lists(bodies, max_size=8))
def test_stream_is_self_delimiting(seq):
    assert decode_stream(b"".join(encode(b) for b in seq)) == seq


def test_empty_orientation_layout():
    frame = encode(Orientation(0))
    length, msg_type = struct.unpack_from("<IB", frame)
    assert (length, msg_type) == (8, 4) and len(frame) == 13


def test_kbar_and_shutdown_layout():
    frame = encode(KbarAnnounce(3, 10.5))
    assert frame == struct.pack("<IBId", 12, 3, 3, 10.5)
    assert encode(Shutdown()) == struct.pack("<IB", 0, 5)


def test_broadcast_layout():
    frame = encode(Broadcast(2, np.array([1.0, 2.0]), np.zeros(0)))
    assert frame == struct.pack("<IBII2dI", 4 + 4 + 16 + 4, 1, 2, 2, 1.0, 2.0, 0)


def test_truncated():
    frame = struct.pack("<IB", 100, 4) + b"\0" * 50
    with pytest.raises(ProtocolError, match="truncated") as info:
        decode(frame)
    assert info.value.offset == 5
    with pytest.raises(ProtocolError, match="truncated"):
        decode(b"\1\0")


def test_unknown_type():
    with pytest.raises(ProtocolError, match="unknown type 9"):
        decode(struct.pack("<IB", 0, 9))


def test_length_mismatch():
    good = encode(Orientation(1, np.array([1.0])))
    longer = struct.pack("<IB", len(good) - 5 + 4, 4) + good[5:] + b"\0" * 4
    with pytest.raises(ProtocolError, match="length mismatch"):
        decode(longer)
    shorter = struct.pack("<IB", 6, 4) + good[5:11]
    with pytest.raises(ProtocolError, match="length mismatch"):
        decode(shorter)


def test_offsets_in_stream_errors():
    stream = encode(Shutdown()) + struct.pack("<IB", 0, 7)
    with pytest.raises(ProtocolError) as info:
        decode_stream(stream)
    assert info.value.offset == 5 + 4 and "byte offset" in str(info.value)


def test_encode_errors():
    with pytest.raises(EncodeError):
        encode(Report(-1, np.zeros(1), 1))
    with pytest.raises(EncodeError):
        encode(object())
    with pytest.raises(EncodeError):
        encode(Orientation(0, np.zeros(MAX_PAYLOAD // 8 + 1)))


def _echo(i):
    def handle(frame):
        body, _ = decode(frame)
        if isinstance(body, Shutdown):
            return []
        if isinstance(body, Broadcast):
            return [encode(Report(i, body.model + i, body.round))]
        return [encode(Orientation(i, np.array([body.kbar * i])))]
    return handle


@pytest.mark.parametrize("make", [
    lambda hs: InProcTransport(hs, 1), lambda hs: InProcTransport(hs, 3), lambda hs: TcpTransport(hs, 0, 2),
])
def test_transports_deliver_in_client_order(make):
    t = make([_echo(i) for i in range(5)]).start()
    try:
        for rnd in (1, 2):
            replies = [decode(f)[0] for f in t.exchange([encode(Broadcast(rnd, np.zeros(2)))] * 5)]
            assert [r.client_id for r in replies] == list(range(5))
            assert [r.model[0] for r in replies] == [0, 1, 2, 3, 4]
            per_client = [encode(KbarAnnounce(rnd, float(j))) for j in range(5)]
            out = [decode(f)[0] for f in t.exchange(per_client)]
            assert [o.vector[0] for o in out] == [j * j for j in range(5)]
    finally:
        t.close()


def test_tcp_surfaces_client_errors():
    def broken(frame):
        raise RuntimeError("client blew up")
    t = TcpTransport([_echo(0), broken]).start()
    try:
        with pytest.raises(RuntimeError, match="blew up"):
            t.exchange([encode(Broadcast(1, np.zeros(1)))] * 2)
    finally:
        t.close()

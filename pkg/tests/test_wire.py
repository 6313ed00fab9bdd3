"""Frame codec: canonical bodies, length-prefixed framing, incremental decode."""

import random
import struct

import pytest

from meshscape import canonical
from meshscape.protocol import (
    MAX_BODY,
    Dn,
    Entry,
    OversizeMessage,
    Ping,
    ProtocolViolation,
    SearchEntry,
    decode_frames,
    encode_frame,
    FrameDecoder,
)

from .gen import random_message


def test_ping_round_trip():
    frame = encode_frame(Ping(0))
    (length,) = struct.unpack("!I", frame[:4])
    assert length == len(frame) - 4
    messages, consumed = decode_frames(frame)
    assert messages == [Ping(0)]
    assert consumed == len(frame)


def test_round_trip_all_variants():
    rng = random.Random(11)
    for _ in range(500):
        m = random_message(rng)
        messages, consumed = decode_frames(encode_frame(m))
        assert messages == [m]
        assert consumed == len(encode_frame(m))


def test_encoding_is_canonical():
    a = Entry(Dn.parse("hn=h, o=grid"), {"B": ["2"], "a": ["1"]})
    b = Entry(Dn.parse("hn=h, o=grid"), {"a": ["1"], "b": ["2"]})
    assert encode_frame(SearchEntry(1, a)) == encode_frame(SearchEntry(1, b))
    body = encode_frame(SearchEntry(1, a))[4:].decode()
    assert '"a":["1"]' in body and body.index('"a"') < body.index('"b"')


def test_oversize_body_rejected_at_encode():
    big = Entry(Dn.parse("hn=h, o=grid"), {"blob": ["x" * MAX_BODY]})
    with pytest.raises(OversizeMessage):
        encode_frame(SearchEntry(1, big))


def test_body_at_exact_limit_is_allowed():
    pad = MAX_BODY - len(canonical.dumps({"op": "error", "message": ""}).encode())
    m_ok = __import__("meshscape.protocol", fromlist=["ErrorMessage"]).ErrorMessage("x" * pad)
    frame = encode_frame(m_ok)
    assert len(frame) == 4 + MAX_BODY
    assert decode_frames(frame)[0] == [m_ok]


def test_empty_buffer():
    assert decode_frames(b"") == ([], 0)


def test_two_concatenated_frames():
    frame = encode_frame(Ping(7))
    messages, consumed = decode_frames(frame + frame)
    assert messages == [Ping(7), Ping(7)]
    assert consumed == 2 * len(frame)


def test_partial_frame_left_unconsumed():
    frame = encode_frame(Ping(7))
    messages, consumed = decode_frames(frame + frame[: len(frame) // 2])
    assert messages == [Ping(7)]
    assert consumed == len(frame)


def test_rechunking_invariance_every_split():
    frame = encode_frame(Ping(42))
    for cut in range(len(frame) + 1):
        dec = FrameDecoder()
        got = dec.feed(frame[:cut]) + dec.feed(frame[cut:])
        assert got == [Ping(42)], f"split at {cut}"
        assert dec.pending == 0


def test_declared_length_over_limit():
    with pytest.raises(ProtocolViolation):
        decode_frames(struct.pack("!I", MAX_BODY + 1) + b"x")


def test_malformed_body():
    bad = b"this is not canonical"
    with pytest.raises(ProtocolViolation):
        decode_frames(struct.pack("!I", len(bad)) + bad)


def test_unknown_op_rejected():
    body = canonical.dumps({"op": "warp", "x": 1}).encode()
    with pytest.raises(ProtocolViolation):
        decode_frames(struct.pack("!I", len(body)) + body)


def test_unknown_fields_rejected():
    body = canonical.dumps({"op": "ping", "nonce": 1, "extra": True}).encode()
    with pytest.raises(ProtocolViolation):
        decode_frames(struct.pack("!I", len(body)) + body)


def test_nonpositive_msg_id_rejected():
    body = canonical.dumps(
        {"op": "search", "msg_id": 0, "base": "", "scope": "sub", "filter": "(a=*)", "attrs": []}
    ).encode()
    with pytest.raises(ProtocolViolation):
        decode_frames(struct.pack("!I", len(body)) + body)

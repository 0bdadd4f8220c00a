"""Frame layout and the value-corruption helper."""

import pytest
from hypothesis import given, settings, strategies as st

from votingfarm import wire


def test_round_trip_fields_and_payload():
    raw = wire.encode(wire.K_INPUT, {"valid": True, "session": 4}, b"\x01\x02")
    frame = wire.decode(raw)
    assert frame.kind == wire.K_INPUT
    assert frame.get("valid") is True
    assert frame.get("session") == 4
    assert frame.get("missing", "d") == "d"
    assert frame.payload == b"\x01\x02"
    assert frame.kind_name == "input"


def test_empty_fields_and_payload():
    frame = wire.decode(wire.encode(wire.K_CONTROL))
    assert frame.fields == {} and frame.payload == b""


@given(
    kind=st.sampled_from(sorted(wire.KIND_NAMES)),
    fields=st.dictionaries(
        st.text(st.characters(codec="ascii"), min_size=1, max_size=8),
        st.one_of(st.integers(-1000, 1000), st.booleans(), st.text(max_size=8)),
        max_size=4,
    ),
    payload=st.binary(max_size=64),
)
@settings(deadline=None)
def test_round_trip_any_header(kind, fields, payload):
    frame = wire.decode(wire.encode(kind, fields, payload))
    assert frame.kind == kind
    assert frame.fields == fields
    assert frame.payload == payload


def test_short_frame_rejected():
    with pytest.raises(wire.FrameError):
        wire.decode(b"\x01\x00")


def test_truncated_header_rejected():
    raw = wire.encode(wire.K_STATUS, {"status": "VF_DONE"})
    with pytest.raises(wire.FrameError):
        wire.decode(raw[: len(raw) - 3])


def test_garbage_header_rejected():
    raw = bytearray(wire.encode(wire.K_INPUT, {"a": 1}))
    raw[5] = 0xFF  # stomp on the JSON
    with pytest.raises(wire.FrameError):
        wire.decode(bytes(raw))


class TestCorruptValue:
    def test_only_payload_region_changes(self):
        raw = wire.encode(wire.K_BROADCAST, {"member": 2, "session": 0}, b"\x00" * 8)
        hit = wire.corrupt_value(raw, b"\xff")
        assert hit != raw
        frame = wire.decode(hit)  # framing survives the hit
        assert frame.get("member") == 2 and frame.get("session") == 0
        assert frame.payload == b"\xff" * 8

    def test_mask_repeats_over_payload(self):
        raw = wire.encode(wire.K_INPUT, {}, bytes(range(6)))
        frame = wire.decode(wire.corrupt_value(raw, b"\x0f\xf0"))
        assert frame.payload == bytes(b ^ m for b, m in zip(range(6), b"\x0f\xf0" * 3))

    def test_header_only_frame_passes_through(self):
        raw = wire.encode(wire.K_CONTROL, {"req": "close"})
        assert wire.corrupt_value(raw, b"\xff") == raw

    def test_empty_mask_is_identity(self):
        raw = wire.encode(wire.K_INPUT, {}, b"\x42")
        assert wire.corrupt_value(raw, b"") == raw

    def test_double_corruption_cancels(self):
        raw = wire.encode(wire.K_INPUT, {}, b"\x10\x20\x30")
        assert wire.corrupt_value(wire.corrupt_value(raw, b"\xa5"), b"\xa5") == raw


def test_payload_region_of_short_data():
    assert wire.payload_region(b"\x01") == 1

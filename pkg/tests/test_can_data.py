import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hqcan import can_data
from hqcan.can_data import CanLogError, RawFrame, SignalSpec, SignalSpecError


def brute_force_raw(data: bytes, spec: SignalSpec) -> int:
    """Bit-by-bit extraction following the DBC numbering rules."""
    bit = lambda pos: (data[pos // 8] >> (pos % 8)) & 1
    raw = 0
    if spec.byte_order == "little":
        for k in range(spec.bit_length):
            raw |= bit(spec.start_bit + k) << k
        return raw
    pos = spec.start_bit  # MSB first, walking the Motorola sawtooth
    for _ in range(spec.bit_length):
        raw = (raw << 1) | bit(pos)
        pos = pos - 1 if pos % 8 else pos + 15
    return raw


def test_parse_single_row():
    (f,) = can_data.parse_can_log("0.10,0x316,8,05,21,68,09,21,21,00,6F")
    assert f == RawFrame(0.1, 0x316, 8, bytes([0x05, 0x21, 0x68, 0x09, 0x21, 0x21, 0x00, 0x6F]))


def test_parse_empty():
    assert can_data.parse_can_log("") == []


def test_parse_bad_hex_reports_line():
    with pytest.raises(CanLogError, match="line 1") as exc:
        can_data.parse_can_log("0.10,0xZZ,8,05,21,68,09,21,21,00,6F")
    assert exc.value.line == 1


def test_parse_dlc_mismatch():
    with pytest.raises(CanLogError, match="line 2"):
        can_data.parse_can_log("0.0,0x10,2,01,02\n0.1,0x10,3,01,02\n")


def test_parse_short_dlc_pads_zero():
    (f,) = can_data.parse_can_log("timestamp,can_id,dlc,b0\n1.5,7FF,2,AB,CD\n")
    assert f.dlc == 2 and f.data == bytes([0xAB, 0xCD, 0, 0, 0, 0, 0, 0])


def test_frame_invariants():
    with pytest.raises(ValueError):
        RawFrame(0.0, 1, 9)
    with pytest.raises(ValueError):
        RawFrame(0.0, 1, 1, bytes([1, 2, 0, 0, 0, 0, 0, 0]))


frames_strategy = st.lists(
    st.tuples(st.integers(0, (1 << 29) - 1), st.integers(0, 8), st.binary(min_size=8, max_size=8),
              st.floats(0, 10, allow_nan=False)),
    max_size=20,
)


@settings(max_examples=60, deadline=None)
@given(frames_strategy)
def test_parse_format_round_trip(rows):
    ts = 0.0
    frames = []
    for cid, dlc, data, dt in rows:
        ts += dt
        frames.append(RawFrame(ts, cid, dlc, data[:dlc] + bytes(8 - dlc)))
    assert can_data.parse_can_log(can_data.format_can_log(frames)) == frames


def test_decode_zero_data():
    spec = SignalSpec("x", 8, 8, "little", 0.390625, 0.0, 0, 99.61)
    assert can_data.decode_signal(RawFrame(0, 1, 8), spec) == 0.0


def test_decode_tqi_family_full_scale():
    spec = SignalSpec("TQI_ACOR", 0, 8, "little", 0.390625, 0.0, 0, 99.61)
    frame = RawFrame(0, 0x316, 8, bytes([0xFF]) + bytes(7))
    assert can_data.decode_signal(frame, spec) == pytest.approx(255 * 0.390625)
    assert round(can_data.decode_signal(frame, spec), 2) == 99.61


def test_decode_engine_speed_full_scale():
    spec = SignalSpec("N", 16, 16, "little", 0.25, 0.0, 0, 16383.75)
    frame = RawFrame(0, 0x316, 8, bytes([0, 0, 0xFF, 0xFF, 0, 0, 0, 0]))
    assert can_data.decode_signal(frame, spec) == 16383.75
    raw14 = SignalSpec("N14", 16, 14, "little", 1.0, 0.0, 0, 16383)
    assert can_data.decode_signal(frame, raw14) == 16383.0


def test_spec_bit_range_errors():
    with pytest.raises(SignalSpecError):
        SignalSpec("x", 60, 8, "little", 1.0)
    with pytest.raises(SignalSpecError):
        SignalSpec("y", 59, 16, "big", 1.0)
    with pytest.raises(SignalSpecError):
        SignalSpec("x", 0, 8, "little", 0.0)


def random_spec(rng):
    order = ["little", "big"][rng.integers(2)]
    while True:
        length = int(rng.integers(1, 33))
        start = int(rng.integers(0, 64))
        try:
            return SignalSpec("s", start, length, order, float(rng.uniform(0.01, 3)), float(rng.uniform(-50, 50)))
        except SignalSpecError:
            continue


def test_decode_matches_bit_oracle_and_is_linear():
    rng = np.random.default_rng(0)
    for _ in range(500):
        spec = random_spec(rng)
        data = bytes(rng.integers(0, 256, 8).tolist())
        raw = brute_force_raw(data, spec)
        assert can_data.extract_raw(data, spec) == raw
        assert can_data.decode_signal(RawFrame(0, 1, 8, data), spec) == raw * spec.scale + spec.offset


def test_encode_then_decode():
    rng = np.random.default_rng(1)
    for spec in can_data.default_signal_specs():
        for _ in range(20):
            v = rng.uniform(spec.min, spec.max)
            data = can_data.encode_signal(bytes(8), spec, v)
            assert abs(can_data.decode_signal(RawFrame(0, 1, 8, data), spec) - v) <= abs(spec.scale) / 2 + 1e-9


def test_default_specs_do_not_overlap():
    for cid in {s.can_id for s in can_data.default_signal_specs()}:
        used = np.zeros(64, dtype=int)
        for s in can_data.default_signal_specs():
            if s.can_id == cid:
                full = (1 << s.bit_length) - 1
                word = int.from_bytes(can_data.encode_signal(bytes(8), s, full * s.scale), "little")
                used += [(word >> k) & 1 for k in range(64)]
        assert used.max() <= 1


def test_signal_spec_file_round_trip():
    specs = can_data.default_signal_specs()
    text = "name,start_bit,bit_length,byte_order,scale,offset,min,max,can_id\n" + can_data.format_signal_specs(specs)
    assert can_data.parse_signal_specs(text) == specs
    with pytest.raises(SignalSpecError, match="line 1"):
        can_data.parse_signal_specs("x,1,2\n")


def test_synthesize_shape_and_ranges():
    m = can_data.synthesize_dataset(T=95_200, seed=0)
    assert m.values.shape == (95_200, 13)
    assert m.feature_names == can_data.FEATURE_NAMES
    vs = m.values[:, m.feature_names.index("VS")]
    assert vs.min() >= 0.0 and vs.max() <= 254.0
    for j, (_, lo, hi) in enumerate(can_data.FEATURES):
        assert m.values[:, j].min() >= lo and m.values[:, j].max() <= hi


def test_synthesize_deterministic_and_seed_sensitive():
    a = can_data.synthesize_dataset(T=500, seed=3)
    b = can_data.synthesize_dataset(T=500, seed=3)
    c = can_data.synthesize_dataset(T=500, seed=4)
    np.testing.assert_array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_synthesize_rejects_short():
    with pytest.raises(ValueError):
        can_data.synthesize_dataset(T=12)


def test_log_encode_decode_recovers_matrix():
    m = can_data.synthesize_dataset(T=60, seed=2)
    specs = can_data.default_signal_specs()
    frames = can_data.parse_can_log(can_data.format_can_log(can_data.encode_log(m, specs)))
    back = can_data.decode_log(frames, specs)
    assert back.T == m.T
    scales = np.array([s.scale for s in specs])
    assert np.all(np.abs(back.values - m.values) <= scales / 2 + 1e-9)


def test_feature_matrix_csv_round_trip(tmp_path):
    m = can_data.synthesize_dataset(T=40, seed=1)
    m.to_csv(tmp_path / "m.csv")
    back = can_data.FeatureMatrix.from_csv(tmp_path / "m.csv")
    np.testing.assert_array_equal(back.values, m.values)
    assert back.feature_names == m.feature_names

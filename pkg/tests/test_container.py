import gzip
import os
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flowquant import container as ct
from flowquant.container import CodecId, CompressedArtifact, ContainerError


class TestBitPacking:
    def test_three_bit_example(self):
        # column [5, 3] packs as 5 | 3 << 3 = 29
        assert ct.pack_bits(np.array([[5], [3]]), 3) == bytes([0b00011101])

    def test_columns_start_on_byte_boundary(self):
        buf = ct.pack_bits(np.array([[1, 1], [0, 1], [1, 1]]), 1)
        assert buf == bytes([0b101, 0b111])

    @pytest.mark.parametrize("n, c, bits, size", [(1000, 175, 2, 43750), (3, 2, 3, 4),
                                                  (1000, 175, 32, 700000), (7, 1, 0, 0)])
    def test_packed_size(self, n, c, bits, size):
        assert ct.packed_size(n, c, bits) == size

    def test_overflow(self):
        with pytest.raises(ContainerError):
            ct.pack_bits(np.array([4]), 2)

    def test_five_three_bit_codes_take_two_bytes(self):
        assert len(ct.pack_bits(np.arange(5), 3)) == 2

    def test_sixty_four_bits(self):
        codes = np.array([[2**64 - 1], [0]], dtype=np.uint64)
        back = ct.unpack_bits(ct.pack_bits(codes, 64), 2, 1, 64)
        np.testing.assert_array_equal(back, codes)

    def test_wrong_length(self):
        with pytest.raises(ContainerError):
            ct.unpack_bits(b"\x00", 3, 1, 8)

    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 2**32), st.integers(0, 40), st.integers(1, 6), st.integers(1, 63))
    def test_round_trip(self, seed, n, c, bits):
        rng = np.random.default_rng(seed)
        codes = rng.integers(0, 2**bits, (n, c), dtype=np.uint64)
        buf = ct.pack_bits(codes, bits)
        assert len(buf) == ct.packed_size(n, c, bits)
        np.testing.assert_array_equal(ct.unpack_bits(buf, n, c, bits), codes)


def artifact(**kw):
    base = dict(codec_id=CodecId.SQ, group_id="AS1", header=b"hdr", payload=b"\x00" * 50)
    base.update(kw)
    return CompressedArtifact(**base)


class TestSerialize:
    def test_plain_layout(self):
        blob = ct.serialize(artifact(entropic=False))
        assert blob[:4] == b"FQZ1"
        assert blob[4] == 1 and blob[5] == 1
        assert struct.unpack_from("<H", blob, 6)[0] == 3 and blob[8:11] == b"AS1"
        assert struct.unpack_from("<I", blob, 11)[0] == 3
        assert struct.unpack_from("<Q", blob, 18)[0] == 50
        assert len(blob) == 26 + 50

    def test_entropic_flag_and_body(self):
        blob = ct.serialize(artifact())
        assert blob[5] == 0x81
        body = gzip.decompress(blob[11:])
        assert body[:4] == struct.pack("<I", 3)

    @pytest.mark.parametrize("entropic", [True, False])
    def test_round_trip(self, entropic):
        a = artifact(entropic=entropic, group_id="ünï", payload=bytes(range(256)))
        assert ct.deserialize(ct.serialize(a)) == a

    def test_empty_header_and_payload(self):
        a = artifact(header=b"", payload=b"")
        assert ct.deserialize(ct.serialize(a)) == a

    def test_deterministic_bytes(self):
        assert ct.serialize(artifact()) == ct.serialize(artifact())

    def test_stream_of_groups(self):
        parts = [artifact(group_id=g, entropic=e) for g, e in [("A", True), ("B", False), ("C", True)]]
        blob = b"".join(ct.serialize(p) for p in parts)
        assert ct.deserialize_stream(blob) == parts

    def test_bad_magic(self):
        with pytest.raises(ContainerError, match="magic"):
            ct.deserialize(b"XXXX" + ct.serialize(artifact())[4:])

    def test_bad_version(self):
        blob = bytearray(ct.serialize(artifact()))
        blob[4] = 9
        with pytest.raises(ContainerError, match="version"):
            ct.deserialize(bytes(blob))

    def test_unknown_codec(self):
        blob = bytearray(ct.serialize(artifact()))
        blob[5] = 0x80 | 42
        with pytest.raises(ContainerError, match="codec"):
            ct.deserialize(bytes(blob))

    @pytest.mark.parametrize("entropic", [True, False])
    def test_truncated(self, entropic):
        blob = ct.serialize(artifact(entropic=entropic))
        for cut in (5, 10, len(blob) - 1):
            with pytest.raises(ContainerError):
                ct.deserialize(blob[:cut])

    def test_declared_length_too_long(self):
        blob = bytearray(ct.serialize(artifact(entropic=False)))
        struct.pack_into("<Q", blob, 18, 51)
        with pytest.raises(ContainerError):
            ct.deserialize(bytes(blob))

    def test_trailing_bytes(self):
        with pytest.raises(ContainerError, match="trailing"):
            ct.deserialize(ct.serialize(artifact()) + b"\x00")

    @settings(max_examples=50, deadline=None)
    @given(st.sampled_from(list(CodecId)), st.text(max_size=20), st.binary(max_size=200),
           st.binary(max_size=500), st.booleans())
    def test_round_trip_property(self, codec, gid, header, payload, entropic):
        a = CompressedArtifact(codec, gid, header, payload, entropic)
        assert ct.deserialize(ct.serialize(a)) == a


class TestGzipStage:
    def test_empty(self):
        assert ct.gunzip(ct.gzip_stage(b"")) == b""

    def test_repetitive_shrinks(self):
        assert len(ct.gzip_stage(b"\x00" * 1_000_000)) < 10_000

    def test_random_bytes_grow_slightly(self):
        data = os.urandom(1_000_000)
        out = ct.gzip_stage(data)
        assert 1_000_000 <= len(out) <= 1_001_000
        assert ct.gunzip(out) == data

    @settings(max_examples=40, deadline=None)
    @given(st.binary(max_size=2000))
    def test_round_trip(self, data):
        assert ct.gunzip(ct.gzip_stage(data)) == data

    def test_header_mtime_zero(self):
        assert ct.gzip_stage(b"abc")[4:8] == b"\x00\x00\x00\x00"


class TestRatio:
    def test_values(self):
        assert ct.compression_ratio(25, 100) == 25.0
        assert ct.compression_ratio(150, 100) == 150.0

    @given(st.integers(1, 10**9), st.integers(1, 10**9))
    def test_homogeneous(self, a, b):
        assert ct.compression_ratio(a, a) == 100.0
        assert ct.compression_ratio(2 * a, 2 * b) == ct.compression_ratio(a, b)

    def test_zero_baseline(self):
        with pytest.raises(ValueError):
            ct.compression_ratio(10, 0)

    def test_size_report_sum(self):
        total = ct.SizeReport(10, 5, 20) + ct.SizeReport(30, 15, 20)
        assert total == ct.SizeReport(40, 20, 40) and total.ratio_pct == 50.0


class TestEntropy:
    def test_constant_column(self):
        per, med = ct.entropy_estimate(np.full((10, 1), 3.5))
        assert per[0] == 0.0 and med == 0.0

    def test_two_equiprobable(self):
        per, _ = ct.entropy_estimate(np.array([1.0, 2.0] * 8))
        assert per[0] == pytest.approx(1.0)

    def test_distinct_values(self):
        per, _ = ct.entropy_estimate(np.arange(256.0))
        assert per[0] == pytest.approx(8.0)

    def test_median_over_columns(self):
        x = np.column_stack([np.zeros(8), np.arange(8.0), np.arange(8.0) % 2])
        per, med = ct.entropy_estimate(x)
        np.testing.assert_allclose(per, [0.0, 3.0, 1.0])
        assert med == 1.0

    def test_float32_collapses_near_values(self):
        x = np.array([1.0, 1.0 + 1e-12])
        assert ct.entropy_estimate(x, "float32")[0][0] == 0.0
        assert ct.entropy_estimate(x, "float64")[0][0] == pytest.approx(1.0)

    def test_codes_mode(self):
        per, _ = ct.entropy_estimate(np.array([[0], [1], [2], [3]], dtype=np.uint64), "codes")
        assert per[0] == pytest.approx(2.0)

    def test_all_distinct(self):
        assert ct.entropy_estimate(np.arange(37.0))[0][0] == pytest.approx(np.log2(37))

    def test_empty(self):
        with pytest.raises(ValueError):
            ct.entropy_estimate(np.zeros((0, 2)))

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.integers(0, 5), min_size=2, max_size=60), st.integers(0, 1000))
    def test_row_permutation_invariant(self, values, seed):
        x = np.array(values, dtype=float).reshape(-1, 1)
        shuffled = np.random.default_rng(seed).permutation(x)
        assert ct.entropy_estimate(x)[1] == ct.entropy_estimate(shuffled)[1]

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            ct.entropy_estimate(np.zeros(3), "bits")

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.integers(0, 9), min_size=1, max_size=100))
    def test_bounds(self, values):
        per, _ = ct.entropy_estimate(np.array(values, dtype=float))
        assert 0.0 <= per[0] <= np.log2(len(set(values))) + 1e-12

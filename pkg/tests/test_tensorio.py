"""Interchange-format reader/writer: round-trips, header layout, and the
malformed-file corpus."""

import ast
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pixelbench.errors import DataError, FormatError, UnsupportedDtypeError
from pixelbench.tensorio import (FeatureMap, LabelMask, read_tensor,
                                 write_tensor)

MAGIC = b"\x93NUMPY"


def _raw_file(path, descr, fortran, shape, payload, version=(1, 0), pad_to=64):
    """Hand-rolled writer so reader tests do not depend on write_tensor."""
    header = ("{'descr': '%s', 'fortran_order': %s, 'shape': %s, }"
              % (descr, fortran, shape)).encode("latin1")
    base = len(MAGIC) + 2 + 2
    total = base + len(header) + 1
    header += b" " * (-total % pad_to) + b"\n"
    blob = MAGIC + bytes(version) + struct.pack("<H", len(header)) + header + payload
    path.write_bytes(blob)
    return blob


class TestRoundTrip:
    def test_feature_map_3d(self, tmp_path):
        data = np.arange(24, dtype=np.float32).reshape(2, 3, 4)
        write_tensor(FeatureMap(data), tmp_path / "f.npy")
        back = read_tensor(tmp_path / "f.npy")
        assert isinstance(back, FeatureMap)
        assert back.data.dtype == np.float32
        assert np.array_equal(back.data, data)

    def test_feature_map_2d_reads_as_single_channel(self, tmp_path):
        _raw_file(tmp_path / "f.npy", "<f4", False, (3, 2),
                  np.arange(6, dtype="<f4").tobytes())
        back = read_tensor(tmp_path / "f.npy")
        assert isinstance(back, FeatureMap)
        assert back.data.shape == (3, 2, 1)

    def test_label_mask(self, tmp_path):
        data = np.array([[0, 1], [255, 2]], dtype=np.uint8)
        write_tensor(LabelMask(data), tmp_path / "m.npy")
        back = read_tensor(tmp_path / "m.npy", ignore_value=255)
        assert isinstance(back, LabelMask)
        assert back.ignore_value == 255
        assert np.array_equal(back.data, data)

    def test_numpy_can_read_our_files(self, tmp_path):
        data = np.linspace(-1, 1, 30, dtype=np.float32).reshape(5, 3, 2)
        write_tensor(FeatureMap(data), tmp_path / "f.npy")
        assert np.array_equal(np.load(tmp_path / "f.npy"), data)

    def test_we_can_read_numpy_files(self, tmp_path):
        data = np.random.default_rng(0).random((4, 5)).astype(np.float32)
        np.save(tmp_path / "f.npy", data)
        back = read_tensor(tmp_path / "f.npy")
        assert np.array_equal(back.data[:, :, 0], data)

    def test_write_is_deterministic(self, tmp_path):
        data = np.ones((2, 2, 2), dtype=np.float32)
        write_tensor(FeatureMap(data), tmp_path / "a.npy")
        write_tensor(FeatureMap(data), tmp_path / "b.npy")
        assert (tmp_path / "a.npy").read_bytes() == (tmp_path / "b.npy").read_bytes()

    @given(st.integers(1, 7), st.integers(1, 7), st.integers(1, 5),
           st.integers(0, 2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_roundtrip_property(self, tmp_path_factory, h, w, c, seed):
        rng = np.random.default_rng(seed)
        data = rng.normal(size=(h, w, c)).astype(np.float32)
        path = tmp_path_factory.mktemp("rt") / "t.npy"
        write_tensor(FeatureMap(data), path)
        assert np.array_equal(read_tensor(path).data, data)


class TestHeaderLayout:
    def test_header_is_64_byte_aligned(self, tmp_path):
        write_tensor(FeatureMap(np.zeros((1, 1, 1), np.float32)), tmp_path / "t.npy")
        blob = (tmp_path / "t.npy").read_bytes()
        (hlen,) = struct.unpack("<H", blob[8:10])
        assert (10 + hlen) % 64 == 0
        assert blob[:6] == MAGIC
        assert blob[6:8] == b"\x01\x00"
        header = blob[10:10 + hlen]
        assert header.endswith(b"\n")
        parsed = ast.literal_eval(header.decode("latin1"))
        assert parsed == {"descr": "<f4", "fortran_order": False, "shape": (1, 1, 1)}

    def test_mask_header_dtype(self, tmp_path):
        write_tensor(LabelMask(np.zeros((2, 3), np.uint8)), tmp_path / "t.npy")
        blob = (tmp_path / "t.npy").read_bytes()
        assert b"'|u1'" in blob
        assert b"(2, 3)" in blob

    def test_write_rejects_plain_arrays(self, tmp_path):
        with pytest.raises(TypeError):
            write_tensor(np.zeros((2, 2), np.float32), tmp_path / "t.npy")


class TestValidation:
    def test_featuremap_requires_3d(self):
        with pytest.raises(Exception):
            FeatureMap(np.zeros((2, 2), np.float32))

    def test_featuremap_coerces_to_float32(self):
        fmap = FeatureMap(np.full((1, 1, 2), 0.25, np.float64))
        assert fmap.data.dtype == np.float32

    def test_labelmask_requires_2d_uint8(self):
        with pytest.raises(Exception):
            LabelMask(np.zeros((2, 2, 1), np.uint8))
        with pytest.raises(Exception):
            LabelMask(np.zeros((2, 2), np.int32))

    def test_nan_payload_rejected(self, tmp_path):
        payload = np.array([1.0, np.nan, 3.0, 4.0], "<f4").tobytes()
        _raw_file(tmp_path / "t.npy", "<f4", False, (2, 2), payload)
        with pytest.raises(DataError):
            read_tensor(tmp_path / "t.npy")

    def test_inf_payload_rejected(self, tmp_path):
        payload = np.array([1.0, np.inf, 3.0, 4.0], "<f4").tobytes()
        _raw_file(tmp_path / "t.npy", "<f4", False, (2, 2), payload)
        with pytest.raises(DataError):
            read_tensor(tmp_path / "t.npy")


class TestMalformedCorpus:
    PAYLOAD22 = np.zeros(4, "<f4").tobytes()

    def test_bad_magic(self, tmp_path):
        blob = _raw_file(tmp_path / "t.npy", "<f4", False, (2, 2), self.PAYLOAD22)
        (tmp_path / "t.npy").write_bytes(b"\x93NUMPZ" + blob[6:])
        with pytest.raises(FormatError):
            read_tensor(tmp_path / "t.npy")

    def test_unsupported_version(self, tmp_path):
        _raw_file(tmp_path / "t.npy", "<f4", False, (2, 2), self.PAYLOAD22,
                  version=(2, 0))
        with pytest.raises(FormatError):
            read_tensor(tmp_path / "t.npy")

    def test_fortran_order_rejected(self, tmp_path):
        _raw_file(tmp_path / "t.npy", "<f4", True, (2, 2), self.PAYLOAD22)
        with pytest.raises(FormatError):
            read_tensor(tmp_path / "t.npy")

    def test_unsupported_dtype(self, tmp_path):
        _raw_file(tmp_path / "t.npy", "<f8", False, (2, 2),
                  np.zeros(4, "<f8").tobytes())
        with pytest.raises(UnsupportedDtypeError):
            read_tensor(tmp_path / "t.npy")

    def test_big_endian_dtype_rejected(self, tmp_path):
        _raw_file(tmp_path / "t.npy", ">f4", False, (2, 2),
                  np.zeros(4, ">f4").tobytes())
        with pytest.raises(UnsupportedDtypeError):
            read_tensor(tmp_path / "t.npy")

    def test_mask_must_be_2d(self, tmp_path):
        _raw_file(tmp_path / "t.npy", "|u1", False, (2, 2, 2), bytes(8))
        with pytest.raises(FormatError):
            read_tensor(tmp_path / "t.npy")

    def test_feature_1d_rejected(self, tmp_path):
        _raw_file(tmp_path / "t.npy", "<f4", False, (4,), self.PAYLOAD22)
        with pytest.raises(FormatError):
            read_tensor(tmp_path / "t.npy")

    def test_zero_axis_rejected(self, tmp_path):
        _raw_file(tmp_path / "t.npy", "<f4", False, (0, 2), b"")
        with pytest.raises(FormatError):
            read_tensor(tmp_path / "t.npy")

    def test_truncated_header(self, tmp_path):
        blob = _raw_file(tmp_path / "t.npy", "<f4", False, (2, 2), self.PAYLOAD22)
        (tmp_path / "t.npy").write_bytes(blob[:20])
        with pytest.raises(FormatError):
            read_tensor(tmp_path / "t.npy")

    def test_truncated_payload(self, tmp_path):
        blob = _raw_file(tmp_path / "t.npy", "<f4", False, (2, 2), self.PAYLOAD22)
        (tmp_path / "t.npy").write_bytes(blob[:-4])
        with pytest.raises(FormatError):
            read_tensor(tmp_path / "t.npy")

    def test_trailing_bytes_rejected(self, tmp_path):
        blob = _raw_file(tmp_path / "t.npy", "<f4", False, (2, 2), self.PAYLOAD22)
        (tmp_path / "t.npy").write_bytes(blob + b"x")
        with pytest.raises(FormatError):
            read_tensor(tmp_path / "t.npy")

    def test_header_not_a_dict(self, tmp_path):
        header = b"[1, 2, 3]"
        total = 10 + len(header) + 1
        header += b" " * (-total % 64) + b"\n"
        blob = MAGIC + b"\x01\x00" + struct.pack("<H", len(header)) + header
        (tmp_path / "t.npy").write_bytes(blob + self.PAYLOAD22)
        with pytest.raises(FormatError):
            read_tensor(tmp_path / "t.npy")

    def test_header_extra_keys(self, tmp_path):
        header = (b"{'descr': '<f4', 'fortran_order': False, "
                  b"'shape': (2, 2), 'extra': 1, }")
        total = 10 + len(header) + 1
        header += b" " * (-total % 64) + b"\n"
        blob = MAGIC + b"\x01\x00" + struct.pack("<H", len(header)) + header
        (tmp_path / "t.npy").write_bytes(blob + self.PAYLOAD22)
        with pytest.raises(FormatError):
            read_tensor(tmp_path / "t.npy")

    def test_missing_file_is_oserror(self, tmp_path):
        with pytest.raises(OSError):
            read_tensor(tmp_path / "nope.npy")

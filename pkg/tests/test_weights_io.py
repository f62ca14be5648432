"""Binary tensor container format contracts."""

import struct

import numpy as np
import pytest

from blindiq import weights_io as wio
from blindiq.errors import (
    BadMagicError,
    DuplicateTensorError,
    TruncatedPayloadError,
    UnsupportedDtypeError,
    VersionMismatchError,
)


def sample_tensors(seed=0):
    rng = np.random.default_rng(seed)
    return {
        "alpha": rng.normal(size=(3, 4)).astype(np.float32),
        "beta": rng.normal(size=(2, 2, 2)).astype(np.float64),
        "gamma": rng.normal(size=7).astype(np.float32),
    }


class TestRoundTrip:
    def test_values_survive(self, tmp_path):
        path = tmp_path / "t.larw"
        tensors = sample_tensors()
        wio.write_tensors(path, tensors)
        loaded = wio.read_tensors(path)
        assert list(loaded) == list(tensors)
        for name in tensors:
            np.testing.assert_array_equal(loaded[name], tensors[name])
            assert loaded[name].dtype == tensors[name].dtype

    def test_save_load_save_bit_identical(self, tmp_path):
        a, b = tmp_path / "a.larw", tmp_path / "b.larw"
        wio.write_tensors(a, sample_tensors())
        wio.write_tensors(b, wio.read_tensors(a))
        assert a.read_bytes() == b.read_bytes()

    def test_scalar_rank_zero(self, tmp_path):
        path = tmp_path / "s.larw"
        wio.write_tensors(path, {"x": np.float32(3.5)})
        assert wio.read_tensors(path)["x"] == np.float32(3.5)


class TestErrors:
    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.larw"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(BadMagicError):
            wio.read_tensors(path)

    def test_version_mismatch(self, tmp_path):
        path = tmp_path / "v.larw"
        path.write_bytes(wio.MAGIC + struct.pack("<II", 99, 0))
        with pytest.raises(VersionMismatchError):
            wio.read_tensors(path)

    def test_truncated_payload_reports_lengths(self, tmp_path):
        path = tmp_path / "t.larw"
        wio.write_tensors(path, sample_tensors())
        blob = path.read_bytes()
        path.write_bytes(blob[:-5])
        with pytest.raises(TruncatedPayloadError, match=r"\d+"):
            wio.read_tensors(path)

    def test_unsupported_dtype_code(self, tmp_path):
        path = tmp_path / "d.larw"
        header = wio.MAGIC + struct.pack("<II", wio.VERSION, 1)
        header += struct.pack("<I", 1) + b"x" + struct.pack("<BB", 2, 1)
        header += struct.pack("<I", 4)
        path.write_bytes(header + b"\x00" * 16)
        with pytest.raises(UnsupportedDtypeError):
            wio.read_tensors(path)

    def test_duplicate_names(self, tmp_path):
        path = tmp_path / "dup.larw"
        entry = struct.pack("<I", 1) + b"x" + struct.pack("<BB", 0, 1) + struct.pack("<I", 1)
        header = wio.MAGIC + struct.pack("<II", wio.VERSION, 2) + entry + entry
        path.write_bytes(header + b"\x00" * 8)
        with pytest.raises(DuplicateTensorError):
            wio.read_tensors(path)

    def test_write_rejects_int_tensors(self, tmp_path):
        with pytest.raises(UnsupportedDtypeError):
            wio.write_tensors(tmp_path / "i.larw", {"x": np.arange(3)})

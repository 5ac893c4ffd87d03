import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from randutv.errors import FormatError
from randutv.io import read_csv, read_matrix, read_rutv, write_csv, write_matrix, write_rutv


def test_rutv_layout(tmp_path):
    A = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    p = tmp_path / "a.rutv"
    write_rutv(p, A)
    raw = p.read_bytes()
    assert raw[:4] == b"RUTV"
    assert struct.unpack("<QQ", raw[4:20]) == (2, 3)
    assert struct.unpack("<6d", raw[20:]) == (1.0, 4.0, 2.0, 5.0, 3.0, 6.0)


@given(arrays(np.float64, st.tuples(st.integers(0, 6), st.integers(0, 6)),
              elements=st.floats(allow_nan=False, allow_infinity=False)))
def test_rutv_roundtrip_bits(tmp_path_factory, A):
    p = tmp_path_factory.mktemp("io") / "m.rutv"
    write_rutv(p, A)
    B = read_rutv(p)
    assert B.shape == A.shape and np.array_equal(B.view(np.uint64), np.asarray(A).view(np.uint64))
    assert B.flags.f_contiguous


@given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 5)),
              elements=st.floats(-1e300, 1e300, allow_nan=False)))
def test_csv_roundtrip_exact(tmp_path_factory, A):
    p = tmp_path_factory.mktemp("io") / "m.csv"
    write_csv(p, A)
    assert np.array_equal(read_csv(p), A)


def test_bad_files(tmp_path):
    p = tmp_path / "x.rutv"
    p.write_bytes(b"NOPE" + struct.pack("<QQ", 1, 1) + b"\0" * 8)
    with pytest.raises(FormatError):
        read_rutv(p)
    p.write_bytes(b"RUTV" + struct.pack("<QQ", 2, 2) + b"\0" * 8)
    with pytest.raises(FormatError):
        read_rutv(p)
    p.write_bytes(b"RUT")
    with pytest.raises(FormatError):
        read_rutv(p)
    p.write_bytes(b"RUTV" + struct.pack("<QQd", 1, 1, float("nan")))
    with pytest.raises(FormatError):
        read_rutv(p)


def test_bad_csv(tmp_path):
    p = tmp_path / "x.csv"
    for text in ["1,2\n3\n", "1,a\n", "", "1,inf\n"]:
        p.write_text(text)
        with pytest.raises(FormatError):
            read_csv(p)


def test_dispatch_by_extension(tmp_path):
    A = np.arange(6.0).reshape(2, 3)
    for name in ("m.csv", "m.rutv", "m.bin"):
        write_matrix(tmp_path / name, A)
        assert np.array_equal(read_matrix(tmp_path / name), A)
    assert (tmp_path / "m.bin").read_bytes()[:4] == b"RUTV"

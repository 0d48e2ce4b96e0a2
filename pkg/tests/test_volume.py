"""Container invariants and the VXF round trip."""

import numpy as np
import pytest

from voxseg.errors import FormatError, ValidationError
from voxseg.volume import (LabelVolume, SliceRef, Volume, extract_slice,
                           load_labels, load_volume, save_volume, write_pgm)


def test_linear_order_is_x_fastest():
    dims = (2, 3, 4)
    v = Volume.from_flat(dims, np.arange(24, dtype=np.float32), 100.0)
    for z in range(4):
        for y in range(3):
            for x in range(2):
                assert v.data[x, y, z] == x + 2 * (y + 3 * z)
    assert np.array_equal(v.flat(), np.arange(24))


def test_label_flat_round_trip():
    lab = LabelVolume.from_flat((2, 2, 2), [0, 1, 2, 3, 4, 5, 6, 7])
    assert lab.labels[1, 0, 0] == 1
    assert lab.labels[0, 1, 0] == 2
    assert lab.labels[0, 0, 1] == 4
    assert np.array_equal(lab.flat(), np.arange(8))


def test_volume_validation():
    good = np.zeros((2, 2, 2), dtype=np.float32)
    with pytest.raises(ValidationError):
        Volume((2, 2), good, 1.0)
    with pytest.raises(ValidationError):
        Volume((2, 2, 3), good, 1.0)
    with pytest.raises(ValidationError):
        Volume((2, 2, 2), good - 1.0, 1.0)
    with pytest.raises(ValidationError):
        Volume((2, 2, 2), good + np.nan, 1.0)
    with pytest.raises(ValidationError):
        Volume((2, 2, 2), good, 0.0)
    with pytest.raises(ValidationError):
        Volume((2, 2, 2), good + 5.0, 4.0)  # imax below the data


def test_volume_data_is_frozen():
    v = Volume((2, 2, 2), np.zeros((2, 2, 2)), 1.0)
    with pytest.raises(ValueError):
        v.data[0, 0, 0] = 3.0


def test_label_validation():
    with pytest.raises(ValidationError):
        LabelVolume((2, 2, 2), np.full((2, 2, 2), 300))
    with pytest.raises(ValidationError):
        LabelVolume((2, 2, 2), np.full((2, 2, 2), -1))


def test_volume_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    data = rng.uniform(0, 200, size=(5, 4, 3)).astype(np.float32)
    v = Volume((5, 4, 3), data, 250.0)
    path = tmp_path / "v.vxf"
    save_volume(v, path)
    back = load_volume(path)
    assert back == v
    assert back.intensity_max == 250.0


def test_labels_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    lab = LabelVolume((3, 4, 5), rng.integers(0, 5, size=(3, 4, 5)))
    path = tmp_path / "l.vxf"
    save_volume(lab, path)
    assert load_labels(path) == lab


def test_loaders_reject_wrong_kind(tmp_path):
    vp, lp = tmp_path / "v.vxf", tmp_path / "l.vxf"
    save_volume(Volume((2, 2, 2), np.ones((2, 2, 2)), 2.0), vp)
    save_volume(LabelVolume((2, 2, 2), np.zeros((2, 2, 2), dtype=np.uint8)), lp)
    with pytest.raises(ValidationError):
        load_volume(lp)
    with pytest.raises(ValidationError):
        load_labels(vp)


def test_bad_magic(tmp_path):
    path = tmp_path / "x.vxf"
    path.write_bytes(b"NOPE" + b"\x00" * 40)
    with pytest.raises(FormatError):
        load_volume(path)


def test_unknown_dtype_code(tmp_path):
    path = tmp_path / "x.vxf"
    save_volume(Volume((2, 2, 2), np.ones((2, 2, 2)), 2.0), path)
    raw = bytearray(path.read_bytes())
    raw[4] = 9
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError):
        load_volume(path)


def test_truncated_payload(tmp_path):
    path = tmp_path / "x.vxf"
    save_volume(Volume((2, 2, 2), np.ones((2, 2, 2)), 2.0), path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-5])
    with pytest.raises(OSError):
        load_volume(path)


def test_trailing_bytes(tmp_path):
    path = tmp_path / "x.vxf"
    save_volume(Volume((2, 2, 2), np.ones((2, 2, 2)), 2.0), path)
    path.write_bytes(path.read_bytes() + b"\x00\x00")
    with pytest.raises(FormatError):
        load_volume(path)


def test_slice_ref_parse():
    ref = SliceRef.parse("z:60")
    assert (ref.axis, ref.index) == ("z", 60)
    for bad in ("w:3", "z", "z:abc", ":4"):
        with pytest.raises(ValidationError):
            SliceRef.parse(bad)
    with pytest.raises(ValidationError):
        SliceRef("z", -1)


def test_extract_slice_matches_indexing():
    rng = np.random.default_rng(5)
    v = Volume((4, 5, 6), rng.uniform(0, 9, size=(4, 5, 6)), 10.0)
    sz = extract_slice(v, SliceRef("z", 2))
    assert sz.dims == (4, 5, 1)
    assert np.array_equal(np.squeeze(sz.data, axis=2), v.data[:, :, 2])
    sx = extract_slice(v, SliceRef("x", 3))
    assert sx.dims == (1, 5, 6)
    assert np.array_equal(np.squeeze(sx.data, axis=0), v.data[3, :, :])
    sy = extract_slice(v, SliceRef("y", 0))
    assert sy.dims == (4, 1, 6)
    assert np.array_equal(np.squeeze(sy.data, axis=1), v.data[:, 0, :])
    with pytest.raises(IndexError):
        extract_slice(v, SliceRef("z", 6))


def test_extract_slice_labels():
    lab = LabelVolume.from_flat((2, 2, 3), range(12))
    s = extract_slice(lab, SliceRef("z", 1))
    assert isinstance(s, LabelVolume)
    assert np.array_equal(np.squeeze(s.labels, axis=2), lab.labels[:, :, 1])


def test_plane_requires_single_slice():
    v = Volume((2, 2, 2), np.zeros((2, 2, 2)), 1.0)
    with pytest.raises(ValidationError):
        v.plane()
    s = Volume((2, 3, 1), np.arange(6, dtype=np.float32).reshape(2, 3, 1), 10.0)
    assert s.plane().shape == (2, 3)


def test_write_pgm_bytes(tmp_path):
    # 2x3 plane, imax 100: value 37 scales to round(37 * 2.55) = 94
    vals = np.array([[0.0, 37.0, 100.0],
                     [40.0, 99.9, 2.0]]).reshape(2, 3, 1)
    v = Volume((2, 3, 1), vals, 100.0)
    path = tmp_path / "s.pgm"
    write_pgm(v, path)
    raw = path.read_bytes()
    header = b"P5\n2 3\n255\n"
    assert raw.startswith(header)
    # raster rows run along y, so the plane is emitted transposed
    assert list(raw[len(header):]) == [0, 102, 94, 255, 255, 5]

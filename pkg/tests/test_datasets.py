import struct

import numpy as np
import pytest

from splitmesh.data.datasets import (CLASSIFICATION, REGRESSION, REGRESSION_COEFFICIENTS, REGRESSION_INTERCEPT,
                                     load_csv, load_tensor_dir, normalize, synth)
from splitmesh.data.tensorfile import decode_nt, encode_nt, pgm_to_nt, read_nt, write_nt
from splitmesh.errors import IoError, NoUsableRows, ShapeMismatch, UnknownColumn


# .nt files

def test_nt_layout():
    t = np.array([[1, 2], [3, 4]], dtype=np.float32)
    raw = encode_nt(t)
    assert raw[:4] == b"NTSR" and raw[4] == 1 and raw[5] == 2
    assert raw[6:14] == struct.pack("<II", 2, 2)
    assert raw[14:] == struct.pack("<4f", 1, 2, 3, 4)
    assert np.array_equal(decode_nt(raw), t)


@pytest.mark.parametrize("raw", [b"", b"XXXX\x01\x01", b"NTSR\x02\x01\x01\x00\x00\x00",
                                 b"NTSR\x01\x02\x01\x00", b"NTSR\x01\x01\x02\x00\x00\x00\x00\x00\x80\x3f"])
def test_nt_bad_files(raw):
    with pytest.raises(IoError):
        decode_nt(raw)


def test_read_missing(tmp_path):
    with pytest.raises(IoError):
        read_nt(tmp_path / "none.nt")


# tensor dirs

def make_dir(root, pos, neg, shape=(1, 8, 8)):
    for sub, count in (("pos", pos), ("neg", neg)):
        (root / sub).mkdir(parents=True, exist_ok=True)
        for i in range(count):
            write_nt(root / sub / f"img{i}.nt", np.full(shape, i, dtype=np.float32))


def test_tensor_dir(tmp_path):
    make_dir(tmp_path, 2, 3)
    ds = load_tensor_dir(tmp_path)
    assert len(ds) == 5
    assert ds.labels.tolist() == [1, 1, 0, 0, 0]
    assert ds.features[:, 0, 0, 0].tolist() == [0, 1, 0, 1, 2]


def test_tensor_dir_mixed_shapes(tmp_path):
    make_dir(tmp_path, 1, 0)
    (tmp_path / "neg").mkdir(exist_ok=True)
    write_nt(tmp_path / "neg" / "odd.nt", np.zeros((1, 4, 4), dtype=np.float32))
    with pytest.raises(ShapeMismatch):
        load_tensor_dir(tmp_path)


def test_tensor_dir_empty(tmp_path):
    with pytest.raises(NoUsableRows):
        load_tensor_dir(tmp_path)
    with pytest.raises(IoError):
        load_tensor_dir(tmp_path / "missing")


# pgm conversion

def write_pgm(path, pixels):
    h, w = pixels.shape
    path.write_bytes(f"P5\n{w} {h}\n255\n".encode() + pixels.astype(np.uint8).tobytes())


def test_pgm_to_nt(tmp_path):
    px = np.arange(12).reshape(3, 4) * 20
    write_pgm(tmp_path / "a.pgm", px)
    t = pgm_to_nt(tmp_path / "a.pgm", tmp_path / "a.nt")
    assert t.shape == (1, 3, 4)
    np.testing.assert_allclose(read_nt(tmp_path / "a.nt")[0], px / 255.0, rtol=1e-6)


def test_pgm_resize_constant_image(tmp_path):
    write_pgm(tmp_path / "c.pgm", np.full((10, 10), 51))
    t = pgm_to_nt(tmp_path / "c.pgm", tmp_path / "c.nt", size=(4, 6))
    assert t.shape == (1, 4, 6)
    np.testing.assert_allclose(t, 0.2, rtol=1e-6)


def test_pgm_rejects_other_files(tmp_path):
    (tmp_path / "x.pgm").write_bytes(b"not an image")
    with pytest.raises(IoError):
        pgm_to_nt(tmp_path / "x.pgm", tmp_path / "x.nt")
    from PIL import Image

    Image.new("RGB", (2, 2)).save(tmp_path / "rgb.ppm")
    with pytest.raises(IoError):
        pgm_to_nt(tmp_path / "rgb.ppm", tmp_path / "rgb.nt")


# csv

def test_csv_drops_malformed(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,b,y\n1,2,3\n4,x,6\n7,8,9\n")
    ds = load_csv(p, ["a", "b"], "y")
    assert len(ds) == 2 and ds.dropped == 1
    assert ds.labels.tolist() == [3, 9]


def test_csv_unknown_label(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(UnknownColumn):
        load_csv(p, ["a"], "y")


def test_csv_no_rows_and_missing(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,y\nq,1\n,2\n")
    with pytest.raises(NoUsableRows):
        load_csv(p, ["a"], "y")
    with pytest.raises(IoError):
        load_csv(tmp_path / "nope.csv", ["a"], "y")


def test_csv_unused_columns_do_not_drop(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,junk,y\n1,,2\n3,z,4\n")
    assert len(load_csv(p, ["a"], "y")) == 2


def test_csv_constant_column_normalises_to_zero(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,b,y\n5,1,0\n5,2,1\n5,3,0\n")
    ds = load_csv(p, ["a", "b"], "y", train_rows=[0, 1, 2])
    assert not ds.features[:, 0].any()
    np.testing.assert_allclose(ds.features[:, 1], [-1.2247449, 0, 1.2247449], rtol=1e-6)


def test_normalisation_uses_training_rows_only():
    ds = synth(REGRESSION, 50, (7,), 3)
    train = list(range(0, 50, 2))
    out, (mean, std) = normalize(ds, train)
    ref = ds.features.astype(np.float64)[train]
    np.testing.assert_allclose(mean, ref.mean(axis=0))
    np.testing.assert_allclose(std, ref.std(axis=0))
    np.testing.assert_allclose(out.features[train].mean(axis=0), 0, atol=1e-6)
    assert abs(out.features[1::2].mean()) > 0  # held-out rows are not re-centred


# synth

def test_synth_deterministic():
    a = synth(CLASSIFICATION, 100, (1, 8, 8), 1)
    b = synth(CLASSIFICATION, 100, (1, 8, 8), 1)
    assert a.features.tobytes() == b.features.tobytes() and a.labels.tobytes() == b.labels.tobytes()
    assert a.labels.sum() == 50
    assert a.sample_shape == (1, 8, 8)


def test_synth_positive_fraction():
    ds = synth(CLASSIFICATION, 100, (5,), 0, positive_fraction=0.3)
    assert ds.labels.sum() == 30


def test_synth_regression_noise_free_is_log_linear():
    ds = synth(REGRESSION, 64, (7,), 2, noise=0.0)
    expect = REGRESSION_INTERCEPT + ds.features.astype(np.float64) @ np.array(REGRESSION_COEFFICIENTS)
    np.testing.assert_allclose(np.log(ds.labels.astype(np.float64)), expect, rtol=1e-5, atol=1e-6)
    # an exact linear fit of ln(target) reaches zero MSE
    X = np.hstack([ds.features.astype(np.float64), np.ones((64, 1))])
    logy = np.log(ds.labels.astype(np.float64))
    coef, *_ = np.linalg.lstsq(X, logy, rcond=None)
    assert np.mean((X @ coef - logy) ** 2) < 1e-10


def test_synth_regression_targets_positive():
    for seed in range(20):
        assert synth(REGRESSION, 500, (7,), seed, noise=0.1).labels.min() > 0


def test_synth_small_n():
    with pytest.raises(ValueError):
        synth(CLASSIFICATION, 1, (3,), 0)


def test_classes_are_separable_on_average():
    ds = synth(CLASSIFICATION, 400, (1, 8, 8), 4)
    pos = ds.features[ds.labels == 1].mean()
    neg = ds.features[ds.labels == 0].mean()
    assert pos > 0 > neg

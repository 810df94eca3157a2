import gzip
import json
import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pl_lab.data_io import (
    IDX_IMAGES,
    IDX_LABELS,
    class_means,
    encode_idx,
    load_idx,
    parse_idx,
    read_pl_dataset,
    synth_gaussian_mixture,
    write_idx,
    write_pl_dataset,
)
from pl_lab.errors import DomainError, ParseError
from pl_lab.generation import case_preset, corrupt_dataset
from pl_lab.labelsets import LabelSet
from pl_lab.pl_losses import PLExample


def test_idx_image_header():
    raw = struct.pack(">IIII", IDX_IMAGES, 2, 3, 3) + bytes(range(18))
    arr = parse_idx(raw, IDX_IMAGES)
    assert arr.shape == (2, 3, 3)
    assert arr[1, 2, 2] == 17


def test_idx_wrong_magic():
    raw = struct.pack(">II", IDX_LABELS, 1) + b"\x00"
    with pytest.raises(ParseError, match="byte offset 0"):
        parse_idx(raw, IDX_IMAGES)


@pytest.mark.parametrize("cut", [2, 9, 20])
def test_idx_truncated(cut):
    raw = struct.pack(">IIII", IDX_IMAGES, 2, 3, 3) + bytes(18)
    with pytest.raises(ParseError, match="byte offset"):
        parse_idx(raw[:cut], IDX_IMAGES)


def test_idx_reencode_bit_exact(rng):
    img = rng.integers(0, 256, size=(7, 4, 5), dtype=np.uint8)
    raw = encode_idx(img)
    assert encode_idx(parse_idx(raw, IDX_IMAGES)) == raw
    lab = rng.integers(0, 10, size=7, dtype=np.uint8)
    assert encode_idx(parse_idx(encode_idx(lab), IDX_LABELS)) == encode_idx(lab)


def test_load_idx_scaling_and_labels(tmp_path):
    img = np.zeros((3, 2, 2), dtype=np.uint8)
    img[0, 0, 0] = 255
    write_idx(tmp_path / "i.gz", tmp_path / "l.gz", img, np.array([0, 4, 9]))
    ds = load_idx(tmp_path / "i.gz", tmp_path / "l.gz")
    assert ds.features[0, 0] == 1.0 and ds.features.shape == (3, 4)
    assert list(ds.labels) == [1, 5, 10] and ds.k == 10


def test_gzip_output_reproducible(tmp_path, rng):
    img = rng.integers(0, 256, size=(4, 3, 3), dtype=np.uint8)
    write_idx(tmp_path / "a.gz", tmp_path / "la.gz", img, np.zeros(4))
    write_idx(tmp_path / "b.gz", tmp_path / "lb.gz", img, np.zeros(4))
    assert (tmp_path / "a.gz").read_bytes() == (tmp_path / "b.gz").read_bytes()
    assert gzip.decompress((tmp_path / "a.gz").read_bytes()) == encode_idx(img)


@pytest.mark.parametrize("k,dim", [(3, 5), (5, 50), (6, 2), (4, 1)])
def test_class_means_spacing(k, dim):
    M = class_means(k, dim, 6.0)
    D = np.linalg.norm(M[:, None] - M[None], axis=2)
    off = D[~np.eye(k, dtype=bool)]
    assert off.min() >= 6.0 - 1e-9
    if dim >= k:
        assert np.allclose(off, 6.0)


def test_mixture_nearly_separable():
    ds = synth_gaussian_mixture(3, 2000, 5, 10.0, 0)
    M = class_means(3, 5, 10.0)
    pred = np.argmin(((ds.features[:, None] - M[None]) ** 2).sum(-1), axis=1) + 1
    assert np.mean(pred != ds.labels) < 1e-3


def test_mixture_deterministic_and_balanced():
    a = synth_gaussian_mixture(4, 30, 6, 7.0, 5)
    b = synth_gaussian_mixture(4, 30, 6, 7.0, 5)
    assert np.array_equal(a.features, b.features)
    assert np.bincount(a.labels).tolist() == [0, 30, 30, 30, 30]
    assert not np.array_equal(a.features, synth_gaussian_mixture(4, 30, 6, 7.0, 6).features)


def test_deterministic_scenario_needs_separation():
    with pytest.raises(DomainError):
        synth_gaussian_mixture(3, 10, 3, 2.0, 0, "deterministic")
    synth_gaussian_mixture(3, 10, 3, 2.0, 0, "stochastic")


@given(st.integers(2, 6), st.integers(1, 8), st.integers(0, 2**31 - 1), st.booleans())
def test_pl_file_round_trip(tmp_path_factory, k, n, seed, gz):
    rng = np.random.default_rng(seed)
    cfg = case_preset(4, k)
    X = rng.normal(size=(n, 3)) * 1e3
    y = rng.integers(1, k + 1, size=n)
    ex = corrupt_dataset(cfg, X, y, seed)
    path = tmp_path_factory.mktemp("pl") / ("d.jsonl.gz" if gz else "d.jsonl")
    write_pl_dataset(path, ex, cfg, seed)
    back = read_pl_dataset(path)
    assert back.k == k and back.header["seed"] == seed
    assert back.config.to_dict() == cfg.to_dict()
    for a, b in zip(ex, back.examples):
        assert np.array_equal(a.features, b.features)
        assert a.candidates.mask == b.candidates.mask and a.true_label == b.true_label


def _write_raw(path, header, records):
    lines = [json.dumps(header)] + [json.dumps(r) for r in records]
    path.write_text("\n".join(lines) + "\n")


HEADER = {"format": "pl-dataset", "version": 1, "k": 3, "n": 1, "d": 2, "config": None, "seed": 0}


def test_mask_decodes_to_labels(tmp_path):
    _write_raw(tmp_path / "f.jsonl", HEADER, [{"x": [0.5, 1], "s": 5, "y": None}])
    ex = read_pl_dataset(tmp_path / "f.jsonl").examples[0]
    assert ex.candidates.labels == (1, 3) and ex.true_label is None


def test_full_mask_rejected(tmp_path):
    _write_raw(tmp_path / "f.jsonl", HEADER, [{"x": [0.5, 1], "s": 7, "y": 1}])
    with pytest.raises(ParseError, match="line 2"):
        read_pl_dataset(tmp_path / "f.jsonl")


def test_bad_version(tmp_path):
    _write_raw(tmp_path / "f.jsonl", dict(HEADER, version=2), [])
    with pytest.raises(ParseError, match="line 1"):
        read_pl_dataset(tmp_path / "f.jsonl")


@pytest.mark.parametrize(
    "rec,msg",
    [({"x": [0.5], "s": 1, "y": 1}, "has 1 entries"), ({"x": [0, 0], "y": 1}, "malformed"),
     ({"x": [0, 0], "s": 0, "y": 1}, "line 3")],
)
def test_bad_records_report_line(tmp_path, rec, msg):
    good = {"x": [0, 0], "s": 1, "y": 1}
    _write_raw(tmp_path / "f.jsonl", dict(HEADER, n=2), [good, rec])
    with pytest.raises(ParseError, match=msg):
        read_pl_dataset(tmp_path / "f.jsonl")


def test_count_mismatch(tmp_path):
    _write_raw(tmp_path / "f.jsonl", dict(HEADER, n=3), [{"x": [0, 0], "s": 1, "y": 1}])
    with pytest.raises(ParseError, match="declares 3"):
        read_pl_dataset(tmp_path / "f.jsonl")


def test_empty_write_refused(tmp_path):
    with pytest.raises(DomainError):
        write_pl_dataset(tmp_path / "f.jsonl", [], None, 0)


def test_float_text_is_exact(tmp_path):
    x = np.array([0.1, 1 / 3, 1e-300, -2.5e17])
    write_pl_dataset(tmp_path / "f.jsonl", [PLExample(x, LabelSet(1, 2), 1)], None, None)
    assert np.array_equal(read_pl_dataset(tmp_path / "f.jsonl").examples[0].features, x)

"""Dataset ingestion (IDX, synthetic mixtures) and JSON-lines persistence of PL datasets."""
from __future__ import annotations

import gzip
import io
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError, ParseError
from .generation import GenerationConfig
from .labelsets import LabelSet
from .pl_losses import PLExample

IDX_IMAGES = 2051
IDX_LABELS = 2049
PL_FORMAT = "pl-dataset"
PL_VERSION = 1


@dataclass(eq=False)
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    k: int
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        n = self.labels.size
        if n == 0 or self.features.shape[0] != n:
            raise DomainError(f"need n > 0 matching rows, got {self.features.shape[0]} features, {n} labels")
        if self.labels.min() < 1 or self.labels.max() > self.k:
            raise DomainError(f"labels must lie in 1..{self.k}")

    @property
    def n(self) -> int:
        return self.labels.size

    def subset(self, idx) -> "LabeledDataset":
        return LabeledDataset(self.features[idx], self.labels[idx], self.k, dict(self.provenance))


# -- IDX -------------------------------------------------------------------------------


def _open(path, mode="rb"):
    path = Path(path)
    if path.suffix != ".gz":
        return open(path, mode)
    if "w" in mode:
        raw = _GzipSink(path)
        return io.TextIOWrapper(raw, encoding="utf-8") if "t" in mode else raw
    return gzip.open(path, mode)


class _GzipSink(io.BytesIO):
    """Buffer writes and compress on close with a fixed mtime and no embedded name."""

    def __init__(self, path):
        super().__init__()
        self._path = path

    def close(self):
        if not self.closed:
            Path(self._path).write_bytes(gzip.compress(self.getvalue(), mtime=0))
        super().close()


def parse_idx(raw: bytes, expect_magic: int) -> np.ndarray:
    """Decode an unsigned-byte IDX payload into an array of its declared shape."""
    if len(raw) < 4:
        raise ParseError(f"truncated IDX header at byte offset {len(raw)}")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expect_magic:
        raise ParseError(f"bad IDX magic {magic:#010x} at byte offset 0, expected {expect_magic:#010x}")
    ndim = raw[3]
    end = 4 + 4 * ndim
    if len(raw) < end:
        raise ParseError(f"truncated IDX dimensions at byte offset {len(raw)}")
    dims = struct.unpack(f">{ndim}I", raw[4:end])
    size = math.prod(dims)
    if len(raw) != end + size:
        raise ParseError(
            f"IDX payload is {len(raw) - end} bytes from byte offset {end}, header declares {size}"
        )
    return np.frombuffer(raw, dtype=np.uint8, offset=end).reshape(dims)


def encode_idx(data: np.ndarray) -> bytes:
    data = np.asarray(data, dtype=np.uint8)
    ndim = data.ndim
    magic = 0x0800 | ndim
    return struct.pack(">I", magic) + struct.pack(f">{ndim}I", *data.shape) + data.tobytes()


def load_idx(images_path, labels_path, k: int | None = None) -> LabeledDataset:
    with _open(images_path) as fh:
        imgs = parse_idx(fh.read(), IDX_IMAGES)
    with _open(labels_path) as fh:
        labs = parse_idx(fh.read(), IDX_LABELS)
    if imgs.shape[0] != labs.shape[0]:
        raise ParseError(f"image count {imgs.shape[0]} != label count {labs.shape[0]} (byte offset 4)")
    y = labs.astype(np.int64) + 1
    k = int(y.max()) if k is None else k
    X = imgs.reshape(imgs.shape[0], -1) / 255.0
    prov = {"source": "idx", "images": str(images_path), "labels": str(labels_path)}
    return LabeledDataset(X, y, k, prov)


def write_idx(images_path, labels_path, images: np.ndarray, labels0: np.ndarray) -> None:
    """Write uint8 images and 0-based labels as IDX (gzip if the name ends in .gz)."""
    with _open(images_path, "wb") as fh:
        fh.write(encode_idx(images))
    with _open(labels_path, "wb") as fh:
        fh.write(encode_idx(np.asarray(labels0).reshape(-1)))


# -- synthetic mixtures -------------------------------------------------------------------


def class_means(k: int, dim: int, separation: float) -> np.ndarray:
    """``k`` means with pairwise distance ``separation`` when ``dim >= k``.

    Lower dimensions fall back to a regular polygon (dim >= 2) or a line.
    """
    if dim >= k:
        M = np.zeros((k, dim))
        M[:, :k] = np.eye(k) * (separation / math.sqrt(2.0))
        return M
    if dim >= 2:
        ang = 2 * math.pi * np.arange(k) / k
        r = separation / (2 * math.sin(math.pi / k))
        M = np.zeros((k, dim))
        M[:, 0], M[:, 1] = r * np.cos(ang), r * np.sin(ang)
        return M
    return (separation * np.arange(k, dtype=float))[:, None]


def synth_gaussian_mixture(
    k: int,
    n_per_class: int,
    dim: int,
    separation: float,
    seed: int,
    scenario: str = "deterministic",
) -> LabeledDataset:
    """Isotropic unit-variance Gaussian classes, ``n_per_class`` each, rows grouped by class."""
    if k < 2 or dim < 1 or n_per_class < 1:
        raise DomainError("need k >= 2, dim >= 1, n_per_class >= 1")
    if scenario not in ("deterministic", "stochastic"):
        raise DomainError(f"scenario must be deterministic or stochastic, got {scenario!r}")
    if scenario == "deterministic" and separation < 6:
        raise DomainError("the deterministic scenario needs separation >= 6")
    rng = np.random.default_rng(seed)
    M = class_means(k, dim, separation)
    y = np.repeat(np.arange(1, k + 1), n_per_class)
    X = M[y - 1] + rng.standard_normal((y.size, dim))
    prov = {"source": "gaussian_mixture", "k": k, "n_per_class": n_per_class, "dim": dim,
            "separation": separation, "seed": seed, "scenario": scenario}
    return LabeledDataset(X, y, k, prov)


# -- PL dataset files ------------------------------------------------------------------------


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_pl_dataset(path, examples: Sequence[PLExample], config: GenerationConfig | None, seed: int | None) -> None:
    if len(examples) == 0:
        raise DomainError("refusing to write an empty PL dataset")
    k = examples[0].candidates.k
    d = examples[0].features.size
    for i, ex in enumerate(examples):
        if ex.candidates.k != k or ex.features.size != d:
            raise DomainError(f"example {i} has inconsistent k or feature dim")
    header = {"format": PL_FORMAT, "version": PL_VERSION, "k": k, "n": len(examples), "d": d,
              "config": None if config is None else config.to_dict(), "seed": seed}
    with _open(path, "wt") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for ex in examples:
            x = "[" + ",".join(_fmt(v) for v in ex.features.ravel()) + "]"
            y = "null" if ex.true_label is None else str(int(ex.true_label))
            fh.write(f'{{"x":{x},"s":{ex.candidates.mask},"y":{y}}}\n')


@dataclass(eq=False)
class PLDatasetFile:
    header: dict
    examples: list

    @property
    def k(self) -> int:
        return self.header["k"]

    @property
    def config(self) -> GenerationConfig | None:
        c = self.header.get("config")
        return None if c is None else GenerationConfig.from_dict(c)


def read_pl_dataset(path) -> PLDatasetFile:
    with _open(path, "rt") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("line 1: empty file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise ParseError(f"line 1: malformed header ({e.msg})") from None
    if header.get("format") != PL_FORMAT or header.get("version") != PL_VERSION:
        raise ParseError(f"line 1: unsupported format/version {header.get('format')!r} v{header.get('version')!r}")
    k, d = header["k"], header["d"]
    examples = []
    for ln, text in enumerate(lines[1:], start=2):
        if not text.strip():
            continue
        try:
            rec = json.loads(text)
            x = np.array(rec["x"], dtype=float)
            mask, y = int(rec["s"]), rec["y"]
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise ParseError(f"line {ln}: malformed record ({e})") from None
        if x.size != d:
            raise ParseError(f"line {ln}: feature vector has {x.size} entries, header says {d}")
        try:
            s = LabelSet(mask, k)
            examples.append(PLExample(x, s, None if y is None else int(y)))
        except DomainError as e:
            raise ParseError(f"line {ln}: {e}") from None
    if len(examples) != header["n"]:
        raise ParseError(f"line {len(lines)}: header declares {header['n']} records, found {len(examples)}")
    return PLDatasetFile(header, examples)

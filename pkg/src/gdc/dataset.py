"""Feature datasets: binary/CSV readers and writers plus split manifests.

Binary layout (little-endian), the canonical interchange format:

    magic    4 bytes  b"GDCF"
    version  u32      1
    dim      u32      feature dimension d
    count    u64      number of points
    records  count x [class_id u32][d x f32]

The split manifest is a separate UTF-8 JSON file:
``{"base": [ids], "validation": [ids], "novel": [ids], "names": {id: str}}``
(``names`` optional).  CSV is a convenience importer with header
``class_id,f0,...,f{d-1}``.
"""
from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

MAGIC = b"GDCF"
VERSION = 1
_HEADER = struct.Struct("<4sIIQ")

SPLIT_NAMES = ("base", "validation", "novel")


class DatasetError(ValueError):
    """Malformed feature file, manifest, or violated dataset invariant."""


@dataclass(frozen=True)
class SplitManifest:
    base: frozenset[int]
    validation: frozenset[int]
    novel: frozenset[int]
    names: Mapping[int, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        parts = (self.base, self.validation, self.novel)
        for name, ids in zip(SPLIT_NAMES, parts):
            if not ids:
                raise DatasetError(f"split '{name}' contains no classes")
            for cid in ids:
                if cid < 0:
                    raise DatasetError(f"split '{name}' has negative class_id {cid}")
        if (self.base & self.validation) or (self.base & self.novel) or (self.validation & self.novel):
            raise DatasetError("split partitions are not pairwise disjoint")

    def classes(self, split_name: str) -> frozenset[int]:
        if split_name not in SPLIT_NAMES:
            raise DatasetError(f"unknown split '{split_name}', expected one of {SPLIT_NAMES}")
        return getattr(self, split_name)

    def all_classes(self) -> frozenset[int]:
        return self.base | self.validation | self.novel


@dataclass(frozen=True, eq=False)
class FeatureDataset:
    """Immutable labeled feature matrix with its base/validation/novel split."""

    dim: int
    class_ids: np.ndarray  # (n,) int64, file order
    features: np.ndarray   # (n, dim) float32 as stored, float64 once transformed
    split: SplitManifest

    def __post_init__(self) -> None:
        if self.dim <= 0:
            raise DatasetError(f"dimension must be positive, got {self.dim}")
        if self.class_ids.shape[0] == 0:
            raise DatasetError("dataset contains no points")
        if self.features.shape != (self.class_ids.shape[0], self.dim):
            raise DatasetError(
                f"feature matrix shape {self.features.shape} does not match "
                f"{self.class_ids.shape[0]} points of dimension {self.dim}"
            )
        present = frozenset(int(c) for c in np.unique(self.class_ids))
        declared = self.split.all_classes()
        missing = present - declared
        if missing:
            raise DatasetError(f"classes present in data but absent from manifest: {sorted(missing)}")
        extra = declared - present
        if extra:
            raise DatasetError(f"classes declared in manifest but absent from data: {sorted(extra)}")

    @property
    def num_points(self) -> int:
        return int(self.class_ids.shape[0])

    def points(self) -> Iterator[tuple[int, np.ndarray]]:
        for cid, row in zip(self.class_ids, self.features):
            yield int(cid), row

    def with_features(self, features: np.ndarray) -> "FeatureDataset":
        return FeatureDataset(self.dim, self.class_ids, features, self.split)


@dataclass(frozen=True, eq=False)
class Partition:
    """View of one split: points in file order, classes in ascending id order."""

    name: str
    classes: tuple[int, ...]
    class_ids: np.ndarray
    features: np.ndarray

    @property
    def num_points(self) -> int:
        return int(self.class_ids.shape[0])

    def points_of(self, class_id: int) -> np.ndarray:
        return self.features[self.class_ids == class_id]


def partition(dataset: FeatureDataset, split_name: str) -> Partition:
    """Select the points whose class belongs to the named split."""
    wanted = dataset.split.classes(split_name)
    mask = np.isin(dataset.class_ids, sorted(wanted))
    return Partition(
        name=split_name,
        classes=tuple(sorted(wanted)),
        class_ids=dataset.class_ids[mask],
        features=dataset.features[mask],
    )


def load_manifest(path: str | Path) -> SplitManifest:
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"manifest file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetError(f"manifest {path} is not valid JSON: {exc}") from exc
    for key in SPLIT_NAMES:
        if key not in raw:
            raise DatasetError(f"manifest {path} missing key '{key}'")
    names = {int(k): str(v) for k, v in raw.get("names", {}).items()}
    return SplitManifest(
        base=frozenset(int(c) for c in raw["base"]),
        validation=frozenset(int(c) for c in raw["validation"]),
        novel=frozenset(int(c) for c in raw["novel"]),
        names=names,
    )


def write_manifest(split: SplitManifest, path: str | Path) -> None:
    doc: dict = {
        "base": sorted(split.base),
        "validation": sorted(split.validation),
        "novel": sorted(split.novel),
    }
    if split.names:
        doc["names"] = {str(k): v for k, v in sorted(split.names.items())}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _read_binary(path: Path) -> tuple[int, np.ndarray, np.ndarray]:
    data = path.read_bytes()
    if len(data) == 0:
        raise DatasetError(f"{path}: empty file")
    if len(data) < _HEADER.size:
        raise DatasetError(f"{path}: truncated header ({len(data)} bytes, need {_HEADER.size})")
    magic, version, dim, count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise DatasetError(f"{path}: bad magic {magic!r} at byte 0, expected {MAGIC!r}")
    if version != VERSION:
        raise DatasetError(f"{path}: unsupported format version {version}")
    if dim == 0:
        raise DatasetError(f"{path}: dimension 0 in header at byte 8")
    if count == 0:
        raise DatasetError(f"{path}: zero points in header at byte 12")
    record = np.dtype([("class_id", "<u4"), ("features", "<f4", (dim,))])
    expected = _HEADER.size + count * record.itemsize
    if len(data) != expected:
        raise DatasetError(
            f"{path}: file is {len(data)} bytes but header promises {expected} "
            f"({count} records of {record.itemsize} bytes after byte {_HEADER.size})"
        )
    records = np.frombuffer(data, dtype=record, count=count, offset=_HEADER.size)
    class_ids = records["class_id"].astype(np.int64)
    features = records["features"].astype(np.float32).reshape(count, dim)
    return int(dim), class_ids, features


def _read_csv(path: Path) -> tuple[int, np.ndarray, np.ndarray]:
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        if len(header) < 2 or header[0] != "class_id":
            raise DatasetError(f"{path}: bad CSV header {header[:3]}..., expected class_id,f0,...")
        dim = len(header) - 1
        if header[1:] != [f"f{i}" for i in range(dim)]:
            raise DatasetError(f"{path}: CSV header feature columns must be f0..f{dim - 1}")
        ids: list[int] = []
        rows: list[np.ndarray] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != dim + 1:
                raise DatasetError(f"{path}: row {lineno} has {len(row) - 1} values, expected {dim}")
            try:
                ids.append(int(row[0]))
                rows.append(np.array(row[1:], dtype=np.float32))
            except ValueError as exc:
                raise DatasetError(f"{path}: row {lineno}: {exc}") from exc
        if not rows:
            raise DatasetError(f"{path}: no data rows")
    return dim, np.array(ids, dtype=np.int64), np.vstack(rows)


def load_features(path: str | Path, manifest: str | Path | SplitManifest, format: str = "binary") -> FeatureDataset:
    """Load and validate a feature dataset against its split manifest."""
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"feature file not found: {path}")
    if format == "binary":
        dim, class_ids, features = _read_binary(path)
    elif format == "csv":
        dim, class_ids, features = _read_csv(path)
    else:
        raise DatasetError(f"unknown format '{format}', expected 'binary' or 'csv'")
    split = manifest if isinstance(manifest, SplitManifest) else load_manifest(manifest)
    return FeatureDataset(dim=dim, class_ids=class_ids, features=features, split=split)


def write_features(dataset: FeatureDataset, path: str | Path, format: str = "binary") -> None:
    """Serialize a dataset; features are downcast to f32 at this boundary."""
    path = Path(path)
    if dataset.num_points == 0:
        raise DatasetError("refusing to write a dataset with zero points")
    if int(dataset.class_ids.max()) > 0xFFFFFFFF:
        raise DatasetError("class_id exceeds the u32 range of the file format")
    if format == "binary":
        record = np.dtype([("class_id", "<u4"), ("features", "<f4", (dataset.dim,))])
        out = np.empty(dataset.num_points, dtype=record)
        out["class_id"] = dataset.class_ids.astype(np.uint32)
        out["features"] = dataset.features.astype(np.float32)
        with path.open("wb") as fh:
            fh.write(_HEADER.pack(MAGIC, VERSION, dataset.dim, dataset.num_points))
            fh.write(out.tobytes())
    elif format == "csv":
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["class_id"] + [f"f{i}" for i in range(dataset.dim)])
            feats = dataset.features.astype(np.float32)
            for cid, row in zip(dataset.class_ids, feats):
                # %.9g round-trips float32 exactly
                writer.writerow([int(cid)] + [f"{v:.9g}" for v in row])
    else:
        raise DatasetError(f"unknown format '{format}', expected 'binary' or 'csv'")

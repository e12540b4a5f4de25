"""Loading, encoding, scaling and splitting of the credit tables."""

from __future__ import annotations

import configparser
import csv
import math
import os
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError

NUMERIC = "numeric"
CATEGORICAL = "categorical"
LABEL = "label"
_KINDS = (NUMERIC, CATEGORICAL)

DEFAULT_MISSING = "?"
BUILTIN_DATASETS = ("german", "australian", "japanese")


@dataclass(frozen=True)
class Column:
    name: str
    kind: str

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DataError(f"column {self.name!r}: kind must be one of {_KINDS}, got {self.kind!r}")


@dataclass(frozen=True)
class Schema:
    """Column declarations for one delimiter-separated file.

    ``layout`` lists every field of a line in file order; the entry equal to
    ``label_column`` holds the class, every other entry is a feature column.
    """

    columns: tuple[Column, ...]
    label_column: str
    positive_label: str
    layout: tuple[str, ...]
    delimiter: str = ","  # "whitespace" splits on runs of blanks
    missing_token: str = DEFAULT_MISSING

    @classmethod
    def simple(cls, columns, positive_label="1", delimiter=",", missing_token=DEFAULT_MISSING,
               label_column="label"):
        """Schema whose file lists the feature columns in order, then the label."""
        cols = tuple(c if isinstance(c, Column) else Column(*c) for c in columns)
        layout = tuple(c.name for c in cols) + (label_column,)
        return cls(cols, label_column, positive_label, layout, delimiter, missing_token)


@dataclass(frozen=True)
class RawTable:
    """Cells as text; ``labels`` holds the raw class token of each row."""

    columns: tuple[Column, ...]
    rows: tuple[tuple[str, ...], ...]
    labels: tuple[str, ...]
    positive_label: str
    missing_token: str = DEFAULT_MISSING

    def __post_init__(self):
        width = len(self.columns)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise DataError(f"row {i} has {len(row)} values, expected {width}")
        if len(self.labels) != len(self.rows):
            raise DataError("labels and rows differ in length")

    def __len__(self):
        return len(self.rows)


@dataclass(frozen=True)
class Standardization:
    """Per-column shift and scale, fitted on training data.

    Constant training columns are recorded with ``mean = 0`` and
    ``scale = 1`` and flagged in ``constant`` so they pass through untouched.
    """

    mean: np.ndarray
    scale: np.ndarray
    constant: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.scale

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
            "constant": self.constant.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Standardization":
        return cls(
            np.asarray(doc["mean"], dtype=float),
            np.asarray(doc["scale"], dtype=float),
            np.asarray(doc["constant"], dtype=bool),
        )


@dataclass(frozen=True)
class EncodedDataset:
    """Numeric design matrix with binary labels (1 = good credit)."""

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]
    standardization: Standardization | None = None
    # categorical column name -> ordered level strings (integer encoding only)
    levels: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.array(self.features, dtype=float)
        y = np.array(self.labels, dtype=np.int64).ravel()
        if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
            raise DataError(f"features must be a non-empty 2-D matrix, got shape {X.shape}")
        if y.shape[0] != X.shape[0]:
            raise DataError(f"{y.shape[0]} labels for {X.shape[0]} rows")
        if not np.all(np.isfinite(X)):
            raise DataError("features contain non-finite values")
        if not np.all((y == 0) | (y == 1)):
            raise DataError("labels must be 0 or 1")
        if len(self.feature_names) != X.shape[1]:
            raise DataError(f"{len(self.feature_names)} feature names for {X.shape[1]} columns")
        if self.standardization is not None:
            s = self.standardization
            if s.mean.shape != (X.shape[1],) or s.scale.shape != (X.shape[1],):
                raise DataError("standardization does not match the feature count")
            if not np.all(s.scale > 0):
                raise DataError("standardization scales must be positive")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> tuple[int, int]:
        """(number of label-0 rows, number of label-1 rows)."""
        ones = int(self.labels.sum())
        return self.n_samples - ones, ones

    def subset(self, index) -> "EncodedDataset":
        return replace(self, features=self.features[index], labels=self.labels[index])


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 2.0 / 3.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise DataError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")
        if not 0 <= int(self.seed) < 2**64:
            raise DataError("seed must be a 64-bit unsigned integer")


# --------------------------------------------------------------------------
# reading
# --------------------------------------------------------------------------


def _split_line(line: str, delimiter: str) -> list[str]:
    if delimiter == "whitespace":
        return line.split()
    return [cell.strip() for cell in next(csv.reader([line], delimiter=delimiter))]


def load_csv(path, schema: Schema, missing_token: str | None = None) -> RawTable:
    """Read a delimiter-separated file according to ``schema``.

    Rows carrying the missing token are kept; see :func:`drop_missing`.
    """
    token = schema.missing_token if missing_token is None else missing_token
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc

    feature_pos = []
    label_pos = None
    names = {c.name: c for c in schema.columns}
    for pos, name in enumerate(schema.layout):
        if name == schema.label_column:
            label_pos = pos
        elif name in names:
            feature_pos.append(pos)
        else:
            raise DataError(f"layout entry {name!r} is not a declared column")
    if label_pos is None:
        raise DataError(f"label column {schema.label_column!r} missing from layout")
    numeric_pos = {pos for pos in feature_pos if names[schema.layout[pos]].kind == NUMERIC}

    rows, labels = [], []
    width = len(schema.layout)
    for line in text.splitlines():
        if not line.strip():
            continue
        cells = _split_line(line, schema.delimiter)
        i = len(rows)
        if len(cells) != width:
            raise DataError(f"row {i}: expected {width} fields, found {len(cells)}")
        for pos in numeric_pos:
            cell = cells[pos]
            if cell == token:
                continue
            try:
                float(cell)
            except ValueError:
                raise DataError(
                    f"row {i}: column {schema.layout[pos]!r} is numeric but holds {cell!r}"
                ) from None
        rows.append(tuple(cells[pos] for pos in feature_pos))
        labels.append(cells[label_pos])
    if not rows:
        raise DataError(f"{path}: no rows")
    columns = tuple(names[schema.layout[pos]] for pos in feature_pos)
    return RawTable(columns, tuple(rows), tuple(labels), schema.positive_label, token)


def drop_missing(table: RawTable) -> RawTable:
    """Remove every row that holds the missing token in any cell."""
    token = table.missing_token
    keep = [
        i for i, (row, lab) in enumerate(zip(table.rows, table.labels))
        if lab != token and token not in row
    ]
    if not keep:
        raise DataError("every row contains a missing value")
    if len(keep) == len(table.rows):
        return table
    return replace(
        table,
        rows=tuple(table.rows[i] for i in keep),
        labels=tuple(table.labels[i] for i in keep),
    )


# --------------------------------------------------------------------------
# encoding
# --------------------------------------------------------------------------


def _labels(table: RawTable) -> np.ndarray:
    return np.array([1 if lab == table.positive_label else 0 for lab in table.labels])


def _check_encodable(table: RawTable):
    if len(table) == 0:
        raise DataError("cannot encode an empty table")
    for i, row in enumerate(table.rows):
        if table.missing_token in row:
            raise DataError(f"row {i} still contains the missing token {table.missing_token!r}")


def encode_dummy(table: RawTable) -> EncodedDataset:
    """One 0/1 indicator column per level of every categorical column.

    Levels are ordered lexicographically; numeric columns pass through.
    Indicator columns are named ``"<column>=<level>"``.
    """
    _check_encodable(table)
    blocks, names = [], []
    for j, col in enumerate(table.columns):
        cells = [row[j] for row in table.rows]
        if col.kind == NUMERIC:
            blocks.append(np.array(cells, dtype=float)[:, None])
            names.append(col.name)
            continue
        levels = sorted(set(cells))
        lookup = {lev: k for k, lev in enumerate(levels)}
        onehot = np.zeros((len(cells), len(levels)))
        onehot[np.arange(len(cells)), [lookup[c] for c in cells]] = 1.0
        blocks.append(onehot)
        names.extend(f"{col.name}={lev}" for lev in levels)
    return EncodedDataset(np.hstack(blocks), _labels(table), tuple(names))


def encode_integer(table: RawTable) -> EncodedDataset:
    """Replace each categorical level by its rank among the sorted levels."""
    _check_encodable(table)
    X = np.empty((len(table), len(table.columns)))
    levels_by_col = {}
    for j, col in enumerate(table.columns):
        cells = [row[j] for row in table.rows]
        if col.kind == NUMERIC:
            X[:, j] = np.array(cells, dtype=float)
        else:
            levels = sorted(set(cells))
            lookup = {lev: k for k, lev in enumerate(levels)}
            X[:, j] = [lookup[c] for c in cells]
            levels_by_col[col.name] = tuple(levels)
    names = tuple(c.name for c in table.columns)
    return EncodedDataset(X, _labels(table), names, levels=levels_by_col)


def decode_integer(data: EncodedDataset, columns: Sequence[Column], positive_label="1",
                   negative_label="0") -> RawTable:
    """Inverse of :func:`encode_integer` for unstandardized data."""
    rows = []
    for x in data.features:
        row = []
        for j, col in enumerate(columns):
            if col.kind == NUMERIC:
                row.append(repr(float(x[j])))
            else:
                row.append(data.levels[col.name][int(x[j])])
        rows.append(tuple(row))
    labels = tuple(positive_label if y == 1 else negative_label for y in data.labels)
    return RawTable(tuple(columns), tuple(rows), labels, positive_label)


# --------------------------------------------------------------------------
# scaling and splitting
# --------------------------------------------------------------------------


def standardize_fit_apply(train: EncodedDataset, test: EncodedDataset):
    """Scale both sets with the train column means and population stddevs."""
    if train.n_features != test.n_features or train.feature_names != test.feature_names:
        raise DataError(
            f"train has {train.n_features} features, test has {test.n_features}", stage="standardize"
        )
    mean = train.features.mean(axis=0)
    std = train.features.std(axis=0)
    constant = std == 0.0
    mean = np.where(constant, 0.0, mean)
    scale = np.where(constant, 1.0, std)
    st = Standardization(mean, scale, constant)
    return (
        replace(train, features=st.apply(train.features), standardization=st),
        replace(test, features=st.apply(test.features), standardization=st),
    )


def train_test_split(data: EncodedDataset, spec: SplitSpec):
    """Seeded random (unstratified) split; train gets floor(fraction * N) rows."""
    n = data.n_samples
    n_train = math.floor(spec.train_fraction * n)
    if n_train == 0 or n_train == n:
        raise DataError(f"split of {n} rows at {spec.train_fraction} leaves a partition empty")
    perm = np.random.default_rng(int(spec.seed)).permutation(n)
    return data.subset(perm[:n_train]), data.subset(perm[n_train:])


def export_csv(data: EncodedDataset, path) -> None:
    """Write features and label with a header row."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(data.feature_names) + ["label"])
        for x, y in zip(data.features, data.labels):
            w.writerow([repr(float(v)) for v in x] + [int(y)])


def read_encoded_csv(path) -> EncodedDataset:
    """Read a file written by :func:`export_csv`."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        body = np.array([[float(v) for v in row] for row in reader])
    return EncodedDataset(body[:, :-1], body[:, -1].astype(np.int64), tuple(header[:-1]))


# --------------------------------------------------------------------------
# dataset configs
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DatasetConfig:
    name: str
    file: str
    schema: Schema
    encoding: str = "dummy"
    smote: bool = False

    @classmethod
    def read(cls, path) -> "DatasetConfig":
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
        return cls._from_parser(parser, str(path))

    @classmethod
    def _from_parser(cls, parser, origin):
        try:
            meta = parser["dataset"]
            layout, columns = [], []
            label = meta["label_column"]
            for name, kind in parser["columns"].items():
                layout.append(name)
                if name != label:
                    columns.append(Column(name, kind.strip()))
            schema = Schema(
                columns=tuple(columns),
                label_column=label,
                positive_label=meta["positive_label"],
                layout=tuple(layout),
                delimiter=meta.get("delimiter", ","),
                missing_token=meta.get("missing_token", DEFAULT_MISSING),
            )
            return cls(
                name=meta["name"],
                file=meta["file"],
                schema=schema,
                encoding=meta.get("encoding", "dummy"),
                smote=meta.getboolean("smote", fallback=False),
            )
        except KeyError as exc:
            raise DataError(f"{origin}: missing config entry {exc}") from None


def builtin_config(name: str) -> DatasetConfig:
    if name not in BUILTIN_DATASETS:
        raise DataError(f"unknown dataset {name!r}; expected one of {BUILTIN_DATASETS}")
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser.read_string(resources.files("csgm.configs").joinpath(f"{name}.ini").read_text("utf-8"))
    return DatasetConfig._from_parser(parser, f"{name}.ini")


def default_data_dir() -> Path:
    """``$CSGM_DATA_DIR`` if set, else ``./data``."""
    return Path(os.environ.get("CSGM_DATA_DIR", "data"))


def locate_file(config: DatasetConfig, data_dir=None) -> Path:
    root = Path(data_dir) if data_dir is not None else default_data_dir()
    for candidate in (root / config.name / config.file, root / config.file):
        if candidate.is_file():
            return candidate
    raise DataError(
        f"{config.file} not found under {root} (looked in {root / config.name} and {root}); "
        f"the UCI files are not bundled, place them there or set CSGM_DATA_DIR",
        stage="load",
    )


def load_encoded(config: DatasetConfig, data_dir=None, encoding: str | None = None) -> EncodedDataset:
    """Read, clean and encode a dataset described by ``config``."""
    table = drop_missing(load_csv(locate_file(config, data_dir), config.schema))
    mode = encoding or config.encoding
    if mode == "dummy":
        return encode_dummy(table)
    if mode == "integer":
        return encode_integer(table)
    raise DataError(f"unknown encoding {mode!r}")

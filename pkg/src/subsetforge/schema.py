"""Variable schema, CSV ingestion, validation, splitting and standardization."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

TARGET_NAME = "Operating Status"
MIN_MONTHS_OF_OPERATION = 9


class Kind(str, Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"
    ORDINAL = "ordinal"


class DataError(Exception):
    """Base class for problems with input data (CLI exit status 2)."""


class SchemaError(DataError):
    pass


class ParseError(DataError):
    pass


class RangeError(DataError):
    pass


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: Kind
    low: float = -math.inf
    high: float = math.inf
    long_name: Optional[str] = None

    def in_range(self, values: np.ndarray) -> np.ndarray:
        if self.kind is Kind.BINARY:
            return (values == 0) | (values == 1)
        ok = np.isfinite(values) & (values >= self.low) & (values <= self.high)
        if self.kind is Kind.ORDINAL:
            ok &= values == np.round(values)
        return ok


@dataclass(frozen=True)
class FeatureSchema:
    columns: tuple[ColumnSpec, ...]
    target: ColumnSpec

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column names in schema")
        if self.target.name in names:
            raise SchemaError("target name collides with a predictor")

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def __len__(self) -> int:
        return len(self.columns)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def column(self, name: str) -> ColumnSpec:
        return self.columns[self.index(name)]

    def aliases(self) -> dict[str, str]:
        """Map every accepted header spelling to its machine name."""
        out = {}
        for c in (*self.columns, self.target):
            out[c.name] = c.name
            if c.long_name:
                out[c.long_name] = c.name
        return out

    def subset(self, names: Sequence[str]) -> "FeatureSchema":
        keep = set(names)
        return FeatureSchema(tuple(c for c in self.columns if c.name in keep), self.target)

    def to_dict(self) -> dict:
        def col(c):
            return {
                "name": c.name,
                "long_name": c.long_name,
                "kind": c.kind.value,
                "low": None if math.isinf(c.low) else c.low,
                "high": None if math.isinf(c.high) else c.high,
            }

        return {"columns": [col(c) for c in self.columns], "target": col(self.target)}


def _bin(name, long_name=None):
    return ColumnSpec(name, Kind.BINARY, 0, 1, long_name)


# Table order. Machine names are the short labels; long names are accepted as
# CSV header aliases.
_PREDICTORS = (
    ColumnSpec("NoMO", Kind.CONTINUOUS, MIN_MONTHS_OF_OPERATION, math.inf,
               "Number of Months of Operation (NoMO)"),
    ColumnSpec("Geographical Location", Kind.ORDINAL, 1, 5),
    ColumnSpec("Registered Capital", Kind.CONTINUOUS),
    _bin("NE", "Non-state-run Enterprise (NE)"),
    _bin("Auto Bidding"),
    _bin("Car Loan"),
    _bin("Personal Credit Loan"),
    _bin("Business Credit Loan"),
    _bin("Other Loans"),
    _bin("Multiple Loans"),
    _bin("Borrow Fee"),
    _bin("Top-up Fee"),
    _bin("Withdrawal Fee"),
    ColumnSpec("AIR", Kind.CONTINUOUS, long_name="Average Interest Rate (AIR)"),
    _bin("Third-party Guarantee"),
    _bin("Bank Guarantee"),
    _bin("Risk Reserve"),
    _bin("CAPM", "Capital Advance Processing Mechanism (CAPM)"),
    _bin("Financing Guarantee"),
    _bin("BDM", "Bank Deposit Management (BDM)"),
    _bin("Other Guarantee"),
    _bin("No Guarantee"),
    _bin("NIFA Membership"),
    _bin("AVCA", "Acceptance of Venture Capital Assessment (AVCA)"),
    _bin("TCA", "Third-party Credit Assessment (TCA)"),
    _bin("Listed Company"),
    _bin("Company License"),
    _bin("Operation Permit"),
    _bin("No Supervisory Mechanism"),
)

_CANONICAL = FeatureSchema(_PREDICTORS, _bin(TARGET_NAME))


def canonical_schema() -> FeatureSchema:
    """The fixed 29-predictor schema with ``Operating Status`` as target."""
    return _CANONICAL


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    target: np.ndarray
    schema: FeatureSchema
    provenance: str = "loaded"

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64)
        y = np.array(self.target, dtype=np.int64).ravel()
        if X.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        if X.shape[1] != len(self.schema):
            raise SchemaError(
                f"feature matrix has {X.shape[1]} columns, schema has {len(self.schema)}"
            )
        if X.shape[0] != y.size:
            raise ValueError("features and target row counts differ")
        if np.isnan(X).any():
            raise DataError("missing values are not supported")
        if not np.all((y == 0) | (y == 1)):
            raise RangeError(f"{self.schema.target.name} must be 0/1")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "target", y)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def feature_names(self) -> list[str]:
        return self.schema.names

    def column(self, name: str) -> np.ndarray:
        return self.features[:, self.schema.index(name)]

    def take(self, rows) -> "Dataset":
        return replace(self, features=self.features[rows], target=self.target[rows])

    def select(self, names: Sequence[str]) -> "Dataset":
        """Restrict to ``names``, keeping schema column order."""
        sub = self.schema.subset(names)
        idx = [self.schema.index(n) for n in sub.names]
        return replace(self, features=self.features[:, idx], schema=sub)

    def equals(self, other: "Dataset") -> bool:
        return (
            self.schema == other.schema
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.target, other.target)
        )


@dataclass(frozen=True)
class Violation:
    row: int
    column: str
    value: float
    rule: str
    message: str

    def to_json(self) -> str:
        return json.dumps(
            {"row": self.row, "column": self.column, "value": self.value,
             "rule": self.rule, "message": self.message},
            sort_keys=True,
        )


def validate(dataset: Dataset) -> list[Violation]:
    """Report domain violations; the dataset is acceptable iff the list is empty.

    Rows are 0-based. ``NoMO`` below nine months is reported under the
    ``exclusion`` rule rather than as a range violation.
    """
    out = []
    X = dataset.features
    for j, col in enumerate(dataset.schema.columns):
        values = X[:, j]
        if col.name == "NoMO":
            bad = np.flatnonzero(values < MIN_MONTHS_OF_OPERATION)
            for i in bad:
                out.append(Violation(int(i), col.name, float(values[i]), "exclusion",
                                     f"NoMO={values[i]:g} is below the {MIN_MONTHS_OF_OPERATION}-month minimum"))
            continue
        bad = np.flatnonzero(~col.in_range(values))
        rule = {Kind.BINARY: "binary", Kind.ORDINAL: "ordinal", Kind.CONTINUOUS: "finite"}[col.kind]
        for i in bad:
            out.append(Violation(int(i), col.name, float(values[i]), rule,
                                 f"{col.name}={values[i]:g} outside {col.kind.value} range"))
    out.sort(key=lambda v: (v.row, dataset.schema.index(v.column)))
    return out


def drop_excluded(dataset: Dataset, violations: Sequence[Violation]) -> Dataset:
    rows = sorted({v.row for v in violations if v.rule == "exclusion"})
    if not rows:
        return dataset
    keep = np.setdiff1d(np.arange(dataset.n_rows), rows)
    return dataset.take(keep)


def load_csv(path, schema: Optional[FeatureSchema] = None, enforce_exclusion: bool = False) -> Dataset:
    """Read a CSV into a :class:`Dataset` in schema column order.

    Extra columns are ignored with a warning. Domain violations other than the
    nine-month rule raise :class:`RangeError`; rows failing that rule are only
    dropped when ``enforce_exclusion`` is set and are otherwise logged.
    """
    schema = schema or canonical_schema()
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, header row expected") from None
        rows = list(reader)

    aliases = schema.aliases()
    positions = {}
    for pos, raw in enumerate(header):
        name = aliases.get(raw.strip())
        if name is None:
            logger.warning("ignoring unknown column %r", raw)
            continue
        if name in positions:
            raise SchemaError(f"column {name!r} appears twice")
        positions[name] = pos

    wanted = schema.names + [schema.target.name]
    for name in wanted:
        if name not in positions:
            raise SchemaError(f"missing required column {name!r}")

    data = np.empty((len(rows), len(wanted)), dtype=np.float64)
    for i, row in enumerate(rows):
        # data rows are numbered from 1, header excluded
        if len(row) != len(header):
            raise ParseError(f"row {i + 1}: expected {len(header)} cells, got {len(row)}")
        for j, name in enumerate(wanted):
            cell = row[positions[name]].strip()
            if cell == "":
                raise ParseError(f"row {i + 1}, column {name!r}: missing value")
            try:
                value = float(cell)
            except ValueError:
                raise ParseError(f"row {i + 1}, column {name!r}: cannot parse {cell!r}") from None
            if not math.isfinite(value):
                raise ParseError(f"row {i + 1}, column {name!r}: non-finite value {cell!r}")
            data[i, j] = value

    y = data[:, -1]
    bad_y = np.flatnonzero((y != 0) & (y != 1))
    if bad_y.size:
        i = bad_y[0]
        raise RangeError(f"row {i + 1}, column {schema.target.name!r}: {y[i]:g} is not 0/1")

    ds = Dataset(data[:, :-1], y.astype(np.int64), schema, provenance="loaded")
    violations = validate(ds)
    hard = [v for v in violations if v.rule != "exclusion"]
    if hard:
        v = hard[0]
        raise RangeError(f"row {v.row + 1}, column {v.column!r}: {v.message}")
    excluded = [v for v in violations if v.rule == "exclusion"]
    if excluded:
        if enforce_exclusion:
            logger.info("dropping %d rows under the nine-month rule", len(excluded))
            ds = drop_excluded(ds, excluded)
        else:
            logger.warning("%d rows fall under the nine-month exclusion rule", len(excluded))
    return ds


def _format_cell(value: float, kind: Kind) -> str:
    if kind is not Kind.CONTINUOUS and value == int(value):
        return str(int(value))
    return repr(float(value))


def write_csv(dataset: Dataset, path) -> None:
    """Write ``dataset`` so that :func:`load_csv` reproduces it exactly."""
    cols = dataset.schema.columns
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([c.name for c in cols] + [dataset.schema.target.name])
        for x, t in zip(dataset.features, dataset.target):
            w.writerow([_format_cell(v, c.kind) for v, c in zip(x, cols)] + [str(int(t))])


@dataclass(frozen=True)
class SplitPair:
    train: Dataset
    test: Dataset
    test_fraction: float
    seed: int
    train_rows: np.ndarray = field(repr=False, default=None)
    test_rows: np.ndarray = field(repr=False, default=None)


def stratified_split(dataset: Dataset, test_fraction: float = 0.2, seed: int = 42) -> SplitPair:
    """Hold out ``round(n_c * test_fraction)`` rows of each class ``c``."""
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    y = dataset.target
    if y.min() == y.max():
        raise DataError("stratified split needs both classes present")
    rng = np.random.default_rng(seed)
    test_rows = []
    for c in (0, 1):
        idx = np.flatnonzero(y == c)
        idx = idx[rng.permutation(idx.size)]
        n_test = int(math.floor(idx.size * test_fraction + 0.5))
        test_rows.append(idx[:n_test])
    test_rows = np.sort(np.concatenate(test_rows))
    train_rows = np.setdiff1d(np.arange(dataset.n_rows), test_rows)
    if test_rows.size == 0 or train_rows.size == 0:
        raise DataError("split leaves an empty side; use more rows or another test_fraction")
    return SplitPair(dataset.take(train_rows), dataset.take(test_rows), test_fraction, seed,
                     train_rows, test_rows)


@dataclass(frozen=True)
class Standardizer:
    """Per-column affine transform fit on training data."""

    names: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray
    scaled: np.ndarray  # bool per column
    constant: tuple[str, ...] = ()

    def transform(self, dataset: Dataset) -> Dataset:
        X = dataset.features.copy()
        s = self.scaled
        X[:, s] = (X[:, s] - self.mean[s]) / self.std[s]
        return replace(dataset, features=X)

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "scaled": self.scaled.tolist(),
            "constant": list(self.constant),
        }


def standardize(train: Dataset, test: Dataset) -> tuple[Dataset, Dataset, Standardizer]:
    """Z-score continuous and ordinal columns with train statistics.

    Binary columns pass through. Zero-variance scalable columns are left
    unchanged and listed in ``Standardizer.constant``.
    """
    X = train.features
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    scalable = np.array([c.kind is not Kind.BINARY for c in train.schema.columns])
    constant = scalable & (std == 0)
    scaled = scalable & ~constant
    mean = np.where(scaled, mean, 0.0)
    std = np.where(scaled, std, 1.0)
    const_names = tuple(n for n, c in zip(train.schema.names, constant) if c)
    if const_names:
        logger.warning("constant columns left unscaled: %s", ", ".join(const_names))
    t = Standardizer(tuple(train.schema.names), mean, std, scaled, const_names)
    return t.transform(train), t.transform(test), t

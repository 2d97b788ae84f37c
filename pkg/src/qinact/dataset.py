"""Survival dataset model, CSV ingestion, and pre-fit validation.

A :class:`Dataset` holds one record per subject: the observed time (event or
censoring, whichever came first), the event indicator, and a covariate
vector. Storage is immutable numpy arrays so datasets can be shared freely
across concurrent readers.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyDataset, MissingColumn, ParseError


@dataclass(frozen=True)
class SurvivalRecord:
    """One subject: observed time, event indicator, covariates.

    ``status`` is 1 when the event was observed and 0 when the subject was
    censored. ``covariates`` excludes the intercept; a leading 1 is appended
    when design matrices are built.
    """

    time: float
    status: int
    covariates: tuple[float, ...]

    def __post_init__(self):
        if not (math.isfinite(self.time) and self.time >= 0):
            raise ValueError(f"time must be finite and nonnegative, got {self.time}")
        if self.status not in (0, 1):
            raise ValueError(f"status must be 0 or 1, got {self.status}")
        if not all(math.isfinite(c) for c in self.covariates):
            raise ValueError("covariates contain a non-finite value")


class Dataset:
    """Immutable collection of :class:`SurvivalRecord` with named covariates.

    Parameters
    ----------
    records : sequence of SurvivalRecord
        Subjects in file order. All must share the same covariate dimension.
    covariate_names : sequence of str
        One unique, nonempty name per covariate column.
    """

    def __init__(self, records: Sequence[SurvivalRecord], covariate_names: Sequence[str]):
        records = tuple(records)
        if not records:
            raise EmptyDataset()
        names = tuple(str(c) for c in covariate_names)
        p = len(names)
        if len(set(names)) != p or any(not c for c in names):
            raise ValueError("covariate names must be unique and nonempty")
        for i, r in enumerate(records):
            if len(r.covariates) != p:
                raise DimensionMismatch(
                    f"record {i} has {len(r.covariates)} covariates, expected {p}"
                )
        times = np.array([r.time for r in records], dtype=np.float64)
        status = np.array([r.status for r in records], dtype=np.int8)
        covariates = np.array(
            [r.covariates for r in records], dtype=np.float64
        ).reshape(len(records), p)
        self._init_arrays(times, status, covariates, names)

    def _init_arrays(self, times, status, covariates, names):
        for arr in (times, status, covariates):
            arr.setflags(write=False)
        self._times = times
        self._status = status
        self._covariates = covariates
        self._names = names

    @classmethod
    def from_arrays(cls, times, status, covariates, covariate_names) -> "Dataset":
        """Build a dataset from numpy arrays without materializing records.

        ``covariates`` must be an ``(n, p)`` array (``p`` may be zero).
        """
        times = np.ascontiguousarray(times, dtype=np.float64)
        status = np.asarray(status)
        covariates = np.ascontiguousarray(covariates, dtype=np.float64)
        names = tuple(str(c) for c in covariate_names)
        if times.ndim != 1:
            raise DimensionMismatch("times must be one-dimensional")
        n = times.shape[0]
        if n == 0:
            raise EmptyDataset()
        if status.shape != (n,):
            raise DimensionMismatch("status must match times in length")
        if covariates.ndim != 2 or covariates.shape[0] != n:
            raise DimensionMismatch("covariates must be an (n, p) array")
        if covariates.shape[1] != len(names):
            raise DimensionMismatch("covariate_names must match covariate columns")
        if len(set(names)) != len(names) or any(not c for c in names):
            raise ValueError("covariate names must be unique and nonempty")
        if not np.all(np.isfinite(times)) or np.any(times < 0):
            raise ValueError("times must be finite and nonnegative")
        if not np.all(np.isin(status, (0, 1))):
            raise ValueError("status values must be 0 or 1")
        if covariates.size and not np.all(np.isfinite(covariates)):
            raise ValueError("covariates contain a non-finite value")
        obj = cls.__new__(cls)
        obj._init_arrays(times.copy(), status.astype(np.int8), covariates.copy(), names)
        return obj

    @property
    def n(self) -> int:
        return self._times.shape[0]

    @property
    def p(self) -> int:
        return len(self._names)

    @property
    def times(self) -> np.ndarray:
        return self._times

    @property
    def status(self) -> np.ndarray:
        return self._status

    @property
    def covariates(self) -> np.ndarray:
        return self._covariates

    @property
    def covariate_names(self) -> tuple[str, ...]:
        return self._names

    @cached_property
    def records(self) -> tuple[SurvivalRecord, ...]:
        return tuple(
            SurvivalRecord(float(t), int(s), tuple(float(v) for v in z))
            for t, s, z in zip(self._times, self._status, self._covariates)
        )

    def truncate_censoring(self, bound: float) -> "Dataset":
        """Clamp censored times above ``bound`` down to ``bound``.

        Event records are untouched; only the censoring distribution loses
        tail mass. Returns a new dataset.
        """
        if not (bound > 0):
            raise ValueError("truncation bound must be positive")
        times = self._times.copy()
        clamp = (self._status == 0) & (times > bound)
        times[clamp] = bound
        return Dataset.from_arrays(times, self._status, self._covariates, self._names)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self._names == other._names
            and np.array_equal(self._times, other._times)
            and np.array_equal(self._status, other._status)
            and np.array_equal(self._covariates, other._covariates)
        )

    def __repr__(self):
        return f"<Dataset n={self.n} p={self.p} covariates={list(self._names)}>"


@dataclass(frozen=True)
class ModelConfig:
    """Settings for one quantile inactivity-time fit.

    Parameters
    ----------
    t0 : float
        Conditioning time point; only events strictly before ``t0`` contribute.
    quantile : float
        Quantile level of the inactivity-time distribution, in (0, 1).
    truncation_bound : float, optional
        Upper truncation applied to censored times before estimating the
        censoring distribution. Use when the censoring survival estimate
        hits zero at the tail.
    min_events : int
        Minimum number of events before ``t0`` required to fit.
    """

    t0: float
    quantile: float
    truncation_bound: float | None = None
    min_events: int = 10

    def __post_init__(self):
        if not (self.t0 > 0 and math.isfinite(self.t0)):
            raise ValueError(f"t0 must be positive and finite, got {self.t0}")
        if not (0.0 < self.quantile < 1.0):
            raise ValueError(f"quantile must be in (0, 1), got {self.quantile}")
        if self.truncation_bound is not None and not (self.truncation_bound > 0):
            raise ValueError("truncation_bound must be positive when set")
        if self.min_events < 1:
            raise ValueError("min_events must be a positive integer")


@dataclass(frozen=True)
class ValidationReport:
    """Finite-sample health checks for a planned fit. Report-only."""

    n: int
    events_before_t0: int
    censoring_proportion: float
    max_time: float
    tail_censored: bool
    insufficient_events: bool


def validate(data: Dataset, config: ModelConfig) -> ValidationReport:
    """Report effective sample size and tail diagnostics for ``(data, config)``.

    ``tail_censored`` is set when the largest observed time is a censoring,
    in which case the censoring survival estimate drops to zero beyond it
    and truncation may be needed. Never mutates ``data``; callers decide
    whether to abort.
    """
    events_before = int(np.sum((data.times < config.t0) & (data.status == 1)))
    max_time = float(data.times.max())
    tail_censored = bool(np.any((data.times == max_time) & (data.status == 0)))
    return ValidationReport(
        n=data.n,
        events_before_t0=events_before,
        censoring_proportion=float(np.mean(data.status == 0)),
        max_time=max_time,
        tail_censored=tail_censored,
        insufficient_events=events_before < config.min_events,
    )


def _as_text_lines(source):
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            raw = fh.read()
    elif isinstance(source, bytes):
        raw = source
    else:
        raw = source.read()
        if isinstance(raw, str):
            raw = raw.encode("utf-8")
    return io.StringIO(raw.decode("utf-8"))


def load_dataset(source, time_col: str, status_col: str,
                 covariate_cols: Sequence[str]) -> Dataset:
    """Load a dataset from CSV text (path, bytes, or binary file-like).

    The CSV must be UTF-8 with a header row, comma separators, and '.'
    decimals; missing values are a hard error. ``status`` cells must parse
    to 0 or 1. Row numbers in errors are 1-based over data rows.
    """
    covariate_cols = list(covariate_cols)
    reader = csv.reader(_as_text_lines(source))
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyDataset("CSV has no header row") from None
    header = [h.strip() for h in header]
    index = {}
    for name in [time_col, status_col, *covariate_cols]:
        try:
            index[name] = header.index(name)
        except ValueError:
            raise MissingColumn(name) from None

    def cell(row, row_num, name):
        i = index[name]
        if i >= len(row):
            raise DimensionMismatch(
                f"row {row_num} has {len(row)} cells, expected {len(header)}"
            )
        token = row[i].strip()
        try:
            value = float(token)
        except ValueError:
            raise ParseError(row_num, name, token) from None
        if not math.isfinite(value):
            raise ParseError(row_num, name, token)
        return value

    times, status, covs = [], [], []
    row_num = 0
    for row in reader:
        if not row:
            continue
        row_num += 1
        if len(row) != len(header):
            raise DimensionMismatch(
                f"row {row_num} has {len(row)} cells, expected {len(header)}"
            )
        times.append(cell(row, row_num, time_col))
        s = cell(row, row_num, status_col)
        if s not in (0.0, 1.0):
            raise ParseError(row_num, status_col, row[index[status_col]].strip())
        status.append(int(s))
        covs.append([cell(row, row_num, c) for c in covariate_cols])
    if row_num == 0:
        raise EmptyDataset("CSV has a header but no data rows")
    covariates = np.array(covs, dtype=np.float64).reshape(row_num, len(covariate_cols))
    return Dataset.from_arrays(np.array(times), np.array(status, dtype=np.int8),
                               covariates, covariate_cols)


def dump_csv(data: Dataset, time_col: str = "time", status_col: str = "status") -> str:
    """Serialize a dataset back to CSV text; floats use shortest round-trip form."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow([time_col, status_col, *data.covariate_names])
    for t, s, z in zip(data.times, data.status, data.covariates):
        writer.writerow([repr(float(t)), int(s), *[repr(float(v)) for v in z]])
    return out.getvalue()

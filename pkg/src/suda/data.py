"""Dataset containers, CSV ingestion, chronological splits, normalization.

A Dataset stores two-channel sensor readings column-wise (float64), with an
optional angle label per frame. Readings are dimensionless digitized counts,
nominally in [0, 1023]; angles are joint bending angles in degrees within
[0, 180].
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    DegenerateDataError,
    ParseError,
    SchemaError,
)

READING_MIN = 0.0
READING_MAX = 1023.0
ANGLE_MIN = 0.0
ANGLE_MAX = 180.0

_HEADER_UNLABELED = "frame,r1,r2"
_HEADER_LABELED = "frame,r1,r2,angle_deg"


@dataclass(frozen=True)
class SensorFrame:
    """One time step: frame index and the two channel readings."""

    t: int
    r: tuple[float, float]


@dataclass(frozen=True)
class LabeledFrame:
    """A sensor frame paired with its ground-truth joint angle in degrees."""

    t: int
    r: tuple[float, float]
    angle_deg: float


@dataclass(frozen=True)
class DatasetMeta:
    domain: str = "source"  # source | target | target-eval
    provenance: str = ""
    sample_rate_hz: float = 50.0


class Dataset:
    """Ordered collection of frames, either all labeled or all unlabeled.

    Immutable after construction: arrays are copied in and flagged
    read-only, so datasets are safe to share across threads.
    """

    def __init__(self, t, readings, angles=None, meta: DatasetMeta | None = None):
        t = np.asarray(t, dtype=np.int64).copy()
        readings = np.asarray(readings, dtype=np.float64).copy()
        if readings.ndim != 2 or readings.shape[1] != 2:
            raise DataError(f"readings must have shape (N, 2), got {readings.shape}")
        if t.shape != (readings.shape[0],):
            raise DataError("frame index array length does not match readings")
        if len(t) > 1 and not np.all(np.diff(t) > 0):
            bad = int(np.argmin(np.diff(t) > 0))
            raise DataError(f"frame indices must be strictly increasing (violated after row {bad})")
        if not np.all(np.isfinite(readings)):
            raise DataError("readings contain non-finite values")
        if angles is not None:
            angles = np.asarray(angles, dtype=np.float64).copy()
            if angles.shape != (readings.shape[0],):
                raise DataError("angle array length does not match readings")
            if len(angles) and (not np.all(np.isfinite(angles))
                                or angles.min() < ANGLE_MIN or angles.max() > ANGLE_MAX):
                raise DataError(f"angles must be finite and within [{ANGLE_MIN}, {ANGLE_MAX}] degrees")
            angles.setflags(write=False)
        t.setflags(write=False)
        readings.setflags(write=False)
        self.t = t
        self.readings = readings
        self.angles = angles
        self.meta = meta if meta is not None else DatasetMeta()

    def __len__(self) -> int:
        return self.readings.shape[0]

    @property
    def labeled(self) -> bool:
        return self.angles is not None

    def frame(self, i: int):
        """Materialize row i as a SensorFrame or LabeledFrame."""
        r = (float(self.readings[i, 0]), float(self.readings[i, 1]))
        if self.labeled:
            return LabeledFrame(int(self.t[i]), r, float(self.angles[i]))
        return SensorFrame(int(self.t[i]), r)

    def slice(self, start: int, stop: int, meta: DatasetMeta | None = None) -> "Dataset":
        return Dataset(
            self.t[start:stop],
            self.readings[start:stop],
            None if self.angles is None else self.angles[start:stop],
            meta if meta is not None else self.meta,
        )

    def require_nonempty(self, op: str) -> None:
        if len(self) == 0:
            raise DataError(f"{op} requires a non-empty dataset")

    def require_labeled(self, op: str) -> None:
        if not self.labeled:
            raise DataError(f"{op} requires a labeled dataset")


def _fmt_value(v) -> str:
    # integers print bare, everything else uses shortest round-trip repr
    v = float(v)
    if v == int(v) and abs(v) < 2**53:
        return str(int(v))
    return repr(v)


def load_csv(path, labeled: bool, domain: str = "source") -> Dataset:
    """Read a dataset CSV (`frame,r1,r2[,angle_deg]`).

    Readings are clamped to [0, 1023] with a warning; frame indices must be
    strictly increasing. With labeled=False an angle column, if present, is
    discarded.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise SchemaError(f"{path}: empty file")
    header = lines[0].strip()
    if header == _HEADER_LABELED:
        has_angle = True
    elif header == _HEADER_UNLABELED:
        has_angle = False
    else:
        raise SchemaError(
            f"{path}: bad header {header!r}; expected {_HEADER_UNLABELED!r} or {_HEADER_LABELED!r}"
        )
    if labeled and not has_angle:
        raise SchemaError(f"{path}: labeled load requested but no angle_deg column present")

    ncols = 4 if has_angle else 3
    rows = [ln for ln in lines[1:] if ln.strip()]
    if not rows:
        raise DataError(f"{path}: no data rows")

    t = np.empty(len(rows), dtype=np.int64)
    readings = np.empty((len(rows), 2), dtype=np.float64)
    angles = np.empty(len(rows), dtype=np.float64) if (labeled and has_angle) else None
    for i, ln in enumerate(rows):
        cells = ln.split(",")
        lineno = i + 2  # 1-based, after header
        if len(cells) != ncols:
            raise SchemaError(f"{path}:{lineno}: expected {ncols} columns, got {len(cells)}")
        try:
            t[i] = int(cells[0])
            readings[i, 0] = float(cells[1])
            readings[i, 1] = float(cells[2])
            if angles is not None:
                angles[i] = float(cells[3])
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from None

    n_clamped = int(np.sum((readings < READING_MIN) | (readings > READING_MAX)))
    if n_clamped:
        warnings.warn(f"{path}: clamped {n_clamped} reading(s) to [{READING_MIN:g}, {READING_MAX:g}]")
        readings = np.clip(readings, READING_MIN, READING_MAX)

    if len(t) > 1:
        bad = np.flatnonzero(np.diff(t) <= 0)
        if len(bad):
            raise DataError(
                f"{path}:{int(bad[0]) + 3}: frame indices must be strictly increasing"
            )
    meta = DatasetMeta(domain=domain, provenance=f"csv:{path}")
    return Dataset(t, readings, angles, meta)


def save_csv(ds: Dataset, path) -> None:
    """Write a dataset to CSV (UTF-8, LF); angles carry 6 decimals."""
    ds.require_nonempty("save_csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if ds.labeled:
            fh.write(_HEADER_LABELED + "\n")
            for i in range(len(ds)):
                fh.write(
                    f"{ds.t[i]},{_fmt_value(ds.readings[i, 0])},"
                    f"{_fmt_value(ds.readings[i, 1])},{ds.angles[i]:.6f}\n"
                )
        else:
            fh.write(_HEADER_UNLABELED + "\n")
            for i in range(len(ds)):
                fh.write(f"{ds.t[i]},{_fmt_value(ds.readings[i, 0])},{_fmt_value(ds.readings[i, 1])}\n")


def split_chrono(ds: Dataset, ratio: float) -> tuple[Dataset, Dataset]:
    """Split into (train, test): the first ceil(ratio*N) frames train."""
    if not (0.0 < ratio < 1.0):
        raise ConfigError(f"split ratio must lie in (0, 1), got {ratio}")
    ds.require_nonempty("split_chrono")
    n = len(ds)
    # tiny guard compensates float representation error in ratio*n
    k = int(math.ceil(ratio * n - 1e-12))
    if k >= n:
        raise DataError(f"split of {n} frames at ratio {ratio} leaves an empty test set")
    train = ds.slice(0, k, replace(ds.meta, provenance=ds.meta.provenance + "; split:train"))
    test = ds.slice(k, n, replace(ds.meta, provenance=ds.meta.provenance + "; split:test"))
    return train, test


def strip_labels(ds: Dataset) -> Dataset:
    """Return an unlabeled copy (readings unchanged)."""
    ds.require_nonempty("strip_labels")
    if not ds.labeled:
        warnings.warn("strip_labels called on an already-unlabeled dataset; no-op")
        return ds
    meta = replace(ds.meta, provenance=ds.meta.provenance + "; labels-stripped")
    return Dataset(ds.t, ds.readings, None, meta)


@dataclass(frozen=True)
class NormStats:
    """Per-channel affine map sending [lo, hi] percentile values to [0, 1].

    Percentiles use linear interpolation between order statistics (the
    numpy default). apply() never clamps, so values outside the fitted
    band map outside [0, 1].
    """

    lo: tuple[float, float]
    hi: tuple[float, float]
    lo_pct: float
    hi_pct: float

    def apply(self, readings):
        r = np.asarray(readings, dtype=np.float64)
        lo = np.array(self.lo)
        hi = np.array(self.hi)
        return (r - lo) / (hi - lo)

    def invert(self, unit):
        u = np.asarray(unit, dtype=np.float64)
        lo = np.array(self.lo)
        hi = np.array(self.hi)
        return u * (hi - lo) + lo


def normalize_fit(ds: Dataset, lo_pct: float = 1.0, hi_pct: float = 99.0) -> NormStats:
    """Fit per-channel percentile normalization on a dataset's readings."""
    ds.require_nonempty("normalize_fit")
    if not (0.0 <= lo_pct < hi_pct <= 100.0):
        raise ConfigError(f"percentiles must satisfy 0 <= lo < hi <= 100, got ({lo_pct}, {hi_pct})")
    lo = np.percentile(ds.readings, lo_pct, axis=0)
    hi = np.percentile(ds.readings, hi_pct, axis=0)
    for k in range(2):
        if hi[k] - lo[k] < 1e-12:
            raise DegenerateDataError(
                f"channel {k + 1} has degenerate scale "
                f"(pct {lo_pct}->{lo[k]:g}, pct {hi_pct}->{hi[k]:g})"
            )
    return NormStats((float(lo[0]), float(lo[1])), (float(hi[0]), float(hi[1])), lo_pct, hi_pct)

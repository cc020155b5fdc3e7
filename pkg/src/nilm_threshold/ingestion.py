"""Meter CSV parsing, window normalization and train/validation/test splitting."""

from __future__ import annotations

import csv
import enum
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, InputError
from .series import PowerSeries, SamplingSpec, WindowKind, WindowPair

log = logging.getLogger(__name__)

_MISSING = {"", "nan", "na", "null", "none"}


class SplitTag(str, enum.Enum):
    TRAIN = "train"
    VALIDATION = "validation"
    TEST = "test"


@dataclass(frozen=True)
class NormalizationSpec:
    reference_power_watts: float = 2000.0

    def __post_init__(self):
        if not self.reference_power_watts > 0:
            raise ConfigurationError("reference power must be positive")


@dataclass
class Dataset:
    pairs: list[WindowPair]
    split_tag: SplitTag
    appliance: str = ""

    def __post_init__(self):
        kinds = {p.kind for p in self.pairs}
        if len(kinds) > 1:
            raise InputError("dataset mixes regression and classification pairs")

    def __len__(self):
        return len(self.pairs)

    def inputs(self) -> np.ndarray:
        return np.stack([p.input for p in self.pairs]) if self.pairs else np.zeros((0, 510))

    def targets(self) -> np.ndarray:
        return np.stack([p.target for p in self.pairs]) if self.pairs else np.zeros((0, 480))

    def means(self) -> np.ndarray:
        return np.array([p.window_mean_watts for p in self.pairs], dtype=np.float64)

    def starts(self) -> np.ndarray:
        return np.array([p.start for p in self.pairs], dtype=np.int64)


@dataclass
class MeterFile:
    """Parsed meter export: one series per mapped column plus data-quality counters."""

    series: list[PowerSeries]
    clamped: dict[str, int] = field(default_factory=dict)
    filled: dict[str, int] = field(default_factory=dict)
    rows_read: int = 0
    rows_kept: int = 0
    first_row: int = 0

    def __getitem__(self, label: str) -> PowerSeries:
        for s in self.series:
            if s.label == label:
                return s
        raise KeyError(label)


def parse_power_csv(
    path,
    column_map: Mapping[str, str],
    period_seconds: int,
    fill_limit: int = 5,
) -> MeterFile:
    """Read a meter CSV into aligned :class:`PowerSeries`.

    ``column_map`` maps series labels to header names. The first column holds a
    timestamp or sample index; it is only checked for a constant stride.
    Negative readings are clamped to 0. Runs of up to ``fill_limit`` missing
    cells are forward-filled; longer runs (or leading gaps) break the file and
    only the longest contiguous stretch of complete rows is kept.
    """
    path = Path(path)
    sampling = SamplingSpec(period_seconds)
    if fill_limit < 0:
        raise ConfigurationError("fill limit must be >= 0")
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        cols = {}
        for label, name in column_map.items():
            if name not in header[1:]:
                raise ConfigurationError(f"{path}: column {name!r} not in header {header}")
            cols[label] = header.index(name)
        times = []
        raw = {label: [] for label in cols}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise InputError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                times.append(float(row[0]))
                for label, j in cols.items():
                    cell = row[j].strip()
                    raw[label].append(math.nan if cell.lower() in _MISSING else float(cell))
            except ValueError:
                raise InputError(f"{path}:{lineno}: unparsable row {row!r}") from None
    n = len(times)
    if n == 0:
        raise InputError(f"{path}: no data rows")
    if n > 1:
        steps = np.diff(np.asarray(times))
        if steps[0] <= 0 or not np.allclose(steps, steps[0], rtol=0, atol=1e-6 * max(1.0, abs(steps[0]))):
            bad = int(np.flatnonzero(~np.isclose(steps, steps[0]))[0]) + 3 if steps[0] > 0 else 3
            raise InputError(f"{path}:{bad}: time column does not advance with a constant stride")

    usable = np.ones(n, dtype=bool)
    clamped, filled, arrays = {}, {}, {}
    for label, values in raw.items():
        arr = np.asarray(values, dtype=np.float64)
        neg = arr < 0
        clamped[label] = int(neg.sum())
        if clamped[label]:
            log.warning("%s: clamped %d negative readings in %r to 0", path, clamped[label], label)
        arr[neg] = 0.0
        filled[label] = 0
        missing = np.isnan(arr)
        i = 0
        while i < n:
            if not missing[i]:
                i += 1
                continue
            j = i
            while j < n and missing[j]:
                j += 1
            if i > 0 and j - i <= fill_limit:
                arr[i:j] = arr[i - 1]
                filled[label] += j - i
            else:
                usable[i:j] = False
            i = j
        arrays[label] = arr

    start, stop = _longest_true_run(usable)
    if stop - start < n:
        log.warning("%s: gaps longer than %d samples; keeping rows %d..%d of %d", path, fill_limit, start, stop - 1, n)
    if stop == start:
        raise InputError(f"{path}: no complete rows after gap handling")
    series = [PowerSeries(arrays[label][start:stop], sampling, label) for label in cols]
    return MeterFile(series, clamped, filled, rows_read=n, rows_kept=stop - start, first_row=start)


def _longest_true_run(mask: np.ndarray) -> tuple[int, int]:
    best = (0, 0)
    i, n = 0, mask.size
    while i < n:
        if not mask[i]:
            i += 1
            continue
        j = i
        while j < n and mask[j]:
            j += 1
        if j - i > best[1] - best[0]:
            best = (i, j)
        i = j
    return best


def normalize_pair(pair: WindowPair, spec: NormalizationSpec = NormalizationSpec()) -> WindowPair:
    """Mean-center and scale the input; scale a regression target by the same reference power."""
    if pair.normalized:
        raise InputError("window pair is already normalized")
    mean = float(pair.input.mean())
    ref = spec.reference_power_watts
    target = pair.target / ref if pair.kind is WindowKind.REGRESSION else pair.target
    return replace(pair, input=(pair.input - mean) / ref, target=target, window_mean_watts=mean, normalized=True)


def denormalize_input(pair: WindowPair, spec: NormalizationSpec = NormalizationSpec()) -> np.ndarray:
    return pair.input * spec.reference_power_watts + pair.window_mean_watts


def with_status_targets(dataset: Dataset, status_rows: np.ndarray) -> Dataset:
    """Classification copy of ``dataset`` whose targets are the given (N, 480) status rows."""
    if len(status_rows) != len(dataset):
        raise InputError("status rows do not match dataset size")
    pairs = [replace(p, target=s, kind=WindowKind.CLASSIFICATION) for p, s in zip(dataset.pairs, status_rows)]
    return Dataset(pairs, dataset.split_tag, dataset.appliance)


def split_sizes(n: int, fractions: Sequence[float]) -> tuple[int, int, int]:
    """Floor for train and validation; the test set takes the rounding remainder."""
    if len(fractions) != 3 or any(f < 0 for f in fractions):
        raise ConfigurationError(f"split fractions must be three nonnegative numbers, got {fractions!r}")
    total = sum(fractions)
    if total > 1 + 1e-9:
        raise ConfigurationError(f"split fractions sum to {total} > 1")
    n_train = int(math.floor(fractions[0] * n + 1e-9))
    n_val = int(math.floor(fractions[1] * n + 1e-9))
    if abs(total - 1) <= 1e-9:
        n_test = n - n_train - n_val
    else:
        n_test = min(int(math.floor(fractions[2] * n + 1e-9)), n - n_train - n_val)
    return n_train, n_val, n_test


def chronological_split(
    pairs_per_building: Sequence[Sequence[WindowPair]],
    fractions: Sequence[float] = (0.8, 0.1, 0.1),
    val_test_building: int = 0,
    appliance: str = "",
) -> tuple[Dataset, Dataset, Dataset]:
    """Training windows from the start of every building; validation and test follow in one building."""
    if not 0 <= val_test_building < len(pairs_per_building):
        raise ConfigurationError(
            f"validation/test building {val_test_building} out of range for {len(pairs_per_building)} buildings"
        )
    train = []
    for pairs in pairs_per_building:
        n_train, _, _ = split_sizes(len(pairs), fractions)
        train.extend(pairs[:n_train])
    held = pairs_per_building[val_test_building]
    n_train, n_val, n_test = split_sizes(len(held), fractions)
    val = list(held[n_train : n_train + n_val])
    test = list(held[n_train + n_val : n_train + n_val + n_test])
    return (
        Dataset(train, SplitTag.TRAIN, appliance),
        Dataset(val, SplitTag.VALIDATION, appliance),
        Dataset(test, SplitTag.TEST, appliance),
    )


def random_split(
    pairs: Sequence[WindowPair],
    fractions: Sequence[float] = (0.8, 0.1, 0.1),
    seed: int = 0,
    appliance: str = "",
) -> tuple[Dataset, Dataset, Dataset]:
    n_train, n_val, n_test = split_sizes(len(pairs), fractions)
    order = np.random.default_rng(seed).permutation(len(pairs))
    pick = lambda idx: [pairs[int(i)] for i in idx]  # noqa: E731
    return (
        Dataset(pick(order[:n_train]), SplitTag.TRAIN, appliance),
        Dataset(pick(order[n_train : n_train + n_val]), SplitTag.VALIDATION, appliance),
        Dataset(pick(order[n_train + n_val : n_train + n_val + n_test]), SplitTag.TEST, appliance),
    )


def activation_fraction(statuses: Dataset) -> float:
    """Percentage of target samples that are ON."""
    targets = statuses.targets()
    if targets.size == 0:
        raise InputError("activation fraction of an empty dataset")
    return float(100.0 * targets.sum() / targets.size)

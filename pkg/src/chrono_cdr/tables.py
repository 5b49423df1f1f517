"""Columnar in-memory tables shared by the pipeline stages.

Records are kept as parallel numpy arrays with integer codes into sorted
string pools. Sorting the pools makes code comparisons equivalent to
lexicographic id comparisons, which the deterministic tie-breaking rules
rely on throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import timebase


def encode_ids(values) -> tuple[np.ndarray, np.ndarray]:
    """Map an array of string ids to (int32 codes, sorted unique pool)."""
    pool, codes = np.unique(np.asarray(values, dtype=str), return_inverse=True)
    return codes.astype(np.int32), pool


def recode_to_sorted(appearance_codes: np.ndarray, categories) -> tuple[np.ndarray, np.ndarray]:
    """Remap appearance-order categorical codes onto a sorted pool.

    Cheap for large tables: O(n) fancy indexing plus a sort of the (small)
    category list.
    """
    cats = np.asarray(categories, dtype=str)
    order = np.argsort(cats)
    rank = np.empty(len(cats), dtype=np.int32)
    rank[order] = np.arange(len(cats), dtype=np.int32)
    return rank[appearance_codes], cats[order]


@dataclass
class ActivityTable:
    """Normalized activity records: one row per billed network event."""

    sim_codes: np.ndarray   # int32 -> sim_ids
    times: np.ndarray       # int64 UTC epoch seconds, 10 s aligned
    cell_codes: np.ndarray  # int32 -> cell_ids
    sim_ids: np.ndarray     # sorted string pool
    cell_ids: np.ndarray    # sorted string pool
    tz_offset_minutes: int = timebase.DEFAULT_TZ_OFFSET_MINUTES

    def __len__(self) -> int:
        return len(self.times)

    @property
    def n_sims(self) -> int:
        return len(self.sim_ids)

    @property
    def n_cells(self) -> int:
        return len(self.cell_ids)

    def local_days(self) -> np.ndarray:
        return timebase.local_day(self.times, self.tz_offset_minutes)

    def local_seconds(self) -> np.ndarray:
        return timebase.local_seconds_of_day(self.times, self.tz_offset_minutes)

    def take(self, mask_or_index) -> "ActivityTable":
        """Row subset sharing the id pools."""
        return ActivityTable(
            sim_codes=self.sim_codes[mask_or_index],
            times=self.times[mask_or_index],
            cell_codes=self.cell_codes[mask_or_index],
            sim_ids=self.sim_ids,
            cell_ids=self.cell_ids,
            tz_offset_minutes=self.tz_offset_minutes,
        )


UNKNOWN = "unknown"


@dataclass
class SubscriberTable:
    """One row per sim: deduplicated subscription attributes.

    Arrays are aligned with an ActivityTable's ``sim_ids`` pool. Missing
    ages are -1; categorical unknowns use the literal string "unknown".
    """

    sim_ids: np.ndarray
    customer_type: np.ndarray
    subscription_type: np.ndarray
    age: np.ndarray     # int16, -1 = missing
    gender: np.ndarray

    def __len__(self) -> int:
        return len(self.sim_ids)


@dataclass
class DeviceTable:
    """Device-usage intervals: maximal runs of consecutive records with one TAC."""

    sim_codes: np.ndarray   # int32 -> sim pool of the owning ActivityTable
    tacs: np.ndarray        # string TACs
    first_seen: np.ndarray  # int64 epoch seconds
    last_seen: np.ndarray   # int64 epoch seconds

    def __len__(self) -> int:
        return len(self.sim_codes)


def group_sizes(codes: np.ndarray, n_groups: int) -> np.ndarray:
    return np.bincount(codes, minlength=n_groups)


@dataclass
class SegmentIndex:
    """Sorted-group view over rows: ``order`` arranged so equal keys are adjacent."""

    order: np.ndarray   # permutation of row indices
    starts: np.ndarray  # segment start offsets into order
    keys: np.ndarray    # one key per segment

    @property
    def n_segments(self) -> int:
        return len(self.starts)

    def bounds(self, i: int) -> tuple[int, int]:
        hi = int(self.starts[i + 1]) if i + 1 < len(self.starts) else len(self.order)
        return int(self.starts[i]), hi


def segment_by(keys: np.ndarray, *minor_keys: np.ndarray) -> SegmentIndex:
    """Group rows by ``keys`` (ties ordered by the minor keys, last minor first)."""
    order = np.lexsort(tuple(reversed(minor_keys)) + (keys,))
    sorted_keys = keys[order]
    boundary = np.empty(len(order), dtype=bool)
    if len(order):
        boundary[0] = True
        boundary[1:] = sorted_keys[1:] != sorted_keys[:-1]
        starts = np.nonzero(boundary)[0]
        return SegmentIndex(order=order, starts=starts, keys=sorted_keys[starts])
    return SegmentIndex(order=order, starts=np.empty(0, dtype=np.int64), keys=sorted_keys)

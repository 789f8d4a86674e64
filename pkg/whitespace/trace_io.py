"""
Packet Trace I/O
Loads, validates, merges, windows and converts packet-timestamp traces.

Traces are CSV exports with the header `ts_us,channel,len_bytes` (len_bytes
optional), e.g. produced by `tshark -T fields`. Timestamps are integer
microseconds since the trace epoch.
"""
import csv
import logging
from dataclasses import dataclass
from io import StringIO
from pathlib import Path
from typing import FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import EmptyInput, EmptyTrace, InputError, ParseError, TooFewRecords

logger = logging.getLogger(__name__)

CSV_HEADER = ['ts_us', 'channel', 'len_bytes']

# Channel 0 marks synthetic traffic (generated traces)
SYNTHETIC_CHANNEL = 0
MIN_CHANNEL = 1
MAX_CHANNEL = 14

MISSING_LENGTH = -1


@dataclass(frozen=True)
class PacketRecord:
    """A single timestamped packet arrival."""
    timestamp_us: int
    channel_id: int
    length_bytes: Optional[int] = None

    def __post_init__(self):
        if self.timestamp_us < 0:
            raise ValueError(f"timestamp_us must be >= 0, got {self.timestamp_us}")
        if not (self.channel_id == SYNTHETIC_CHANNEL or MIN_CHANNEL <= self.channel_id <= MAX_CHANNEL):
            raise ValueError(f"channel_id must be in [{MIN_CHANNEL}, {MAX_CHANNEL}], got {self.channel_id}")
        if self.length_bytes is not None and self.length_bytes < 0:
            raise ValueError(f"length_bytes must be >= 0, got {self.length_bytes}")


@dataclass(frozen=True)
class TraceDiagnostics:
    """What happened while a trace was loaded."""
    rows_read: int = 0
    rows_skipped: int = 0
    sorted_on_load: bool = False
    warnings: Tuple[str, ...] = ()

    def to_dict(self):
        return {
            'rows_read': self.rows_read,
            'rows_skipped': self.rows_skipped,
            'sorted_on_load': self.sorted_on_load,
            'warnings': list(self.warnings),
        }


def _frozen(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class PacketTrace:
    """
    Ordered packet arrivals for one or more WiFi channels.

    Stored column-wise: records are sorted by timestamp, ties broken by
    ascending channel id.
    """
    timestamps_us: np.ndarray
    channels: np.ndarray
    lengths: np.ndarray
    source_channels: FrozenSet[int] = frozenset()
    epoch: int = 0
    diagnostics: Optional[TraceDiagnostics] = None

    @classmethod
    def from_arrays(cls, timestamps_us, channels, lengths=None, source_channels: Optional[Iterable[int]] = None,
                    epoch: int = 0, diagnostics: Optional[TraceDiagnostics] = None,
                    assume_sorted: bool = False) -> 'PacketTrace':
        timestamps_us = np.asarray(timestamps_us, dtype=np.int64).copy()
        channels = np.asarray(channels, dtype=np.int16).copy()
        if lengths is None:
            lengths = np.full(timestamps_us.shape, MISSING_LENGTH, dtype=np.int64)
        else:
            lengths = np.asarray(lengths, dtype=np.int64).copy()
        if not (timestamps_us.shape == channels.shape == lengths.shape):
            raise ValueError("timestamps, channels and lengths must have the same length")
        if timestamps_us.size and timestamps_us.min() < 0:
            raise ValueError("timestamps must be non-negative")

        if not assume_sorted:
            order = np.lexsort((channels, timestamps_us))
            timestamps_us, channels, lengths = timestamps_us[order], channels[order], lengths[order]

        present = set(int(c) for c in np.unique(channels))
        channel_set = frozenset(source_channels) | present if source_channels is not None else frozenset(present)
        return cls(_frozen(timestamps_us), _frozen(channels), _frozen(lengths),
                   frozenset(channel_set), int(epoch), diagnostics)

    @classmethod
    def from_records(cls, records: Iterable[PacketRecord], epoch: int = 0) -> 'PacketTrace':
        records = list(records)
        return cls.from_arrays(
            [r.timestamp_us for r in records],
            [r.channel_id for r in records],
            [MISSING_LENGTH if r.length_bytes is None else r.length_bytes for r in records],
            epoch=epoch,
        )

    def __len__(self):
        return int(self.timestamps_us.size)

    @property
    def is_empty(self) -> bool:
        return len(self) == 0

    def record(self, index: int) -> PacketRecord:
        length = int(self.lengths[index])
        return PacketRecord(int(self.timestamps_us[index]), int(self.channels[index]),
                            None if length == MISSING_LENGTH else length)

    @property
    def records(self) -> List[PacketRecord]:
        return [self.record(i) for i in range(len(self))]


@dataclass(frozen=True, eq=False)
class IatSeries:
    """Strictly positive inter-arrival times in integer microseconds."""
    iats_us: np.ndarray
    merged_zero_count: int = 0

    def __post_init__(self):
        iats = np.asarray(self.iats_us, dtype=np.int64)
        if iats.size and iats.min() <= 0:
            raise ValueError("inter-arrival times must be strictly positive")
        object.__setattr__(self, 'iats_us', _frozen(iats.copy()))

    @classmethod
    def from_ms(cls, values_ms: Sequence[float]) -> 'IatSeries':
        return cls(np.rint(np.asarray(values_ms, dtype=float) * 1000.0).astype(np.int64))

    @property
    def count(self) -> int:
        return int(self.iats_us.size)

    def as_ms(self) -> np.ndarray:
        return self.iats_us.astype(float) / 1000.0


class TraceParser:
    """Parses CSV packet-timestamp exports into a PacketTrace."""

    def __init__(self):
        self.errors = []
        self.warnings = []

    def parse(self, file_content: str, file_extension: str = '.csv') -> PacketTrace:
        self.errors = []
        self.warnings = []

        if file_extension.lower().lstrip('.') == 'csv':
            return self._parse_csv(file_content)
        raise ParseError(f"Unsupported trace format: {file_extension}", module='trace_io', operation='load_trace')

    def _column_indices(self, header: List[str]) -> Tuple[int, int, Optional[int]]:
        names = [cell.strip().lower() for cell in header]
        missing = [name for name in CSV_HEADER[:2] if name not in names]
        if missing:
            raise ParseError(f"header is missing column(s): {', '.join(missing)}", row=0,
                             module='trace_io', operation='load_trace')
        len_index = names.index('len_bytes') if 'len_bytes' in names else None
        return names.index('ts_us'), names.index('channel'), len_index

    def _parse_csv(self, content: str) -> PacketTrace:
        """Parse CSV content; rows are numbered from 1, excluding the header."""
        rows = [row for row in csv.reader(StringIO(content)) if any(cell.strip() for cell in row)]

        # Headerless files are read positionally
        ts_index, channel_index, len_index = 0, 1, 2
        if rows and 'ts_us' in [cell.strip().lower() for cell in rows[0]]:
            ts_index, channel_index, len_index = self._column_indices(rows[0])
            rows = rows[1:]

        timestamps, channels, lengths = [], [], []
        skipped = 0
        for row_num, row in enumerate(rows, start=1):
            try:
                timestamp = int(row[ts_index].strip())
                channel = int(row[channel_index].strip())
            except (ValueError, IndexError):
                self.errors.append(f"Row {row_num}: malformed row {row!r}")
                raise ParseError(f"malformed row {','.join(row)!r}", row=row_num,
                                 module='trace_io', operation='load_trace')

            length = MISSING_LENGTH
            if len_index is not None and len_index < len(row) and row[len_index].strip():
                try:
                    length = int(row[len_index].strip())
                except ValueError:
                    raise ParseError(f"invalid len_bytes {row[len_index]!r}", row=row_num,
                                     module='trace_io', operation='load_trace')
                if length < 0:
                    raise ParseError(f"negative len_bytes {length}", row=row_num,
                                     module='trace_io', operation='load_trace')

            if not (channel == SYNTHETIC_CHANNEL or MIN_CHANNEL <= channel <= MAX_CHANNEL):
                raise ParseError(f"channel {channel} outside [{MIN_CHANNEL}, {MAX_CHANNEL}]", row=row_num,
                                 module='trace_io', operation='load_trace')

            if timestamp < 0:
                self.warnings.append(f"Row {row_num}: negative timestamp {timestamp}, skipping")
                skipped += 1
                continue

            timestamps.append(timestamp)
            channels.append(channel)
            lengths.append(length)

        if not timestamps:
            raise EmptyTrace("trace has no valid rows", module='trace_io', operation='load_trace')

        ts_array = np.asarray(timestamps, dtype=np.int64)
        was_sorted = bool(np.all(np.diff(ts_array) >= 0))
        if not was_sorted:
            self.warnings.append("Timestamps are not monotone; records were sorted on load")

        for message in self.warnings:
            logger.warning(message)

        diagnostics = TraceDiagnostics(
            rows_read=len(rows),
            rows_skipped=skipped,
            sorted_on_load=not was_sorted,
            warnings=tuple(self.warnings),
        )
        return PacketTrace.from_arrays(ts_array, channels, lengths, diagnostics=diagnostics)


def load_trace(path, format: str = 'csv') -> PacketTrace:
    """Reads a trace file; see TraceParser for the accepted layout."""
    content = Path(path).read_text(encoding='utf-8')
    return TraceParser().parse(content, format)


def write_trace(trace: PacketTrace, path) -> None:
    """Writes the canonical `ts_us,channel,len_bytes` CSV."""
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(CSV_HEADER)
        for ts, channel, length in zip(trace.timestamps_us.tolist(), trace.channels.tolist(),
                                       trace.lengths.tolist()):
            writer.writerow([ts, channel, '' if length == MISSING_LENGTH else length])


def merge_traces(traces: Sequence[PacketTrace]) -> PacketTrace:
    """
    Aggregates captures of overlapping channels into one timestamp-sorted trace.
    Equal timestamps are ordered by ascending channel id.
    """
    non_empty = [trace for trace in traces if not trace.is_empty]
    if not non_empty:
        raise EmptyInput("no non-empty traces to merge", module='trace_io', operation='merge_traces')

    epochs = {trace.epoch for trace in non_empty}
    if len(epochs) > 1:
        logger.warning(f"Merging traces with different epochs {sorted(epochs)}; using {non_empty[0].epoch}")

    source_channels = frozenset().union(*(trace.source_channels for trace in traces))
    if len(non_empty) == 1:
        trace = non_empty[0]
        return PacketTrace(trace.timestamps_us, trace.channels, trace.lengths,
                           source_channels, trace.epoch, trace.diagnostics)

    return PacketTrace.from_arrays(
        np.concatenate([trace.timestamps_us for trace in non_empty]),
        np.concatenate([trace.channels for trace in non_empty]),
        np.concatenate([trace.lengths for trace in non_empty]),
        source_channels=source_channels,
        epoch=non_empty[0].epoch,
    )


def extract_iats(trace: PacketTrace) -> IatSeries:
    """Consecutive timestamp differences; identical timestamps collapse into one arrival."""
    if len(trace) < 2:
        raise TooFewRecords(f"need at least 2 records, got {len(trace)}",
                            module='trace_io', operation='extract_iats')

    gaps = np.diff(trace.timestamps_us)
    merged = int(np.count_nonzero(gaps == 0))
    if merged:
        logger.info(f"Merged {merged} zero inter-arrival gap(s) into single arrivals")
    return IatSeries(gaps[gaps > 0], merged_zero_count=merged)


def trace_from_iats(iats: IatSeries) -> PacketTrace:
    """Synthetic-channel trace starting at 0 whose extract_iats gives back the same series."""
    timestamps_us = np.concatenate([[0], np.cumsum(iats.iats_us)])
    return PacketTrace.from_arrays(timestamps_us, np.full(timestamps_us.shape, SYNTHETIC_CHANNEL),
                                   source_channels={SYNTHETIC_CHANNEL}, assume_sorted=True)


def window_trace(trace: PacketTrace, start_us: int, duration_us: int) -> PacketTrace:
    """Records with start_us <= timestamp < start_us + duration_us (may be empty)."""
    if duration_us <= 0:
        raise InputError(f"duration_us must be positive, got {duration_us}",
                         module='trace_io', operation='window_trace')

    lo = int(np.searchsorted(trace.timestamps_us, start_us, side='left'))
    hi = int(np.searchsorted(trace.timestamps_us, start_us + duration_us, side='left'))
    return PacketTrace(
        _frozen(trace.timestamps_us[lo:hi].copy()),
        _frozen(trace.channels[lo:hi].copy()),
        _frozen(trace.lengths[lo:hi].copy()),
        trace.source_channels,
        trace.epoch,
    )


def trace_span(trace: PacketTrace) -> Tuple[int, int]:
    """Half-open span [first timestamp, last timestamp + 1)."""
    if trace.is_empty:
        raise EmptyTrace("trace has no records", module='trace_io', operation='trace_span')
    return int(trace.timestamps_us[0]), int(trace.timestamps_us[-1]) + 1

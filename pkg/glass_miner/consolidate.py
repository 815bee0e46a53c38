"""
Merging of per-block CSV files into one dataset.

Headers are read first (header line only) and united in first-occurrence
order; every file is then streamed in chunks, reindexed to the united schema
and appended vertically. No join and no row deduplication happen here.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, List, Optional
import csv
import logging
import os

import pandas as pd

from .exceptions import ConsolidationError

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 10000
UNNAMED_LABEL = "unnamed"


def mangle_duplicates(labels: Iterable[str]) -> List[str]:
    """
    Make labels unique positionally: ``a, a`` becomes ``a, a.1``.

    Empty labels are named ``unnamed``.
    """
    seen = set()
    counts = {}
    result = []
    for label in labels:
        label = label.strip() or UNNAMED_LABEL
        name = label
        if name in seen:
            k = counts.get(label, 0)
            while name in seen:
                k += 1
                name = f"{label}.{k}"
            counts[label] = k
        seen.add(name)
        result.append(name)
    return result


def read_header(path: Path) -> List[str]:
    """
    Read only the header line of a CSV file.

    Raises:
        ConsolidationError: If the header is empty or undecodable
    """
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            header = next(csv.reader(f), None)
    except (UnicodeDecodeError, csv.Error, OSError) as e:
        raise ConsolidationError(f"Unreadable header: {e}", path=str(path), row=0)
    if not header or not any(label.strip() for label in header):
        raise ConsolidationError("Empty header", path=str(path), row=0)
    return mangle_duplicates(header)


@dataclass
class SchemaUnion:
    """Ordered unique labels plus the files whose headers were readable."""
    labels: List[str] = field(default_factory=list)
    sources: List[Path] = field(default_factory=list)

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise ConsolidationError("Schema labels must be unique")

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)

    def __contains__(self, label: str) -> bool:
        return label in self.labels


def union_headers(paths: Iterable[Path]) -> SchemaUnion:
    """
    Ordered union of the headers of ``paths`` (first occurrence wins).

    Raises:
        ConsolidationError: When no file has a readable header
    """
    labels: List[str] = []
    seen = set()
    sources: List[Path] = []
    for path in paths:
        try:
            header = read_header(path)
        except ConsolidationError as e:
            logger.warning(f"Skipping file with unreadable header: {e}")
            continue
        sources.append(Path(path))
        for label in header:
            if label not in seen:
                seen.add(label)
                labels.append(label)
    if not sources:
        raise ConsolidationError("no valid header")
    return SchemaUnion(labels, sources)


class CsvSink:
    """
    Single ordered writer of a CSV file.

    The header is written exactly once, when the sink is opened.
    """

    def __init__(self, path: Path, schema: SchemaUnion):
        self.path = Path(path)
        self.schema = schema
        self.rows_read = 0
        self.rows_written = 0
        self._handle = None

    def __enter__(self) -> "CsvSink":
        self.open()
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.close()

    def open(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._handle = open(self.path, "w", encoding="utf-8", newline="")
        pd.DataFrame(columns=self.schema.labels).to_csv(self._handle, index=False)

    def write(self, frame: pd.DataFrame) -> None:
        frame.to_csv(self._handle, header=False, index=False)
        self.rows_written += len(frame)

    def close(self) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None


def _non_empty_rows(frame: pd.DataFrame, exclude: Iterable[str]) -> pd.Series:
    data = frame[[c for c in frame.columns if c not in set(exclude)]]
    if data.shape[1] == 0:
        return pd.Series(False, index=frame.index)
    return data.apply(lambda s: s.str.strip() != "").any(axis=1)


def append_aligned(sink: CsvSink,
                   path: Path,
                   schema: SchemaUnion,
                   chunk_size: int = DEFAULT_CHUNK_SIZE,
                   id_column: str = "patent_id") -> int:
    """
    Append the rows of ``path`` to ``sink`` under ``schema``.

    Rows are reordered and padded with empty cells; rows without any
    non-empty data cell are discarded.

    Raises:
        ConsolidationError: With file and row index when reading or writing fails

    Returns:
        Number of rows appended
    """
    labels = read_header(path)
    appended = 0
    offset = 0
    try:
        reader = pd.read_csv(
            path, header=0, names=labels, dtype=str, keep_default_na=False,
            chunksize=chunk_size, encoding="utf-8",
        )
        for chunk in reader:
            chunk = chunk.fillna("")
            keep = _non_empty_rows(chunk, exclude=[id_column])
            aligned = chunk.loc[keep].reindex(columns=schema.labels, fill_value="")
            sink.write(aligned)
            sink.rows_read += len(chunk)
            appended += len(aligned)
            offset += len(chunk)
    except (pd.errors.ParserError, UnicodeDecodeError, ValueError) as e:
        raise ConsolidationError(f"Cannot read rows: {e}", path=str(path), row=offset)
    except OSError as e:
        raise ConsolidationError(f"Cannot append rows: {e}", path=str(path), row=offset)
    return appended


def _is_blank(series: pd.Series) -> pd.Series:
    return series.str.strip() == ""


def prune_empty_columns(path: Path,
                        chunk_size: int = DEFAULT_CHUNK_SIZE,
                        is_empty: Callable[[pd.Series], pd.Series] = _is_blank,
                        keep: Iterable[str] = ()) -> Path:
    """
    Remove columns that are empty in every row; rewrite the file in UTF-8.

    Two streaming passes: the first finds populated columns, the second
    rewrites the file atomically.

    Args:
        path: CSV file to prune in place
        chunk_size: Rows per chunk
        is_empty: Cell predicate deciding emptiness (default: blank string)
        keep: Columns never removed

    Returns:
        ``path``
    """
    path = Path(path)
    labels = read_header(path)
    populated = set(keep)

    def chunks():
        return pd.read_csv(path, header=0, names=labels, dtype=str, keep_default_na=False,
                           chunksize=chunk_size, encoding="utf-8")

    for chunk in chunks():
        chunk = chunk.fillna("")
        for label in labels:
            if label not in populated and not is_empty(chunk[label]).all():
                populated.add(label)

    kept = [label for label in labels if label in populated]
    removed = len(labels) - len(kept)
    if not removed:
        return path

    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as out:
        pd.DataFrame(columns=kept).to_csv(out, index=False)
        for chunk in chunks():
            chunk.fillna("")[kept].to_csv(out, header=False, index=False)
    os.replace(tmp, path)
    logger.info(f"Pruned {removed} empty columns from {path.name}")
    return path


@dataclass
class ConsolidateSummary:
    """Counters of one consolidation run."""
    files: int = 0
    skipped_files: int = 0
    rows_read: int = 0
    rows_written: int = 0
    columns: int = 0
    columns_pruned: int = 0


def merge_csv_files(paths: List[Path],
                    out_path: Path,
                    chunk_size: int = DEFAULT_CHUNK_SIZE,
                    id_column: str = "patent_id",
                    schema: Optional[SchemaUnion] = None) -> ConsolidateSummary:
    """
    Union the headers of ``paths`` and append every file under the union.

    Files with unreadable headers are skipped with a warning.
    """
    schema = schema or union_headers(paths)
    summary = ConsolidateSummary(files=len(paths), skipped_files=len(paths) - len(schema.sources))
    with CsvSink(out_path, schema) as sink:
        for path in schema.sources:
            append_aligned(sink, path, schema, chunk_size, id_column)
        summary.rows_read = sink.rows_read
        summary.rows_written = sink.rows_written
    summary.columns = len(schema)
    return summary


def consolidate_dir(input_dir: Path,
                    out_path: Path,
                    chunk_size: int = DEFAULT_CHUNK_SIZE,
                    id_column: str = "patent_id") -> ConsolidateSummary:
    """
    Consolidate every block CSV under ``input_dir`` (sorted path order).

    Raises:
        ConsolidationError: When there is no input or no valid header
    """
    paths = sorted(Path(input_dir).rglob("*.csv"))
    if not paths:
        raise ConsolidationError("No CSV files to consolidate", path=str(input_dir))
    summary = merge_csv_files(paths, out_path, chunk_size, id_column)
    before = len(read_header(out_path))
    prune_empty_columns(out_path, chunk_size, keep=[id_column])
    summary.columns_pruned = before - len(read_header(out_path))
    logger.info(
        f"Consolidated {summary.files - summary.skipped_files} files into {out_path}: "
        f"{summary.rows_written} rows, {summary.columns - summary.columns_pruned} columns"
    )
    return summary

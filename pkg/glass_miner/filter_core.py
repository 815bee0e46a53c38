"""
Core filtering of the consolidated dataset.

Keeps rows that carry a closed composition (oxide amounts summing to the
closure target within tolerance) and at least one reported property value.
The input is processed in chunks; every chunk becomes an independent part
file and the parts are merged with the consolidation routines. The part
driver here is shared by the optics and liquidus stages.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Union
import hashlib
import json
import logging
import math
import os
import re
import shutil

import numpy as np
import pandas as pd

from .config import FilterConfig
from .consolidate import merge_csv_files, prune_empty_columns, read_header
from .exceptions import MinerError
from .ingest import publication_of
from .lexicon import CompoundLexicon, normalize_text
from .tabular import ColumnarTable, ID_COLUMN, UNIT_COLUMN

logger = logging.getLogger(__name__)

ZERO_MARKERS = ("-", "–", "—", "−")
UNKNOWN_UNIT = "none"
_MANGLED_SUFFIX = re.compile(r"\.\d+$")

Number = Union[int, float]


def coerce_numeric(cell) -> float:
    """
    Total numeric coercion of one cell.

    Dashes mean zero; numbers parse to their value; anything else (missing
    cells, text, non-finite values) becomes 0.
    """
    if cell is None:
        return 0.0
    if isinstance(cell, str):
        cell = cell.strip()
        if not cell or cell in ZERO_MARKERS:
            return 0.0
    value = pd.to_numeric(cell, errors="coerce")
    try:
        value = float(value)
    except (TypeError, ValueError):
        return 0.0
    return value if math.isfinite(value) else 0.0


def coerce_series(series: pd.Series) -> pd.Series:
    """Vectorized :func:`coerce_numeric` over a column of strings."""
    text = series.fillna("").astype(str).str.strip()
    text = text.mask(text.isin(ZERO_MARKERS), "0")
    values = pd.to_numeric(text, errors="coerce").astype(float)
    return values.replace([np.inf, -np.inf], np.nan).fillna(0.0)


def coerce_frame(frame: pd.DataFrame) -> pd.DataFrame:
    return frame.apply(coerce_series) if frame.shape[1] else frame.astype(float)


def base_label(label: str) -> str:
    """Label without the positional ``.k`` suffix added to duplicates."""
    return _MANGLED_SUFFIX.sub("", label)


def is_sum_label(label: str, lexicon: CompoundLexicon) -> bool:
    """True for labels such as ``SiO2+B2O3+Al2O3`` (a '+' and two or more compounds)."""
    text = normalize_text(label)
    return "+" in text and len(set(lexicon.find_all(text))) >= 2


def drop_sum_columns(table: Union[ColumnarTable, pd.DataFrame],
                     lexicon: CompoundLexicon) -> Union[ColumnarTable, pd.DataFrame]:
    """Remove columns whose label is a sum of compounds."""
    if isinstance(table, pd.DataFrame):
        dropped = [c for c in table.columns if is_sum_label(c, lexicon)]
        return table.drop(columns=dropped)
    keep = [i for i, label in enumerate(table.labels) if not is_sum_label(label, lexicon)]
    return ColumnarTable(
        labels=[table.labels[i] for i in keep],
        rows=[[row[i] for i in keep] for row in table.rows],
        source_id=table.source_id,
    )


def closure_filter(values: Iterable[Number], cfg: FilterConfig) -> bool:
    """True iff the composition sums to the closure target within tolerance."""
    total = math.fsum(values)
    return abs(total - cfg.closure_target) <= cfg.closure_tolerance + 1e-9


def closure_mask(compositions: pd.DataFrame, cfg: FilterConfig) -> pd.Series:
    total = compositions.sum(axis=1)
    return (total - cfg.closure_target).abs() <= cfg.closure_tolerance + 1e-9


def property_presence(values: Iterable[Number]) -> bool:
    """True iff any property value is non-zero."""
    return any(v != 0 for v in values)


def presence_mask(properties: pd.DataFrame) -> pd.Series:
    if properties.shape[1] == 0:
        return pd.Series(False, index=properties.index)
    return (properties != 0).any(axis=1)


def intersect_views(composition_pass: Iterable, property_pass: Iterable) -> List:
    """Row indices present in both views, in the order of the first."""
    passing = set(property_pass)
    return [i for i in composition_pass if i in passing]


@dataclass
class ColumnLayout:
    """
    Column roles of a dataset header.

    Attributes:
        oxides: Canonical oxide -> source labels (first-occurrence order)
        properties: Property column labels
        sums: Compound-sum labels (dropped)
        ignored: Labels that are neither oxide nor property
    """
    oxides: Dict[str, List[str]] = field(default_factory=dict)
    properties: List[str] = field(default_factory=list)
    sums: List[str] = field(default_factory=list)
    ignored: List[str] = field(default_factory=list)

    @classmethod
    def from_labels(cls, labels: Sequence[str], lexicon: CompoundLexicon,
                    property_patterns: Sequence[str]) -> "ColumnLayout":
        patterns = [re.compile(p) for p in property_patterns]
        layout = cls()
        for label in labels:
            if label in (ID_COLUMN, UNIT_COLUMN):
                continue
            if is_sum_label(label, lexicon):
                layout.sums.append(label)
                continue
            canonical = lexicon.canonical(label) or lexicon.canonical(base_label(label))
            if canonical:
                layout.oxides.setdefault(canonical, []).append(label)
            elif any(p.search(normalize_text(label)) for p in patterns):
                layout.properties.append(label)
            else:
                layout.ignored.append(label)
        return layout

    @property
    def output_columns(self) -> List[str]:
        return list(self.oxides) + self.properties + [ID_COLUMN, UNIT_COLUMN]

    def compositions(self, chunk: pd.DataFrame) -> pd.DataFrame:
        """Coerced oxide amounts, one column per canonical oxide."""
        columns = {}
        for canonical, labels in self.oxides.items():
            values = coerce_frame(chunk[labels])
            if len(labels) == 1:
                columns[canonical] = values.iloc[:, 0]
            else:
                # first non-zero amount across same-oxide columns
                columns[canonical] = values.replace(0.0, np.nan).bfill(axis=1).iloc[:, 0].fillna(0.0)
        return pd.DataFrame(columns, index=chunk.index, dtype=float)


@dataclass
class PartResult:
    """Output of one chunk transform."""
    frame: pd.DataFrame
    drops: Dict[str, int] = field(default_factory=dict)
    added: int = 0


@dataclass
class PartRunSummary:
    """Counters and files of one part-based run."""
    parts: List[Path] = field(default_factory=list)
    reused: int = 0
    rows_in: int = 0
    rows_out: int = 0
    rows_added: int = 0
    drops: Dict[str, int] = field(default_factory=dict)
    merged: Optional[Path] = None

    def add_drops(self, drops: Dict[str, int]) -> None:
        for reason, count in drops.items():
            self.drops[reason] = self.drops.get(reason, 0) + int(count)


def read_chunks(path: Path, chunk_size: int):
    """Stream a CSV as string chunks under its (de-duplicated) header."""
    return pd.read_csv(path, header=0, names=read_header(path), dtype=str,
                       keep_default_na=False, chunksize=chunk_size, encoding="utf-8")


def _write_part(frame: pd.DataFrame, path: Path) -> None:
    tmp = path.with_suffix(".csv.tmp")
    try:
        frame.to_csv(tmp, index=False, encoding="utf-8")
        os.replace(tmp, path)
    except OSError as e:
        raise MinerError(f"Cannot write part file: {e}", path=str(path))


MANIFEST_NAME = "manifest.json"


def file_digest(path: Path, block_size: int = 1 << 20) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(block_size), b""):
            digest.update(block)
    return digest.hexdigest()


def _parts_manifest(input_path: Path, chunk_size: int, columns: List[str]) -> Dict[str, object]:
    return {
        "input_sha256": file_digest(input_path),
        "chunk_size": int(chunk_size),
        "columns": list(columns),
    }


def _prepare_parts_dir(parts_dir: Path, manifest: Dict[str, object]) -> None:
    """Clear part files written for another input, chunk size or column list."""
    manifest_path = parts_dir / MANIFEST_NAME
    if parts_dir.is_dir():
        try:
            previous = json.loads(manifest_path.read_text(encoding="utf-8"))
        except (OSError, ValueError):
            previous = None
        if previous == manifest:
            return
        if any(parts_dir.iterdir()):
            logger.info(f"Discarding stale part files in {parts_dir}")
        shutil.rmtree(parts_dir)
    parts_dir.mkdir(parents=True, exist_ok=True)
    tmp = manifest_path.with_suffix(".json.tmp")
    try:
        tmp.write_text(json.dumps(manifest, indent=2), encoding="utf-8")
        os.replace(tmp, manifest_path)
    except OSError as e:
        raise MinerError(f"Cannot write parts manifest: {e}", path=str(manifest_path))


def run_parts(input_path: Path,
              out_dir: Path,
              merged_name: str,
              columns: List[str],
              transform: Callable[[pd.DataFrame], PartResult],
              chunk_size: int) -> PartRunSummary:
    """
    Transform ``input_path`` chunk by chunk into ``parts/part_<n>.csv`` and merge.

    A part file that already exists is reused, so an interrupted run resumes
    where it stopped. Parts are only reused when ``parts/manifest.json`` records
    the same input content, chunk size and columns; otherwise they are cleared.
    Every part carries exactly ``columns``.
    """
    out_dir = Path(out_dir)
    parts_dir = out_dir / "parts"
    _prepare_parts_dir(parts_dir, _parts_manifest(input_path, chunk_size, columns))
    summary = PartRunSummary()

    for n, chunk in enumerate(read_chunks(input_path, chunk_size), start=1):
        result = transform(chunk)
        frame = result.frame.reindex(columns=columns)
        summary.rows_in += len(chunk)
        summary.rows_out += len(frame)
        summary.rows_added += result.added
        summary.add_drops(result.drops)

        part = parts_dir / f"part_{n}.csv"
        if part.exists():
            logger.debug(f"Reusing existing {part.name}")
            summary.reused += 1
        else:
            _write_part(frame, part)
        summary.parts.append(part)

    merged = out_dir / merged_name
    if summary.parts:
        merge_csv_files(summary.parts, merged, chunk_size, ID_COLUMN)
    else:
        pd.DataFrame(columns=columns).to_csv(merged, index=False, encoding="utf-8")
    summary.merged = merged
    logger.info(
        f"{merged_name}: {summary.rows_out}/{summary.rows_in} rows kept "
        f"from {len(summary.parts)} parts ({summary.reused} reused)"
    )
    return summary


def is_zero_or_blank(series: pd.Series) -> pd.Series:
    return coerce_series(series) == 0


@dataclass
class ContributionsReport:
    """Property column -> patents with at least one non-zero value in it."""
    entries: Dict[str, List[str]] = field(default_factory=dict)

    @classmethod
    def scan(cls, path: Path, properties: Sequence[str], chunk_size: int) -> "ContributionsReport":
        """Build the report from a full rescan of a dataset file."""
        found: Dict[str, Dict[str, None]] = {p: {} for p in properties}
        for chunk in read_chunks(path, chunk_size):
            for prop in properties:
                if prop not in chunk.columns:
                    continue
                mask = coerce_series(chunk[prop]) != 0
                for pid in chunk.loc[mask, ID_COLUMN]:
                    found[prop].setdefault(pid, None)
        return cls({p: list(ids) for p, ids in found.items() if ids})

    def to_frame(self) -> pd.DataFrame:
        rows = [(prop, pid) for prop, ids in self.entries.items() for pid in ids]
        return pd.DataFrame(rows, columns=["property_label", "patent_id"])

    def write(self, path: Path) -> Path:
        self.to_frame().to_csv(path, index=False, encoding="utf-8")
        return path


@dataclass
class FilterResult:
    """Parts, merged dataset and contributions of the filter stage."""
    summary: PartRunSummary
    layout: ColumnLayout
    report: ContributionsReport
    report_path: Path


def filter_chunk(chunk: pd.DataFrame,
                 layout: ColumnLayout,
                 cfg: FilterConfig,
                 unit_map: Dict[str, str]) -> PartResult:
    """Apply closure and property presence to one chunk."""
    compositions = layout.compositions(chunk)
    properties = coerce_frame(chunk[layout.properties])

    closed = closure_mask(compositions, cfg)
    present = presence_mask(properties)
    keep = intersect_views(chunk.index[closed.to_numpy()], chunk.index[present.to_numpy()])

    frame = pd.concat([compositions.loc[keep], properties.loc[keep]], axis=1)
    ids = chunk.loc[keep, ID_COLUMN]
    frame[ID_COLUMN] = ids
    frame[UNIT_COLUMN] = ids.map(lambda pid: unit_map.get(publication_of(pid), UNKNOWN_UNIT))
    drops = {
        "open_composition": int((~closed).sum()),
        "no_property": int((closed & ~present).sum()),
    }
    return PartResult(frame=frame, drops=drops)


def run_chunked(input_path: Path,
                cfg: FilterConfig,
                out_dir: Path,
                lexicon: CompoundLexicon,
                unit_map: Optional[Dict[str, str]] = None) -> FilterResult:
    """
    Filter the consolidated dataset into ``out_dir/filtered.csv``.

    Args:
        input_path: Consolidated CSV
        cfg: Closure and property settings
        out_dir: Stage directory (parts, merged output and report)
        lexicon: Oxide lexicon identifying composition columns
        unit_map: Publication number -> unit label from the extract stage

    Returns:
        FilterResult
    """
    layout = ColumnLayout.from_labels(read_header(input_path), lexicon, cfg.property_patterns)
    if layout.sums:
        logger.info(f"Dropping compound-sum columns: {', '.join(layout.sums)}")
    if layout.ignored:
        logger.debug(f"Ignoring columns: {', '.join(layout.ignored)}")
    unit_map = {k.upper(): v for k, v in (unit_map or {}).items()}

    summary = run_parts(
        input_path, out_dir, "filtered.csv", layout.output_columns,
        lambda chunk: filter_chunk(chunk, layout, cfg, unit_map),
        cfg.chunk_size,
    )
    prune_empty_columns(summary.merged, cfg.chunk_size, is_empty=is_zero_or_blank,
                        keep=[ID_COLUMN, UNIT_COLUMN])

    properties = [c for c in read_header(summary.merged) if c in layout.properties]
    report = ContributionsReport.scan(summary.merged, properties, cfg.chunk_size)
    report_path = report.write(Path(out_dir) / "contributions_by_patent.csv")
    return FilterResult(summary, layout, report, report_path)

"""
Refractive-index and Abbe-number standardization.

Candidate property columns are classified against the curation dictionary:

* explicit columns declare their wavelength (``nd``, ``n (486.13 nm)``) or
  are mapped by the curated label map, and move to nD/nG/nF/nH/nC or
  "Abbe Number";
* generic columns (``n``, ``refractive index``) are promoted only through
  the curated patent -> wavelength lists;
* blacklisted columns are dropped.

Columns whose values leave (1, 5] are not refractive indices and are
discarded first; Abbe columns are exempt from that check.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple
import logging
import re

import numpy as np
import pandas as pd

from .config import FilterConfig
from .consolidate import read_header
from .curation import (
    ABBE_COLUMN, ColumnClass, CurationDictionary, CurationQueue, WavelengthTarget,
)
from .filter_core import (
    ContributionsReport, PartResult, PartRunSummary, base_label, coerce_frame, coerce_series,
    read_chunks, run_parts,
)
from .lexicon import CompoundLexicon, normalize_text
from .tabular import ID_COLUMN, UNIT_COLUMN

logger = logging.getLogger(__name__)

__all__ = [
    "WavelengthTarget", "ColumnAssignment", "AMBIGUOUS", "N_COLUMNS", "OPTICS_COLUMNS",
    "classify_column", "plausible_n_columns", "apply_blacklist", "merged_refractive_marker",
    "OpticsStandardizer", "run_optics",
]

AMBIGUOUS = -1.0

N_COLUMNS = [t.value for t in WavelengthTarget]
OPTICS_COLUMNS = N_COLUMNS + [ABBE_COLUMN]

ABBE_PATTERN = re.compile(r"abbe|ν|υ|(?<!\w)v\s*[_-]?\s*d(?!\w)|(?<!\w)nu\s*[_-]?\s*d(?!\w)")
_REFRACTIVE_PATTERN = re.compile(r"refract|(?<!\w)n(?!\w)|(?<!\w)ri(?!\w)")
_LINE_PATTERN = re.compile(r"(?<!\w)n\s*[_-]?\s*(?P<line>[dgfhc])(?!\w)")
_NANOMETERS = re.compile(r"(?P<nm>\d{3}(?:\.\d+)?)\s*nm")
_WAVELENGTH_TOLERANCE_NM = 0.05

_LINE_TARGETS = {
    "d": WavelengthTarget.ND,
    "g": WavelengthTarget.NG,
    "f": WavelengthTarget.NF,
    "h": WavelengthTarget.NH,
    "c": WavelengthTarget.NC,
}


@dataclass(frozen=True)
class ColumnAssignment:
    """Class of a candidate column and, for explicit columns, its target."""
    column_class: ColumnClass
    target: Optional[str] = None


def _declared_wavelength(label: str) -> Tuple[bool, Optional[WavelengthTarget]]:
    match = _NANOMETERS.search(label)
    if not match:
        return False, None
    nm = float(match.group("nm"))
    for target in WavelengthTarget:
        if abs(target.nanometers - nm) <= _WAVELENGTH_TOLERANCE_NM:
            return True, target
    return True, None


def classify_column(label: str, dictionary: CurationDictionary) -> Optional[ColumnAssignment]:
    """
    Classify an optics candidate column; None for columns unrelated to optics.

    Precedence: curated label map, blacklist, Abbe keywords, declared
    wavelength or spectral line, then generic refractive-index labels. A
    declared wavelength that is not exactly a target line (587.6 nm, for
    instance) leaves the column generic.
    """
    text = normalize_text(base_label(label))
    mapped = dictionary.target_for(text)
    if mapped is not None:
        if mapped in OPTICS_COLUMNS:
            return ColumnAssignment(ColumnClass.EXPLICIT, mapped)
        return None
    if dictionary.is_blacklisted(text):
        return ColumnAssignment(ColumnClass.FALSE_POSITIVE)
    if ABBE_PATTERN.search(text):
        return ColumnAssignment(ColumnClass.EXPLICIT, ABBE_COLUMN)

    declared, target = _declared_wavelength(text)
    if target is not None:
        return ColumnAssignment(ColumnClass.EXPLICIT, target.value)
    line = _LINE_PATTERN.search(text)
    if line and not declared:
        return ColumnAssignment(ColumnClass.EXPLICIT, _LINE_TARGETS[line.group("line")].value)
    if _REFRACTIVE_PATTERN.search(text) or line:
        return ColumnAssignment(ColumnClass.GENERIC)
    return None


def _implausible(values: pd.Series) -> bool:
    nonzero = values[values != 0]
    return not ((nonzero > 1) & (nonzero <= 5)).all()


def plausible_n_columns(table: pd.DataFrame, columns: Optional[Sequence[str]] = None) -> List[str]:
    """
    Columns whose every non-zero value lies in (1, 5].

    Columns mentioning the Abbe number are kept regardless of their values.
    """
    columns = list(table.columns) if columns is None else list(columns)
    kept = []
    for column in columns:
        if ABBE_PATTERN.search(normalize_text(column)) or not _implausible(coerce_series(table[column])):
            kept.append(column)
    return kept


def apply_blacklist(table: pd.DataFrame,
                    dictionary: CurationDictionary,
                    properties: Sequence[str]) -> pd.DataFrame:
    """
    Remove blacklisted property columns.

    Rows whose only non-zero property sat in a blacklisted column are
    removed as well; every other row and column is left untouched.
    """
    blacklisted = [p for p in properties if dictionary.is_blacklisted(base_label(p))]
    if not blacklisted:
        return table
    others = [p for p in properties if p not in blacklisted]
    listed = (coerce_frame(table[blacklisted]) != 0).any(axis=1)
    if others:
        kept_any = (coerce_frame(table[others]) != 0).any(axis=1)
    else:
        kept_any = pd.Series(False, index=table.index)
    return table.loc[~(listed & ~kept_any)].drop(columns=blacklisted)


def merged_refractive_marker(values: Iterable[float]) -> Optional[float]:
    """
    Merge candidate refractive indices of one row.

    Returns:
        The value when exactly one distinct non-zero candidate exists,
        AMBIGUOUS (-1) for two or more, None when there is none
    """
    distinct = sorted({float(v) for v in values if v and not np.isnan(v)})
    if not distinct:
        return None
    if len(distinct) == 1:
        return distinct[0]
    return AMBIGUOUS


def _merge_group(values: pd.DataFrame) -> pd.Series:
    """Vectorized :func:`merged_refractive_marker` over the columns of ``values``."""
    present = values.replace(0.0, np.nan)
    merged = present.bfill(axis=1).iloc[:, 0]
    return merged.mask(present.nunique(axis=1) > 1, AMBIGUOUS)


class OpticsStandardizer:
    """
    Column classification and row standardization for one dataset header.

    Attributes:
        oxides: Oxide columns, passed through unchanged
        assignments: Candidate label -> ColumnAssignment
        properties: All property labels of the input
    """

    def __init__(self,
                 labels: Sequence[str],
                 lexicon: CompoundLexicon,
                 dictionary: CurationDictionary,
                 queue: Optional[CurationQueue] = None):
        self.dictionary = dictionary
        self.queue = queue
        self.oxides = [l for l in labels if l in lexicon]
        self.properties = [l for l in labels if l not in self.oxides and l not in (ID_COLUMN, UNIT_COLUMN)]
        self.assignments: Dict[str, ColumnAssignment] = {}
        for label in self.properties:
            assignment = classify_column(label, dictionary)
            if assignment is not None:
                self.assignments[label] = assignment
        self._implausible: Set[str] = set()
        self.queued = 0

    def _labels(self, column_class: ColumnClass, target: Optional[str] = None) -> List[str]:
        return [
            label for label, a in self.assignments.items()
            if a.column_class == column_class
            and (target is None or a.target == target)
            and label not in self._implausible
        ]

    @property
    def n_candidates(self) -> List[str]:
        return [
            label for label, a in self.assignments.items()
            if a.column_class == ColumnClass.GENERIC
            or (a.column_class == ColumnClass.EXPLICIT and a.target in N_COLUMNS)
        ]

    @property
    def output_columns(self) -> List[str]:
        return self.oxides + OPTICS_COLUMNS + [ID_COLUMN, UNIT_COLUMN]

    def observe(self, chunk: pd.DataFrame) -> None:
        """Accumulate the (1, 5] domain check over one chunk of the dataset."""
        candidates = [c for c in self.n_candidates if c not in self._implausible]
        kept = set(plausible_n_columns(chunk, candidates))
        self._implausible.update(c for c in candidates if c not in kept)

    def scan(self, path: Path, chunk_size: int) -> List[str]:
        """Run :meth:`observe` over a whole file; returns the discarded columns."""
        for chunk in read_chunks(path, chunk_size):
            self.observe(chunk)
        if self._implausible:
            logger.info(f"Discarding non-n columns: {', '.join(sorted(self._implausible))}")
        return sorted(self._implausible)

    def apply_blacklist(self, table: pd.DataFrame) -> pd.DataFrame:
        return apply_blacklist(table, self.dictionary, self.properties)

    def resolve_generic_columns(self, table: pd.DataFrame) -> pd.DataFrame:
        """
        Promote single generic values of mapped patents into empty target columns.

        Pairs of unmapped patents and generic labels go to the curation
        queue; generic columns are removed afterwards.
        """
        generic = self._labels(ColumnClass.GENERIC)
        if not generic:
            return table
        values = coerce_frame(table[generic]).replace(0.0, np.nan)
        count = values.notna().sum(axis=1)
        single = count == 1
        if single.any():
            value = values.loc[single].bfill(axis=1).iloc[:, 0]
            source = values.loc[single].notna().idxmax(axis=1)
            for idx in value.index:
                pid = table.at[idx, ID_COLUMN]
                target = self.dictionary.wavelength_for(pid)
                if target is None:
                    if self.queue is not None and self.queue.add_pair(pid, source[idx]):
                        self.queued += 1
                    logger.debug(f"{pid}: generic column '{source[idx]}' has no wavelength mapping")
                elif pd.isna(table.at[idx, target]):
                    table.at[idx, target] = value[idx]
        if (count > 1).any():
            logger.debug(f"{int((count > 1).sum())} rows with several generic n values left unpromoted")
        return table.drop(columns=generic)

    def standardize_wavelengths(self, table: pd.DataFrame) -> Tuple[pd.DataFrame, Dict[str, int]]:
        """
        Move explicit values to their target column, resolve generic ones and
        keep rows with at least one standardized n value.

        Returns:
            (standardized table, drops by reason)
        """
        table = table.copy()
        for target in OPTICS_COLUMNS:
            sources = self._labels(ColumnClass.EXPLICIT, target)
            if sources:
                table[target] = _merge_group(coerce_frame(table[sources]))
            else:
                table[target] = np.nan
        abbe_ambiguous = table[ABBE_COLUMN] == AMBIGUOUS
        if abbe_ambiguous.any():
            logger.debug(f"{int(abbe_ambiguous.sum())} rows with conflicting Abbe numbers")
            table.loc[abbe_ambiguous, ABBE_COLUMN] = np.nan

        table = self.resolve_generic_columns(table)

        ambiguous = (table[N_COLUMNS] == AMBIGUOUS).any(axis=1)
        missing = ~ambiguous & table[N_COLUMNS].isna().all(axis=1)
        drops = {"ambiguous_n": int(ambiguous.sum()), "no_refractive_index": int(missing.sum())}
        table = table.loc[~(ambiguous | missing)]
        return table.reindex(columns=self.output_columns), drops

    def transform(self, chunk: pd.DataFrame) -> PartResult:
        before = len(chunk)
        table = self.apply_blacklist(chunk)
        drops = {"blacklisted": before - len(table)}
        table, standardized_drops = self.standardize_wavelengths(table)
        drops.update(standardized_drops)
        return PartResult(frame=table, drops=drops)


@dataclass
class OpticsResult:
    """Outputs of the optics stage."""
    summary: PartRunSummary
    discarded_columns: List[str]
    report: ContributionsReport
    queued: int


def run_optics(input_path: Path,
               out_dir: Path,
               lexicon: CompoundLexicon,
               dictionary: CurationDictionary,
               cfg: FilterConfig) -> OpticsResult:
    """
    Build ``refractive_index.csv`` from the filtered dataset.

    The file is read twice: once for the column domain check, once for
    the chunked standardization.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    queue = CurationQueue(out_dir / "curation_queue.txt")
    standardizer = OpticsStandardizer(read_header(input_path), lexicon, dictionary, queue)
    discarded = standardizer.scan(input_path, cfg.chunk_size)

    summary = run_parts(
        input_path, out_dir, "refractive_index.csv", standardizer.output_columns,
        standardizer.transform, cfg.chunk_size,
    )
    report = ContributionsReport.scan(summary.merged, OPTICS_COLUMNS, cfg.chunk_size)
    report.write(out_dir / "contributions_by_patent.csv")
    if standardizer.queued:
        logger.warning(f"{standardizer.queued} generic columns queued for curation in {queue.path}")
    return OpticsResult(summary, discarded, report, standardizer.queued)

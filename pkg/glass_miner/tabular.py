"""
Heuristic conversion of patent table sections into columnar tables.

A table section is split into blocks (one per outer ``<table>``), each block
is read into a cell grid, and a grid is accepted only when some row names at
least two lexicon compounds, the header region mentions a property keyword
and the layout stays within the configured width limits.
"""

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, List, Dict, Any, Iterable, Tuple
import logging
import re

import pandas as pd
from bs4 import BeautifulSoup

from .config import HeuristicConfig, PatentIdStyle
from .exceptions import ExtractionError
from .ingest import PatentId, PatentRecord, ControlList, slice_elements, iter_records
from .lexicon import CompoundLexicon, normalize_text

logger = logging.getLogger(__name__)

ID_COLUMN = "patent_id"
UNIT_COLUMN = "unit"

_MOL_INDICATOR = re.compile(r"(?<![a-z])mol(?:e|es|ar)?(?![a-z])")
_MASS_INDICATOR = re.compile(
    r"(?<![a-z])(?:wt|weight|mass)[\s.]*(?:%|percent|pct)"
    r"|%\s*by\s*(?:weight|mass)"
    r"|(?<![a-z])wt(?![a-z])"
)


class UnitLabel(Enum):
    """Document-level composition basis evidence."""
    MOL = "mol"
    MASS = "mass"
    BOTH = "both"
    NONE = "none"


class RejectReason(Enum):
    """Why a block was not accepted as a composition table."""
    TOO_FEW_COMPOUNDS = "too_few_compounds"
    NO_PROPERTY_KEYWORD = "no_property_keyword"
    WIDTH_EXCEEDED = "width_exceeded"


@dataclass
class HeaderDecision:
    """Result of header detection: an accepted row index or a reject reason."""
    index: Optional[int] = None
    reason: Optional[RejectReason] = None

    @property
    def accepted(self) -> bool:
        return self.index is not None


@dataclass
class ColumnarTable:
    """
    Ordered labeled columns over rows of cells.

    Labels may repeat; a repeated label keeps its positional identity.
    Missing cells are None.
    """
    labels: List[str]
    rows: List[List[Any]]
    source_id: PatentId

    def __post_init__(self):
        for i, row in enumerate(self.rows):
            if len(row) != len(self.labels):
                raise ExtractionError(
                    f"Row has {len(row)} cells for {len(self.labels)} labels",
                    row=i, source=str(self.source_id),
                )

    def to_frame(self, style: PatentIdStyle = PatentIdStyle.BLOCK) -> pd.DataFrame:
        frame = pd.DataFrame(self.rows, columns=self.labels, dtype=object)
        frame[ID_COLUMN] = self.source_id.render(style)
        return frame

    def write_csv(self, out_dir: Path, style: PatentIdStyle = PatentIdStyle.BLOCK) -> Path:
        """Write the block as ``<patent_id>.csv`` (UTF-8, patent_id as last column)."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"{self.source_id.render(style)}.csv"
        self.to_frame(style).to_csv(path, index=False, encoding="utf-8")
        return path


def _text(fragment: str) -> str:
    return normalize_text(BeautifulSoup(fragment or "", "html.parser").get_text(" "))


def detect_unit_label(fragments: Iterable[str]) -> UnitLabel:
    """
    Composition basis evidence aggregated over all tables of one patent.

    Args:
        fragments: Table-section markup of a single patent

    Returns:
        MOL, MASS, BOTH or NONE
    """
    has_mol = has_mass = False
    for fragment in fragments:
        text = _text(fragment)
        has_mol = has_mol or bool(_MOL_INDICATOR.search(text))
        has_mass = has_mass or bool(_MASS_INDICATOR.search(text))
    if has_mol and has_mass:
        return UnitLabel.BOTH
    if has_mol:
        return UnitLabel.MOL
    if has_mass:
        return UnitLabel.MASS
    return UnitLabel.NONE


def split_blocks(fragment: str) -> List[str]:
    """
    Outer ``<table>`` elements of a table section, verbatim and in order.

    Returns:
        Block markup; empty list (logged) when the fragment is unparseable
    """
    try:
        return slice_elements(fragment, "table")
    except ExtractionError as e:
        logger.warning(f"Skipping unparseable table section: {e}")
        return []


def block_grid(block: str) -> List[List[Optional[str]]]:
    """
    Read a block into a grid of normalized cell texts.

    Understands HTML (``tr``/``td``/``th``) and patent XML (``row``/``entry``)
    markup; ``colspan`` cells are repeated across the spanned columns and rows
    of nested tables stay inside their enclosing cell.
    """
    soup = BeautifulSoup(block or "", "html.parser")
    outer = soup.find("table") or soup
    grid = []
    for row in outer.find_all(["tr", "row"]):
        if row.find_parent("table") not in (outer, None) and outer.name == "table":
            continue
        cells: List[Optional[str]] = []
        for cell in row.find_all(["td", "th", "entry"], recursive=False):
            text = normalize_text(cell.get_text()) or None
            try:
                span = max(1, int(cell.get("colspan", 1)))
            except (TypeError, ValueError):
                span = 1
            cells.extend([text] * span)
        if cells:
            grid.append(cells)
    return grid


def _keyword_pattern(keyword: str) -> re.Pattern:
    kw = normalize_text(keyword)
    tail = r"(?!\w)" if len(kw) <= 2 else ""
    return re.compile(r"(?<!\w)" + re.escape(kw) + tail)


def detect_header(block: List[List[Optional[str]]],
                  lexicon: CompoundLexicon,
                  config: HeuristicConfig) -> HeaderDecision:
    """
    Locate the composition header row of a grid.

    A row is the header when it names at least ``min_compounds`` distinct
    lexicon compounds; the rows up to and including it must mention a
    property keyword and the block must respect the width limits.
    """
    if not block:
        return HeaderDecision(reason=RejectReason.TOO_FEW_COMPOUNDS)
    if max(len(row) for row in block) > config.max_columns:
        return HeaderDecision(reason=RejectReason.WIDTH_EXCEEDED)

    header_index = None
    for i, row in enumerate(block):
        compounds = {lexicon.canonical(cell) for cell in row if cell}
        compounds.discard(None)
        if len(compounds) >= config.min_compounds:
            header_index = i
            break
    if header_index is None:
        return HeaderDecision(reason=RejectReason.TOO_FEW_COMPOUNDS)

    if any(len(cell) > config.max_label_length for cell in block[header_index] if cell):
        return HeaderDecision(reason=RejectReason.WIDTH_EXCEEDED)

    patterns = [_keyword_pattern(k) for k in config.property_keywords]
    region = [cell for row in block[:header_index + 1] for cell in row if cell]
    if not any(p.search(cell) for p in patterns for cell in region):
        return HeaderDecision(reason=RejectReason.NO_PROPERTY_KEYWORD)
    return HeaderDecision(index=header_index)


def block_to_table(block: List[List[Optional[str]]], header_index: int, id: PatentId) -> ColumnarTable:
    """Build a table from the accepted header row and every row below it."""
    labels = [cell or "" for cell in block[header_index]]
    width = len(labels)
    rows = []
    for row in block[header_index + 1:]:
        rows.append((list(row) + [None] * width)[:width])
    return ColumnarTable(labels=labels, rows=rows, source_id=id)


def filter_relevant(record: PatentRecord, lexicon: CompoundLexicon) -> bool:
    """True when any table section mentions at least one lexicon compound."""
    return any(lexicon.mentions_any(_text(fragment)) for fragment in record.html_tables)


@dataclass
class RecordExtraction:
    """Tables, rejects and unit label of one patent."""
    publication_number: str
    relevant: bool
    unit: UnitLabel = UnitLabel.NONE
    tables: List[ColumnarTable] = field(default_factory=list)
    rejects: List[Tuple[PatentId, RejectReason]] = field(default_factory=list)


def extract_record(record: PatentRecord,
                   lexicon: CompoundLexicon,
                   config: HeuristicConfig) -> RecordExtraction:
    """
    Convert every table block of a record.

    Block indices run over all blocks of the patent in document order;
    rejected blocks keep their index.
    """
    result = RecordExtraction(record.publication_number, filter_relevant(record, lexicon))
    if not result.relevant:
        return result
    result.unit = detect_unit_label(record.html_tables)

    k = 0
    for fragment in record.html_tables:
        for block in split_blocks(fragment):
            pid = PatentId(record.publication_number, k)
            k += 1
            grid = block_grid(block)
            decision = detect_header(grid, lexicon, config)
            if decision.accepted:
                result.tables.append(block_to_table(grid, decision.index, pid))
            else:
                logger.debug(f"Block {pid} rejected: {decision.reason.value}")
                result.rejects.append((pid, decision.reason))
    return result


@dataclass
class ExtractSummary:
    """Counters of one extract run."""
    records: int = 0
    irrelevant: int = 0
    blocks: int = 0
    accepted: int = 0
    rejects: Dict[str, int] = field(default_factory=dict)
    outputs: List[str] = field(default_factory=list)


def extract_corpus(records_dir: Path,
                   blocks_dir: Path,
                   control_dir: Path,
                   unit_labels_path: Path,
                   lexicon: CompoundLexicon,
                   config: HeuristicConfig) -> ExtractSummary:
    """
    Run extraction over every record of ``records_dir``.

    Writes one CSV per accepted block, the per-patent unit label mapping and
    the irrelevant/rejected control lists.
    """
    summary = ExtractSummary()
    irrelevant = ControlList(Path(control_dir) / "irrelevant_patents.txt")
    rejected = ControlList(Path(control_dir) / "rejected_blocks.tsv")
    units = []

    for record in iter_records(records_dir):
        summary.records += 1
        result = extract_record(record, lexicon, config)
        if not result.relevant:
            logger.info(f"{record.publication_number}: no lexicon compound in tables")
            irrelevant.add(record.publication_number)
            summary.irrelevant += 1
            continue
        units.append({"publication_number": record.publication_number, UNIT_COLUMN: result.unit.value})
        summary.blocks += len(result.tables) + len(result.rejects)
        summary.accepted += len(result.tables)
        for table in result.tables:
            path = table.write_csv(blocks_dir, config.patent_id_style)
            summary.outputs.append(str(path))
        for pid, reason in result.rejects:
            rejected.add(f"{pid.render(config.patent_id_style)}\t{reason.value}")
            summary.rejects[reason.value] = summary.rejects.get(reason.value, 0) + 1

    Path(unit_labels_path).parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(units, columns=["publication_number", UNIT_COLUMN]).to_csv(
        unit_labels_path, index=False, encoding="utf-8"
    )
    logger.info(
        f"Extracted {summary.accepted}/{summary.blocks} blocks from "
        f"{summary.records - summary.irrelevant} relevant records"
    )
    return summary


def load_unit_labels(path: Path) -> Dict[str, str]:
    """Publication number -> unit label mapping written by the extract stage."""
    if not Path(path).is_file():
        return {}
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    return dict(zip(frame["publication_number"].str.upper(), frame[UNIT_COLUMN]))

"""
Liquidus-temperature standardization.

Liquidus columns are found by pattern, converted to °C from their declared
unit (°C, °F or K) and tagged with the measurement condition they declare
(Internal, Air or Platinum). Columns without a declared unit are resolved
through the curated patent -> unit lists. Per condition, a row keeps a value
only when exactly one candidate lies in the plausibility range.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple
import logging
import re

import pandas as pd

from .config import FilterConfig, LiquidusConfig
from .consolidate import read_header
from .curation import ColumnClass, CurationDictionary, CurationQueue, TliqTarget
from .filter_core import ContributionsReport, PartResult, PartRunSummary, base_label, coerce_frame, run_parts
from .lexicon import CompoundLexicon, normalize_text
from .tabular import ID_COLUMN, UNIT_COLUMN

logger = logging.getLogger(__name__)

TLIQ_COLUMN = TliqTarget.CELSIUS.value
CONDITION_COLUMN = "condition"
KELVIN_OFFSET = 273.15

TLIQ_PATTERN = re.compile(r"liquidus|t\s*[_-]?\s*liq|(?<!\w)tl(?!\w)|(?<!\w)liq(?!\w)")
_FAHRENHEIT = re.compile(r"°\s*f(?!\w)|(?<!\w)f(?!\w)|fahrenheit|℉")
_KELVIN = re.compile(r"(?<!\w)k(?!\w)|kelvin|°\s*k(?!\w)")
_CELSIUS = re.compile(r"°\s*c(?!\w)|(?<!\w)c(?!\w)|celsius|℃")
_AIR = re.compile(r"(?<!\w)air(?!\w)")
_PLATINUM = re.compile(r"platinum|(?<!\w)pt(?!\w)")
_INTERNAL = re.compile(r"internal|interior")

# target -> (unit, condition)
_TARGET_SPECS = {
    TliqTarget.CELSIUS: ("C", ""),
    TliqTarget.AIR: ("C", "Air"),
    TliqTarget.PLATINUM: ("C", "Platinum"),
    TliqTarget.FAHRENHEIT: ("F", ""),
    TliqTarget.KELVIN: ("K", ""),
}


def f_to_c(t: float) -> float:
    """Fahrenheit to Celsius."""
    return round((t - 32.0) * 5.0 / 9.0, 10)


def k_to_c(t: float) -> float:
    """Kelvin to Celsius."""
    return round(t - KELVIN_OFFSET, 10)


def c_to_f(t: float) -> float:
    return round(t * 9.0 / 5.0 + 32.0, 10)


def c_to_k(t: float) -> float:
    return round(t + KELVIN_OFFSET, 10)


_TO_CELSIUS = {"C": lambda t: t, "F": f_to_c, "K": k_to_c}


def match_tliq_columns(labels: Iterable[str]) -> List[str]:
    """Labels naming a liquidus temperature; ``tl`` only as a standalone token."""
    return [l for l in labels if TLIQ_PATTERN.search(normalize_text(base_label(l)))]


@dataclass(frozen=True)
class TliqColumnSpec:
    """How to read one liquidus column."""
    column_class: ColumnClass
    unit: Optional[str] = None
    condition: str = ""


def spec_for_target(target: TliqTarget, condition: str = "") -> TliqColumnSpec:
    unit, target_condition = _TARGET_SPECS[target]
    return TliqColumnSpec(ColumnClass.EXPLICIT, unit, target_condition or condition)


def _declared_condition(text: str) -> str:
    if _AIR.search(text):
        return "Air"
    if _PLATINUM.search(text):
        return "Platinum"
    if _INTERNAL.search(text):
        return "Internal"
    return ""


def classify_tliq_column(label: str, dictionary: CurationDictionary) -> Optional[TliqColumnSpec]:
    """
    Unit and condition of a liquidus column; None when not a liquidus column.

    Curated labels take precedence; otherwise the label must declare its unit
    to be explicit. Undeclared units make the column generic.
    """
    text = normalize_text(base_label(label))
    mapped = dictionary.target_for(text)
    if mapped is not None:
        try:
            return spec_for_target(TliqTarget(mapped))
        except ValueError:
            return None
    if not TLIQ_PATTERN.search(text):
        return None
    if dictionary.is_blacklisted(text):
        return TliqColumnSpec(ColumnClass.FALSE_POSITIVE)

    condition = _declared_condition(text)
    for unit, pattern in (("F", _FAHRENHEIT), ("K", _KELVIN), ("C", _CELSIUS)):
        if pattern.search(text):
            return TliqColumnSpec(ColumnClass.EXPLICIT, unit, condition)
    return TliqColumnSpec(ColumnClass.GENERIC, None, condition)


def plausibility_filter(candidates: Iterable[float], cfg: LiquidusConfig) -> Optional[float]:
    """
    The single candidate inside [min_celsius, max_celsius], or None.

    Equal values reported by several columns count as one candidate.
    """
    in_range = sorted({float(v) for v in candidates if cfg.min_celsius <= v <= cfg.max_celsius})
    return in_range[0] if len(in_range) == 1 else None


class LiquidusStandardizer:
    """Per-row liquidus consolidation for one dataset header."""

    def __init__(self,
                 labels: Sequence[str],
                 lexicon: CompoundLexicon,
                 dictionary: CurationDictionary,
                 cfg: LiquidusConfig,
                 queue: Optional[CurationQueue] = None):
        self.dictionary = dictionary
        self.cfg = cfg
        self.queue = queue
        self.oxides = [l for l in labels if l in lexicon]
        candidates = [l for l in labels if l not in self.oxides and l not in (ID_COLUMN, UNIT_COLUMN)]
        self.specs: Dict[str, TliqColumnSpec] = {}
        for label in candidates:
            spec = classify_tliq_column(label, dictionary)
            if spec is not None and spec.column_class != ColumnClass.FALSE_POSITIVE:
                self.specs[label] = spec
        self.queued = 0

    @property
    def output_columns(self) -> List[str]:
        return self.oxides + [TLIQ_COLUMN, CONDITION_COLUMN, ID_COLUMN, UNIT_COLUMN]

    def _generic_spec(self, pid: str, spec: TliqColumnSpec, label: str) -> Optional[TliqColumnSpec]:
        target = self.dictionary.unit_for(pid)
        if target is None:
            if self.queue is not None and self.queue.add_pair(pid, label):
                self.queued += 1
            return None
        return spec_for_target(TliqTarget(target), spec.condition)

    def consolidate_tliq(self, pid: str, values: Dict[str, float]) -> Dict[str, float]:
        """
        Resolve the liquidus candidates of one row.

        Args:
            pid: Block id of the row
            values: Candidate label -> raw value (zeros are absent)

        Returns:
            Condition -> temperature [°C] for every condition with a single
            plausible value
        """
        explicit: List[Tuple[str, float]] = []
        generic: List[Tuple[str, float]] = []
        for label, value in values.items():
            if not value:
                continue
            spec = self.specs[label]
            if spec.column_class == ColumnClass.GENERIC:
                spec = self._generic_spec(pid, spec, label)
                if spec is None:
                    continue
                generic.append((spec.condition, _TO_CELSIUS[spec.unit](value)))
            else:
                explicit.append((spec.condition, _TO_CELSIUS[spec.unit](value)))
        if explicit and generic:
            logger.debug(f"{pid}: explicit liquidus columns override {len(generic)} generic values")
        chosen = explicit or generic

        grouped: Dict[str, List[float]] = {}
        for condition, celsius in chosen:
            grouped.setdefault(condition, []).append(celsius)
        resolved = {}
        for condition in sorted(grouped):
            value = plausibility_filter(grouped[condition], self.cfg)
            if value is not None:
                resolved[condition] = value
        return resolved

    def transform(self, chunk: pd.DataFrame) -> PartResult:
        labels = list(self.specs)
        values = coerce_frame(chunk[labels])
        rows = []
        drops = {"no_liquidus": 0, "implausible_tliq": 0}
        added = 0
        for idx in chunk.index:
            row_values = values.loc[idx].to_dict() if labels else {}
            if not any(row_values.values()):
                drops["no_liquidus"] += 1
                continue
            resolved = self.consolidate_tliq(chunk.at[idx, ID_COLUMN], row_values)
            if not resolved:
                drops["implausible_tliq"] += 1
                continue
            added += len(resolved) - 1
            for condition, celsius in resolved.items():
                row = {oxide: chunk.at[idx, oxide] for oxide in self.oxides}
                row.update({
                    TLIQ_COLUMN: celsius,
                    CONDITION_COLUMN: condition,
                    ID_COLUMN: chunk.at[idx, ID_COLUMN],
                    UNIT_COLUMN: chunk.at[idx, UNIT_COLUMN],
                })
                rows.append(row)
        frame = pd.DataFrame(rows, columns=self.output_columns)
        return PartResult(frame=frame, drops=drops, added=added)


@dataclass
class LiquidusResult:
    """Outputs of the liquidus stage."""
    summary: PartRunSummary
    columns: List[str]
    report: ContributionsReport
    queued: int


def run_liquidus(input_path: Path,
                 out_dir: Path,
                 lexicon: CompoundLexicon,
                 dictionary: CurationDictionary,
                 cfg: LiquidusConfig,
                 filter_cfg: FilterConfig) -> LiquidusResult:
    """Build ``liquidus.csv`` from the filtered dataset."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    queue = CurationQueue(out_dir / "curation_queue.txt")
    standardizer = LiquidusStandardizer(read_header(input_path), lexicon, dictionary, cfg, queue)
    if standardizer.specs:
        logger.info(f"Liquidus columns: {', '.join(standardizer.specs)}")
    else:
        logger.warning(f"No liquidus columns in {input_path}")

    summary = run_parts(
        input_path, out_dir, "liquidus.csv", standardizer.output_columns,
        standardizer.transform, filter_cfg.chunk_size,
    )
    report = ContributionsReport.scan(summary.merged, [TLIQ_COLUMN], filter_cfg.chunk_size)
    report.write(out_dir / "contributions_by_patent.csv")
    return LiquidusResult(summary, list(standardizer.specs), report, standardizer.queued)

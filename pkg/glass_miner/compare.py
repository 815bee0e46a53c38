"""
Comparison of the extracted datasets against reference databases.

Compositions are compared through a canonical key (oxides sorted, amounts
rounded to a fixed precision, zero components omitted). On top of the keys
this module builds the subset report (compositions found in the patents and
absent from the references) and exports plot-ready tables: oxide relative
frequencies, property density histograms, Abbe diagram points, violin data
and patents per year. Nothing is rendered.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set
import logging
import re

import numpy as np
import pandas as pd

from .config import CompareConfig
from .curation import ABBE_COLUMN
from .exceptions import InputError
from .filter_core import coerce_frame, coerce_numeric, coerce_series
from .ingest import iter_records, publication_of
from .lexicon import CompoundLexicon
from .liquidus import TLIQ_COLUMN
from .resources import default_lexicon
from .tabular import ID_COLUMN

logger = logging.getLogger(__name__)

KEY_SEPARATOR = "|"
SOURCE_COLUMN = "source"
PATENTS = "Patents"
COMBINED = "Combined"
UNIQUE = "Unique"
TOTAL = "Total"
ND_COLUMN = "nD"

# Report column -> dataset column
REPORT_PROPERTIES = {
    "Liquidus Temperature": TLIQ_COLUMN,
    "Refractive Index": ND_COLUMN,
    "Abbe Number": ABBE_COLUMN,
}

PLOT_KINDS = ("abbe_diagram", "histogram", "oxide_freq", "violin", "years")


def dedup_key(row: Mapping[str, object], oxides: Optional[Iterable[str]] = None, precision: int = 2) -> str:
    """
    Canonical composition key: ``formula:value`` pairs joined by ``|``.

    Oxides are sorted lexicographically; amounts that round to zero at
    ``precision`` are omitted.
    """
    parts = []
    for oxide in sorted(row if oxides is None else oxides):
        value = round(coerce_numeric(row.get(oxide)), precision)
        if value == 0:
            continue
        parts.append(f"{oxide}:{value:.{precision}f}")
    return KEY_SEPARATOR.join(parts)


def composition_columns(frame: pd.DataFrame, lexicon: CompoundLexicon) -> List[str]:
    return [c for c in frame.columns if c in lexicon]


def frame_keys(frame: pd.DataFrame, oxides: Sequence[str], precision: int = 2) -> pd.Series:
    """Composition key of every row of ``frame``."""
    if frame.empty:
        return pd.Series([], index=frame.index, dtype=object)
    amounts = coerce_frame(frame[list(oxides)])
    return pd.Series(
        [dedup_key(row, oxides, precision) for row in amounts.to_dict(orient="records")],
        index=frame.index, dtype=object,
    )


@dataclass
class CompositionSet:
    """A dataset together with the key of every row."""
    name: str
    frame: pd.DataFrame
    oxides: List[str]
    keys: pd.Series

    @classmethod
    def from_frame(cls, name: str, frame: pd.DataFrame, lexicon: CompoundLexicon,
                   precision: int = 2) -> "CompositionSet":
        oxides = composition_columns(frame, lexicon)
        return cls(name, frame, oxides, frame_keys(frame, oxides, precision))

    @classmethod
    def from_csv(cls, name: str, paths: Sequence[Path], lexicon: CompoundLexicon,
                 precision: int = 2) -> "CompositionSet":
        """Load and stack one or more CSV files of the same basis."""
        frames = [pd.read_csv(p, dtype=str, keep_default_na=False, encoding="utf-8") for p in paths]
        frame = pd.concat(frames, ignore_index=True, sort=False).fillna("") if frames else pd.DataFrame()
        logger.debug(f"Loaded {len(frame)} rows for {name}")
        return cls.from_frame(name, frame, lexicon, precision)

    def key_set(self, prop: Optional[str] = None) -> Set[str]:
        """Distinct non-empty keys, restricted to rows reporting ``prop`` when given."""
        keys = self.keys
        if prop is not None:
            if prop not in self.frame.columns:
                return set()
            keys = keys[(coerce_series(self.frame[prop]) != 0).to_numpy()]
        return {k for k in keys if k}

    def __len__(self) -> int:
        return len(self.frame)


def subtract(dataset: pd.DataFrame,
             reference: pd.DataFrame,
             lexicon: Optional[CompoundLexicon] = None,
             precision: int = 2) -> pd.DataFrame:
    """Rows of ``dataset`` whose composition key does not occur in ``reference``."""
    if lexicon is None:
        lexicon = default_lexicon()
    keys = frame_keys(dataset, composition_columns(dataset, lexicon), precision)
    known = set(frame_keys(reference, composition_columns(reference, lexicon), precision))
    return dataset.loc[~keys.isin(known).to_numpy()]


@dataclass
class SubsetReport:
    """
    Distinct composition counts per source and per property.

    Rows: Combined, every reference, Patents, Patents–<reference> for every
    reference and Patents–Unique. Percentages are relative to Combined.
    """
    references: List[str]
    counts: Dict[str, Dict[str, int]] = field(default_factory=dict)

    @property
    def columns(self) -> List[str]:
        return [TOTAL] + list(REPORT_PROPERTIES)

    @property
    def rows(self) -> List[str]:
        return (
            [COMBINED] + self.references + [PATENTS]
            + [f"{PATENTS}–{ref}" for ref in self.references] + [f"{PATENTS}–{UNIQUE}"]
        )

    def count(self, row: str, column: str = TOTAL) -> int:
        return self.counts[row][column]

    def percentage(self, row: str, column: str = TOTAL) -> Optional[float]:
        combined = self.counts[COMBINED][column]
        if not combined:
            return None
        return 100.0 * self.counts[row][column] / combined

    def render(self, row: str, column: str) -> str:
        count = self.count(row, column)
        pct = self.percentage(row, column)
        if pct is None:
            return f"{count:,}"
        return f"{count:,} ({pct:.1f}%)"

    def label(self, row: str) -> str:
        """Display name; the combined row is named after its references (A+B)."""
        if row == COMBINED and self.references:
            return "+".join(self.references)
        return row

    def to_frame(self) -> pd.DataFrame:
        data = [[self.label(row)] + [self.render(row, col) for col in self.columns] for row in self.rows]
        return pd.DataFrame(data, columns=["Source"] + self.columns)

    def write(self, path: Path) -> Path:
        self.to_frame().to_csv(path, index=False, encoding="utf-8")
        return path


def subset_report(patents: CompositionSet, *references: CompositionSet) -> SubsetReport:
    """
    Count the patents' compositions against any number of references.

    Patents–<ref> = patents minus that reference; Patents–Unique = patents
    minus the union of all references.
    """
    report = SubsetReport([ref.name for ref in references])
    for column in report.columns:
        prop = REPORT_PROPERTIES.get(column)
        ref_sets = {ref.name: ref.key_set(prop) for ref in references}
        patent_set = patents.key_set(prop)
        combined = set().union(*ref_sets.values()) if ref_sets else set()

        report.counts.setdefault(COMBINED, {})[column] = len(combined)
        for name, keys in ref_sets.items():
            report.counts.setdefault(name, {})[column] = len(keys)
            report.counts.setdefault(f"{PATENTS}–{name}", {})[column] = len(patent_set - keys)
        report.counts.setdefault(PATENTS, {})[column] = len(patent_set)
        report.counts.setdefault(f"{PATENTS}–{UNIQUE}", {})[column] = len(patent_set - combined)
    return report


def oxide_relative_frequency(frame: pd.DataFrame,
                             oxides: Optional[Sequence[str]] = None,
                             top_n: Optional[int] = None) -> pd.Series:
    """
    Occurrences of each oxide (amount > 0) over all oxide occurrences.

    Returns:
        Series oxide -> fraction, sorted descending (ties keep column order),
        truncated to ``top_n`` entries when given
    """
    oxides = list(frame.columns) if oxides is None else list(oxides)
    occurrences = (coerce_frame(frame[oxides]) > 0).sum()
    total = int(occurrences.sum())
    if not total:
        return pd.Series(dtype=float)
    freq = (occurrences[occurrences > 0] / total).sort_values(ascending=False, kind="mergesort")
    return freq.head(top_n) if top_n else freq


def bin_edges(spec: Sequence[float]) -> np.ndarray:
    """Edges from ``[start, stop, step]``."""
    start, stop, step = (float(v) for v in spec)
    count = int(round((stop - start) / step))
    return np.linspace(start, start + count * step, count + 1)


def histogram_density(values: Iterable[float], edges: Sequence[float]) -> np.ndarray:
    """
    Density per bin, count / (N * width), N being the values inside the edges.

    Raises:
        InputError: For non-increasing edges or when no finite value falls
            inside the edges
    """
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or not np.all(np.diff(edges) > 0):
        raise InputError("Bin edges must be strictly increasing", parameter="bin_edges", value=list(edges))
    values = np.asarray(list(values), dtype=float)
    values = values[np.isfinite(values)]
    inside = values[(values >= edges[0]) & (values <= edges[-1])]
    if not inside.size:
        raise InputError("No finite values inside the bin range", parameter="values", value=values.size)
    density, _ = np.histogram(inside, bins=edges, density=True)
    return density


def _present(frame: pd.DataFrame, column: str) -> pd.Series:
    return coerce_series(frame[column])


def _abbe_diagram(datasets: Mapping[str, pd.DataFrame], **_) -> pd.DataFrame:
    frames = []
    for source, frame in datasets.items():
        if ND_COLUMN not in frame.columns or ABBE_COLUMN not in frame.columns:
            continue
        nd, abbe = _present(frame, ND_COLUMN), _present(frame, ABBE_COLUMN)
        mask = ((nd != 0) & (abbe != 0)).to_numpy()
        frames.append(pd.DataFrame({ND_COLUMN: nd[mask], ABBE_COLUMN: abbe[mask], SOURCE_COLUMN: source}))
    if not frames:
        raise InputError(f"abbe_diagram needs {ND_COLUMN} and {ABBE_COLUMN} columns", parameter="datasets")
    return pd.concat(frames, ignore_index=True)


def _histogram(datasets: Mapping[str, pd.DataFrame], prop: str, edges: Sequence[float], **_) -> pd.DataFrame:
    edges = np.asarray(edges, dtype=float)
    frames = []
    for source, frame in datasets.items():
        if prop not in frame.columns:
            continue
        values = _present(frame, prop)
        values = values[values != 0]
        if values.empty:
            continue
        density = histogram_density(values, edges)
        frames.append(pd.DataFrame({
            "bin_left": edges[:-1], "bin_right": edges[1:], "density": density, SOURCE_COLUMN: source,
        }))
    if not frames:
        raise InputError(f"No values for {prop}", parameter="prop", value=prop)
    return pd.concat(frames, ignore_index=True)


def _oxide_freq(datasets: Mapping[str, pd.DataFrame], lexicon: CompoundLexicon,
                top_n: Optional[int] = None, **_) -> pd.DataFrame:
    frames = []
    for source, frame in datasets.items():
        freq = oxide_relative_frequency(frame, composition_columns(frame, lexicon), top_n)
        frames.append(pd.DataFrame({"oxide": freq.index, "frequency": freq.to_numpy(), SOURCE_COLUMN: source}))
    return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=["oxide", "frequency", SOURCE_COLUMN])


def _violin(datasets: Mapping[str, pd.DataFrame], oxides: Sequence[str],
            prop: Optional[str] = None, **_) -> pd.DataFrame:
    frames = []
    for source, frame in datasets.items():
        if prop is not None:
            if prop not in frame.columns:
                continue
            frame = frame.loc[(_present(frame, prop) != 0).to_numpy()]
        for oxide in oxides:
            if oxide not in frame.columns:
                continue
            amounts = _present(frame, oxide)
            amounts = amounts[amounts > 0]
            frames.append(pd.DataFrame({"oxide": oxide, "amount": amounts.to_numpy(), SOURCE_COLUMN: source}))
    if not frames:
        return pd.DataFrame(columns=["oxide", "amount", SOURCE_COLUMN])
    return pd.concat(frames, ignore_index=True)


def _years(datasets: Mapping[str, pd.DataFrame], years: Mapping[str, int], **_) -> pd.DataFrame:
    frames = []
    for source, frame in datasets.items():
        if ID_COLUMN not in frame.columns:
            continue
        publications = {publication_of(pid) for pid in frame[ID_COLUMN] if pid}
        counts: Dict[int, int] = {}
        for pub in publications:
            year = years.get(pub)
            if year is None:
                logger.debug(f"No publication year for {pub}")
                continue
            counts[year] = counts.get(year, 0) + 1
        frames.append(pd.DataFrame({
            "year": sorted(counts), "patents": [counts[y] for y in sorted(counts)], SOURCE_COLUMN: source,
        }))
    if not frames:
        raise InputError(f"years needs a {ID_COLUMN} column", parameter="datasets")
    return pd.concat(frames, ignore_index=True)


_EXPORTERS = {
    "abbe_diagram": _abbe_diagram,
    "histogram": _histogram,
    "oxide_freq": _oxide_freq,
    "violin": _violin,
    "years": _years,
}


def export_plot_data(kind: str, datasets: Mapping[str, pd.DataFrame], **options) -> pd.DataFrame:
    """
    Long-format plot data with a ``source`` column naming the dataset.

    Args:
        kind: One of abbe_diagram, histogram, oxide_freq, violin, years
        datasets: Source name -> dataset
        **options: ``prop`` and ``edges`` (histogram), ``lexicon`` and ``top_n``
            (oxide_freq), ``oxides`` and optional ``prop`` (violin),
            ``years`` publication number -> year (years)

    Raises:
        InputError: For unknown kinds or missing required columns
    """
    exporter = _EXPORTERS.get(kind)
    if exporter is None:
        raise InputError(f"Unknown plot data kind. Available: {', '.join(PLOT_KINDS)}",
                         parameter="kind", value=kind)
    try:
        return exporter(datasets, **options)
    except TypeError as e:
        raise InputError(f"Invalid options for {kind}: {e}", parameter="options")


def publication_years(records_dir: Path) -> Dict[str, int]:
    """Publication number -> publication year for every serialized record."""
    years = {}
    for record in iter_records(records_dir):
        year = record.publication_year
        if year is not None:
            years[record.publication_number.upper()] = year
    return years


def _slug(label: str) -> str:
    return re.sub(r"[^0-9a-z]+", "_", label.lower()).strip("_")


@dataclass
class CompareResult:
    """Counters and outputs of the compare stage."""
    report: SubsetReport
    rows_in: int = 0
    rows_out: int = 0
    drops: Dict[str, int] = field(default_factory=dict)
    outputs: List[str] = field(default_factory=list)


def run_compare(patent_files: Sequence[Path],
                out_dir: Path,
                cfg: CompareConfig,
                lexicon: CompoundLexicon,
                years: Optional[Mapping[str, int]] = None) -> CompareResult:
    """
    Build the subset report and plot exports for the patents' datasets.

    ``patents_unique.csv`` keeps the first row of every distinct composition
    that no reference contains.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    precision = cfg.key_precision

    patents = CompositionSet.from_csv(PATENTS, patent_files, lexicon, precision)
    references = [
        CompositionSet.from_csv(name, [Path(path)], lexicon, precision)
        for name, path in cfg.references.items()
    ]
    report = subset_report(patents, *references)
    result = CompareResult(report=report, rows_in=len(patents))
    result.outputs.append(str(report.write(out_dir / "subset_report.csv")))

    known = set().union(*(ref.key_set() for ref in references)) if references else set()
    first = ~patents.keys.duplicated().to_numpy() & (patents.keys != "").to_numpy()
    distinct = patents.frame.loc[first]
    unique = distinct.loc[~patents.keys[first].isin(known).to_numpy()]
    result.rows_out = len(unique)
    empty = int((patents.keys == "").sum())
    result.drops = {
        "empty_composition": empty,
        "duplicate_key": len(patents) - empty - len(distinct),
        "in_reference": len(distinct) - len(unique),
    }
    unique_path = out_dir / "patents_unique.csv"
    unique.to_csv(unique_path, index=False, encoding="utf-8")
    result.outputs.append(str(unique_path))

    datasets = {PATENTS.lower(): patents.frame}
    datasets.update({ref.name: ref.frame for ref in references})

    exports = {
        "oxide_freq.csv": ("oxide_freq", {"lexicon": lexicon, "top_n": cfg.top_n}),
        "abbe_diagram.csv": ("abbe_diagram", {}),
        "violin.csv": ("violin", {"oxides": cfg.violin_oxides}),
        "patents_per_year.csv": ("years", {"years": dict(years or {})}),
    }
    for prop, spec in cfg.histogram_bins.items():
        exports[f"hist_{_slug(prop)}.csv"] = ("histogram", {"prop": prop, "edges": bin_edges(spec)})

    for filename, (kind, options) in exports.items():
        try:
            frame = export_plot_data(kind, datasets, **options)
        except InputError as e:
            logger.warning(f"Skipping {filename}: {e}")
            continue
        path = out_dir / filename
        frame.to_csv(path, index=False, encoding="utf-8")
        result.outputs.append(str(path))

    logger.info(
        f"Compared {len(patents)} patent rows against {len(references)} references: "
        f"{report.count(f'{PATENTS}–{UNIQUE}')} unique compositions"
    )
    return result

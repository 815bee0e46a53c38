"""
Composition basis resolution and mol% <-> wt% conversion.

Rows whose document-level unit label is ``both`` or ``none`` get their basis
from the curated patent lists; rows that stay uncertain are written to an
audit file for manual inspection and left out of the converted datasets.
Every resolved dataset is emitted twice, on a molar and on a mass basis.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple
import logging
import re
import threading

import numpy as np
import pandas as pd

from .consolidate import read_header
from .curation import BASIS_VALUES, CurationDictionary
from .exceptions import ConfigurationError, ConversionError
from .filter_core import coerce_frame, read_chunks
from .ingest import patent_url, publication_of
from .lexicon import CompoundLexicon
from .tabular import ID_COLUMN, UNIT_COLUMN

logger = logging.getLogger(__name__)

MOL = "mol"
MASS = "mass"

# Standard atomic weights [g/mol], abridged to the elements of the oxide lexicon
ATOMIC_WEIGHTS: Dict[str, float] = {
    "H": 1.008, "Li": 6.94, "Be": 9.0122, "B": 10.81, "C": 12.011, "N": 14.007,
    "O": 15.999, "F": 18.998, "Na": 22.990, "Mg": 24.305, "Al": 26.982, "Si": 28.085,
    "P": 30.974, "S": 32.06, "Cl": 35.45, "K": 39.098, "Ca": 40.078, "Sc": 44.956,
    "Ti": 47.867, "V": 50.942, "Cr": 51.996, "Mn": 54.938, "Fe": 55.845, "Co": 58.933,
    "Ni": 58.693, "Cu": 63.546, "Zn": 65.38, "Ga": 69.723, "Ge": 72.630, "As": 74.922,
    "Se": 78.971, "Rb": 85.468, "Sr": 87.62, "Y": 88.906, "Zr": 91.224, "Nb": 92.906,
    "Mo": 95.95, "Ag": 107.87, "Cd": 112.41, "In": 114.82, "Sn": 118.71, "Sb": 121.76,
    "Te": 127.60, "Cs": 132.91, "Ba": 137.33, "La": 138.91, "Ce": 140.12, "Pr": 140.91,
    "Nd": 144.24, "Sm": 150.36, "Eu": 151.96, "Gd": 157.25, "Tb": 158.93, "Dy": 162.50,
    "Ho": 164.93, "Er": 167.26, "Tm": 168.93, "Yb": 173.05, "Lu": 174.97, "Hf": 178.49,
    "Ta": 180.95, "W": 183.84, "Au": 196.97, "Tl": 204.38, "Pb": 207.2, "Bi": 208.98,
    "Th": 232.04, "U": 238.03,
}

_ELEMENT = re.compile(r"([A-Z][a-z]?)(\d*)")


def formula_molar_mass(formula: str) -> float:
    """
    Molar mass of a simple formula such as ``Al2O3`` [g/mol], 3 decimals.

    Raises:
        ConversionError: For unparseable formulas or unknown elements
    """
    total = 0.0
    pos = 0
    for match in _ELEMENT.finditer(formula or ""):
        if match.start() != pos:
            break
        element, count = match.group(1), match.group(2)
        if element not in ATOMIC_WEIGHTS:
            raise ConversionError(f"Unknown element '{element}'", oxide=formula)
        total += ATOMIC_WEIGHTS[element] * (int(count) if count else 1)
        pos = match.end()
    if not formula or pos != len(formula):
        raise ConversionError("Unparseable formula", oxide=formula)
    return round(total, 3)


@dataclass
class MolarMassTable:
    """Oxide formula -> molar mass [g/mol]."""
    masses: Dict[str, float]

    def __post_init__(self):
        invalid = [k for k, v in self.masses.items() if not v > 0]
        if invalid:
            raise ConfigurationError(f"Non-positive molar masses: {', '.join(invalid)}")

    @classmethod
    def from_file(cls, path: Path, lexicon: Optional[CompoundLexicon] = None) -> "MolarMassTable":
        """
        Load a two-column (formula, g/mol) text file.

        Raises:
            ConfigurationError: If the file is missing, malformed or does not
                cover every lexicon oxide (the missing ones are listed)
        """
        path = Path(path)
        if not path.is_file():
            raise ConfigurationError(f"Molar-mass file not found: {path}")
        masses: Dict[str, float] = {}
        with open(path, "r", encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                parts = line.split()
                try:
                    masses[parts[0]] = float(parts[1])
                except (IndexError, ValueError):
                    raise ConfigurationError(f"Malformed molar-mass line {lineno}: {line!r}", path=str(path))
        table = cls(masses)
        if lexicon is not None:
            missing = table.missing(lexicon)
            if missing:
                raise ConfigurationError(
                    f"Molar masses missing for {len(missing)} lexicon oxides: {', '.join(missing)}",
                    path=str(path),
                )
        logger.debug(f"Loaded {len(table)} molar masses from {path}")
        return table

    def missing(self, compounds) -> List[str]:
        return [c for c in compounds if c not in self.masses]

    def __getitem__(self, formula: str) -> float:
        return self.masses[formula]

    def __contains__(self, formula: str) -> bool:
        return formula in self.masses

    def __len__(self) -> int:
        return len(self.masses)

    def get(self, formula: str, default: Optional[float] = None) -> Optional[float]:
        return self.masses.get(formula, default)


class AuditLog:
    """
    Serialized writer of ``<patent url> → <uncertain label>`` lines.

    The file is truncated when the log is opened (one audit per run).
    """

    def __init__(self, path: Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._handle = open(self.path, "w", encoding="utf-8")
        self.count = 0

    def record(self, patent_id: str, label: str) -> None:
        line = f"{patent_url(publication_of(patent_id))} → {label}\n"
        with self._lock:
            self._handle.write(line)
            self.count += 1

    def close(self) -> None:
        self._handle.close()

    def __enter__(self) -> "AuditLog":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.close()


def adjust_uncertain_units(table: pd.DataFrame,
                           dictionary: CurationDictionary,
                           audit: Optional[AuditLog] = None) -> pd.DataFrame:
    """
    Resolve ``both``/``none`` unit labels through the curated basis lists.

    Rows still uncertain afterwards are recorded in ``audit`` and removed.
    Rows already labeled mol or mass are not touched.
    """
    unit = table[UNIT_COLUMN].fillna("").astype(str).str.strip().str.lower()
    uncertain = ~unit.isin(BASIS_VALUES)
    curated = table[ID_COLUMN].map(dictionary.basis_for)
    held = uncertain & curated.isna()

    if audit is not None:
        for pid, label in zip(table.loc[held, ID_COLUMN], unit[held]):
            audit.record(pid, label or "none")

    resolved = table.loc[~held].copy()
    resolved[UNIT_COLUMN] = unit[~held].mask(uncertain[~held], curated[~held])
    return resolved


def _convert_array(amounts: np.ndarray, masses: np.ndarray, to_basis: str) -> np.ndarray:
    """Row-wise basis conversion of an (n, k) amount array, normalized to 100 and rounded."""
    with np.errstate(divide="ignore", invalid="ignore"):
        weights = amounts * masses if to_basis == MASS else amounts / masses
    weights = np.where(amounts == 0, 0.0, weights)
    totals = weights.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.round(weights / totals * 100.0, 2)


def _convert_row(row: Mapping[str, float], masses: MolarMassTable, to_basis: str) -> Dict[str, float]:
    oxides = list(row)
    amounts = np.array([[float(row[o] or 0.0) for o in oxides]])
    for oxide, amount in zip(oxides, amounts[0]):
        if amount and oxide not in masses:
            raise ConversionError(f"No molar mass for {oxide}", oxide=oxide)
    if not amounts.any():
        raise ConversionError("Composition has no non-zero component")
    weights = np.array([masses.get(o, 1.0) for o in oxides])
    converted = _convert_array(amounts, weights, to_basis)[0]
    return {o: float(v) for o, v in zip(oxides, converted)}


def mass_to_mol(row: Mapping[str, float], masses: MolarMassTable) -> Dict[str, float]:
    """wt% -> mol%: y_i = (x_i / M_i) / sum_j(x_j / M_j) * 100, two decimals."""
    return _convert_row(row, masses, MOL)


def mol_to_mass(row: Mapping[str, float], masses: MolarMassTable) -> Dict[str, float]:
    """mol% -> wt%: y_i = (x_i * M_i) / sum_j(x_j * M_j) * 100, two decimals."""
    return _convert_row(row, masses, MASS)


def convert_frame(compositions: pd.DataFrame,
                  masses: MolarMassTable,
                  to_basis: str) -> Tuple[pd.DataFrame, pd.Series]:
    """
    Vectorized conversion of composition rows.

    Returns:
        (converted amounts, mask of rows that could not be converted)
    """
    oxides = list(compositions.columns)
    amounts = compositions.to_numpy(dtype=float)
    weights = np.array([masses.get(o, np.nan) for o in oxides], dtype=float)
    unknown = np.isnan(weights)
    failed = (amounts[:, unknown] != 0).any(axis=1) | ~(amounts != 0).any(axis=1)
    converted = _convert_array(amounts, np.where(unknown, 1.0, weights), to_basis)
    converted[failed] = np.nan
    return (
        pd.DataFrame(converted, index=compositions.index, columns=oxides),
        pd.Series(failed, index=compositions.index),
    )


@dataclass
class DualBasis:
    """Mirrored datasets plus the rows that failed conversion."""
    mol: pd.DataFrame
    mass: pd.DataFrame
    errors: List[Dict[str, str]] = field(default_factory=list)


def emit_dual_basis(table: pd.DataFrame,
                    masses: MolarMassTable,
                    oxides: Optional[Sequence[str]] = None) -> DualBasis:
    """
    Produce molar-basis and mass-basis versions of a resolved dataset.

    Rows already on a basis are copied untouched into that output; the other
    output gets their conversion. Property fields are never changed and the
    unit column is dropped from both outputs. Rows that cannot be converted
    are left out of both and reported in ``errors``.
    """
    oxides = [c for c in table.columns if c in masses] if oxides is None else list(oxides)
    unit = table[UNIT_COLUMN].astype(str)
    mol_out = table.drop(columns=[UNIT_COLUMN]).astype(object)
    mass_out = mol_out.copy()
    errors: List[Dict[str, str]] = []
    failed = pd.Series(False, index=table.index)

    unresolved = ~unit.isin(BASIS_VALUES)
    for pid in table.loc[unresolved, ID_COLUMN]:
        errors.append({ID_COLUMN: pid, "oxide": "", "message": "unresolved basis"})
    failed |= unresolved

    for source, target, out in ((MOL, MASS, mass_out), (MASS, MOL, mol_out)):
        rows = unit == source
        if not rows.any():
            continue
        compositions = coerce_frame(table.loc[rows, oxides])
        converted, bad = convert_frame(compositions, masses, target)
        for idx in bad[bad].index:
            amounts = compositions.loc[idx]
            missing = [o for o in oxides if amounts[o] != 0 and o not in masses]
            errors.append({
                ID_COLUMN: table.at[idx, ID_COLUMN],
                "oxide": ",".join(missing),
                "message": "no molar mass" if missing else "empty composition",
            })
        failed |= bad.reindex(table.index, fill_value=False)
        good = bad.index[~bad.to_numpy()]
        out.loc[good, oxides] = converted.loc[good].to_numpy(dtype=object)

    return DualBasis(mol=mol_out.loc[~failed], mass=mass_out.loc[~failed], errors=errors)


@dataclass
class BasisResult:
    """Counters and outputs of the basis stage."""
    rows_in: int = 0
    rows_out: int = 0
    drops: Dict[str, int] = field(default_factory=dict)
    outputs: List[str] = field(default_factory=list)
    audit_lines: int = 0


def _append(frame: pd.DataFrame, path: Path, first: bool) -> None:
    frame.to_csv(path, mode="w" if first else "a", header=first, index=False, encoding="utf-8")


def run_basis(datasets: Mapping[str, Path],
              out_dir: Path,
              dictionary: CurationDictionary,
              masses: MolarMassTable,
              lexicon: CompoundLexicon,
              chunk_size: int) -> BasisResult:
    """
    Emit ``<name>_molpct.csv`` and ``<name>_wtpct.csv`` for every dataset.

    Args:
        datasets: Dataset name (refractive_index, liquidus) -> CSV path
        out_dir: Stage directory
        dictionary: Curated basis lists
        masses: Molar-mass table
        lexicon: Identifies the composition columns
        chunk_size: Rows per chunk
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = BasisResult(drops={"uncertain_unit": 0, "conversion_error": 0})
    errors: List[Dict[str, str]] = []

    with AuditLog(out_dir / "uncertain_units.txt") as audit:
        for name, path in datasets.items():
            header = read_header(path)
            oxides = [c for c in header if c in lexicon]
            columns = [c for c in header if c != UNIT_COLUMN]
            mol_path = out_dir / f"{name}_molpct.csv"
            mass_path = out_dir / f"{name}_wtpct.csv"
            first = True
            for chunk in read_chunks(path, chunk_size):
                result.rows_in += len(chunk)
                resolved = adjust_uncertain_units(chunk, dictionary, audit)
                result.drops["uncertain_unit"] += len(chunk) - len(resolved)
                dual = emit_dual_basis(resolved, masses, oxides)
                result.drops["conversion_error"] += len(resolved) - len(dual.mol)
                errors.extend(dual.errors)
                _append(dual.mol.reindex(columns=columns), mol_path, first)
                _append(dual.mass.reindex(columns=columns), mass_path, first)
                result.rows_out += len(dual.mol)
                first = False
            if first:
                _append(pd.DataFrame(columns=columns), mol_path, True)
                _append(pd.DataFrame(columns=columns), mass_path, True)
            result.outputs.extend([str(mol_path), str(mass_path)])
        result.audit_lines = audit.count

    errors_path = out_dir / "conversion_errors.csv"
    pd.DataFrame(errors, columns=[ID_COLUMN, "oxide", "message"]).to_csv(errors_path, index=False, encoding="utf-8")
    result.outputs.append(str(errors_path))
    if result.audit_lines:
        logger.warning(f"{result.audit_lines} rows with uncertain basis held back, see {audit.path}")
    return result

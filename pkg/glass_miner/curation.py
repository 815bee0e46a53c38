"""
Curation dictionary for heterogeneous property columns.

The dictionary normalizes labels into standardized target columns, holds a
blacklist of false-positive columns and carries the curated per-patent lists
(patent -> wavelength, temperature unit/condition, composition basis).
On disk it is one JSON document; the per-patent maps are stored grouped by
target, the way curators maintain them::

    {
      "label_map": {"liq. c": "Tliq(°C)"},
      "blacklist": ["density"],
      "patent_wavelength_map": {"nD": ["US11485676B2"]},
      "patent_unit_map": {"Tliq(°C)": ["US11485676B2"]},
      "patent_basis_map": {"mol": ["US10106455B2"], "mass": []}
    }
"""

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Any
import json
import logging

from .exceptions import CurationError
from .ingest import ControlList, publication_of
from .lexicon import normalize_text

logger = logging.getLogger(__name__)


class WavelengthTarget(Enum):
    """Standardized refractive-index columns."""
    ND = "nD"
    NG = "nG"
    NF = "nF"
    NH = "nH"
    NC = "nC"

    @property
    def nanometers(self) -> float:
        return _WAVELENGTH_NM[self]


_WAVELENGTH_NM = {
    WavelengthTarget.ND: 589.3,
    WavelengthTarget.NG: 435.8,
    WavelengthTarget.NF: 486.13,
    WavelengthTarget.NH: 404.7,
    WavelengthTarget.NC: 656.3,
}


class TliqTarget(Enum):
    """Standardized liquidus-temperature columns."""
    CELSIUS = "Tliq(°C)"
    AIR = "Tliq Air(°C)"
    PLATINUM = "Tliq Platinum(°C)"
    FAHRENHEIT = "Tliq(°F)"
    KELVIN = "Tliq(K)"


ABBE_COLUMN = "Abbe Number"

_TARGET_COLUMNS = (
    {t.value for t in WavelengthTarget}
    | {t.value for t in TliqTarget}
    | {ABBE_COLUMN}
)

BASIS_VALUES = ("mol", "mass")


class ColumnClass(Enum):
    """Classes of candidate property columns."""
    EXPLICIT = "explicit_unit"  # unit or wavelength declared
    GENERIC = "generic"  # no declaration; resolved per patent
    FALSE_POSITIVE = "false_positive"  # blacklisted


@dataclass
class CurationDictionary:
    """
    Curated label and patent mappings.

    Attributes:
        label_map: Normalized label -> standardized target column
        blacklist: Normalized labels of false-positive columns
        patent_wavelength_map: Publication number -> nD/nG/nF/nH/nC
        patent_unit_map: Publication number -> liquidus target column
        patent_basis_map: Publication number -> mol/mass
    """
    label_map: Dict[str, str] = field(default_factory=dict)
    blacklist: List[str] = field(default_factory=list)
    patent_wavelength_map: Dict[str, str] = field(default_factory=dict)
    patent_unit_map: Dict[str, str] = field(default_factory=dict)
    patent_basis_map: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.label_map = {normalize_text(k): v for k, v in self.label_map.items()}
        self.blacklist = sorted({normalize_text(b) for b in self.blacklist})
        self.patent_wavelength_map = {k.upper(): v for k, v in self.patent_wavelength_map.items()}
        self.patent_unit_map = {k.upper(): v for k, v in self.patent_unit_map.items()}
        self.patent_basis_map = {k.upper(): v for k, v in self.patent_basis_map.items()}
        self._validate()

    def _validate(self) -> None:
        overlap = set(self.label_map) & set(self.blacklist)
        if overlap:
            raise CurationError(f"Labels both mapped and blacklisted: {', '.join(sorted(overlap))}")
        for label, target in self.label_map.items():
            if target not in _TARGET_COLUMNS:
                raise CurationError(f"Unknown target column '{target}'", label=label)
        wavelengths = {t.value for t in WavelengthTarget}
        for pub, target in self.patent_wavelength_map.items():
            if target not in wavelengths:
                raise CurationError(f"Unknown wavelength target '{target}'", patent=pub)
        temperatures = {t.value for t in TliqTarget}
        for pub, target in self.patent_unit_map.items():
            if target not in temperatures:
                raise CurationError(f"Unknown liquidus target '{target}'", patent=pub)
        for pub, basis in self.patent_basis_map.items():
            if basis not in BASIS_VALUES:
                raise CurationError(f"Unknown basis '{basis}'", patent=pub)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CurationDictionary":
        """
        Build from the on-disk layout (per-patent maps grouped by target).

        Raises:
            CurationError: When one patent is listed under two targets of one map
        """
        def ungroup(name: str) -> Dict[str, str]:
            flat: Dict[str, str] = {}
            for target, patents in (data.get(name) or {}).items():
                for pub in patents:
                    pub = pub.strip().upper()
                    if flat.get(pub, target) != target:
                        raise CurationError(
                            f"Patent listed under two targets in {name}", patent=pub
                        )
                    flat[pub] = target
            return flat

        return cls(
            label_map=dict(data.get("label_map") or {}),
            blacklist=list(data.get("blacklist") or []),
            patent_wavelength_map=ungroup("patent_wavelength_map"),
            patent_unit_map=ungroup("patent_unit_map"),
            patent_basis_map=ungroup("patent_basis_map"),
        )

    def to_dict(self) -> Dict[str, Any]:
        """Convert to the on-disk layout with sorted lists."""
        def group(flat: Dict[str, str]) -> Dict[str, List[str]]:
            grouped: Dict[str, List[str]] = {}
            for pub, target in sorted(flat.items()):
                grouped.setdefault(target, []).append(pub)
            return dict(sorted(grouped.items()))

        return {
            "label_map": dict(sorted(self.label_map.items())),
            "blacklist": list(self.blacklist),
            "patent_wavelength_map": group(self.patent_wavelength_map),
            "patent_unit_map": group(self.patent_unit_map),
            "patent_basis_map": group(self.patent_basis_map),
        }

    @classmethod
    def load(cls, path: Path) -> "CurationDictionary":
        """
        Load a dictionary JSON document.

        Raises:
            CurationError: If the file is missing, not JSON or inconsistent
        """
        path = Path(path)
        if not path.is_file():
            raise CurationError(f"Curation dictionary not found: {path}")
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise CurationError(f"Invalid JSON in {path}: {e}")
        dictionary = cls.from_dict(data)
        logger.debug(
            f"Loaded curation dictionary: {len(dictionary.label_map)} labels, "
            f"{len(dictionary.blacklist)} blacklisted"
        )
        return dictionary

    def dump(self, path: Path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, ensure_ascii=False)
            f.write("\n")

    def target_for(self, label: str) -> Optional[str]:
        return self.label_map.get(normalize_text(label))

    def is_blacklisted(self, label: str) -> bool:
        return normalize_text(label) in self.blacklist

    def wavelength_for(self, patent_id: str) -> Optional[str]:
        return self.patent_wavelength_map.get(publication_of(patent_id))

    def unit_for(self, patent_id: str) -> Optional[str]:
        return self.patent_unit_map.get(publication_of(patent_id))

    def basis_for(self, patent_id: str) -> Optional[str]:
        return self.patent_basis_map.get(publication_of(patent_id))


class CurationQueue(ControlList):
    """Pairs ``patent_id<TAB>label`` awaiting expert mapping."""

    def add_pair(self, patent_id: str, label: str) -> bool:
        return self.add(f"{patent_id}\t{label}")

"""
Text normalization and the oxide compound lexicon.

``normalize_text`` is the single normalization used for labels, cells and
lexicon matching: diacritics and compatibility forms are folded (subscript
digits become ASCII digits), case is folded and whitespace collapsed.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Iterator
import logging
import re
import unicodedata

from .exceptions import ConfigurationError

logger = logging.getLogger(__name__)

_WHITESPACE = re.compile(r"\s+")
# Unit/basis decorations stripped before a label is looked up as a compound
_LABEL_DECORATION = re.compile(
    r"\(.*?\)|\[.*?\]|%|\b(?:mol|mole|wt|weight|mass|by)\b\.?",
)


def normalize_text(s: str) -> str:
    """
    Normalize a string for matching.

    Strips diacritics, maps compatibility characters (subscripts, superscripts,
    full-width forms) to their plain equivalents, lowercases and collapses
    whitespace. Idempotent.

    Args:
        s: Any string

    Returns:
        Normalized string
    """
    if not s:
        return ""
    # Compatibility decomposition can yield uppercase ("𝐀" -> "A") and casefolding
    # can yield combining marks ("İ" -> "i̇"), so repeat until stable.
    text, previous = s, None
    while text != previous:
        previous = text
        folded = unicodedata.normalize("NFKD", text).casefold()
        text = "".join(ch for ch in folded if not unicodedata.combining(ch))
    return _WHITESPACE.sub(" ", text).strip()


def _key(s: str) -> str:
    return normalize_text(s).replace(" ", "")


@dataclass
class CompoundLexicon:
    """
    Ordered list of canonical oxide formulas plus an alias map.

    The alias map goes from normalized surface forms to the canonical formula
    and always contains every canonical form mapped to itself.
    """
    compounds: List[str]
    aliases: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.compounds)) != len(self.compounds):
            raise ConfigurationError("Lexicon contains duplicate compounds")
        merged: Dict[str, str] = {}
        for surface, canonical in self.aliases.items():
            if canonical not in self.compounds:
                raise ConfigurationError(
                    f"Alias '{surface}' points to unknown compound '{canonical}'"
                )
            merged[_key(surface)] = canonical
        for compound in self.compounds:
            merged[_key(compound)] = compound
        self.aliases = merged
        alternatives = sorted(self.aliases, key=len, reverse=True)
        self._pattern = re.compile(
            r"(?<![a-z0-9])(" + "|".join(re.escape(a) for a in alternatives) + r")(?![a-z0-9])"
        )

    @classmethod
    def from_file(cls, path: Path) -> "CompoundLexicon":
        """
        Load a lexicon file.

        One canonical formula per line, optionally followed by tab-separated
        alias forms. Blank lines and ``#`` comments are ignored.

        Raises:
            ConfigurationError: If the file is missing or empty
        """
        path = Path(path)
        if not path.is_file():
            raise ConfigurationError(f"Lexicon file not found: {path}")
        compounds: List[str] = []
        aliases: Dict[str, str] = {}
        with open(path, "r", encoding="utf-8") as f:
            for line in f:
                line = line.split("#", 1)[0].rstrip()
                if not line.strip():
                    continue
                parts = [p.strip() for p in line.split("\t") if p.strip()]
                canonical = parts[0]
                compounds.append(canonical)
                for alias in parts[1:]:
                    aliases[alias] = canonical
        if not compounds:
            raise ConfigurationError(f"Lexicon file is empty: {path}")
        logger.debug(f"Loaded {len(compounds)} compounds from {path}")
        return cls(compounds, aliases)

    def canonical(self, label: str) -> Optional[str]:
        """
        Resolve a column label to a canonical compound.

        ``"SiO₂ (mol%)"`` and ``"sio2"`` both resolve to ``SiO2``; labels that
        are not a single compound (``"Na2O + K2O"``, ``"density"``) give None.
        """
        if label is None:
            return None
        key = _key(label)
        if key in self.aliases:
            return self.aliases[key]
        bare = _LABEL_DECORATION.sub(" ", normalize_text(label))
        bare = bare.replace(" ", "")
        return self.aliases.get(bare)

    def find_all(self, text: str) -> List[str]:
        """Canonical compounds mentioned in free text, in order of appearance."""
        if not text:
            return []
        return [self.aliases[m.group(1)] for m in self._pattern.finditer(normalize_text(text))]

    def mentions_any(self, text: str) -> bool:
        return self._pattern.search(normalize_text(text or "")) is not None

    def __len__(self) -> int:
        return len(self.compounds)

    def __contains__(self, compound: str) -> bool:
        return compound in self.compounds

    def __iter__(self) -> Iterator[str]:
        return iter(self.compounds)

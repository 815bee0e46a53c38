"""
Loader for the data files shipped with the package.

Simple loading with two-level priority:
1. glass_miner/data/* (shipped with package)
2. user files named in the pipeline configuration (optional)

A user file replaces the shipped default of the same kind.
"""

import logging
from pathlib import Path
from typing import Optional, Dict, Any

from .basis import MolarMassTable
from .curation import CurationDictionary
from .exceptions import ConfigurationError
from .lexicon import CompoundLexicon

logger = logging.getLogger(__name__)

DATA_DIR = Path(__file__).parent / "data"
DEFAULT_LEXICON = DATA_DIR / "oxides.txt"
DEFAULT_MOLAR_MASSES = DATA_DIR / "molar_masses.tsv"
DEFAULT_CURATION = DATA_DIR / "curation_seed.json"


class ResourceLoader:
    """Loader for lexicon, molar masses and curation dictionary."""

    def __init__(self,
                 lexicon_file: Optional[str] = None,
                 molar_mass_file: Optional[str] = None,
                 curation_file: Optional[str] = None):
        """
        Initialize resource loader.

        Args:
            lexicon_file: User lexicon (None = shipped oxides.txt)
            molar_mass_file: User molar-mass table (None = shipped molar_masses.tsv)
            curation_file: User curation dictionary (None = shipped seed)
        """
        self.lexicon_path = self._pick(lexicon_file, DEFAULT_LEXICON, "lexicon")
        self.molar_mass_path = self._pick(molar_mass_file, DEFAULT_MOLAR_MASSES, "molar masses")
        self.curation_path = self._pick(curation_file, DEFAULT_CURATION, "curation dictionary")
        self._cache: Dict[str, Any] = {}

    @staticmethod
    def _pick(user: Optional[str], default: Path, kind: str) -> Path:
        if user is None:
            if not default.exists():
                raise ConfigurationError(
                    f"Default {kind} not found: {default}\n"
                    f"This file should be shipped with the package."
                )
            return default
        logger.info(f"Using user {kind} file {user}")
        return Path(user)

    def lexicon(self, force_reload: bool = False) -> CompoundLexicon:
        if force_reload or "lexicon" not in self._cache:
            self._cache["lexicon"] = CompoundLexicon.from_file(self.lexicon_path)
        return self._cache["lexicon"]

    def molar_masses(self, force_reload: bool = False) -> MolarMassTable:
        """
        Molar-mass table checked for coverage of the active lexicon.

        Raises:
            ConfigurationError: If lexicon oxides are missing from the table
        """
        if force_reload or "molar_masses" not in self._cache:
            self._cache["molar_masses"] = MolarMassTable.from_file(
                self.molar_mass_path, lexicon=self.lexicon()
            )
        return self._cache["molar_masses"]

    def curation(self, force_reload: bool = False) -> CurationDictionary:
        if force_reload or "curation" not in self._cache:
            self._cache["curation"] = CurationDictionary.load(self.curation_path)
        return self._cache["curation"]

    @classmethod
    def from_config(cls, config) -> "ResourceLoader":
        return cls(config.lexicon_file, config.molar_mass_file, config.curation_file)


# Global singleton instance (shipped defaults)
_loader: Optional[ResourceLoader] = None


def get_resource_loader() -> ResourceLoader:
    """Get global ResourceLoader instance over the shipped data files (singleton)."""
    global _loader
    if _loader is None:
        _loader = ResourceLoader()
    return _loader


def default_lexicon() -> CompoundLexicon:
    """Convenience function returning the shipped oxide lexicon."""
    return get_resource_loader().lexicon()

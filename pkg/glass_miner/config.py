"""
Configuration for the glass patent mining pipeline.

Holds every tunable of the pipeline: paths, fetch policy, header heuristics,
filter thresholds, liquidus plausibility range and comparison settings.

A pipeline configuration is loaded from a single JSON file whose nested
objects map onto the sub-configurations below; CLI flags override file values.
Data files (lexicon, molar masses, curation dictionary) default to the copies
shipped in ``glass_miner/data``.
"""

from dataclasses import dataclass, field, fields, asdict
from enum import Enum
from pathlib import Path
from typing import Optional, Dict, Any, List
import json
import logging

from .exceptions import ConfigurationError

logger = logging.getLogger(__name__)


class FetchPolicy(Enum):
    """How the ingest stage obtains patent pages."""
    OFFLINE_ONLY = "offline_only"  # only the local corpus is read
    FETCH_IF_MISSING = "fetch_if_missing"  # download pages missing from the corpus


class PatentIdStyle(Enum):
    """Rendering of block identifiers."""
    BLOCK = "block"  # us11485676b2_block_12
    SHORT = "short"  # us11485676b2_b12


DEFAULT_PROPERTY_KEYWORDS = [
    "refractive", "abbe", "liquidus", "cte", "nd",
    "tliq", "νd", "vd", "n",
]

DEFAULT_PROPERTY_PATTERNS = [
    r"refract",
    r"abbe",
    r"liquidus",
    r"t\s*_?\s*liq",
    r"(?<!\w)liq(?!\w)",
    r"(?<!\w)tl(?!\w)",
    r"(?<!\w)n(?!\w)",
    r"(?<!\w)n\s*[_-]?\s*[dfgch](?!\w)",
    r"ν",
    r"(?<!\w)v\s*d(?!\w)",
    r"(?<!\w)cte(?!\w)",
    r"expansion",
    r"density",
    r"(?<!\w)tg(?!\w)",
]

DEFAULT_HISTOGRAM_BINS = {
    "Tliq(°C)": [400.0, 2000.0, 50.0],
    "nD": [1.40, 2.30, 0.02],
    "Abbe Number": [10.0, 100.0, 2.0],
}

DEFAULT_VIOLIN_OXIDES = ["SiO2", "B2O3", "Bi2O3", "Nb2O5", "TiO2", "La2O3"]


@dataclass
class HeuristicConfig:
    """
    Header heuristics for block acceptance.

    Attributes:
        property_keywords: Keywords of which one must appear in the header region
        min_compounds: Minimum lexicon compounds in the composition header row
        max_columns: Maximum number of columns in an accepted block
        max_label_length: Maximum length of a single header label
        table_section_tags: Element names holding patent table sections
        patent_id_style: Rendering of block identifiers (block/short)
    """
    property_keywords: List[str] = field(default_factory=lambda: list(DEFAULT_PROPERTY_KEYWORDS))
    min_compounds: int = 2
    max_columns: int = 64
    max_label_length: int = 120
    table_section_tags: List[str] = field(default_factory=lambda: ["patent-tables"])
    patent_id_style: PatentIdStyle = PatentIdStyle.BLOCK

    def __post_init__(self):
        if isinstance(self.patent_id_style, str):
            self.patent_id_style = PatentIdStyle(self.patent_id_style)
        if self.min_compounds < 1:
            raise ConfigurationError(f"min_compounds must be >= 1, got {self.min_compounds}")
        if self.max_columns < 2:
            raise ConfigurationError(f"max_columns must be >= 2, got {self.max_columns}")
        if self.max_label_length < 1:
            raise ConfigurationError(f"max_label_length must be >= 1, got {self.max_label_length}")
        if not self.property_keywords:
            raise ConfigurationError("property_keywords cannot be empty")
        if not self.table_section_tags:
            raise ConfigurationError("table_section_tags cannot be empty")


@dataclass
class FilterConfig:
    """
    Closure and property-presence filter settings.

    Attributes:
        closure_target: Expected composition sum [%]
        closure_tolerance: Accepted deviation from the target [%]
        chunk_size: Rows per processed chunk
        property_patterns: Regular expressions selecting property columns
    """
    closure_target: float = 100.0
    closure_tolerance: float = 0.5
    chunk_size: int = 10000
    property_patterns: List[str] = field(default_factory=lambda: list(DEFAULT_PROPERTY_PATTERNS))

    def __post_init__(self):
        if self.closure_tolerance <= 0:
            raise ConfigurationError(f"closure_tolerance must be positive, got {self.closure_tolerance}")
        if self.chunk_size < 1:
            raise ConfigurationError(f"chunk_size must be >= 1, got {self.chunk_size}")


@dataclass
class LiquidusConfig:
    """Plausibility range for liquidus temperatures [°C], both ends inclusive."""
    min_celsius: float = 450.0
    max_celsius: float = 1900.0

    def __post_init__(self):
        if self.min_celsius >= self.max_celsius:
            raise ConfigurationError(
                f"min_celsius ({self.min_celsius}) must be below max_celsius ({self.max_celsius})"
            )


@dataclass
class CompareConfig:
    """
    Comparison and report settings.

    Attributes:
        references: Reference dataset name -> CSV path
        key_precision: Decimals used by the composition key
        top_n: Number of oxides in the frequency export
        histogram_bins: Property -> [start, stop, step] of the bin edges
        violin_oxides: Oxides exported for violin plots
    """
    references: Dict[str, str] = field(default_factory=dict)
    key_precision: int = 2
    top_n: int = 20
    histogram_bins: Dict[str, List[float]] = field(default_factory=lambda: dict(DEFAULT_HISTOGRAM_BINS))
    violin_oxides: List[str] = field(default_factory=lambda: list(DEFAULT_VIOLIN_OXIDES))

    def __post_init__(self):
        if not (0 <= self.key_precision <= 6):
            raise ConfigurationError(f"key_precision must be in [0, 6], got {self.key_precision}")
        if self.top_n < 1:
            raise ConfigurationError(f"top_n must be >= 1, got {self.top_n}")
        for prop, spec in self.histogram_bins.items():
            if len(spec) != 3 or spec[2] <= 0 or spec[0] >= spec[1]:
                raise ConfigurationError(f"Invalid histogram bins for {prop}: {spec}")


@dataclass
class PipelineConfig:
    """
    Configuration of the whole pipeline.

    Attributes:
        url_list: Plain-text URL list (ingest input)
        corpus_dir: Offline HTML corpus / fetch cache
        output_dir: Root of every stage output
        lexicon_file: Oxide lexicon (None = shipped default)
        curation_file: Curation dictionary JSON (None = shipped seed)
        molar_mass_file: Molar-mass table (None = shipped default)
        fetch_policy: offline_only / fetch_if_missing
        request_delay: Minimum delay between requests to one host [s]
        request_timeout: HTTP timeout [s]
        max_workers: Parallel fetch workers
    """
    url_list: Optional[str] = None
    corpus_dir: str = "corpus"
    output_dir: str = "output"
    lexicon_file: Optional[str] = None
    curation_file: Optional[str] = None
    molar_mass_file: Optional[str] = None

    fetch_policy: FetchPolicy = FetchPolicy.OFFLINE_ONLY
    request_delay: float = 2.0
    request_timeout: float = 30.0
    max_workers: int = 4

    heuristics: HeuristicConfig = field(default_factory=HeuristicConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    liquidus: LiquidusConfig = field(default_factory=LiquidusConfig)
    compare: CompareConfig = field(default_factory=CompareConfig)

    def __post_init__(self):
        """Validate and initialize after instance creation."""
        if isinstance(self.fetch_policy, str):
            try:
                self.fetch_policy = FetchPolicy(self.fetch_policy)
            except ValueError:
                available = ", ".join(p.value for p in FetchPolicy)
                raise ConfigurationError(
                    f"Unknown fetch policy: {self.fetch_policy}. Available: {available}"
                )
        self._validate_config()

    def _validate_config(self) -> None:
        """
        Validate configuration parameters.

        Raises:
            ConfigurationError: If parameters have invalid values or files are missing
        """
        if self.request_delay < 0:
            raise ConfigurationError(f"request_delay cannot be negative, got {self.request_delay}")
        if self.request_timeout <= 0:
            raise ConfigurationError(f"request_timeout must be positive, got {self.request_timeout}")
        if self.max_workers < 1:
            raise ConfigurationError(f"max_workers must be >= 1, got {self.max_workers}")

        referenced = {
            "url_list": self.url_list,
            "lexicon_file": self.lexicon_file,
            "curation_file": self.curation_file,
            "molar_mass_file": self.molar_mass_file,
        }
        referenced.update({f"reference:{k}": v for k, v in self.compare.references.items()})
        for name, path in referenced.items():
            if path is not None and not Path(path).is_file():
                raise ConfigurationError(f"Referenced file does not exist: {path}", field=name)

    @property
    def chunk_size(self) -> int:
        return self.filter.chunk_size

    @property
    def out(self) -> Path:
        return Path(self.output_dir)

    @classmethod
    def from_dict(cls, data: Dict[str, Any], base_dir: Optional[Path] = None) -> "PipelineConfig":
        """
        Build a configuration from a parsed JSON document.

        Relative paths are resolved against ``base_dir`` (the config file's directory).

        Raises:
            ConfigurationError: On unknown keys or invalid values
        """
        nested = {
            "heuristics": HeuristicConfig,
            "filter": FilterConfig,
            "liquidus": LiquidusConfig,
            "compare": CompareConfig,
        }
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"Unknown configuration keys: {', '.join(sorted(unknown))}")

        kwargs: Dict[str, Any] = {}
        for key, value in data.items():
            if key in nested:
                sub_cls = nested[key]
                sub_known = {f.name for f in fields(sub_cls)}
                sub_unknown = set(value) - sub_known
                if sub_unknown:
                    raise ConfigurationError(
                        f"Unknown keys in '{key}': {', '.join(sorted(sub_unknown))}"
                    )
                if key == "compare" and base_dir is not None:
                    value = dict(value)
                    value["references"] = {
                        name: str(_resolve(base_dir, p))
                        for name, p in value.get("references", {}).items()
                    }
                try:
                    kwargs[key] = sub_cls(**value)
                except TypeError as e:
                    raise ConfigurationError(f"Invalid '{key}' section: {e}")
            elif key in ("url_list", "corpus_dir", "output_dir", "lexicon_file",
                         "curation_file", "molar_mass_file") and value is not None and base_dir is not None:
                kwargs[key] = str(_resolve(base_dir, value))
            else:
                kwargs[key] = value
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str) -> "PipelineConfig":
        """Load a configuration JSON file."""
        config_path = Path(path)
        if not config_path.is_file():
            raise ConfigurationError(f"Configuration file not found: {path}")
        try:
            with open(config_path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"Invalid JSON in {path}: {e}")
        if not isinstance(data, dict):
            raise ConfigurationError(f"Configuration root must be an object: {path}")
        logger.debug(f"Loaded configuration from {config_path}")
        return cls.from_dict(data, base_dir=config_path.parent)

    def to_dict(self) -> Dict[str, Any]:
        """
        Convert configuration to a dictionary.

        Returns:
            JSON-serializable dict of configuration parameters
        """
        data = asdict(self)
        data["fetch_policy"] = self.fetch_policy.value
        data["heuristics"]["patent_id_style"] = self.heuristics.patent_id_style.value
        return data

    def __str__(self) -> str:
        """String representation of the configuration."""
        return (
            f"PipelineConfig(out={self.output_dir}, "
            f"policy={self.fetch_policy.value}, "
            f"chunk={self.chunk_size}, "
            f"closure={self.filter.closure_target:g}±{self.filter.closure_tolerance:g}, "
            f"references={len(self.compare.references)})"
        )


def _resolve(base_dir: Path, value: str) -> Path:
    path = Path(value)
    return path if path.is_absolute() else base_dir / path


DEFAULT_CONFIG = PipelineConfig()

"""
Glass composition-property mining from patent tables.

This package turns patent pages into ML-ready glass datasets: it extracts
table sections, detects composition tables, merges them, filters closed
compositions with reported properties, standardizes refractive index, Abbe
number and liquidus temperature, converts compositions between mol% and wt%
and compares the result against reference databases.

Main components:
    Pipeline: Stage orchestration over one PipelineConfig
    PipelineConfig: Paths, fetch policy, heuristics and thresholds
    CompoundLexicon: Canonical oxide names and their aliases
    CurationDictionary: Curated label and per-patent mappings

Quick example:
    from glass_miner import Pipeline, PipelineConfig

    config = PipelineConfig.from_file("pipeline.json")
    for report in Pipeline(config).run("all"):
        print(report.stage, report.rows_in, report.rows_out, report.drops)
"""

from .config import (
    CompareConfig,
    DEFAULT_CONFIG,
    FetchPolicy,
    FilterConfig,
    HeuristicConfig,
    LiquidusConfig,
    PatentIdStyle,
    PipelineConfig,
)
from .curation import ColumnClass, CurationDictionary
from .lexicon import CompoundLexicon, normalize_text
from .basis import MolarMassTable, mass_to_mol, mol_to_mass
from .pipeline import Pipeline, StageReport, run_stage
from .exceptions import (
    MinerError,
    ConfigurationError,
    InputError,
    FetchError,
    ExtractionError,
    ConsolidationError,
    CurationError,
    ConversionError,
    StageError,
    MissingInputError,
)

__version__ = "1.0.0"

__all__ = [
    "Pipeline",
    "StageReport",
    "run_stage",
    "PipelineConfig",
    "HeuristicConfig",
    "FilterConfig",
    "LiquidusConfig",
    "CompareConfig",
    "FetchPolicy",
    "PatentIdStyle",
    "DEFAULT_CONFIG",
    "CompoundLexicon",
    "normalize_text",
    "CurationDictionary",
    "ColumnClass",
    "MolarMassTable",
    "mass_to_mol",
    "mol_to_mass",
    "MinerError",
    "ConfigurationError",
    "InputError",
    "FetchError",
    "ExtractionError",
    "ConsolidationError",
    "CurationError",
    "ConversionError",
    "StageError",
    "MissingInputError",
]

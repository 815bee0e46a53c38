"""
Stage orchestration.

Each stage reads the outputs of the previous one from the output directory,
writes its own outputs and appends one JSON line to ``run_report.jsonl``.
Stages run sequentially; ``all`` runs every stage in order.
"""

from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Any, Callable, Dict, List, Tuple
import json
import logging
import shutil
import time

from .basis import run_basis
from .compare import publication_years, run_compare
from .config import PipelineConfig
from .consolidate import consolidate_dir
from .exceptions import ConfigurationError, MinerError, MissingInputError, StageError
from .filter_core import run_chunked
from .ingest import PatentFetcher, ingest_urls, load_url_list
from .liquidus import run_liquidus
from .optics import run_optics
from .resources import ResourceLoader
from .tabular import extract_corpus, load_unit_labels

logger = logging.getLogger(__name__)

STAGES = ("ingest", "extract", "consolidate", "filter", "optics", "liquidus", "basis", "compare")
ALL = "all"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_FAILURE = 2


@dataclass
class StageReport:
    """
    Machine-readable outcome of one stage run.

    Every row is attributable: ``rows_in + rows_added == sum(drops) + rows_out``.
    """
    stage: str
    status: str = "ok"
    rows_in: int = 0
    rows_out: int = 0
    rows_added: int = 0
    drops: Dict[str, int] = field(default_factory=dict)
    wall_time_s: float = 0.0
    outputs: List[str] = field(default_factory=list)
    details: Dict[str, Any] = field(default_factory=dict)

    @property
    def balanced(self) -> bool:
        return self.rows_in + self.rows_added == sum(self.drops.values()) + self.rows_out

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


class StagePaths:
    """Locations of every stage output below the output directory."""

    def __init__(self, out: Path):
        self.out = Path(out)
        self.records = self.out / "records"
        self.control = self.out / "control"
        self.blocks = self.out / "blocks"
        self.unit_labels = self.out / "unit_labels.csv"
        self.consolidated = self.out / "consolidated.csv"
        self.filter = self.out / "filter"
        self.filtered = self.filter / "filtered.csv"
        self.optics = self.out / "optics"
        self.refractive_index = self.optics / "refractive_index.csv"
        self.liquidus = self.out / "liquidus"
        self.liquidus_dataset = self.liquidus / "liquidus.csv"
        self.basis = self.out / "basis"
        self.compare = self.out / "compare"
        self.run_report = self.out / "run_report.jsonl"

    def basis_output(self, dataset: str, suffix: str = "molpct") -> Path:
        return self.basis / f"{dataset}_{suffix}.csv"


class Pipeline:
    """
    Runs pipeline stages over one configuration.

    Example:
        pipeline = Pipeline(PipelineConfig.from_file("pipeline.json"))
        reports = pipeline.run(ALL)
    """

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.paths = StagePaths(config.out)
        self.resources = ResourceLoader.from_config(config)
        self._stages: Dict[str, Callable[[StageReport], None]] = {
            "ingest": self._ingest,
            "extract": self._extract,
            "consolidate": self._consolidate,
            "filter": self._filter,
            "optics": self._optics,
            "liquidus": self._liquidus,
            "basis": self._basis,
            "compare": self._compare,
        }

    def run(self, stage: str) -> List[StageReport]:
        """Run one stage, or every stage in order for ``all``."""
        names = STAGES if stage == ALL else (stage,)
        return [self.run_stage(name) for name in names]

    def run_stage(self, stage: str) -> StageReport:
        """
        Run a single stage and append its report to ``run_report.jsonl``.

        Raises:
            StageError: For unknown stages and stage failures
            MissingInputError: When an input of the stage does not exist
        """
        runner = self._stages.get(stage)
        if runner is None:
            raise StageError(f"Unknown stage. Available: {', '.join(STAGES)}, {ALL}", stage=stage)

        logger.info(f"Running stage '{stage}'")
        report = StageReport(stage=stage)
        start = time.perf_counter()
        try:
            runner(report)
        except MinerError as e:
            report.status = "failed"
            report.details["error"] = str(e)
            raise
        finally:
            report.wall_time_s = round(time.perf_counter() - start, 3)
            self._append_report(report)

        if not report.balanced:
            logger.error(
                f"Stage '{stage}' rows do not balance: in={report.rows_in} added={report.rows_added} "
                f"drops={sum(report.drops.values())} out={report.rows_out}"
            )
        logger.info(f"Stage '{stage}' done: {report.rows_out}/{report.rows_in} rows in {report.wall_time_s:.2f}s")
        return report

    def _append_report(self, report: StageReport) -> None:
        self.paths.out.mkdir(parents=True, exist_ok=True)
        with open(self.paths.run_report, "a", encoding="utf-8") as f:
            f.write(json.dumps(report.to_dict(), ensure_ascii=False) + "\n")

    @staticmethod
    def _require(stage: str, producer: str, path: Path) -> Path:
        if not Path(path).exists():
            raise MissingInputError(stage, producer, str(path))
        return path

    def _ingest(self, report: StageReport) -> None:
        cfg = self.config
        if not cfg.url_list:
            raise StageError("The ingest stage needs 'url_list' in the configuration", stage="ingest")
        urls = load_url_list(cfg.url_list)
        fetcher = PatentFetcher(cfg.corpus_dir, cfg.fetch_policy, cfg.request_delay, cfg.request_timeout)
        summary = ingest_urls(
            urls, fetcher, str(self.paths.records), str(self.paths.control),
            cfg.heuristics.table_section_tags, cfg.max_workers,
        )
        report.rows_in = summary.urls
        report.rows_out = summary.written + summary.skipped
        report.drops = {
            "rejected_url": summary.rejected,
            "fetch_failed": summary.failed,
            "absent_tables": summary.absent_tables,
        }
        report.outputs = [str(self.paths.records), str(self.paths.control)]
        report.details = {"written": summary.written, "skipped": summary.skipped, **fetcher.stats}

    def _extract(self, report: StageReport) -> None:
        self._require("extract", "ingest", self.paths.records)
        if self.paths.blocks.exists():
            shutil.rmtree(self.paths.blocks)
        summary = extract_corpus(
            self.paths.records, self.paths.blocks, self.paths.control, self.paths.unit_labels,
            self.resources.lexicon(), self.config.heuristics,
        )
        report.rows_in = summary.blocks
        report.rows_out = summary.accepted
        report.drops = dict(summary.rejects)
        report.outputs = [str(self.paths.blocks), str(self.paths.unit_labels)]
        report.details = {"records": summary.records, "irrelevant_records": summary.irrelevant}

    def _consolidate(self, report: StageReport) -> None:
        self._require("consolidate", "extract", self.paths.blocks)
        summary = consolidate_dir(self.paths.blocks, self.paths.consolidated, self.config.chunk_size)
        report.rows_in = summary.rows_read
        report.rows_out = summary.rows_written
        report.drops = {"empty_row": summary.rows_read - summary.rows_written}
        report.outputs = [str(self.paths.consolidated)]
        report.details = {
            "files": summary.files,
            "skipped_files": summary.skipped_files,
            "columns": summary.columns - summary.columns_pruned,
            "columns_pruned": summary.columns_pruned,
        }

    def _filter(self, report: StageReport) -> None:
        self._require("filter", "consolidate", self.paths.consolidated)
        result = run_chunked(
            self.paths.consolidated, self.config.filter, self.paths.filter,
            self.resources.lexicon(), load_unit_labels(self.paths.unit_labels),
        )
        summary = result.summary
        report.rows_in, report.rows_out, report.drops = summary.rows_in, summary.rows_out, dict(summary.drops)
        report.outputs = [str(summary.merged), str(result.report_path)]
        report.details = {
            "parts": len(summary.parts),
            "reused_parts": summary.reused,
            "sum_columns": list(result.layout.sums),
            "properties": list(result.layout.properties),
        }

    def _optics(self, report: StageReport) -> None:
        self._require("optics", "filter", self.paths.filtered)
        result = run_optics(
            self.paths.filtered, self.paths.optics, self.resources.lexicon(),
            self.resources.curation(), self.config.filter,
        )
        summary = result.summary
        report.rows_in, report.rows_out, report.drops = summary.rows_in, summary.rows_out, dict(summary.drops)
        report.outputs = [str(summary.merged), str(self.paths.optics / "contributions_by_patent.csv")]
        report.details = {"discarded_columns": result.discarded_columns, "queued_for_curation": result.queued}

    def _liquidus(self, report: StageReport) -> None:
        self._require("liquidus", "filter", self.paths.filtered)
        result = run_liquidus(
            self.paths.filtered, self.paths.liquidus, self.resources.lexicon(),
            self.resources.curation(), self.config.liquidus, self.config.filter,
        )
        summary = result.summary
        report.rows_in, report.rows_out, report.drops = summary.rows_in, summary.rows_out, dict(summary.drops)
        report.rows_added = summary.rows_added
        report.outputs = [str(summary.merged), str(self.paths.liquidus / "contributions_by_patent.csv")]
        report.details = {"liquidus_columns": result.columns, "queued_for_curation": result.queued}

    def _basis(self, report: StageReport) -> None:
        datasets = {
            "refractive_index": self._require("basis", "optics", self.paths.refractive_index),
            "liquidus": self._require("basis", "liquidus", self.paths.liquidus_dataset),
        }
        result = run_basis(
            datasets, self.paths.basis, self.resources.curation(), self.resources.molar_masses(),
            self.resources.lexicon(), self.config.chunk_size,
        )
        report.rows_in, report.rows_out, report.drops = result.rows_in, result.rows_out, dict(result.drops)
        report.outputs = result.outputs
        report.details = {"audit_lines": result.audit_lines}

    def _compare(self, report: StageReport) -> None:
        files = [
            self._require("compare", "basis", self.paths.basis_output(name))
            for name in ("refractive_index", "liquidus")
        ]
        years = publication_years(self.paths.records) if self.paths.records.exists() else {}
        result = run_compare(files, self.paths.compare, self.config.compare, self.resources.lexicon(), years)
        report.rows_in, report.rows_out, report.drops = result.rows_in, result.rows_out, dict(result.drops)
        report.outputs = result.outputs
        report.details = {
            "references": list(self.config.compare.references),
            "unique_compositions": result.report.count("Patents–Unique"),
        }


def run_stage(stage: str, config: PipelineConfig) -> Tuple[int, List[StageReport]]:
    """
    Run ``stage`` (or ``all``) and map the outcome to an exit status.

    Returns:
        (0 on success, 1 on configuration errors, 2 on stage failures; reports
        of the stages that completed)
    """
    reports: List[StageReport] = []
    try:
        pipeline = Pipeline(config)
        for name in (STAGES if stage == ALL else (stage,)):
            reports.append(pipeline.run_stage(name))
    except ConfigurationError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG, reports
    except MinerError as e:
        logger.error(f"Stage failure: {e}")
        return EXIT_FAILURE, reports
    return EXIT_OK, reports

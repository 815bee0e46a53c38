import unittest
import sys
import json
import tempfile
from pathlib import Path

import pandas as pd

# Ensure package import works when running tests from repo root
ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from glass_miner import MissingInputError, Pipeline, PipelineConfig, StageError, run_stage
from glass_miner.pipeline import STAGES, StagePaths

FIXTURES = Path(__file__).resolve().parent / "fixtures"


def fixture_config(out_dir: Path) -> PipelineConfig:
    return PipelineConfig(
        url_list=str(FIXTURES / "urls.txt"),
        corpus_dir=str(FIXTURES / "corpus"),
        output_dir=str(out_dir),
        fetch_policy="offline_only",
        max_workers=2,
    )


def report_lines(out_dir: Path):
    with open(StagePaths(out_dir).run_report, "r", encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


class TestEndToEnd(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls._tmp = tempfile.TemporaryDirectory()
        cls.out = Path(cls._tmp.name) / "out"
        cls.paths = StagePaths(cls.out)
        cls.reports = Pipeline(fixture_config(cls.out)).run("all")
        with open(FIXTURES / "golden_run_report.json", "r", encoding="utf-8") as f:
            cls.golden = json.load(f)

    @classmethod
    def tearDownClass(cls):
        cls._tmp.cleanup()

    def test_stage_counts_match_golden(self):
        self.assertEqual([r.stage for r in self.reports], list(STAGES))
        for report in self.reports:
            expected = self.golden[report.stage]
            with self.subTest(stage=report.stage):
                self.assertEqual(report.status, "ok")
                self.assertEqual(report.rows_in, expected["rows_in"])
                self.assertEqual(report.rows_out, expected["rows_out"])
                self.assertEqual(report.rows_added, expected["rows_added"])
                self.assertEqual(report.drops, expected["drops"])

    def test_every_row_accounted_for(self):
        for report in self.reports:
            self.assertTrue(report.balanced, report.stage)

    def test_run_report_file(self):
        lines = report_lines(self.out)
        self.assertEqual(len(lines), len(STAGES))
        self.assertEqual([line["stage"] for line in lines], list(STAGES))
        for line in lines:
            self.assertEqual(line["rows_in"] + line["rows_added"], sum(line["drops"].values()) + line["rows_out"])
            self.assertGreaterEqual(line["wall_time_s"], 0.0)

    def test_optics_values(self):
        optics = pd.read_csv(self.paths.refractive_index)
        row = optics.loc[optics["nD"] == 1.8046]
        self.assertEqual(len(row), 1)
        self.assertEqual(row["Abbe Number"].iloc[0], 40.6)
        # Generic n promoted through the curated wavelength list
        self.assertIn(1.95, optics["nD"].tolist())
        self.assertNotIn(-1.0, optics["nD"].tolist())

    def test_liquidus_values(self):
        liquidus = pd.read_csv(self.paths.liquidus_dataset)
        values = sorted(liquidus["Tliq(°C)"].tolist())
        self.assertEqual(values, [673.0, 689.0, 1000.0, 1000.0, 1100.0])
        self.assertTrue(liquidus["Tliq(°C)"].between(450, 1900).all())

    def test_uncertain_unit_audit(self):
        audit = (self.paths.basis / "uncertain_units.txt").read_text(encoding="utf-8")
        self.assertEqual(audit.splitlines(), ["https://patents.google.com/patent/US9000005B2/en → none"])

    def test_dual_basis_outputs(self):
        for name in ["refractive_index", "liquidus"]:
            mol = pd.read_csv(self.paths.basis_output(name, "molpct"))
            mass = pd.read_csv(self.paths.basis_output(name, "wtpct"))
            self.assertEqual(len(mol), len(mass))
            self.assertEqual(list(mol.columns), list(mass.columns))
            self.assertNotIn("unit", mol.columns)

    def test_compare_outputs(self):
        unique = pd.read_csv(self.paths.compare / "patents_unique.csv")
        self.assertEqual(len(unique), 8)
        report = pd.read_csv(self.paths.compare / "subset_report.csv")
        self.assertEqual(report["Source"].tolist(), ["Combined", "Patents", "Patents–Unique"])


class TestRerun(unittest.TestCase):
    def test_rerun_is_stable(self):
        with tempfile.TemporaryDirectory() as tmp:
            out = Path(tmp) / "out"
            paths = StagePaths(out)
            first = Pipeline(fixture_config(out)).run("all")
            basis_files = [
                paths.basis_output(name, suffix)
                for name in ["refractive_index", "liquidus"] for suffix in ["molpct", "wtpct"]
            ]
            before = {path: path.read_bytes() for path in basis_files}
            second = Pipeline(fixture_config(out)).run("all")

            for a, b in zip(first, second):
                self.assertEqual((a.rows_in, a.rows_out, a.rows_added, a.drops),
                                 (b.rows_in, b.rows_out, b.rows_added, b.drops), a.stage)
            self.assertEqual(second[0].details["skipped"], 8)
            self.assertEqual(second[3].details["reused_parts"], 1)
            for path in basis_files:
                self.assertEqual(path.read_bytes(), before[path], path.name)
            self.assertEqual(len(report_lines(out)), 2 * len(STAGES))


class TestStageErrors(unittest.TestCase):
    def test_missing_input_names_producer(self):
        with tempfile.TemporaryDirectory() as tmp:
            out = Path(tmp) / "out"
            pipeline = Pipeline(PipelineConfig(output_dir=str(out)))
            with self.assertRaises(MissingInputError) as ctx:
                pipeline.run_stage("consolidate")
            self.assertEqual(ctx.exception.producer, "extract")
            self.assertIn("run stage 'extract' first", str(ctx.exception))
            lines = report_lines(out)
            self.assertEqual(len(lines), 1)
            self.assertEqual(lines[0]["status"], "failed")

    def test_unknown_stage(self):
        with tempfile.TemporaryDirectory() as tmp:
            pipeline = Pipeline(PipelineConfig(output_dir=str(Path(tmp) / "out")))
            with self.assertRaises(StageError):
                pipeline.run_stage("render")

    def test_exit_status(self):
        with tempfile.TemporaryDirectory() as tmp:
            config = PipelineConfig(output_dir=str(Path(tmp) / "out"))
            status, reports = run_stage("ingest", config)
            self.assertEqual(status, 2)
            self.assertEqual(reports, [])
            status, reports = run_stage("basis", config)
            self.assertEqual(status, 2)


if __name__ == '__main__':
    unittest.main()

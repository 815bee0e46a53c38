import unittest
import sys
import math
import tempfile
from pathlib import Path

import pandas as pd

# Ensure package import works when running tests from repo root
ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from glass_miner import ColumnClass, CurationDictionary, FilterConfig
from glass_miner.curation import CurationQueue
from glass_miner.optics import (
    AMBIGUOUS, OpticsStandardizer, apply_blacklist, classify_column, merged_refractive_marker,
    plausible_n_columns, run_optics,
)
from glass_miner.resources import default_lexicon, get_resource_loader

HEADER = ["SiO2", "B2O3", "La2O3", "ZrO2", "nd", "n (589.3 nm)", "νd", "n", "patent_id", "unit"]


def frame(rows):
    return pd.DataFrame(rows, columns=HEADER, dtype=object)


class TestClassifyColumn(unittest.TestCase):
    def test_without_curation(self):
        empty = CurationDictionary()
        cases = {
            "nd": (ColumnClass.EXPLICIT, "nD"),
            "n_f": (ColumnClass.EXPLICIT, "nF"),
            "n (486.13 nm)": (ColumnClass.EXPLICIT, "nF"),
            "refractive index (656.3 nm)": (ColumnClass.EXPLICIT, "nC"),
            "νd": (ColumnClass.EXPLICIT, "Abbe Number"),
            "vd": (ColumnClass.EXPLICIT, "Abbe Number"),
            "abbe number": (ColumnClass.EXPLICIT, "Abbe Number"),
            "n": (ColumnClass.GENERIC, None),
            "refractive index": (ColumnClass.GENERIC, None),
            "n (587.6 nm)": (ColumnClass.GENERIC, None),
        }
        for label, (column_class, target) in cases.items():
            assignment = classify_column(label, empty)
            self.assertIsNotNone(assignment, label)
            self.assertEqual(assignment.column_class, column_class, label)
            self.assertEqual(assignment.target, target, label)
        for label in ["liquidus (°c)", "tliq (k)", "color", "index"]:
            self.assertIsNone(classify_column(label, empty), label)

    def test_curated_labels(self):
        seed = get_resource_loader().curation()
        mapped = classify_column("refractive index (587.6 nm ≈ d-line)", seed)
        self.assertEqual((mapped.column_class, mapped.target), (ColumnClass.EXPLICIT, "nD"))
        self.assertEqual(classify_column("n (587.6 nm)", seed).target, "nD")
        self.assertEqual(classify_column("density", seed).column_class, ColumnClass.FALSE_POSITIVE)
        self.assertIsNone(classify_column("liq. c", seed))


class TestMarkers(unittest.TestCase):
    def test_merged_refractive_marker(self):
        self.assertEqual(merged_refractive_marker([1.5, 0.0]), 1.5)
        self.assertEqual(merged_refractive_marker([1.5, 1.5]), 1.5)
        self.assertEqual(merged_refractive_marker([1.5, 1.6]), AMBIGUOUS)
        self.assertIsNone(merged_refractive_marker([0.0, float("nan")]))
        self.assertIsNone(merged_refractive_marker([]))

    def test_plausible_columns(self):
        table = pd.DataFrame({
            "n": ["1.52", "", "1.61"],
            "nd": ["1.5", "25", ""],
            "abbe": ["64", "40", ""],
            "n (486.13 nm)": ["", "", "0.9"],
        }, dtype=object)
        self.assertEqual(plausible_n_columns(table), ["n", "abbe"])
        self.assertEqual(plausible_n_columns(table, ["nd"]), [])


class TestBlacklist(unittest.TestCase):
    def test_rows_and_columns(self):
        dictionary = CurationDictionary(blacklist=["density"])
        table = pd.DataFrame({
            "SiO2": ["100", "100", "100"],
            "density": ["2.2", "2.5", ""],
            "nd": ["1.46", "", "1.47"],
            "patent_id": ["a", "b", "c"],
        }, dtype=object)
        result = apply_blacklist(table, dictionary, ["density", "nd"])
        self.assertEqual(list(result.columns), ["SiO2", "nd", "patent_id"])
        self.assertEqual(result["patent_id"].tolist(), ["a", "c"])
        self.assertIs(apply_blacklist(table, CurationDictionary(), ["density", "nd"]), table)


class TestStandardizer(unittest.TestCase):
    def setUp(self):
        self.lexicon = default_lexicon()
        self.seed = get_resource_loader().curation()

    def test_explicit_values_and_ambiguity(self):
        standardizer = OpticsStandardizer(HEADER, self.lexicon, self.seed)
        chunk = frame([
            ["12.32", "29.72", "54.73", "3.23", "1.8046", "", "40.6", "", "us20090122407a1_block_0", "mass"],
            ["50", "20", "30", "0", "1.81", "1.82", "", "", "us9000006b2_block_0", "mol"],
            ["50", "25", "25", "0", "1.80", "1.80", "", "", "us9000006b2_block_0", "mol"],
            ["70", "30", "0", "0", "", "", "", "", "us9000008b2_block_0", "mol"],
        ])
        result = standardizer.transform(chunk)
        out = result.frame
        self.assertEqual(result.drops, {"blacklisted": 0, "ambiguous_n": 1, "no_refractive_index": 1})
        self.assertEqual(len(out), 2)
        first = out.iloc[0]
        self.assertEqual(first["nD"], 1.8046)
        self.assertEqual(first["Abbe Number"], 40.6)
        self.assertEqual(out.iloc[1]["nD"], 1.80)
        self.assertNotIn(AMBIGUOUS, out["nD"].tolist())
        self.assertEqual(list(out.columns), standardizer.output_columns)

    def test_generic_values_follow_the_curated_patent_list(self):
        with tempfile.TemporaryDirectory() as tmp:
            queue = CurationQueue(Path(tmp) / "curation_queue.txt")
            standardizer = OpticsStandardizer(HEADER, self.lexicon, self.seed, queue)
            chunk = frame([
                ["40", "30", "20", "10", "", "", "18.6", "1.950", "us11485676b2_block_1", "mol"],
                ["40", "30", "20", "10", "", "", "", "1.700", "us9000009b2_block_0", "mol"],
                ["40", "30", "20", "10", "1.60", "", "", "1.950", "us11485676b2_block_1", "mol"],
            ])
            out = standardizer.transform(chunk).frame
            self.assertEqual(out["patent_id"].tolist(), ["us11485676b2_block_1", "us11485676b2_block_1"])
            self.assertEqual(out["nD"].tolist(), [1.95, 1.60])
            self.assertNotIn("n", out.columns)
            self.assertEqual(standardizer.queued, 1)
            self.assertIn("us9000009b2_block_0\tn", queue)

    def test_implausible_columns_discarded(self):
        header = ["SiO2", "n", "nd", "patent_id", "unit"]
        with tempfile.TemporaryDirectory() as tmp:
            source = Path(tmp) / "filtered.csv"
            source.write_text(
                "SiO2,n,nd,patent_id,unit\n"
                "100.0,12.0,1.46,us5b2_block_0,mol\n"
                "100.0,,1.47,us5b2_block_1,mol\n",
                encoding="utf-8",
            )
            standardizer = OpticsStandardizer(header, self.lexicon, CurationDictionary())
            self.assertEqual(standardizer.scan(source, chunk_size=1), ["n"])


class TestRunOptics(unittest.TestCase):
    def test_stage_outputs(self):
        with tempfile.TemporaryDirectory() as tmp:
            source = Path(tmp) / "filtered.csv"
            source.write_text(
                "SiO2,B2O3,nd,νd,density,patent_id,unit\n"
                "60.0,40.0,1.52,64.1,2.4,us5b2_block_0,mol\n"
                "70.0,30.0,,,2.3,us5b2_block_0,mol\n"
                "80.0,20.0,1.49,,,us6b2_block_2,mass\n",
                encoding="utf-8",
            )
            result = run_optics(source, Path(tmp) / "optics", default_lexicon(), get_resource_loader().curation(),
                                 FilterConfig(chunk_size=2))
            summary = result.summary
            self.assertEqual(summary.rows_in, 3)
            self.assertEqual(summary.rows_out, 2)
            self.assertEqual(summary.drops["blacklisted"], 1)
            out = pd.read_csv(summary.merged)
            self.assertEqual(list(out.columns[:3]), ["SiO2", "B2O3", "nD"])
            self.assertNotIn("density", out.columns)
            self.assertTrue(math.isnan(out["Abbe Number"].iloc[1]))
            contributions = pd.read_csv(Path(tmp) / "optics" / "contributions_by_patent.csv")
            self.assertEqual(set(contributions["property_label"]), {"nD", "Abbe Number"})


if __name__ == '__main__':
    unittest.main()

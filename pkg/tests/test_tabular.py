import unittest
import sys
import csv
import tempfile
from pathlib import Path

# Ensure package import works when running tests from repo root
ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from glass_miner import ExtractionError, FetchPolicy, HeuristicConfig, PatentIdStyle
from glass_miner.ingest import (
    PatentFetcher, PatentId, PatentRecord, extract_metadata, extract_table_sections,
    ingest_urls, load_url_list,
)
from glass_miner.resources import default_lexicon
from glass_miner.tabular import (
    ColumnarTable, RejectReason, UnitLabel, block_grid, block_to_table, detect_header,
    detect_unit_label, extract_corpus, extract_record, filter_relevant, load_unit_labels,
    split_blocks,
)

FIXTURES = Path(__file__).resolve().parent / "fixtures"


def read_csv_rows(path: Path):
    with open(path, encoding="utf-8", newline="") as f:
        return list(csv.reader(f))


def record_from(html: str, url: str) -> PatentRecord:
    record = extract_metadata(html, url)
    record.html_tables = extract_table_sections(html)
    return record


class TestGoldenExtraction(unittest.TestCase):
    def test_table2_block(self):
        html = (FIXTURES / "table2_patent.html").read_text(encoding="utf-8")
        record = record_from(html, "https://patents.google.com/patent/US11485676B2/en")
        config = HeuristicConfig(patent_id_style=PatentIdStyle.SHORT)
        result = extract_record(record, default_lexicon(), config)

        self.assertTrue(result.relevant)
        self.assertEqual(len(result.tables), 1)
        self.assertEqual(len(result.rejects), 12)
        self.assertTrue(all(reason == RejectReason.TOO_FEW_COMPOUNDS for _, reason in result.rejects))
        self.assertEqual(result.tables[0].source_id, PatentId("US11485676B2", 12))

        with tempfile.TemporaryDirectory() as tmp:
            path = result.tables[0].write_csv(Path(tmp), config.patent_id_style)
            self.assertEqual(path.name, "us11485676b2_b12.csv")
            self.assertEqual(read_csv_rows(path), read_csv_rows(FIXTURES / "golden_table2_block.csv"))

    def test_table2_header_at_index_zero(self):
        grid = [
            ["nb2o5", "p2o5", "na2o", "tio2", "k2o", "sro", "n", "tliq (°c)", "νd"],
            ["35.9", "22.1", "1.6", "15.0", "5.0", "2.1", "1.950", "673", "18.6"],
        ]
        decision = detect_header(grid, default_lexicon(), HeuristicConfig())
        self.assertTrue(decision.accepted)
        self.assertEqual(decision.index, 0)


class TestUnitLabel(unittest.TestCase):
    def test_document_level_evidence(self):
        mol = "<table><tr><td>Composition (mol%)</td></tr></table>"
        mass = "<table><tr><td>Composition (wt%)</td></tr></table>"
        by_weight = "<table><tr><td>% by weight</td></tr></table>"
        plain = "<table><tr><td>SiO2</td><td>Na2O</td></tr></table>"
        self.assertEqual(detect_unit_label([mol]), UnitLabel.MOL)
        self.assertEqual(detect_unit_label([mass]), UnitLabel.MASS)
        self.assertEqual(detect_unit_label([by_weight]), UnitLabel.MASS)
        self.assertEqual(detect_unit_label([mol, mass]), UnitLabel.BOTH)
        self.assertEqual(detect_unit_label([plain]), UnitLabel.NONE)
        self.assertEqual(detect_unit_label(["<table><tr><td>molybdenum</td></tr></table>"]), UnitLabel.NONE)


class TestBlocks(unittest.TestCase):
    def test_split_outer_tables_only(self):
        fragment = (
            "<patent-tables><table><tr><td>a</td><td><table><tr><td>inner</td></tr></table></td></tr></table>"
            "<table><tr><td>b</td></tr></table></patent-tables>"
        )
        blocks = split_blocks(fragment)
        self.assertEqual(len(blocks), 2)
        self.assertIn("inner", blocks[0])
        self.assertEqual(block_grid(blocks[0]), [["a", "inner"]])
        self.assertEqual(split_blocks("<table><tr>"), [])

    def test_grid_colspan_and_xml_entries(self):
        html = '<table><tr><td colspan="3">Composition (mol %)</td></tr><tr><th>SiO<sub>2</sub></th><td></td><td>x</td></tr></table>'
        self.assertEqual(block_grid(html), [
            ["composition (mol %)"] * 3,
            ["sio2", None, "x"],
        ])
        xml = "<table><row><entry>SiO2</entry><entry>B2O3</entry></row></table>"
        self.assertEqual(block_grid(xml), [["sio2", "b2o3"]])

    def test_ragged_rows_are_padded(self):
        grid = [["sio2", "na2o", "n"], ["70", "30"], ["60", "40", "1.5", "extra"]]
        table = block_to_table(grid, 0, PatentId("US1B2", 0))
        self.assertEqual(table.labels, ["sio2", "na2o", "n"])
        self.assertEqual(table.rows, [["70", "30", None], ["60", "40", "1.5"]])

    def test_columnar_table_rejects_wrong_width(self):
        with self.assertRaises(ExtractionError):
            ColumnarTable(labels=["a", "b"], rows=[["1"]], source_id=PatentId("US1B2", 0))


class TestDetectHeader(unittest.TestCase):
    def setUp(self):
        self.lexicon = default_lexicon()

    def test_reject_reasons(self):
        config = HeuristicConfig()
        no_compounds = [["sample", "hardness"], ["a", "520"]]
        self.assertEqual(detect_header(no_compounds, self.lexicon, config).reason, RejectReason.TOO_FEW_COMPOUNDS)
        self.assertEqual(detect_header([], self.lexicon, config).reason, RejectReason.TOO_FEW_COMPOUNDS)

        no_keyword = [["sio2", "al2o3", "color"], ["60", "40", "clear"]]
        self.assertEqual(detect_header(no_keyword, self.lexicon, config).reason, RejectReason.NO_PROPERTY_KEYWORD)

        narrow = HeuristicConfig(max_columns=3)
        wide = [["sio2", "al2o3", "na2o", "nd"]]
        self.assertEqual(detect_header(wide, self.lexicon, narrow).reason, RejectReason.WIDTH_EXCEEDED)

        short_labels = HeuristicConfig(max_label_length=5)
        long_label = [["sio2", "al2o3", "refractive index"]]
        self.assertEqual(detect_header(long_label, self.lexicon, short_labels).reason, RejectReason.WIDTH_EXCEEDED)

    def test_keyword_in_caption_row(self):
        grid = [["refractive index of glasses", ""], ["sio2", "na2o"], ["70", "30"]]
        decision = detect_header(grid, self.lexicon, HeuristicConfig())
        self.assertEqual(decision.index, 1)

    def test_short_keywords_are_tokens(self):
        grid = [["sio2", "na2o", "andesite"]]
        self.assertEqual(detect_header(grid, self.lexicon, HeuristicConfig()).reason,
                         RejectReason.NO_PROPERTY_KEYWORD)


class TestRelevance(unittest.TestCase):
    def test_alias_forms(self):
        lexicon = default_lexicon()
        keep = PatentRecord(url="u", html_tables=["<table><tr><td>SiO₂</td></tr></table>"])
        alias = PatentRecord(url="u", html_tables=["<table><tr><td>Silica content</td></tr></table>"])
        drop = PatentRecord(url="u", html_tables=["<table><tr><td>Hardness</td></tr></table>"])
        self.assertTrue(filter_relevant(keep, lexicon))
        self.assertTrue(filter_relevant(alias, lexicon))
        self.assertFalse(filter_relevant(drop, lexicon))


class TestExtractCorpus(unittest.TestCase):
    def test_fixture_corpus(self):
        with tempfile.TemporaryDirectory() as tmp:
            out = Path(tmp)
            fetcher = PatentFetcher(str(FIXTURES / "corpus"), FetchPolicy.OFFLINE_ONLY, delay_seconds=0)
            ingest_urls(load_url_list(str(FIXTURES / "urls.txt")), fetcher, str(out / "records"), str(out / "control"))

            summary = extract_corpus(out / "records", out / "blocks", out / "control", out / "unit_labels.csv",
                                     default_lexicon(), HeuristicConfig())
            self.assertEqual(summary.records, 8)
            self.assertEqual(summary.irrelevant, 1)
            self.assertEqual(summary.blocks, 8)
            self.assertEqual(summary.accepted, 6)
            self.assertEqual(summary.rejects, {"too_few_compounds": 1, "no_property_keyword": 1})

            names = sorted(p.name for p in (out / "blocks").glob("*.csv"))
            self.assertEqual(names, [
                "us10106455b2_block_0.csv", "us11485676b2_block_1.csv", "us20090122407a1_block_0.csv",
                "us9000005b2_block_0.csv", "us9000006b2_block_0.csv", "us9000007b2_block_0.csv",
            ])
            rows = read_csv_rows(out / "blocks" / "us11485676b2_block_1.csv")
            self.assertEqual(rows[0], ["nb2o5", "p2o5", "tio2", "na2o", "n", "tliq (°c)", "νd", "patent_id"])
            self.assertEqual(len(rows), 5)

            units = load_unit_labels(out / "unit_labels.csv")
            self.assertEqual(units["US11485676B2"], "mol")
            self.assertEqual(units["US20090122407A1"], "mass")
            self.assertEqual(units["US9000005B2"], "none")
            self.assertNotIn("US9000003B2", units)

            irrelevant = (out / "control" / "irrelevant_patents.txt").read_text(encoding="utf-8").split()
            self.assertEqual(irrelevant, ["US9000003B2"])
            rejected = (out / "control" / "rejected_blocks.tsv").read_text(encoding="utf-8").splitlines()
            self.assertIn("us11485676b2_block_0\ttoo_few_compounds", rejected)
            self.assertIn("us9000004b2_block_0\tno_property_keyword", rejected)

    def test_missing_unit_labels_file(self):
        self.assertEqual(load_unit_labels(Path("no/such/unit_labels.csv")), {})


if __name__ == '__main__':
    unittest.main()

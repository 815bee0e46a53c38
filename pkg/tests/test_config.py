import unittest
import sys
import json
import tempfile
from dataclasses import replace
from pathlib import Path

# Ensure package import works when running tests from repo root
ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from glass_miner import (
    CompareConfig, ConfigurationError, FetchPolicy, FilterConfig, HeuristicConfig,
    LiquidusConfig, PatentIdStyle, PipelineConfig,
)


class TestDefaults(unittest.TestCase):
    def test_documented_defaults(self):
        config = PipelineConfig()
        self.assertEqual(config.fetch_policy, FetchPolicy.OFFLINE_ONLY)
        self.assertEqual(config.filter.closure_target, 100.0)
        self.assertEqual(config.filter.closure_tolerance, 0.5)
        self.assertEqual(config.liquidus.min_celsius, 450.0)
        self.assertEqual(config.liquidus.max_celsius, 1900.0)
        self.assertEqual(config.heuristics.min_compounds, 2)
        self.assertEqual(config.heuristics.max_columns, 64)
        self.assertEqual(config.heuristics.max_label_length, 120)
        self.assertEqual(config.compare.key_precision, 2)
        for keyword in ["refractive", "abbe", "liquidus", "cte", "nd"]:
            self.assertIn(keyword, config.heuristics.property_keywords)

    def test_to_dict_is_json_serializable(self):
        data = PipelineConfig().to_dict()
        text = json.dumps(data)
        self.assertIn('"offline_only"', text)
        self.assertEqual(data["heuristics"]["patent_id_style"], "block")


class TestValidation(unittest.TestCase):
    def test_invalid_sub_configs(self):
        with self.assertRaises(ConfigurationError):
            FilterConfig(closure_tolerance=0)
        with self.assertRaises(ConfigurationError):
            FilterConfig(chunk_size=0)
        with self.assertRaises(ConfigurationError):
            LiquidusConfig(min_celsius=1900, max_celsius=450)
        with self.assertRaises(ConfigurationError):
            HeuristicConfig(min_compounds=0)
        with self.assertRaises(ConfigurationError):
            CompareConfig(key_precision=9)
        with self.assertRaises(ConfigurationError):
            CompareConfig(histogram_bins={"nD": [2.0, 1.0, 0.1]})

    def test_replace_revalidates(self):
        with self.assertRaises(ConfigurationError):
            replace(FilterConfig(), chunk_size=-5)

    def test_pipeline_values(self):
        with self.assertRaises(ConfigurationError):
            PipelineConfig(fetch_policy="sometimes")
        with self.assertRaises(ConfigurationError):
            PipelineConfig(max_workers=0)
        with self.assertRaises(ConfigurationError):
            PipelineConfig(url_list="missing/urls.txt")

    def test_string_enums_are_converted(self):
        config = PipelineConfig(fetch_policy="fetch_if_missing")
        self.assertEqual(config.fetch_policy, FetchPolicy.FETCH_IF_MISSING)
        self.assertEqual(HeuristicConfig(patent_id_style="short").patent_id_style, PatentIdStyle.SHORT)


class TestFromFile(unittest.TestCase):
    def test_relative_paths_resolve_against_config_dir(self):
        with tempfile.TemporaryDirectory() as tmp:
            base = Path(tmp)
            (base / "urls.txt").write_text("https://example.org/patent/US1B2/en\n", encoding="utf-8")
            (base / "ref.csv").write_text("SiO2,nD\n100,1.46\n", encoding="utf-8")
            (base / "pipeline.json").write_text(json.dumps({
                "url_list": "urls.txt",
                "output_dir": "runs/a",
                "filter": {"chunk_size": 500},
                "heuristics": {"patent_id_style": "short"},
                "compare": {"references": {"SciRef": "ref.csv"}},
            }), encoding="utf-8")
            config = PipelineConfig.from_file(str(base / "pipeline.json"))
            self.assertEqual(Path(config.url_list), base / "urls.txt")
            self.assertEqual(config.out, base / "runs" / "a")
            self.assertEqual(config.chunk_size, 500)
            self.assertEqual(config.heuristics.patent_id_style, PatentIdStyle.SHORT)
            self.assertEqual(Path(config.compare.references["SciRef"]), base / "ref.csv")

    def test_unknown_keys(self):
        with self.assertRaises(ConfigurationError):
            PipelineConfig.from_dict({"chunk": 10})
        with self.assertRaises(ConfigurationError):
            PipelineConfig.from_dict({"filter": {"closure": 100}})

    def test_bad_files(self):
        with tempfile.TemporaryDirectory() as tmp:
            bad = Path(tmp) / "bad.json"
            bad.write_text("{not json", encoding="utf-8")
            with self.assertRaises(ConfigurationError):
                PipelineConfig.from_file(str(bad))
            listed = Path(tmp) / "list.json"
            listed.write_text("[1, 2]", encoding="utf-8")
            with self.assertRaises(ConfigurationError):
                PipelineConfig.from_file(str(listed))
        with self.assertRaises(ConfigurationError):
            PipelineConfig.from_file("no/such/config.json")


if __name__ == '__main__':
    unittest.main()

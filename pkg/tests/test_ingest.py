import unittest
import sys
import json
import tempfile
from pathlib import Path
from unittest import mock

import requests

# Ensure package import works when running tests from repo root
ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from glass_miner import ExtractionError, FetchError, FetchPolicy, InputError, MinerError, PatentIdStyle
from glass_miner.ingest import (
    ControlList, HostRateLimiter, PatentFetcher, PatentId, PatentRecord, cache_key,
    extract_metadata, extract_table_sections, ingest_urls, iter_records, load_url_list,
    normalize_url, patent_url, publication_of, serialize_record, slice_elements,
)

FIXTURES = Path(__file__).resolve().parent / "fixtures"
CORPUS = FIXTURES / "corpus"
P1_URL = "https://patents.google.com/patent/US11485676B2/en"
P2_URL = "https://patents.google.com/patent/US10106455B2/en"
P1_CACHE = "a327a203071ed2cd938debfa756ff2a7e742179f9bc1b602917d9be48bf295fd.html"


def read_fixture(url: str) -> str:
    return (CORPUS / cache_key(url)).read_text(encoding="utf-8")


class FakeResponse:
    def __init__(self, content: bytes, status_code: int = 200):
        self.content = content
        self.status_code = status_code

    def raise_for_status(self):
        if self.status_code >= 400:
            raise requests.exceptions.HTTPError(f"{self.status_code} error")


class FakeSession:
    def __init__(self, responses):
        self.responses = list(responses)
        self.calls = []

    def get(self, url, timeout=None):
        self.calls.append(url)
        response = self.responses.pop(0)
        if isinstance(response, Exception):
            raise response
        return response


class TestUrlList(unittest.TestCase):
    def test_trim_blank_and_duplicates(self):
        urls = load_url_list(str(FIXTURES / "urls.txt"))
        self.assertEqual(len(urls), 11)
        self.assertEqual(urls[0], P1_URL)
        self.assertEqual(urls[5], "https://patents.google.com/patent/US9000003B2/en")
        self.assertEqual(urls[-1], "not-a-url")

    def test_missing_file(self):
        with self.assertRaises(InputError):
            load_url_list("no/such/list.txt")


class TestCacheKey(unittest.TestCase):
    def test_key_matches_corpus_file(self):
        self.assertEqual(cache_key(P1_URL), P1_CACHE)
        self.assertTrue((CORPUS / P1_CACHE).is_file())

    def test_equivalent_urls_share_a_key(self):
        self.assertEqual(cache_key(P1_URL + "#claims"), P1_CACHE)
        self.assertEqual(cache_key("https://PATENTS.google.com/patent/US11485676B2/en"), P1_CACHE)
        self.assertNotEqual(cache_key(P2_URL), P1_CACHE)

    def test_malformed_urls(self):
        for url in ["not-a-url", "ftp://example.org/x", "", "https:///path"]:
            with self.assertRaises(InputError):
                normalize_url(url)


class TestPatentId(unittest.TestCase):
    def test_parse_both_styles(self):
        pid = PatentId.parse("us11485676b2_b12")
        self.assertEqual(pid, PatentId("US11485676B2", 12))
        self.assertEqual(PatentId.parse("us11485676b2_block_12"), pid)
        self.assertEqual(pid.render(), "us11485676b2_block_12")
        self.assertEqual(pid.render(PatentIdStyle.SHORT), "us11485676b2_b12")

    def test_invalid_ids(self):
        for text in ["", "us11485676b2", "us-1_block_2", "us1_block_x"]:
            with self.assertRaises(InputError):
                PatentId.parse(text)
        with self.assertRaises(InputError):
            PatentId("US1B2", -1)

    def test_publication_helpers(self):
        self.assertEqual(publication_of("us9000005b2_block_0"), "US9000005B2")
        self.assertEqual(publication_of(" us9000005b2 "), "US9000005B2")
        self.assertEqual(patent_url("us9000005b2"), "https://patents.google.com/patent/US9000005B2/en")


class TestFetcher(unittest.TestCase):
    def test_offline_hit_and_miss(self):
        with tempfile.TemporaryDirectory() as tmp:
            failures = ControlList(Path(tmp) / "fetch_failures.txt")
            fetcher = PatentFetcher(str(CORPUS), FetchPolicy.OFFLINE_ONLY, failures=failures)
            html = fetcher.fetch_or_load(P1_URL)
            self.assertIn("US:11485676:B2", html)
            missing = "https://patents.google.com/patent/US9000002B2/en"
            self.assertIsNone(fetcher.fetch_or_load(missing))
            self.assertIn(missing, failures)
            self.assertEqual(fetcher.stats, {"cache_hits": 1, "fetched": 0, "failed": 1})

    def test_fetch_if_missing_caches(self):
        with tempfile.TemporaryDirectory() as tmp:
            session = FakeSession([FakeResponse(b"<html><body>page</body></html>")])
            fetcher = PatentFetcher(tmp, FetchPolicy.FETCH_IF_MISSING, delay_seconds=0, session=session)
            first = fetcher.fetch_or_load(P2_URL)
            second = fetcher.fetch_or_load(P2_URL)
            self.assertEqual(first, second)
            self.assertEqual(len(session.calls), 1)
            self.assertTrue((Path(tmp) / cache_key(P2_URL)).is_file())
            self.assertEqual(fetcher.stats["fetched"], 1)
            self.assertEqual(fetcher.stats["cache_hits"], 1)

    def test_fetch_errors_are_recorded_not_raised(self):
        with tempfile.TemporaryDirectory() as tmp:
            failures = ControlList(Path(tmp) / "fetch_failures.txt")
            session = FakeSession([
                requests.exceptions.ConnectionError("refused"),
                FakeResponse(b"", status_code=404),
            ])
            fetcher = PatentFetcher(tmp, FetchPolicy.FETCH_IF_MISSING, delay_seconds=0,
                                    failures=failures, session=session)
            self.assertIsNone(fetcher.fetch_or_load(P1_URL))
            self.assertIsNone(fetcher.fetch_or_load(P2_URL))
            self.assertEqual(len(failures), 2)
            self.assertFalse((Path(tmp) / cache_key(P1_URL)).exists())
            self.assertTrue(all(isinstance(e, FetchError) for e in fetcher.errors))
            self.assertEqual([e.url for e in fetcher.errors], [P1_URL, P2_URL])
            self.assertIn("ConnectionError: refused", str(fetcher.errors[0]))
            self.assertIn(f"url={P1_URL}", str(fetcher.errors[0]))

    def test_rate_limiter_backoff(self):
        limiter = HostRateLimiter(delay_seconds=1.0, max_delay=3.0)
        limiter.backoff()
        self.assertEqual(limiter.delay_seconds, 2.0)
        limiter.backoff()
        self.assertEqual(limiter.delay_seconds, 3.0)


class TestMetadata(unittest.TestCase):
    def test_meta_tags(self):
        record = extract_metadata(read_fixture(P1_URL), P1_URL)
        self.assertEqual(record.url, P1_URL)
        self.assertEqual(record.publication_number, "US11485676B2")
        self.assertEqual(record.title, "High refractive index phosphate glass")
        self.assertEqual(record.doc_type, "patent")
        self.assertEqual(record.application_number, "US:16/811,204")
        self.assertTrue(record.pdf_url.endswith("US11485676B2.pdf"))
        self.assertEqual(record.inventors, ["Ana Example", "Bo Sample"])
        self.assertEqual(record.assignee, "Example Glass Works")
        self.assertEqual(record.dates, ["2020-03-10", "2022-11-01"])
        self.assertEqual(record.publication_year, 2022)
        self.assertEqual(record.html_tables, [])

    def test_publication_from_url(self):
        record = extract_metadata(read_fixture(P2_URL), P2_URL)
        self.assertEqual(record.publication_number, "US10106455B2")
        self.assertEqual(record.inventors, ["Carla Example"])

    def test_missing_tags_give_empty_values(self):
        record = extract_metadata("<html><head></head></html>", "https://example.org/x")
        self.assertEqual(record.title, "")
        self.assertEqual(record.inventors, [])
        self.assertEqual(record.dates, [])
        self.assertIsNone(record.publication_year)

    def test_record_layout(self):
        record = PatentRecord(url=P1_URL, doc_type="patent", dates=["2020-03-10", "2022-11-01"])
        data = record.to_dict()
        self.assertEqual(list(data), [
            "url", "title", "type", "description", "application_number", "publication_number",
            "pdf_url", "inventors", "assignee", "date", "html_tables",
        ])
        self.assertEqual(PatentRecord.from_dict(data), record)


class TestTableSections(unittest.TestCase):
    def test_sections_are_verbatim_slices(self):
        html = read_fixture(P1_URL)
        sections = extract_table_sections(html)
        self.assertEqual(len(sections), 1)
        self.assertTrue(sections[0].startswith("<patent-tables>"))
        self.assertTrue(sections[0].endswith("</patent-tables>"))
        self.assertIn(sections[0], html)

    def test_page_without_sections(self):
        html = read_fixture("https://patents.google.com/patent/US9000001B2/en")
        self.assertEqual(extract_table_sections(html), [])

    def test_nested_elements_stay_inside(self):
        markup = "<table><tr><td><table><tr><td>x</td></tr></table></td></tr></table><p/><table></table>"
        slices = slice_elements(markup, "table")
        self.assertEqual(len(slices), 2)
        self.assertIn("<td>x</td>", slices[0])
        self.assertEqual(slices[1], "<table></table>")

    def test_unclosed_element(self):
        with self.assertRaises(ExtractionError):
            slice_elements("<table><tr><td>x</td></tr>", "table")
        self.assertEqual(extract_table_sections("<patent-tables><table>"), [])


class TestControlList(unittest.TestCase):
    def test_set_semantics_and_persistence(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "control" / "list.txt"
            control = ControlList(path)
            self.assertTrue(control.add("a"))
            self.assertFalse(control.add("a"))
            self.assertTrue(control.add("b\nc"))
            reopened = ControlList(path)
            self.assertEqual(len(reopened), 2)
            self.assertIn("b c", reopened)
            self.assertEqual(path.read_text(encoding="utf-8"), "a\nb c\n")


class TestIngestUrls(unittest.TestCase):
    def test_fixture_corpus(self):
        urls = load_url_list(str(FIXTURES / "urls.txt"))
        with tempfile.TemporaryDirectory() as tmp:
            records, control = Path(tmp) / "records", Path(tmp) / "control"
            fetcher = PatentFetcher(str(CORPUS), FetchPolicy.OFFLINE_ONLY, delay_seconds=0)
            summary = ingest_urls(urls, fetcher, str(records), str(control))
            self.assertEqual(summary.urls, 11)
            self.assertEqual(summary.rejected, 1)
            self.assertEqual(summary.failed, 1)
            self.assertEqual(summary.absent_tables, 1)
            self.assertEqual(summary.written, 8)
            self.assertEqual(summary.skipped, 0)

            names = sorted(p.name for p in records.glob("*.json"))
            self.assertEqual(len(names), 8)
            self.assertIn("US11485676B2.json", names)
            self.assertNotIn("US9000001B2.json", names)
            failures = (control / "fetch_failures.txt").read_text(encoding="utf-8").split()
            self.assertEqual(sorted(failures), sorted(["not-a-url", "https://patents.google.com/patent/US9000002B2/en"]))
            absent = (control / "absent_tables.txt").read_text(encoding="utf-8").split()
            self.assertEqual(absent, ["https://patents.google.com/patent/US9000001B2/en"])

            with open(records / "US11485676B2.json", encoding="utf-8") as f:
                data = json.load(f)
            self.assertEqual(data["publication_number"], "US11485676B2")
            self.assertEqual(len(data["html_tables"]), 1)

            again = ingest_urls(urls, PatentFetcher(str(CORPUS), delay_seconds=0), str(records), str(control))
            self.assertEqual(again.written, 0)
            self.assertEqual(again.skipped, 8)
            self.assertEqual(len(list(iter_records(records))), 8)

    def test_rerun_leaves_outputs_byte_identical(self):
        urls = load_url_list(str(FIXTURES / "urls.txt"))
        with tempfile.TemporaryDirectory() as tmp:
            records, control = Path(tmp) / "records", Path(tmp) / "control"

            def snapshot():
                return {
                    str(p.relative_to(tmp)): p.read_bytes()
                    for p in sorted(Path(tmp).rglob("*")) if p.is_file()
                }

            ingest_urls(urls, PatentFetcher(str(CORPUS), delay_seconds=0), str(records), str(control))
            first = snapshot()
            again = ingest_urls(urls, PatentFetcher(str(CORPUS), delay_seconds=0), str(records), str(control))
            self.assertEqual(again.skipped, 8)
            self.assertEqual(snapshot(), first)

    def test_serialize_requires_publication_number(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(InputError):
                serialize_record(PatentRecord(url="https://example.org/x"), tmp)

    def test_interrupted_write_leaves_no_record(self):
        record = PatentRecord(url=P1_URL, publication_number="US11485676B2", html_tables=["<table></table>"])

        def broken_dump(obj, f, **kwargs):
            f.write('{"url": ')
            raise OSError("disk full")

        with tempfile.TemporaryDirectory() as tmp:
            with mock.patch("glass_miner.ingest.json.dump", side_effect=broken_dump):
                with self.assertRaises(MinerError):
                    serialize_record(record, tmp)
            self.assertEqual(list(Path(tmp).iterdir()), [])

            path = serialize_record(record, tmp)
            self.assertEqual(path.name, "US11485676B2.json")
            self.assertEqual([r.publication_number for r in iter_records(Path(tmp))], ["US11485676B2"])


if __name__ == '__main__':
    unittest.main()

"""
Patent ingestion: URL lists, fetching/caching, metadata and table sections.

Each patent page is reduced to one JSON record holding its metadata and the
verbatim markup of its table sections. Records are the traceability root of
the pipeline: every block identifier resolves to exactly one record.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Optional, List, Dict, Any, Iterable, Iterator
from urllib.parse import urlsplit, urlunsplit
import hashlib
import json
import logging
import os
import re
import threading
import time

import requests
from bs4 import BeautifulSoup

from .config import FetchPolicy, PatentIdStyle
from .exceptions import MinerError, InputError, ExtractionError, FetchError

logger = logging.getLogger(__name__)

USER_AGENT = "glass-patent-miner/1.0 (+research; polite crawler)"
PATENT_URL_TEMPLATE = "https://patents.google.com/patent/{publication_number}/en"

_PATENT_ID = re.compile(r"^(?P<pub>[A-Za-z0-9]+)_(?:block_|b)(?P<k>\d+)$", re.IGNORECASE)
_URL_PUBLICATION = re.compile(r"/patent/([A-Za-z0-9]+)(?:/|$)")


@dataclass(frozen=True)
class PatentId:
    """
    Identifier of one table block: ``<publication_number>_block_<k>``.

    The dataset form ``<publication_number>_b<k>`` parses as well.
    """
    publication_number: str
    block_index: int

    def __post_init__(self):
        if not self.publication_number or not self.publication_number.isalnum():
            raise InputError("Invalid publication number", parameter="publication_number",
                             value=self.publication_number)
        if self.block_index < 0:
            raise InputError("Block index must be non-negative", parameter="block_index",
                             value=self.block_index)
        object.__setattr__(self, "publication_number", self.publication_number.upper())

    def render(self, style: PatentIdStyle = PatentIdStyle.BLOCK) -> str:
        pub = self.publication_number.lower()
        if style == PatentIdStyle.SHORT:
            return f"{pub}_b{self.block_index}"
        return f"{pub}_block_{self.block_index}"

    @classmethod
    def parse(cls, text: str) -> "PatentId":
        match = _PATENT_ID.match((text or "").strip())
        if not match:
            raise InputError("Unparseable patent id", parameter="patent_id", value=text)
        return cls(match.group("pub"), int(match.group("k")))

    def __str__(self) -> str:
        return self.render()


def publication_of(patent_id: str) -> str:
    """Uppercase publication number of a block id (or of a bare publication number)."""
    try:
        return PatentId.parse(patent_id).publication_number
    except InputError:
        return (patent_id or "").strip().upper()


def patent_url(publication_number: str) -> str:
    return PATENT_URL_TEMPLATE.format(publication_number=publication_number.upper())


@dataclass
class PatentRecord:
    """
    Per-patent metadata plus the raw table-section markup.

    Attributes:
        url: Source URL
        title: Patent title
        doc_type: Document type ("patent")
        description: Short summary
        application_number: Application number as published
        publication_number: Publication number (e.g. US11485676B2)
        pdf_url: Link to the PDF
        inventors: Inventors, document order
        assignee: Assignee
        dates: [application date, publication date]
        html_tables: Verbatim table-section fragments
    """
    url: str
    title: str = ""
    doc_type: str = ""
    description: str = ""
    application_number: str = ""
    publication_number: str = ""
    pdf_url: str = ""
    inventors: List[str] = field(default_factory=list)
    assignee: str = ""
    dates: List[str] = field(default_factory=list)
    html_tables: List[str] = field(default_factory=list)

    # JSON keys differ from attribute names for two fields
    _KEY_RENAMES = {"doc_type": "type", "dates": "date"}

    def to_dict(self) -> Dict[str, Any]:
        """Convert to the JSON record layout (keys in their fixed order)."""
        return {self._KEY_RENAMES.get(k, k): v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PatentRecord":
        inverse = {v: k for k, v in cls._KEY_RENAMES.items()}
        return cls(**{inverse.get(k, k): v for k, v in data.items()})

    @property
    def publication_year(self) -> Optional[int]:
        """Year of the publication date, falling back to the application date."""
        for value in reversed(self.dates):
            match = re.match(r"\s*(\d{4})", value or "")
            if match:
                return int(match.group(1))
        return None


class ControlList:
    """
    Append-only, set-like control file (one entry per line).

    Writes are serialized through a lock; an entry already present in the
    file is not written again.
    """

    def __init__(self, path: Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._entries = set()
        if self.path.exists():
            with open(self.path, "r", encoding="utf-8") as f:
                self._entries = {line.rstrip("\n") for line in f if line.strip()}

    def add(self, entry: str) -> bool:
        """Append ``entry``; returns False when it was already listed."""
        entry = entry.replace("\n", " ").strip()
        with self._lock:
            if entry in self._entries:
                return False
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(entry + "\n")
            self._entries.add(entry)
            return True

    def __contains__(self, entry: str) -> bool:
        return entry in self._entries

    def __len__(self) -> int:
        return len(self._entries)


class HostRateLimiter:
    """Enforce a minimum delay between requests to the same host."""

    def __init__(self, delay_seconds: float = 2.0, max_delay: float = 60.0):
        """
        Initialize rate limiter.

        Args:
            delay_seconds: Minimum delay between requests to one host
            max_delay: Cap for backoff
        """
        self.delay_seconds = delay_seconds
        self.max_delay = max_delay
        self._last: Dict[str, float] = {}
        self._host_locks: Dict[str, threading.Lock] = {}
        self._lock = threading.Lock()

    def _host_lock(self, host: str) -> threading.Lock:
        with self._lock:
            return self._host_locks.setdefault(host, threading.Lock())

    def wait(self, host: str) -> None:
        """Block until enough time has passed since the last request to ``host``."""
        with self._host_lock(host):
            elapsed = time.monotonic() - self._last.get(host, float("-inf"))
            if elapsed < self.delay_seconds:
                sleep_time = self.delay_seconds - elapsed
                logger.debug(f"Rate limiting {host}: sleeping for {sleep_time:.2f} seconds")
                time.sleep(sleep_time)
            self._last[host] = time.monotonic()

    def backoff(self, multiplier: float = 2.0) -> None:
        """Increase the delay after 429/503 responses."""
        old_delay = self.delay_seconds
        self.delay_seconds = min(max(self.delay_seconds, 0.5) * multiplier, self.max_delay)
        logger.warning(f"Rate limiter backing off: {old_delay:.2f}s -> {self.delay_seconds:.2f}s")


def load_url_list(path: str) -> List[str]:
    """
    Read a URL list file, one URL per line.

    Lines are trimmed, blank lines dropped and exact duplicates removed while
    preserving the first occurrence.

    Raises:
        InputError: If the file does not exist
    """
    list_path = Path(path)
    if not list_path.is_file():
        raise InputError(f"URL list not found: {path}", parameter="url_list", value=str(path))
    seen = set()
    urls = []
    with open(list_path, "r", encoding="utf-8") as f:
        for line in f:
            url = line.strip()
            if url and url not in seen:
                seen.add(url)
                urls.append(url)
    if not urls:
        logger.warning(f"URL list {path} is empty")
    return urls


def normalize_url(url: str) -> str:
    """
    Canonical form of a URL used for cache keys.

    Raises:
        InputError: If the URL is not an absolute http(s) URL
    """
    parts = urlsplit((url or "").strip())
    if parts.scheme.lower() not in ("http", "https") or not parts.netloc:
        raise InputError("Malformed URL", parameter="url", value=url)
    return urlunsplit((parts.scheme.lower(), parts.netloc.lower(), parts.path or "/", parts.query, ""))


def cache_key(url: str) -> str:
    """Filesystem-safe cache file name of a URL."""
    return hashlib.sha256(normalize_url(url).encode("utf-8")).hexdigest() + ".html"


class PatentFetcher:
    """
    Serve patent pages from the offline corpus, fetching missing ones if allowed.

    Fetched pages are cached in ``corpus_dir`` under ``cache_key(url)``;
    failures are logged as ``FetchError``, kept in ``errors`` and recorded in the
    ``failures`` control list; they never raise.
    """

    def __init__(self,
                 corpus_dir: str,
                 policy: FetchPolicy = FetchPolicy.OFFLINE_ONLY,
                 delay_seconds: float = 2.0,
                 timeout: float = 30.0,
                 failures: Optional[ControlList] = None,
                 session: Optional[requests.Session] = None):
        self.corpus_dir = Path(corpus_dir)
        self.policy = policy
        self.timeout = timeout
        self.failures = failures
        self.limiter = HostRateLimiter(delay_seconds)
        self._session = session
        self.stats = {"cache_hits": 0, "fetched": 0, "failed": 0}
        self.errors: List[FetchError] = []
        self._stats_lock = threading.Lock()

    @property
    def session(self) -> requests.Session:
        if self._session is None:
            self._session = requests.Session()
            self._session.headers.update({"User-Agent": USER_AGENT})
        return self._session

    def cache_path(self, url: str) -> Path:
        return self.corpus_dir / cache_key(url)

    def fetch_or_load(self, url: str) -> Optional[str]:
        """
        Return the HTML document of ``url``.

        Raises:
            InputError: For malformed URLs (rejected before any I/O)

        Returns:
            Document text, or None when the page is unavailable
        """
        path = self.cache_path(url)
        if path.is_file():
            self._count("cache_hits")
            return path.read_bytes().decode("utf-8", errors="replace")

        if self.policy == FetchPolicy.OFFLINE_ONLY:
            self._fail(FetchError("Not in offline corpus", url=url, corpus=str(self.corpus_dir)))
            return None

        host = urlsplit(url).netloc.lower()
        self.limiter.wait(host)
        try:
            logger.info(f"Fetching {url}")
            response = self.session.get(url, timeout=self.timeout)
            if response.status_code in (429, 503):
                self.limiter.backoff()
            response.raise_for_status()
        except requests.exceptions.RequestException as e:
            self._fail(FetchError("Request failed", url=url, cause=f"{type(e).__name__}: {e}"))
            return None

        content = response.content
        self.corpus_dir.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".part")
        tmp.write_bytes(content)
        os.replace(tmp, path)
        self._count("fetched")
        return content.decode("utf-8", errors="replace")

    def _fail(self, error: FetchError) -> None:
        logger.warning(str(error))
        with self._stats_lock:
            self.stats["failed"] += 1
            self.errors.append(error)
        if self.failures is not None:
            self.failures.add(error.url)

    def _count(self, key: str) -> None:
        with self._stats_lock:
            self.stats[key] += 1


def fetch_or_load(url: str, corpus_dir: str, fetch_policy: FetchPolicy,
                  failures: Optional[ControlList] = None) -> Optional[str]:
    """Single-shot convenience wrapper around :class:`PatentFetcher`."""
    return PatentFetcher(corpus_dir, fetch_policy, failures=failures).fetch_or_load(url)


def _meta_contents(soup: BeautifulSoup, name: str, scheme: Optional[str] = None) -> List[str]:
    values = []
    for tag in soup.find_all("meta", attrs={"name": name}):
        if scheme is not None and (tag.get("scheme") or "").lower() != scheme.lower():
            continue
        content = (tag.get("content") or "").strip()
        if content:
            values.append(content)
    return values


def _first(values: List[str]) -> str:
    return values[0] if values else ""


def _compact_number(value: str) -> str:
    return re.sub(r"[\s:]", "", value).upper()


def extract_metadata(html: str, url: str = "") -> PatentRecord:
    """
    Read the patent metadata exposed in meta tags.

    Missing tags give empty values; the URL is always preserved.

    Args:
        html: Patent page
        url: Source URL

    Returns:
        PatentRecord with empty ``html_tables``
    """
    soup = BeautifulSoup(html or "", "html.parser")

    publication = _first(_meta_contents(soup, "citation_patent_publication_number"))
    if not publication:
        match = _URL_PUBLICATION.search(url or "")
        publication = match.group(1) if match else _first(_meta_contents(soup, "citation_patent_number"))

    application_date = _first(_meta_contents(soup, "DC.date", scheme="dateSubmitted"))
    publication_date = _first(_meta_contents(soup, "DC.date", scheme="issue"))
    if application_date or publication_date:
        dates = [application_date, publication_date]
    else:
        dates = _meta_contents(soup, "DC.date")

    return PatentRecord(
        url=url,
        title=_first(_meta_contents(soup, "DC.title")) or _first(_meta_contents(soup, "citation_title")),
        doc_type=_first(_meta_contents(soup, "DC.type")),
        description=_first(_meta_contents(soup, "DC.description")) or _first(_meta_contents(soup, "description")),
        application_number=_first(_meta_contents(soup, "citation_patent_application_number")),
        publication_number=_compact_number(publication),
        pdf_url=_first(_meta_contents(soup, "citation_pdf_url")),
        inventors=_meta_contents(soup, "DC.contributor", scheme="inventor"),
        assignee=_first(_meta_contents(soup, "DC.contributor", scheme="assignee")),
        dates=dates,
    )


def slice_elements(markup: str, tag: str) -> List[str]:
    """
    Verbatim slices of the outermost ``tag`` elements of ``markup``.

    This is the one place that does not go through BeautifulSoup: the parser
    re-serializes what it reads, while records must keep the source markup
    byte for byte. The slices are cut from the source text by matching
    open/close tags with a depth counter; nested elements of the same name
    stay inside their outer slice. Metadata and cell parsing use BeautifulSoup.

    Raises:
        ExtractionError: If an element is left unclosed
    """
    token = re.compile(
        rf"<(?P<close>/)?{re.escape(tag)}(?=[\s>/])[^>]*?(?P<selfclose>/)?>",
        re.IGNORECASE,
    )
    slices = []
    depth = 0
    start = 0
    for match in token.finditer(markup or ""):
        if match.group("close"):
            if depth == 0:
                logger.debug(f"Stray </{tag}> at offset {match.start()} ignored")
                continue
            depth -= 1
            if depth == 0:
                slices.append(markup[start:match.end()])
        elif match.group("selfclose"):
            if depth == 0:
                slices.append(match.group(0))
        else:
            if depth == 0:
                start = match.start()
            depth += 1
    if depth:
        raise ExtractionError(f"Unclosed <{tag}> element", offset=start)
    return slices


def extract_table_sections(html: str, tags: Iterable[str] = ("patent-tables",)) -> List[str]:
    """
    Raw markup of the patent table sections, in document order.

    Returns:
        Verbatim fragments; empty list when the page has none or they are malformed
    """
    found = []
    for tag in tags:
        try:
            for fragment in slice_elements(html, tag):
                found.append((html.find(fragment), fragment))
        except ExtractionError as e:
            logger.warning(f"Skipping malformed table sections: {e}")
    return [fragment for _, fragment in sorted(found, key=lambda item: item[0])]


def serialize_record(record: PatentRecord, out_dir: str) -> Optional[Path]:
    """
    Write one JSON file per patent, named by publication number.

    An existing file is left untouched and the call is a skip. The record is
    written to a temporary file first, so an interrupted write never leaves a
    truncated record behind.

    Raises:
        MinerError: If the file cannot be written

    Returns:
        Written path, or None on skip
    """
    if not record.publication_number:
        raise InputError("Record has no publication number", parameter="publication_number",
                         value=record.url)
    path = Path(out_dir) / f"{record.publication_number}.json"
    if path.exists():
        logger.info(f"Record {path.name} already exists, skipping")
        return None
    tmp = path.with_suffix(".json.tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(tmp, "w", encoding="utf-8") as f:
            json.dump(record.to_dict(), f, indent=2, ensure_ascii=False)
            f.write("\n")
        os.replace(tmp, path)
    except (OSError, TypeError, ValueError) as e:
        tmp.unlink(missing_ok=True)
        raise MinerError(f"Cannot write record: {e}", path=str(path))
    return path


def load_record(path: Path) -> PatentRecord:
    with open(path, "r", encoding="utf-8") as f:
        return PatentRecord.from_dict(json.load(f))


def iter_records(records_dir: Path) -> Iterator[PatentRecord]:
    """Records of a directory in sorted file order."""
    for path in sorted(Path(records_dir).glob("*.json")):
        yield load_record(path)


@dataclass
class IngestSummary:
    """Outcome counters of one ingest run."""
    urls: int = 0
    rejected: int = 0
    failed: int = 0
    absent_tables: int = 0
    written: int = 0
    skipped: int = 0

    def to_dict(self) -> Dict[str, int]:
        return asdict(self)


def ingest_urls(urls: List[str],
                fetcher: PatentFetcher,
                records_dir: str,
                control_dir: str,
                table_tags: Iterable[str] = ("patent-tables",),
                max_workers: int = 4) -> IngestSummary:
    """
    Turn a URL list into per-patent JSON records.

    Malformed URLs are rejected before any fetch; unavailable pages, pages
    and pages without table sections are recorded in the control lists of
    ``control_dir``. Already serialized records are skipped and only counted,
    so a rerun leaves ``records_dir`` and ``control_dir`` unchanged.
    """
    control = Path(control_dir)
    if fetcher.failures is None:
        fetcher.failures = ControlList(control / "fetch_failures.txt")
    failures = fetcher.failures
    absent = ControlList(control / "absent_tables.txt")
    summary = IngestSummary(urls=len(urls))

    valid = []
    for url in urls:
        try:
            normalize_url(url)
            valid.append(url)
        except InputError:
            logger.warning(f"Rejecting malformed URL: {url!r}")
            failures.add(url)
            summary.rejected += 1

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        documents = list(pool.map(fetcher.fetch_or_load, valid))

    for url, html in zip(valid, documents):
        if html is None:
            summary.failed += 1
            continue
        record = extract_metadata(html, url)
        record.html_tables = extract_table_sections(html, table_tags)
        if not record.html_tables:
            logger.info(f"No table sections in {url}")
            absent.add(url)
            summary.absent_tables += 1
            continue
        if not record.publication_number:
            logger.warning(f"No publication number for {url}")
            failures.add(url)
            summary.failed += 1
            continue
        if serialize_record(record, records_dir) is None:
            summary.skipped += 1
        else:
            summary.written += 1

    logger.info(
        f"Ingested {summary.written} records ({summary.skipped} existing, "
        f"{summary.absent_tables} without tables, {summary.failed} failed)"
    )
    return summary

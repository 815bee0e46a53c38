#!/usr/bin/env python3
"""
Benchmark of the chunked filter stage over a generated dataset.

Runs the filter with several chunk sizes over the same input, checks that the
merged outputs are byte-identical and reports wall time and peak memory.
Each chunk size runs in a fresh process: traced Python allocations miss the
buffers of the pandas CSV parser, so the peak resident set size of that
process is reported too and is the figure checked against the ceiling.

Examples:
  # Default: 1,000,000 rows, chunk sizes 1,000 / 10,000 / 250,000
  python benchmarks/benchmark_filter.py

  # Smaller run with results written to CSV
  python benchmarks/benchmark_filter.py --rows 100000 --chunk-sizes 1000 10000 --csv bench.csv
"""

from __future__ import annotations

import argparse
import hashlib
import multiprocessing
import tempfile
import time
import tracemalloc
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, Any, List

import sys
from pathlib import Path

try:
    import resource
except ImportError:  # not available on Windows
    resource = None

# Ensure package import path (repo root)
ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

import numpy as np
import pandas as pd

from glass_miner.config import FilterConfig
from glass_miner.filter_core import run_chunked
from glass_miner.resources import default_lexicon

OXIDES = ["SiO2", "Na2O", "CaO", "Al2O3", "B2O3", "Nb2O5"]
MEMORY_CEILING_MB = 512


def peak_rss_mb() -> float:
    """Peak resident set size of this process; 0.0 where unsupported."""
    if resource is None:
        return 0.0
    rss = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    # kilobytes on Linux, bytes on macOS
    scale = 1 if sys.platform == "darwin" else 2**10
    return round(rss * scale / 2**20, 1)


def generate_dataset(path: Path, rows: int, seed: int, batch: int = 100_000) -> None:
    """Write ``rows`` synthetic consolidated rows; about 10% are open compositions."""
    rng = np.random.default_rng(seed)
    first = True
    for start in range(0, rows, batch):
        n = min(batch, rows - start)
        amounts = np.round(rng.dirichlet(np.ones(len(OXIDES)), size=n) * 100.0, 2)
        amounts[rng.random(n) < 0.1, 0] += 5.0
        frame = pd.DataFrame(amounts, columns=OXIDES)
        nd = np.round(rng.uniform(1.45, 2.1, size=n), 4)
        frame["nD"] = np.where(rng.random(n) < 0.2, 0.0, nd)
        frame["patent_id"] = [f"us{1000000 + (start + i) // 50}b2_block_{(start + i) % 50}" for i in range(n)]
        frame.to_csv(path, mode="w" if first else "a", header=first, index=False)
        first = False


def run_single(input_path: Path, chunk_size: int, workdir: Path) -> Dict[str, Any]:
    out_dir = workdir / f"chunk_{chunk_size}"
    cfg = FilterConfig(chunk_size=chunk_size)
    tracemalloc.start()
    t0 = time.perf_counter()
    result = run_chunked(input_path, cfg, out_dir, default_lexicon())
    dt = time.perf_counter() - t0
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    digest = hashlib.sha256(result.summary.merged.read_bytes()).hexdigest()
    return {
        'chunk_size': chunk_size,
        'time_s': round(dt, 2),
        'peak_mb': round(peak / 2**20, 1),
        'rss_mb': peak_rss_mb(),
        'rows_out': result.summary.rows_out,
        'sha256': digest[:16],
    }


def main():
    p = argparse.ArgumentParser(description='Benchmark of the chunked filter stage')
    p.add_argument('--rows', type=int, default=1_000_000, help='Generated input rows')
    p.add_argument('--chunk-sizes', nargs='+', type=int, default=[1_000, 10_000, 250_000], help='Chunk sizes')
    p.add_argument('--seed', type=int, default=12345, help='Generator seed')
    p.add_argument('--csv', type=str, help='CSV file for the results')

    args = p.parse_args()

    rows: List[Dict[str, Any]] = []
    with tempfile.TemporaryDirectory() as tmp:
        workdir = Path(tmp)
        input_path = workdir / "consolidated.csv"
        generate_dataset(input_path, args.rows, args.seed)
        for chunk_size in args.chunk_sizes:
            context = multiprocessing.get_context("spawn")
            with ProcessPoolExecutor(max_workers=1, mp_context=context) as pool:
                rows.append(pool.submit(run_single, input_path, chunk_size, workdir).result())

    header = ['chunk_size', 'time_s', 'peak_mb', 'rss_mb', 'rows_out', 'sha256']
    print("\t".join(header))
    for r in rows:
        print("\t".join(str(r[h]) for h in header))

    identical = len({r['sha256'] for r in rows}) == 1
    print(f"Byte-identical outputs: {identical}")
    smallest = min(rows, key=lambda r: r['chunk_size'])
    peak = max(smallest['peak_mb'], smallest['rss_mb'])
    within = peak <= MEMORY_CEILING_MB
    print(f"Peak memory at chunk size {smallest['chunk_size']}: {peak} MB "
          f"(ceiling {MEMORY_CEILING_MB} MB: {'ok' if within else 'exceeded'})")

    if args.csv:
        pd.DataFrame(rows, columns=header).to_csv(args.csv, index=False)
        print(f"Saved CSV: {args.csv}")

    return 0 if identical and within else 1


if __name__ == '__main__':
    sys.exit(main())

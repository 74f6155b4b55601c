"""Build the eigen-systems the acceptance suite reads, so test runs only load them.

Usage: python scripts/warm_cache.py [cache_dir]

The N=180 windowed solve needs about 4.5 GB of memory and tens of minutes on
one core; the two N=120 solves take a few minutes each.
"""
import logging
import sys
import time
from pathlib import Path

from triplewell import spectra
from triplewell.spectra import ModelParams

TARGET = 0.0752

JOBS = [
    (ModelParams(0.7, 1.0, 1.5, 100), {}),
    (ModelParams(0.7, 1.0, 1.5, 120), {}),
    (ModelParams(0.7, 1.0, 1.5, 180), {"energy_window": (TARGET - 0.02, TARGET + 0.02)}),
]


def main(argv: list[str]) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    root = Path(__file__).resolve().parents[1]
    cache = Path(argv[0]) if argv else root / ".cache"
    for params, kwargs in JOBS:
        t0 = time.perf_counter()
        es = spectra.cached_solve(params, cache, **kwargs)
        print(f"N={params.N} eps={params.epsilon}: {len(es)} levels, {time.perf_counter() - t0:.0f} s")
    return 0


if __name__ == "__main__":
    raise SystemExit(main(sys.argv[1:]))

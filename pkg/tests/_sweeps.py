"""Sweep grids shared by the acceptance tests.

Results are cached under ``tests/.cache``; a rerun only simulates points
whose cached row is missing or was produced by different simulation code.
Run this file directly to fill the cache ahead of the test session.
"""

from __future__ import annotations

import os
import sys
from pathlib import Path

from lsteleport.sweep import SweepConfig, run_sweep

CACHE = Path(__file__).parent / ".cache"
SHOTS = 100_000
WORKERS = int(os.environ.get("LSTELEPORT_WORKERS", "1"))


def _grid(lo: float, hi: float, step: float) -> tuple[float, ...]:
    n = round((hi - lo) / step)
    return tuple(round(lo + i * step, 6) for i in range(n + 1))


def _cfg(name: str, **kw) -> SweepConfig:
    return SweepConfig(shots=SHOTS, seed=2024, output=str(CACHE / f"{name}.csv"), workers=WORKERS, **kw)


BULK = _cfg("bulk", d=(3, 5, 7, 9), w=(1,), p_bulk=_grid(0.006, 0.012, 0.001), p_link=(0.001,))
LINK_PLUS = _cfg("link_plus", d=(5, 7, 9), w=(1,), p_bulk=(0.0,), p_link=_grid(0.04, 0.09, 0.01))
LINK_ZERO = _cfg("link_zero", state="zero", d=(5, 7, 9), w=(1,), p_bulk=(0.0,), p_link=_grid(0.04, 0.09, 0.01))
CROSSOVER = {
    1: _cfg("crossover_w1", d=(5, 7, 9), w=(1,), p_bulk=(0.001,), p_link=_grid(0.05, 0.10, 0.01)),
    3: _cfg("crossover_w3", d=(5, 7, 9), w=(3,), p_bulk=(0.001,), p_link=_grid(0.015, 0.035, 0.005)),
    5: _cfg("crossover_w5", d=(5, 7, 9), w=(5,), p_bulk=(0.001,), p_link=_grid(0.010, 0.026, 0.004)),
}

# cheapest first so partial caches are useful early
ALL = [LINK_PLUS, LINK_ZERO, CROSSOVER[1], CROSSOVER[3], CROSSOVER[5], BULK]


if __name__ == "__main__":
    for cfg in ALL:
        print(f"== {cfg.output}", flush=True)
        run_sweep(cfg, progress=True)
    sys.exit(0)

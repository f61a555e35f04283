"""Parameter sweeps: one grid point is layout -> circuit -> noise -> DEM ->
graph -> sample -> decode -> estimate. Results go to a versioned CSV that
doubles as the checkpoint for resuming an interrupted sweep."""

from __future__ import annotations

import csv
import hashlib
import itertools
import logging
import os
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterator, Sequence

from .circuit import ProtocolSpec, build_teleportation_circuit
from .decoder import decode_mwpm, count_failures, ErrorRateEstimate
from .dem import decompose_to_graph, extract_dem
from .geometry import build_merged_layout
from .noise import NoiseProfile, apply_noise_profile
from .sampler import BLOCK_SHOTS, sample_circuit

log = logging.getLogger(__name__)

RESULTS_SCHEMA = "lsteleport.results/1"
CHUNK_SHOTS = 8 * BLOCK_SHOTS
_SIM_MODULES = ("paulis", "geometry", "circuit", "noise", "dem", "sampler", "blossom", "decoder")


class ConfigError(ValueError):
    pass


class SchemaError(ValueError):
    pass


def code_version() -> str:
    """Short hash of the sources that determine simulation output."""
    h = hashlib.sha256()
    here = Path(__file__).parent
    for name in _SIM_MODULES:
        h.update((here / f"{name}.py").read_bytes())
    h.update(f"chunk={CHUNK_SHOTS}".encode())
    return h.hexdigest()[:12]


@dataclass(frozen=True)
class SweepConfig:
    d: tuple[int, ...]
    w: tuple[int | str, ...]
    p_bulk: tuple[float, ...]
    p_link: tuple[float, ...]
    shots: int
    state: str = "plus"
    seed: int = 0
    output: str = "results.csv"
    max_failures: int | None = None
    workers: int = 1

    def __post_init__(self):
        if self.state not in ("plus", "zero"):
            raise ConfigError(f"state must be plus or zero, got {self.state!r}")
        for name in ("d", "w", "p_bulk", "p_link"):
            if not getattr(self, name):
                raise ConfigError(f"{name} grid is empty")
        for d in self.d:
            if d < 3 or d % 2 == 0:
                raise ConfigError(f"distance must be odd and >= 3, got {d}")
        for w in self.w:
            if w != "d" and (not isinstance(w, int) or w < 1):
                raise ConfigError(f"width must be a positive integer or 'd', got {w!r}")
        for p in self.p_bulk + self.p_link:
            if not 0 <= p < 0.5:
                raise ConfigError(f"error rate {p} outside [0, 0.5)")
        if self.shots < 1000:
            raise ConfigError("shots per point must be >= 1000")
        if self.max_failures is not None and self.max_failures < 1:
            raise ConfigError("max_failures must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def points(self) -> list[tuple[str, int, int, float, float]]:
        out = []
        for d, w, pb, pl in itertools.product(self.d, self.w, self.p_bulk, self.p_link):
            out.append((self.state, d, d if w == "d" else int(w), pb, pl))
        return out


@dataclass(frozen=True)
class ResultRow:
    state: str
    d: int
    w: int
    p_bulk: float
    p_link: float
    shots: int
    failures: int
    p_L: float
    sigma: float
    p_L_upper: float
    seed: int
    wall_time_s: float
    code_version: str

    @property
    def key(self) -> tuple[str, int, int, float, float]:
        return (self.state, self.d, self.w, self.p_bulk, self.p_link)


RESULT_COLUMNS = [f.name for f in fields(ResultRow)]
_INT_COLS = {"d", "w", "shots", "failures", "seed"}
_FLOAT_COLS = {"p_bulk", "p_link", "p_L", "sigma", "p_L_upper", "wall_time_s"}


def point_seed(base_seed: int, state: str, d: int, w: int, p_bulk: float, p_link: float) -> int:
    """Seed of one grid point; independent of where the point sits in the grid."""
    text = f"{base_seed}|{state}|{d}|{w}|{p_bulk!r}|{p_link!r}"
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little") >> 1


def build_point_graph(state: str, d: int, w: int, p_bulk: float, p_link: float):
    layout = build_merged_layout(d, w)
    circuit = build_teleportation_circuit(ProtocolSpec(d, w, state), layout)
    noisy = apply_noise_profile(circuit, NoiseProfile(p_bulk, p_link))
    graph = decompose_to_graph(extract_dem(noisy))
    return noisy, graph


def run_point(
    state: str,
    d: int,
    w: int,
    p_bulk: float,
    p_link: float,
    shots: int,
    seed: int,
    max_failures: int | None = None,
    version: str | None = None,
) -> ResultRow:
    start = time.perf_counter()
    noisy, graph = build_point_graph(state, d, w, p_bulk, p_link)
    done = failures = 0
    while done < shots:
        n = min(CHUNK_SHOTS, shots - done)
        batch = sample_circuit(noisy, n, seed, shot_offset=done)
        if graph.num_edges:
            result = decode_mwpm(graph, batch.detector_bits, observable_only=True)
            failures += count_failures(batch, result)
        else:
            failures += int(batch.observable_bits.any(axis=1).sum())
        done += n
        if max_failures is not None and failures >= max_failures:
            break
    est = ErrorRateEstimate(failures, done)
    return ResultRow(
        state, d, w, p_bulk, p_link, done, failures, est.p_L, est.sigma, est.upper_bound, seed,
        round(time.perf_counter() - start, 3), version or code_version(),
    )


def _run_task(args):
    try:
        return run_point(*args)
    except Exception as exc:  # reported by the parent, the sweep goes on
        return args, f"{type(exc).__name__}: {exc}"


def write_header(path: Path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema={RESULTS_SCHEMA}\n")
        csv.writer(fh).writerow(RESULT_COLUMNS)


def append_row(path: Path, row: ResultRow) -> None:
    with open(path, "a", newline="") as fh:
        csv.writer(fh).writerow([_fmt(v) for v in asdict(row).values()])
        fh.flush()
        os.fsync(fh.fileno())


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def read_results(path: str | Path) -> list[ResultRow]:
    path = Path(path)
    with open(path, newline="") as fh:
        first = fh.readline().strip()
        if not first.startswith("# schema="):
            raise SchemaError(f"{path}:1: missing schema line")
        schema = first.split("=", 1)[1]
        if schema != RESULTS_SCHEMA:
            raise SchemaError(f"{path}:1: unsupported schema {schema!r}")
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != RESULT_COLUMNS:
            raise SchemaError(f"{path}:2: unexpected header {header}")
        rows = []
        for lineno, rec in enumerate(reader, start=3):
            if not rec:
                continue
            if len(rec) != len(RESULT_COLUMNS):
                raise SchemaError(f"{path}:{lineno}: expected {len(RESULT_COLUMNS)} fields, got {len(rec)}")
            vals = {}
            try:
                for name, text in zip(RESULT_COLUMNS, rec):
                    if name in _INT_COLS:
                        vals[name] = int(text)
                    elif name in _FLOAT_COLS:
                        vals[name] = float(text)
                    else:
                        vals[name] = text
            except ValueError as exc:
                raise SchemaError(f"{path}:{lineno}: {exc}") from None
            rows.append(ResultRow(**vals))
    return rows


def latest_rows(rows: Sequence[ResultRow], version: str | None = None) -> dict:
    out = {}
    for r in rows:
        if version is None or r.code_version == version:
            out[r.key] = r
    return out


def run_sweep(config: SweepConfig, progress: bool = False) -> list[ResultRow]:
    """Run every missing grid point of ``config``, appending rows as they finish.

    Points already present in the output with the current code version, shot
    budget and seed are skipped, which makes an interrupted sweep resumable.
    """
    version = code_version()
    path = Path(config.output)
    done: dict = {}
    if path.exists() and path.stat().st_size > 0:
        _drop_partial_line(path)
        done = latest_rows(read_results(path), version)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        write_header(path)

    tasks = []
    for state, d, w, pb, pl in config.points():
        seed = point_seed(config.seed, state, d, w, pb, pl)
        prev = done.get((state, d, w, pb, pl))
        if prev is not None and prev.seed == seed and _budget_met(prev, config):
            continue
        tasks.append((state, d, w, pb, pl, config.shots, seed, config.max_failures, version))

    failed = 0
    if config.workers > 1 and len(tasks) > 1:
        import multiprocessing as mp

        with mp.get_context("spawn").Pool(config.workers) as pool:
            for out in pool.imap(_run_task, tasks):
                failed += _record(path, out, progress)
    else:
        for task in tasks:
            failed += _record(path, _run_task(task), progress)
    if failed:
        log.warning("%d grid point(s) failed", failed)

    final = latest_rows(read_results(path), version)
    return [final[k] for k in config.points() if k in final]


def _drop_partial_line(path: Path) -> None:
    """Cut a trailing row that a killed run left without its newline."""
    data = path.read_bytes()
    if data and not data.endswith(b"\n"):
        keep = data.rfind(b"\n") + 1
        log.warning("%s: dropping incomplete last line", path)
        with open(path, "r+b") as fh:
            fh.truncate(keep)


def _budget_met(row: ResultRow, config: SweepConfig) -> bool:
    if row.shots == config.shots:
        return True
    return config.max_failures is not None and row.failures >= config.max_failures and row.shots <= config.shots


def _record(path: Path, out, progress: bool) -> int:
    if not isinstance(out, ResultRow):
        args, err = out
        log.error("point %s failed: %s", args[:5], err)
        if progress:
            print(f"FAILED {args[:5]}: {err}", flush=True)
        return 1
    row = out
    append_row(path, row)
    msg = (
        f"{row.state} d={row.d} w={row.w} p_bulk={row.p_bulk:g} p_link={row.p_link:g}: "
        f"{row.failures}/{row.shots} p_L={row.p_L:.4g} ({row.wall_time_s:.1f}s)"
    )
    log.info(msg)
    if progress:
        print(msg, flush=True)
    return 0


def iter_config_lines(text: str) -> Iterator[tuple[int, str, str]]:
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        yield lineno, key.strip().replace("-", "_"), value.strip()

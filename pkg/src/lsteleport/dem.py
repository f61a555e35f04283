"""Detector error models and matching graphs.

Extraction walks the circuit backwards, carrying for every qubit the set of
detectors and observables that an X or a Z error on that qubit would flip
(packed into Python ints, detectors in the low bits, observables above).
Each channel's Pauli components are read off that sensitivity at the point
where the channel acts, which handles every fault in a single pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import shortest_path

from .circuit import TICK, Circuit
from .noise import DEPOLARIZE1, DEPOLARIZE2, FLIP_INIT, FLIP_MEASURE, NoisyCircuit

INFINITE_DISTANCE = math.inf


class DemError(ValueError):
    pass


class DecompositionError(DemError):
    pass


@dataclass(frozen=True, order=True)
class FaultMechanism:
    detectors: tuple[int, ...]
    observables: tuple[int, ...]
    probability: float

    @property
    def symptom(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        return self.detectors, self.observables


@dataclass(frozen=True)
class DetectorErrorModel:
    mechanisms: tuple[FaultMechanism, ...]
    num_detectors: int
    num_observables: int
    detector_basis: tuple[str, ...] = ()

    @property
    def dead_detectors(self) -> frozenset[int]:
        seen = {d for m in self.mechanisms for d in m.detectors}
        return frozenset(range(self.num_detectors)) - seen

    @property
    def undetectable(self) -> tuple[FaultMechanism, ...]:
        return tuple(m for m in self.mechanisms if not m.detectors)

    def to_text(self) -> str:
        lines = [f"# detectors={self.num_detectors} observables={self.num_observables}"]
        for m in self.mechanisms:
            parts = [f"error({m.probability:.12g})"]
            parts += [f"D{d}" for d in m.detectors]
            parts += [f"L{o}" for o in m.observables]
            lines.append(" ".join(parts))
        return "\n".join(lines) + "\n"

    def check_matrix(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Dense ``(H, L, p)``: mechanisms as columns."""
        n = len(self.mechanisms)
        h = np.zeros((self.num_detectors, n), dtype=np.uint8)
        lo = np.zeros((self.num_observables, n), dtype=np.uint8)
        for j, m in enumerate(self.mechanisms):
            h[list(m.detectors), j] = 1
            lo[list(m.observables), j] = 1
        return h, lo, np.array([m.probability for m in self.mechanisms])


def xor_probability(p1: float, p2: float) -> float:
    return p1 * (1 - p2) + p2 * (1 - p1)


def _fold(probs: Iterable[float]) -> float:
    acc = 0.0
    for p in sorted(probs):
        acc = xor_probability(acc, p)
    return acc


def _result_masks(circuit: Circuit) -> list[int]:
    masks = [0] * circuit.num_measurements
    for i, det in enumerate(circuit.detectors):
        for r in det.result_indices:
            masks[r] ^= 1 << i
    off = circuit.num_detectors
    for k, obs in enumerate(circuit.observables):
        for r in obs.result_indices:
            masks[r] ^= 1 << (off + k)
    return masks


def _pauli_components(kind: str, targets: tuple[int, ...], p: float, sx, sz, target_basis: str | None):
    """Yield ``(probability, symptom mask)`` for each elementary fault of a channel."""
    if kind == DEPOLARIZE1:
        (q,) = targets
        for s in (sx[q], sx[q] ^ sz[q], sz[q]):
            yield p / 3, s
    elif kind == DEPOLARIZE2:
        a, b = targets
        single = [(0, 0), (sx[a], sx[b]), (sx[a] ^ sz[a], sx[b] ^ sz[b]), (sz[a], sz[b])]
        for i in range(4):
            for j in range(4):
                if i or j:
                    yield p / 15, single[i][0] ^ single[j][1]
    elif kind == FLIP_INIT:
        (q,) = targets
        yield p, (sx[q] if target_basis == "Z" else sz[q])
    else:
        raise DemError(f"unknown channel kind {kind!r}")


def extract_dem(noisy: NoisyCircuit) -> DetectorErrorModel:
    """Detector error model of ``noisy``; mechanisms deduplicated by symptom."""
    circuit = noisy.base
    ndet, nobs = circuit.num_detectors, circuit.num_observables
    masks = _result_masks(circuit)
    by_loc: dict[int, list] = {}
    for ch in noisy.channels:
        by_loc.setdefault(ch.location, []).append(ch)

    sx = [0] * circuit.num_qubits
    sz = [0] * circuit.num_qubits
    result = circuit.num_measurements
    found: dict[int, list[float]] = {}

    def record(p: float, symptom: int) -> None:
        if p > 0 and symptom:
            found.setdefault(symptom, []).append(p)

    for loc in range(len(circuit.instructions) - 1, -1, -1):
        ins = circuit.instructions[loc]
        name = ins.name
        if name == TICK:
            continue
        apps = ins.applications()
        # channels act after the operation, so they see the sensitivity first
        for ch in by_loc.get(loc, ()):
            if ch.kind == FLIP_MEASURE:
                record(ch.p, masks[ch.result])
            else:
                basis = name[1] if name in ("RX", "RZ") else None
                for p, s in _pauli_components(ch.kind, ch.targets, ch.p, sx, sz, basis):
                    record(p, s)
        if name == "H":
            for q in ins.targets:
                sx[q], sz[q] = sz[q], sx[q]
        elif name == "CX":
            for c, t in reversed(apps):
                sx[c] ^= sx[t]
                sz[t] ^= sz[c]
        elif name in ("RX", "RZ"):
            for q in ins.targets:
                sx[q] = 0
                sz[q] = 0
        elif name in ("MZ", "MX"):
            result -= len(ins.targets)
            for i, q in enumerate(ins.targets):
                if name == "MZ":
                    sx[q] ^= masks[result + i]
                else:
                    sz[q] ^= masks[result + i]
        else:
            raise DemError(f"operation {loc}: non-Clifford or unknown instruction {name!r}")

    dmask = (1 << ndet) - 1
    mechs = []
    for symptom, probs in found.items():
        dets = tuple(i for i in range(ndet) if (symptom >> i) & 1) if symptom & dmask else ()
        obs = tuple(k for k in range(nobs) if (symptom >> (ndet + k)) & 1)
        mechs.append(FaultMechanism(dets, obs, _fold(probs)))
    mechs.sort()
    basis = tuple(det.basis for det in circuit.detectors)
    return DetectorErrorModel(tuple(mechs), ndet, nobs, basis)


@dataclass
class MatchingGraph:
    """Detectors ``0..n-1`` plus one boundary node ``n``.

    Edge arrays are parallel: endpoints ``u < v`` (``v == n`` for boundary
    edges), merged probability, weight ``-ln(p/(1-p))`` and observable mask.
    """

    num_detectors: int
    num_observables: int
    u: np.ndarray
    v: np.ndarray
    probability: np.ndarray
    obs_mask: np.ndarray
    sources: list[list[int]] = field(default_factory=list, repr=False)
    conflicts: int = 0

    @property
    def boundary(self) -> int:
        return self.num_detectors

    @property
    def num_edges(self) -> int:
        return len(self.u)

    @property
    def weight(self) -> np.ndarray:
        p = self.probability
        return np.maximum(np.log((1 - p) / p), 0.0)

    def edge_list(self) -> str:
        lines = ["u,v,probability,weight,observables"]
        for u, v, p, w, m in zip(self.u, self.v, self.probability, self.weight, self.obs_mask):
            vs = "B" if v == self.boundary else str(v)
            lines.append(f"{u},{vs},{p:.12g},{w:.12g},{int(m)}")
        return "\n".join(lines) + "\n"


def edge_weight(p: float) -> float:
    return -math.log(p / (1 - p))


def _obs_mask(obs: Sequence[int]) -> int:
    m = 0
    for k in obs:
        m |= 1 << k
    return m


def _decompose(
    dets: tuple[int, ...],
    obs: int,
    graphlike: dict[tuple[int, ...], set[int]],
    basis: Sequence[str],
) -> list[tuple[tuple[int, ...], int]] | None:
    # split along detector basis first: the usual Y = X * Z case
    parts = [tuple(d for d in dets if basis[d] == b) for b in ("X", "Z")] if basis else []
    if parts and all(0 < len(p) <= 2 for p in parts):
        a, b = parts
        for ma in sorted(graphlike.get(a, ())):
            if obs ^ ma in graphlike.get(b, ()):
                return [(a, ma), (b, obs ^ ma)]

    def search(rest: tuple[int, ...], want: int, depth: int):
        if not rest:
            return [] if want == 0 else None
        if depth == 0:
            return None
        first = rest[0]
        options = [(first,)] + [(first, o) for o in rest[1:]]
        for comp in options:
            masks = graphlike.get(comp)
            if not masks:
                continue
            left = tuple(d for d in rest if d not in comp)
            for m in sorted(masks):
                sub = search(left, want ^ m, depth - 1)
                if sub is not None:
                    return [(comp, m)] + sub
        return None

    return search(dets, obs, 4)


def decompose_to_graph(dem: DetectorErrorModel) -> MatchingGraph:
    """Graph-like edges, splitting hyperedges into existing graph-like symptoms."""
    graphlike: dict[tuple[int, ...], set[int]] = {}
    for m in dem.mechanisms:
        if 0 < len(m.detectors) <= 2:
            graphlike.setdefault(m.detectors, set()).add(_obs_mask(m.observables))

    pieces: dict[tuple[tuple[int, ...], int], list[tuple[float, int]]] = {}
    bad = []
    for idx, m in enumerate(dem.mechanisms):
        if not m.detectors:
            continue
        om = _obs_mask(m.observables)
        if len(m.detectors) <= 2:
            comps = [(m.detectors, om)]
        else:
            comps = _decompose(m.detectors, om, graphlike, dem.detector_basis)
            if comps is None:
                bad.append(m)
                continue
        for comp in comps:
            pieces.setdefault(comp, []).append((m.probability, idx))
    if bad:
        dump = "; ".join(f"D{list(m.detectors)} L{list(m.observables)}" for m in bad[:10])
        raise DecompositionError(f"{len(bad)} undecomposable mechanism(s): {dump}")

    n = dem.num_detectors
    edges: dict[tuple[int, int], tuple[float, int, list[int]]] = {}
    conflicts = 0
    for (dets, om), items in sorted(pieces.items()):
        key = (dets[0], dets[1]) if len(dets) == 2 else (dets[0], n)
        p = _fold(p for p, _ in items)
        srcs = sorted(i for _, i in items)
        if key in edges:
            # same endpoints, different logical effect: keep the likelier one
            conflicts += 1
            if edges[key][0] >= p:
                continue
        edges[key] = (p, om, srcs)
    keys = sorted(edges)
    return MatchingGraph(
        num_detectors=n,
        num_observables=dem.num_observables,
        u=np.array([k[0] for k in keys], dtype=np.int64),
        v=np.array([k[1] for k in keys], dtype=np.int64),
        probability=np.array([edges[k][0] for k in keys], dtype=np.float64),
        obs_mask=np.array([edges[k][1] for k in keys], dtype=np.int64),
        sources=[edges[k][2] for k in keys],
        conflicts=conflicts,
    )


def min_weight_logical(graph: MatchingGraph) -> float:
    """Fewest edges whose detector boundary is empty but which flip an observable.

    Works on the graph lifted by observable parity (single observable, or any
    nonzero mask for several): a shortest path from ``(v, 0)`` to ``(v, 1)``
    closes an odd cycle through ``v``. Returns ``inf`` if none exists.
    """
    nn = graph.num_detectors + 1
    if graph.num_edges == 0 or not np.any(graph.obs_mask):
        return INFINITE_DISTANCE
    best = INFINITE_DISTANCE
    for k in range(graph.num_observables):
        flip = (graph.obs_mask >> k) & 1
        u, v = graph.u, graph.v
        rows = np.concatenate([u, u + nn, v, v + nn])
        cols = np.concatenate([v + flip * nn, v + nn - flip * nn, u + flip * nn, u + nn - flip * nn])
        adj = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(2 * nn, 2 * nn)).tocsr()
        sources = np.unique(np.concatenate([u[flip == 1], v[flip == 1]]))
        if len(sources) == 0:
            continue
        dist = shortest_path(adj, method="D", unweighted=True, indices=sources)
        d = dist[np.arange(len(sources)), sources + nn]
        best = min(best, float(d.min()))
    return best


def min_weight_logical_dem(dem: DetectorErrorModel, max_weight: int = 2) -> float:
    """Brute-force fault distance over raw mechanisms, up to ``max_weight``.

    Returns the smallest weight found, or ``inf`` if there is none at or
    below ``max_weight``. Used as an independent check on the graph search.
    """
    if max_weight >= 1 and any(not m.detectors and m.observables for m in dem.mechanisms):
        return 1
    if max_weight >= 2:
        seen: dict[tuple[int, ...], set[tuple[int, ...]]] = {}
        for m in dem.mechanisms:
            seen.setdefault(m.detectors, set()).add(m.observables)
        if any(len(v) > 1 for v in seen.values()):
            return 2
    if max_weight >= 3:
        # combination of three with empty boundary: m3 symptom = m1 ^ m2
        sym = {(m.detectors, m.observables) for m in dem.mechanisms}
        mechs = list(dem.mechanisms)
        for a, b in combinations(mechs, 2):
            dets = tuple(sorted(set(a.detectors) ^ set(b.detectors)))
            obs = tuple(sorted(set(a.observables) ^ set(b.observables)))
            for cand in seen.get(dets, ()):
                flipped = tuple(sorted(set(obs) ^ set(cand)))
                if flipped and (dets, cand) in sym:
                    return 3
    return INFINITE_DISTANCE

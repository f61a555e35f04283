"""Minimum-weight perfect-matching decoding and logical error rates.

Edge weights ``-ln(p/(1-p))`` are quantized to integers (:data:`WEIGHT_SCALE`
units) so matching runs on exact integers. All-pairs shortest paths over the
matching graph (boundary node included) are computed once per graph, along
with the observable parity of each shortest path.

Per shot, a defect pair ``(i, j)`` is only offered to the matcher when its
path is strictly cheaper than sending both to the boundary; dropping the
other pairs never removes every optimum. The kept pairs split the defects
into independent clusters, each solved as a perfect matching on defects plus
one boundary copy per defect (copies joined at zero cost along kept pairs).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from numba import njit
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from .blossom import min_weight_perfect_matching
from .dem import DetectorErrorModel, MatchingGraph, decompose_to_graph
from .sampler import SampleBatch

WEIGHT_SCALE = 10_000
UNREACHABLE = 1 << 40
EXACT_MAX_MECHANISMS = 25
EXACT_MAX_DEFECTS = 12


class DecodingError(RuntimeError):
    pass


@dataclass
class DecodeResult:
    predictions: np.ndarray  # shots x observables, uint8
    weights: np.ndarray | None = None  # integer matching weight per shot

    @property
    def shots(self) -> int:
        return self.predictions.shape[0]


@dataclass
class ErrorRateEstimate:
    failures: int
    shots: int
    d: int | None = None
    w: int | None = None
    p_bulk: float | None = None
    p_link: float | None = None
    state: str | None = None

    def __post_init__(self):
        if self.shots <= 0:
            raise ValueError("no shots")

    @property
    def p_L(self) -> float:
        return self.failures / self.shots

    @property
    def sigma(self) -> float:
        p = self.p_L
        return math.sqrt(p * (1 - p) / self.shots)

    @property
    def upper_bound(self) -> float:
        """Rule-of-three 95% bound when nothing failed, else ``p_L + 2 sigma``."""
        if self.failures == 0:
            return 3.0 / self.shots
        return self.p_L + 2 * self.sigma


def quantize(weights: np.ndarray) -> np.ndarray:
    return np.maximum(np.rint(np.asarray(weights) * WEIGHT_SCALE), 1).astype(np.int64)


def _graph_matrix(graph: MatchingGraph, weights: np.ndarray) -> csr_matrix:
    n = graph.num_detectors + 1
    return csr_matrix(
        (weights.astype(np.float64), (graph.u, graph.v)), shape=(n, n)
    )


@njit(cache=True)
def _path_parity(pred, edge_u, edge_v, edge_m, n):
    lookup = np.zeros((n, n), np.uint8)
    for k in range(edge_u.shape[0]):
        lookup[edge_u[k], edge_v[k]] = edge_m[k]
        lookup[edge_v[k], edge_u[k]] = edge_m[k]
    par = np.zeros((n, n), np.uint8)
    done = np.zeros(n, np.bool_)
    chain = np.empty(n, np.int64)
    for s in range(n):
        done[:] = False
        done[s] = True
        for t in range(n):
            if done[t] or pred[s, t] < 0:
                continue
            c = 0
            x = t
            while not done[x] and pred[s, x] >= 0:
                chain[c] = x
                c += 1
                x = pred[s, x]
            for i in range(c - 1, -1, -1):
                y = chain[i]
                px = pred[s, y]
                par[s, y] = par[s, px] ^ lookup[px, y]
                done[y] = True
    return par


@dataclass
class _Precomputed:
    dist: np.ndarray  # int64, (n+1) x (n+1), boundary last
    parity: np.ndarray  # uint8 observable masks of the shortest paths
    relevant: np.ndarray  # bool per detector: lies in a component with observable edges


def precompute(graph: MatchingGraph) -> _Precomputed:
    cached = getattr(graph, "_precomputed", None)
    if cached is not None:
        return cached
    if graph.num_observables > 8:
        raise DecodingError("at most 8 observables are supported")
    n = graph.num_detectors + 1
    qw = quantize(graph.weight)
    mat = _graph_matrix(graph, qw)
    dist, pred = dijkstra(mat, directed=False, return_predecessors=True)
    dist = np.where(np.isinf(dist), UNREACHABLE, dist).astype(np.int64)
    parity = _path_parity(pred.astype(np.int64), graph.u, graph.v, graph.obs_mask.astype(np.uint8), n)
    del pred
    # components without the boundary node decouple exactly
    inner = graph.v < graph.num_detectors
    sub = csr_matrix(
        (np.ones(int(inner.sum())), (graph.u[inner], graph.v[inner])), shape=(n - 1, n - 1)
    )
    _, comp = connected_components(sub, directed=False)
    flagged = np.zeros(comp.max() + 1 if len(comp) else 0, dtype=bool)
    obs_edges = graph.obs_mask != 0
    flagged[comp[graph.u[obs_edges]]] = True
    pre = _Precomputed(dist, parity, flagged[comp])
    graph._precomputed = pre
    return pre


@njit(cache=True)
def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@njit(cache=True)
def _decode_batch(indptr, defects, dist, parity, boundary, unreachable):
    shots = indptr.shape[0] - 1
    pred = np.zeros(shots, np.uint8)
    weight = np.zeros(shots, np.int64)
    status = 0
    for s in range(shots):
        ds = defects[indptr[s] : indptr[s + 1]]
        k = ds.shape[0]
        if k == 0:
            continue
        bnd = np.empty(k, np.int64)
        for a in range(k):
            bnd[a] = dist[ds[a], boundary]
        parent = np.arange(k)
        npairs = 0
        pa = np.empty(k * (k - 1) // 2, np.int64)
        pb = np.empty(k * (k - 1) // 2, np.int64)
        for a in range(k):
            for b in range(a + 1, k):
                dab = dist[ds[a], ds[b]]
                if dab < bnd[a] + bnd[b]:
                    pa[npairs] = a
                    pb[npairs] = b
                    npairs += 1
                    ra = _find(parent, a)
                    rb = _find(parent, b)
                    if ra != rb:
                        parent[ra] = rb
        root = np.empty(k, np.int64)
        for a in range(k):
            root[a] = _find(parent, a)
        local = np.full(k, -1, np.int64)
        members = np.empty(k, np.int64)
        for r in range(k):
            if root[r] != r:
                continue
            c = 0
            for a in range(k):
                if root[a] == r:
                    local[a] = c
                    members[c] = a
                    c += 1
            if c == 1:
                a = members[0]
                if bnd[a] >= unreachable:
                    status = 1
                weight[s] += bnd[a]
                pred[s] ^= parity[ds[a], boundary]
                continue
            m = 0
            for i in range(npairs):
                if root[pa[i]] == r:
                    m += 1
            ei = np.empty(2 * m + c, np.int64)
            ej = np.empty(2 * m + c, np.int64)
            ew = np.empty(2 * m + c, np.int64)
            e = 0
            for i in range(npairs):
                if root[pa[i]] == r:
                    la = local[pa[i]]
                    lb = local[pb[i]]
                    ei[e] = la
                    ej[e] = lb
                    ew[e] = dist[ds[pa[i]], ds[pb[i]]]
                    e += 1
                    ei[e] = c + la
                    ej[e] = c + lb
                    ew[e] = 0
                    e += 1
            for la in range(c):
                ei[e] = la
                ej[e] = c + la
                ew[e] = min(bnd[members[la]], unreachable)
                e += 1
            mate = min_weight_perfect_matching(2 * c, ei, ej, ew)
            for la in range(c):
                other = mate[la]
                a = members[la]
                if other < 0:
                    status = 2
                elif other >= c:
                    if bnd[a] >= unreachable:
                        status = 1
                    weight[s] += bnd[a]
                    pred[s] ^= parity[ds[a], boundary]
                elif other > la:
                    b = members[other]
                    weight[s] += dist[ds[a], ds[b]]
                    pred[s] ^= parity[ds[a], ds[b]]
    return pred, weight, status


def _defect_lists(syndromes: np.ndarray, keep: np.ndarray | None = None):
    syn = np.asarray(syndromes, dtype=bool)
    if keep is not None:
        syn = syn & keep[None, :]
    rows, cols = np.nonzero(syn)
    indptr = np.zeros(syn.shape[0] + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    return np.cumsum(indptr), cols.astype(np.int64)


def _unpack_masks(masks: np.ndarray, num_observables: int) -> np.ndarray:
    bits = (masks[:, None] >> np.arange(num_observables)[None, :]) & 1
    return bits.astype(np.uint8)


def decode_mwpm(graph: MatchingGraph, syndromes: np.ndarray, *, observable_only: bool = False) -> DecodeResult:
    """Decode each row of ``syndromes`` (shots x detectors).

    ``observable_only`` skips graph components that contain no observable
    edge; predictions are unchanged but the reported weight then covers only
    the decoded part.
    """
    syn = np.atleast_2d(np.asarray(syndromes))
    if syn.shape[1] != graph.num_detectors:
        raise ValueError(f"syndrome has {syn.shape[1]} bits, graph has {graph.num_detectors} detectors")
    pre = precompute(graph)
    indptr, defects = _defect_lists(syn, pre.relevant if observable_only else None)
    pred, weight, status = _decode_batch(
        indptr, defects, pre.dist, pre.parity, graph.num_detectors, UNREACHABLE
    )
    if status == 1:
        raise DecodingError("infeasible syndrome: a defect cannot be paired or reach the boundary")
    if status == 2:
        raise DecodingError("matching failed to pair every defect")
    return DecodeResult(_unpack_masks(pred.astype(np.int64), graph.num_observables), weight)


# --- exhaustive oracle -------------------------------------------------------


def _floyd_warshall(graph: MatchingGraph, weights: np.ndarray):
    n = graph.num_detectors + 1
    inf = np.iinfo(np.int64).max // 4
    dist = np.full((n, n), inf, dtype=np.int64)
    par = np.zeros((n, n), dtype=np.int64)
    np.fill_diagonal(dist, 0)
    for u, v, w, m in zip(graph.u, graph.v, weights, graph.obs_mask):
        if w < dist[u, v]:
            dist[u, v] = dist[v, u] = w
            par[u, v] = par[v, u] = m
    for k in range(n):
        cand = dist[:, k : k + 1] + dist[k : k + 1, :]
        better = cand < dist
        dist = np.where(better, cand, dist)
        par = np.where(better, par[:, k : k + 1] ^ par[k : k + 1, :], par)
    return dist, par


def _pairing_dp(defects: list[int], dist, par, boundary: int):
    k = len(defects)
    inf = np.iinfo(np.int64).max // 4
    full = (1 << k) - 1
    best = [inf] * (1 << k)
    obs = [0] * (1 << k)
    best[0] = 0
    for mask in range(1, full + 1):
        i = (mask & -mask).bit_length() - 1
        rest = mask ^ (1 << i)
        a = defects[i]
        cand = best[rest] + int(dist[a, boundary])
        o = obs[rest] ^ int(par[a, boundary])
        for j in range(i + 1, k):
            if rest >> j & 1:
                b = defects[j]
                c2 = best[rest ^ (1 << j)] + int(dist[a, b])
                if c2 < cand:
                    cand = c2
                    o = obs[rest ^ (1 << j)] ^ int(par[a, b])
        best[mask] = cand
        obs[mask] = o
    return best[full], obs[full]


def _subset_search(dem: DetectorErrorModel, syndrome: np.ndarray):
    """Minimum-weight mechanism subset reproducing ``syndrome``, by meet in the middle."""
    mechs = dem.mechanisms
    target = 0
    for i in np.nonzero(syndrome)[0]:
        target |= 1 << int(i)
    sym = []
    for m in mechs:
        s = 0
        for d in m.detectors:
            s |= 1 << d
        o = 0
        for k in m.observables:
            o |= 1 << k
        sym.append((s, o, int(quantize(-math.log(m.probability / (1 - m.probability))))))
    half = len(sym) // 2
    left, right = sym[:half], sym[half:]

    def table(items):
        out: dict[int, tuple[int, int]] = {}
        for r in range(len(items) + 1):
            for combo in combinations(range(len(items)), r):
                s = o = w = 0
                for c in combo:
                    s ^= items[c][0]
                    o ^= items[c][1]
                    w += items[c][2]
                if s not in out or w < out[s][0]:
                    out[s] = (w, o)
        return out

    lt, rt = table(left), table(right)
    best = None
    for s, (w, o) in lt.items():
        hit = rt.get(s ^ target)
        if hit is not None and (best is None or w + hit[0] < best[0]):
            best = (w + hit[0], o ^ hit[1])
    return best


def decode_exact(model: DetectorErrorModel | MatchingGraph, syndrome: np.ndarray) -> DecodeResult:
    """Exhaustive minimum-weight decoding of a single syndrome.

    Small error models (at most 25 mechanisms) are searched over mechanism
    subsets. Otherwise the model is decomposed to a graph and the defects
    (at most 12) are paired by dynamic programming over Floyd-Warshall
    distances, which is independent of the matching code path.
    """
    syn = np.asarray(syndrome).reshape(-1)
    if isinstance(model, DetectorErrorModel) and len(model.mechanisms) <= EXACT_MAX_MECHANISMS:
        found = _subset_search(model, syn)
        if found is None:
            raise DecodingError("syndrome is not reachable from the error model")
        w, o = found
        pred = _unpack_masks(np.array([o]), model.num_observables)
        return DecodeResult(pred, np.array([w], dtype=np.int64))
    graph = decompose_to_graph(model) if isinstance(model, DetectorErrorModel) else model
    defects = [int(i) for i in np.nonzero(syn)[0]]
    if len(defects) > EXACT_MAX_DEFECTS:
        raise DecodingError(f"{len(defects)} defects exceed the exhaustive limit of {EXACT_MAX_DEFECTS}")
    fw = getattr(graph, "_floyd", None)
    if fw is None:
        fw = _floyd_warshall(graph, quantize(graph.weight))
        graph._floyd = fw
    dist, par = fw
    w, o = _pairing_dp(defects, dist, par, graph.num_detectors)
    if w >= np.iinfo(np.int64).max // 8:
        raise DecodingError("infeasible syndrome")
    pred = _unpack_masks(np.array([o]), graph.num_observables)
    return DecodeResult(pred, np.array([w], dtype=np.int64))


def count_failures(batch: SampleBatch, result: DecodeResult) -> int:
    wrong = np.any(batch.observable_bits != result.predictions, axis=1)
    return int(wrong.sum())


def estimate_error_rate(batch: SampleBatch, result: DecodeResult, **tags) -> ErrorRateEstimate:
    if batch.shots == 0:
        raise ValueError("no shots")
    if batch.observable_bits.shape != result.predictions.shape:
        raise ValueError("decode result does not match batch dimensions")
    return ErrorRateEstimate(count_failures(batch, result), batch.shots, **tags)

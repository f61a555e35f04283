import numpy as np
import pytest

from lsteleport.circuit import teleportation_circuit
from lsteleport.decoder import (
    DecodingError,
    ErrorRateEstimate,
    count_failures,
    decode_exact,
    decode_mwpm,
    estimate_error_rate,
    quantize,
)
from lsteleport.dem import DetectorErrorModel, FaultMechanism, MatchingGraph, decompose_to_graph, extract_dem
from lsteleport.noise import NoiseProfile, apply_noise_profile
from lsteleport.sampler import sample_circuit
from lsteleport.sweep import run_point


def graph_of(edges, nd, no=1):
    """``edges``: (u, v or 'B', p, obs mask)."""
    u = np.array([e[0] for e in edges], dtype=np.int64)
    v = np.array([nd if e[1] == "B" else e[1] for e in edges], dtype=np.int64)
    p = np.array([e[2] for e in edges], dtype=np.float64)
    m = np.array([e[3] for e in edges], dtype=np.int64)
    return MatchingGraph(nd, no, u, v, p, m)


def protocol_graph(d=3, w=1, state="plus", p=1e-3):
    n = apply_noise_profile(teleportation_circuit(d, w, state), NoiseProfile(p, p))
    return n, decompose_to_graph(extract_dem(n))


def test_empty_syndrome():
    _, g = protocol_graph()
    res = decode_mwpm(g, np.zeros((3, g.num_detectors), np.uint8))
    assert not res.predictions.any()
    assert not res.weights.any()
    ex = decode_exact(g, np.zeros(g.num_detectors, np.uint8))
    assert ex.weights[0] == 0


def test_cheap_edge_is_matched():
    g = graph_of([(0, 1, 0.2, 1), (0, "B", 0.01, 0), (1, "B", 0.01, 0)], 2)
    res = decode_mwpm(g, np.array([[1, 1]], np.uint8))
    assert res.predictions[0, 0] == 1
    assert res.weights[0] == quantize(g.weight)[0]


def test_boundary_route_when_cheaper():
    g = graph_of([(0, 1, 0.001, 1), (0, "B", 0.2, 0), (1, "B", 0.2, 0)], 2)
    res = decode_mwpm(g, np.array([[1, 1]], np.uint8))
    assert res.predictions[0, 0] == 0
    q = quantize(g.weight)
    assert res.weights[0] == q[1] + q[2]


def test_path_parity_through_intermediate_nodes():
    # 0 - 1 - 2 chain, defects at the ends, logical on the middle edge
    g = graph_of([(0, 1, 0.1, 0), (1, 2, 0.1, 1), (0, "B", 0.001, 0), (2, "B", 0.001, 0)], 3)
    res = decode_mwpm(g, np.array([[1, 0, 1]], np.uint8))
    assert res.predictions[0, 0] == 1


def test_odd_syndrome_without_boundary_fails():
    g = graph_of([(0, 1, 0.1, 0)], 2)
    with pytest.raises(DecodingError):
        decode_mwpm(g, np.array([[1, 0]], np.uint8))


def sampled_syndromes(n, g, count, max_defects, seed):
    batch = sample_circuit(n, 20_000, seed=seed)
    k = batch.detector_bits.sum(axis=1)
    rows = np.nonzero((k > 0) & (k <= max_defects))[0][:count]
    return batch.detector_bits[rows]


@pytest.mark.parametrize("state", ["plus", "zero"])
def test_mwpm_matches_exhaustive_minimum(state):
    n, _ = protocol_graph(3, 1, state, p=0.02)
    g = decompose_to_graph(extract_dem(n))
    syn = sampled_syndromes(n, g, 200, 12, seed=4)
    assert len(syn) == 200
    res = decode_mwpm(g, syn)
    for i in range(len(syn)):
        ex = decode_exact(g, syn[i])
        assert res.weights[i] == ex.weights[0]


def test_mwpm_on_random_defect_sets():
    _, g = protocol_graph(3, 2, "zero", p=0.01)
    rng = np.random.default_rng(12)
    syn = np.zeros((150, g.num_detectors), np.uint8)
    for row in syn:
        row[rng.choice(g.num_detectors, size=int(rng.integers(1, 11)), replace=False)] = 1
    res = decode_mwpm(g, syn)
    for i in range(len(syn)):
        assert res.weights[i] == decode_exact(g, syn[i]).weights[0]


def test_observable_only_agrees_on_observable():
    n, g = protocol_graph(3, 1, "plus", p=0.01)
    batch = sample_circuit(n, 4000, seed=2)
    a = decode_mwpm(g, batch.detector_bits)
    b = decode_mwpm(g, batch.detector_bits, observable_only=True)
    assert np.array_equal(a.predictions, b.predictions)


def test_exact_guard():
    _, g = protocol_graph()
    syn = np.zeros(g.num_detectors, np.uint8)
    syn[:13] = 1
    with pytest.raises(DecodingError):
        decode_exact(g, syn)


def test_exact_single_mechanism():
    dem = DetectorErrorModel((FaultMechanism((0, 1), (0,), 0.05),), 2, 1)
    res = decode_exact(dem, np.array([1, 1]))
    assert res.predictions[0, 0] == 1
    with pytest.raises(DecodingError):
        decode_exact(dem, np.array([1, 0]))


def test_exact_subset_search_agrees_with_matching():
    rng = np.random.default_rng(5)
    for _ in range(60):
        nd = 5
        pairs = set()
        while len(pairs) < 8:
            a = int(rng.integers(0, nd))
            b = int(rng.integers(a, nd + 1))
            if a != b:
                pairs.add((a, b))
        mechs = []
        for a, b in sorted(pairs):
            dets = (a,) if b == nd else (a, b)
            obs = (0,) if rng.random() < 0.3 else ()
            mechs.append(FaultMechanism(dets, obs, float(rng.uniform(0.001, 0.2))))
        dem = DetectorErrorModel(tuple(mechs), nd, 1)
        g = decompose_to_graph(dem)
        fired = rng.random(len(mechs)) < 0.3
        syn = np.zeros(nd, np.uint8)
        for m, f in zip(mechs, fired):
            if f:
                syn[list(m.detectors)] ^= 1
        ex = decode_exact(dem, syn)
        mw = decode_mwpm(g, syn[None, :])
        assert ex.weights[0] == mw.weights[0]


def test_zero_noise_batches_never_fail():
    n = apply_noise_profile(teleportation_circuit(5, 1, "zero"), NoiseProfile(0, 0))
    batch = sample_circuit(n, 2000, seed=1)
    _, g = protocol_graph(5, 1, "zero")
    res = decode_mwpm(g, batch.detector_bits)
    assert count_failures(batch, res) == 0


def test_error_rate_estimates():
    e = ErrorRateEstimate(0, 10_000)
    assert e.p_L == 0 and e.sigma == 0
    assert e.upper_bound == pytest.approx(3e-4)
    e = ErrorRateEstimate(100, 10_000)
    assert e.p_L == 0.01
    assert e.sigma == pytest.approx(9.95e-4, rel=1e-3)
    with pytest.raises(ValueError):
        ErrorRateEstimate(0, 0)


def test_estimate_from_batch():
    n, g = protocol_graph(3, 1, "plus", p=0.01)
    batch = sample_circuit(n, 5000, seed=3)
    res = decode_mwpm(g, batch.detector_bits)
    est = estimate_error_rate(batch, res, d=3, w=1, state="plus")
    assert est.shots == 5000 and est.d == 3
    assert est.failures == count_failures(batch, res)
    assert 0 < est.p_L < 0.2


def test_sub_threshold_suppression():
    # p_bulk = p_link = 0.3%: larger codes do better
    rows = [run_point("plus", d, 1, 0.003, 0.003, shots, seed=100 + d) for d, shots in ((3, 200_000), (5, 200_000), (7, 50_000))]
    for small, large in zip(rows, rows[1:]):
        gap = small.p_L - large.p_L
        assert gap > 5 * np.hypot(small.sigma, large.sigma), (small, large)

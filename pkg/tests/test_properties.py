import math
from functools import lru_cache

import networkx as nx
import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from lsteleport.blossom import min_weight_perfect_matching
from lsteleport.circuit import teleportation_circuit
from lsteleport.decoder import decode_exact, decode_mwpm
from lsteleport.dem import _fold, decompose_to_graph, extract_dem, xor_probability
from lsteleport.geometry import Region, build_merged_layout, plaquette_product
from lsteleport.noise import NoiseProfile, apply_noise_profile
from lsteleport.paulis import PauliString
from lsteleport.sampler import SampleBatch, sample_circuit
from lsteleport.scaling import CollapsePoint, ScalingFamily, collapse_objective, scaling_variable, threshold_line

QUASI = ScalingFamily.parse("quasi2d")
THREED = ScalingFamily.parse("threed")
probs = st.floats(min_value=0.0, max_value=0.49)


@lru_cache(maxsize=None)
def noisy(d, w, state, p):
    return apply_noise_profile(teleportation_circuit(d, w, state), NoiseProfile(p, p))


@lru_cache(maxsize=None)
def graph(d, w, state, p):
    return decompose_to_graph(extract_dem(noisy(d, w, state, p)))


paulis = st.builds(
    lambda xs, zs: PauliString.x(xs) * PauliString.z(zs),
    st.frozensets(st.integers(0, 12)),
    st.frozensets(st.integers(0, 12)),
)


@given(paulis, paulis, paulis)
def test_pauli_algebra(a, b, c):
    assert a.commutes(b) == b.commutes(a)
    assert (a * b) * c == a * (b * c)
    assert (a * a).is_identity
    # commutation with a product is the parity of the parts
    assert a.commutes(b * c) == (a.commutes(b) == a.commutes(c))


@settings(max_examples=20, deadline=None)
@given(st.sampled_from([3, 5, 7]), st.integers(1, 5))
def test_merged_layout_invariants(d, w):
    lay = build_merged_layout(d, w)
    assert len(lay.data_qubits) == (2 * d + w) * d
    assert len(lay.merged_plaquettes) == (2 * d + w) * d - 1
    link = {q for q, r in lay.region_of.items() if q.kind == "data" and r == Region.LINK}
    assert link == set(lay.link_data) and len(link) == w * d
    prod = plaquette_product(lay.link_z_product_set)
    assert prod.support == {q.index for q in lay.data_qubits if q.coord[0] in (d - 1, d + w)}


@settings(max_examples=25, deadline=None)
@given(probs, probs)
def test_noise_rates_follow_region_rule(pb, pl):
    c = teleportation_circuit(3, 3)
    n = apply_noise_profile(c, NoiseProfile(pb, pl))
    for ch in n.channels:
        link = any(c.qubit_regions[q] == Region.LINK for q in ch.targets)
        assert ch.p == (pl if link else pb)


@given(probs, probs, probs)
def test_xor_probability(a, b, c):
    assert math.isclose(xor_probability(a, b), xor_probability(b, a), abs_tol=1e-15)
    assert 0 <= xor_probability(a, b) <= 0.5 + 1e-12
    assert math.isclose(xor_probability(a, 0.0), a)
    assert math.isclose(_fold([a, b, c]), _fold([c, a, b]), abs_tol=1e-15)


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 2999), st.integers(0, 2**32))
def test_sampler_rebatching(k, seed):
    n = noisy(3, 1, "zero", 0.005)
    whole = sample_circuit(n, 3000, seed)
    parts = SampleBatch.concatenate([sample_circuit(n, k, seed), sample_circuit(n, 3000 - k, seed, shot_offset=k)])
    assert np.array_equal(whole.detector_bits, parts.detector_bits)
    assert np.array_equal(whole.observable_bits, parts.observable_bits)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["plus", "zero"]), st.data())
def test_mwpm_is_optimal(state, data):
    g = graph(3, 1, state, 0.01)
    defects = data.draw(st.sets(st.integers(0, g.num_detectors - 1), min_size=1, max_size=10))
    syn = np.zeros(g.num_detectors, np.uint8)
    syn[list(defects)] = 1
    assert decode_mwpm(g, syn[None, :]).weights[0] == decode_exact(g, syn).weights[0]


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 5), st.data())
def test_perfect_matching_matches_networkx(half, data):
    n = 2 * half
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
    chosen = data.draw(st.lists(st.sampled_from(pairs), min_size=1, unique=True))
    weights = data.draw(st.lists(st.integers(1, 50), min_size=len(chosen), max_size=len(chosen)))
    ei = np.array([a for a, _ in chosen], np.int64)
    ej = np.array([b for _, b in chosen], np.int64)
    ew = np.array(weights, np.int64)
    mate = min_weight_perfect_matching(n, ei, ej, ew)
    g = nx.Graph()
    g.add_nodes_from(range(n))
    for (a, b), w in zip(chosen, weights):
        g.add_edge(a, b, weight=w)
    ref = nx.min_weight_matching(g)
    if 2 * len(ref) < n:
        assert (mate == -1).all()
        return
    w = dict(zip(chosen, weights))
    assert sum(w[(v, int(mate[v]))] for v in range(n) if mate[v] > v) == sum(g[a][b]["weight"] for a, b in ref)


pos = st.floats(min_value=0.3, max_value=3.0)


@given(st.floats(0.001, 0.02), st.floats(0.0, 0.1), pos, pos, st.integers(1, 30), st.sampled_from([3, 5, 9, 17, 29]))
def test_quasi2d_root_matches_threshold_line(p3, z, nu2, nu3, w, d):
    params = {"p_star_3d": p3, "z": z, "nu2": nu2, "nu3": nu3}
    pw = threshold_line(w, p3, z, nu3)
    assert abs(scaling_variable(CollapsePoint(pw, d, 0.1, 0.01, w=w), QUASI, params)) < 1e-12
    above = scaling_variable(CollapsePoint(pw * 1.01, d, 0.1, 0.01, w=w), QUASI, params)
    assert above > 0


point_lists = st.lists(
    st.tuples(st.floats(0.0, 0.05), st.sampled_from([3, 5, 7, 9]), st.floats(0.0, 0.5), st.floats(1e-4, 0.05)),
    min_size=3,
    max_size=25,
)


@given(point_lists, st.floats(0.1, 10.0), st.floats(0.0, 0.05), pos)
def test_objective_sigma_scaling_and_sign(rows, k, ps, nu):
    pts = [CollapsePoint(p, d, y, s) for p, d, y, s in rows]
    base = collapse_objective(pts, THREED, (ps, nu))
    assert base >= 0
    scaled = [CollapsePoint(p.p, p.d, p.p_L, p.sigma * k) for p in pts]
    assert math.isclose(collapse_objective(scaled, THREED, (ps, nu)), base / k**2, rel_tol=1e-9, abs_tol=1e-300)


@given(st.floats(-1, 1), st.floats(0, 0.2), st.lists(st.floats(0.0, 0.05), min_size=3, max_size=3, unique=True), st.floats(1e-4, 0.1))
def test_three_collinear_points_score_zero(slope, offset, xs, s):
    pts = [CollapsePoint(x, 1, min(max(offset + slope * x, 0), 1), s) for x in xs]
    ys = [p.p_L for p in pts]
    if any(y in (0, 1) for y in ys):
        return
    assert collapse_objective(pts, THREED, (0.0, 1.0)) < 1e-9

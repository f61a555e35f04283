import numpy as np
import pytest

from lsteleport.circuit import TICK, Circuit, Detector, Instruction, Observable, teleportation_circuit
from lsteleport.dem import DetectorErrorModel, FaultMechanism, extract_dem
from lsteleport.geometry import Region
from lsteleport.noise import DEPOLARIZE2, FLIP_INIT, Channel, NoiseProfile, NoisyCircuit, apply_noise_profile
from lsteleport.sampler import BLOCK_SHOTS, SampleBatch, sample_circuit, sample_dem


def noisy(d=3, w=1, state="plus", p=1e-3):
    return apply_noise_profile(teleportation_circuit(d, w, state), NoiseProfile(p, p))


def toy(ops, detectors, observables=(), nq=2):
    return Circuit(
        tuple(Instruction(n, t) for n, t in ops),
        tuple(Detector(tuple(r), (0, i), "Z") for i, r in enumerate(detectors)),
        tuple(Observable(tuple(r), "toy") for r in observables),
        nq,
        (Region.BULK,) * nq,
    )


def test_noiseless_sampling_is_zero():
    batch = sample_circuit(noisy(3, 2, "zero", p=0.0), 10_000, seed=1)
    assert batch.detector_bits.shape == (10_000, noisy(3, 2, "zero").num_detectors)
    assert not batch.detector_bits.any()
    assert not batch.observable_bits.any()


def test_same_seed_same_batch():
    n = noisy(p=5e-3)
    a = sample_circuit(n, 3000, seed=42)
    b = sample_circuit(n, 3000, seed=42)
    assert np.array_equal(a.detector_bits, b.detector_bits)
    assert np.array_equal(a.observable_bits, b.observable_bits)
    c = sample_circuit(n, 3000, seed=43)
    assert not np.array_equal(a.detector_bits, c.detector_bits)


@pytest.mark.parametrize("k", [1, 700, BLOCK_SHOTS, 2500])
def test_rebatching(k):
    n = noisy(p=5e-3)
    total = 3 * BLOCK_SHOTS + 17
    whole = sample_circuit(n, total, seed=7)
    parts = SampleBatch.concatenate([sample_circuit(n, k, seed=7), sample_circuit(n, total - k, seed=7, shot_offset=k)])
    assert np.array_equal(whole.detector_bits, parts.detector_bits)
    assert np.array_equal(whole.observable_bits, parts.observable_bits)


def test_single_channel_rate():
    c = toy([("RZ", (0,)), (TICK, ()), ("MZ", (0,))], [[0]], nq=1)
    n = NoisyCircuit(c, (Channel(0, FLIP_INIT, (0,), 0.1),))
    shots = 1_000_000
    rate = sample_circuit(n, shots, seed=3).detector_bits.mean()
    assert abs(rate - 0.1) < 5 * np.sqrt(0.1 * 0.9 / shots)


def test_depolarize2_marginals():
    # an X or Y on either qubit after the CX flips that qubit's Z measurement: 8 of 15 Paulis
    c = toy([("RZ", (0, 1)), (TICK, ()), ("CX", (0, 1)), (TICK, ()), ("MZ", (0, 1))], [[0], [1], [0, 1]])
    p = 0.15
    n = NoisyCircuit(c, (Channel(2, DEPOLARIZE2, (0, 1), p),))
    shots = 400_000
    rates = sample_circuit(n, shots, seed=5).detector_bits.mean(axis=0)
    for got, want in zip(rates, (8 / 15 * p, 8 / 15 * p, 8 / 15 * p)):
        assert abs(got - want) < 5 * np.sqrt(want * (1 - want) / shots)


def test_frame_propagates_through_cx():
    # X on the control before a CX reaches both measurements
    c = toy([("RZ", (0, 1)), (TICK, ()), ("CX", (0, 1)), (TICK, ()), ("MZ", (0, 1))], [[0], [1]], [[0, 1]])
    n = NoisyCircuit(c, (Channel(0, FLIP_INIT, (0,), 0.3),))
    b = sample_circuit(n, 20_000, seed=2)
    assert np.array_equal(b.detector_bits[:, 0], b.detector_bits[:, 1])
    assert not b.observable_bits.any()


def test_dump_roundtrip():
    b = sample_circuit(noisy(p=0.01), 1500, seed=8, shot_offset=33)
    back = SampleBatch.load(b.dump())
    assert back.shots == 1500 and back.seed == 8 and back.shot_offset == 33
    assert np.array_equal(back.detector_bits, b.detector_bits)
    assert np.array_equal(back.observable_bits, b.observable_bits)
    assert b.dump().startswith(b"shots=1500 seed=8 offset=33 ")


def test_sample_dem_empty_and_coin():
    empty = DetectorErrorModel((), 3, 1)
    b = sample_dem(empty, 1000, seed=0)
    assert not b.detector_bits.any()
    coin = DetectorErrorModel((FaultMechanism((0,), (0,), 0.5),), 1, 1)
    shots = 200_000
    b = sample_dem(coin, shots, seed=1)
    assert abs(b.detector_bits.mean() - 0.5) < 5 * np.sqrt(0.25 / shots)
    assert np.array_equal(b.detector_bits[:, 0], b.observable_bits[:, 0])


def test_circuit_and_dem_sampling_agree():
    n = noisy(3, 1, "plus", 1e-3)
    dem = extract_dem(n)
    shots = 1_000_000
    a = sample_circuit(n, shots, seed=21).detector_bits.mean(axis=0)
    b = sample_dem(dem, shots, seed=22).detector_bits.mean(axis=0)
    pooled = (a + b) / 2
    se = np.sqrt(2 * pooled * (1 - pooled) / shots)
    assert np.all(np.abs(a - b) < 5 * se + 1e-12)


def test_sampling_rejects_bad_arguments():
    with pytest.raises(ValueError):
        sample_circuit(noisy(), 0, seed=1)
    with pytest.raises(ValueError):
        sample_circuit(noisy(), 10, seed=1, shot_offset=-1)

import dataclasses

import numpy as np
import pytest

from lsteleport.circuit import (
    TICK,
    CircuitError,
    Detector,
    Instruction,
    ProtocolSpec,
    ScheduleError,
    build_teleportation_circuit,
    circuit_to_text,
    stabilizer_round,
    teleportation_circuit,
)
from lsteleport.geometry import Plaquette, QubitId, build_merged_layout, build_patch
from lsteleport.tableau import record_parities, sample_noiseless, validate_circuit


def expected_measurements(d, w):
    # counting oracle: pre round, d merged rounds, left+link X readout,
    # post round on the right patch, final right readout
    merged_plaqs = (2 * d + w) * d - 1
    return (d * d - 1) + d * merged_plaqs + (d + w) * d + (d * d - 1) + d * d


@pytest.mark.parametrize("d,w", [(3, 1), (3, 2), (5, 1), (5, 3)])
def test_measurement_count(d, w):
    assert teleportation_circuit(d, w).num_measurements == expected_measurements(d, w)


def test_measurement_count_golden():
    assert teleportation_circuit(3, 1, "plus").num_measurements == 97
    assert teleportation_circuit(3, 1, "zero").num_measurements == 97


def test_result_indices_consecutive_and_referenced():
    c = teleportation_circuit(3, 2, "zero")
    m = c.num_measurements
    for det in c.detectors:
        assert det.result_indices and all(0 <= r < m for r in det.result_indices)
    assert c.num_observables == 1
    assert all(0 <= r < m for r in c.observables[0].result_indices)


def test_round_structure():
    d, w = 5, 1
    c = teleportation_circuit(d, w)
    ticks = sum(1 for ins in c.instructions if ins.name == TICK)
    # 8 per round (pre, d merged, post) plus reset/measure barriers
    assert ticks == 8 * (d + 2) + 4
    merged_rounds = sum(
        1 for ins in c.instructions if ins.name == "MZ" and len(ins.targets) == (2 * d + w) * d - 1
    )
    assert merged_rounds == d


def test_round_count_tracks_d():
    for d in (3, 5, 7):
        assert ProtocolSpec(d, 1).rounds_surgery == d


def test_single_z_plaquette_round():
    patch = build_patch(3)
    plaq = next(p for p in patch.plaquettes if p.basis == "Z" and len(p.support) == 4)
    ops, aux = stabilizer_round([plaq])
    real = [op for op in ops if op.name != TICK]
    assert sum(1 for op in ops if op.name == TICK) == 8
    assert aux == [plaq.auxiliary.index]
    assert sum(len(op.applications()) for op in real if op.name == "CX") == 4
    on_aux = [op for op in real if plaq.auxiliary.index in op.targets]
    assert len(on_aux) == 6
    # Z checks: data controls the auxiliary
    for op in real:
        if op.name == "CX":
            assert op.targets[1] == plaq.auxiliary.index


def test_x_plaquette_uses_hadamards():
    patch = build_patch(3)
    plaq = next(p for p in patch.plaquettes if p.basis == "X" and len(p.support) == 4)
    ops, _ = stabilizer_round([plaq])
    assert [op.name for op in ops if op.name != TICK] == ["RZ", "H", "CX", "CX", "CX", "CX", "H", "MZ"]


@pytest.mark.parametrize("d", [3, 5])
def test_full_round_touches_data_once_per_layer(d):
    ops, _ = stabilizer_round(build_patch(d).plaquettes)
    for op in ops:
        if op.name == "CX":
            qs = list(op.targets)
            assert len(qs) == len(set(qs))


def test_adjacent_plaquettes_use_shared_qubit_in_different_layers():
    patch = build_patch(3)
    ops, _ = stabilizer_round(patch.plaquettes)
    layers = [op for op in ops if op.name == "CX"]
    for a in patch.plaquettes:
        for b in patch.plaquettes:
            if a is b:
                continue
            shared = set(a.support_indices) & set(b.support_indices)
            for q in shared:
                la = [i for i, op in enumerate(layers) if (a.auxiliary.index, q) in op.applications() or (q, a.auxiliary.index) in op.applications()]
                lb = [i for i, op in enumerate(layers) if (b.auxiliary.index, q) in op.applications() or (q, b.auxiliary.index) in op.applications()]
                assert la != lb


def test_schedule_conflict_detected():
    patch = build_patch(3)
    plaq = next(p for p in patch.plaquettes if len(p.support) == 4)
    # a second plaquette with the same centre geometry but a different auxiliary
    twin_aux = QubitId(999, plaq.auxiliary.coord, "aux")
    twin = Plaquette(plaq.basis, plaq.support, twin_aux)
    with pytest.raises(ScheduleError):
        stabilizer_round([plaq, twin])
    with pytest.raises(ScheduleError):
        stabilizer_round([plaq, plaq])


def test_mismatched_layout_rejected():
    with pytest.raises(CircuitError):
        build_teleportation_circuit(ProtocolSpec(3, 1), build_merged_layout(5, 1))
    with pytest.raises(CircuitError):
        ProtocolSpec(3, 1, "minus")
    with pytest.raises(CircuitError):
        ProtocolSpec(4, 1)


@pytest.mark.parametrize("state", ["plus", "zero"])
@pytest.mark.parametrize("d,w", [(3, 1), (3, 2), (3, 3), (5, 1), (5, 2), (5, 3)])
def test_validator_accepts_protocol(d, w, state):
    c = teleportation_circuit(d, w, state)
    report = validate_circuit(c)
    assert report.ok, str(report)


@pytest.mark.parametrize("state", ["plus", "zero"])
def test_noiseless_samples_are_zero(state):
    c = teleportation_circuit(3, 1, state)
    recs = sample_noiseless(c, 1000, seed=5)
    det, obs = record_parities(c, recs)
    assert not det.any() and not obs.any()


def test_zero_state_frame_absorbs_random_zlzl():
    c = teleportation_circuit(3, 1, "zero")
    lay = build_merged_layout(3, 1)
    recs = sample_noiseless(c, 2000, seed=11)
    # raw Z_L Z_L outcome of the last merged round
    first_merged = 8
    aux_sorted = sorted(p.auxiliary.index for p in lay.merged_plaquettes)
    last = first_merged + 2 * len(aux_sorted)
    idx = [last + aux_sorted.index(p.auxiliary.index) for p in lay.link_z_product_set]
    raw = np.bitwise_xor.reduce(recs[:, idx], axis=1)
    assert 0.4 < raw.mean() < 0.6
    _, obs = record_parities(c, recs)
    assert not obs.any()


def test_validator_flags_random_first_round_link_detector():
    c = teleportation_circuit(3, 1)
    lay = build_merged_layout(3, 1)
    aux_sorted = sorted(p.auxiliary.index for p in lay.merged_plaquettes)
    plaq = lay.link_z_product_set[0]
    r = 8 + aux_sorted.index(plaq.auxiliary.index)
    tag = (plaq.auxiliary.index, 1)
    bad = dataclasses.replace(c, detectors=c.detectors + (Detector((r,), tag, "Z"),))
    report = validate_circuit(bad)
    assert not report.ok
    kinds = {(dg.kind, dg.tag) for dg in report.diagnostics}
    assert ("random-detector", tag) in kinds


def test_validator_flags_missing_left_readout():
    spec = ProtocolSpec(3, 1, "plus")
    c = build_teleportation_circuit(spec, build_merged_layout(3, 1), readout_left=False)
    report = validate_circuit(c)
    assert any(dg.kind == "random-observable" for dg in report.diagnostics)


def test_validator_structural_diagnostics():
    c = teleportation_circuit(3, 1)
    # two gates on one qubit inside a tick
    ins = list(c.instructions)
    ins.insert(1, Instruction("H", (ins[0].targets[0],)))
    report = validate_circuit(dataclasses.replace(c, instructions=tuple(ins)))
    assert any(dg.kind == "double-use" and dg.operation == 1 for dg in report.diagnostics)

    bogus = dataclasses.replace(c, instructions=(Instruction("T", (0,)),) + c.instructions)
    assert validate_circuit(bogus).diagnostics[0].kind == "unknown-op"

    dangling = dataclasses.replace(c, detectors=(Detector((10_000,), (0, 0), "X"),))
    assert validate_circuit(dangling).diagnostics[0].kind == "bad-result"


def test_text_format():
    c = teleportation_circuit(3, 1)
    text = circuit_to_text(c)
    assert text == circuit_to_text(teleportation_circuit(3, 1))
    lines = text.splitlines()
    assert lines[0] == f"QUBITS {c.num_qubits}"
    assert sum(1 for ln in lines if ln.startswith("DETECTOR")) == c.num_detectors
    assert sum(1 for ln in lines if " rec=" in ln) == c.num_measurements
    assert lines[-1].startswith("OBSERVABLE 0 ")

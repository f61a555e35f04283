"""Syndrome-extraction and teleportation circuits on the merged layout.

A :class:`Circuit` is a flat list of instructions over integer qubit indices.
Measurement results are numbered in the order they are produced, so a
detector or observable is simply a set of result indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .geometry import MergedLayout, Plaquette, Region

GATES_1Q = ("H",)
GATES_2Q = ("CX",)
RESETS = ("RX", "RZ")
MEASUREMENTS = ("MX", "MZ")
TICK = "TICK"

# Corner order of the four CX layers, as offsets from the plaquette centre
# (column, row); rows grow downwards. X checks finish on a vertical pair and
# Z checks on a horizontal pair, so hook errors run perpendicular to the
# logical operator of the same type.
X_SCHEDULE = ((0.5, 0.5), (0.5, -0.5), (-0.5, 0.5), (-0.5, -0.5))
Z_SCHEDULE = ((0.5, 0.5), (-0.5, 0.5), (0.5, -0.5), (-0.5, -0.5))


class CircuitError(ValueError):
    pass


class ScheduleError(CircuitError):
    pass


@dataclass(frozen=True)
class Instruction:
    name: str
    targets: tuple[int, ...] = ()

    def applications(self) -> list[tuple[int, ...]]:
        """Split the target list into per-gate qubit tuples."""
        if self.name in GATES_2Q:
            t = self.targets
            return [(t[i], t[i + 1]) for i in range(0, len(t), 2)]
        return [(q,) for q in self.targets]


@dataclass(frozen=True)
class Detector:
    result_indices: tuple[int, ...]
    tag: tuple[int, int]  # (auxiliary qubit index, round)
    basis: str


@dataclass(frozen=True)
class Observable:
    result_indices: tuple[int, ...]
    label: str


@dataclass(frozen=True)
class Circuit:
    instructions: tuple[Instruction, ...]
    detectors: tuple[Detector, ...]
    observables: tuple[Observable, ...]
    num_qubits: int
    qubit_regions: tuple[Region, ...] = ()
    qubit_coords: tuple[tuple[float, float], ...] = ()
    metadata: dict = field(default_factory=dict, compare=False, hash=False)

    @property
    def num_measurements(self) -> int:
        return sum(len(ins.targets) for ins in self.instructions if ins.name in MEASUREMENTS)

    @property
    def num_detectors(self) -> int:
        return len(self.detectors)

    @property
    def num_observables(self) -> int:
        return len(self.observables)

    def count(self, name: str) -> int:
        return sum(len(ins.applications()) for ins in self.instructions if ins.name == name)


@dataclass(frozen=True)
class ProtocolSpec:
    d: int
    w: int
    state: str = "plus"
    rounds_pre: int = 1
    rounds_post: int = 1

    def __post_init__(self):
        if self.state not in ("plus", "zero"):
            raise CircuitError(f"state must be 'plus' or 'zero', got {self.state!r}")
        if self.d < 3 or self.d % 2 == 0:
            raise CircuitError(f"distance must be odd and >= 3, got {self.d}")
        if self.w < 1:
            raise CircuitError(f"width must be >= 1, got {self.w}")
        if self.rounds_pre != 1 or self.rounds_post != 1:
            raise CircuitError("exactly one pre- and one post-surgery round are supported")

    @property
    def rounds_surgery(self) -> int:
        return self.d

    @property
    def basis(self) -> str:
        return "X" if self.state == "plus" else "Z"


def _corner_lookup(plaq: Plaquette) -> dict[tuple[float, float], int]:
    cx, cy = plaq.center
    return {(q.coord[0] - cx, q.coord[1] - cy): q.index for q in plaq.support}


def stabilizer_round(plaquettes: Sequence[Plaquette]) -> tuple[list[Instruction], list[int]]:
    """One round of syndrome extraction over ``plaquettes``.

    Returns the instructions (eight layers, each closed by a TICK) and the
    auxiliary qubits in the order they are measured.
    """
    plaqs = sorted(plaquettes, key=lambda p: p.auxiliary.index)
    aux_all = [p.auxiliary.index for p in plaqs]
    if len(set(aux_all)) != len(aux_all):
        raise ScheduleError("two plaquettes share an auxiliary qubit")
    aux_x = [p.auxiliary.index for p in plaqs if p.basis == "X"]
    ops = [Instruction("RZ", tuple(aux_all)), Instruction(TICK)]
    ops += [Instruction("H", tuple(aux_x)), Instruction(TICK)]
    for layer in range(4):
        targets: list[int] = []
        used: set[int] = set()
        for p in plaqs:
            order = X_SCHEDULE if p.basis == "X" else Z_SCHEDULE
            data = _corner_lookup(p).get(order[layer])
            if data is None:
                continue
            if data in used:
                raise ScheduleError(
                    f"data qubit {data} used twice in CX layer {layer} (plaquette at {p.center})"
                )
            used.add(data)
            a = p.auxiliary.index
            targets += [a, data] if p.basis == "X" else [data, a]
        ops += [Instruction("CX", tuple(targets)), Instruction(TICK)]
    ops += [Instruction("H", tuple(aux_x)), Instruction(TICK)]
    ops += [Instruction("MZ", tuple(aux_all)), Instruction(TICK)]
    return ops, aux_all


class _Builder:
    def __init__(self):
        self.ops: list[Instruction] = []
        self.num_results = 0
        self.detectors: list[Detector] = []

    def measure(self, basis: str, qubits: Iterable[int]) -> dict[int, int]:
        qubits = list(qubits)
        self.ops.append(Instruction("M" + basis, tuple(qubits)))
        self.ops.append(Instruction(TICK))
        out = {q: self.num_results + i for i, q in enumerate(qubits)}
        self.num_results += len(qubits)
        return out

    def reset(self, basis: str, qubits: Iterable[int]) -> None:
        self.ops.append(Instruction("R" + basis, tuple(qubits)))
        self.ops.append(Instruction(TICK))

    def round(self, plaquettes: Sequence[Plaquette]) -> dict[int, int]:
        ops, aux = stabilizer_round(plaquettes)
        # Result indices are assigned by the MZ instruction at the end.
        self.ops.extend(ops)
        out = {a: self.num_results + i for i, a in enumerate(aux)}
        self.num_results += len(aux)
        return out

    def detector(self, results: Iterable[int], tag: tuple[int, int], basis: str) -> None:
        self.detectors.append(Detector(tuple(sorted(results)), tag, basis))


def build_teleportation_circuit(
    spec: ProtocolSpec, layout: MergedLayout, *, readout_left: bool = True
) -> Circuit:
    """Teleport ``|+>_L`` or ``|0>_L`` from the left patch to the right patch.

    Steps: reset the left data and run one round on the left patch; reset
    link and right data in ``|+>``; run ``d`` rounds on the merged patch;
    measure link and left data in X; run one round on the right patch;
    measure the right data in the basis of the teleported state.

    ``readout_left=False`` drops the left/link contribution from the
    observable; it exists so the validator can be shown to catch it.
    """
    if layout.distance != spec.d or layout.width != spec.w:
        raise CircuitError(
            f"layout (d={layout.distance}, w={layout.width}) does not match spec (d={spec.d}, w={spec.w})"
        )
    d, w = spec.d, spec.w
    basis = spec.basis
    left_cols = range(0, d)
    link_cols = range(d, d + w)
    right_cols = range(d + w, 2 * d + w)

    def data_in(cols) -> list[int]:
        return [q.index for q in layout.data_qubits if q.coord[0] in cols]

    left_data, link_data, right_data = data_in(left_cols), data_in(link_cols), data_in(right_cols)
    left_plaqs = {p.auxiliary.index: p for p in layout.left_patch.plaquettes}
    right_plaqs = {p.auxiliary.index: p for p in layout.right_patch.plaquettes}
    merged = {p.auxiliary.index: p for p in layout.merged_plaquettes}

    b = _Builder()
    rnd = 0

    # (1) fault-tolerant initialisation of the left patch
    b.reset(basis, left_data)
    m_pre = b.round(list(left_plaqs.values()))
    for a, p in left_plaqs.items():
        if p.basis == basis:
            b.detector([m_pre[a]], (a, rnd), p.basis)

    # (2) fresh |+> on link and right data
    b.reset("X", sorted(link_data + right_data))

    # (3) d rounds of surgery
    prev = m_pre
    for k in range(1, d + 1):
        rnd += 1
        cur = b.round(list(merged.values()))
        for a, p in merged.items():
            if k == 1:
                if a in left_plaqs:
                    b.detector([cur[a], m_pre[a]], (a, rnd), p.basis)
                elif p.basis == "X":
                    b.detector([cur[a]], (a, rnd), p.basis)
            else:
                b.detector([cur[a], prev[a]], (a, rnd), p.basis)
        prev = cur
    m_last = prev

    # (4) X readout of link and left data
    rnd += 1
    m_x = b.measure("X", sorted(left_data + link_data))
    # (5) one round on the right patch
    m_post = b.round(list(right_plaqs.values()))

    for a, p in merged.items():
        if p.basis != "X":
            continue
        sup = p.support_indices
        if all(q in m_x for q in sup):
            b.detector([m_last[a]] + [m_x[q] for q in sup], (a, rnd), "X")
        elif a in right_plaqs and any(q in m_x for q in sup):
            # seam plaquette: link half from step (4), right half from step (5)
            b.detector(
                [m_last[a], m_post[a]] + [m_x[q] for q in sup if q in m_x], (a, rnd), "X"
            )
    for a, p in right_plaqs.items():
        if merged[a].support_indices == p.support_indices:
            b.detector([m_post[a], m_last[a]], (a, rnd), p.basis)

    # (6) final readout of the right patch
    rnd += 1
    m_final = b.measure(basis, right_data)
    for a, p in right_plaqs.items():
        if p.basis == basis:
            b.detector([m_post[a]] + [m_final[q] for q in p.support_indices], (a, rnd), basis)

    if spec.state == "plus":
        top = [q.index for q in layout.data_qubits if q.coord[1] == 0]
        res = [m_final[q] for q in top if q in m_final]
        if readout_left:
            res += [m_x[q] for q in top if q in m_x]
        obs = Observable(tuple(sorted(res)), "X_L teleported")
    else:
        col = [q.index for q in layout.data_qubits if q.coord[0] == d + w]
        res = [m_final[q] for q in col]
        if readout_left:
            res += [m_last[p.auxiliary.index] for p in layout.link_z_product_set]
        obs = Observable(tuple(sorted(res)), "Z_L teleported")

    qubits = layout.all_qubits
    regions = tuple(layout.region_of[q] for q in qubits)
    coords = tuple(q.coord for q in qubits)
    assert [q.index for q in qubits] == list(range(len(qubits)))
    return Circuit(
        tuple(b.ops),
        tuple(b.detectors),
        (obs,),
        len(qubits),
        regions,
        coords,
        metadata={"d": d, "w": w, "state": spec.state},
    )


def teleportation_circuit(d: int, w: int, state: str = "plus") -> Circuit:
    from .geometry import build_merged_layout

    return build_teleportation_circuit(ProtocolSpec(d, w, state), build_merged_layout(d, w))


def _format_application(name: str, qubits: tuple[int, ...], result: int | None) -> str:
    args = " ".join(str(q) for q in qubits)
    if result is not None:
        return f"{name} {args} rec={result}"
    return f"{name} {args}"


def circuit_to_text(circuit: Circuit, channels: Sequence | None = None) -> str:
    """Line-oriented dump: one gate application per line, TICKs explicit.

    ``channels`` (from :mod:`lsteleport.noise`) are written on the line after
    the application they follow.
    """
    by_loc: dict[tuple[int, tuple[int, ...]], list] = {}
    for ch in channels or ():
        by_loc.setdefault((ch.location, ch.targets), []).append(ch)
    lines = [f"QUBITS {circuit.num_qubits}"]
    result = 0
    for loc, ins in enumerate(circuit.instructions):
        if ins.name == TICK:
            lines.append(TICK)
            continue
        for app in ins.applications():
            rec = None
            if ins.name in MEASUREMENTS:
                rec = result
                result += 1
            lines.append(_format_application(ins.name, app, rec))
            for ch in by_loc.get((loc, app), ()):
                lines.append(ch.to_text())
    for i, det in enumerate(circuit.detectors):
        recs = " ".join(str(r) for r in det.result_indices)
        lines.append(f"DETECTOR {i} {det.basis} tag={det.tag[0]},{det.tag[1]} {recs}")
    for i, obs in enumerate(circuit.observables):
        recs = " ".join(str(r) for r in obs.result_indices)
        lines.append(f"OBSERVABLE {i} {recs}")
    return "\n".join(lines) + "\n"

"""Two-region circuit-level noise.

Every gate application is followed by a depolarizing channel, every reset by
an initialisation flip and every measurement by a classical result flip. The
rate is ``p_link`` when any touched qubit is in the link region, else
``p_bulk``. Idle qubits are noiseless.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .circuit import GATES_1Q, GATES_2Q, MEASUREMENTS, RESETS, TICK, Circuit, circuit_to_text
from .geometry import Region

DEPOLARIZE1 = "depolarize1"
DEPOLARIZE2 = "depolarize2"
FLIP_INIT = "flip_init"
FLIP_MEASURE = "flip_measure"


class NoiseError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseProfile:
    p_bulk: float
    p_link: float

    def __post_init__(self):
        for name in ("p_bulk", "p_link"):
            v = getattr(self, name)
            if not 0 <= v < 0.5:
                raise NoiseError(f"{name} must lie in [0, 0.5), got {v}")

    @classmethod
    def uniform(cls, p: float) -> NoiseProfile:
        return cls(p, p)


@dataclass(frozen=True)
class Channel:
    location: int  # instruction index in the base circuit
    kind: str
    targets: tuple[int, ...]
    p: float
    result: int | None = None  # measurement result index, for flip_measure

    def to_text(self) -> str:
        args = " ".join(str(q) for q in self.targets)
        return f"{self.kind.upper()}({self.p:.17g}) {args}"


@dataclass(frozen=True)
class NoisyCircuit:
    base: Circuit
    channels: tuple[Channel, ...]
    profile: NoiseProfile | None = None

    @property
    def num_detectors(self) -> int:
        return self.base.num_detectors

    @property
    def num_observables(self) -> int:
        return self.base.num_observables

    def to_text(self) -> str:
        return circuit_to_text(self.base, self.channels)


def region_rate(qubits: Sequence[int], profile: NoiseProfile, regions: Sequence[Region]) -> float:
    """``p_link`` if any of ``qubits`` is tagged link, else ``p_bulk``."""
    link = False
    for q in qubits:
        if not 0 <= q < len(regions) or regions[q] is None:
            raise NoiseError(f"qubit {q} has no region tag")
        link |= regions[q] == Region.LINK
    return profile.p_link if link else profile.p_bulk


def apply_noise_profile(circuit: Circuit | NoisyCircuit, profile: NoiseProfile) -> NoisyCircuit:
    """Attach one channel to every gate, reset and measurement application.

    Given a :class:`NoisyCircuit`, its channels are discarded and rebuilt.
    """
    if isinstance(circuit, NoisyCircuit):
        circuit = circuit.base
    regions = circuit.qubit_regions
    channels: list[Channel] = []
    result = 0
    for loc, ins in enumerate(circuit.instructions):
        if ins.name == TICK:
            continue
        if ins.name in GATES_1Q:
            kind = DEPOLARIZE1
        elif ins.name in GATES_2Q:
            kind = DEPOLARIZE2
        elif ins.name in RESETS:
            kind = FLIP_INIT
        elif ins.name in MEASUREMENTS:
            kind = FLIP_MEASURE
        else:
            raise NoiseError(f"operation {loc}: no noise rule for {ins.name!r}")
        for app in ins.applications():
            p = region_rate(app, profile, regions)
            rec = None
            if kind == FLIP_MEASURE:
                rec = result
                result += 1
            channels.append(Channel(loc, kind, app, p, rec))
    return NoisyCircuit(circuit, tuple(channels), profile)

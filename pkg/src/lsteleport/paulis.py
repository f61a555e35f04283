"""Symplectic Pauli strings and GF(2) helpers used by the layout checks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np


@dataclass(frozen=True)
class PauliString:
    """A Hermitian Pauli operator up to sign, stored as X and Z supports."""

    xs: frozenset[int] = frozenset()
    zs: frozenset[int] = frozenset()

    @classmethod
    def x(cls, qubits: Iterable[int]) -> PauliString:
        return cls(xs=frozenset(qubits))

    @classmethod
    def z(cls, qubits: Iterable[int]) -> PauliString:
        return cls(zs=frozenset(qubits))

    @classmethod
    def from_basis(cls, basis: str, qubits: Iterable[int]) -> PauliString:
        if basis == "X":
            return cls.x(qubits)
        if basis == "Z":
            return cls.z(qubits)
        raise ValueError(f"unknown basis {basis!r}")

    def __mul__(self, other: PauliString) -> PauliString:
        return PauliString(self.xs ^ other.xs, self.zs ^ other.zs)

    def commutes(self, other: PauliString) -> bool:
        return (len(self.xs & other.zs) + len(self.zs & other.xs)) % 2 == 0

    @property
    def support(self) -> frozenset[int]:
        return self.xs | self.zs

    @property
    def weight(self) -> int:
        return len(self.support)

    def is_identity(self) -> bool:
        return not self.xs and not self.zs

    def __str__(self) -> str:
        parts = []
        for q in sorted(self.support):
            if q in self.xs and q in self.zs:
                parts.append(f"Y{q}")
            elif q in self.xs:
                parts.append(f"X{q}")
            else:
                parts.append(f"Z{q}")
        return "*".join(parts) if parts else "I"


def product(paulis: Iterable[PauliString]) -> PauliString:
    out = PauliString()
    for p in paulis:
        out = out * p
    return out


def symplectic_matrix(paulis: Iterable[PauliString], num_qubits: int) -> np.ndarray:
    """Rows are ``[x | z]`` bit vectors of length ``2 * num_qubits``."""
    paulis = list(paulis)
    m = np.zeros((len(paulis), 2 * num_qubits), dtype=np.uint8)
    for i, p in enumerate(paulis):
        for q in p.xs:
            m[i, q] = 1
        for q in p.zs:
            m[i, num_qubits + q] = 1
    return m


def gf2_rank(matrix: np.ndarray) -> int:
    m = (np.asarray(matrix) & 1).astype(np.uint8).copy()
    rows, cols = m.shape
    rank = 0
    for col in range(cols):
        if rank == rows:
            break
        pivots = np.nonzero(m[rank:, col])[0]
        if len(pivots) == 0:
            continue
        pivot = rank + pivots[0]
        if pivot != rank:
            m[[rank, pivot]] = m[[pivot, rank]]
        below = np.nonzero(m[:, col])[0]
        below = below[below != rank]
        m[below] ^= m[rank]
        rank += 1
    return rank

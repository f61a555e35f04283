"""Noiseless stabilizer simulation with symbolic measurement outcomes.

Each random measurement introduces a fresh binary symbol; every outcome is
tracked as an affine GF(2) form over those symbols (bit 0 is the constant,
bit ``k`` the ``k``-th symbol, packed into a Python int). A parity of
results is deterministic iff its form has no symbolic part, so one pass
covers every noiseless shot at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuit import GATES_1Q, GATES_2Q, MEASUREMENTS, RESETS, TICK, Circuit


class NonCliffordError(ValueError):
    pass


def _g(x1, z1, x2, z2):
    """Power of ``i`` picked up when multiplying Pauli (x1,z1) by (x2,z2)."""
    x1 = x1.astype(np.int64)
    z1 = z1.astype(np.int64)
    x2 = x2.astype(np.int64)
    z2 = z2.astype(np.int64)
    return np.where(
        x1 & z1,
        z2 - x2,
        np.where(x1 & (1 - z1), z2 * (2 * x2 - 1), np.where(z1 & (1 - x1), x2 * (1 - 2 * z2), 0)),
    )


class SymbolicTableau:
    """Aaronson-Gottesman tableau whose sign bits are affine forms."""

    def __init__(self, n: int):
        self.n = n
        self.x = np.zeros((2 * n, n), dtype=np.uint8)
        self.z = np.zeros((2 * n, n), dtype=np.uint8)
        self.x[np.arange(n), np.arange(n)] = 1
        self.z[n + np.arange(n), np.arange(n)] = 1
        self.r = [0] * (2 * n)
        self.num_symbols = 0

    def h(self, a: int) -> None:
        flip = np.nonzero(self.x[:, a] & self.z[:, a])[0]
        for i in flip:
            self.r[i] ^= 1
        self.x[:, a], self.z[:, a] = self.z[:, a].copy(), self.x[:, a].copy()

    def cx(self, a: int, b: int) -> None:
        flip = np.nonzero(self.x[:, a] & self.z[:, b] & (self.x[:, b] ^ self.z[:, a] ^ 1))[0]
        for i in flip:
            self.r[i] ^= 1
        self.x[:, b] ^= self.x[:, a]
        self.z[:, a] ^= self.z[:, b]

    def _rowsum_many(self, rows: np.ndarray, src: int) -> None:
        if len(rows) == 0:
            return
        g = _g(self.x[src][None, :], self.z[src][None, :], self.x[rows], self.z[rows]).sum(axis=1)
        # both operands are Hermitian, so the total is 0 or 2 mod 4 (ignoring signs)
        const = (g % 4) // 2
        for i, c in zip(rows, const):
            self.r[i] ^= self.r[src] ^ int(c)
        self.x[rows] ^= self.x[src]
        self.z[rows] ^= self.z[src]

    def measure_z(self, a: int) -> int:
        n = self.n
        stab = np.nonzero(self.x[n:, a])[0]
        if len(stab):
            p = n + stab[0]
            others = np.nonzero(self.x[:, a])[0]
            others = others[others != p]
            self._rowsum_many(others, p)
            self.x[p - n], self.z[p - n], self.r[p - n] = self.x[p], self.z[p], self.r[p]
            self.x[p] = 0
            self.z[p] = 0
            self.z[p, a] = 1
            self.num_symbols += 1
            self.r[p] = 1 << self.num_symbols
            return self.r[p]
        sx = np.zeros(n, dtype=np.uint8)
        sz = np.zeros(n, dtype=np.uint8)
        sr = 0
        for i in np.nonzero(self.x[:n, a])[0]:
            src = n + i
            g = int(_g(self.x[src], self.z[src], sx, sz).sum())
            sr ^= self.r[src] ^ ((g % 4) // 2)
            sx ^= self.x[src]
            sz ^= self.z[src]
        return sr

    def measure_x(self, a: int) -> int:
        self.h(a)
        out = self.measure_z(a)
        self.h(a)
        return out

    def reset_z(self, a: int) -> None:
        form = self.measure_z(a)
        # conditionally apply X to land in |0>: flips rows anticommuting with X_a
        for i in np.nonzero(self.z[:, a])[0]:
            self.r[i] ^= form

    def reset_x(self, a: int) -> None:
        self.h(a)
        self.reset_z(a)
        self.h(a)


def symbolic_run(circuit: Circuit) -> tuple[list[int], int]:
    """Affine outcome form of every measurement result, plus the symbol count."""
    t = SymbolicTableau(circuit.num_qubits)
    forms: list[int] = []
    for loc, ins in enumerate(circuit.instructions):
        name = ins.name
        if name == TICK:
            continue
        if name == "H":
            for q in ins.targets:
                t.h(q)
        elif name == "CX":
            for a, b in ins.applications():
                t.cx(a, b)
        elif name == "RZ":
            for q in ins.targets:
                t.reset_z(q)
        elif name == "RX":
            for q in ins.targets:
                t.reset_x(q)
        elif name == "MZ":
            forms += [t.measure_z(q) for q in ins.targets]
        elif name == "MX":
            forms += [t.measure_x(q) for q in ins.targets]
        else:
            raise NonCliffordError(f"operation {loc}: unsupported instruction {name!r}")
    return forms, t.num_symbols


def sample_noiseless(circuit: Circuit, shots: int, seed: int | None = None) -> np.ndarray:
    """Measurement records of ``shots`` ideal executions (shots x results, uint8)."""
    forms, k = symbolic_run(circuit)
    rng = np.random.default_rng(seed)
    symbols = rng.integers(0, 2, size=(shots, k + 1), dtype=np.uint8)
    symbols[:, 0] = 1
    coeff = np.zeros((k + 1, len(forms)), dtype=np.uint8)
    for j, f in enumerate(forms):
        for b in range(k + 1):
            if (f >> b) & 1:
                coeff[b, j] = 1
    return ((symbols.astype(np.int64) @ coeff) & 1).astype(np.uint8)


def record_parities(circuit: Circuit, records: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Detector and observable bits of measurement records (both shots x count, uint8)."""
    records = np.asarray(records, dtype=np.uint8)

    def gather(groups):
        out = np.zeros((records.shape[0], len(groups)), dtype=np.uint8)
        for i, g in enumerate(groups):
            if g.result_indices:
                out[:, i] = np.bitwise_xor.reduce(records[:, list(g.result_indices)], axis=1)
        return out

    return gather(circuit.detectors), gather(circuit.observables)


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    message: str
    operation: int | None = None
    tag: tuple[int, int] | None = None


@dataclass
class ValidationReport:
    diagnostics: list[Diagnostic] = field(default_factory=list)
    num_measurements: int = 0
    num_detectors: int = 0

    @property
    def ok(self) -> bool:
        return not self.diagnostics

    def __str__(self) -> str:
        if self.ok:
            return f"ok: {self.num_measurements} measurements, {self.num_detectors} detectors"
        return "\n".join(
            f"{d.kind}"
            + (f" [op {d.operation}]" if d.operation is not None else "")
            + (f" [tag {d.tag}]" if d.tag is not None else "")
            + f": {d.message}"
            for d in self.diagnostics
        )


def _check_structure(circuit: Circuit, report: ValidationReport) -> None:
    known = set(GATES_1Q) | set(GATES_2Q) | set(RESETS) | set(MEASUREMENTS) | {TICK}
    busy: set[int] = set()
    for loc, ins in enumerate(circuit.instructions):
        if ins.name not in known:
            report.diagnostics.append(Diagnostic("unknown-op", f"instruction {ins.name!r}", loc))
            continue
        if ins.name == TICK:
            busy.clear()
            continue
        if ins.name in GATES_2Q and len(ins.targets) % 2:
            report.diagnostics.append(Diagnostic("odd-targets", "two-qubit gate with odd target count", loc))
            continue
        for app in ins.applications():
            if len(set(app)) != len(app):
                report.diagnostics.append(Diagnostic("self-gate", f"gate acts twice on {app[0]}", loc))
            for q in app:
                if not 0 <= q < circuit.num_qubits:
                    report.diagnostics.append(Diagnostic("bad-qubit", f"qubit {q} out of range", loc))
                elif q in busy:
                    report.diagnostics.append(
                        Diagnostic("double-use", f"qubit {q} acted on twice between ticks", loc)
                    )
                busy.add(q)
    m = circuit.num_measurements
    for i, det in enumerate(circuit.detectors):
        bad = [r for r in det.result_indices if not 0 <= r < m]
        if bad:
            report.diagnostics.append(
                Diagnostic("bad-result", f"detector {i} references results {bad}", tag=det.tag)
            )
    for i, obs in enumerate(circuit.observables):
        bad = [r for r in obs.result_indices if not 0 <= r < m]
        if bad:
            report.diagnostics.append(Diagnostic("bad-result", f"observable {i} references results {bad}"))


def validate_circuit(circuit: Circuit) -> ValidationReport:
    """Structural checks, then exact noiseless determinism of detectors and observables."""
    report = ValidationReport(num_measurements=circuit.num_measurements, num_detectors=circuit.num_detectors)
    _check_structure(circuit, report)
    if not report.ok:
        return report
    try:
        forms, _ = symbolic_run(circuit)
    except NonCliffordError as exc:
        report.diagnostics.append(Diagnostic("non-clifford", str(exc)))
        return report

    def parity(indices) -> int:
        acc = 0
        for r in indices:
            acc ^= forms[r]
        return acc

    for i, det in enumerate(circuit.detectors):
        f = parity(det.result_indices)
        if f >> 1:
            report.diagnostics.append(
                Diagnostic("random-detector", f"detector {i} ({det.basis}) is not deterministic", tag=det.tag)
            )
        elif f:
            report.diagnostics.append(
                Diagnostic("odd-detector", f"detector {i} ({det.basis}) has noiseless parity 1", tag=det.tag)
            )
    for i, obs in enumerate(circuit.observables):
        f = parity(obs.result_indices)
        if f >> 1:
            report.diagnostics.append(Diagnostic("random-observable", f"observable {i} ({obs.label}) is not deterministic"))
        elif f:
            report.diagnostics.append(Diagnostic("odd-observable", f"observable {i} ({obs.label}) has noiseless parity 1"))
    return report

"""Pauli-frame Monte Carlo sampling.

Shots are grouped into fixed blocks of :data:`BLOCK_SHOTS`; block ``b`` draws
all of its randomness from ``SeedSequence((seed, b))``. Any shot range is
produced by regenerating the blocks that cover it and slicing, so results do
not depend on how a run is split into batches or spread across workers.

Noise events are drawn by geometric gap sampling over the flattened
``channel x shot`` grid, which costs time proportional to the number of
events rather than the number of channels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix

from .circuit import TICK
from .dem import DetectorErrorModel
from .noise import DEPOLARIZE1, DEPOLARIZE2, FLIP_INIT, FLIP_MEASURE, NoisyCircuit

BLOCK_SHOTS = 1024

_H, _CX, _RX, _RZ, _MX, _MZ = range(6)
_OPCODES = {"H": _H, "CX": _CX, "RX": _RX, "RZ": _RZ, "MX": _MX, "MZ": _MZ}
_K_DEP1, _K_DEP2, _K_INIT_X, _K_INIT_Z, _K_MEAS = range(5)


@dataclass
class SampleBatch:
    shots: int
    detector_bits: np.ndarray  # shots x detectors, uint8
    observable_bits: np.ndarray  # shots x observables, uint8
    seed: int
    shot_offset: int = 0

    def dump(self) -> bytes:
        """Header line, then each shot's detector and observable bits packed little-endian."""
        nd = self.detector_bits.shape[1]
        no = self.observable_bits.shape[1]
        head = f"shots={self.shots} seed={self.seed} offset={self.shot_offset} detectors={nd} observables={no}\n"
        bits = np.concatenate([self.detector_bits, self.observable_bits], axis=1)
        packed = np.packbits(bits, axis=1, bitorder="little")
        return head.encode() + packed.tobytes()

    @classmethod
    def load(cls, data: bytes) -> SampleBatch:
        head, _, body = data.partition(b"\n")
        f = dict(kv.split("=") for kv in head.decode().split())
        shots, nd, no = int(f["shots"]), int(f["detectors"]), int(f["observables"])
        width = (nd + no + 7) // 8
        packed = np.frombuffer(body, dtype=np.uint8).reshape(shots, width)
        bits = np.unpackbits(packed, axis=1, count=nd + no, bitorder="little")
        return cls(shots, bits[:, :nd].copy(), bits[:, nd:].copy(), int(f["seed"]), int(f["offset"]))

    @staticmethod
    def concatenate(batches: list[SampleBatch]) -> SampleBatch:
        first = batches[0]
        return SampleBatch(
            sum(b.shots for b in batches),
            np.concatenate([b.detector_bits for b in batches]),
            np.concatenate([b.observable_bits for b in batches]),
            first.seed,
            first.shot_offset,
        )


@dataclass
class _Program:
    ops: list  # (location, opcode, a, b, first result)
    num_qubits: int
    num_results: int
    det_matrix: csr_matrix
    obs_matrix: csr_matrix
    ch_loc: np.ndarray
    ch_kind: np.ndarray
    ch_qa: np.ndarray
    ch_qb: np.ndarray
    ch_res: np.ndarray
    groups: list  # (probability, channel indices)


def _parity_matrix(rows, num_results: int) -> csr_matrix:
    data, r, c = [], [], []
    for i, idx in enumerate(rows):
        for j in idx:
            r.append(i)
            c.append(j)
            data.append(1)
    return csr_matrix((np.array(data, dtype=np.int32), (r, c)), shape=(len(rows), num_results))


def _compile(noisy: NoisyCircuit) -> _Program:
    circuit = noisy.base
    ops = []
    result = 0
    for loc, ins in enumerate(circuit.instructions):
        if ins.name == TICK:
            continue
        code = _OPCODES.get(ins.name)
        if code is None:
            raise ValueError(f"operation {loc}: cannot simulate {ins.name!r}")
        t = np.array(ins.targets, dtype=np.int64)
        if code == _CX:
            ops.append((loc, code, t[0::2], t[1::2], result))
        else:
            ops.append((loc, code, t, None, result))
        if code in (_MX, _MZ):
            result += len(t)
    names = {loc: ins.name for loc, ins in enumerate(circuit.instructions)}
    chans = [c for c in noisy.channels if c.p > 0]
    kinds = []
    for c in chans:
        if c.kind == DEPOLARIZE1:
            kinds.append(_K_DEP1)
        elif c.kind == DEPOLARIZE2:
            kinds.append(_K_DEP2)
        elif c.kind == FLIP_INIT:
            kinds.append(_K_INIT_X if names[c.location] == "RZ" else _K_INIT_Z)
        elif c.kind == FLIP_MEASURE:
            kinds.append(_K_MEAS)
        else:
            raise ValueError(f"unknown channel kind {c.kind!r}")
    probs = np.array([c.p for c in chans], dtype=np.float64)
    groups = [(float(p), np.nonzero(probs == p)[0]) for p in np.unique(probs)]
    return _Program(
        ops=ops,
        num_qubits=circuit.num_qubits,
        num_results=result,
        det_matrix=_parity_matrix([d.result_indices for d in circuit.detectors], result),
        obs_matrix=_parity_matrix([o.result_indices for o in circuit.observables], result),
        ch_loc=np.array([c.location for c in chans], dtype=np.int64),
        ch_kind=np.array(kinds, dtype=np.int8),
        ch_qa=np.array([c.targets[0] for c in chans], dtype=np.int64),
        ch_qb=np.array([c.targets[1] if len(c.targets) > 1 else -1 for c in chans], dtype=np.int64),
        ch_res=np.array([c.result if c.result is not None else -1 for c in chans], dtype=np.int64),
        groups=groups,
    )


_program_cache: dict[int, tuple[NoisyCircuit, _Program]] = {}


def _program(noisy: NoisyCircuit) -> _Program:
    hit = _program_cache.get(id(noisy))
    if hit is not None and hit[0] is noisy:
        return hit[1]
    prog = _compile(noisy)
    if len(_program_cache) > 8:
        _program_cache.clear()
    _program_cache[id(noisy)] = (noisy, prog)
    return prog


def bernoulli_positions(rng: np.random.Generator, p: float, n: int) -> np.ndarray:
    """Sorted indices in ``[0, n)`` that fire, each independently with probability ``p``."""
    if p <= 0 or n <= 0:
        return np.zeros(0, dtype=np.int64)
    if p >= 1:
        return np.arange(n, dtype=np.int64)
    out = []
    pos = -1
    while True:
        expect = (n - pos) * p
        k = int(expect + 6 * np.sqrt(expect) + 16)
        gaps = rng.geometric(p, size=k)
        idx = pos + np.cumsum(gaps)
        out.append(idx[idx < n])
        if idx[-1] >= n:
            break
        pos = int(idx[-1])
    return np.concatenate(out)


def _sample_block(prog: _Program, rng: np.random.Generator, shots: int):
    # draw every event of the block up front, then replay them in circuit order
    ev_ch, ev_shot = [], []
    for p, members in prog.groups:
        hits = bernoulli_positions(rng, p, len(members) * shots)
        ev_ch.append(members[hits // shots])
        ev_shot.append(hits % shots)
    if ev_ch:
        ch = np.concatenate(ev_ch)
        sh = np.concatenate(ev_shot)
    else:
        ch = np.zeros(0, dtype=np.int64)
        sh = np.zeros(0, dtype=np.int64)
    kind = prog.ch_kind[ch]
    pauli = np.ones(len(ch), dtype=np.int64)
    m1 = kind == _K_DEP1
    m2 = kind == _K_DEP2
    pauli[m1] = rng.integers(1, 4, size=int(m1.sum()))
    pauli[m2] = rng.integers(1, 16, size=int(m2.sum()))
    order = np.argsort(prog.ch_loc[ch], kind="stable")
    ch, sh, kind, pauli = ch[order], sh[order], kind[order], pauli[order]
    locs = prog.ch_loc[ch]

    x = np.zeros((prog.num_qubits, shots), dtype=np.uint8)
    z = np.zeros((prog.num_qubits, shots), dtype=np.uint8)
    rec = np.zeros((prog.num_results, shots), dtype=np.uint8)
    for loc, code, a, b, r0 in prog.ops:
        if code == _CX:
            x[b] ^= x[a]
            z[a] ^= z[b]
        elif code == _H:
            x[a], z[a] = z[a], x[a].copy()
        elif code == _RZ or code == _RX:
            x[a] = 0
            z[a] = 0
        elif code == _MZ:
            rec[r0 : r0 + len(a)] = x[a]
        else:
            rec[r0 : r0 + len(a)] = z[a]
        lo = np.searchsorted(locs, loc, "left")
        hi = np.searchsorted(locs, loc, "right")
        if lo == hi:
            continue
        c, s, k, pl = ch[lo:hi], sh[lo:hi], kind[lo:hi], pauli[lo:hi]
        qa = prog.ch_qa[c]
        sel = k == _K_MEAS
        if sel.any():
            rec[prog.ch_res[c[sel]], s[sel]] ^= 1
        sel = k == _K_INIT_X
        if sel.any():
            x[qa[sel], s[sel]] ^= 1
        sel = k == _K_INIT_Z
        if sel.any():
            z[qa[sel], s[sel]] ^= 1
        sel = k == _K_DEP1
        if sel.any():
            x[qa[sel], s[sel]] ^= (pl[sel] & 1).astype(np.uint8)
            z[qa[sel], s[sel]] ^= (pl[sel] >> 1).astype(np.uint8)
        sel = k == _K_DEP2
        if sel.any():
            qb = prog.ch_qb[c[sel]]
            ss, pp = s[sel], pl[sel]
            x[qa[sel], ss] ^= (pp & 1).astype(np.uint8)
            z[qa[sel], ss] ^= ((pp >> 1) & 1).astype(np.uint8)
            x[qb, ss] ^= ((pp >> 2) & 1).astype(np.uint8)
            z[qb, ss] ^= ((pp >> 3) & 1).astype(np.uint8)
    det = (prog.det_matrix @ rec.astype(np.int32)) & 1
    obs = (prog.obs_matrix @ rec.astype(np.int32)) & 1
    return det.T.astype(np.uint8), obs.T.astype(np.uint8)


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(block)]))


def _blocked(fn, shots: int, seed: int, shot_offset: int):
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if shot_offset < 0:
        raise ValueError("shot_offset must be >= 0")
    first = shot_offset // BLOCK_SHOTS
    last = (shot_offset + shots - 1) // BLOCK_SHOTS
    dets, obss = [], []
    for b in range(first, last + 1):
        d, o = fn(_block_rng(seed, b), BLOCK_SHOTS)
        lo = max(shot_offset - b * BLOCK_SHOTS, 0)
        hi = min(shot_offset + shots - b * BLOCK_SHOTS, BLOCK_SHOTS)
        dets.append(d[lo:hi])
        obss.append(o[lo:hi])
    return np.concatenate(dets), np.concatenate(obss)


def sample_circuit(noisy: NoisyCircuit, shots: int, seed: int, shot_offset: int = 0) -> SampleBatch:
    """Detector and observable flips for shots ``shot_offset .. shot_offset + shots``."""
    prog = _program(noisy)
    det, obs = _blocked(lambda rng, n: _sample_block(prog, rng, n), shots, seed, shot_offset)
    return SampleBatch(shots, det, obs, seed, shot_offset)


def sample_dem(dem: DetectorErrorModel, shots: int, seed: int, shot_offset: int = 0) -> SampleBatch:
    """Each mechanism fires independently; outputs are XORs of fired symptoms."""
    h, lo, p = dem.check_matrix()
    hs = csr_matrix(h.astype(np.int32))
    ls = csr_matrix(lo.astype(np.int32))

    def block(rng, n):
        fired = (rng.random((len(p), n)) < p[:, None]).astype(np.int32)
        det = (hs @ fired) & 1
        obs = (ls @ fired) & 1
        return det.T.astype(np.uint8), obs.T.astype(np.uint8)

    det, obs = _blocked(block, shots, seed, shot_offset)
    return SampleBatch(shots, det, obs, seed, shot_offset)

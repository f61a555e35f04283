"""Rotated surface code patches and the merged patch used for lattice surgery.

Conventions
-----------
Data qubits sit at integer ``(column, row)`` coordinates, auxiliary qubits at
the half-integer centres of their plaquettes. Rows grow downwards. Every
patch has X-type boundaries on its left and right edges (weight-2 X
plaquettes) and Z-type boundaries on its top and bottom edges (weight-2 Z
plaquettes). Plaquette colours follow one global checkerboard: the plaquette
centred at ``(c + 1/2, r + 1/2)`` is X-type iff ``c + r`` is even.

With this choice the logical X operator runs along a row (canonically the top
row) and the logical Z operator along a column (canonically the leftmost
column). Two patches placed side by side with ``w`` link columns between them
merge into a ``d x (2d + w)`` rectangle whose new Z plaquettes multiply to
``Z_L (left) * Z_L (right)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

from .paulis import PauliString, product


class Region(str, Enum):
    BULK = "bulk"
    LINK = "link"


class LayoutError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class QubitId:
    index: int
    coord: tuple[float, float]
    kind: str  # "data" or "aux"


@dataclass(frozen=True)
class Plaquette:
    basis: str
    support: tuple[QubitId, ...]
    auxiliary: QubitId
    region: Region = Region.BULK

    @property
    def support_indices(self) -> tuple[int, ...]:
        return tuple(q.index for q in self.support)

    @property
    def center(self) -> tuple[float, float]:
        return self.auxiliary.coord

    def pauli(self) -> PauliString:
        return PauliString.from_basis(self.basis, self.support_indices)


@dataclass(frozen=True)
class PatchLayout:
    distance: int
    data_qubits: tuple[QubitId, ...]
    plaquettes: tuple[Plaquette, ...]
    logical_x_support: frozenset[QubitId]
    logical_z_support: frozenset[QubitId]
    first_column: int = 0

    @property
    def auxiliary_qubits(self) -> tuple[QubitId, ...]:
        return tuple(p.auxiliary for p in self.plaquettes)

    @property
    def num_qubits(self) -> int:
        qs = {q.index for q in self.data_qubits} | {q.index for q in self.auxiliary_qubits}
        return max(qs) + 1


@dataclass(frozen=True)
class MergedLayout:
    distance: int
    width: int
    left_patch: PatchLayout
    right_patch: PatchLayout
    data_qubits: tuple[QubitId, ...]
    link_data: frozenset[QubitId]
    merged_plaquettes: tuple[Plaquette, ...]
    link_z_product_set: tuple[Plaquette, ...]
    region_of: Mapping[QubitId, Region] = field(repr=False)

    @property
    def num_columns(self) -> int:
        return 2 * self.distance + self.width

    @property
    def link_columns(self) -> range:
        return range(self.distance, self.distance + self.width)

    @property
    def plaquettes(self) -> tuple[Plaquette, ...]:
        return self.merged_plaquettes

    @property
    def auxiliary_qubits(self) -> tuple[QubitId, ...]:
        seen: dict[int, QubitId] = {}
        for plaq_set in (self.merged_plaquettes, self.left_patch.plaquettes, self.right_patch.plaquettes):
            for p in plaq_set:
                seen.setdefault(p.auxiliary.index, p.auxiliary)
        return tuple(seen[i] for i in sorted(seen))

    @property
    def all_qubits(self) -> tuple[QubitId, ...]:
        return tuple(sorted(self.data_qubits + self.auxiliary_qubits, key=lambda q: q.index))

    @property
    def num_qubits(self) -> int:
        return len(self.all_qubits)


class _Registry:
    """Assigns qubit indices in row-major order of the doubled coordinate grid."""

    def __init__(self, num_columns: int, distance: int):
        coords = []
        for y2 in range(-1, 2 * distance):
            for x2 in range(-1, 2 * num_columns):
                if x2 % 2 == 0 and y2 % 2 == 0 and y2 >= 0 and x2 >= 0:
                    coords.append(((x2 // 2, y2 // 2), "data"))
                elif x2 % 2 != 0 and y2 % 2 != 0:
                    coords.append(((x2 / 2, y2 / 2), "aux"))
        self._all = coords
        self._used: dict[tuple[float, float], QubitId] = {}
        self._order = {c: i for i, (c, _) in enumerate(coords)}

    def get(self, coord: tuple[float, float], kind: str) -> QubitId:
        q = self._used.get(coord)
        if q is None:
            q = QubitId(-1, coord, kind)
            self._used[coord] = q
        return q

    def finalize(self) -> dict[tuple[float, float], QubitId]:
        used = sorted(self._used, key=lambda c: self._order[c])
        return {c: QubitId(i, c, self._used[c].kind) for i, c in enumerate(used)}


def _check_distance(d: int) -> None:
    if not isinstance(d, int) or d < 3 or d % 2 == 0:
        raise LayoutError(f"distance must be an odd integer >= 3, got {d!r}")


def _rect_plaquette_specs(first_col: int, num_cols: int, rows: int):
    """Yield ``(basis, centre, corner coords)`` for a rectangle of data qubits."""
    last_col = first_col + num_cols - 1
    for r in range(-1, rows):
        for c in range(first_col - 1, last_col + 1):
            basis = "X" if (c + r) % 2 == 0 else "Z"
            corners = [
                (x, y)
                for (x, y) in ((c, r), (c + 1, r), (c, r + 1), (c + 1, r + 1))
                if first_col <= x <= last_col and 0 <= y < rows
            ]
            if len(corners) == 4:
                yield basis, (c + 0.5, r + 0.5), corners
            elif len(corners) == 2:
                on_side = c == first_col - 1 or c == last_col
                on_top_bottom = r == -1 or r == rows - 1
                if (on_side and basis == "X") or (on_top_bottom and basis == "Z"):
                    yield basis, (c + 0.5, r + 0.5), corners


def _make_patch(
    d: int,
    first_col: int,
    lookup: Mapping[tuple[float, float], QubitId],
    region_of: Mapping[QubitId, Region] | None = None,
) -> PatchLayout:
    data = tuple(sorted((lookup[(c, r)] for r in range(d) for c in range(first_col, first_col + d)), key=lambda q: q.index))
    plaqs = []
    for basis, centre, corners in _rect_plaquette_specs(first_col, d, d):
        aux = lookup[centre]
        region = region_of.get(aux, Region.BULK) if region_of else Region.BULK
        support = tuple(sorted((lookup[c] for c in corners), key=lambda q: q.index))
        plaqs.append(Plaquette(basis, support, aux, region))
    plaqs.sort(key=lambda p: p.auxiliary.index)
    lx = frozenset(lookup[(c, 0)] for c in range(first_col, first_col + d))
    lz = frozenset(lookup[(first_col, r)] for r in range(d))
    return PatchLayout(d, data, tuple(plaqs), lx, lz, first_col)


def build_patch(d: int) -> PatchLayout:
    """Standalone distance-``d`` rotated surface code patch."""
    _check_distance(d)
    reg = _Registry(d, d)
    for r in range(d):
        for c in range(d):
            reg.get((c, r), "data")
    for _, centre, _ in _rect_plaquette_specs(0, d, d):
        reg.get(centre, "aux")
    return _make_patch(d, 0, reg.finalize())


def build_merged_layout(d: int, w: int) -> MergedLayout:
    """Left patch, ``w`` link columns and right patch, indexed consistently.

    The left and right patches share qubit indices with the merged patch, so a
    circuit can move between the three plaquette sets without remapping.
    """
    _check_distance(d)
    if not isinstance(w, int) or w < 1:
        raise LayoutError(f"link width must be an integer >= 1, got {w!r}")
    ncols = 2 * d + w
    link_cols = set(range(d, d + w))
    reg = _Registry(ncols, d)
    for r in range(d):
        for c in range(ncols):
            reg.get((c, r), "data")
    specs = list(_rect_plaquette_specs(0, ncols, d))
    for first in (0, d + w):
        specs += list(_rect_plaquette_specs(first, d, d))
    for _, centre, _ in specs:
        reg.get(centre, "aux")
    lookup = reg.finalize()

    region_of: dict[QubitId, Region] = {}
    for coord, q in lookup.items():
        if q.kind == "data":
            region_of[q] = Region.LINK if coord[0] in link_cols else Region.BULK

    merged = []
    for basis, centre, corners in _rect_plaquette_specs(0, ncols, d):
        aux = lookup[centre]
        inside = all(x in link_cols for x, _ in corners)
        region = Region.LINK if inside else Region.BULK
        region_of[aux] = region
        support = tuple(sorted((lookup[c] for c in corners), key=lambda q: q.index))
        merged.append(Plaquette(basis, support, aux, region))
    merged.sort(key=lambda p: p.auxiliary.index)
    for q in lookup.values():
        region_of.setdefault(q, Region.BULK)

    left = _make_patch(d, 0, lookup, region_of)
    right = _make_patch(d, d + w, lookup, region_of)
    data = tuple(sorted((q for q in lookup.values() if q.kind == "data"), key=lambda q: q.index))
    link_data = frozenset(q for q in data if q.coord[0] in link_cols)
    zset = tuple(
        p for p in merged if p.basis == "Z" and any(q.coord[0] in link_cols for q in p.support)
    )
    return MergedLayout(d, w, left, right, data, link_data, tuple(merged), zset, region_of)


def logical_support(layout: PatchLayout | MergedLayout, operator: str) -> PauliString:
    """Canonical representative of ``X_L``, ``Z_L`` or (merged only) ``Z_L Z_L``.

    For a merged layout ``X_L`` is the full top row and ``Z_L`` the leftmost
    column of the rectangle; ``Z_L Z_L`` is Z on the facing columns of the two
    patches, i.e. exactly the product of the link Z plaquettes.
    """
    op = operator.replace(" ", "").replace("_", "").upper()
    if isinstance(layout, PatchLayout):
        if op == "XL":
            return PauliString.x(q.index for q in layout.logical_x_support)
        if op == "ZL":
            return PauliString.z(q.index for q in layout.logical_z_support)
        if op == "ZLZL":
            raise LayoutError("Z_L Z_L is only defined on a merged layout")
    elif isinstance(layout, MergedLayout):
        d, w = layout.distance, layout.width
        if op == "XL":
            return PauliString.x(q.index for q in layout.data_qubits if q.coord[1] == 0)
        if op == "ZL":
            return PauliString.z(q.index for q in layout.data_qubits if q.coord[0] == 0)
        if op == "ZLZL":
            cols = (d - 1, d + w)
            return PauliString.z(q.index for q in layout.data_qubits if q.coord[0] in cols)
    raise LayoutError(f"unknown logical operator {operator!r}")


def plaquette_product(plaquettes: Iterable[Plaquette]) -> PauliString:
    return product(p.pauli() for p in plaquettes)


def dump_layout(layout: PatchLayout | MergedLayout) -> str:
    """Deterministic text form: one ``Q`` line per qubit, one ``P`` line per plaquette."""
    lines = []
    if isinstance(layout, MergedLayout):
        lines.append(f"MERGED d={layout.distance} w={layout.width}")
        qubits = layout.all_qubits
        region = layout.region_of
        plaqs = layout.merged_plaquettes
    else:
        lines.append(f"PATCH d={layout.distance}")
        qubits = tuple(sorted(layout.data_qubits + layout.auxiliary_qubits, key=lambda q: q.index))
        region = {}
        plaqs = layout.plaquettes
    for q in qubits:
        reg = region.get(q, Region.BULK).value
        lines.append(f"Q {q.index} {q.kind} {q.coord[0]:g} {q.coord[1]:g} {reg}")
    for p in plaqs:
        sup = " ".join(str(i) for i in p.support_indices)
        lines.append(f"P {p.auxiliary.index} {p.basis} {p.region.value} {sup}")
    return "\n".join(lines) + "\n"

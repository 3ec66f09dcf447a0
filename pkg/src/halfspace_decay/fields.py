"""Grid-sampled fields on a slab of cells times a t-interval, plus file I/O.

A field lives on a truncation box made of whole lattice cells, with an
integer number of sample points per cell per axis (commensurability is
structural, not checked after the fact).  Grid points sit at fractional
coordinates (c + j/n) of the cell basis, left-aligned, which makes the
per-cell grid exactly the periodic DFT grid of the torus.

File format: a one-line JSON header followed by "re,im" pairs, one grid value
per line, x-major then t.  NumPy .npz is accepted as a binary alternative.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import GridError, SchemaError
from .lattice import Lattice, unit_cell_volume

FIELD_KINDS = ("u", "potential")


@dataclass(frozen=True, eq=False)
class SampledField:
    """Complex samples indexed (x-axes..., t) on a box of whole cells."""

    kind: str
    lattice: Lattice
    cells_lo: tuple[int, ...]
    cells_shape: tuple[int, ...]
    points_per_cell: int
    t_start: float
    t_end: float
    values: np.ndarray

    def __post_init__(self):
        if self.kind not in FIELD_KINDS:
            raise SchemaError(f"field kind must be one of {FIELD_KINDS}")
        dim = self.lattice.dim
        cells_lo = tuple(int(c) for c in self.cells_lo)
        cells_shape = tuple(int(c) for c in self.cells_shape)
        if len(cells_lo) != dim or len(cells_shape) != dim:
            raise GridError("cell box dimensions disagree with the lattice")
        if any(c <= 0 for c in cells_shape):
            raise GridError("cell box must be nonempty")
        n = int(self.points_per_cell)
        if n < 1:
            raise GridError("need at least one point per cell per axis")
        values = np.asarray(self.values, dtype=complex)
        expected = tuple(c * n for c in cells_shape)
        if values.shape[:-1] != expected:
            raise GridError(
                f"value array spatial shape {values.shape[:-1]} does not match "
                f"cells*points {expected}"
            )
        if values.shape[-1] < 2:
            raise GridError("need at least two t samples")
        if not self.t_end > self.t_start:
            raise GridError("t-range must be increasing")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "cells_lo", cells_lo)
        object.__setattr__(self, "cells_shape", cells_shape)
        object.__setattr__(self, "points_per_cell", n)
        if self.kind == "potential":
            self._check_periodic()

    def _check_periodic(self):
        base = self.cell_block(self.cells_lo)
        scale = max(1.0, float(np.max(np.abs(self.values))))
        for cell in self.iter_cells():
            if np.max(np.abs(self.cell_block(cell) - base)) > 1e-12 * scale:
                raise SchemaError("potential field is not periodic across cell copies")

    @property
    def dim(self) -> int:
        return self.lattice.dim

    @property
    def n_t(self) -> int:
        return self.values.shape[-1]

    @property
    def t_grid(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.n_t)

    def iter_cells(self):
        ranges = [range(lo, lo + sh) for lo, sh in zip(self.cells_lo, self.cells_shape)]
        mesh = np.meshgrid(*[np.array(list(r)) for r in ranges], indexing="ij")
        for idx in zip(*[m.reshape(-1) for m in mesh]):
            yield tuple(int(v) for v in idx)

    def cell_block(self, cell) -> np.ndarray:
        """Samples of one cell, shape (n, ..., n, n_t)."""
        n = self.points_per_cell
        slices = tuple(
            slice((c - lo) * n, (c - lo + 1) * n) for c, lo in zip(cell, self.cells_lo)
        )
        return self.values[slices]

    def cell_l2_mass(self, cell) -> float:
        """L2 mass of one cell block, space-time, with the cell measure."""
        w = unit_cell_volume(self.lattice) / self.points_per_cell**self.dim
        dt = (self.t_end - self.t_start) / (self.n_t - 1)
        return float(w * dt * np.sum(np.abs(self.cell_block(cell)) ** 2))

    def positions(self) -> np.ndarray:
        """Grid point coordinates, shape (*spatial, dim)."""
        n = self.points_per_cell
        axes = [
            lo + np.arange(sh * n) / n for lo, sh in zip(self.cells_lo, self.cells_shape)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        frac = np.stack(mesh, axis=-1)
        return frac @ self.lattice.basis.T

    def l2_norm_squared(self) -> float:
        """Plain space-time L2 mass with uniform weights (trapezoid in t)."""
        w = unit_cell_volume(self.lattice) / self.points_per_cell**self.dim
        tw = np.ones(self.n_t)
        tw[0] = tw[-1] = 0.5
        dt = (self.t_end - self.t_start) / (self.n_t - 1)
        return float(w * dt * np.sum(np.abs(self.values) ** 2 * tw))


def zero_like(field: SampledField, kind: str = "u") -> SampledField:
    return SampledField(
        kind=kind,
        lattice=field.lattice,
        cells_lo=field.cells_lo,
        cells_shape=field.cells_shape,
        points_per_cell=field.points_per_cell,
        t_start=field.t_start,
        t_end=field.t_end,
        values=np.zeros_like(field.values),
    )


def constant_potential(
    lattice: Lattice,
    value: complex,
    points_per_cell: int,
    t_start: float,
    t_end: float,
    n_t: int,
) -> SampledField:
    shape = (points_per_cell,) * lattice.dim + (n_t,)
    return SampledField(
        kind="potential",
        lattice=lattice,
        cells_lo=(0,) * lattice.dim,
        cells_shape=(1,) * lattice.dim,
        points_per_cell=points_per_cell,
        t_start=t_start,
        t_end=t_end,
        values=np.full(shape, complex(value)),
    )


def save_field(field: SampledField, path) -> None:
    path = Path(path)
    header = {
        "dim": field.dim,
        "cells_lo": list(field.cells_lo),
        "cells_shape": list(field.cells_shape),
        "points_per_cell": field.points_per_cell,
        "t_start": field.t_start,
        "t_end": field.t_end,
        "t_points": field.n_t,
        "kind": field.kind,
    }
    if path.suffix == ".npz":
        np.savez(
            path,
            header=np.frombuffer(json.dumps(header, sort_keys=True).encode(), dtype=np.uint8),
            values=field.values,
        )
        return
    flat = field.values.reshape(-1)  # x-major then t (C order)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for v in flat:
            fh.write(f"{v.real:.17g},{v.imag:.17g}\n")


def load_field(path, lattice: Lattice) -> SampledField:
    path = Path(path)
    if path.suffix == ".npz":
        with np.load(path) as data:
            header = json.loads(bytes(data["header"]).decode())
            values = np.asarray(data["values"], dtype=complex)
    else:
        with open(path, "r", encoding="utf-8") as fh:
            header = json.loads(fh.readline())
            pairs = np.loadtxt(fh, delimiter=",", ndmin=2)
        values = pairs[:, 0] + 1j * pairs[:, 1]
    allowed = {
        "dim", "cells_lo", "cells_shape", "points_per_cell",
        "t_start", "t_end", "t_points", "kind",
    }
    unknown = set(header) - allowed
    if unknown:
        raise SchemaError(f"unknown field header keys: {sorted(unknown)}")
    missing = allowed - set(header)
    if missing:
        raise SchemaError(f"missing field header keys: {sorted(missing)}")
    if int(header["dim"]) != lattice.dim:
        raise GridError("field dimension disagrees with the lattice")
    n = int(header["points_per_cell"])
    shape = tuple(int(c) * n for c in header["cells_shape"]) + (int(header["t_points"]),)
    values = values.reshape(shape)
    return SampledField(
        kind=str(header["kind"]),
        lattice=lattice,
        cells_lo=tuple(int(v) for v in header["cells_lo"]),
        cells_shape=tuple(int(v) for v in header["cells_shape"]),
        points_per_cell=n,
        t_start=float(header["t_start"]),
        t_end=float(header["t_end"]),
        values=values,
    )

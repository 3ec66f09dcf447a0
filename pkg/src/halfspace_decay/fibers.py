"""Discretised Bloch decomposition: lattice sums, inversion, fiber residuals.

For a quasimomentum with dual-basis coordinates mu, every phase in the
transform reduces to exp(-2*pi*i * mu.(c + j/n)) over cell indices c and
intra-cell indices j, because f_i . e_j = 2*pi*delta_ij.  The per-cell grid is
then exactly the n^d DFT grid of the torus, so the physical/spectral
conversion is a unitary FFT and the fiber operator acts diagonally with
eigenvalues |k + theta|^2 - E over wrapped integer mode vectors.

The theta-grid for inversion is uniform (midpoint) over the dual cell in
dual-basis coordinates, which makes the reconstruction exact for data
band-limited to fewer cells than the grid resolves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GridError, SchemaError
from .fields import SampledField
from .lattice import Lattice, Quasimomentum, dual_basis, unit_cell_volume
from .profiles import SpectralProfile


@dataclass(eq=False)
class BlochFiber:
    """One fiber of the decomposition: torus values (or mode coefficients) per t.

    ``data`` has shape (n, ..., n, n_t); ``representation`` is "physical"
    (cell-grid samples) or "spectral" (orthonormal DFT coefficients).
    ``tail_bound`` is the L2 bound on the lattice-sum truncation error.
    """

    theta: Quasimomentum
    lattice: Lattice
    points_per_cell: int
    t_start: float
    t_end: float
    data: np.ndarray
    representation: str = "physical"
    tail_bound: float = 0.0

    def __post_init__(self):
        if self.representation not in ("physical", "spectral"):
            raise SchemaError("representation must be physical or spectral")
        self.data = np.asarray(self.data, dtype=complex)
        n = self.points_per_cell
        if self.data.shape[:-1] != (n,) * self.lattice.dim:
            raise GridError("fiber data shape disagrees with the cell grid")

    @property
    def dim(self) -> int:
        return self.lattice.dim

    @property
    def n_t(self) -> int:
        return self.data.shape[-1]

    @property
    def t_grid(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.n_t)

    @property
    def spatial_axes(self) -> tuple[int, ...]:
        return tuple(range(self.dim))

    def to_spectral(self) -> "BlochFiber":
        if self.representation == "spectral":
            return self
        coeffs = np.fft.fftn(self.data, axes=self.spatial_axes, norm="ortho")
        return BlochFiber(
            theta=self.theta, lattice=self.lattice, points_per_cell=self.points_per_cell,
            t_start=self.t_start, t_end=self.t_end, data=coeffs,
            representation="spectral", tail_bound=self.tail_bound,
        )

    def to_physical(self) -> "BlochFiber":
        if self.representation == "physical":
            return self
        values = np.fft.ifftn(self.data, axes=self.spatial_axes, norm="ortho")
        return BlochFiber(
            theta=self.theta, lattice=self.lattice, points_per_cell=self.points_per_cell,
            t_start=self.t_start, t_end=self.t_end, data=values,
            representation="physical", tail_bound=self.tail_bound,
        )

    def mode_vectors(self) -> np.ndarray:
        """Wrapped integer mode indices, shape (n, ..., n, dim)."""
        n = self.points_per_cell
        wrapped = (np.fft.fftfreq(n) * n).astype(np.int64)
        mesh = np.meshgrid(*([wrapped] * self.dim), indexing="ij")
        return np.stack(mesh, axis=-1)

    def mode_eigenvalues(self, energy: float) -> np.ndarray:
        """|k + theta|^2 - E per DFT mode, shape (n, ..., n)."""
        dual = dual_basis(self.lattice)
        theta_vec = self.theta.vector(dual)
        m = self.mode_vectors().astype(float)
        k = m @ dual.basis.T + theta_vec
        return np.sum(k * k, axis=-1) - float(energy)

    def torus_norms(self) -> np.ndarray:
        """||phi(t)||_{L2(torus)} per t sample."""
        w = unit_cell_volume(self.lattice) / self.points_per_cell**self.dim
        return np.sqrt(w * np.sum(np.abs(self.data) ** 2, axis=self.spatial_axes))

    def to_profile(self, energy: float, max_modes: int | None = None):
        """Flatten to a SpectralProfile of DFT modes (optionally the heaviest).

        Returns (profile, dropped_mass_fraction).
        """
        spec = self.to_spectral()
        eigs = spec.mode_eigenvalues(energy).reshape(-1)
        coeffs = spec.data.reshape(-1, spec.n_t)
        mass = np.sum(np.abs(coeffs) ** 2, axis=1)
        order = np.argsort(-mass, kind="stable")
        total = float(np.sum(mass))
        keep = order if max_modes is None else order[:max_modes]
        dropped = 0.0 if total == 0 else float(1.0 - np.sum(mass[keep]) / total)
        profile = SpectralProfile(
            eigs=eigs[keep],
            t_grid=np.linspace(self.t_start, self.t_end, self.n_t),
            coeffs=coeffs[keep],
        )
        return profile, dropped


def _intra_cell_phase(mu: np.ndarray, n: int, dim: int, sign: float) -> np.ndarray:
    """exp(sign * 2*pi*i * mu.j/n) over the intra-cell grid, shape (n,...,n)."""
    axes = [np.exp(sign * 2j * math.pi * mu[a] * np.arange(n) / n) for a in range(dim)]
    out = axes[0]
    for a in range(1, dim):
        out = np.multiply.outer(out, axes[a])
    return out


def gelfand_forward(u: SampledField, theta: Quasimomentum, l_max: int) -> BlochFiber:
    """Lattice sum sum_c exp(-i theta.(x+c)) u(x+c, t) over cells with |c|_inf <= l_max.

    Cells of the sampled box outside the range contribute to the reported
    ``tail_bound`` (the sum of their L2 masses); sampled fields are compactly
    supported on their box, so the bound is complete for them.
    """
    if theta.dim != u.dim:
        raise GridError("quasimomentum dimension disagrees with the field")
    n = u.points_per_cell
    mu = theta.coeffs
    shape = (n,) * u.dim + (u.n_t,)
    acc = np.zeros(shape, dtype=complex)
    tail = 0.0
    for cell in u.iter_cells():
        if max(abs(c) for c in cell) > l_max:
            tail += math.sqrt(u.cell_l2_mass(cell))
            continue
        phase = np.exp(-2j * math.pi * float(np.dot(mu, cell)))
        acc += phase * u.cell_block(cell)
    intra = _intra_cell_phase(mu, n, u.dim, sign=-1.0)
    acc *= intra[..., None]
    return BlochFiber(
        theta=theta, lattice=u.lattice, points_per_cell=n,
        t_start=u.t_start, t_end=u.t_end, data=acc,
        representation="physical", tail_bound=tail,
    )


def theta_grid(lat: Lattice, per_axis: int) -> list[Quasimomentum]:
    """Uniform midpoint grid over the dual cell in dual-basis coordinates.

    Points mu = (p + 1/2)/P per axis, exact rationals with denominator 2P.
    """
    if per_axis < 1:
        raise SchemaError("theta grid needs at least one point per axis")
    dim = lat.dim
    l = 2 * per_axis
    thetas = []
    mesh = np.meshgrid(*([np.arange(per_axis)] * dim), indexing="ij")
    for idx in zip(*[m.reshape(-1) for m in mesh]):
        residues = tuple(2 * int(p) + 1 for p in idx)
        thetas.append(Quasimomentum.from_rational(l, residues))
    return thetas


def gelfand_inverse(fibers: list[BlochFiber], lat: Lattice) -> SampledField:
    """Midpoint-rule reconstruction u(x+c) = avg_theta exp(i theta.(x+c)) fiber.

    Exact for data supported on fewer cells per axis than the theta-grid has
    points per axis.  All fibers must share the cell grid and t-grid and come
    from a full uniform theta-grid.
    """
    if not fibers:
        raise SchemaError("need at least one fiber")
    first = fibers[0]
    dim = lat.dim
    per_axis = round(len(fibers) ** (1.0 / dim))
    if per_axis**dim != len(fibers):
        raise SchemaError("fiber collection is not a full per-axis grid")
    n = first.points_per_cell
    for f in fibers:
        if f.points_per_cell != n or f.n_t != first.n_t:
            raise GridError("fibers disagree on cell grid or t-grid")
        if f.t_start != first.t_start or f.t_end != first.t_end:
            raise GridError("fibers disagree on t-range")
    expected = sorted(tuple(q.coeffs) for q in theta_grid(lat, per_axis))
    actual = sorted(tuple(f.theta.coeffs) for f in fibers)
    for exp_mu, act_mu in zip(expected, actual):
        if max(abs(a - b) for a, b in zip(exp_mu, act_mu)) > 1e-12:
            raise SchemaError("fiber quasimomenta do not form the uniform midpoint grid")
    half = (per_axis - 1) // 2
    cells_lo = (-half,) * dim
    cells_shape = (per_axis,) * dim
    out = np.zeros(tuple(per_axis * n for _ in range(dim)) + (first.n_t,), dtype=complex)
    inv_m = 1.0 / len(fibers)
    for fiber in fibers:
        phys = fiber.to_physical()
        mu = fiber.theta.coeffs
        intra = _intra_cell_phase(mu, n, dim, sign=+1.0)
        block = phys.data * intra[..., None]
        for flat_cell in np.ndindex(*cells_shape):
            cell = tuple(cells_lo[a] + flat_cell[a] for a in range(dim))
            phase = np.exp(2j * math.pi * float(np.dot(mu, cell)))
            slices = tuple(slice(flat_cell[a] * n, (flat_cell[a] + 1) * n) for a in range(dim))
            out[slices] += inv_m * phase * block
    return SampledField(
        kind="u", lattice=lat, cells_lo=cells_lo, cells_shape=cells_shape,
        points_per_cell=n, t_start=first.t_start, t_end=first.t_end, values=out,
    )


def fiber_residual(
    fiber: BlochFiber, potential: SampledField | None, energy: float
) -> np.ndarray:
    """||(d_t^2 - A_theta) phi - V_t phi||_{L2(torus)} on interior t points.

    The operator acts spectrally (diagonal multipliers), the potential acts
    physically, second t-derivatives are centred differences; endpoints are
    excluded.  Returns the residual per interior t sample.
    """
    if fiber.n_t < 5:
        raise GridError("fiber t-grid too coarse (need at least 5 points)")
    spec = fiber.to_spectral()
    t = fiber.t_grid
    h = t[1] - t[0]
    c = spec.data
    dtt = (c[..., 2:] - 2.0 * c[..., 1:-1] + c[..., :-2]) / h**2
    eigs = spec.mode_eigenvalues(energy)
    op_term = eigs[..., None] * c[..., 1:-1]
    res_spec = dtt - op_term
    axes = fiber.spatial_axes
    res_phys = np.fft.ifftn(res_spec, axes=axes, norm="ortho")
    if potential is not None:
        if potential.points_per_cell != fiber.points_per_cell:
            raise GridError("potential grid is incommensurate with the fiber")
        if potential.n_t != fiber.n_t:
            raise GridError("potential t-grid disagrees with the fiber")
        v_cell = potential.cell_block(potential.cells_lo)
        phys = fiber.to_physical()
        res_phys = res_phys - v_cell[..., 1:-1] * phys.data[..., 1:-1]
    w = unit_cell_volume(fiber.lattice) / fiber.points_per_cell**fiber.dim
    return np.sqrt(w * np.sum(np.abs(res_phys) ** 2, axis=axes))


def weighted_norm(
    u: SampledField, kappa: float, decay_lambda: float, weight_power: float = 1.0
) -> tuple[float, float]:
    """Quadrature of <x>^(2 kappa) exp(2 lambda t^power) |u|^2 over the box.

    ``weight_power`` 1 gives the plain exponential weight; 4/3 the stronger
    variant.  Returns (value, tail_bound); sampled fields are compactly
    supported on their box so the truncation tail is zero by construction.
    """
    if weight_power not in (1.0, 4.0 / 3.0):
        raise SchemaError("weight_power must be 1 or 4/3")
    pos = u.positions()
    xw = (1.0 + np.sum(pos * pos, axis=-1)) ** kappa
    t = u.t_grid
    tw = np.exp(2.0 * decay_lambda * t**weight_power)
    w_x = unit_cell_volume(u.lattice) / u.points_per_cell**u.dim
    n_t = u.n_t
    if n_t >= 3 and n_t % 2 == 1:
        t_weights = np.ones(n_t)
        t_weights[1:-1:2] = 4.0
        t_weights[2:-1:2] = 2.0
        t_weights *= (t[1] - t[0]) / 3.0
    else:
        t_weights = np.full(n_t, t[1] - t[0])
        t_weights[0] *= 0.5
        t_weights[-1] *= 0.5
    integrand = np.abs(u.values) ** 2 * xw[..., None] * (tw * t_weights)[None, :]
    while integrand.ndim > 1:
        integrand = integrand.sum(axis=0)
    return float(w_x * integrand.sum()), 0.0

"""Finite-mode trajectories t -> phi(t) in a diagonalised operator frame.

A SpectralProfile stores the coefficients of phi(t) over finitely many
orthonormal eigenvectors of a self-adjoint operator, so norms are plain
Euclidean norms of the coefficient columns.  Profiles are the common currency
between the inequality verifiers and the evolution solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SchemaError
from .quadrature import grid_step


@dataclass(eq=False)
class SpectralProfile:
    """Coefficients c_i(t) of phi(t) over modes with eigenvalues mu_i.

    ``alpha`` is a lower-bound witness: every eigenvalue satisfies
    mu_i >= -alpha.  ``taper_sups`` holds measured sup bounds of the first and
    second differences of the window shape for cut-off style profiles.
    """

    eigs: np.ndarray
    t_grid: np.ndarray
    coeffs: np.ndarray
    alpha: float | None = None
    taper_sups: tuple[float, float] | None = None

    def __post_init__(self):
        self.eigs = np.asarray(self.eigs, dtype=float).reshape(-1)
        self.t_grid = np.asarray(self.t_grid, dtype=float).reshape(-1)
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.shape != (self.eigs.size, self.t_grid.size):
            raise SchemaError("coefficient array must have shape (modes, t-points)")
        grid_step(self.t_grid)  # uniformity check
        if self.t_grid[0] < 0.0:
            raise SchemaError("t-grid must start at t >= 0")
        if self.alpha is None:
            self.alpha = float(max(0.0, -np.min(self.eigs))) if self.eigs.size else 0.0
        if self.eigs.size and np.min(self.eigs) < -self.alpha - 1e-12:
            raise SchemaError("eigenvalue below -alpha")

    @property
    def n_modes(self) -> int:
        return self.eigs.size

    @property
    def step(self) -> float:
        return grid_step(self.t_grid)

    def norms(self) -> np.ndarray:
        """||phi(t)|| on the grid."""
        return np.sqrt(np.sum(np.abs(self.coeffs) ** 2, axis=0))

    def second_difference(self) -> np.ndarray:
        """Centred second difference of the coefficients; zero at the ends."""
        h = self.step
        out = np.zeros_like(self.coeffs)
        out[:, 1:-1] = (self.coeffs[:, 2:] - 2 * self.coeffs[:, 1:-1] + self.coeffs[:, :-2]) / h**2
        return out

    def first_difference(self) -> np.ndarray:
        """Centred first difference of the coefficients; zero at the ends."""
        h = self.step
        out = np.zeros_like(self.coeffs)
        out[:, 1:-1] = (self.coeffs[:, 2:] - self.coeffs[:, :-2]) / (2 * h)
        return out

    def equation_residual(self) -> np.ndarray:
        """psi(t) = (d^2/dt^2 - A) phi(t) with centred differences."""
        return self.second_difference() - self.eigs[:, None] * self.coeffs

    def support(self) -> tuple[float, float] | None:
        """(first, last) grid time with a nonzero coefficient, or None."""
        mask = np.any(self.coeffs != 0, axis=0)
        if not mask.any():
            return None
        idx = np.flatnonzero(mask)
        return float(self.t_grid[idx[0]]), float(self.t_grid[idx[-1]])


def smooth_bump(s: np.ndarray) -> np.ndarray:
    """exp(-1/(1-s^2)) on |s|<1, zero outside; peak value 1/e at s=0."""
    out = np.zeros_like(s, dtype=float)
    inside = np.abs(s) < 1.0
    si = s[inside]
    out[inside] = np.exp(-1.0 / (1.0 - si * si))
    return out


def _smoothstep(s: np.ndarray) -> np.ndarray:
    """C^2 quintic ramp 0->1 on [0,1]; sup|S'|=15/8, sup|S''|=10/sqrt(3)."""
    s = np.clip(s, 0.0, 1.0)
    return s**3 * (10.0 - 15.0 * s + 6.0 * s * s)


def plateau_shape(t: np.ndarray, lo: float, hi: float, taper: float) -> np.ndarray:
    """Cut-off window: 0 outside (lo,hi), 1 on [lo+taper, hi-taper].

    The tapers are quintic smoothsteps of width ``taper``; their derivative
    sups stay below 2/taper and 8/taper^2 respectively.
    """
    if hi - lo <= 2.0 * taper:
        raise SchemaError("support too short for the requested taper width")
    up = _smoothstep((t - lo) / taper)
    down = _smoothstep((hi - t) / taper)
    shape = np.minimum(up, down)
    shape[(t <= lo) | (t >= hi)] = 0.0
    return shape


def bump_profile(
    support: tuple[float, float],
    modes,
    t_grid: np.ndarray,
    taper: float | None = None,
    alpha: float | None = None,
) -> SpectralProfile:
    """Compactly supported C^2 profile on the grid.

    ``modes`` is a list of (eigenvalue, coefficient) pairs; each coefficient
    multiplies the common window shape.  With ``taper=None`` the shape is the
    standard smooth bump; otherwise a plateau cut-off with tapers of width
    ``taper``, whose measured difference sups are recorded on the profile.
    """
    t_lo, t_hi = float(support[0]), float(support[1])
    t_grid = np.asarray(t_grid, dtype=float)
    if not (t_grid[0] <= t_lo < t_hi <= t_grid[-1]):
        raise SchemaError("support must lie inside the t-grid")
    if not modes:
        raise SchemaError("at least one mode is required")
    if taper is None:
        s = (2.0 * t_grid - (t_lo + t_hi)) / (t_hi - t_lo)
        shape = smooth_bump(s)
        sups = None
    else:
        shape = plateau_shape(t_grid, t_lo, t_hi, float(taper))
        h = grid_step(t_grid)
        d1 = np.max(np.abs(np.diff(shape))) / h
        d2 = np.max(np.abs(np.diff(shape, 2))) / h**2
        sups = (float(d1), float(d2))
    eigs = np.array([float(m[0]) for m in modes])
    amps = np.array([complex(m[1]) for m in modes])
    coeffs = amps[:, None] * shape[None, :]
    return SpectralProfile(eigs=eigs, t_grid=t_grid, coeffs=coeffs, alpha=alpha, taper_sups=sups)


def zero_profile(eigs, t_grid: np.ndarray, alpha: float | None = None) -> SpectralProfile:
    eigs = np.asarray(eigs, dtype=float).reshape(-1)
    t_grid = np.asarray(t_grid, dtype=float)
    return SpectralProfile(
        eigs=eigs, t_grid=t_grid, coeffs=np.zeros((eigs.size, t_grid.size), dtype=complex), alpha=alpha
    )


def profile_from_callable(eigs, t_grid: np.ndarray, fns, alpha: float | None = None) -> SpectralProfile:
    """Profile with c_i(t) = fns[i](t), evaluated on the grid."""
    eigs = np.asarray(eigs, dtype=float).reshape(-1)
    t_grid = np.asarray(t_grid, dtype=float)
    coeffs = np.stack([np.asarray(fn(t_grid), dtype=complex) for fn in fns])
    return SpectralProfile(eigs=eigs, t_grid=t_grid, coeffs=coeffs, alpha=alpha)

"""Spectrum of the fiber operator on the torus and its gap statistics.

The fiber operator acts on lattice-periodic functions with eigenvalues
|k + theta|^2 - E over the dual lattice.  Everything here is elementary
lattice-point enumeration; the interesting structure is in the gap scans
and in the reduction of the values to a scaled integral quadratic form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import (
    BudgetExceededError,
    FormArityError,
    RationalityRequiredError,
    SchemaError,
    VerificationError,
)
from .lattice import DualLattice, Lattice, QuadraticForm, Quasimomentum, dual_basis

MERGE_TOL = 1e-9
DEFAULT_BUDGET = 10_000_000


@dataclass(frozen=True, eq=False)
class SliceContext:
    lattice_id: str
    theta: np.ndarray
    energy: float


@dataclass(eq=False)
class SpectrumSlice:
    """Sorted distinct eigenvalues up to a cutoff, with multiplicities."""

    values: np.ndarray
    mults: np.ndarray
    cutoff: float
    context: SliceContext

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.mults = np.asarray(self.mults, dtype=np.int64)
        if self.values.shape != self.mults.shape:
            raise SchemaError("values and multiplicities must align")
        if self.values.size:
            if np.any(np.diff(self.values) <= 0):
                raise SchemaError("spectrum values must be strictly increasing")
            if np.any(self.mults <= 0):
                raise SchemaError("multiplicities must be positive")
            if self.values[-1] > self.cutoff + MERGE_TOL:
                raise SchemaError("spectrum value exceeds cutoff")
            if self.values[0] < -self.context.energy - MERGE_TOL:
                raise SchemaError("spectrum value below -E")

    def total_count(self) -> int:
        return int(self.mults.sum())


@dataclass(frozen=True)
class Gap:
    """Open interval free of spectrum between two consecutive values."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise SchemaError("gap requires lo < hi")

    @property
    def length(self) -> float:
        return self.hi - self.lo


def _merge_close(raw: np.ndarray):
    """Deduplicate sorted values; points within MERGE_TOL of the group head merge."""
    raw = np.sort(raw)
    values, mults = [], []
    i = 0
    n = raw.size
    while i < n:
        head = raw[i]
        j = i + 1
        while j < n and raw[j] - head <= MERGE_TOL:
            j += 1
        values.append(head)
        mults.append(j - i)
        i = j
    return np.array(values, dtype=float), np.array(mults, dtype=np.int64)


def _candidate_ranges(gram: np.ndarray, mu: np.ndarray, radius2: float):
    """Integer ranges per axis covering the ellipsoid |F(m+mu)|^2 <= radius2."""
    inv = np.linalg.inv(gram)
    half = np.sqrt(np.maximum(radius2, 0.0) * np.diagonal(inv)) * (1.0 + 1e-12) + 1e-9
    los = np.ceil(-mu - half).astype(np.int64)
    his = np.floor(-mu + half).astype(np.int64)
    return los, his


def enumerate_spectrum(
    lat: Lattice,
    theta: Quasimomentum,
    energy: float,
    cutoff: float,
    budget: int = DEFAULT_BUDGET,
    verify: bool = False,
) -> SpectrumSlice:
    """All values |k + theta|^2 - E <= cutoff over the dual lattice.

    Enumerates integer coordinates inside the ellipsoid of squared radius
    cutoff + E, evaluates the dual Gram form, and merges coincidences within
    1e-9.  ``verify=True`` re-enumerates with a padded radius and checks that
    no value below the cutoff was missed.
    """
    dual = dual_basis(lat)
    if theta.dim != dual.dim:
        raise SchemaError("quasimomentum dimension disagrees with lattice")
    context = SliceContext(lattice_id=lat.digest(), theta=theta.coeffs, energy=float(energy))
    radius2 = float(cutoff) + float(energy)
    if radius2 < 0.0:
        return SpectrumSlice(
            values=np.empty(0), mults=np.empty(0, dtype=np.int64), cutoff=float(cutoff), context=context
        )
    raw = _enumerate_form_values(dual.gram(), theta.coeffs, radius2, budget)
    if verify:
        padded = _enumerate_form_values(dual.gram(), theta.coeffs, radius2 * 1.05 + 1.0, budget)
        padded = padded[padded <= radius2 + MERGE_TOL]
        if padded.size != raw.size:
            raise VerificationError("enumeration completeness check failed")
    values, mults = _merge_close(raw)
    return SpectrumSlice(
        values=values - float(energy), mults=mults, cutoff=float(cutoff), context=context
    )


def _enumerate_form_values(gram: np.ndarray, mu: np.ndarray, radius2: float, budget: int) -> np.ndarray:
    los, his = _candidate_ranges(gram, mu, radius2)
    counts = his - los + 1
    if np.any(counts <= 0):
        return np.empty(0)
    total = int(np.prod(counts.astype(object)))
    if total > budget:
        raise BudgetExceededError(
            f"enumeration needs {total} candidate points, budget is {budget}"
        )
    axes = [np.arange(lo, hi + 1, dtype=np.int64) for lo, hi in zip(los, his)]
    mesh = np.meshgrid(*axes, indexing="ij")
    m = np.stack([ax.reshape(-1) for ax in mesh], axis=-1).astype(float)
    x = m + mu
    vals = np.einsum("ni,ij,nj->n", x, gram, x)
    return vals[vals <= radius2 + MERGE_TOL]


def find_gaps(slc: SpectrumSlice, min_len: float = 0.0, full_axis: bool = False) -> list[Gap]:
    """Maximal gaps between consecutive spectrum values.

    By default only gaps on the positive axis with a positive left endpoint
    are returned (the ones usable as (a^2, b^2) windows); ``full_axis=True``
    reports every consecutive-value gap.
    """
    if slc.values.size == 0:
        raise SchemaError("cannot scan gaps of an empty spectrum slice")
    gaps = []
    for lo, hi in zip(slc.values[:-1], slc.values[1:]):
        if not full_axis and lo <= 0.0:
            continue
        if hi - lo >= min_len:
            gaps.append(Gap(lo=float(lo), hi=float(hi)))
    return gaps


def _progression_axis_values(coeff: int, l: int, r: int, bound: int) -> np.ndarray:
    """Values coeff*(l*m+r)^2 <= bound over integer m, ascending unique."""
    if bound < 0:
        return np.empty(0, dtype=np.int64)
    top = math.isqrt(bound // coeff) if coeff > 0 else 0
    lo_m = (-top - r) // l - 1
    hi_m = (top - r) // l + 1
    x = l * np.arange(lo_m, hi_m + 1, dtype=np.int64) + r
    vals = coeff * x * x
    return np.unique(vals[vals <= bound])


def _value_set_diagonal(q: QuadraticForm, l: int, residues: np.ndarray, bound: int, budget: int) -> np.ndarray:
    """Bool array of attainable q(l*m+r) values up to bound for diagonal q."""
    if bound + 1 > budget:
        raise BudgetExceededError(f"value sieve of size {bound + 1} exceeds budget {budget}")
    reached = np.zeros(bound + 1, dtype=bool)
    reached[0] = True
    current = np.array([0], dtype=np.int64)
    for axis in range(q.dim):
        axis_vals = _progression_axis_values(int(q.G[axis, axis]), l, int(residues[axis]), bound)
        nxt = np.zeros(bound + 1, dtype=bool)
        for s in axis_vals:
            keep = current[current <= bound - s]
            nxt[keep + s] = True
        current = np.flatnonzero(nxt)
        reached = nxt
    return reached


def _value_set_general(q: QuadraticForm, l: int, residues: np.ndarray, bound: int, budget: int) -> np.ndarray:
    """Bool array of attainable values via direct ellipsoid enumeration."""
    G = q.G.astype(float)
    mu = residues.astype(float) / l
    scale = float(l * l)
    los, his = _candidate_ranges(G * scale, mu, float(bound))
    counts = his - los + 1
    total = int(np.prod(counts.astype(object))) if np.all(counts > 0) else 0
    if total > budget:
        raise BudgetExceededError(
            f"enumeration needs {total} candidate points, budget is {budget}"
        )
    if bound + 1 > budget:
        raise BudgetExceededError(f"value sieve of size {bound + 1} exceeds budget {budget}")
    reached = np.zeros(bound + 1, dtype=bool)
    if total == 0:
        return reached
    axes = [np.arange(lo, hi + 1, dtype=np.int64) for lo, hi in zip(los, his)]
    mesh = np.meshgrid(*axes, indexing="ij")
    m = np.stack([ax.reshape(-1) for ax in mesh], axis=-1)
    x = l * m + residues
    vals = np.einsum("ni,ij,nj->n", x, q.G.astype(np.int64), x)
    vals = vals[(vals >= 0) & (vals <= bound)]
    reached[vals] = True
    return reached


def spectrum_value_set(
    q: QuadraticForm, theta: Quasimomentum | None, bound: int, budget: int = DEFAULT_BUDGET
) -> np.ndarray:
    """Attainable integer values of q(l*m + r) up to ``bound`` as a bool array."""
    if theta is None:
        l, residues = 1, np.zeros(q.dim, dtype=np.int64)
    else:
        if theta.exact is None:
            raise RationalityRequiredError("quasimomentum must be exactly rational")
        l, res = theta.exact
        residues = np.array(res, dtype=np.int64)
        if residues.size != q.dim:
            raise SchemaError("quasimomentum dimension disagrees with form arity")
    if q.is_diagonal():
        return _value_set_diagonal(q, l, residues, bound, budget)
    return _value_set_general(q, l, residues, bound, budget)


def max_gap_growth(
    q: QuadraticForm,
    theta: Quasimomentum | None,
    n_list,
    budget: int = DEFAULT_BUDGET,
) -> list[tuple[int, float]]:
    """Per N: the maximal gap of (sigma/l^2)*{q(l*m+r)} within [0, N].

    The returned column is monotone non-decreasing in N because the scanned
    ranges are nested.
    """
    n_list = [int(n) for n in n_list]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise SchemaError("N_list must be strictly increasing")
    l = 1 if theta is None or theta.exact is None else theta.exact[0]
    unit = q.sigma / (l * l)
    bound = int(Fraction(n_list[-1]) / unit)
    reached = spectrum_value_set(q, theta, bound, budget)
    table = []
    for n in n_list:
        limit = int(Fraction(n) / unit)
        vals = np.flatnonzero(reached[: limit + 1])
        if vals.size < 2:
            table.append((n, 0.0))
            continue
        gap = int(np.max(np.diff(vals)))
        table.append((n, float(Fraction(gap) * unit)))
    return table


def density_scan(q: QuadraticForm, n: int, budget: int = DEFAULT_BUDGET) -> tuple[int, float]:
    """Count distinct values of a binary form up to n (0 included).

    Also returns count*sqrt(ln n)/n for trend inspection; no asymptotic
    constant is asserted, convergence is slow.
    """
    if q.dim != 2:
        raise FormArityError("density scan requires a binary quadratic form")
    if n < 10:
        raise SchemaError("density scan requires N >= 10")
    reached = spectrum_value_set(q, None, int(n), budget)
    count = int(np.count_nonzero(reached))
    ratio = count * math.sqrt(math.log(n)) / n
    return count, ratio


def progression_containment(
    dual: DualLattice,
    q: QuadraticForm,
    theta: Quasimomentum,
    sigma: Fraction,
    l: int,
    n: float,
    exact: bool = True,
    budget: int = DEFAULT_BUDGET,
) -> float:
    """Max distance of any |k+theta|^2 <= n from the grid (sigma/l^2)*Z.

    In exact mode the values are recomputed with rational arithmetic from the
    exact dual Gram matrix, so the distance is exactly zero whenever the
    reduction is consistent.  In float mode the geometric values are used and
    the distance is bounded by roundoff (<= 1e-9 for sane inputs).
    """
    sigma = Fraction(sigma)
    unit = sigma / (l * l)
    if exact:
        if dual.gram_exact is None or theta.exact is None:
            raise RationalityRequiredError("exact mode needs rational Gram and quasimomentum")
        l_theta, residues = theta.exact
        if l_theta != l:
            raise SchemaError("supplied l disagrees with the quasimomentum denominator")
        los, his = _candidate_ranges(dual.gram(), theta.coeffs, float(n))
        counts = his - los + 1
        total = int(np.prod(counts.astype(object))) if np.all(counts > 0) else 0
        if total > budget:
            raise BudgetExceededError(f"{total} candidate points exceed budget {budget}")
        gram = dual.gram_exact
        dim = dual.dim
        worst = Fraction(0)
        for flat in range(total):
            m = []
            rem = flat
            for c in counts:
                m.append(rem % int(c))
                rem //= int(c)
            w = [l * (los[i] + m[i]) + residues[i] for i in range(dim)]
            val = Fraction(0)
            for i in range(dim):
                for j in range(dim):
                    val += gram[i][j] * w[i] * w[j]
            val /= l * l
            if val > n:
                continue
            ratio = val / unit
            frac = ratio - ratio.__floor__()
            dist = min(frac, 1 - frac) * unit
            worst = max(worst, dist)
        return float(worst)
    raw = _enumerate_form_values(dual.gram(), theta.coeffs, float(n), budget)
    if raw.size == 0:
        return 0.0
    unit_f = float(unit)
    dist = np.abs(raw - np.round(raw / unit_f) * unit_f)
    return float(np.max(dist))

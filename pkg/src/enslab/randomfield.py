"""Homogeneous Gaussian random fields on periodic lattices.

Fields are synthesized in spectral space: a seeded white-noise cube is
transformed, every mode is scaled by an isotropic amplitude sqrt(P(|k|)),
and the inverse transform gives a real field whose ensemble mean and point
variance match the requested spec exactly on any lattice. Wavenumbers are
integer mode magnitudes (units of the fundamental 2pi/L); the DC mode is
zeroed and the mean added as a constant.

On top of the fields sit the fractional-volume estimators: indicator
bitmasks for half-open value intervals [a, b), spatial one-point and
two-point probabilities with periodic wraparound, hierarchical 3^dim cell
averages with the per-level spread epsilon_n, and a per-direction isotropy
report. The torus stands in for infinite volume, so epsilon_n is only
reported on levels with at least 9 cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptySeparationError, GridError, ValidationError

__all__ = [
    "CovarianceSpec",
    "FieldSample",
    "IndicatorField",
    "HierarchyReport",
    "DirectionEstimate",
    "IsotropyReport",
    "generate",
    "indicator",
    "hierarchical_average",
    "one_point_prob",
    "two_point_prob",
    "isotropy_report",
]

SPECTRUM_KINDS = ("white", "power_law", "gaussian_bump")
MIN_EPSILON_CELLS = 9


@dataclass(frozen=True)
class CovarianceSpec:
    """Target mean, variance, and isotropic spectrum shape of a field.

    spectrum kinds:
      * ``white``: flat power at every nonzero mode.
      * ``power_law``: P(k) proportional to k**index.
      * ``gaussian_bump``: P(k) proportional to exp(-(k-center)^2 / 2 width^2).

    ``cutoff`` zeroes all modes with |k| above it; None keeps everything up
    to Nyquist.
    """

    mean: float = 0.0
    variance: float = 1.0
    spectrum: str = "white"
    index: float | None = None
    center: float | None = None
    width: float | None = None
    cutoff: float | None = None

    def __post_init__(self):
        if self.spectrum not in SPECTRUM_KINDS:
            raise ValidationError(
                f"unknown spectrum {self.spectrum!r}; expected one of {SPECTRUM_KINDS}"
            )
        if not (np.isfinite(self.mean) and np.isfinite(self.variance)):
            raise ValidationError("mean and variance must be finite")
        if self.variance < 0.0:
            raise ValidationError(f"variance must be >= 0, got {self.variance!r}")
        if self.spectrum == "power_law" and self.index is None:
            raise ValidationError("power_law spectrum needs an index")
        if self.spectrum == "gaussian_bump":
            if self.center is None or self.width is None:
                raise ValidationError("gaussian_bump spectrum needs center and width")
            if self.width <= 0.0:
                raise ValidationError(f"gaussian_bump width must be > 0, got {self.width!r}")
        if self.cutoff is not None and self.cutoff <= 0.0:
            raise ValidationError(f"cutoff must be > 0, got {self.cutoff!r}")


@dataclass(frozen=True, eq=False)
class FieldSample:
    """One realization of a periodic scalar field, with its provenance.

    ``values`` is shaped (side,)*dim. Fields produced by :func:`generate`
    regenerate bit-identically from (spec, dim, side, seed).
    """

    dim: int
    side: int
    values: np.ndarray
    spacing: float
    seed: int
    spec: CovarianceSpec

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValidationError(f"dim must be 1, 2 or 3, got {self.dim!r}")
        if self.side < 1:
            raise ValidationError(f"side must be >= 1, got {self.side!r}")
        if not (np.isfinite(self.spacing) and self.spacing > 0.0):
            raise ValidationError(f"spacing must be positive, got {self.spacing!r}")
        arr = np.asarray(self.values, dtype=float)
        if arr.shape != (self.side,) * self.dim:
            raise ValidationError(
                f"values shape {arr.shape} does not match (side,)*dim = {(self.side,) * self.dim}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValidationError("field values contain non-finite entries")
        out = arr.copy()
        out.flags.writeable = False
        object.__setattr__(self, "values", out)


@dataclass(frozen=True, eq=False)
class IndicatorField:
    """Bitmask of a field against a half-open value interval [a, b)."""

    bits: np.ndarray
    interval: tuple
    spacing: float

    def __post_init__(self):
        arr = np.asarray(self.bits, dtype=np.uint8)
        if not np.all((arr == 0) | (arr == 1)):
            raise ValidationError("indicator bits must be 0 or 1")
        out = arr.copy()
        out.flags.writeable = False
        object.__setattr__(self, "bits", out)
        object.__setattr__(self, "interval", (float(self.interval[0]), float(self.interval[1])))

    @property
    def dim(self) -> int:
        return int(self.bits.ndim)

    @property
    def side(self) -> int:
        return int(self.bits.shape[0])


@dataclass(frozen=True, eq=False)
class HierarchyReport:
    """Cell means per hierarchy level, plus the per-level spread epsilon_n.

    ``cell_means[n]`` holds the level-n cell averages (level 0 is the raw
    indicator). ``epsilons[n]`` is the largest pairwise difference between
    level-n cell means, or None on levels with fewer than 9 cells, where the
    spread of a finite torus says nothing about homogeneity.
    """

    cell_means: tuple
    epsilons: tuple

    @property
    def n_levels(self) -> int:
        return len(self.cell_means)

    def global_mean(self, level: int = 0) -> float:
        return float(self.cell_means[level].mean())


@dataclass(frozen=True)
class DirectionEstimate:
    direction: tuple
    klass: str
    estimate: float
    n_offsets: int


@dataclass(frozen=True, eq=False)
class IsotropyReport:
    """Two-point estimates grouped by lattice direction at one separation."""

    estimates: tuple
    spread: float


def _mode_magnitudes(dim: int, side: int) -> np.ndarray:
    axes = [np.fft.fftfreq(side) * side for _ in range(dim)]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.sqrt(sum(g * g for g in grids))


def _spectrum_table(spec: CovarianceSpec, dim: int, side: int) -> np.ndarray:
    """Raw (unnormalized) power at every lattice mode; DC is zero."""
    k = _mode_magnitudes(dim, side)
    if spec.spectrum == "white":
        power = np.ones_like(k)
    elif spec.spectrum == "power_law":
        with np.errstate(divide="ignore"):
            power = np.where(k > 0.0, k, 1.0) ** float(spec.index)
    else:  # gaussian_bump
        power = np.exp(-0.5 * ((k - spec.center) / spec.width) ** 2)
    power[k == 0.0] = 0.0
    if spec.cutoff is not None:
        power[k > spec.cutoff] = 0.0
    if not np.all(np.isfinite(power)) or power.min() < 0.0:
        raise ValidationError("spectrum is not finite and nonnegative at all lattice modes")
    return power


def _mode_amplitudes(spec: CovarianceSpec, dim: int, side: int) -> np.ndarray:
    """sqrt of the power table, scaled so the point variance equals spec.variance."""
    power = _spectrum_table(spec, dim, side)
    total = float(power.sum())
    if total <= 0.0:
        raise ValidationError("spectrum vanishes at every lattice mode; cannot normalize")
    n = side**dim
    return np.sqrt(power * (spec.variance * n / total))


def _admits_hierarchy(side: int) -> bool:
    for p in (2, 3):
        while side % p == 0:
            side //= p
    return side == 1


def generate(spec: CovarianceSpec, dim: int, side: int, seed: int, spacing: float = 1.0) -> FieldSample:
    """Synthesize one Gaussian field realization.

    The white-noise cube is drawn first from the seeded generator, so equal
    (spec, dim, side, seed) always reproduces the same array bit for bit.
    Every point is exactly N(mean, variance) marginally; zero variance gives
    the constant field.
    """
    if dim not in (1, 2, 3):
        raise ValidationError(f"dim must be 1, 2 or 3, got {dim!r}")
    if side < 1 or not _admits_hierarchy(side):
        raise GridError(
            f"side {side!r} must be a product of powers of 2 and 3 "
            "(transform plus ternary hierarchy)"
        )
    shape = (side,) * dim
    if spec.variance == 0.0:
        values = np.full(shape, spec.mean)
    else:
        rng = np.random.default_rng(seed)
        noise = rng.standard_normal(shape)
        amps = _mode_amplitudes(spec, dim, side)
        values = np.fft.ifftn(np.fft.fftn(noise) * amps).real + spec.mean
    return FieldSample(dim=dim, side=side, values=values, spacing=spacing, seed=int(seed), spec=spec)


def indicator(field: FieldSample, interval) -> IndicatorField:
    """Bitmask that is 1 exactly where a <= value < b."""
    a, b = float(interval[0]), float(interval[1])
    if not a < b:
        raise ValidationError(f"interval must satisfy a < b, got [{a!r}, {b!r})")
    bits = ((field.values >= a) & (field.values < b)).astype(np.uint8)
    return IndicatorField(bits=bits, interval=(a, b), spacing=field.spacing)


def _coarsen(means: np.ndarray) -> np.ndarray:
    """Average 3^dim sibling cells into their parent."""
    d = means.ndim
    shape = tuple(x for n in means.shape for x in (n // 3, 3))
    reduce_axes = tuple(range(1, 2 * d, 2))
    return means.reshape(shape).mean(axis=reduce_axes)


def hierarchical_average(ind: IndicatorField, max_level: int) -> HierarchyReport:
    """Nested 3^dim cell means up to ``max_level``, with per-level spreads.

    Level-0 cells are the lattice points themselves; each level-(n+1) cell
    average is the arithmetic mean of its 3^dim children, so the global mean
    is identical at every level. epsilon_n is max_k,k' |mean_k - mean_k'|.
    """
    if max_level < 0:
        raise ValidationError(f"max_level must be >= 0, got {max_level!r}")
    side = ind.side
    if side % (3**max_level) != 0:
        raise GridError(
            f"side {side} is not divisible by 3^{max_level}; hierarchy does not fit"
        )
    means = ind.bits.astype(float)
    cell_means = []
    epsilons = []
    for level in range(max_level + 1):
        cell_means.append(means)
        if means.size >= MIN_EPSILON_CELLS:
            epsilons.append(float(means.max() - means.min()))
        else:
            epsilons.append(None)
        if level < max_level:
            means = _coarsen(means)
    for arr in cell_means:
        arr.flags.writeable = False
    return HierarchyReport(cell_means=tuple(cell_means), epsilons=tuple(epsilons))


def one_point_prob(field: FieldSample, interval) -> float:
    """Fractional volume where the field value lies in [a, b)."""
    return float(indicator(field, interval).bits.mean())


def _offsets_in_bin(dim: int, side: int, spacing: float, r: float) -> list:
    """Integer lattice offsets whose length falls in [r - s/2, r + s/2)."""
    if r < 0.0 or not np.isfinite(r):
        raise ValidationError(f"separation must be finite and >= 0, got {r!r}")
    lo, hi = r - 0.5 * spacing, r + 0.5 * spacing
    if hi > 0.5 * side * spacing:
        raise ValidationError(
            f"separation bin reaches {hi!r}, beyond half the torus ({0.5 * side * spacing!r})"
        )
    reach = int(math.floor(hi / spacing)) + 1
    span = range(-reach, reach + 1)
    offsets = []
    for idx in np.ndindex(*(len(span),) * dim):
        vec = tuple(span[i] for i in idx)
        length = spacing * math.sqrt(sum(c * c for c in vec))
        if lo <= length < hi:
            offsets.append(vec)
    return offsets


def two_point_prob(field: FieldSample, interval_a, interval_b, r: float) -> float:
    """Joint fractional volume of I_a(x) I_b(x + y) at separation |y| ~ r.

    Averages over every point x (periodic wraparound) and every lattice
    offset y inside the half-spacing bin around r, mixing directions; use
    :func:`isotropy_report` to keep directions apart.
    """
    offsets = _offsets_in_bin(field.dim, field.side, field.spacing, r)
    if not offsets:
        raise EmptySeparationError(
            f"no lattice offset has length within half a spacing of r={r!r}"
        )
    bits_a = indicator(field, interval_a).bits
    bits_b = indicator(field, interval_b).bits
    acc = 0.0
    for vec in offsets:
        # roll by -y so rolled[x] = bits_b[x + y] under periodic wraparound
        rolled = np.roll(bits_b, shift=tuple(-c for c in vec), axis=tuple(range(field.dim)))
        acc += float((bits_a & rolled).mean())
    return acc / len(offsets)


def _canonical_direction(vec: tuple) -> tuple:
    g = math.gcd(*(abs(c) for c in vec))
    reduced = tuple(c // g for c in vec)
    for c in reduced:
        if c > 0:
            return reduced
        if c < 0:
            return tuple(-x for x in reduced)
    return reduced


_CLASS_NAMES = {1: "axis", 2: "face-diagonal", 3: "body-diagonal"}


def isotropy_report(field: FieldSample, interval_a, interval_b, r: float) -> IsotropyReport:
    """Two-point estimates split by lattice direction at separation r.

    Offsets in the r-bin are grouped by direction (y and -y together, since
    the field's covariance is even); each direction is labeled axis,
    face-diagonal, or body-diagonal by its number of nonzero components.
    The spread is the largest pairwise difference between direction
    estimates: an isotropic field keeps it at the Monte Carlo noise level.
    """
    offsets = _offsets_in_bin(field.dim, field.side, field.spacing, r)
    offsets = [v for v in offsets if any(v)]
    if not offsets:
        raise EmptySeparationError(
            f"no nonzero lattice offset has length within half a spacing of r={r!r}"
        )
    groups: dict = {}
    for vec in offsets:
        groups.setdefault(_canonical_direction(vec), []).append(vec)
    if len(groups) < 2:
        raise ValidationError(
            f"only {len(groups)} distinct direction(s) at r={r!r}; need at least 2"
        )
    bits_a = indicator(field, interval_a).bits
    bits_b = indicator(field, interval_b).bits
    entries = []
    for direction in sorted(groups):
        vals = []
        for vec in groups[direction]:
            rolled = np.roll(bits_b, shift=tuple(-c for c in vec), axis=tuple(range(field.dim)))
            vals.append(float((bits_a & rolled).mean()))
        n_nonzero = sum(1 for c in direction if c != 0)
        entries.append(
            DirectionEstimate(
                direction=direction,
                klass=_CLASS_NAMES[n_nonzero],
                estimate=float(np.mean(vals)),
                n_offsets=len(vals),
            )
        )
    values = [e.estimate for e in entries]
    return IsotropyReport(estimates=tuple(entries), spread=float(max(values) - min(values)))

"""Unstable-equilibrium ensemble: a body balanced on its tip falls over.

The surrogate dynamics is an inverted spherical pendulum (point mass m on a
rigid massless rod of length l, gravity g), in canonical coordinates
(tilt theta from vertical, azimuth phi, conjugate momenta):

    H = p_theta^2 / (2 m l^2) + p_phi^2 / (2 m l^2 sin^2 theta) + m g l cos(theta)

theta = 0 is the unstable equilibrium. Azimuth is cyclic, so p_phi is
conserved and the tilt subsystem evolves independently of phi: rotating an
initial state rotates the whole trajectory. Integration uses classical
fixed-step RK4 on an extended signed-tilt chart (crossing the pole flips the
sign of theta and shifts phi by pi at readout), which keeps the equations
smooth for the overwhelmingly common p_phi ~ 0 members.

A finite-support macrostate (uniform on a box) that straddles the
equilibrium contains trajectories toward every fall direction; the ensemble
map from that single macrostate to the distribution over fall sectors is the
deterministic-microstates / indeterminate-macrostate situation the module
exists to exhibit. An optional linear damping term provides a deliberately
non-Hamiltonian control for the phase-volume check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericsError, ValidationError
from .probcore import DiscreteDistribution

__all__ = [
    "ConeParams",
    "PhaseState",
    "InitialMacrostate",
    "FallOutcome",
    "EnsembleResult",
    "integrate",
    "sample_initial",
    "run_ensemble",
    "liouville_check",
    "hamiltonian",
    "chi_square_uniform",
    "member_seed_sequence",
]

TWO_PI = 2.0 * math.pi
MAX_TILT = 0.5 * math.pi


@dataclass(frozen=True)
class ConeParams:
    """Physical constants; ``damping`` > 0 makes the flow dissipative (test aid)."""

    gravity: float = 1.0
    rod_length: float = 1.0
    mass: float = 1.0
    damping: float = 0.0

    def __post_init__(self):
        for name in ("gravity", "rod_length", "mass"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0.0):
                raise ValidationError(f"{name} must be positive, got {v!r}")
        if not (np.isfinite(self.damping) and self.damping >= 0.0):
            raise ValidationError(f"damping must be >= 0, got {self.damping!r}")


@dataclass(frozen=True)
class PhaseState:
    """One point of the four-dimensional phase space."""

    tilt: float
    azimuth: float
    tilt_momentum: float
    azimuth_momentum: float

    def __post_init__(self):
        vals = (self.tilt, self.azimuth, self.tilt_momentum, self.azimuth_momentum)
        if not all(np.isfinite(v) for v in vals):
            raise ValidationError("phase-state coordinates must be finite")
        if not 0.0 <= self.tilt <= MAX_TILT:
            raise ValidationError(f"tilt must lie in [0, pi/2], got {self.tilt!r}")
        if not 0.0 <= self.azimuth < TWO_PI:
            raise ValidationError(f"azimuth must lie in [0, 2pi), got {self.azimuth!r}")


@dataclass(frozen=True)
class InitialMacrostate:
    """Uniform distribution on a box around ``center`` (finite phase volume)."""

    center: PhaseState
    support_radii: tuple

    def __post_init__(self):
        radii = tuple(float(r) for r in self.support_radii)
        if len(radii) != 4:
            raise ValidationError("need one support radius per phase-space coordinate")
        if not all(np.isfinite(r) and r > 0.0 for r in radii):
            raise ValidationError("support radii must be positive and finite")
        if self.center.tilt - radii[0] < 0.0 or self.center.tilt + radii[0] > MAX_TILT:
            raise ValidationError("tilt support must stay inside [0, pi/2]")
        object.__setattr__(self, "support_radii", radii)


@dataclass(frozen=True)
class FallOutcome:
    sector: int
    fall_time: float


@dataclass(frozen=True, eq=False)
class EnsembleResult:
    """Per-member fall records plus the empirical sector law.

    ``sectors`` holds -1 for unresolved members (never crossed the threshold
    within the step budget); their ``fall_times`` entries are NaN. Unresolved
    members are reported, never dropped.
    """

    sector_counts: np.ndarray
    n_unresolved: int
    sectors: np.ndarray
    fall_times: np.ndarray
    final_azimuths: np.ndarray
    member_seeds: np.ndarray
    n_sectors: int

    def sector_distribution(self) -> DiscreteDistribution:
        total = int(self.sector_counts.sum())
        if total == 0:
            raise ValidationError("no member resolved; sector distribution undefined")
        return DiscreteDistribution(self.sector_counts / total)

    def fall_time_stats(self) -> dict:
        resolved = self.fall_times[np.isfinite(self.fall_times)]
        if resolved.size == 0:
            return {"count": 0}
        return {
            "count": int(resolved.size),
            "mean": float(resolved.mean()),
            "median": float(np.median(resolved)),
            "min": float(resolved.min()),
            "max": float(resolved.max()),
        }


def hamiltonian(state: PhaseState, params: ConeParams = ConeParams()) -> float:
    """Total energy of a phase-space point."""
    ml2 = params.mass * params.rod_length**2
    sin_t = math.sin(state.tilt)
    if state.azimuth_momentum == 0.0:
        rot = 0.0
    elif sin_t == 0.0:
        raise NumericsError("azimuthal momentum at the pole has no finite energy")
    else:
        rot = state.azimuth_momentum**2 / (2.0 * ml2 * sin_t**2)
    return (
        state.tilt_momentum**2 / (2.0 * ml2)
        + rot
        + params.mass * params.gravity * params.rod_length * math.cos(state.tilt)
    )


def _derivatives(theta, phi, p_theta, p_phi, params: ConeParams):
    """Canonical equations on the signed-tilt chart; vectorized over members."""
    ml2 = params.mass * params.rod_length**2
    sin_t = np.sin(theta)
    cos_t = np.cos(theta)
    spinning = p_phi != 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_sin2 = np.where(spinning, 1.0 / (ml2 * sin_t**2), 0.0)
        centrifugal = np.where(spinning, p_phi**2 * cos_t * inv_sin2 / np.where(sin_t == 0.0, 1.0, sin_t), 0.0)
    d_theta = p_theta / ml2
    d_phi = p_phi * inv_sin2
    d_p_theta = centrifugal + params.mass * params.gravity * params.rod_length * sin_t
    d_p_phi = np.zeros_like(np.asarray(p_phi, dtype=float))
    if params.damping > 0.0:
        d_p_theta = d_p_theta - params.damping * p_theta
        d_p_phi = d_p_phi - params.damping * p_phi
    return d_theta, d_phi, d_p_theta, d_p_phi


def _rk4_step(theta, phi, p_theta, p_phi, dt, params: ConeParams):
    k1 = _derivatives(theta, phi, p_theta, p_phi, params)
    h = 0.5 * dt
    k2 = _derivatives(theta + h * k1[0], phi + h * k1[1], p_theta + h * k1[2], p_phi + h * k1[3], params)
    k3 = _derivatives(theta + h * k2[0], phi + h * k2[1], p_theta + h * k2[2], p_phi + h * k2[3], params)
    k4 = _derivatives(theta + dt * k3[0], phi + dt * k3[1], p_theta + dt * k3[2], p_phi + dt * k3[3], params)
    sixth = dt / 6.0
    return (
        theta + sixth * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        phi + sixth * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        p_theta + sixth * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
        p_phi + sixth * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3]),
    )


def _readout(theta: float, phi: float) -> tuple:
    """Map the signed-tilt chart back to (tilt in [0, pi], azimuth in [0, 2pi))."""
    if theta >= 0.0:
        return theta, float(np.mod(phi, TWO_PI))
    return -theta, float(np.mod(phi + math.pi, TWO_PI))


def integrate(state: PhaseState, dt: float, steps: int, params: ConeParams = ConeParams()) -> PhaseState:
    """Advance one phase-space point by ``steps`` fixed RK4 steps of size dt.

    Energy drift stays below 1e-6 relative per 1e4 steps at dt = 1e-3 on
    trajectories away from the coordinate pole. The exact equilibrium
    (tilt 0, both momenta 0) is a fixed point and comes back unchanged.
    Raises NumericsError if the state turns non-finite, ValidationError if
    the final tilt leaves the [0, pi/2] chart (integrated past the fall).
    """
    if not (np.isfinite(dt) and dt > 0.0):
        raise ValidationError(f"dt must be positive, got {dt!r}")
    if steps < 0:
        raise ValidationError(f"steps must be >= 0, got {steps!r}")
    theta = np.float64(state.tilt)
    phi = np.float64(state.azimuth)
    p_theta = np.float64(state.tilt_momentum)
    p_phi = np.float64(state.azimuth_momentum)
    for _ in range(int(steps)):
        theta, phi, p_theta, p_phi = _rk4_step(theta, phi, p_theta, p_phi, dt, params)
    vals = (float(theta), float(phi), float(p_theta), float(p_phi))
    if not all(np.isfinite(v) for v in vals):
        raise NumericsError("trajectory left the finite range (non-finite state)")
    tilt, azimuth = _readout(vals[0], vals[1])
    momentum_sign = 1.0 if vals[0] >= 0.0 else -1.0
    return PhaseState(
        tilt=tilt,
        azimuth=azimuth,
        tilt_momentum=momentum_sign * vals[2],
        azimuth_momentum=vals[3],
    )


def member_seed_sequence(seed: int, member: int) -> np.random.SeedSequence:
    """Splitting rule for per-member streams: child (seed, spawn_key=(member,))."""
    return np.random.SeedSequence(entropy=int(seed), spawn_key=(int(member),))


def sample_initial(macro: InitialMacrostate, seed) -> PhaseState:
    """One uniform draw from the macrostate box, deterministic per seed.

    Draw order is fixed (tilt, azimuth, tilt momentum, azimuth momentum);
    the azimuth is wrapped into [0, 2pi) so full-circle supports are legal.
    """
    rng = np.random.default_rng(seed)
    c, r = macro.center, macro.support_radii
    tilt = rng.uniform(c.tilt - r[0], c.tilt + r[0])
    azimuth = float(np.mod(rng.uniform(c.azimuth - r[1], c.azimuth + r[1]), TWO_PI))
    p_tilt = rng.uniform(c.tilt_momentum - r[2], c.tilt_momentum + r[2])
    p_azimuth = rng.uniform(c.azimuth_momentum - r[3], c.azimuth_momentum + r[3])
    return PhaseState(tilt=tilt, azimuth=azimuth, tilt_momentum=p_tilt, azimuth_momentum=p_azimuth)


def run_ensemble(
    macro: InitialMacrostate,
    n_members: int,
    n_sectors: int,
    fall_threshold: float = 1.0,
    seed: int = 0,
    dt: float = 1e-3,
    max_steps: int = 10**6,
    params: ConeParams = ConeParams(),
) -> EnsembleResult:
    """Integrate every member until its tilt reaches the fall threshold.

    Members are drawn with per-member seed streams (see
    :func:`member_seed_sequence`) and integrated in lockstep with the same
    RK4 rule as :func:`integrate`; the update is elementwise, so each
    member's trajectory is independent of how many others are running.
    Final azimuths are binned into ``n_sectors`` equal sectors. Members that
    never cross within ``max_steps`` land in the unresolved bucket.
    """
    if n_members < 1:
        raise ValidationError(f"need at least one member, got {n_members!r}")
    if n_sectors < 2:
        raise ValidationError(f"need at least two sectors, got {n_sectors!r}")
    if not (0.0 < fall_threshold < MAX_TILT):
        raise ValidationError(f"fall threshold must lie in (0, pi/2), got {fall_threshold!r}")
    if not (np.isfinite(dt) and dt > 0.0):
        raise ValidationError(f"dt must be positive, got {dt!r}")

    n = int(n_members)
    theta = np.empty(n)
    phi = np.empty(n)
    p_theta = np.empty(n)
    p_phi = np.empty(n)
    member_seeds = np.empty(n, dtype=np.uint64)
    for m in range(n):
        ss = member_seed_sequence(seed, m)
        member_seeds[m] = ss.generate_state(1, np.uint64)[0]
        state = sample_initial(macro, ss)
        theta[m], phi[m] = state.tilt, state.azimuth
        p_theta[m], p_phi[m] = state.tilt_momentum, state.azimuth_momentum

    fall_steps = np.full(n, -1, dtype=np.int64)
    final_theta = np.full(n, np.nan)
    final_phi = np.full(n, np.nan)
    active = np.ones(n, dtype=bool)
    crossed0 = np.abs(theta) >= fall_threshold
    if crossed0.any():
        fall_steps[crossed0] = 0
        final_theta[crossed0] = theta[crossed0]
        final_phi[crossed0] = phi[crossed0]
        active &= ~crossed0

    step = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while active.any() and step < max_steps:
            idx = np.nonzero(active)[0]
            new = _rk4_step(theta[idx], phi[idx], p_theta[idx], p_phi[idx], dt, params)
            theta[idx], phi[idx], p_theta[idx], p_phi[idx] = new
            step += 1
            crossed = idx[np.abs(theta[idx]) >= fall_threshold]
            if crossed.size:
                fall_steps[crossed] = step
                final_theta[crossed] = theta[crossed]
                final_phi[crossed] = phi[crossed]
                active[crossed] = False

    sectors = np.full(n, -1, dtype=np.int64)
    fall_times = np.full(n, np.nan)
    final_azimuths = np.full(n, np.nan)
    width = TWO_PI / n_sectors
    resolved = fall_steps >= 0
    for m in np.nonzero(resolved)[0]:
        _, azimuth = _readout(final_theta[m], final_phi[m])
        final_azimuths[m] = azimuth
        sectors[m] = min(int(azimuth // width), n_sectors - 1)
        fall_times[m] = fall_steps[m] * dt
    counts = np.bincount(sectors[resolved], minlength=n_sectors) if resolved.any() else np.zeros(n_sectors, dtype=int)
    return EnsembleResult(
        sector_counts=counts.astype(int),
        n_unresolved=int(n - resolved.sum()),
        sectors=sectors,
        fall_times=fall_times,
        final_azimuths=final_azimuths,
        member_seeds=member_seeds,
        n_sectors=int(n_sectors),
    )


def liouville_check(
    macro: InitialMacrostate,
    dt: float,
    steps: int,
    n_probe: int = 8,
    params: ConeParams = ConeParams(),
    probe_scale: float = 1e-6,
) -> float:
    """Estimated phase-volume ratio along trajectories from the macrostate.

    Each bundle of 8 probes takes centered differences of the flow map along
    the four phase-space axes (displacement = probe_scale * support radius);
    the Jacobian determinant estimates the local volume ratio, which is 1
    for the undamped Hamiltonian flow up to integrator and differencing
    error. ``n_probe // 8`` bundles are spread across the support and their
    determinants averaged.
    """
    if n_probe < 8:
        raise ValidationError(f"need at least 8 probes (2 per coordinate), got {n_probe!r}")
    if steps < 0:
        raise ValidationError(f"steps must be >= 0, got {steps!r}")
    if steps == 0:
        return 1.0  # identity map: exact
    if not (np.isfinite(probe_scale) and probe_scale > 0.0):
        raise NumericsError("degenerate probe bundle: displacement is not positive")
    n_bundles = n_probe // 8
    c = macro.center
    radii = np.asarray(macro.support_radii)
    base = np.array([c.tilt, c.azimuth, c.tilt_momentum, c.azimuth_momentum])
    h = probe_scale * radii
    dets = []
    for j in range(n_bundles):
        offset = (j / n_bundles - 0.5 * (n_bundles - 1) / n_bundles) * 0.5
        center_j = base + offset * radii
        probes = np.empty((4, 8))  # coords x probes
        for axis in range(4):
            plus = center_j.copy()
            minus = center_j.copy()
            plus[axis] += h[axis]
            minus[axis] -= h[axis]
            probes[:, 2 * axis] = plus
            probes[:, 2 * axis + 1] = minus
        th, ph, pt, pp = probes[0], probes[1], probes[2], probes[3]
        for _ in range(int(steps)):
            th, ph, pt, pp = _rk4_step(th, ph, pt, pp, dt, params)
        flowed = np.vstack([th, ph, pt, pp])
        if not np.all(np.isfinite(flowed)):
            raise NumericsError("degenerate probe bundle: flow produced non-finite probes")
        jac = np.empty((4, 4))
        for axis in range(4):
            jac[:, axis] = (flowed[:, 2 * axis] - flowed[:, 2 * axis + 1]) / (2.0 * h[axis])
        det = float(abs(np.linalg.det(jac)))
        if not np.isfinite(det) or det == 0.0:
            raise NumericsError("degenerate probe bundle: singular flow Jacobian")
        dets.append(det)
    return float(np.mean(dets))


def chi_square_uniform(counts) -> float:
    """Pearson chi-square statistic of observed counts against the uniform law."""
    obs = np.asarray(counts, dtype=float)
    if obs.ndim != 1 or obs.size < 2:
        raise ValidationError("need counts over at least two categories")
    total = obs.sum()
    if total <= 0:
        raise ValidationError("need at least one observation")
    expected = total / obs.size
    return float(np.sum((obs - expected) ** 2) / expected)

"""Stochastic macrospin dynamics of an in-plane nanomagnet.

The free layer is a single coherent moment ``m`` (unit vector) evolving
under precession, Gilbert damping and spin torque:

    (1 + alpha^2) dm/dt = -gamma m x H_eff - gamma alpha m x (m x H_eff)
                          + (1/(q N_s)) m x (I_s x m)

with ``H_eff`` the shape-anisotropy (demagnetization) field plus, at
finite temperature, a Gaussian thermal field redrawn every step.  The
device frame puts the ellipse major axis (easy axis) along x, the minor
axis along y and the film normal along z.  The low-resistance (P)
orientation is m_x = -1; a reversal to m_x = +1 is the spiking event.

Integration uses the stochastic Heun predictor-corrector scheme with the
thermal field held fixed within a step (Stratonovich-consistent for this
noise model) and renormalization of ``m`` after the corrector stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import special

from .constants import CONSTANTS, PhysicalConstants

# Equilibrium orientation of the P (parallel, low-resistance) state.
P_STATE = np.array([-1.0, 0.0, 0.0])

# Largest batch of Monte Carlo trajectories integrated at once; bounds the
# size of pre-generated noise blocks without affecting results.
TRIAL_CHUNK = 256


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MagnetGeometry:
    """Elliptic free-layer disk; axes are full lengths in meters."""

    major_axis: float = 100e-9
    minor_axis: float = 40e-9
    thickness: float = 1.2e-9

    def __post_init__(self):
        if min(self.major_axis, self.minor_axis, self.thickness) <= 0.0:
            raise ValueError("all geometry dimensions must be positive")
        if self.major_axis < self.minor_axis:
            raise ValueError("major_axis must be >= minor_axis")

    @property
    def volume(self) -> float:
        """Disk volume (pi/4) * major * minor * thickness [m^3]."""
        return math.pi / 4.0 * self.major_axis * self.minor_axis * self.thickness


@dataclass(frozen=True)
class MaterialParams:
    """Magnetic material constants of the free layer."""

    M_s: float = 1.0e6      # saturation magnetization [A/m]
    alpha: float = 0.0122   # Gilbert damping

    def __post_init__(self):
        if self.M_s <= 0.0:
            raise ValueError("M_s must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")

    def spin_count(self, volume: float, consts: PhysicalConstants = CONSTANTS) -> float:
        """Number of spins N_s = M_s V / mu_B (recomputed, never stored)."""
        return self.M_s * volume / consts.mu_B


@dataclass(frozen=True)
class DemagTensor:
    """Diagonal demagnetization factors along (easy, in-plane hard, normal)."""

    n_x: float
    n_y: float
    n_z: float

    def __post_init__(self):
        total = self.n_x + self.n_y + self.n_z
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"demag factors must sum to 1, got {total}")
        for v in (self.n_x, self.n_y, self.n_z):
            if not -1e-12 <= v <= 1.0:
                raise ValueError("each demag factor must lie in [0, 1]")

    def as_array(self) -> np.ndarray:
        return np.array([self.n_x, self.n_y, self.n_z])

    def scaled_in_plane(self, scale: float) -> "DemagTensor":
        """Rescale the in-plane contrast (n_y - n_x) by ``scale``.

        n_x is held fixed and the change is absorbed into n_z so every
        factor stays in [0, 1] and the sum stays exactly 1.
        """
        n_y = self.n_x + scale * (self.n_y - self.n_x)
        n_z = 1.0 - self.n_x - n_y
        return DemagTensor(self.n_x, n_y, n_z)


@dataclass
class MagnetizationState:
    """Unit moment plus simulation clock."""

    m: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.m = np.asarray(self.m, dtype=float)
        norm = np.linalg.norm(self.m)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"|m| must be 1 within 1e-9, got {norm}")


@dataclass(frozen=True)
class ThermalConfig:
    """Integrator step, bath temperature and the identity of the noise stream."""

    temperature: float = 300.0
    dt: float = 1e-12
    rng_seed: int = 0
    rng_stream: int = 0

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.temperature < 0.0:
            raise ValueError("temperature must be >= 0")


def trial_rng(seed: int, stream: int) -> np.random.Generator:
    """Counter-based generator for one independent noise stream.

    Philox keyed on (seed, stream) gives bit-identical trajectories for a
    given pair regardless of how many other streams run concurrently.
    """
    key = np.array([seed, stream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


# ---------------------------------------------------------------------------
# demagnetization tensor of the elliptic disk
# ---------------------------------------------------------------------------

def _oblate_polar_factor(equatorial_semi: float, polar_semi: float) -> float:
    """Demag factor along the short symmetry axis of an oblate spheroid."""
    ratio = polar_semi / equatorial_semi
    if abs(ratio - 1.0) < 1e-9:
        return 1.0 / 3.0
    e = math.sqrt(1.0 - ratio * ratio)
    return (1.0 - math.sqrt(1.0 - e * e) * math.asin(e) / e) / (e * e)


def _general_ellipsoid(a: float, b: float, c: float) -> tuple[float, float, float]:
    """Demag factors of an ellipsoid with semi-axes a > b > c (closed form)."""
    phi = math.acos(c / a)
    k2 = (a * a - b * b) / (a * a - c * c)
    F = special.ellipkinc(phi, k2)
    E = special.ellipeinc(phi, k2)
    s = math.sqrt(a * a - c * c)
    n_a = a * b * c / ((a * a - b * b) * s) * (F - E)
    n_c = a * b * c / ((b * b - c * c) * s) * (b * s / (a * c) - E)
    return n_a, 1.0 - n_a - n_c, n_c


def compute_demag_tensor(geometry: MagnetGeometry) -> DemagTensor:
    """Shape-anisotropy factors of the elliptic disk.

    The disk is modeled by its inscribed ellipsoid (semi-axes = half the
    disk dimensions), for which the factors have closed forms in terms of
    incomplete elliptic integrals.  Equal-axes limits are handled exactly
    (sphere -> 1/3 each, vanishing thickness -> n_z -> 1).  The in-plane
    contrast of the result is typically rescaled afterwards to match a
    target energy barrier, which is what actually anchors the dynamics.
    """
    semi = [geometry.major_axis / 2.0, geometry.minor_axis / 2.0, geometry.thickness / 2.0]
    order = np.argsort(semi)[::-1]  # descending
    a, b, c = (semi[i] for i in order)
    rel = lambda u, v: abs(u - v) / max(u, v)

    if rel(a, c) < 1e-9:  # sphere
        vals = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)
    elif rel(a, b) < 1e-9:  # oblate spheroid, c is the symmetry axis
        n_sym = _oblate_polar_factor(a, c)
        vals = ((1.0 - n_sym) / 2.0, (1.0 - n_sym) / 2.0, n_sym)
    elif rel(b, c) < 1e-9:  # prolate spheroid, a is the symmetry axis
        e = math.sqrt(1.0 - (b / a) ** 2)
        n_sym = (1.0 - e * e) / (e * e) * (math.atanh(e) / e - 1.0)
        vals = (n_sym, (1.0 - n_sym) / 2.0, (1.0 - n_sym) / 2.0)
    else:
        vals = _general_ellipsoid(a, b, c)

    out = [0.0, 0.0, 0.0]
    for rank, axis in enumerate(order):
        out[axis] = vals[rank]
    return DemagTensor(*out)


def demag_field(m: np.ndarray, tensor: DemagTensor, M_s: float) -> np.ndarray:
    """Demagnetization field -N m M_s [A/m]; the only deterministic H_eff term."""
    return -tensor.as_array() * M_s * np.asarray(m)


def demag_energy_density(m: np.ndarray, tensor: DemagTensor, M_s: float,
                         consts: PhysicalConstants = CONSTANTS) -> float:
    """Shape-anisotropy energy density (1/2) mu_0 M_s^2 sum N_i m_i^2 [J/m^3]."""
    n = tensor.as_array()
    m = np.asarray(m)
    return 0.5 * consts.mu_0 * M_s * M_s * float(np.dot(n, m * m))


# ---------------------------------------------------------------------------
# thermal field and the deterministic right-hand side
# ---------------------------------------------------------------------------

def thermal_field_std(cfg: ThermalConfig, mat: MaterialParams, geom: MagnetGeometry,
                      consts: PhysicalConstants = CONSTANTS) -> float:
    """Per-component standard deviation of the thermal field [A/m].

    sigma = sqrt( alpha/(1+alpha^2) * 2 k_B T / (gamma mu_0 M_s V dt) );
    exactly zero at T = 0.
    """
    if cfg.temperature == 0.0:
        return 0.0
    a = mat.alpha
    num = a / (1.0 + a * a) * 2.0 * consts.k_B * cfg.temperature
    den = consts.gamma * consts.mu_0 * mat.M_s * geom.volume * cfg.dt
    return math.sqrt(num / den)


def thermal_field(cfg: ThermalConfig, mat: MaterialParams, geom: MagnetGeometry,
                  rng: np.random.Generator,
                  consts: PhysicalConstants = CONSTANTS) -> np.ndarray:
    """Draw one thermal field sample (3 i.i.d. Gaussian components) [A/m]."""
    sigma = thermal_field_std(cfg, mat, geom, consts)
    if sigma == 0.0:
        return np.zeros(3)
    return sigma * rng.standard_normal(3)


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise cross product for (n, 3) arrays (faster than np.cross here)."""
    out = np.empty_like(a)
    out[..., 0] = a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1]
    out[..., 1] = a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2]
    out[..., 2] = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    return out


def llg_rhs(m: np.ndarray, h_eff: np.ndarray, i_s: np.ndarray, mat: MaterialParams,
            consts: PhysicalConstants = CONSTANTS, n_s: float | None = None,
            volume: float | None = None) -> np.ndarray:
    """dm/dt [1/s] for moment(s) ``m`` under field ``h_eff`` and spin current ``i_s``.

    Accepts a single (3,) vector or an (n, 3) batch.  ``i_s`` is the spin
    current vector in amperes.  ``n_s`` (spin count) may be passed directly;
    otherwise it is derived from ``volume``.  Every term is a cross product
    with m, so the result is exactly tangent to the unit sphere.
    """
    single = np.asarray(m).ndim == 1
    m = np.atleast_2d(np.asarray(m, dtype=float))
    h = np.broadcast_to(np.asarray(h_eff, dtype=float), m.shape)
    alpha = mat.alpha
    scale = 1.0 / (1.0 + alpha * alpha)
    m_x_h = _cross(m, h)
    dmdt = -consts.gamma * scale * (m_x_h + alpha * _cross(m, m_x_h))
    i_s = np.asarray(i_s, dtype=float)
    if np.any(i_s != 0.0):
        if n_s is None:
            if volume is None:
                raise ValueError("llg_rhs needs n_s or volume for the spin-torque term")
            n_s = mat.spin_count(volume, consts)
        i_vec = np.broadcast_to(i_s, m.shape)
        dmdt = dmdt + (scale / (consts.q * n_s)) * _cross(m, _cross(i_vec, m))
    return dmdt[0] if single else dmdt


# ---------------------------------------------------------------------------
# model bundle and the Heun integrator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MacrospinModel:
    """Geometry + material + demag tensor with cached derived quantities."""

    geometry: MagnetGeometry
    material: MaterialParams
    tensor: DemagTensor
    consts: PhysicalConstants = CONSTANTS

    @property
    def volume(self) -> float:
        return self.geometry.volume

    @property
    def n_s(self) -> float:
        return self.material.spin_count(self.volume, self.consts)

    def thermal_std(self, cfg: ThermalConfig) -> float:
        return thermal_field_std(cfg, self.material, self.geometry, self.consts)

    def energy_density(self, m: np.ndarray) -> float:
        return demag_energy_density(m, self.tensor, self.material.M_s, self.consts)

    def with_tensor(self, tensor: DemagTensor) -> "MacrospinModel":
        return replace(self, tensor=tensor)


def default_model(thickness: float = 1.2e-9, tensor: DemagTensor | None = None) -> MacrospinModel:
    """Standard 100 x 40 nm disk at the given free-layer thickness."""
    geom = MagnetGeometry(thickness=thickness)
    mat = MaterialParams()
    return MacrospinModel(geom, mat, tensor if tensor is not None else compute_demag_tensor(geom))


def heun_run(m: np.ndarray, model: MacrospinModel, i_s_axis: float, n_steps: int,
             dt: float, noise: np.ndarray | None = None,
             record_every: int = 0) -> np.ndarray | tuple[np.ndarray, np.ndarray]:
    """Advance an (n, 3) batch of moments by ``n_steps`` Heun steps.

    ``i_s_axis`` is the spin-current amplitude along +x (the spin-Hall
    polarization axis); ``noise`` holds pre-scaled thermal fields of shape
    (n, n_steps, 3), or None at zero temperature.  With ``record_every``
    > 0, also returns the trajectory of the first batch element sampled
    every that many steps (sample k is the state after step k+1).
    """
    m = np.array(m, dtype=float, copy=True)
    if m.ndim == 1:
        m = m[None, :]
    alpha = model.material.alpha
    scale = 1.0 / (1.0 + alpha * alpha)
    gam = model.consts.gamma * scale
    stt = scale / (model.consts.q * model.n_s)
    n_premul = -model.tensor.as_array() * model.material.M_s

    i_vec = np.zeros(3)
    i_vec[0] = i_s_axis
    have_stt = i_s_axis != 0.0
    rec = []

    for k in range(n_steps):
        h_th = noise[:, k, :] if noise is not None else 0.0

        h0 = n_premul * m + h_th
        mxh = _cross(m, h0)
        f0 = -gam * (mxh + alpha * _cross(m, mxh))
        if have_stt:
            f0 += stt * _cross(m, _cross(np.broadcast_to(i_vec, m.shape), m))

        mp = m + dt * f0
        h1 = n_premul * mp + h_th
        mxh = _cross(mp, h1)
        f1 = -gam * (mxh + alpha * _cross(mp, mxh))
        if have_stt:
            f1 += stt * _cross(mp, _cross(np.broadcast_to(i_vec, mp.shape), mp))

        m = m + 0.5 * dt * (f0 + f1)
        m /= np.linalg.norm(m, axis=-1, keepdims=True)
        if record_every and (k + 1) % record_every == 0:
            rec.append(m[0].copy())

    if record_every:
        return m, np.array(rec)
    return m


def step(state: MagnetizationState, drive: np.ndarray, cfg: ThermalConfig,
         model: MacrospinModel, rng: np.random.Generator | None = None) -> MagnetizationState:
    """One Heun step of a single trajectory; drive is the spin-current vector [A]."""
    if rng is None:
        rng = trial_rng(cfg.rng_seed, cfg.rng_stream)
    sigma = model.thermal_std(cfg)
    noise = None
    if sigma > 0.0:
        noise = (sigma * rng.standard_normal(3))[None, None, :]
    drive = np.asarray(drive, dtype=float)
    if drive[1] != 0.0 or drive[2] != 0.0:
        raise ValueError("spin current must be polarized along the easy axis (x)")
    m = heun_run(state.m, model, float(drive[0]), 1, cfg.dt, noise)
    return MagnetizationState(m=m[0], time=state.time + cfg.dt)


def run_trajectory(state: MagnetizationState, i_s_axis: float, duration: float,
                   cfg: ThermalConfig, model: MacrospinModel,
                   rng: np.random.Generator) -> MagnetizationState:
    """Integrate a single trajectory for ``duration`` at constant drive."""
    n_steps = int(round(duration / cfg.dt))
    if n_steps == 0:
        return state
    sigma = model.thermal_std(cfg)
    noise = None
    if sigma > 0.0:
        noise = sigma * rng.standard_normal((1, n_steps, 3))
    m = heun_run(state.m, model, i_s_axis, n_steps, cfg.dt, noise)
    return MagnetizationState(m=m[0], time=state.time + n_steps * cfg.dt)


# ---------------------------------------------------------------------------
# pulse trains
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Pulse:
    """Rectangular spin-current pulse along the +x polarization axis."""

    start: float     # [s]
    duration: float  # [s]
    amplitude: float  # spin current [A]


@dataclass
class Trajectory:
    """Sampled magnetization trace."""

    times: np.ndarray
    m: np.ndarray  # (n_samples, 3)

    def to_csv(self, path) -> None:
        header = "time_s,m_x,m_y,m_z"
        data = np.column_stack([self.times, self.m])
        np.savetxt(path, data, delimiter=",", header=header, comments="",
                   fmt="%.9e")


def simulate_pulse_train(initial: MagnetizationState, pulses: list[Pulse],
                         cfg: ThermalConfig, model: MacrospinModel,
                         total_time: float | None = None,
                         sample_every: int = 10) -> Trajectory:
    """Drive the magnet with a train of non-overlapping pulses.

    Returns m(t) sampled every ``sample_every`` integrator steps.  The
    simulation runs until ``total_time`` (default: last pulse end plus a
    relaxation tail equal to one pulse duration, or 1 ns with no pulses).
    """
    pulses = sorted(pulses, key=lambda p: p.start)
    t_cursor = initial.time
    for p in pulses:
        if p.duration <= 0.0:
            raise ValueError("pulse duration must be positive")
        if p.start < t_cursor - 1e-18:
            raise ValueError("pulses must be time-ordered and non-overlapping")
        t_cursor = p.start + p.duration
    if total_time is None:
        total_time = (t_cursor - initial.time) + (pulses[-1].duration if pulses else 1e-9)

    rng = trial_rng(cfg.rng_seed, cfg.rng_stream)
    sigma = model.thermal_std(cfg)

    # build the (start_step, n_steps, amplitude) schedule, gaps included
    edges = []
    t0 = initial.time
    for p in pulses:
        gap = int(round((p.start - t0) / cfg.dt))
        if gap > 0:
            edges.append((gap, 0.0))
        edges.append((int(round(p.duration / cfg.dt)), p.amplitude))
        t0 = p.start + p.duration
    tail = int(round((initial.time + total_time - t0) / cfg.dt))
    if tail > 0:
        edges.append((tail, 0.0))

    m = initial.m[None, :].copy()
    samples = [initial.m.copy()]
    times = [initial.time]
    t = initial.time
    step_count = 0
    for n_steps, amp in edges:
        if n_steps == 0:
            continue
        noise = sigma * rng.standard_normal((1, n_steps, 3)) if sigma > 0.0 else None
        # integrate in record chunks so sampling stays aligned across segments
        done = 0
        while done < n_steps:
            take = min(sample_every - step_count % sample_every, n_steps - done)
            seg_noise = noise[:, done:done + take, :] if noise is not None else None
            m = heun_run(m, model, amp, take, cfg.dt, seg_noise)
            done += take
            step_count += take
            t = initial.time + step_count * cfg.dt
            if step_count % sample_every == 0:
                samples.append(m[0].copy())
                times.append(t)
    return Trajectory(times=np.array(times), m=np.array(samples))

"""Monte Carlo switching characteristics and the behavioral neuron model.

A sweep runs many independent write trials per (current, barrier, pulse
width) cell.  Every trial follows the same protocol: thermalize the
parallel state for 5 ns at zero current, apply the write pulse, relax
for 1 ns at zero current, then count the trial as switched if it ends in
the antiparallel basin.  Trials draw their noise from counter-based
streams keyed on the cell and trial indices, so tables are bit-identical
no matter how work is split across processes.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .constants import CONSTANTS
from .device import DeviceParams, charge_to_spin, pinned_layer_spin_current
from .errors import CalibrationError, CharacterizationError
from .magnetics import (MacrospinModel, MagnetGeometry, MaterialParams, DemagTensor,
                        P_STATE, TRIAL_CHUNK, ThermalConfig, compute_demag_tensor,
                        heun_run, trial_rng)

# Trial protocol (shared by all sweeps and by the write-phase LLG backend
# convention): thermalized start, pulse, relax, basin verdict.  The verdict
# is the sign of the easy-axis component after the relaxation window: the
# window lets in-transit trajectories commit to a basin, and basin sign is
# immune to equilibrium thermal spread (a fixed angle cutoff like 0.9 would
# miscount exp(-0.19 E_B/kT) of genuinely switched trials, 15% at 10 k_B T).
THERMALIZE_TIME = 5e-9
RELAX_TIME = 1e-9
SWITCH_THRESHOLD = 0.0

# Barrier values are quoted in units of k_B T at room temperature.
BARRIER_REFERENCE_T = 300.0

# Free-layer thickness realizing each standard barrier height [k_B T -> m].
THICKNESS_FOR_BARRIER = {10.0: 0.8e-9, 20.0: 1.2e-9, 30.0: 1.5e-9}

AUTO_GRID_POINTS = 25

# stream namespaces so grid probes never collide with table cells
_PROBE_NAMESPACE = 1 << 60


# ---------------------------------------------------------------------------
# energy barrier and calibration
# ---------------------------------------------------------------------------

def energy_barrier(geometry: MagnetGeometry, material: MaterialParams,
                   tensor: DemagTensor, consts=CONSTANTS) -> float:
    """In-plane macrospin barrier (1/2) mu_0 M_s^2 V (N_y - N_x) [J].

    Degenerate in-plane isotropy (N_x = N_y) gives a zero barrier; an
    easy axis along y (N_x > N_y) is a configuration error.
    """
    dn = tensor.n_y - tensor.n_x
    if dn < 0.0:
        raise CalibrationError("no in-plane easy axis along x: N_x exceeds N_y")
    return 0.5 * consts.mu_0 * material.M_s ** 2 * geometry.volume * dn


@dataclass(frozen=True)
class BarrierCalibration:
    """Scaling of the in-plane demag contrast that hits a target barrier."""

    thickness: float
    target: float          # [J]
    achieved: float        # [J]
    scaling: float
    tensor: DemagTensor

    @property
    def relative_error(self) -> float:
        return abs(self.achieved - self.target) / self.target


def calibrate_barrier(thickness: float, target: float,
                      geometry: MagnetGeometry | None = None,
                      material: MaterialParams | None = None) -> BarrierCalibration:
    """Rescale (N_y - N_x) so the barrier equals ``target`` joules exactly.

    The raw tensor comes from the disk shape; scaling is stored for reuse
    so the standard operating points (0.8, 1.2, 1.5) nm -> (10, 20, 30)
    k_B T are reproduced on demand.  Raises if the required scaling would
    push a factor out of [0, 1].
    """
    if target <= 0.0:
        raise CalibrationError("target barrier must be positive")
    geom = geometry if geometry is not None else MagnetGeometry(thickness=thickness)
    mat = material if material is not None else MaterialParams()
    raw = compute_demag_tensor(geom)
    raw_eb = energy_barrier(geom, mat, raw)
    if raw_eb == 0.0:
        raise CalibrationError("shape has no in-plane anisotropy to rescale")
    scaling = target / raw_eb
    n_y_new = raw.n_x + scaling * (raw.n_y - raw.n_x)
    n_z_new = 1.0 - raw.n_x - n_y_new
    if not (0.0 <= n_y_new <= 1.0 and 0.0 <= n_z_new <= 1.0):
        raise CalibrationError(f"barrier target {target} J unreachable for this shape")
    scaled = raw.scaled_in_plane(scaling)
    achieved = energy_barrier(geom, mat, scaled)
    return BarrierCalibration(thickness=geom.thickness, target=target,
                              achieved=achieved, scaling=scaling, tensor=scaled)


def calibrated_model(eb_kt: float, thickness: float | None = None,
                     material: MaterialParams | None = None) -> tuple[MacrospinModel, BarrierCalibration]:
    """Macrospin model whose barrier equals ``eb_kt`` k_B T at 300 K."""
    if thickness is None:
        thickness = THICKNESS_FOR_BARRIER.get(float(eb_kt), 1.2e-9)
    target = eb_kt * CONSTANTS.k_B * BARRIER_REFERENCE_T
    cal = calibrate_barrier(thickness, target, material=material)
    geom = MagnetGeometry(thickness=thickness)
    mat = material if material is not None else MaterialParams()
    return MacrospinModel(geom, mat, cal.tensor), cal


def critical_current_estimate(model: MacrospinModel) -> float:
    """Zero-temperature instability spin current [A] from the linearized dynamics.

    I_c = (alpha q gamma / 2 mu_B) M_s^2 V [(N_y - N_x) + (N_z - N_x)];
    a starting point for bracketing the stochastic threshold.
    """
    c = model.consts
    t = model.tensor
    dn = (t.n_y - t.n_x) + (t.n_z - t.n_x)
    return (model.material.alpha * c.q * c.gamma / (2.0 * c.mu_B)
            * model.material.M_s ** 2 * model.volume * dn)


# ---------------------------------------------------------------------------
# sweep specification and trial engine
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    """What to sweep and how hard to sample it."""

    currents: tuple | None = None        # charge currents [A]; None -> auto grid
    barrier_targets: tuple = (10.0, 20.0, 30.0)   # [k_B T]
    pulse_widths: tuple = (0.2e-9, 0.5e-9, 1e-9)  # [s]
    trials_per_point: int = 1000
    temperature: float = 300.0
    base_seed: int = 12345
    drive: str = "spin_hall"             # or "pinned_layer"
    dt: float = 1e-12

    def __post_init__(self):
        if self.trials_per_point < 100:
            raise ValueError("trials_per_point must be >= 100")
        if self.currents is not None:
            c = np.asarray(self.currents)
            if len(c) > 1 and np.any(np.diff(c) <= 0.0):
                raise ValueError("currents must be strictly increasing")
        if self.drive not in ("spin_hall", "pinned_layer"):
            raise ValueError(f"unknown drive convention {self.drive!r}")


def _spin_current(i_q: float, drive: str, device: DeviceParams) -> float:
    if drive == "spin_hall":
        return charge_to_spin(i_q, device)
    return pinned_layer_spin_current(i_q)


def run_switching_trials(model: MacrospinModel, i_spin: float, pulse_width: float,
                         trials: int, temperature: float, dt: float,
                         seed: int, stream_base: int) -> int:
    """Count switched trials for one cell; trial j uses stream ``stream_base + j``."""
    n_therm = int(round(THERMALIZE_TIME / dt))
    n_pulse = int(round(pulse_width / dt))
    n_relax = int(round(RELAX_TIME / dt))
    sigma = model.thermal_std(ThermalConfig(temperature=temperature, dt=dt))
    switched = 0
    for lo in range(0, trials, TRIAL_CHUNK):
        hi = min(lo + TRIAL_CHUNK, trials)
        gens = [trial_rng(seed, stream_base + j) for j in range(lo, hi)]
        m = np.tile(P_STATE, (hi - lo, 1))
        for n_steps, amp in ((n_therm, 0.0), (n_pulse, i_spin), (n_relax, 0.0)):
            if n_steps == 0:
                continue
            noise = None
            if sigma > 0.0:
                noise = np.stack([g.standard_normal((n_steps, 3)) for g in gens])
                noise *= sigma
            m = heun_run(m, model, amp, n_steps, dt, noise)
        switched += int(np.count_nonzero(m[:, 0] > SWITCH_THRESHOLD))
    return switched


def _probe_psw(model, i_q, drive, device, tpw, trials, temperature, dt, seed, probe_idx):
    i_spin = _spin_current(i_q, drive, device)
    n = run_switching_trials(model, i_spin, tpw, trials, temperature, dt, seed,
                             _PROBE_NAMESPACE | (probe_idx << 32))
    return n / trials


def auto_current_grid(model: MacrospinModel, pulse_width: float, spec: SweepSpec,
                      device: DeviceParams, probe_offset: int = 0,
                      points: int = AUTO_GRID_POINTS) -> np.ndarray:
    """Log-spaced charge-current grid centered on the P = 0.5 crossing.

    A coarse bisection (192-trial probes) finds the crossing; the span is
    then widened until the probes clear P <= 0.005 and P >= 0.995 so the
    grid covers the whole transition.  A zero-current cell is prepended.
    Deterministic for a given spec, so any scheduling of the subsequent
    sweep sees the same cells.
    """
    probe_trials = 192
    gain = _spin_current(1.0, spec.drive, device)
    i = critical_current_estimate(model) / gain
    idx = probe_offset * 1000

    def probe(i_q):
        nonlocal idx
        idx += 1
        return _probe_psw(model, i_q, spec.drive, device, pulse_width, probe_trials,
                          spec.temperature, spec.dt, spec.base_seed, idx)

    lo, hi = i, i
    p = probe(i)
    if p < 0.5:
        while probe(hi) < 0.5:
            hi *= 1.8
            if hi > 1e4 * i:
                raise CharacterizationError("no switching up to 1e4x the critical estimate")
        lo = hi / 1.8
    else:
        while probe(lo) >= 0.5:
            lo /= 1.8
    for _ in range(7):
        mid = math.sqrt(lo * hi)
        if probe(mid) < 0.5:
            lo = mid
        else:
            hi = mid
    i50 = math.sqrt(lo * hi)

    span_lo, span_hi = i50 / 2.2, i50 * 2.2
    for _ in range(4):
        if probe(span_hi) >= 0.995:
            break
        span_hi *= 1.4
    for _ in range(4):
        if probe(span_lo) <= 0.005:
            break
        span_lo /= 1.4
    grid = np.geomspace(span_lo, span_hi, points)
    return np.concatenate([[0.0], grid])


@dataclass
class SwitchingProbabilityTable:
    """Monte Carlo switching probabilities over (current, barrier, pulse width)."""

    currents: np.ndarray      # [A] per cell
    eb_kt: np.ndarray         # [k_B T] per cell
    pulse_widths: np.ndarray  # [s] per cell
    p: np.ndarray
    stderr: np.ndarray
    trials: np.ndarray
    meta: dict = field(default_factory=dict)

    def slice(self, eb_kt: float, pulse_width: float):
        """(currents, p, stderr) of one curve, sorted by current.

        Axis matching is purely relative: pulse widths live at 1e-10 s
        where any absolute tolerance would merge distinct curves.
        """
        mask = (np.isclose(self.eb_kt, eb_kt, rtol=1e-9, atol=0.0) &
                np.isclose(self.pulse_widths, pulse_width, rtol=1e-9, atol=0.0))
        if not mask.any():
            raise KeyError(f"no cells at E_B = {eb_kt} k_B T, t_pw = {pulse_width}")
        order = np.argsort(self.currents[mask])
        return (self.currents[mask][order], self.p[mask][order],
                self.stderr[mask][order])

    def monotone_violations(self, slack: float = 2.0) -> list:
        """Cells where p decreases with current by more than ``slack`` stderr."""
        bad = []
        for eb in np.unique(self.eb_kt):
            for tpw in np.unique(self.pulse_widths[np.isclose(self.eb_kt, eb,
                                                              rtol=1e-9, atol=0.0)]):
                i, p, se = self.slice(eb, tpw)
                for k in range(1, len(p)):
                    allowed = slack * math.hypot(se[k - 1], se[k])
                    if p[k] < p[k - 1] - allowed:
                        bad.append((float(eb), float(tpw), float(i[k])))
        return bad

    def to_dict(self) -> dict:
        cells = [
            {"I_A": float(i), "EB_kT": float(e), "tPW_s": float(t),
             "p": float(p), "stderr": float(s), "n": int(n)}
            for i, e, t, p, s, n in zip(self.currents, self.eb_kt, self.pulse_widths,
                                        self.p, self.stderr, self.trials)
        ]
        return {
            "meta": self.meta,
            "axes": {
                "EB_kT": sorted({float(v) for v in self.eb_kt}),
                "tPW_s": sorted({float(v) for v in self.pulse_widths}),
            },
            "cells": cells,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SwitchingProbabilityTable":
        cells = data["cells"]
        return cls(
            currents=np.array([c["I_A"] for c in cells]),
            eb_kt=np.array([c["EB_kT"] for c in cells]),
            pulse_widths=np.array([c["tPW_s"] for c in cells]),
            p=np.array([c["p"] for c in cells]),
            stderr=np.array([c["stderr"] for c in cells]),
            trials=np.array([c["n"] for c in cells]),
            meta=data.get("meta", {}),
        )

    def to_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def from_json(cls, path) -> "SwitchingProbabilityTable":
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def to_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write("I_A,EB_kT,tPW_s,p,stderr,n\n")
            for i, e, t, p, s, n in zip(self.currents, self.eb_kt, self.pulse_widths,
                                        self.p, self.stderr, self.trials):
                f.write(f"{i!r},{e!r},{t!r},{p!r},{s!r},{int(n)}\n")


def _cell_worker(args):
    model, i_spin, tpw, trials, temperature, dt, seed, stream_base = args
    return run_switching_trials(model, i_spin, tpw, trials, temperature, dt,
                                seed, stream_base)


def sweep(spec: SweepSpec, device: DeviceParams | None = None,
          material: MaterialParams | None = None, workers: int = 1,
          progress=None) -> SwitchingProbabilityTable:
    """Estimate P_sw over the full (current, barrier, pulse width) grid.

    Each cell gets ``trials_per_point`` independent trajectories; cell k,
    trial j reads noise stream (k << 32) | j of ``base_seed``, so results
    do not depend on ``workers``.
    """
    device = device if device is not None else DeviceParams()
    models, cal_meta = {}, {}
    for eb in spec.barrier_targets:
        models[eb], cal = calibrated_model(eb, material=material)
        cal_meta[str(eb)] = {"thickness_m": cal.thickness, "scaling": cal.scaling,
                             "achieved_kT": cal.achieved / (CONSTANTS.k_B * BARRIER_REFERENCE_T)}

    # enumerate cells deterministically: barrier-major, then pulse width, then current
    cells = []
    for bi, eb in enumerate(spec.barrier_targets):
        for wi, tpw in enumerate(spec.pulse_widths):
            if spec.currents is not None:
                grid = np.asarray(spec.currents, dtype=float)
            else:
                grid = auto_current_grid(models[eb], tpw, spec, device,
                                         probe_offset=bi * len(spec.pulse_widths) + wi)
            for i_q in grid:
                cells.append((eb, tpw, float(i_q)))

    tasks = []
    for k, (eb, tpw, i_q) in enumerate(cells):
        i_spin = _spin_current(i_q, spec.drive, device)
        tasks.append((models[eb], i_spin, tpw, spec.trials_per_point,
                      spec.temperature, spec.dt, spec.base_seed, k << 32))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            counts = list(pool.map(_cell_worker, tasks))
    else:
        counts = []
        for t in tasks:
            counts.append(_cell_worker(t))
            if progress is not None:
                progress(len(counts), len(tasks))

    n = spec.trials_per_point
    p = np.array(counts) / n
    stderr = np.sqrt(p * (1.0 - p) / n)
    meta = {
        "backend": "llg-heun",
        "seed": spec.base_seed,
        "trials_per_point": n,
        "temperature_K": spec.temperature,
        "dt_s": spec.dt,
        "drive": spec.drive,
        "protocol": {"thermalize_s": THERMALIZE_TIME, "relax_s": RELAX_TIME,
                     "switch_threshold": SWITCH_THRESHOLD},
        "calibration": cal_meta,
        "spin_hall_gain": device.spin_hall_gain,
    }
    return SwitchingProbabilityTable(
        currents=np.array([c[2] for c in cells]),
        eb_kt=np.array([c[0] for c in cells], dtype=float),
        pulse_widths=np.array([c[1] for c in cells]),
        p=p, stderr=stderr,
        trials=np.full(len(cells), n),
        meta=meta,
    )


# ---------------------------------------------------------------------------
# behavioral model
# ---------------------------------------------------------------------------

def _pool_adjacent_violators(y: np.ndarray) -> np.ndarray:
    """Smallest-change non-decreasing fit (equal weights)."""
    y = np.asarray(y, dtype=float)
    blocks = []
    for v in y:
        blocks.append([v, 1.0])
        while len(blocks) > 1 and blocks[-2][0] > blocks[-1][0]:
            v2, w2 = blocks.pop()
            v1, w1 = blocks.pop()
            blocks.append([(v1 * w1 + v2 * w2) / (w1 + w2), w1 + w2])
    fitted = np.empty_like(y)
    k = 0
    for v, wt in blocks:
        n = int(round(wt))
        fitted[k:k + n] = v
        k += n
    return fitted


class BehavioralModel:
    """Monotone interpolant P_sw(I) built from one table slice.

    Queries below the grid return the lowest cell value, above the grid
    the highest; everything is clamped to [0, 1].
    """

    def __init__(self, currents: np.ndarray, p: np.ndarray):
        self.currents = np.asarray(currents, dtype=float)
        self.p = np.asarray(p, dtype=float)
        if len(self.currents) >= 2:
            self._interp = PchipInterpolator(self.currents, self.p, extrapolate=False)
        else:
            self._interp = None

    def __call__(self, current):
        i = np.asarray(current, dtype=float)
        scalar = i.ndim == 0
        i = np.atleast_1d(i)
        out = np.empty_like(i)
        below = i <= self.currents[0]
        above = i >= self.currents[-1]
        mid = ~(below | above)
        out[below] = self.p[0]
        out[above] = self.p[-1]
        if mid.any():
            out[mid] = self._interp(i[mid])
        out = np.clip(out, 0.0, 1.0)
        return float(out[0]) if scalar else out

    def inverse(self, target: float) -> float:
        """Current at which the interpolant crosses ``target``."""
        if not self.p[0] <= target <= self.p[-1]:
            raise CharacterizationError(
                f"table slice does not bracket P = {target}")
        f = lambda i: self(i) - target
        return brentq(f, self.currents[0], self.currents[-1], xtol=1e-12)


def build_behavioral_model(table: SwitchingProbabilityTable, eb_kt: float,
                           pulse_width: float, slack: float = 2.0) -> BehavioralModel:
    """Shape-preserving monotone interpolant of one (E_B, t_PW) curve.

    Raises when the slice is too sparse, does not span P 0.01-0.99, or is
    non-monotone beyond the statistical slack (rerun with more trials).
    """
    currents, p, se = table.slice(eb_kt, pulse_width)
    if len(currents) < 8:
        raise CharacterizationError("need at least 8 current points for a model")
    if p.min() > 0.01 or p.max() < 0.99:
        raise CharacterizationError(
            f"slice spans P {p.min():.3f}-{p.max():.3f}; need 0.01-0.99 coverage")
    for k in range(1, len(p)):
        if p[k] < p[k - 1] - slack * math.hypot(se[k - 1], se[k]):
            raise CharacterizationError(
                "slice non-monotone beyond statistical slack; rerun with more trials")
    return BehavioralModel(currents, _pool_adjacent_violators(p))


def dispersion_metric(model: BehavioralModel) -> float:
    """Transition width I(P=0.9) - I(P=0.1) [A]."""
    return model.inverse(0.9) - model.inverse(0.1)

"""Three-terminal MTJ neuron: spin-Hall write path, two-state read, reset.

Each simulation time step runs one full write -> read -> reset cycle.
During the write phase the synaptic charge current through the heavy
metal converts to a spin current and probabilistically switches the free
layer; the read phase senses the state through a resistive divider
against a reference junction pinned antiparallel; the reset phase drives
a switched neuron back to the parallel state and makes it refractory for
the following write window.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import magnetics
from .errors import PhaseProtocolError
from .magnetics import MacrospinModel, MagnetizationState, ThermalConfig, P_STATE


@dataclass(frozen=True)
class DeviceParams:
    """Electrical and geometric device constants.

    ``w_mtj`` is the MTJ dimension entering the spin-Hall gain
    theta_sh * w_mtj / t_hm.  The default is calibrated so that a 71 uA
    synaptic current switches the 20 k_B T neuron with probability 0.5
    during a 0.5 ns write window.
    """

    r_p: float = 1.21e6          # parallel resistance [ohm]
    r_ap: float = 2.5e6          # antiparallel resistance [ohm]
    theta_sh: float = 0.3        # spin-Hall angle
    w_mtj: float = 32e-9         # MTJ dimension in the spin-Hall gain [m]
    t_hm: float = 2e-9           # heavy-metal thickness [m]
    r_hm: float = 400.0          # heavy-metal write-path resistance [ohm]
    rho_hm: float = 2.0e-6       # heavy-metal resistivity [ohm m]
    v_dd: float = 1.0            # supply voltage [V]
    t_write: float = 0.5e-9      # write phase duration [s]
    t_read: float = 0.5e-9       # read phase duration [s]
    t_reset: float = 0.5e-9      # reset phase duration [s]
    i_reset: float = 150e-6      # reset current [A]
    e_inverter: float = 1.47e-15  # fixed read-circuit energy per read [J]

    def __post_init__(self):
        if not self.r_ap > self.r_p > 0.0:
            raise ValueError("need r_ap > r_p > 0")
        if not 0.0 < self.theta_sh <= 1.0:
            raise ValueError("theta_sh must lie in (0, 1]")
        for name in ("t_write", "t_read", "t_reset"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")

    @property
    def spin_hall_gain(self) -> float:
        """Spin current per unit charge current, theta_sh * w_mtj / t_hm."""
        return self.theta_sh * self.w_mtj / self.t_hm


def charge_to_spin(i_q: float, params: DeviceParams) -> float:
    """Spin current generated by charge current ``i_q`` through the heavy metal.

    Signed: the sign of ``i_q`` selects the injected spin polarity
    (write vs reset direction).  The gain exceeds 1 for the default
    parameters (spin injection efficiency above 100%).
    """
    return params.spin_hall_gain * i_q


PINNED_LAYER_POLARIZATION = 0.5


def pinned_layer_spin_current(i_q: float) -> float:
    """Spin current for direct injection through the pinned layer (~50% polarized)."""
    return PINNED_LAYER_POLARIZATION * i_q


def mtj_resistance(m: np.ndarray, params: DeviceParams) -> float:
    """Junction resistance from the free-layer orientation.

    Two-state conductance interpolation between the parallel and
    antiparallel endpoints: G = G_p (1+cos th)/2 + G_ap (1-cos th)/2 with
    ``th`` the angle between m and the pinned-layer axis (-x).
    """
    cos_th = -float(np.asarray(m)[0])
    g_p = 1.0 / params.r_p
    g_ap = 1.0 / params.r_ap
    g = g_p * (1.0 + cos_th) / 2.0 + g_ap * (1.0 - cos_th) / 2.0
    return 1.0 / g


class Phase(Enum):
    WRITE = "write"
    READ = "read"
    RESET = "reset"


class LogicalState(Enum):
    P = "P"
    AP = "AP"


@dataclass
class EnergyLedger:
    """Cumulative I^2 R t energy bookkeeping with an event log for replay."""

    write_energy: float = 0.0
    read_energy: float = 0.0
    reset_energy: float = 0.0
    spike_count: int = 0
    events: list = field(default_factory=list)

    def add_write(self, current: float, resistance: float, duration: float) -> float:
        current = float(current)
        e = current * current * resistance * duration
        self.write_energy += e
        self.events.append(("write", current, resistance, duration))
        return e

    def add_read(self, energy: float) -> float:
        energy = float(energy)
        self.read_energy += energy
        self.events.append(("read", energy, 0.0, 0.0))
        return energy

    def add_reset(self, current: float, resistance: float, duration: float) -> float:
        current = float(current)
        e = current * current * resistance * duration
        self.reset_energy += e
        self.events.append(("reset", current, resistance, duration))
        return e

    def replay_totals(self) -> dict:
        """Re-accumulate the event log in order; must match the running totals."""
        totals = {"write": 0.0, "read": 0.0, "reset": 0.0}
        for kind, a, b, c in self.events:
            if kind == "read":
                totals["read"] += a
            else:
                totals[kind] += a * a * b * c
        return totals

    def summary(self) -> dict:
        spikes = max(self.spike_count, 1)
        total = self.write_energy + self.read_energy + self.reset_energy
        return {
            "write_fj": self.write_energy * 1e15,
            "read_fj": self.read_energy * 1e15,
            "reset_fj": self.reset_energy * 1e15,
            "spikes": self.spike_count,
            "per_spike_fj": total * 1e15 / spikes,
        }

    def merge(self, other: "EnergyLedger") -> None:
        self.write_energy += other.write_energy
        self.read_energy += other.read_energy
        self.reset_energy += other.reset_energy
        self.spike_count += other.spike_count
        self.events.extend(other.events)


@dataclass
class NeuronDeviceState:
    """Per-neuron device state carried across phases."""

    magnet: MagnetizationState
    phase: Phase = Phase.WRITE
    refractory_remaining: int = 0

    @property
    def logical_state(self) -> LogicalState:
        return LogicalState.P if self.magnet.m[0] < 0.0 else LogicalState.AP


class BehavioralBackend:
    """Memoryless stochastic write model built from a switching table.

    ``psw`` maps a charge current [A] to a per-write-window switching
    probability; each write window starts from the thermally equilibrated
    parallel state, so no magnetization is carried between steps.
    """

    def __init__(self, psw):
        self.psw = psw

    def write(self, state: NeuronDeviceState, i_syn: float, params: DeviceParams,
              rng: np.random.Generator) -> bool:
        p = float(self.psw(max(i_syn, 0.0)))
        switched = bool(rng.random() < p)
        if switched:
            state.magnet = MagnetizationState(m=-P_STATE.copy(),
                                              time=state.magnet.time + params.t_write)
        else:
            state.magnet = MagnetizationState(m=P_STATE.copy(),
                                              time=state.magnet.time + params.t_write)
        return switched

    def reset(self, state: NeuronDeviceState, params: DeviceParams,
              rng: np.random.Generator) -> int:
        state.magnet = MagnetizationState(m=P_STATE.copy(),
                                          time=state.magnet.time + params.t_reset)
        return 1


class LlgBackend:
    """Full stochastic macrospin integration of every phase."""

    def __init__(self, model: MacrospinModel, thermal: ThermalConfig):
        self.model = model
        self.thermal = thermal

    def write(self, state: NeuronDeviceState, i_syn: float, params: DeviceParams,
              rng: np.random.Generator) -> bool:
        i_s = charge_to_spin(i_syn, params)
        state.magnet = magnetics.run_trajectory(state.magnet, i_s, params.t_write,
                                                self.thermal, self.model, rng)
        return state.magnet.m[0] > 0.0

    def reset(self, state: NeuronDeviceState, params: DeviceParams,
              rng: np.random.Generator) -> int:
        """Reverse drive until the parallel basin is reached; returns drive quanta.

        The reset gate is held by a latch storing the spike flag, so the
        drive persists until the junction has actually switched back; the
        switching-time tail occasionally needs more than one window.
        """
        i_s = -abs(charge_to_spin(params.i_reset, params))
        quanta = 0
        while quanta < 20:
            state.magnet = magnetics.run_trajectory(state.magnet, i_s, params.t_reset,
                                                    self.thermal, self.model, rng)
            quanta += 1
            if state.magnet.m[0] < 0.0:
                return quanta
        raise RuntimeError("reset drive failed to restore the parallel state")


class MtjNeuron:
    """One stochastic spiking neuron cycling write -> read -> reset."""

    def __init__(self, params: DeviceParams, backend, rng: np.random.Generator,
                 ledger: EnergyLedger | None = None):
        self.params = params
        self.backend = backend
        self.rng = rng
        self.ledger = ledger if ledger is not None else EnergyLedger()
        self.state = NeuronDeviceState(magnet=MagnetizationState(m=P_STATE.copy()))
        self._last_switched = False

    def _expect_phase(self, phase: Phase) -> None:
        if self.state.phase is not phase:
            raise PhaseProtocolError(
                f"{phase.value} phase called while device is in {self.state.phase.value}")

    def write_phase(self, i_syn: float) -> bool:
        """Apply the synaptic current for one write window.

        A refractory neuron has its input gated to zero and cannot switch;
        the gated current is also what dissipates in the heavy metal.
        """
        self._expect_phase(Phase.WRITE)
        if self.state.refractory_remaining > 0:
            self.state.refractory_remaining -= 1
            i_eff = 0.0
            switched = False
            # keep the magnet clock in sync without consuming noise
            self.state.magnet = MagnetizationState(
                m=self.state.magnet.m, time=self.state.magnet.time + self.params.t_write)
        else:
            i_eff = i_syn
            switched = self.backend.write(self.state, i_eff, self.params, self.rng)
        self.ledger.add_write(i_eff, self.params.r_hm, self.params.t_write)
        self._last_switched = switched
        self.state.phase = Phase.READ
        return switched

    def read_phase(self) -> tuple[bool, float]:
        """Sense the junction; returns (spike, read energy of this phase).

        The divider current is assumed non-perturbative (no read disturb):
        the reference junction is fixed antiparallel, so the divider
        dissipates V_dd^2 / (R_neuron + R_ap) for the read duration, plus
        the configured inverter energy.
        """
        self._expect_phase(Phase.READ)
        spike = self.state.logical_state is LogicalState.AP
        r_neuron = mtj_resistance(self.state.magnet.m, self.params)
        energy = (self.params.v_dd ** 2 / (r_neuron + self.params.r_ap)
                  * self.params.t_read + self.params.e_inverter)
        self.ledger.add_read(energy)
        self.state.phase = Phase.RESET
        return spike, energy

    def reset_phase(self, spiked: bool) -> None:
        """Drive a spiked neuron back to parallel; otherwise a no-op."""
        self._expect_phase(Phase.RESET)
        if spiked:
            quanta = self.backend.reset(self.state, self.params, self.rng)
            self.state.refractory_remaining = 1
            for _ in range(quanta):
                self.ledger.add_reset(self.params.i_reset, self.params.r_hm,
                                      self.params.t_reset)
            self.ledger.spike_count += 1
        self.state.phase = Phase.WRITE

    def cycle(self, i_syn: float) -> bool:
        """One full time step; returns whether the neuron spiked."""
        self.write_phase(i_syn)
        spike, _ = self.read_phase()
        self.reset_phase(spike)
        return spike


def write_energy(i_syn: float, params: DeviceParams) -> float:
    """Heavy-metal dissipation of one write window, I^2 R_hm t_write [J]."""
    return i_syn * i_syn * params.r_hm * params.t_write


def reset_energy(params: DeviceParams) -> float:
    """Heavy-metal dissipation of one reset event [J]."""
    return params.i_reset ** 2 * params.r_hm * params.t_reset


def read_energy(logical_state: LogicalState, params: DeviceParams) -> float:
    """Divider plus inverter energy of one read [J]."""
    r_neuron = params.r_p if logical_state is LogicalState.P else params.r_ap
    return params.v_dd ** 2 / (r_neuron + params.r_ap) * params.t_read + params.e_inverter

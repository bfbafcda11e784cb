"""Stochastic MTJ spiking-neuron and crossbar network simulator.

Two layers: a stochastic macrospin integrator characterizing an in-plane
magnetic tunnel junction as a probabilistic spiking neuron, and a
crossbar spiking network that learns two-class digit patterns with STDP,
lateral inhibition and homeostasis using the Monte Carlo behavioral
neuron model.
"""

__version__ = "0.1.0"

from .characterization import (BarrierCalibration, BehavioralModel,
                               SweepSpec, SwitchingProbabilityTable,
                               build_behavioral_model, calibrate_barrier,
                               calibrated_model, dispersion_metric, energy_barrier,
                               sweep)
from .config import RunConfig
from .constants import CONSTANTS, PhysicalConstants
from .datasets import ImageDataset, load_idx, synth_dataset
from .device import (BehavioralBackend, DeviceParams, EnergyLedger, LlgBackend,
                     MtjNeuron, charge_to_spin, mtj_resistance)
from .estimator import MtjSpikingClassifier
from .magnetics import (DemagTensor, MacrospinModel, MagnetGeometry,
                        MagnetizationState, MaterialParams, Pulse, ThermalConfig,
                        Trajectory, compute_demag_tensor, demag_field, llg_rhs,
                        simulate_pulse_train, step, thermal_field, trial_rng)
from .snn import (EncoderConfig, NetworkConfig, SpikingNetwork, StdpConfig,
                  SynapseMatrix, TrainingStats)

__all__ = [
    "__version__", "CONSTANTS", "PhysicalConstants",
    "MagnetGeometry", "MaterialParams", "DemagTensor", "MagnetizationState",
    "ThermalConfig", "MacrospinModel", "Pulse", "Trajectory",
    "compute_demag_tensor", "demag_field", "thermal_field", "llg_rhs", "step",
    "simulate_pulse_train", "trial_rng",
    "DeviceParams", "EnergyLedger", "MtjNeuron", "BehavioralBackend", "LlgBackend",
    "charge_to_spin", "mtj_resistance",
    "SweepSpec", "SwitchingProbabilityTable", "BarrierCalibration",
    "BehavioralModel", "sweep", "build_behavioral_model", "dispersion_metric",
    "energy_barrier", "calibrate_barrier", "calibrated_model",
    "SynapseMatrix", "EncoderConfig", "StdpConfig", "NetworkConfig",
    "SpikingNetwork", "TrainingStats",
    "MtjSpikingClassifier",
    "ImageDataset", "load_idx", "synth_dataset",
    "RunConfig",
]

"""Crossbar spiking network with stochastic MTJ neurons.

Rate-encoded pixel spike trains drive the rows of a resistive crossbar;
each column sums current into one stochastic neuron whose per-step
switching probability comes from the Monte Carlo behavioral model.
Learning combines pair-based STDP on 4-bit synapses, a global lateral
inhibition signal, and homeostatic scaling of each neuron's input
current.

Within one time step the order is: encode row spikes (applying STDP
depression against earlier output spikes), sum crossbar currents, scale
by the homeostasis divisors, draw the gated Bernoulli switch outcomes,
resolve a single winner (largest effective current among switched,
seeded tie-break), apply potentiation and the device reset to the
winner, then decrement all counters.  The winner itself is exempt from
the inhibition it triggers; its reset makes it refractory for exactly
one following write window.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .device import DeviceParams, EnergyLedger, LogicalState, read_energy
from .errors import DataFormatError

_NEVER = -(10 ** 9)


# ---------------------------------------------------------------------------
# synapses
# ---------------------------------------------------------------------------

@dataclass
class SynapseMatrix:
    """4-bit programmable conductances, rows = inputs, columns = neurons.

    Levels 0..15 map affinely onto [G_max/20, G_max]; in normalized form
    a weight w lives in [0.05, 1] with w = 0.05 + level * 0.95/15.
    """

    levels: np.ndarray
    g_max: float = 1.0 / 185e3
    n_levels: int = 16
    ratio: float = 20.0

    def __post_init__(self):
        self.levels = np.asarray(self.levels, dtype=np.int64)
        if self.levels.min() < 0 or self.levels.max() > self.n_levels - 1:
            raise ValueError("synapse levels must lie in 0..15")

    @property
    def g_min(self) -> float:
        return self.g_max / self.ratio

    @property
    def w_min(self) -> float:
        return 1.0 / self.ratio

    @property
    def level_step(self) -> float:
        return (1.0 - self.w_min) / (self.n_levels - 1)

    def weights(self) -> np.ndarray:
        """Normalized weights in [w_min, 1]."""
        return self.w_min + self.levels * self.level_step

    def conductances(self) -> np.ndarray:
        return self.weights() * self.g_max

    def quantize(self, w) -> np.ndarray:
        """Nearest level for normalized weight(s); ties round up."""
        w = np.clip(np.asarray(w, dtype=float), self.w_min, 1.0)
        f = (w - self.w_min) / self.level_step
        return np.clip(np.floor(f + 0.5), 0, self.n_levels - 1).astype(np.int64)

    def quantize_stochastic(self, w, rng: np.random.Generator) -> np.ndarray:
        """Probabilistic rounding to an adjacent level (unbiased in expectation).

        Deterministic nearest-level rounding would freeze learning: the
        largest single STDP update (eta_+ * w <= 0.03) never reaches half
        a level step (0.95/30), so it would always round back.  Rounding
        up with probability equal to the fractional position preserves
        the mean update while keeping the stored state 4-bit.
        """
        w = np.clip(np.asarray(w, dtype=float), self.w_min, 1.0)
        f = (w - self.w_min) / self.level_step
        lo = np.floor(f)
        up = rng.random(f.shape) < (f - lo)
        return np.clip(lo + up, 0, self.n_levels - 1).astype(np.int64)

    @classmethod
    def random_init(cls, n_inputs: int, n_neurons: int, rng: np.random.Generator,
                    low: int = 4, high: int = 11, **kwargs) -> "SynapseMatrix":
        """Mid-range uniform initialization avoiding dead or saturated starts."""
        return cls(levels=rng.integers(low, high + 1, size=(n_inputs, n_neurons)),
                   **kwargs)


def save_checkpoint(path, synapses: SynapseMatrix, seed: int, epoch: int) -> None:
    """JSON checkpoint: header (shape, conductance bounds, seed, epoch) + levels."""
    payload = {
        "format": "mtjsnn-checkpoint-v1",
        "shape": list(synapses.levels.shape),
        "g_min_S": synapses.g_min,
        "g_max_S": synapses.g_max,
        "seed": seed,
        "epoch": epoch,
        "levels": synapses.levels.tolist(),
    }
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def load_checkpoint(path) -> tuple[SynapseMatrix, dict]:
    with open(path) as f:
        payload = json.load(f)
    if payload.get("format") != "mtjsnn-checkpoint-v1":
        raise DataFormatError(f"not a checkpoint file: {path}")
    levels = np.asarray(payload["levels"], dtype=np.int64)
    if list(levels.shape) != payload["shape"]:
        raise DataFormatError("checkpoint level matrix does not match its header shape")
    syn = SynapseMatrix(levels=levels, g_max=payload["g_max_S"])
    header = {k: payload[k] for k in ("shape", "g_min_S", "g_max_S", "seed", "epoch")}
    return syn, header


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EncoderConfig:
    """Poisson rate coding of pixel intensities."""

    p_max: float = 0.064        # spike probability per step at full intensity
    steps_per_image: int = 340  # write windows per presentation
    tau_0: int = 50             # post-synaptic voltage duration [steps]
    v_row: float = 1.0          # row voltage while active [V]

    def __post_init__(self):
        if not 0.0 < self.p_max < 1.0:
            raise ValueError("p_max must lie in (0, 1)")


@dataclass(frozen=True)
class StdpConfig:
    tau_plus: float = 4.5   # [steps]
    tau_minus: float = 5.0  # [steps]
    eta_plus: float = 0.03
    eta_minus: float = 0.01

    def __post_init__(self):
        for name in ("tau_plus", "tau_minus", "eta_plus", "eta_minus"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class NetworkConfig:
    n_inputs: int = 784
    n_neurons: int = 9
    tau_inh: int = 50            # inhibition window [steps]
    homeostasis_beta: float = 0.02
    seed: int = 7


# ---------------------------------------------------------------------------
# STDP
# ---------------------------------------------------------------------------

def stdp_potentiation(w, dt_steps, cfg: StdpConfig):
    """dw = eta_+ w exp(-dt/tau_+) for a post spike dt >= 0 after the pre."""
    return cfg.eta_plus * np.asarray(w) * np.exp(-np.asarray(dt_steps) / cfg.tau_plus)


def stdp_depression(w, dt_steps, cfg: StdpConfig):
    """dw = -eta_- w exp(dt/tau_-) for a pre spike after the post (dt < 0)."""
    return -cfg.eta_minus * np.asarray(w) * np.exp(np.asarray(dt_steps) / cfg.tau_minus)


def stdp_update(synapses: SynapseMatrix, cfg: StdpConfig, pre_traces, post_traces,
                event: tuple, rng: np.random.Generator) -> None:
    """Apply one nearest-spike pairing event in place.

    ``event`` is ("post", neuron_index, step) pairing the new output spike
    against every input's last spike, or ("pre", input_mask, step) pairing
    the new input spikes against every neuron's last output spike.
    """
    kind, target, t = event
    if kind == "post":
        has_pre = pre_traces > _NEVER
        if not has_pre.any():
            return
        w = synapses.w_min + synapses.levels[has_pre, target] * synapses.level_step
        dw = stdp_potentiation(w, t - pre_traces[has_pre], cfg)
        synapses.levels[has_pre, target] = synapses.quantize_stochastic(w + dw, rng)
    elif kind == "pre":
        has_post = post_traces > _NEVER
        if not has_post.any():
            return
        rows = np.where(target)[0]
        cols = np.where(has_post)[0]
        w = synapses.w_min + synapses.levels[np.ix_(rows, cols)] * synapses.level_step
        dw = stdp_depression(w, (post_traces[cols] - t)[None, :], cfg)
        synapses.levels[np.ix_(rows, cols)] = synapses.quantize_stochastic(w + dw, rng)
    else:
        raise ValueError(f"unknown STDP event kind {kind!r}")


# ---------------------------------------------------------------------------
# network state and step
# ---------------------------------------------------------------------------

@dataclass
class NetworkState:
    """Mutable per-presentation and per-run state of the crossbar network."""

    theta: np.ndarray                 # homeostasis divisors, >= 1
    row_active_remaining: np.ndarray  # [steps] per input
    refractory: np.ndarray            # [steps] per neuron
    pre_traces: np.ndarray            # last input spike step
    post_traces: np.ndarray           # last output spike step
    inhibition_remaining: int = 0
    last_winner: int = -1
    step_index: int = 0

    @classmethod
    def fresh(cls, net: NetworkConfig) -> "NetworkState":
        return cls(
            theta=np.ones(net.n_neurons),
            row_active_remaining=np.zeros(net.n_inputs, dtype=np.int64),
            refractory=np.zeros(net.n_neurons, dtype=np.int64),
            pre_traces=np.full(net.n_inputs, _NEVER, dtype=np.int64),
            post_traces=np.full(net.n_neurons, _NEVER, dtype=np.int64),
        )

    def clear_presentation(self) -> None:
        """Reset transient signals between images; keeps theta (learning state)."""
        self.row_active_remaining[:] = 0
        self.refractory[:] = 0
        self.pre_traces[:] = _NEVER
        self.post_traces[:] = _NEVER
        self.inhibition_remaining = 0
        self.last_winner = -1


def encode_step(image_probs: np.ndarray, state: NetworkState, encoder: EncoderConfig,
                rng: np.random.Generator) -> np.ndarray:
    """Draw this step's input spikes and start their row voltages.

    ``image_probs`` holds per-input spike probabilities p_max * pixel.
    A spike keeps the row active for tau_0 steps including this one.
    """
    spikes = rng.random(len(image_probs)) < image_probs
    state.row_active_remaining[spikes] = encoder.tau_0
    return spikes


def crossbar_current(state: NetworkState, synapses: SynapseMatrix,
                     encoder: EncoderConfig) -> np.ndarray:
    """Per-neuron synaptic current: active rows sum as V_row * G_ij.

    The heavy-metal write path is a virtual ground (R_hm << synapse
    resistance), so column currents superpose linearly.  The reduction
    runs in the same order for every column, so identical weight columns
    carry exactly identical currents and the seeded tie-break actually
    engages (a BLAS matmul would break such ties at the last ulp).
    """
    active = state.row_active_remaining > 0
    return encoder.v_row * synapses.conductances()[active].sum(axis=0)


@dataclass
class StepReport:
    spikes: np.ndarray
    winner: int
    currents: np.ndarray
    p_ungated: np.ndarray
    switched: np.ndarray


def network_step(image_probs: np.ndarray, state: NetworkState, synapses: SynapseMatrix,
                 psw, encoder: EncoderConfig, stdp: StdpConfig, net: NetworkConfig,
                 device: DeviceParams, rng: np.random.Generator,
                 ledgers: list[EnergyLedger] | None = None,
                 train: bool = True) -> StepReport:
    """Advance the network by one write/read/reset time step."""
    t = state.step_index

    in_spikes = encode_step(image_probs, state, encoder, rng)
    if train and in_spikes.any():
        stdp_update(synapses, stdp, state.pre_traces, state.post_traces,
                    ("pre", in_spikes, t), rng)
    state.pre_traces[in_spikes] = t

    i_syn = crossbar_current(state, synapses, encoder)
    i_eff = i_syn / state.theta
    p = np.asarray(psw(i_eff), dtype=float)

    # during learning the most recent winner rides through its own inhibition
    # (only its 1-step reset refractory gates it), letting it integrate the
    # pattern it is locking onto; during testing the common inhibitory signal
    # silences every neuron, giving the sparse winner-per-window regime
    allowed = state.refractory == 0
    if state.inhibition_remaining > 0:
        inhibited = np.ones(net.n_neurons, dtype=bool)
        if train and state.last_winner >= 0:
            inhibited[state.last_winner] = False
        allowed &= ~inhibited
    draws = rng.random(net.n_neurons)
    switched = allowed & (draws < p)

    winner = -1
    spikes = np.zeros(net.n_neurons, dtype=bool)
    if switched.any():
        cand = np.where(switched)[0]
        best = cand[i_eff[cand] == i_eff[cand].max()]
        winner = int(best[0] if len(best) == 1 else best[rng.integers(len(best))])
        spikes[winner] = True
        if train:
            stdp_update(synapses, stdp, state.pre_traces, state.post_traces,
                        ("post", winner, t), rng)
            state.theta[winner] += net.homeostasis_beta
        state.post_traces[winner] = t
        state.inhibition_remaining = net.tau_inh + 1
        state.last_winner = winner
        state.refractory[winner] = 2

    if ledgers is not None:
        gated = np.where(allowed, i_eff, 0.0)
        for j in range(net.n_neurons):
            ledgers[j].add_write(gated[j], device.r_hm, device.t_write)
            logical = LogicalState.AP if j == winner else LogicalState.P
            ledgers[j].add_read(read_energy(logical, device))
            if j == winner:
                ledgers[j].add_reset(device.i_reset, device.r_hm, device.t_reset)
                ledgers[j].spike_count += 1

    state.row_active_remaining = np.maximum(state.row_active_remaining - 1, 0)
    state.refractory = np.maximum(state.refractory - 1, 0)
    state.inhibition_remaining = max(state.inhibition_remaining - 1, 0)
    state.step_index += 1

    return StepReport(spikes=spikes, winner=winner, currents=i_eff,
                      p_ungated=p, switched=switched)


# ---------------------------------------------------------------------------
# training statistics
# ---------------------------------------------------------------------------

@dataclass
class TrainingStats:
    """Per-epoch learning trace (one epoch = one image presentation)."""

    epochs: list = field(default_factory=list)
    window: int = 5

    def record(self, epoch: int, label: int, max_psw_mean: float,
               spikes_per_neuron: np.ndarray, energy_fj: float) -> None:
        self.epochs.append({
            "epoch": epoch,
            "label": int(label),
            "max_psw_mean": float(max_psw_mean),
            "spikes_per_neuron": [int(v) for v in spikes_per_neuron],
            "energy_fj": float(energy_fj),
        })

    def max_psw_series(self) -> np.ndarray:
        return np.array([e["max_psw_mean"] for e in self.epochs])

    def windowed_max_psw(self) -> np.ndarray:
        """Block averages of the per-epoch metric over ``window`` epochs."""
        s = self.max_psw_series()
        n = len(s) // self.window
        return s[: n * self.window].reshape(n, self.window).mean(axis=1)

    def to_dict(self) -> dict:
        return {"window": self.window, "epochs": self.epochs,
                "windowed_max_psw": [float(v) for v in self.windowed_max_psw()]}


# ---------------------------------------------------------------------------
# engine
# ---------------------------------------------------------------------------

class SpikingNetwork:
    """Orchestrates training and testing of the crossbar network."""

    def __init__(self, psw, encoder: EncoderConfig | None = None,
                 stdp: StdpConfig | None = None, net: NetworkConfig | None = None,
                 device: DeviceParams | None = None,
                 synapses: SynapseMatrix | None = None):
        self.psw = psw
        self.encoder = encoder if encoder is not None else EncoderConfig()
        self.stdp = stdp if stdp is not None else StdpConfig()
        self.net = net if net is not None else NetworkConfig()
        self.device = device if device is not None else DeviceParams()
        self.rng = np.random.default_rng(self.net.seed)
        self.synapses = synapses if synapses is not None else SynapseMatrix.random_init(
            self.net.n_inputs, self.net.n_neurons, self.rng)
        self.state = NetworkState.fresh(self.net)
        self.ledgers = [EnergyLedger() for _ in range(self.net.n_neurons)]
        self.raster: list = []

    def total_ledger(self) -> EnergyLedger:
        total = EnergyLedger()
        for led in self.ledgers:
            total.merge(led)
        return total

    def total_energy_fj(self) -> float:
        return sum(l.write_energy + l.read_energy + l.reset_energy
                   for l in self.ledgers) * 1e15

    def present(self, image: np.ndarray, label: int, image_index: int,
                train: bool, theta_override: np.ndarray | None = None) -> dict:
        """Run one full presentation of ``steps_per_image`` time steps."""
        probs = self.encoder.p_max * np.asarray(image, dtype=float)
        state = self.state
        state.clear_presentation()
        if theta_override is not None:
            saved_theta = state.theta
            state.theta = theta_override
        spikes = np.zeros(self.net.n_neurons, dtype=np.int64)
        max_p = 0.0
        for _ in range(self.encoder.steps_per_image):
            rep = network_step(probs, state, self.synapses, self.psw, self.encoder,
                               self.stdp, self.net, self.device, self.rng,
                               ledgers=self.ledgers, train=train)
            max_p += float(rep.p_ungated.max())
            if rep.winner >= 0:
                spikes[rep.winner] += 1
                self.raster.append((state.step_index - 1, rep.winner, image_index, int(label)))
        if theta_override is not None:
            state.theta = saved_theta
        return {"spikes": spikes, "max_psw_mean": max_p / self.encoder.steps_per_image}

    def train(self, images: np.ndarray, labels: np.ndarray) -> TrainingStats:
        """One pass over the dataset with STDP and homeostasis active."""
        stats = TrainingStats()
        for e, (img, lab) in enumerate(zip(images, labels)):
            before_fj = self.total_energy_fj()
            out = self.present(img, lab, e, train=True)
            stats.record(e, lab, out["max_psw_mean"], out["spikes"],
                         self.total_energy_fj() - before_fj)
        return stats

    def test(self, images: np.ndarray, labels: np.ndarray,
             n_classes: int = 2) -> np.ndarray:
        """Spike counts per (neuron, class) with plasticity and homeostasis off.

        The homeostasis divisors are frozen at 1 and weights stay fixed;
        lateral inhibition remains active, giving sparse winner spikes.
        """
        counts = np.zeros((self.net.n_neurons, n_classes), dtype=np.int64)
        theta_one = np.ones(self.net.n_neurons)
        for idx, (img, lab) in enumerate(zip(images, labels)):
            out = self.present(img, lab, idx, train=False, theta_override=theta_one)
            counts[:, int(lab)] += out["spikes"]
        return counts

    def per_image_spikes(self, images: np.ndarray) -> np.ndarray:
        """Test-mode spike counts per (image, neuron); used for classification."""
        theta_one = np.ones(self.net.n_neurons)
        out = np.zeros((len(images), self.net.n_neurons), dtype=np.int64)
        for idx, img in enumerate(images):
            rep = self.present(img, -1, idx, train=False, theta_override=theta_one)
            out[idx] = rep["spikes"]
        return out


def assign_classes(counts: np.ndarray) -> np.ndarray:
    """Class label of each neuron: the class it spiked most for."""
    return np.argmax(counts, axis=1)


def calibrate_row_voltage(images: np.ndarray, synapses: SynapseMatrix,
                          encoder: EncoderConfig, i_target: float) -> float:
    """Row voltage placing the expected full-field current at ``i_target``.

    The expectation uses the stationary row-activation probability
    1 - (1 - p_max x)^tau_0 of each pixel, averaged over the dataset, and
    the mean initial conductance.
    """
    x = np.asarray(images, dtype=float)
    active = 1.0 - (1.0 - encoder.p_max * x) ** encoder.tau_0
    g_mean = float(synapses.conductances().mean())
    expected_rows = float(active.sum(axis=1).mean())
    expected_current_at_1v = expected_rows * g_mean
    return i_target / expected_current_at_1v

"""Scikit-learn estimator wrapping the stochastic spiking network.

``MtjSpikingClassifier`` exposes the unsupervised STDP network through
the standard fit/predict surface so it drops into pipelines, grid
searches and cross-validation.  ``fit`` trains the crossbar without
labels, then uses them once to name each neuron after the class it
learned; ``predict`` reads the class of the most active neuron.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .characterization import BehavioralModel
from .device import DeviceParams
from .snn import (EncoderConfig, NetworkConfig, SpikingNetwork, StdpConfig,
                  SynapseMatrix, assign_classes, calibrate_row_voltage)


class MtjSpikingClassifier(ClassifierMixin, BaseEstimator):
    """Unsupervised STDP digit classifier built on stochastic MTJ neurons.

    Parameters
    ----------
    behavioral_model : BehavioralModel or callable
        Maps synaptic current [A] to the per-step switching probability.
    n_neurons : int
        Excitatory neurons competing through lateral inhibition.
    steps_per_image : int
        Write windows per presentation.
    p_max : float
        Input spike probability per step at full pixel intensity.
    tau_0, tau_inh : int
        Post-synaptic voltage and inhibition durations in steps.
    tau_plus, tau_minus, eta_plus, eta_minus : float
        STDP kernel constants.
    homeostasis_beta : float
        Increment of a neuron's input divisor on each of its spikes.
    v_row : float or None
        Row voltage; None calibrates it from the training images so the
        expected full-field current sits at the P = 0.9 point.
    seed : int
        Master seed for weights, encoding and switching draws.
    """

    def __init__(self, behavioral_model=None, n_neurons=9, steps_per_image=340,
                 p_max=0.064, tau_0=50, tau_inh=50, tau_plus=4.5, tau_minus=5.0,
                 eta_plus=0.03, eta_minus=0.01, homeostasis_beta=0.02,
                 v_row=None, seed=7):
        self.behavioral_model = behavioral_model
        self.n_neurons = n_neurons
        self.steps_per_image = steps_per_image
        self.p_max = p_max
        self.tau_0 = tau_0
        self.tau_inh = tau_inh
        self.tau_plus = tau_plus
        self.tau_minus = tau_minus
        self.eta_plus = eta_plus
        self.eta_minus = eta_minus
        self.homeostasis_beta = homeostasis_beta
        self.v_row = v_row
        self.seed = seed

    def _build_network(self, X) -> SpikingNetwork:
        if self.behavioral_model is None:
            raise ValueError("behavioral_model is required (build one from a "
                             "switching-probability table)")
        net_cfg = NetworkConfig(n_inputs=X.shape[1], n_neurons=self.n_neurons,
                                tau_inh=self.tau_inh,
                                homeostasis_beta=self.homeostasis_beta,
                                seed=self.seed)
        stdp = StdpConfig(tau_plus=self.tau_plus, tau_minus=self.tau_minus,
                          eta_plus=self.eta_plus, eta_minus=self.eta_minus)
        rng = np.random.default_rng(self.seed)
        synapses = SynapseMatrix.random_init(X.shape[1], self.n_neurons, rng)
        v_row = self.v_row
        if v_row is None:
            model = self.behavioral_model
            if isinstance(model, BehavioralModel):
                i_target = model.inverse(0.9)
            else:
                raise ValueError("v_row=None requires a BehavioralModel with an "
                                 "invertible switching curve")
            encoder_probe = EncoderConfig(p_max=self.p_max,
                                          steps_per_image=self.steps_per_image,
                                          tau_0=self.tau_0)
            v_row = calibrate_row_voltage(X, synapses, encoder_probe, i_target)
        encoder = EncoderConfig(p_max=self.p_max, steps_per_image=self.steps_per_image,
                                tau_0=self.tau_0, v_row=v_row)
        network = SpikingNetwork(self.behavioral_model, encoder=encoder, stdp=stdp,
                                 net=net_cfg, device=DeviceParams(), synapses=synapses)
        # reuse the init rng so weights and dynamics share one seeded stream
        network.rng = rng
        return network

    def fit(self, X, y):
        """Train unsupervised on ``X``; use ``y`` only to name the neurons."""
        X, y = check_X_y(X, y)
        if X.min() < 0.0 or X.max() > 1.0:
            raise ValueError("pixel values must be normalized to [0, 1]")
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        network = self._build_network(X)
        self.training_stats_ = network.train(X, y_idx)
        counts = network.test(X, y_idx, n_classes=len(self.classes_))
        self.neuron_class_counts_ = counts
        self.neuron_classes_ = assign_classes(counts)
        self.network_ = network
        self.v_row_ = network.encoder.v_row
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        """Class of the most active neuron for each image."""
        check_is_fitted(self, "network_")
        X = check_array(X)
        spikes = self.network_.per_image_spikes(X)
        idx = np.argmax(spikes, axis=1)
        return self.classes_[self.neuron_classes_[idx]]

"""Shared fixtures; the heavy Monte Carlo tables are session-scoped."""

import pytest

from mtjsnn import characterization as char
from mtjsnn.device import DeviceParams

ACCEPT_SEED = 20260810
FRESH_SEED = 777


@pytest.fixture(scope="session")
def device():
    return DeviceParams()


@pytest.fixture(scope="session")
def model_20kt():
    model, _ = char.calibrated_model(20.0)
    return model


@pytest.fixture(scope="session")
def table_barriers_1ns(device):
    """2000-trial curves for E_B = 10, 20, 30 k_B T at t_PW = 1 ns."""
    spec = char.SweepSpec(barrier_targets=(10.0, 20.0, 30.0), pulse_widths=(1e-9,),
                          trials_per_point=2000, base_seed=ACCEPT_SEED)
    return char.sweep(spec, device=device)


@pytest.fixture(scope="session")
def table_widths_20kt(device):
    """2000-trial curves for t_PW = 0.2, 0.5 ns at E_B = 20 k_B T."""
    spec = char.SweepSpec(barrier_targets=(20.0,), pulse_widths=(0.2e-9, 0.5e-9),
                          trials_per_point=2000, base_seed=ACCEPT_SEED)
    return char.sweep(spec, device=device)


@pytest.fixture(scope="session")
def behavioral_20kt(table_widths_20kt):
    """Monotone behavioral model of the 20 k_B T, 0.5 ns operating curve."""
    return char.build_behavioral_model(table_widths_20kt, 20.0, 0.5e-9)

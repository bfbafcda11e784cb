"""Exception hierarchy shared across the simulator."""


class MtjSnnError(Exception):
    """Base class for all simulator errors."""


class ConfigError(MtjSnnError):
    """Invalid or unknown configuration content."""


class DataFormatError(MtjSnnError):
    """Malformed input data (IDX containers, checkpoints, tables)."""


class PhaseProtocolError(MtjSnnError):
    """Device phase called out of the write -> read -> reset order."""


class CalibrationError(MtjSnnError):
    """Barrier calibration target cannot be reached."""


class CharacterizationError(MtjSnnError):
    """Monte Carlo table unusable (non-monotone beyond noise, bad span)."""

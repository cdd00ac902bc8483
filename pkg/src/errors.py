"""
Exception hierarchy shared by every BENET layer.

Each class carries the process exit code the CLI reports for it.
"""


class BenetError(Exception):
    exit_code = 1


class ConfigError(BenetError):
    exit_code = 2


class AudioIOError(BenetError):
    exit_code = 3


class AudioFileNotFoundError(AudioIOError):
    pass


class UnsupportedAudioError(AudioIOError):
    pass


class EmptyAudioError(AudioIOError):
    pass


class UnwritablePathError(AudioIOError):
    pass


class ModelFormatError(AudioIOError):
    pass


class SignalError(BenetError, ValueError):
    """Signal content unusable for the requested operation"""


class ShapeMismatchError(BenetError, ValueError):
    pass


class GeometryError(BenetError, ValueError):
    pass


class DegenerateDatasetError(BenetError, ValueError):
    pass


class NumericalError(BenetError):
    exit_code = 4


class SingularCovarianceError(NumericalError):
    pass


class DecayRangeError(NumericalError):
    pass


class DivergenceError(NumericalError):
    pass

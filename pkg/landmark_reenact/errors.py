# -*- coding: utf-8 -*-
"""Exceptions raised by landmark_reenact.

Every exception carries the exit code the command line interface returns for it.
"""


class ReenactmentError(Exception):
    """Base class of all errors raised by this package"""

    exit_code = 1


class ConfigError(ReenactmentError, ValueError):
    """Invalid configuration, parameters or command line options"""

    exit_code = 2


class DataError(ReenactmentError):
    """Invalid or missing input data"""

    exit_code = 3


class DependencyError(ReenactmentError):
    """A stage prerequisite (checkpoint, earlier stage) is missing"""

    exit_code = 4


# Configuration errors
class ResolutionTooSmall(ConfigError):
    pass


class ParamOutOfRange(ConfigError):
    pass


class WindowTooLarge(ConfigError):
    pass


class MalformedConfig(ConfigError):
    pass


# Data errors
class ShapeMismatch(DataError, ValueError):
    pass


class DegenerateLandmarks(DataError, ValueError):
    pass


class PoseOutOfRange(DataError, ValueError):
    pass


class PairingError(DataError):
    pass


class NoPoseReference(DataError):
    pass


class FeatureError(DataError, ValueError):
    pass


class NumericalError(DataError, ArithmeticError):
    pass


class SplitError(DataError):
    pass


class IngestError(DataError):
    pass


class ParseError(DataError, ValueError):
    pass


# Dependency errors
class VersionError(DependencyError):
    pass

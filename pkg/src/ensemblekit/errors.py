"""Exception hierarchy shared by all ensemblekit modules."""


class EnsembleKitError(Exception):
    """Base class for all errors raised by this package."""


class PreconditionError(EnsembleKitError, ValueError):
    """An operation was called with arguments violating its contract."""


class NormViolation(PreconditionError):
    """A local term's operator norm exceeds 1 (beyond tolerance)."""


class LocalityViolation(PreconditionError):
    """A local term's support diameter exceeds the declared locality k."""


class EmptyWindow(EnsembleKitError):
    """No eigenvalue falls inside the requested microcanonical window."""

    def __init__(self, message, nearest_energy=None):
        super().__init__(message)
        self.nearest_energy = nearest_energy


class DegenerateSpectrum(EnsembleKitError):
    """The energy distribution has zero variance; no Gaussian comparison."""


class KappaTooLarge(EnsembleKitError):
    """The reference-swap contraction parameter kappa is >= 1."""


class SubstateConstructionFailure(EnsembleKitError):
    """No smoothing candidate satisfied both substate guarantees."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class NumericalError(EnsembleKitError):
    """A numerical routine failed to converge or verify its output."""


class ConfigError(EnsembleKitError):
    """Experiment configuration is invalid. ``field_path`` names the field."""

    def __init__(self, message, field_path=""):
        super().__init__(message)
        self.field_path = field_path

"""Exception and warning taxonomy shared by all modules."""


class SpitFilterError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(SpitFilterError, ValueError):
    """A numeric argument is outside its legal domain."""


class FitError(SpitFilterError, ValueError):
    """Sample set unusable for maximum-likelihood fitting."""


class UnsupportedModelError(SpitFilterError, TypeError):
    """Operation not defined for this likelihood model type."""


class StateError(SpitFilterError, RuntimeError):
    """A test state was updated after reaching a terminal verdict."""


class ProtocolError(SpitFilterError, RuntimeError):
    """Request/completion events arrived in an impossible order."""


class FormatError(SpitFilterError, ValueError):
    """Malformed input file: missing columns, mixed label modes, bad version."""


class SnapshotError(FormatError):
    """Engine snapshot could not be parsed or has the wrong version."""


class LabelingError(SpitFilterError, ValueError):
    """Labeling rule produced an empty class or had nothing to select from."""


class HorizonWarning(UserWarning):
    """Expected test length exceeds the call horizon N."""


class RoleInversionWarning(UserWarning):
    """Fitted rates imply the nuisance class has shorter calls than the target."""

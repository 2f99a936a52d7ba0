"""Exception hierarchy.

Every error raised for a domain reason derives from :class:`SkinRelaxError`
so the CLI can map it to exit code 1 and a machine-readable record.
"""


class SkinRelaxError(Exception):
    """Base class for domain errors."""

    def to_record(self):
        return {"error": type(self).__name__, "message": str(self)}


class SizeCapError(SkinRelaxError):
    """Dense superoperator requested above the configured size cap."""


class SpectrumError(SkinRelaxError):
    """Eigensolver failure or non-finite spectral data."""


class GapUndefinedError(SkinRelaxError):
    """No nonzero eigenvalue exists (e.g. a single site)."""


class DisconnectedChainError(SkinRelaxError):
    """The chain splits into pieces, so the steady state is not unique."""


class ConditioningError(SkinRelaxError):
    """Biorthogonal eigenmode expansion is numerically unusable."""


class StiffnessError(SkinRelaxError):
    """Adaptive integrator step size underflowed."""


class RelaxationTimeout(SkinRelaxError):
    """Relaxation threshold never reached inside the search horizon."""


class SaturationError(SkinRelaxError):
    """A diagnostic underflows double precision."""


class RegimeError(SkinRelaxError):
    """Physical parameters violate an inequality the calculation relies on."""


class TruncationLeakError(SkinRelaxError):
    """Population in the top sideband exceeded the configured limit."""

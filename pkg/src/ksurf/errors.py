"""Exception types shared by the package.

Every error carries an ``exit_code`` so the command line driver can map
failures onto its documented exit statuses without inspecting messages.
"""


class KSurfError(Exception):
    exit_code = 1
    module = "ksurf"

    @property
    def code(self) -> str:
        """Module-tagged identifier, distinct for every error class."""
        return f"{self.module}.{type(self).__name__}"


class InputError(KSurfError, ValueError):
    """Malformed or out-of-domain input."""

    exit_code = 3


class CurveSpecError(InputError):
    module = "io_cli"


class OriginCrossingError(InputError):
    module = "io_cli"


class DomainError(InputError):
    pass


class UnsupportedOrderError(InputError):
    module = "sphere_curves"


class SingularPointError(KSurfError, ValueError):
    module = "sphere_curves"
    exit_code = 3


class NonAdmissibleCuspError(KSurfError, ValueError):
    module = "sphere_curves"
    exit_code = 3

    def __init__(self, message, window_values=()):
        super().__init__(message)
        self.window_values = tuple(window_values)


class ClassificationError(KSurfError, ValueError):
    module = "sphere_curves"
    exit_code = 3


class ConsistencyError(KSurfError, RuntimeError):
    module = "sphere_curves"
    exit_code = 4


class NumericalError(KSurfError, RuntimeError):
    exit_code = 4


class ResolutionError(NumericalError):
    pass


class ExtrapolationError(NumericalError, ValueError):
    module = "harmonic_cauchy"


class IntegrabilityError(NumericalError):
    module = "surface_builder"


class DivergentIntegralError(NumericalError, ValueError):
    module = "surface_builder"


class HorizonError(NumericalError, ValueError):
    module = "surface_builder"

    def __init__(self, message, offending=()):
        super().__init__(message)
        self.offending = tuple(offending)


class ParametrizationError(KSurfError, ValueError):
    module = "diagnostics"
    exit_code = 3


class GraphExtractionError(KSurfError, ValueError):
    module = "diagnostics"
    exit_code = 4


class DegenerateMeshError(KSurfError, ValueError):
    module = "io_cli"
    exit_code = 2


class DivergenceWarning(RuntimeWarning):
    """Series layers grow so fast that the trusted strip is negligible."""


class IsolatedSingularityWarning(RuntimeWarning):
    """The scan found zeros of omega off the singular axis."""

"""Exception and warning types shared across the package."""


class BretpError(Exception):
    """Base class for all package errors.

    ``code`` is the short machine-readable name written to error JSON by the CLI.
    """

    code = "BretpError"

    def __init__(self, message="", **details):
        super().__init__(message)
        self.details = details


def _make(name, doc):
    return type(name, (BretpError,), {"code": name, "__doc__": doc})


InvalidParameters = _make("InvalidParameters", "Parameter values violate a model invariant.")
NonFiniteState = _make("NonFiniteState", "The flow left the admissible region or became non-finite.")
EventToleranceNotMet = _make("EventToleranceNotMet", "A crossing time could not be bracketed to tolerance.")
AllStatesZero = _make("AllStatesZero", "Every input state has zero intensity.")
Nonstationary = _make("Nonstationary", "Parameters do not admit a stationary regime.")
SupportNotCovered = _make("SupportNotCovered", "The partition does not cover the model support.")
NotConverged = _make("NotConverged", "Fixed-point iteration did not reach the residual tolerance.")
SingularKernel = _make("SingularKernel", "The direct-method mesh contains the flow equilibrium.")
LostNullcline = _make("LostNullcline", "Continuation lost the nullcline.")
FilterBlowup = _make("FilterBlowup", "Filter intensity vanished at an event time.")
SojournNotFound = _make("SojournNotFound", "Inverse-transform sampling could not locate a sojourn.")
UnsupportedModel = _make("UnsupportedModel", "The operation is not available for this model.")


class BretpWarning(UserWarning):
    pass


class MassLeak(BretpWarning):
    """Boundary matrix columns lost mass after tail truncation."""


class MeshTooCoarse(BretpWarning):
    """A single ACID bin holds most of the probability mass."""


class NoLowerBound(BretpWarning):
    """No positive lower bound on the intensity is declared."""


class QuasiPositivityUnverified(BretpWarning):
    """No strictly positive column was found within the squarings."""

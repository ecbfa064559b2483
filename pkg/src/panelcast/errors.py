"""Exception hierarchy shared across the suite.

Every failure mode named in a module contract maps to one class here so
callers can catch by category; messages carry the offending identifiers.
"""


class PanelcastError(Exception):
    """Base class for all suite-specific failures."""


# --- panel ingestion / scaling ---------------------------------------------

class SchemaError(PanelcastError):
    """CSV header does not contain the configured columns."""


class MissingCellError(PanelcastError):
    """A (unit, year) observation is absent from an otherwise rectangular panel."""


class DuplicateCellError(PanelcastError):
    """The same (unit, year) pair appears more than once."""


class NonFiniteValueError(PanelcastError):
    """A value failed to parse to a finite float."""


class RaggedYearsError(PanelcastError):
    """Units are observed over systematically different year ranges."""


class DegenerateUnitError(PanelcastError):
    """One or more units have zero variance where a scale is required."""

    def __init__(self, unit_ids, context=""):
        self.unit_ids = list(unit_ids)
        suffix = f" ({context})" if context else ""
        super().__init__(
            f"{len(self.unit_ids)} degenerate unit(s){suffix}: "
            + ", ".join(self.unit_ids[:10])
            + ("..." if len(self.unit_ids) > 10 else "")
        )


# --- spatial graph ----------------------------------------------------------

class UnknownUnitError(PanelcastError):
    """An edge references a unit id that is not in the panel."""


class SelfLoopError(PanelcastError):
    """An edge connects a unit to itself."""


class EmptyGraphError(PanelcastError):
    """Island removal deleted every unit."""


class ConvergenceFailureError(PanelcastError):
    """Eigensolve residuals exceed tolerance."""


# --- spatial estimation -----------------------------------------------------

class RhoOutOfBoundsError(PanelcastError):
    """Spatial coefficient outside the open admissible interval."""


class SingularRegressorError(PanelcastError):
    """Rank-deficient regressor block in a pooled regression."""


class SolveFailureError(PanelcastError):
    """Sparse linear solve did not reach the required residual."""


# --- neural -----------------------------------------------------------------

class NonFiniteActivationError(PanelcastError):
    """Forward pass produced a non-finite activation."""

    def __init__(self, step, message=""):
        self.step = step
        super().__init__(message or f"non-finite activation at sequence step {step}")


class NonFiniteGradientError(PanelcastError):
    """Backward pass produced a non-finite gradient; last good state attached."""

    def __init__(self, epoch, model=None, report=None):
        self.epoch = epoch
        self.model = model
        self.report = report
        super().__init__(f"non-finite gradient during epoch {epoch}")


# --- evaluation / disaggregation ---------------------------------------------

class UnitMismatchError(PanelcastError):
    """Operands do not share the required unit (or year) alignment."""


class ZeroVarianceError(PanelcastError):
    """All loss differentials identical; DM variance is zero."""


class NumericalFailureError(PanelcastError):
    """Ill-conditioned linear algebra in the disaggregation step."""


# --- orchestration ----------------------------------------------------------

class ConfigError(PanelcastError):
    """Experiment configuration failed validation."""


class StageError(PanelcastError):
    """A pipeline stage failed; carries the stage tag for exit codes."""

    def __init__(self, stage, message):
        self.stage = stage
        super().__init__(f"[{stage}] {message}")

"""Exception hierarchy shared across the engine."""


class GridBlockError(Exception):
    """Base class for every error raised by this package."""


# --- program parsing ---------------------------------------------------


class ProgramError(GridBlockError):
    """Base class for errors while reading or resolving a block program."""


class XmlMalformed(ProgramError):
    """Input is not well-formed XML, or uses elements outside the subset."""


class UnknownBlockType(ProgramError):
    """A block's type attribute names no block the engine knows."""


class MissingField(ProgramError):
    """A required field is absent or its value cannot be interpreted."""


class DanglingCall(ProgramError):
    """A call block names a procedure that is never defined."""


class RecursiveProcedure(ProgramError):
    """The procedure call graph contains a cycle."""


# --- kinematics --------------------------------------------------------


class NonPositiveInput(GridBlockError):
    """Speed or duration was zero or negative."""


class UnsupportedAngle(GridBlockError):
    """Turn angle other than 90 or 180 degrees."""


class OutOfBounds(GridBlockError):
    """A translation would leave the grid.

    Carries the first offending cell in ``cell``.
    """

    def __init__(self, cell, message=None):
        super().__init__(message or f"out of bounds at {cell}")
        self.cell = cell


# --- lowering ----------------------------------------------------------


class UnrollBudgetExceeded(GridBlockError):
    """Loop/procedure expansion grew past the primitive budget."""


# --- task files --------------------------------------------------------


class SchemaViolation(GridBlockError):
    """Task document does not match the task-file schema."""


class GeometryInvalid(GridBlockError):
    """Task document is well-shaped but references impossible geometry."""


class UnknownTask(GridBlockError):
    """No task registered under the requested id."""


# --- oracles -----------------------------------------------------------


class Unreachable(GridBlockError):
    """Breadth-first search found no path between the given cells."""


class Unsolvable(GridBlockError):
    """No crossing plan exists for the river task under its constraints."""

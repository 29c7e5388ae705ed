"""Custom exceptions for the toolkit."""


class LowDegreeError(Exception):
    """Base class for every error raised by the toolkit."""


class FieldMismatchError(LowDegreeError):
    """Exception raised when operands come from different finite fields."""

    def __init__(self, left: object, right: object) -> None:
        """Initialize the exception.

        Args:
            left: Field spec of the left operand
            right: Field spec of the right operand

        """
        self.left = left
        self.right = right
        super().__init__(f"Operands belong to different fields: {left} and {right}")


class UnsupportedFieldError(LowDegreeError):
    """Exception raised when a field cannot be constructed."""


class DivisionByZeroError(LowDegreeError, ZeroDivisionError):
    """Exception raised when inverting the zero element."""


class PreconditionError(LowDegreeError, ValueError):
    """Exception raised when an operation is called outside its domain."""


class ArityMismatchError(PreconditionError):
    """Exception raised when a point, line or table has the wrong number of variables."""

    def __init__(self, expected: int, actual: int) -> None:
        """Initialize the exception.

        Args:
            expected: Number of variables the callee works with
            actual: Number of variables that was supplied

        """
        self.expected = expected
        self.actual = actual
        super().__init__(f"Expected arity {expected}, got {actual}")


class DuplicatePointsError(PreconditionError):
    """Exception raised when interpolation points are not pairwise distinct."""


class InvalidDegreeError(PreconditionError):
    """Exception raised when a degree bound is outside [0, q - 1]."""

    def __init__(self, d: int, q: int) -> None:
        """Initialize the exception.

        Args:
            d: The rejected degree bound
            q: Order of the field

        """
        self.d = d
        self.q = q
        super().__init__(f"Degree bound d={d} must satisfy 0 <= d <= q - 1 = {q - 1}")


class NoUniqueFitError(LowDegreeError):
    """Exception raised when no polynomial exceeds the unique-decoding threshold."""


class NoCandidateError(LowDegreeError):
    """Exception raised when no bivariate candidate has both bad fractions <= 1/2."""


class DecodeFailureError(LowDegreeError):
    """Exception raised when a polynomial-line word cannot be decoded."""


class BudgetExceededError(LowDegreeError):
    """Exception raised when an exhaustive computation is larger than its budget."""

    def __init__(self, what: str, requested: int, budget: int) -> None:
        """Initialize the exception.

        Args:
            what: Name of the enumerated space (lines, functions, ...)
            requested: Size of the space that would be enumerated
            budget: Configured cap

        """
        self.what = what
        self.requested = requested
        self.budget = budget
        super().__init__(
            f"Enumerating {requested} {what} exceeds the budget of {budget}. "
            "Raise the budget (LOWDEG_BUDGET) or use a Monte-Carlo command."
        )


class InvariantViolationError(LowDegreeError):
    """Exception raised when a guaranteed inequality fails where its hypothesis holds."""

    def __init__(self, name: str, detail: str) -> None:
        """Initialize the exception.

        Args:
            name: Short name of the violated property
            detail: Values that witnessed the violation

        """
        self.name = name
        self.detail = detail
        super().__init__(f"Invariant '{name}' violated: {detail}")

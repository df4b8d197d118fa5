"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Input values violate a documented precondition."""


class ShapeError(ValueError):
    """Operand dimensions are incompatible."""


class BoundaryDraw(ValueError):
    """A uniform draw landed on the closed boundary {0, 1}; draw again."""

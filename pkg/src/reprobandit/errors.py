"""Exception types raised across the package."""


class ReproBanditError(Exception):
    """Base class for all package errors."""


class InvalidArm(ReproBanditError, IndexError):
    pass


class InvalidAction(ReproBanditError, ValueError):
    pass


class InvalidRegime(ReproBanditError, ValueError):
    """Failure probability is not strictly below the reproducibility budget."""


class InsufficientSamples(ReproBanditError, ValueError):
    pass


class OutOfRange(ReproBanditError, ValueError):
    pass


class HorizonTooSmall(ReproBanditError, ValueError):
    pass


class DegenerateArmSet(ReproBanditError, ValueError):
    """Arms do not span the ambient space."""


class SingularDesign(ReproBanditError, ArithmeticError):
    def __init__(self, message: str, iterate=None):
        super().__init__(message)
        self.iterate = iterate


class NetTooLarge(ReproBanditError, ValueError):
    pass

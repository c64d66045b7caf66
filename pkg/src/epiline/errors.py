"""Exception hierarchy shared by all modules."""


class EpilineError(Exception):
    """Base class for every error raised by this package."""


class DegenerateInput(EpilineError, ValueError):
    pass


class PencilViolation(EpilineError):
    """A line homography does not map the source pencil onto the target pencil."""


class OutOfBounds(EpilineError, ValueError):
    pass


class LengthMismatch(EpilineError, ValueError):
    pass


class EmptyPencil(EpilineError):
    """Every line of a pencil was filtered out (too short or too flat)."""


class NoCandidates(EpilineError):
    pass


class NoValidHypothesis(EpilineError):
    pass


class DomainError(EpilineError, ValueError):
    pass


class DegenerateConfiguration(EpilineError):
    pass


class InsufficientPoints(EpilineError):
    pass


class MissingFile(EpilineError, FileNotFoundError):
    pass


class ParseError(EpilineError, ValueError):
    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {message}")

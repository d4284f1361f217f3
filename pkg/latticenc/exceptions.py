"""
Custom exceptions for latticenc.
"""


class LatticeError(Exception):
    """Base exception for all latticenc errors."""



class EisensteinOverflowError(LatticeError, OverflowError):
    """Raised when an Eisenstein coefficient leaves the declared bit-width."""



class InvalidModulusError(LatticeError, ValueError):
    """Raised when a modulus, layer set or CRT system is malformed."""



class EnumerationBoundError(LatticeError):
    """Raised when an exhaustive enumeration would exceed its configured bound."""

    def __init__(self, message: str, size: int | None = None, bound: int | None = None):
        super().__init__(message)
        self.size = size
        self.bound = bound


class NotACodewordError(LatticeError, ValueError):
    """Raised when a word is not a codeword of the code it is unencoded with."""



class NotInLatticeError(LatticeError, ValueError):
    """Raised when a vector fails the lattice membership criterion."""



class DecoderError(LatticeError):
    """Raised when a decoder receives non-finite metrics or degenerate priors."""



class LatticeConfigError(LatticeError):
    """Raised when an experiment or lattice configuration cannot be parsed."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        super().__init__(message)
        self.field = field
        self.line = line

    def __str__(self) -> str:
        base = super().__str__()
        where = []
        if self.line is not None:
            where.append(f"line {self.line}")
        if self.field:
            where.append(f"field '{self.field}'")
        return f"{base} ({', '.join(where)})" if where else base

"""Exception hierarchy for the potacc library."""


class PotaccError(Exception):
    """Base class for all potacc errors."""


class InvalidInput(PotaccError):
    """Input value outside the operation's domain (NaN, inf, bad enum...)."""


class ZeroNotRepresentable(PotaccError):
    """A pure power-of-two quantizer has no level for zero."""


class ZeroWeightNotRepresentable(PotaccError):
    """A zero weight cannot be expressed in single-shift-term form."""


class NotPoTWeight(PotaccError):
    """An integer weight whose magnitude is not a power of two in 1..128."""

    def __init__(self, index, value):
        self.index = index
        self.value = value
        super().__init__(f"weight {value} at flat index {index} is not a signed power of two in 1..128")


class ShapeMismatch(PotaccError):
    """Operand shapes do not conform."""


class MethodMismatch(PotaccError):
    """Weight encoding method does not pair with the processing-element kind."""


class LengthMismatch(PotaccError):
    """Paired sequences have different lengths."""


class AccumulatorOverflow(PotaccError):
    """A MAC result left the signed 32-bit accumulator range."""


class UnsupportedLayer(PotaccError):
    """Layer kind has no lowering onto the accelerator."""


class MalformedModel(PotaccError):
    """Model description fails structural validation."""

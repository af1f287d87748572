"""Exception types raised by the guards and contract checks."""


class GuardError(RuntimeError):
    """A numerical guard tripped; the run is not trustworthy."""


class UnderResolvedError(GuardError):
    """Spectral mass leaked into the top octave of the grid."""


class BoundaryMassError(GuardError):
    """A box-geometry state carries too much mass near the periodic wrap."""


class ContractionError(ValueError):
    """The characteristic map is outside its contraction window."""


class SynthesisError(ValueError):
    """An imprint cannot be realized with the available controls."""

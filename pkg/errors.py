"""Error types raised across the harness.

Every failure the CLI can report is a ``FreqXError``; the CLI turns it into a
single JSON line on stderr and a nonzero exit code.
"""


class FreqXError(Exception):
    """Base class for all harness errors."""


class RejectedInputError(FreqXError, ValueError):
    """An argument violates an operation's precondition."""


class ConfigError(FreqXError):
    """A run configuration is malformed or inconsistent."""


class DivergenceError(FreqXError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch, loss=float("nan")):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"training diverged at epoch {epoch} (loss={loss})")


class CheckpointParseError(FreqXError):
    """A checkpoint file could not be parsed."""


class CheckpointShapeError(FreqXError):
    """A checkpoint declares a shape that its data does not have."""


class DegenerateDecompositionError(FreqXError):
    """An SNR denominator is zero (no noise frequencies)."""


class DegenerateNeuronError(FreqXError):
    """A neuron's bias-augmented weight vector has zero norm."""


class EmptyLayerError(FreqXError):
    """Every neuron in a layer is degenerate."""


class DatasetParseError(FreqXError):
    """A dataset CSV is malformed."""


class DatasetMissingError(FreqXError):
    """A dataset file is absent; the message says how to fetch it."""

"""Exception types shared across the toolkit."""


class KgeError(Exception):
    """Base class for toolkit errors."""


class TripleParseError(KgeError):
    """A triple file line does not have exactly three tab-separated fields."""

    def __init__(self, path, line_no, line):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: expected 3 tab-separated fields, got {line!r}")


class EmptySplitError(KgeError):
    """The training split contains no triples."""


class BoundsError(KgeError, IndexError):
    """An entity or relation id is outside the vocabulary range."""


class ParameterError(KgeError, ValueError):
    """An operator or loss parameter violates its contract."""


class SingularOperatorError(KgeError):
    """A compound operator cannot be inverted (near-zero scale)."""


class SamplingError(KgeError):
    """Negative sampling is impossible (e.g. single-entity vocabulary)."""


class CorruptTableError(KgeError):
    """An embedding table contains NaN or Inf."""


class DivergenceError(KgeError):
    """Training loss became NaN."""

    def __init__(self, epoch, batch):
        self.epoch = epoch
        self.batch = batch
        super().__init__(f"loss diverged to NaN at epoch {epoch}, batch {batch}")


class SchemaError(KgeError, ValueError):
    """A config object violates the TrainConfig schema."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid config: " + "; ".join(self.problems))


class CheckpointError(KgeError):
    """Base class for checkpoint I/O failures."""


class CheckpointCorruptError(CheckpointError):
    """Bad magic, truncation, or CRC mismatch."""


class CheckpointVersionError(CheckpointError):
    """Unsupported checkpoint format version."""


class VocabDigestError(CheckpointError):
    """Checkpoint was produced against a different vocabulary."""


class UnknownNameError(KgeError, KeyError):
    """An entity or relation name is not in the vocabulary."""

    def __init__(self, name, suggestions=()):
        self.name = name
        self.suggestions = list(suggestions)
        hint = f" (close matches: {', '.join(self.suggestions)})" if self.suggestions else ""
        super().__init__(f"unknown name {name!r}{hint}")

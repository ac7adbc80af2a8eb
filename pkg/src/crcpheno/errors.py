class CrcPhenoError(Exception):
    """Base class for all pipeline errors."""


class SchemaError(CrcPhenoError, ValueError):
    pass


class InvalidConfig(CrcPhenoError, ValueError):
    pass


class EmptyVocabulary(CrcPhenoError, ValueError):
    pass


class DegenerateLabels(CrcPhenoError, ValueError):
    """Training data covers fewer than two classes."""


class EmptyBag(CrcPhenoError, ValueError):
    pass


class EmptyGrid(CrcPhenoError, ValueError):
    pass


class NoPositiveExamples(CrcPhenoError, ValueError):
    pass


class LengthMismatch(CrcPhenoError, ValueError):
    pass


class TooFewSites(CrcPhenoError, ValueError):
    pass


class InvalidSpec(CrcPhenoError, ValueError):
    pass

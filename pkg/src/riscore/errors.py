"""Exception hierarchy shared by all riscore modules."""


class RiscoreError(Exception):
    """Base class for data and contract errors raised by riscore."""


# --- embedding files ---------------------------------------------------------

class ZeroNormRow(RiscoreError):
    def __init__(self, row_index: int):
        self.row_index = row_index
        super().__init__(f"row {row_index} has (near-)zero L2 norm")


class BadMagic(RiscoreError):
    """File does not start with a valid REMB header."""


class DimMismatch(RiscoreError):
    """Embedding dimensionalities are inconsistent."""


class IndexLengthMismatch(RiscoreError):
    """Sidecar index line count disagrees with the declared row count."""


class TruncatedPayload(RiscoreError):
    """Payload size disagrees with the declared rows x dim."""


class IoFailure(RiscoreError):
    """Underlying file write failed."""


class NonNormalizedInput(RiscoreError):
    """Row norms deviate from 1 beyond tolerance."""


# --- score fusion / re-scoring -----------------------------------------------

class ShapeMismatch(RiscoreError):
    pass


class UnknownClassKey(RiscoreError):
    pass


class EmbeddingDimMismatch(RiscoreError):
    pass


# --- loss / noise model --------------------------------------------------------

class OutOfRange(RiscoreError):
    """A probability component left the open interval (0, 1)."""


# --- COCO annotation handling --------------------------------------------------

class ParseError(RiscoreError):
    pass


class DanglingReference(RiscoreError):
    def __init__(self, ann_id, detail: str = ""):
        self.ann_id = ann_id
        super().__init__(f"annotation {ann_id} references a missing entry {detail}".rstrip())


class InsufficientInstances(RiscoreError):
    def __init__(self, class_id, available: int, requested: int):
        self.class_id = class_id
        super().__init__(
            f"class {class_id} has {available} instances, {requested} requested"
        )


class SubsetNotContained(RiscoreError):
    pass


class TooFewSamples(RiscoreError):
    pass


# --- evaluation ----------------------------------------------------------------

class NoGroundTruth(RiscoreError):
    """Every class in the ground-truth set is empty."""

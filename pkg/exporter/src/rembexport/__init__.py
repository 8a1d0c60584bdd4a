"""Export RISF-EMB embedding files from detection crops and class names."""
from .encoders import ClipEncoder, HashGridEncoder, get_encoder
from .errors import (
    BadTemplate,
    DuplicateKey,
    EncoderLoadFailure,
    ExportError,
    MissingImage,
)
from .export import (
    ExportStats,
    PromptTemplate,
    export_detection_embeddings,
    export_text_embeddings,
)
from .remb import write_remb

__version__ = "0.1.0"

__all__ = [
    "BadTemplate",
    "ClipEncoder",
    "DuplicateKey",
    "EncoderLoadFailure",
    "ExportError",
    "ExportStats",
    "HashGridEncoder",
    "MissingImage",
    "PromptTemplate",
    "export_detection_embeddings",
    "export_text_embeddings",
    "get_encoder",
    "write_remb",
]

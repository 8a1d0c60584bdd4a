"""Exceptions raised by the embedding exporter."""


class ExportError(Exception):
    """Base class for exporter failures."""


class EncoderLoadFailure(ExportError):
    """The requested encoder could not be constructed or loaded."""


class MissingImage(ExportError):
    """No image file exists for a referenced image id."""


class DuplicateKey(ExportError):
    """Two rows would share the same sidecar index key."""


class BadTemplate(ExportError):
    """A prompt template violates the single-slot contract."""

"""Exception types shared across the package."""


class TieredAnnError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatchError(TieredAnnError):
    """A vector's length does not match the index dimension."""


class InvalidVectorError(TieredAnnError):
    """A vector contains NaN/Inf, or is zero-norm under the cosine metric."""


class DuplicateIdError(TieredAnnError):
    """An id was inserted twice into the same index."""


class UnknownIdError(TieredAnnError):
    """An id was referenced that does not exist in the index topology."""


class MissingPayloadError(TieredAnnError):
    """A payload was requested for an id the external store does not hold."""

    def __init__(self, vector_id: int):
        super().__init__(f"no payload stored for id {vector_id}")
        self.vector_id = vector_id


class MissingTextError(TieredAnnError):
    """A text was requested for an id that was never ingested with one."""

    def __init__(self, vector_id: int):
        super().__init__(f"no text stored for id {vector_id}")
        self.vector_id = vector_id


class StorageError(TieredAnnError):
    """The external storage backend reported a failure."""


class ResidencyContractError(TieredAnnError):
    """An entry point handed to the lazy layer search was not resident."""


class UndefinedRateError(TieredAnnError):
    """Redundancy rate requested before any external transaction occurred."""


class IngestError(TieredAnnError):
    """A malformed or mismatched record was encountered during ingest."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class SnapshotFormatError(TieredAnnError):
    """Snapshot file has a bad magic value or unsupported version."""


class SnapshotIntegrityError(TieredAnnError):
    """Snapshot file is truncated or fails a block checksum."""

"""Exception types shared across the package."""


class AmrStoreError(Exception):
    """Base class for every error raised by this package."""


class MalformedTree(AmrStoreError):
    """A refinement sequence does not describe a complete tree."""


class MalformedEncoding(AmrStoreError):
    """A run-length text is not a valid encoding."""


class LengthMismatch(AmrStoreError):
    """A value sequence does not line up with its tree."""


class InvalidHeaderWidth(AmrStoreError):
    """Group header width outside the supported 1..6 bit range."""


class StreamTruncated(AmrStoreError):
    """A compressed stream ends before the tree is fully decoded."""


class ContextMismatch(AmrStoreError):
    """A compressed field does not belong to the tree it is decoded against."""


class InvalidGenSpec(AmrStoreError):
    """A synthetic-mesh generation request violates its own constraints."""


class TooManyDomains(AmrStoreError):
    """More domains requested than there are leaves to distribute."""


class OwnershipConflict(AmrStoreError):
    """Two domains claim the same leaf."""


class InconsistentDomains(AmrStoreError):
    """Domain trees contradict each other and cannot be assembled."""


class ConfigInvalid(AmrStoreError):
    """A benchmark configuration violates its constraints."""


class DatabaseError(AmrStoreError):
    """Base class for container database failures."""


class AlreadyExists(DatabaseError):
    """Database creation refused: the path already holds one."""


class NotADatabase(DatabaseError):
    """The path does not contain a database index."""


class DuplicateEntry(DatabaseError):
    """A (context, domain) pair was written twice."""


class KindMismatch(DatabaseError):
    """Payload type does not match the database kind."""


class NotFound(DatabaseError):
    """No record for the requested (context, domain) pair."""


class CorruptRecord(DatabaseError):
    """Record framing failed validation on read."""

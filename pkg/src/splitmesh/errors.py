"""Exception hierarchy shared across splitmesh.

Every failure the library can raise on bad input is a subclass of
:class:`SplitMeshError`, so callers (the CLI in particular) can map them to
exit codes without catching bare ``Exception``.
"""


class SplitMeshError(Exception):
    """Base class for all library errors."""


# nn-core / model
class ShapeMismatch(SplitMeshError, ValueError):
    pass


class InvalidTarget(SplitMeshError, ValueError):
    pass


class DomainError(SplitMeshError, ValueError):
    pass


class EmptyModel(SplitMeshError, ValueError):
    pass


class TooShallow(SplitMeshError, ValueError):
    pass


class UnknownPreset(SplitMeshError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown preset"


# protocol
class DecodeError(SplitMeshError, ValueError):
    """Base for every wire decoding failure."""


class BadMagic(DecodeError):
    pass


class UnsupportedVersion(DecodeError):
    pass


class TruncatedFrame(DecodeError):
    pass


class UnknownType(DecodeError):
    pass


class PayloadOverflow(DecodeError):
    pass


class MalformedPayload(DecodeError):
    """Frame header was fine but the payload body is inconsistent."""


class Timeout(SplitMeshError, TimeoutError):
    pass


class ConnectionClosed(SplitMeshError, ConnectionError):
    pass


class ProtocolViolation(SplitMeshError):
    """Peer sent a well-formed message that is not valid in the current state."""


# nodes
class NotConfigured(SplitMeshError):
    pass


class MissingClient(SplitMeshError):
    pass


class RoundMismatch(SplitMeshError):
    pass


class StaleRound(SplitMeshError):
    pass


# data
class ParseError(SplitMeshError, ValueError):
    pass


class TooFewSamples(SplitMeshError, ValueError):
    pass


class BatchTooSmall(SplitMeshError, ValueError):
    pass


class IoError(SplitMeshError, OSError):
    pass


class NoUsableRows(SplitMeshError, ValueError):
    pass


class UnknownColumn(SplitMeshError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown column"


# harness
class ConfigError(SplitMeshError, ValueError):
    pass


class Unsupported(SplitMeshError):
    pass


class OutOfShard(SplitMeshError, IndexError):
    pass

"""Exception hierarchy shared by every layer of the daemon.

Codec functions raise; the engine and the analyzer catch ``CodecError``
and turn it into counted records so that a bad frame never stops a node.
"""

from typing import Optional


class AwdlError(Exception):
    """Base class for all errors raised by this package."""


# Wire codec

class CodecError(AwdlError):
    """A byte sequence could not be parsed or a value could not be encoded."""


class TruncatedFrame(CodecError):
    pass


class TruncatedTlv(CodecError):
    pass


class TruncatedValue(CodecError):
    pass


class OversizeFrame(CodecError):
    pass


class WrongTlvType(CodecError):
    pass


class BadEncodingId(CodecError):
    pass


class BadMagic(CodecError):
    pass


class InvariantViolation(CodecError):
    pass


# Link layer

class LinkError(AwdlError):
    pass


class UnknownNode(LinkError):
    pass


class PortClosed(LinkError):
    pass


class PcapError(LinkError):
    pass


class BadPcapMagic(PcapError):
    pass


class UnsupportedLinktype(PcapError):
    pass


class TruncatedRecord(PcapError):
    pass


class BadRecord(PcapError):
    """A record is unusable (bad radiotap header, empty frame). The record itself was consumed."""

    def __init__(self, message: str, timestamp: Optional[int] = None, length: int = 0) -> None:
        self.timestamp = timestamp
        self.length = length
        super().__init__(message)


# Analysis and scenarios

class InsufficientData(AwdlError):
    pass


class InvalidScenario(AwdlError):
    """Scenario file failed validation.

    Args:
        message: Human-readable reason.
        location: Dotted path to the offending field (``nodes.1.mac``) or a
            ``line N`` marker for syntax errors.
    """

    def __init__(self, message: str, location: Optional[str] = None) -> None:
        self.message = message
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)

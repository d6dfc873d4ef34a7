"""pcap capture files (microsecond resolution) with radiotap handling.

Files are written little-endian with linktype 127 and a minimal 8-byte
radiotap header in front of every frame; readers accept linktype 127 and
bare 802.11 (105) in either byte order.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import BinaryIO, Iterator, Optional

from dpkt.pcap import (
    DLT_IEEE802_11,
    DLT_IEEE802_11_RADIO,
    FileHdr,
    LEFileHdr,
    LEPktHdr,
    PktHdr,
    TCPDUMP_MAGIC,
)

from app.core.errors import BadPcapMagic, BadRecord, TruncatedRecord, UnsupportedLinktype
from app.linklayer.frame import LinkFrame

PCAP_VERSION = (2, 4)
DEFAULT_SNAPLEN = 65535
SUPPORTED_LINKTYPES = (DLT_IEEE802_11, DLT_IEEE802_11_RADIO)

_RADIOTAP_PREAMBLE = struct.Struct("<BBH")
MINIMAL_RADIOTAP = struct.pack("<BBHI", 0, 0, 8, 0)

_MAGIC_LE = struct.pack("<I", TCPDUMP_MAGIC)
_MAGIC_BE = struct.pack(">I", TCPDUMP_MAGIC)


def strip_radiotap(data: bytes) -> bytes:
    """Drop the radiotap header, trusting only its length field (bytes 2-3, LE).

    Raises:
        BadRecord: the header is short or claims more bytes than the record has.
    """
    if len(data) < _RADIOTAP_PREAMBLE.size:
        raise BadRecord(f"record of {len(data)} bytes cannot hold a radiotap header")
    _version, _pad, length = _RADIOTAP_PREAMBLE.unpack_from(data)
    if length < _RADIOTAP_PREAMBLE.size or length > len(data):
        raise BadRecord(f"radiotap length {length} outside record of {len(data)} bytes")
    return data[length:]


class PcapReader:
    """Sequential reader over a pcap stream.

    Args:
        stream: Binary stream positioned at the file header.

    Raises:
        BadPcapMagic: not a microsecond pcap file.
        TruncatedRecord: file header is incomplete.
        UnsupportedLinktype: linktype is neither 105 nor 127.
    """

    def __init__(self, stream: BinaryIO) -> None:
        self.stream = stream
        head = stream.read(FileHdr.__hdr_len__)
        magic = head[:4]
        if magic == _MAGIC_LE:
            file_hdr, self._pkt_hdr = LEFileHdr, LEPktHdr
        elif magic == _MAGIC_BE:
            file_hdr, self._pkt_hdr = FileHdr, PktHdr
        else:
            raise BadPcapMagic(f"unsupported pcap magic {magic.hex() or '<empty>'}")
        if len(head) < FileHdr.__hdr_len__:
            raise TruncatedRecord("pcap file header is truncated")
        self.header = file_hdr(head)
        self.linktype = self.header.linktype & 0x0FFFFFFF
        if self.linktype not in SUPPORTED_LINKTYPES:
            raise UnsupportedLinktype(f"linktype {self.linktype} is not 802.11 (105) or radiotap (127)")
        self.records = 0

    def next(self) -> Optional[LinkFrame]:
        """Return the next frame, or None at a clean end of file.

        Raises:
            TruncatedRecord: the file ends inside a record.
            BadRecord: this record is unusable; the next call continues after it.
        """
        hdr_len = self._pkt_hdr.__hdr_len__
        head = self.stream.read(hdr_len)
        if not head:
            return None
        if len(head) < hdr_len:
            raise TruncatedRecord(f"record header {self.records} is truncated")
        hdr = self._pkt_hdr(head)
        data = self.stream.read(hdr.caplen)
        if len(data) < hdr.caplen:
            raise TruncatedRecord(f"record {self.records} needs {hdr.caplen} bytes, got {len(data)}")
        self.records += 1
        timestamp = hdr.tv_sec * 1_000_000 + hdr.tv_usec
        if self.linktype == DLT_IEEE802_11_RADIO:
            try:
                data = strip_radiotap(data)
            except BadRecord as exc:
                raise BadRecord(str(exc), timestamp, hdr.caplen) from None
        if not data:
            raise BadRecord(f"record {self.records - 1} carries no 802.11 frame", timestamp, hdr.caplen)
        return LinkFrame(timestamp, data)

    def __iter__(self) -> Iterator[LinkFrame]:
        """Yield frames, stopping at end of file; record errors propagate."""
        while True:
            frame = self.next()
            if frame is None:
                return
            yield frame

    def close(self) -> None:
        self.stream.close()

    def __enter__(self) -> "PcapReader":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class PcapWriter:
    """Write frames as linktype 127 records with a minimal radiotap header."""

    def __init__(self, stream: BinaryIO, snaplen: int = DEFAULT_SNAPLEN) -> None:
        self.stream = stream
        header = LEFileHdr(
            magic=TCPDUMP_MAGIC,
            v_major=PCAP_VERSION[0],
            v_minor=PCAP_VERSION[1],
            thiszone=0,
            sigfigs=0,
            snaplen=snaplen,
            linktype=DLT_IEEE802_11_RADIO,
        )
        stream.write(bytes(header))
        self.records = 0

    def write(self, frame: LinkFrame) -> None:
        data = MINIMAL_RADIOTAP + frame.data
        sec, usec = divmod(frame.timestamp, 1_000_000)
        self.stream.write(bytes(LEPktHdr(tv_sec=sec, tv_usec=usec, caplen=len(data), len=len(data))))
        self.stream.write(data)
        self.records += 1

    def flush(self) -> None:
        self.stream.flush()

    def close(self) -> None:
        self.stream.close()

    def __enter__(self) -> "PcapWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def pcap_open_reader(path: str | Path) -> PcapReader:
    stream = open(path, "rb")
    try:
        return PcapReader(stream)
    except Exception:
        stream.close()
        raise


def pcap_next(reader: PcapReader) -> Optional[LinkFrame]:
    return reader.next()


def pcap_open_writer(path: str | Path) -> PcapWriter:
    return PcapWriter(open(path, "wb"))


def pcap_write(writer: PcapWriter, f: LinkFrame) -> None:
    writer.write(f)

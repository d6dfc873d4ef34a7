"""48-bit MAC addresses."""

from __future__ import annotations

from dataclasses import dataclass

import netaddr

from app.codec.constants import AWDL_BSSID_BYTES, BROADCAST_BYTES


@dataclass(frozen=True, order=True)
class MacAddress:
    """Six octets; ordering is lexicographic with octet 0 most significant."""

    octets: bytes

    def __post_init__(self) -> None:
        if not isinstance(self.octets, (bytes, bytearray)) or len(self.octets) != 6:
            raise ValueError(f"MAC address needs exactly 6 octets, got {self.octets!r}")
        if isinstance(self.octets, bytearray):
            object.__setattr__(self, "octets", bytes(self.octets))

    @classmethod
    def parse(cls, text: str) -> "MacAddress":
        """Parse any notation netaddr understands (``aa:bb:..``, ``aa-bb-..``)."""
        try:
            eui = netaddr.EUI(text)
        except (netaddr.AddrFormatError, TypeError) as exc:
            raise ValueError(f"invalid MAC address {text!r}") from exc
        if eui.version != 48:
            raise ValueError(f"{text!r} is not a MAC-48 address")
        return cls(eui.packed)

    @classmethod
    def from_int(cls, value: int) -> "MacAddress":
        return cls(value.to_bytes(6, "big"))

    def to_eui(self) -> netaddr.EUI:
        return netaddr.EUI(int.from_bytes(self.octets, "big"), version=48)

    @property
    def is_multicast(self) -> bool:
        return bool(self.octets[0] & 0x01)

    def __str__(self) -> str:
        return ":".join(f"{b:02x}" for b in self.octets)

    def __repr__(self) -> str:
        return f"MacAddress('{self}')"


AWDL_BSSID = MacAddress(AWDL_BSSID_BYTES)
BROADCAST = MacAddress(BROADCAST_BYTES)

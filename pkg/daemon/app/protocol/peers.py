"""Neighbour table fed by received action frames."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Tuple

import netaddr

from app.codec.constants import TLV_ELECTION_PARAMS, TLV_HOSTNAME, TLV_SYNC_PARAMS, TLV_VERSION
from app.codec.frames import ActionFrame
from app.codec.mac import MacAddress
from app.codec.params import (
    ElectionParams,
    SyncParams,
    decode_election_params,
    decode_hostname,
    decode_sync_params,
    decode_version,
)
from app.core.errors import CodecError

DEFAULT_PEER_TIMEOUT_US = 3_000_000


def ipv6_from_mac(m: MacAddress) -> bytes:
    """fe80::/64 link-local address with the modified EUI-64 interface id (RFC 4291)."""
    return m.to_eui().ipv6_link_local().packed


def format_ipv6(address: bytes) -> str:
    return str(netaddr.IPAddress(int.from_bytes(address, "big"), 6))


@dataclass(frozen=True)
class Peer:
    addr: MacAddress
    ipv6_ll: bytes
    last_seen: int
    election: Optional[ElectionParams] = None
    sync: Optional[SyncParams] = None
    hostname: Optional[str] = None
    version: Optional[Tuple[int, int]] = None
    last_errors: Tuple[str, ...] = ()

    @classmethod
    def new(cls, addr: MacAddress, now: int) -> "Peer":
        return cls(addr=addr, ipv6_ll=ipv6_from_mac(addr), last_seen=now)


@dataclass(frozen=True)
class PeerTable:
    """Copy-on-write map from MAC to ``Peer``."""

    peers: Mapping[MacAddress, Peer] = field(default_factory=dict)
    timeout: int = DEFAULT_PEER_TIMEOUT_US

    def __len__(self) -> int:
        return len(self.peers)

    def __contains__(self, addr: object) -> bool:
        return addr in self.peers

    def get(self, addr: MacAddress) -> Optional[Peer]:
        return self.peers.get(addr)


def _error_name(exc: CodecError) -> str:
    return f"{type(exc).__name__}: {exc}"


def upsert_peer(t: PeerTable, frame: ActionFrame, now: int) -> Tuple[PeerTable, bool]:
    """Create or refresh the entry for ``frame``'s sender.

    TLVs that fail to decode leave the previous value in place; their error
    names are kept in ``Peer.last_errors`` for the caller to count.

    Returns:
        The new table and whether the sender was unknown.
    """
    addr = frame.source
    existing = t.peers.get(addr)
    peer = existing or Peer.new(addr, now)
    errors: List[str] = []
    updates: Dict[str, object] = {"last_seen": max(peer.last_seen, now)}

    decoders = (
        (TLV_SYNC_PARAMS, "sync", decode_sync_params),
        (TLV_ELECTION_PARAMS, "election", decode_election_params),
        (TLV_HOSTNAME, "hostname", decode_hostname),
        (TLV_VERSION, "version", decode_version),
    )
    for tlv_type, attr, decode in decoders:
        tlv = frame.find(tlv_type)
        if tlv is None:
            continue
        try:
            updates[attr] = decode(tlv)
        except CodecError as exc:
            errors.append(_error_name(exc))
    updates["last_errors"] = tuple(errors)

    peers = dict(t.peers)
    peers[addr] = replace(peer, **updates)
    return replace(t, peers=peers), existing is None


def expire_peers(t: PeerTable, now: int) -> Tuple[PeerTable, List[MacAddress]]:
    """Drop every peer silent for strictly longer than the timeout."""
    removed = [addr for addr, peer in t.peers.items() if now - peer.last_seen > t.timeout]
    if not removed:
        return t, []
    peers = {addr: peer for addr, peer in t.peers.items() if addr not in removed}
    return replace(t, peers=peers), removed


def is_fresh(peer: Peer, now: int, horizon_us: int) -> bool:
    return now - peer.last_seen <= horizon_us


def peer_records(t: PeerTable, now: int) -> List[dict]:
    """Neighbour-table rows: ``{mac, ipv6, age_ms, master, distance, metric}``."""
    rows = []
    for addr in sorted(t.peers):
        peer = t.peers[addr]
        election = peer.election
        rows.append({
            "mac": str(addr),
            "ipv6": format_ipv6(peer.ipv6_ll),
            "age_ms": (now - peer.last_seen) // 1000,
            "master": str(election.master_address) if election else None,
            "distance": election.distance_to_master if election else None,
            "metric": election.self_metric if election else None,
            "hostname": peer.hostname,
        })
    return rows

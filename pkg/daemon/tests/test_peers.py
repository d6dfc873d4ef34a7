"""Neighbour table and link-local address derivation."""

import random

import pytest

from app.codec.constants import TLV_ELECTION_PARAMS, TLV_SYNC_PARAMS
from app.codec.frames import ActionFrame, Ieee80211Header
from app.codec.mac import AWDL_BSSID, MacAddress
from app.codec.params import ElectionParams, build_hostname_tlv, encode_election_params
from app.codec.tlv import Tlv
from app.protocol.peers import (
    PeerTable,
    expire_peers,
    format_ipv6,
    ipv6_from_mac,
    is_fresh,
    peer_records,
    upsert_peer,
)
from tests.conftest import mac


def _modified_eui64(octets: bytes) -> bytes:
    """Link-local address built by hand: flip the U/L bit, insert ff:fe in the middle."""
    iid = bytes([octets[0] ^ 0x02]) + octets[1:3] + b"\xff\xfe" + octets[3:6]
    return b"\xfe\x80" + bytes(6) + iid


def _election_tlv(master: MacAddress, distance: int = 0, metric: int = 100) -> Tlv:
    params = ElectionParams(master, master, 0, distance, metric, metric, 0)
    return Tlv(TLV_ELECTION_PARAMS, encode_election_params(params))


def _frame(src: MacAddress, *tlvs: Tlv) -> ActionFrame:
    return ActionFrame(Ieee80211Header.action(src), 3, 0, 0, tlvs=tlvs)


class TestIpv6FromMac:
    def test_awdl_bssid_vector(self):
        assert format_ipv6(ipv6_from_mac(AWDL_BSSID)) == "fe80::225:ff:feff:9473"

    def test_locally_administered_vector(self):
        address = ipv6_from_mac(MacAddress.parse("02:00:00:00:00:01"))
        assert address == bytes.fromhex("fe80000000000000000000fffe000001")

    @pytest.mark.parametrize("text", [
        "00:00:00:00:00:00",
        "ff:ff:ff:ff:ff:ff",
        "02:00:00:00:00:01",
        "00:1b:63:84:45:e6",
        "ac:de:48:00:11:22",
        "33:33:00:00:00:01",
        "0a:0b:0c:0d:0e:0f",
        "f2:18:98:7a:bc:01",
        "12:34:56:78:9a:bc",
    ])
    def test_matches_hand_applied_procedure(self, text):
        m = MacAddress.parse(text)
        assert ipv6_from_mac(m) == _modified_eui64(m.octets)

    def test_injective(self):
        rng = random.Random(4)
        macs = {rng.randbytes(6) for _ in range(10_000)}
        addresses = {ipv6_from_mac(MacAddress(octets)) for octets in macs}
        assert len(addresses) == len(macs)


class TestUpsertPeer:
    def test_unknown_mac_is_new(self):
        table, is_new = upsert_peer(PeerTable(), _frame(mac(2), _election_tlv(mac(2))), 1000)
        assert is_new
        assert len(table) == 1
        peer = table.get(mac(2))
        assert peer.ipv6_ll == ipv6_from_mac(mac(2))
        assert peer.election.master_address == mac(2)

    def test_known_mac_refreshes(self):
        table, _ = upsert_peer(PeerTable(), _frame(mac(2)), 1000)
        table, is_new = upsert_peer(table, _frame(mac(2), build_hostname_tlv("peer")), 5000)
        assert not is_new
        assert len(table) == 1
        assert table.get(mac(2)).last_seen == 5000
        assert table.get(mac(2)).hostname == "peer"

    def test_bad_sync_tlv_keeps_previous_value(self):
        table, _ = upsert_peer(PeerTable(), _frame(mac(2), _election_tlv(mac(2), metric=5)), 0)
        before = table.get(mac(2))
        broken = Tlv(TLV_SYNC_PARAMS, b"\x06\x00")
        table, _ = upsert_peer(table, _frame(mac(2), broken, _election_tlv(mac(9), 1, 700)), 10)
        peer = table.get(mac(2))
        assert peer.sync is before.sync is None
        assert peer.election.master_address == mac(9)
        assert len(peer.last_errors) == 1
        assert peer.last_errors[0].startswith("TruncatedValue: ")

    def test_table_is_not_mutated(self):
        empty = PeerTable()
        upsert_peer(empty, _frame(mac(2)), 0)
        assert len(empty) == 0

    def test_size_bounded_by_distinct_sources(self):
        table = PeerTable()
        for i in range(30):
            table, _ = upsert_peer(table, _frame(mac(i % 4 + 1)), i)
        assert len(table) == 4
        assert all(peer.ipv6_ll == ipv6_from_mac(addr) for addr, peer in table.peers.items())


class TestExpirePeers:
    def test_empty_table(self):
        assert expire_peers(PeerTable(), 10**9) == (PeerTable(), [])

    def test_boundary_is_strict(self):
        table, _ = upsert_peer(PeerTable(timeout=3_000_000), _frame(mac(2)), 0)
        kept, removed = expire_peers(table, 3_000_000)
        assert removed == [] and mac(2) in kept
        gone, removed = expire_peers(table, 3_000_001)
        assert removed == [mac(2)] and len(gone) == 0

    def test_idempotent_at_fixed_now(self):
        table, _ = upsert_peer(PeerTable(timeout=10), _frame(mac(2)), 0)
        table, _ = upsert_peer(table, _frame(mac(3)), 50)
        once, _ = expire_peers(table, 55)
        twice, removed = expire_peers(once, 55)
        assert twice == once and removed == []


class TestPeerRecords:
    def test_rows(self):
        table, _ = upsert_peer(PeerTable(), _frame(mac(3), _election_tlv(mac(5), 2, 42)), 1_000)
        table, _ = upsert_peer(table, _frame(mac(2)), 2_000)
        rows = peer_records(table, 11_000)
        assert [r["mac"] for r in rows] == [str(mac(2)), str(mac(3))]
        assert rows[0]["master"] is None
        assert rows[1] == {
            "mac": "02:00:00:00:00:03",
            "ipv6": "fe80::ff:fe00:3",
            "age_ms": 10,
            "master": "02:00:00:00:00:05",
            "distance": 2,
            "metric": 42,
            "hostname": None,
        }

    def test_freshness_horizon(self):
        table, _ = upsert_peer(PeerTable(), _frame(mac(2)), 0)
        peer = table.get(mac(2))
        assert is_fresh(peer, 2_000_000, 2_000_000)
        assert not is_fresh(peer, 2_000_001, 2_000_000)

"""Wire constants and timing units shared by the codec and the state machines."""

# 802.11 framing
IEEE80211_HEADER_LEN = 24
MAX_BODY_LEN = 2304
FC_TYPE_MGMT = 0
FC_TYPE_DATA = 2
FC_SUBTYPE_ACTION = 13
FC_SUBTYPE_DATA = 0
FC_FLAGS_REJECT = 0x43  # ToDS | FromDS | Protected

AWDL_BSSID_BYTES = bytes.fromhex("002500ff9473")
BROADCAST_BYTES = b"\xff" * 6

# Vendor action body
CATEGORY_VENDOR = 0x7F
APPLE_OUI = bytes.fromhex("0017f2")
AWDL_ACTION_TYPE = 0x08
AWDL_ACTION_VERSION = 0x10
ACTION_FIXED_LEN = 16  # category .. target_tx_time

# Data frames
LLC_SNAP_HEADER = bytes.fromhex("aaaa03") + APPLE_OUI + bytes.fromhex("0800")
DATA_MAGIC = b"\x03\x04"
DATA_HEADER_LEN = 8
MAX_DATA_PAYLOAD = MAX_BODY_LEN - len(LLC_SNAP_HEADER) - DATA_HEADER_LEN

ETHERTYPE_IPV6 = 0x86DD
ETHERTYPE_IPV4 = 0x0800

# TLV registry
TLV_SYNC_PARAMS = 0x04
TLV_HOSTNAME = 0x10
TLV_CHANNEL_SEQUENCE = 0x12
TLV_VERSION = 0x15
TLV_ELECTION_PARAMS = 0x18

TLV_NAMES = {
    TLV_SYNC_PARAMS: "sync_params",
    TLV_HOSTNAME: "hostname",
    TLV_CHANNEL_SEQUENCE: "channel_sequence",
    TLV_VERSION: "version",
    TLV_ELECTION_PARAMS: "election_params",
}

# Timing
TU_US = 1024
AW_TU = 16
AW_DURATION_US = AW_TU * TU_US
SLOT_AWS = 4
CHANNEL_SEQ_LEN = 16
CHANNEL_SEQ_PERIOD_AWS = CHANNEL_SEQ_LEN * SLOT_AWS  # 64
DEFAULT_AF_PERIOD_TU = 110

VALID_CHANNELS = frozenset(range(1, 15)) | frozenset(range(36, 166))

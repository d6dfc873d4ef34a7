from __future__ import annotations

from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.codec.mac import MacAddress
from app.core.config import SOCIAL_CHANNELS, settings


def _parse_mac(value: object) -> MacAddress:
    if isinstance(value, MacAddress):
        return value
    if isinstance(value, (bytes, bytearray)):
        return MacAddress(bytes(value))
    if isinstance(value, str):
        return MacAddress.parse(value)
    raise ValueError(f"cannot interpret {value!r} as a MAC address")


def _social_channel(value: int) -> int:
    if value not in SOCIAL_CHANNELS:
        raise ValueError(f"channel must be one of {SOCIAL_CHANNELS}, got {value}")
    return value


# Node configuration
class NodeConfig(BaseModel):
    """Static configuration of one node; defaults come from ``settings``."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    mac: MacAddress
    metric: Optional[int] = Field(default=None, ge=1, lt=1 << 32)
    channel: int = Field(default_factory=lambda: settings.DEFAULT_CHANNEL)
    af_period_tu: int = Field(default_factory=lambda: settings.AF_PERIOD_TU, gt=0, lt=1 << 16)
    peer_timeout_ms: int = Field(default_factory=lambda: settings.PEER_TIMEOUT_MS, gt=0, lt=1 << 32)
    election_fresh_ms: int = Field(default_factory=lambda: settings.ELECTION_FRESH_MS, gt=0)
    max_distance: int = Field(default_factory=lambda: settings.MAX_DISTANCE, gt=0)
    rng_seed: int = Field(default_factory=lambda: settings.DEFAULT_SEED, ge=0)
    hostname: str = Field(default_factory=lambda: settings.DEFAULT_HOSTNAME, max_length=255)

    @field_validator("mac", mode="before")
    @classmethod
    def _valid_mac(cls, value: object) -> MacAddress:
        mac = _parse_mac(value)
        if mac.is_multicast:
            raise ValueError(f"node address {mac} is a multicast address")
        return mac

    @field_validator("channel")
    @classmethod
    def _valid_channel(cls, value: int) -> int:
        return _social_channel(value)


# Scenario files
class ChannelSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    loss: float = Field(default=0.0, ge=0.0, le=1.0)
    delay_us: int = Field(default=0, ge=0)
    seed: int = Field(default=0, ge=0)
    blocked: List[Tuple[str, str]] = Field(default_factory=list)


class NodeSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mac: str
    metric: Optional[int] = Field(default=None, ge=1, lt=1 << 32)
    ppm: int = Field(default=0, ge=-1000, le=1000)
    join_at_ms: int = Field(default=0, ge=0)
    hostname: Optional[str] = None
    channel: Optional[int] = None
    seed: Optional[int] = Field(default=None, ge=0)

    @field_validator("mac")
    @classmethod
    def _valid_mac(cls, value: str) -> str:
        return str(_parse_mac(value))

    @field_validator("channel")
    @classmethod
    def _valid_channel(cls, value: Optional[int]) -> Optional[int]:
        return None if value is None else _social_channel(value)


class TrafficSpec(BaseModel):
    """One traffic directive: ``ping`` (echo requests) or ``bytes`` (stream)."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["ping", "bytes"]
    src: str
    dst: str
    at_ms: int = Field(default=0, ge=0)
    count: int = Field(default=1, ge=1)
    interval_ms: int = Field(default=1000, gt=0)
    payload_size: int = Field(default=56, ge=0, le=1400)
    size: int = Field(default=0, ge=0)
    chunk: int = Field(default_factory=lambda: settings.SIM_CHUNK_SIZE, gt=0, le=1400)

    @field_validator("src", "dst")
    @classmethod
    def _valid_mac(cls, value: str) -> str:
        return str(_parse_mac(value))


class LinkChangeSpec(BaseModel):
    """Take the link between ``a`` and ``b`` down, or bring it back up, at ``at_ms``."""

    model_config = ConfigDict(extra="forbid")

    at_ms: int = Field(ge=0)
    a: str
    b: str
    state: Literal["down", "up"]

    @field_validator("a", "b")
    @classmethod
    def _valid_mac(cls, value: str) -> str:
        return str(_parse_mac(value))


class Scenario(BaseModel):
    model_config = ConfigDict(extra="forbid")

    duration_ms: int = Field(gt=0)
    af_period_tu: int = Field(default_factory=lambda: settings.AF_PERIOD_TU, gt=0, lt=1 << 16)
    channel: ChannelSpec = Field(default_factory=ChannelSpec)
    nodes: List[NodeSpec] = Field(min_length=1)
    traffic: List[TrafficSpec] = Field(default_factory=list)
    links: List[LinkChangeSpec] = Field(default_factory=list)

    @model_validator(mode="after")
    def _consistent(self) -> "Scenario":
        seen: Dict[str, int] = {}
        for index, node in enumerate(self.nodes):
            if node.mac in seen:
                raise ValueError(f"nodes.{index}.mac {node.mac} duplicates nodes.{seen[node.mac]}.mac")
            seen[node.mac] = index
            if node.join_at_ms >= self.duration_ms:
                raise ValueError(f"nodes.{index}.join_at_ms {node.join_at_ms} is not before duration_ms")
        for index, directive in enumerate(self.traffic):
            for end in ("src", "dst"):
                if getattr(directive, end) not in seen:
                    raise ValueError(f"traffic.{index}.{end} {getattr(directive, end)} is not a scenario node")
            if directive.src == directive.dst:
                raise ValueError(f"traffic.{index} sends to itself")
        for index, pair in enumerate(self.channel.blocked):
            for mac in pair:
                if str(_parse_mac(mac)) not in seen:
                    raise ValueError(f"channel.blocked.{index} names unknown node {mac}")
        for index, change in enumerate(self.links):
            for end in ("a", "b"):
                if getattr(change, end) not in seen:
                    raise ValueError(f"links.{index}.{end} {getattr(change, end)} is not a scenario node")
            if change.a == change.b:
                raise ValueError(f"links.{index} connects a node to itself")
            if change.at_ms >= self.duration_ms:
                raise ValueError(f"links.{index}.at_ms {change.at_ms} is not before duration_ms")
        return self

    def node_config(self, index: int) -> NodeConfig:
        node = self.nodes[index]
        return NodeConfig(
            mac=node.mac,
            metric=node.metric,
            channel=node.channel or settings.DEFAULT_CHANNEL,
            af_period_tu=self.af_period_tu,
            rng_seed=node.seed if node.seed is not None else self.channel.seed + index + 1,
            hostname=node.hostname or f"node{index}",
        )


# Dissection and analysis output
class SyncSummary(BaseModel):
    master: str
    aw_seq: int
    af_period: int
    aw_common_length: int
    remaining_aw_length: int
    tx_counter: int
    channels: List[int]


class ElectionSummary(BaseModel):
    master: str
    sync: str
    distance: int
    master_metric: int
    master_counter: int
    self_metric: int
    self_counter: int


class ActionSummary(BaseModel):
    subtype: int
    version: int
    phy_tx_time: int
    target_tx_time: int
    tlv_types: List[int]
    sync: Optional[SyncSummary] = None
    election: Optional[ElectionSummary] = None
    hostname: Optional[str] = None
    awdl_version: Optional[Tuple[int, int]] = None


class DataSummary(BaseModel):
    sequence: int
    ethertype: int
    length: int


class FrameRecord(BaseModel):
    t_us: int
    frame_class: str
    src: Optional[str] = None
    dst: Optional[str] = None
    length: int
    action: Optional[ActionSummary] = None
    data: Optional[DataSummary] = None
    parse_errors: List[str] = Field(default_factory=list)


class TimelineEntry(BaseModel):
    t_us: int
    node: str
    master: str
    distance: int
    initial: bool = False


class SyncPairStats(BaseModel):
    a: str
    b: str
    samples: int
    median_error_us: float
    max_error_us: int


class SyncAccuracyReport(BaseModel):
    pairs: List[SyncPairStats] = Field(default_factory=list)


class AnalysisReport(BaseModel):
    frames: int
    counts: Dict[str, int]
    peers: List[str]
    timeline: List[TimelineEntry]
    sync_accuracy: Optional[SyncAccuracyReport] = None
    sync_error: Optional[str] = None

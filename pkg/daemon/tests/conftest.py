"""Shared pytest fixtures and environment setup for daemon tests."""

import os

# Required before app modules import settings singleton
os.environ.setdefault("AWDL_LOG_LEVEL", "WARNING")
os.environ.setdefault("AWDL_DEFAULT_SEED", "0")

from typing import Any, Dict, List, Optional  # noqa: E402

import pytest  # noqa: E402

from app.codec.mac import MacAddress  # noqa: E402
from app.schemas.schemas import NodeConfig, Scenario  # noqa: E402
from app.simulator.scenario import parse_scenario  # noqa: E402


def mac(n: int) -> MacAddress:
    """Locally administered unicast address ``02:00:00:00:00:nn``."""
    return MacAddress.from_int(0x020000000000 + n)


def node_config(n: int, metric: Optional[int] = None, **overrides: Any) -> NodeConfig:
    return NodeConfig(mac=mac(n), metric=metric, rng_seed=n, hostname=f"node{n}", **overrides)


def make_scenario(
    nodes: List[Dict[str, Any]],
    duration_ms: int = 1000,
    channel: Optional[Dict[str, Any]] = None,
    traffic: Optional[List[Dict[str, Any]]] = None,
    links: Optional[List[Dict[str, Any]]] = None,
) -> Scenario:
    return parse_scenario({
        "duration_ms": duration_ms,
        "channel": channel or {},
        "nodes": nodes,
        "traffic": traffic or [],
        "links": links or [],
    })


@pytest.fixture
def addr_a() -> MacAddress:
    return mac(1)


@pytest.fixture
def addr_b() -> MacAddress:
    return mac(2)


@pytest.fixture
def two_node_scenario() -> Scenario:
    return make_scenario(
        nodes=[
            {"mac": str(mac(1)), "metric": 100},
            {"mac": str(mac(2)), "metric": 200},
        ],
        duration_ms=2000,
    )


@pytest.fixture
def pcap_path(tmp_path):
    return tmp_path / "capture.pcap"

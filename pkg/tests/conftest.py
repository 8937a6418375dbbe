import random
from dataclasses import dataclass, field

import pytest

from webclaims.claims import Identity
from webclaims.client import ClaimClient, Whitelist
from webclaims.clock import SimClock
from webclaims.ledger import ChainConfig, Ledger
from webclaims.publisher import (
    FaultProfile,
    InProcessTransport,
    PublisherConfig,
    PublisherNode,
)
from webclaims.store import StoreNetwork


@pytest.fixture
def clock():
    return SimClock()


@pytest.fixture
def store(clock):
    return StoreNetwork(clock)


@pytest.fixture
def ledger(clock):
    return Ledger(ChainConfig(), clock)


@pytest.fixture
def fast_ledger(clock):
    # confirmation in one tick, useful when the test drives the clock by hand
    return Ledger(ChainConfig(confirmation_delay=1), clock)


@pytest.fixture
def alice():
    return Identity(bytes([1]) * 32)


@pytest.fixture
def bob():
    return Identity(bytes([2]) * 32)


@pytest.fixture
def carol():
    return Identity(bytes([3]) * 32)


@dataclass
class World:
    """In-process wiring of clock, store, ledger, publishers and clients."""

    clock: SimClock
    store: StoreNetwork
    ledger: Ledger
    publishers: list[PublisherNode] = field(default_factory=list)
    clients: list[ClaimClient] = field(default_factory=list)

    def add_publisher(self, seed: int, fault: FaultProfile | None = None,
                      **config_overrides) -> PublisherNode:
        identity = Identity(bytes([seed]) * 32)
        config = PublisherConfig(
            identity=identity,
            endpoint=f"pub-{seed}.example",
            **config_overrides,
        )
        node = PublisherNode(config, self.ledger, self.store, self.clock,
                             rng=random.Random(seed), fault=fault)
        node.register_self()
        self.publishers.append(node)
        for client in self.clients:
            client.publisher_transports[node.address] = InProcessTransport(node)
        return node

    def add_client(self, seed: int, whitelist: Whitelist | None = None) -> ClaimClient:
        identity = Identity(bytes([seed]) * 32)
        client = ClaimClient(identity, self.ledger, self.store, self.clock,
                             whitelist=whitelist)
        for node in self.publishers:
            client.publisher_transports[node.address] = InProcessTransport(node)
        self.clients.append(client)
        return client

    def settle(self, extra: int = 0) -> None:
        """Advance past the confirmation delay and apply everything."""
        self.clock.advance(self.ledger.config.confirmation_delay + extra)
        self.ledger.process()


@pytest.fixture
def world(clock):
    store = StoreNetwork(clock)
    ledger = Ledger(ChainConfig(confirmation_delay=30), clock)
    return World(clock, store, ledger)

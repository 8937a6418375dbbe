"""Embedded world: ledger + store + publishers in one process, savable to disk.

This is what lets the CLI work with zero daemons: every invocation loads the
world from a state directory, runs one operation, and saves it back. The
same object backs the local HTTP service's demo mode (one honest and one
misbehaving publisher) so the browser UI can exercise the complaint flow.

Layout of a state directory:
    state.json          clock, ledger state, publisher specs/queues, receipts
    blobs/<node>/<link> one file per blob, named by rendered content link
"""

from __future__ import annotations

import json
import os
import random
from dataclasses import dataclass

from .claims import Identity, Topic
from .client import ClaimClient, ReceiptRecord, Whitelist
from .clock import SimClock
from .errors import WebClaimsError
from .ledger import ChainConfig, Ledger
from .publisher import (
    FaultProfile,
    InProcessTransport,
    PublisherConfig,
    PublisherNode,
    QueuedRequest,
)
from .receipts import receipt_from_doc, receipt_to_doc
from .store import ContentLink, ReplicationPolicy, StoreNetwork


@dataclass
class PublisherSpec:
    """Serializable definition of one embedded publisher."""

    seed_hex: str
    endpoint: str
    threshold: int = 100
    max_wait: int = 1800
    pin_duration: int = 30 * 24 * 3600
    copies: int = 3
    deadline_margin: int = 1500
    auth_mode: str = "open"
    rate_limit: int = 50
    fault_mode: str = "honest"
    fault_probability: float = 1.0

    def build(self, ledger: Ledger, store: StoreNetwork, clock: SimClock) -> PublisherNode:
        identity = Identity(bytes.fromhex(self.seed_hex))
        fault = None
        if self.fault_mode != "honest":
            fault = FaultProfile(self.fault_mode, self.fault_probability)
        return PublisherNode(
            PublisherConfig(
                identity=identity,
                endpoint=self.endpoint,
                threshold=self.threshold,
                max_wait=self.max_wait,
                replication=ReplicationPolicy(self.copies),
                pin_duration=self.pin_duration,
                auth_mode=self.auth_mode,
                rate_limit=self.rate_limit,
                deadline_margin=self.deadline_margin,
            ),
            ledger, store, clock,
            rng=random.Random(int.from_bytes(bytes.fromhex(self.seed_hex)[:8], "big")),
            fault=fault,
        )


DEMO_PUBLISHERS = [
    PublisherSpec(seed_hex="51" * 32, endpoint="honest.demo", threshold=2,
                  max_wait=30, deadline_margin=15, pin_duration=360_000),
    PublisherSpec(seed_hex="52" * 32, endpoint="flaky.demo", threshold=1,
                  max_wait=20, deadline_margin=10, pin_duration=360_000,
                  fault_mode="drop_requests"),
]


class SimEnvironment:
    def __init__(self, clock: SimClock, ledger: Ledger, store: StoreNetwork,
                 specs: list[PublisherSpec]):
        self.clock = clock
        self.ledger = ledger
        self.store = store
        self.specs = specs
        self.publishers: dict[str, PublisherNode] = {}
        for spec in specs:
            node = spec.build(ledger, store, clock)
            self.publishers[node.address] = node
        # per-identity client state that must survive process restarts
        self.receipts: dict[str, list[dict]] = {}
        self.seqs: dict[str, int] = {}

    @classmethod
    def create(cls, specs: list[PublisherSpec] | None = None,
               chain: ChainConfig | None = None) -> "SimEnvironment":
        clock = SimClock()
        ledger = Ledger(chain or ChainConfig(), clock)
        store = StoreNetwork(clock)
        env = cls(clock, ledger, store, specs if specs is not None else [])
        for node in env.publishers.values():
            node.register_self()
        env.tick(ledger.config.confirmation_delay)
        return env

    @classmethod
    def demo(cls) -> "SimEnvironment":
        return cls.create(
            specs=[PublisherSpec(**vars(spec)) for spec in DEMO_PUBLISHERS],
            chain=ChainConfig(confirmation_delay=15),
        )

    # -- time -----------------------------------------------------------------

    def tick(self, seconds: int) -> int:
        """Advance simulated time, keeping publisher housekeeping timely."""
        remaining = int(seconds)
        while remaining > 0:
            step = min(60, remaining)
            self.clock.advance(step)
            remaining -= step
            for node in self.publishers.values():
                node.tick()
            self.ledger.process()
            self.store.sweep()
        return self.clock.now()

    # -- clients ---------------------------------------------------------------

    def client_for(self, identity: Identity, whitelist: Whitelist | None = None) -> ClaimClient:
        client = ClaimClient(identity, self.ledger, self.store, self.clock,
                             whitelist=whitelist)
        for node in self.publishers.values():
            client.publisher_transports[node.address] = InProcessTransport(node)
        client._seq = self.seqs.get(identity.address, 0)
        for item in self.receipts.get(identity.address, []):
            client.receipts.append(
                ReceiptRecord(
                    receipt=receipt_from_doc(item["receipt"]),
                    claim_uid=item["claim_uid"],
                    target_url=item["target_url"],
                    status=item["status"],
                    complaint_link=item.get("complaint_link"),
                )
            )
        return client

    def persist_client(self, client: ClaimClient) -> None:
        self.seqs[client.address] = client._seq
        self.receipts[client.address] = [
            {
                "receipt": receipt_to_doc(rec.receipt),
                "claim_uid": rec.claim_uid,
                "target_url": rec.target_url,
                "status": rec.status,
                "complaint_link": rec.complaint_link,
            }
            for rec in client.receipts
        ]

    # -- persistence ---------------------------------------------------------------

    def save(self, directory: str) -> None:
        os.makedirs(directory, exist_ok=True)
        state = {
            "clock": self.clock.now(),
            "ledger": self.ledger.to_state(),
            "publishers": [vars(spec) for spec in self.specs],
            "queues": {
                node.address: [
                    {
                        "claim_bytes": req.claim_bytes.hex(),
                        "topic": req.topic.hex,
                        "link": req.link.render(),
                        "client": req.client,
                        "enqueued_at": req.enqueued_at,
                    }
                    for req in node.queue
                ]
                for node in self.publishers.values()
            },
            "receipts": self.receipts,
            "seqs": self.seqs,
            "pins": {
                node_id: {key: expiry for key, expiry in node.pins.items()}
                for node_id, node in self.store.nodes.items()
            },
        }
        with open(os.path.join(directory, "state.json"), "w", encoding="utf-8") as fh:
            json.dump(state, fh, indent=1)
        blob_root = os.path.join(directory, "blobs")
        os.makedirs(blob_root, exist_ok=True)
        for node_id in self.store.nodes:
            self.store.dump_blobs(node_id, os.path.join(blob_root, node_id))

    @classmethod
    def load(cls, directory: str) -> "SimEnvironment":
        path = os.path.join(directory, "state.json")
        if not os.path.exists(path):
            raise WebClaimsError(f"no embedded state at {directory} (run `init` first)")
        with open(path, "r", encoding="utf-8") as fh:
            state = json.load(fh)
        clock = SimClock(state["clock"])
        ledger = Ledger.from_state(state["ledger"], clock)
        store = StoreNetwork(clock)
        specs = [PublisherSpec(**raw) for raw in state["publishers"]]
        env = cls(clock, ledger, store, specs)
        env.receipts = state.get("receipts", {})
        env.seqs = state.get("seqs", {})
        blob_root = os.path.join(directory, "blobs")
        if os.path.isdir(blob_root):
            for node_id in sorted(os.listdir(blob_root)):
                store.restore_blobs(node_id, os.path.join(blob_root, node_id))
        for node_id, pins in state.get("pins", {}).items():
            store.add_node(node_id)
            store.nodes[node_id].pins = {
                key: (None if expiry is None else int(expiry))
                for key, expiry in pins.items()
            }
        for address, items in state.get("queues", {}).items():
            node = env.publishers.get(address)
            if node is None:
                continue
            node.queue = [
                QueuedRequest(
                    claim_bytes=bytes.fromhex(item["claim_bytes"]),
                    topic=Topic.from_hex(item["topic"]),
                    link=ContentLink.decode(item["link"]),
                    client=item["client"],
                    enqueued_at=item["enqueued_at"],
                )
                for item in items
            ]
        return env

    # -- queries used by services/CLI ------------------------------------------------

    def publisher_summary(self) -> list[dict]:
        entries = []
        for entry in self.ledger.list_publishers():
            entries.append(
                {
                    "address": entry.address,
                    "endpoint": entry.endpoint,
                    "status": entry.status,
                    "complaints": len(self.ledger.complaints_for(entry.address)),
                }
            )
        return entries

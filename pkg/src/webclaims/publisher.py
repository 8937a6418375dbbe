"""Publisher node: batches client issuance requests into single ledger
transactions, signs receipts, pins and replicates claim bytes, and serves
claim fetches from its local store.

Fault profiles exist for simulation builds only: they let a node silently
drop queued registrations, register links under a corrupted topic, or skip
storing replicas, while still handing out receipts. Every injected fault is
recorded in a ground-truth log the harness checks detection against.
"""

from __future__ import annotations

import random
import threading
from dataclasses import dataclass, field
from typing import Callable

from .claims import (
    ClaimKind,
    Identity,
    Topic,
    batch_payload,
    build_claim,
    canonical_serialize,
    parse_claim,
    sha3_256,
    verify_claim_signature,
)
from .clock import SimClock
from .errors import (
    InvalidClaim,
    LedgerRejection,
    MalformedClaim,
    NotFound,
    RateLimited,
    Unauthorized,
)
from .ledger import Ledger, TxHandle
from .receipts import IssuanceReceipt, sign_receipt
from .store import ContentLink, ReplicationPolicy, StoreNetwork, link_for, matches

MONTH_SECONDS = 30 * 24 * 3600

FAULT_MODES = ("honest", "drop_requests", "corrupt_topic", "drop_replicas")


@dataclass
class FaultProfile:
    """Simulation-only misbehavior switch for one publisher."""

    mode: str = "honest"
    probability: float = 1.0
    client_predicate: Callable[[str], bool] | None = None

    def __post_init__(self):
        if self.mode not in FAULT_MODES:
            raise ValueError(f"unknown fault mode {self.mode!r}")

    def triggers(self, client: str, rng: random.Random) -> bool:
        if self.mode == "honest":
            return False
        if self.client_predicate is not None and not self.client_predicate(client):
            return False
        return rng.random() < self.probability


@dataclass
class PublisherConfig:
    identity: Identity
    endpoint: str
    threshold: int = 100
    max_wait: int = 1800  # seconds a request may sit in the queue
    replication: ReplicationPolicy = field(default_factory=ReplicationPolicy)
    pin_duration: int = MONTH_SECONDS
    auth_mode: str = "open"  # open | token
    rate_limit: int = 50  # requests / second / client
    rate_limit_strikes: int = 3  # violations before the account is deactivated
    deadline_margin: int = 1500  # extra seconds promised beyond flush+confirm

    def __post_init__(self):
        if self.threshold < 1:
            raise ValueError("threshold must be >= 1")
        if self.replication.copies < 1:
            raise ValueError("replication needs at least one copy")


@dataclass
class QueuedRequest:
    claim_bytes: bytes
    topic: Topic  # topic the registration will use (corrupted under attack)
    link: ContentLink
    client: str
    enqueued_at: int


@dataclass
class RequestRecord:
    """Post-receipt bookkeeping for one issuance request."""

    digest_hex: str
    topic_hex: str
    client: str
    received_at: int
    tx: TxHandle | None = None


class PublisherNode:
    def __init__(
        self,
        config: PublisherConfig,
        ledger: Ledger,
        store: StoreNetwork,
        clock: SimClock | None = None,
        rng: random.Random | None = None,
        fault: FaultProfile | None = None,
    ):
        self.config = config
        self.ledger = ledger
        self.store = store
        self.clock = clock or store.clock
        self.rng = rng or random.Random(0)
        self.fault = fault or FaultProfile()
        self.address = config.identity.address
        self.node_id = self.address
        store.add_node(self.node_id)
        self.queue: list[QueuedRequest] = []
        self._queue_lock = threading.Lock()
        self._flush_due = False  # set when a flush failed and must be retried
        self.request_book: dict[str, RequestRecord] = {}
        self.fault_log: list[tuple[str, str]] = []  # (request digest hex, mode)
        self.tokens: dict[str, str] = {}
        self.blocked: set[str] = set()
        self._rate_window: tuple[int, dict[str, int]] = (-1, {})
        self._strikes: dict[str, int] = {}
        self._batch_seq = 0
        self.stats = {
            "receipts_issued": 0,
            "flush_count": 0,
            "requests_rejected": 0,
            "replication_shortfalls": 0,
        }
        self.flush_reasons = {"threshold": 0, "timeout": 0, "forced": 0, "retry": 0}

    # -- membership ---------------------------------------------------------

    def register_self(self) -> TxHandle:
        return self.ledger.register_publisher(
            self.address, self.config.endpoint, self.config.identity.public_key.hex()
        )

    def grant_token(self, client: str) -> str:
        token = f"tok-{self.rng.getrandbits(64):016x}"
        self.tokens[client] = token
        return token

    # -- request handling -----------------------------------------------------

    def _check_auth(self, client: str, token: str | None) -> None:
        if client in self.blocked:
            raise Unauthorized(f"{client} is deactivated")
        if self.config.auth_mode == "token":
            if token is None or self.tokens.get(client) != token:
                raise Unauthorized(f"{client} did not present a valid token")

    def _check_rate(self, client: str) -> None:
        now = self.clock.now()
        window_sec, counts = self._rate_window
        if window_sec != now:
            counts = {}
            self._rate_window = (now, counts)
        counts[client] = counts.get(client, 0) + 1
        if counts[client] > self.config.rate_limit:
            self._strikes[client] = self._strikes.get(client, 0) + 1
            if self._strikes[client] >= self.config.rate_limit_strikes:
                self.blocked.add(client)
            raise RateLimited(f"{client} exceeded {self.config.rate_limit} req/s")

    def handle_issuance(
        self, claim_bytes: bytes, client: str, token: str | None = None
    ) -> IssuanceReceipt:
        """Validate, store, queue and acknowledge one issuance request.

        The receipt is signed before any batching happens, so the client
        never waits on a flush.
        """
        self._check_auth(client, token)
        self._check_rate(client)
        try:
            claim = parse_claim(claim_bytes)
        except MalformedClaim as exc:
            self.stats["requests_rejected"] += 1
            raise InvalidClaim(str(exc)) from exc
        if claim.topic is None:
            self.stats["requests_rejected"] += 1
            raise InvalidClaim(f"{claim.kind.value} claims cannot be registered by topic")
        if not claim.signed or not verify_claim_signature(claim):
            self.stats["requests_rejected"] += 1
            raise InvalidClaim("creator signature does not verify")

        digest = sha3_256(claim_bytes)
        link = link_for(claim_bytes)
        now = self.clock.now()
        faulted = self.fault.triggers(client, self.rng)

        if faulted and self.fault.mode == "drop_replicas":
            self.fault_log.append((digest.hex(), "drop_replicas"))
        else:
            self.replicate(claim_bytes)  # local store+pin plus remote copies

        registration_topic = claim.topic
        enqueue = True
        if faulted and self.fault.mode == "drop_requests":
            self.fault_log.append((digest.hex(), "drop_requests"))
            enqueue = False
        elif faulted and self.fault.mode == "corrupt_topic":
            self.fault_log.append((digest.hex(), "corrupt_topic"))
            corrupted = bytes([claim.topic.digest[0] ^ 0xFF]) + claim.topic.digest[1:]
            registration_topic = Topic(corrupted)

        if enqueue:
            with self._queue_lock:
                self.queue.append(
                    QueuedRequest(claim_bytes, registration_topic, link, client, now)
                )

        receipt = sign_receipt(
            IssuanceReceipt(
                request_digest=digest,
                topic=claim.topic,
                publisher=self.address,
                deadline=now
                + self.config.max_wait
                + self.ledger.config.confirmation_delay
                + self.config.deadline_margin,
            ),
            self.config.identity,
        )
        self.request_book[digest.hex()] = RequestRecord(
            digest_hex=digest.hex(),
            topic_hex=claim.topic.hex,
            client=client,
            received_at=now,
        )
        self.stats["receipts_issued"] += 1

        if len(self.queue) >= self.config.threshold:
            self.flush()
        return receipt

    # -- batching -------------------------------------------------------------

    def _oldest_age(self) -> int:
        if not self.queue:
            return 0
        return self.clock.now() - min(r.enqueued_at for r in self.queue)

    def flush(self, force: bool = False) -> TxHandle | None:
        """Turn the whole queue into exactly one claim-registration transaction."""
        with self._queue_lock:
            if not self.queue:
                return None
            if self._flush_due:
                reason = "retry"
            elif len(self.queue) >= self.config.threshold:
                reason = "threshold"
            elif self._oldest_age() >= self.config.max_wait:
                reason = "timeout"
            elif force:
                reason = "forced"
            else:
                return None
            batch = list(self.queue)
            pairs = [(r.topic, r.link) for r in batch]
            try:
                handle = self.ledger.register_claims(self.address, pairs)
            except LedgerRejection:
                self._flush_due = True  # keep requests queued; tick() retries
                return None
            self.queue.clear()
            self._flush_due = False
            self.flush_reasons[reason] += 1
        for req in batch:
            digest_hex = sha3_256(req.claim_bytes).hex()
            record = self.request_book.get(digest_hex)
            if record is not None:
                record.tx = handle
        self._store_batch_manifest(batch)
        self.stats["flush_count"] += 1
        return handle

    def _store_batch_manifest(self, batch: list[QueuedRequest]) -> None:
        # Signed manifest of what was flushed, kept content-addressed for audits.
        self._batch_seq += 1
        payload = batch_payload(
            self.config.identity,
            [(r.topic.hex, r.link.render()) for r in batch],
            created_at=self.clock.now(),
            seq=self._batch_seq,
        )
        manifest = build_claim(
            ClaimKind.BATCH,
            self.config.identity,
            payload,
            topic=None,
            created_at=self.clock.now(),
        )
        data = canonical_serialize(manifest)
        self.store.put(self.node_id, data)
        self.store.pin(self.node_id, link_for(data), self.config.pin_duration)

    def tick(self) -> None:
        """Housekeeping once per simulated second: timeout flush and retries."""
        if self.queue and (self._flush_due or self._oldest_age() >= self.config.max_wait):
            self.flush(force=self._flush_due)

    # -- storage duties ---------------------------------------------------------

    def serve_claim(self, link: ContentLink) -> bytes:
        node = self.store.node(self.node_id)
        blob = node.blobs.get(link.render())
        if blob is None or not matches(link, blob):
            raise NotFound(link.render())
        return blob

    def replicate(self, content: bytes, peers: list[str] | None = None) -> int:
        """Place copies on random online peer publishers; returns total copies
        placed including this node's own."""
        self.store.put(self.node_id, content)  # self counts as the first copy
        self.store.pin(self.node_id, link_for(content), self.config.pin_duration)
        if peers is None:
            try:
                peers = [
                    e.address
                    for e in self.ledger.list_publishers()
                    if e.address != self.address and e.status == "active"
                ]
            except LedgerRejection:
                peers = []  # discovery down: keep serving, place what we can
        candidates = [
            p for p in peers
            if p in self.store.nodes and self.store.nodes[p].online
        ]
        wanted = self.config.replication.copies - 1
        chosen = (
            self.rng.sample(candidates, wanted)
            if len(candidates) > wanted
            else list(candidates)
        )
        link = link_for(content)
        placed = 1  # own copy
        for peer in chosen:
            self.store.put(peer, content)
            self.store.pin(peer, link, self.config.pin_duration)
            placed += 1
        if placed < self.config.replication.copies:
            self.stats["replication_shortfalls"] += 1
        return placed

    # -- introspection -------------------------------------------------------

    def queue_depth(self) -> int:
        return len(self.queue)

    def stats_snapshot(self) -> dict:
        snap = dict(self.stats)
        snap["queue_depth"] = self.queue_depth()
        snap["address"] = self.address
        snap["endpoint"] = self.config.endpoint
        return snap


class InProcessTransport:
    """Duck-typed publisher endpoint used by clients inside one process."""

    def __init__(self, node: PublisherNode):
        self.node = node
        self.reachable = True

    def issue(self, claim_bytes: bytes, client: str, token: str | None = None) -> IssuanceReceipt:
        if not self.reachable:
            raise ConnectionError(f"publisher {self.node.address} unreachable")
        return self.node.handle_issuance(claim_bytes, client, token)

    def fetch(self, link: ContentLink) -> bytes:
        if not self.reachable:
            raise ConnectionError(f"publisher {self.node.address} unreachable")
        return self.node.serve_claim(link)

"""Deterministic ledger simulation: registries, ordering, fees, throughput cap.

Models the contract layer as a single-writer state machine fed by a
serialized admission queue. Each simulated second admits at most
`max_tx_per_second` transactions; an admitted transaction confirms a fixed
`confirmation_delay` later and its state transition applies atomically in
admission order. Fees follow fee = gas_used * gas_price(nano) * fiat_rate.

Two registries are kept: the annotation registry (topic -> ordered hash
list of (link, issuer, timestamp)) and the publisher registry (directory
plus complaint links per publisher). Both are append-only; reads see only
confirmed state.

There is no consensus, mining or contract bytecode here; the point is
ordering, fee accounting and rate limiting, which is all the upper layers
rely on.
"""

from __future__ import annotations

import json
import threading
from collections import defaultdict, deque
from dataclasses import asdict, dataclass

from .claims import Topic
from .clock import SimClock
from .errors import (
    AlreadyRegistered,
    InsufficientFunds,
    LedgerUnavailable,
    MalformedTransaction,
    UnknownPublisher,
)
from .store import ContentLink

NANO = 1e-9


@dataclass
class ChainConfig:
    max_tx_per_second: int = 20
    confirmation_delay: int = 300  # seconds
    eth_fiat_rate: float = 631.0  # USD per currency unit
    default_gas_price: float = 3.0  # nano-currency per gas unit
    # Affine gas model for claim registration, calibrated so a 100-pair
    # batch burns 132,066 gas and costs 0.25 USD at the defaults above.
    base_gas: float = 21_000.0
    per_pair_gas: float = 1_110.66
    register_publisher_gas: float = 90_000.0
    file_complaint_gas: float = 60_000.0
    balances_enabled: bool = False

    def __post_init__(self):
        for name in ("max_tx_per_second", "confirmation_delay", "eth_fiat_rate",
                     "default_gas_price"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def register_claims_gas(self, n_pairs: int) -> float:
        return self.base_gas + self.per_pair_gas * n_pairs

    def fee_usd(self, gas_used: float, gas_price: float | None = None) -> float:
        price = self.default_gas_price if gas_price is None else gas_price
        return gas_used * price * NANO * self.eth_fiat_rate

    def single_claim_fee_usd(self) -> float:
        return self.fee_usd(self.register_claims_gas(1))

    @classmethod
    def from_file(cls, path: str) -> "ChainConfig":
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        return cls(**raw)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RegisterClaims:
    pairs: tuple[tuple[Topic, ContentLink], ...]


@dataclass(frozen=True)
class RegisterPublisher:
    endpoint: str
    certificate: str  # hex public key


@dataclass(frozen=True)
class FileComplaint:
    publisher: str
    complaint_link: ContentLink


TxKind = RegisterClaims | RegisterPublisher | FileComplaint


@dataclass
class Transaction:
    sender: str
    kind: TxKind
    gas_used: float
    gas_price: float
    submitted_at: int


@dataclass(frozen=True)
class TxHandle:
    tx_id: int
    admitted_second: int
    confirm_at: int


@dataclass(frozen=True)
class LedgerRecord:
    link: ContentLink
    issuer: str
    timestamp: int


@dataclass
class PublisherEntry:
    address: str
    endpoint: str
    certificate: str
    status: str = "active"
    registered_at: int = 0


@dataclass
class ConfirmedTx:
    tx_id: int
    sender: str
    kind_name: str
    n_pairs: int
    gas_used: float
    gas_price: float
    fee_usd: float
    confirmed_at: int


class Ledger:
    """Single-writer ledger state machine over a simulated clock."""

    def __init__(self, config: ChainConfig | None = None, clock: SimClock | None = None):
        self.config = config or ChainConfig()
        self.clock = clock or SimClock()
        self.online = True
        self._lock = threading.Lock()
        self._seq = 0
        self._sec_admitted: dict[int, int] = defaultdict(int)
        self._pending: deque[tuple[TxHandle, Transaction]] = deque()
        self._pending_fees: dict[str, float] = defaultdict(float)
        self.confirm_log: list[ConfirmedTx] = []
        self.topics: dict[str, list[LedgerRecord]] = {}
        self._link_topics: dict[str, list[str]] = defaultdict(list)
        self.publishers: dict[str, PublisherEntry] = {}
        self.complaints: dict[str, list[str]] = {}
        self.balances: dict[str, float] = {}

    # -- accounts ---------------------------------------------------------

    def fund_account(self, address: str, usd: float) -> None:
        self.balances[address] = self.balances.get(address, 0.0) + usd

    def balance(self, address: str) -> float:
        return self.balances.get(address, 0.0)

    # -- submission --------------------------------------------------------

    def _gas_for(self, kind: TxKind) -> float:
        if isinstance(kind, RegisterClaims):
            return self.config.register_claims_gas(len(kind.pairs))
        if isinstance(kind, RegisterPublisher):
            return self.config.register_publisher_gas
        return self.config.file_complaint_gas

    def _validate(self, sender: str, kind: TxKind) -> None:
        if isinstance(kind, RegisterClaims) and not kind.pairs:
            raise MalformedTransaction("empty claim batch")
        pending_regs = {
            tx.sender for _, tx in self._pending
            if isinstance(tx.kind, RegisterPublisher)
        }
        if isinstance(kind, RegisterPublisher):
            if sender in self.publishers or sender in pending_regs:
                raise AlreadyRegistered(sender)
        if isinstance(kind, FileComplaint):
            if kind.publisher not in self.publishers and kind.publisher not in pending_regs:
                raise UnknownPublisher(kind.publisher)

    def submit(self, sender: str, kind: TxKind, gas_price: float | None = None) -> TxHandle:
        if not self.online:
            raise LedgerUnavailable("ledger is offline")
        with self._lock:
            self._validate(sender, kind)
            gas_used = self._gas_for(kind)
            price = self.config.default_gas_price if gas_price is None else gas_price
            fee = self.config.fee_usd(gas_used, price)
            if self.config.balances_enabled:
                if sender not in self.balances:
                    raise InsufficientFunds(f"no account for {sender}")
                available = self.balances[sender] - self._pending_fees[sender]
                if available < fee:
                    raise InsufficientFunds(
                        f"{sender} has {available:.6f} USD available, fee is {fee:.6f}"
                    )
                self._pending_fees[sender] += fee
            now = self.clock.now()
            second = now
            while self._sec_admitted[second] >= self.config.max_tx_per_second:
                second += 1
            self._sec_admitted[second] += 1
            self._seq += 1
            handle = TxHandle(
                tx_id=self._seq,
                admitted_second=second,
                confirm_at=second + self.config.confirmation_delay,
            )
            tx = Transaction(sender, kind, gas_used, price, submitted_at=now)
            self._pending.append((handle, tx))
            return handle

    # -- confirmation ------------------------------------------------------

    def process(self) -> int:
        """Apply every transaction whose confirmation time has arrived."""
        applied = 0
        now = self.clock.now()
        with self._lock:
            while self._pending and self._pending[0][0].confirm_at <= now:
                handle, tx = self._pending.popleft()
                self._apply(handle, tx)
                applied += 1
        return applied

    def _apply(self, handle: TxHandle, tx: Transaction) -> None:
        fee = self.config.fee_usd(tx.gas_used, tx.gas_price)
        n_pairs = 0
        if isinstance(tx.kind, RegisterClaims):
            n_pairs = len(tx.kind.pairs)
            for topic, link in tx.kind.pairs:
                records = self.topics.setdefault(topic.hex, [])
                records.append(LedgerRecord(link, tx.sender, handle.confirm_at))
                self._link_topics[link.render()].append(topic.hex)
        elif isinstance(tx.kind, RegisterPublisher):
            self.publishers[tx.sender] = PublisherEntry(
                address=tx.sender,
                endpoint=tx.kind.endpoint,
                certificate=tx.kind.certificate,
                registered_at=handle.confirm_at,
            )
            self.complaints.setdefault(tx.sender, [])
        elif isinstance(tx.kind, FileComplaint):
            self.complaints.setdefault(tx.kind.publisher, []).append(
                tx.kind.complaint_link.render()
            )
        if self.config.balances_enabled:
            self.balances[tx.sender] = self.balances.get(tx.sender, 0.0) - fee
            self._pending_fees[tx.sender] -= fee
        self.confirm_log.append(
            ConfirmedTx(
                tx_id=handle.tx_id,
                sender=tx.sender,
                kind_name=type(tx.kind).__name__,
                n_pairs=n_pairs,
                gas_used=tx.gas_used,
                gas_price=tx.gas_price,
                fee_usd=fee,
                confirmed_at=handle.confirm_at,
            )
        )

    def status(self, handle: TxHandle) -> str:
        if any(h.tx_id == handle.tx_id for h, _ in self._pending):
            return "pending"
        return "confirmed"

    # -- convenience wrappers -----------------------------------------------

    def register_claims(
        self,
        sender: str,
        pairs: list[tuple[Topic, ContentLink]],
        gas_price: float | None = None,
    ) -> TxHandle:
        return self.submit(sender, RegisterClaims(tuple(pairs)), gas_price)

    def register_publisher(self, sender: str, endpoint: str, certificate: str) -> TxHandle:
        return self.submit(sender, RegisterPublisher(endpoint, certificate))

    def file_complaint(self, sender: str, publisher: str, complaint_link: ContentLink) -> TxHandle:
        return self.submit(sender, FileComplaint(publisher, complaint_link))

    # -- reads (confirmed state only) ----------------------------------------

    def _readable(self) -> None:
        # An unreachable ledger fails reads too; confirmations still happen
        # on-chain while our connection is down, so process() keeps running.
        if not self.online:
            raise LedgerUnavailable("ledger is offline")
        self.process()

    def get_claim_links(self, topic: Topic) -> list[LedgerRecord]:
        self._readable()
        return list(self.topics.get(topic.hex, []))

    def topics_of_link(self, link: ContentLink) -> list[str]:
        self._readable()
        return list(self._link_topics.get(link.render(), []))

    def list_publishers(self) -> list[PublisherEntry]:
        self._readable()
        return list(self.publishers.values())

    def get_publisher(self, address: str) -> PublisherEntry | None:
        self._readable()
        return self.publishers.get(address)

    def complaints_for(self, address: str) -> list[str]:
        self._readable()
        return list(self.complaints.get(address, []))

    def fees_paid(self, kind_name: str | None = None) -> float:
        return sum(
            c.fee_usd for c in self.confirm_log
            if kind_name is None or c.kind_name == kind_name
        )

    def tx_count(self, kind_name: str | None = None) -> int:
        return sum(
            1 for c in self.confirm_log
            if kind_name is None or c.kind_name == kind_name
        )

    # -- snapshot / persistence ----------------------------------------------

    def export_records(self) -> str:
        """Annotation registry as text, one record per line, in ledger order."""
        lines = []
        for topic_hex, records in self.topics.items():
            for rec in records:
                lines.append(
                    f"{topic_hex} {rec.link.render()} {rec.issuer} {rec.timestamp}"
                )
        return "\n".join(lines) + ("\n" if lines else "")

    def to_state(self) -> dict:
        def tx_state(handle: TxHandle, tx: Transaction) -> dict:
            kind: dict = {"name": type(tx.kind).__name__}
            if isinstance(tx.kind, RegisterClaims):
                kind["pairs"] = [[t.hex, l.render()] for t, l in tx.kind.pairs]
            elif isinstance(tx.kind, RegisterPublisher):
                kind["endpoint"] = tx.kind.endpoint
                kind["certificate"] = tx.kind.certificate
            else:
                kind["publisher"] = tx.kind.publisher
                kind["complaint_link"] = tx.kind.complaint_link.render()
            return {
                "handle": asdict(handle),
                "sender": tx.sender,
                "gas_used": tx.gas_used,
                "gas_price": tx.gas_price,
                "submitted_at": tx.submitted_at,
                "kind": kind,
            }

        return {
            "config": self.config.to_dict(),
            "seq": self._seq,
            "sec_admitted": dict(self._sec_admitted),
            "pending": [tx_state(h, t) for h, t in self._pending],
            "topics": {
                t: [[r.link.render(), r.issuer, r.timestamp] for r in recs]
                for t, recs in self.topics.items()
            },
            "publishers": {a: asdict(e) for a, e in self.publishers.items()},
            "complaints": self.complaints,
            "balances": self.balances,
            "confirm_log": [asdict(c) for c in self.confirm_log],
        }

    @classmethod
    def from_state(cls, state: dict, clock: SimClock) -> "Ledger":
        ledger = cls(ChainConfig(**state["config"]), clock)
        ledger._seq = state["seq"]
        ledger._sec_admitted = defaultdict(int, {int(k): v for k, v in state["sec_admitted"].items()})
        for item in state["pending"]:
            kind_state = item["kind"]
            kind: TxKind
            if kind_state["name"] == "RegisterClaims":
                kind = RegisterClaims(tuple(
                    (Topic.from_hex(t), ContentLink.decode(l)) for t, l in kind_state["pairs"]
                ))
            elif kind_state["name"] == "RegisterPublisher":
                kind = RegisterPublisher(kind_state["endpoint"], kind_state["certificate"])
            else:
                kind = FileComplaint(
                    kind_state["publisher"], ContentLink.decode(kind_state["complaint_link"])
                )
            handle = TxHandle(**item["handle"])
            tx = Transaction(item["sender"], kind, item["gas_used"], item["gas_price"],
                             item["submitted_at"])
            ledger._pending.append((handle, tx))
            if ledger.config.balances_enabled:
                ledger._pending_fees[tx.sender] += ledger.config.fee_usd(tx.gas_used, tx.gas_price)
        ledger.topics = {
            t: [LedgerRecord(ContentLink.decode(l), issuer, ts) for l, issuer, ts in recs]
            for t, recs in state["topics"].items()
        }
        for t, recs in ledger.topics.items():
            for rec in recs:
                ledger._link_topics[rec.link.render()].append(t)
        ledger.publishers = {a: PublisherEntry(**e) for a, e in state["publishers"].items()}
        ledger.complaints = {a: list(v) for a, v in state["complaints"].items()}
        ledger.balances = dict(state["balances"])
        ledger.confirm_log = [ConfirmedTx(**c) for c in state["confirm_log"]]
        return ledger

"""Client-side claim life cycle: create, issue, verify, revoke, audit, complain.

Verification runs a fixed four-step pipeline ordered so the cheap checks come
first: (1) fetch claim bytes with content-digest verification, (2) drop
claims whose creator is not whitelisted, (3) verify creator signatures on the
survivors only, (4) drop claims covered by a valid creator-signed revocation.
Instrumentation counters expose how many envelope signature checks step 3
performed so the ordering is testable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .claims import (
    Claim,
    ClaimKind,
    ClaimUid,
    Identity,
    Topic,
    annotation_payload,
    build_claim,
    canonical_serialize,
    complaint_payload,
    parse_claim,
    revocation_payload,
    topic_of,
    verify_claim_signature,
)
from .clock import SimClock
from .errors import (
    BadReceipt,
    DeadlineNotReached,
    IntegrityViolation,
    InvalidFault,
    MalformedClaim,
    MissingField,
    NodeOffline,
    NotFound,
    PublisherUnreachable,
    StoreFailure,
    UnknownPublisher,
)
from .ledger import Ledger, LedgerRecord, TxHandle
from .receipts import (
    AuditResult,
    IssuanceReceipt,
    check_receipt_matches,
    receipt_from_doc,
    receipt_to_doc,
    verify_receipt,
)
from .store import StoreNetwork, link_for


@dataclass
class Whitelist:
    """Creator addresses whose claims the user is willing to see."""

    allowed_creators: set[str] = field(default_factory=set)

    def allows(self, address: str) -> bool:
        return address in self.allowed_creators

    def add(self, address: str) -> None:
        self.allowed_creators.add(address)

    def remove(self, address: str) -> None:
        self.allowed_creators.discard(address)

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(sorted(self.allowed_creators), fh, indent=2)

    @classmethod
    def load(cls, path: str) -> "Whitelist":
        with open(path, "r", encoding="utf-8") as fh:
            return cls(set(json.load(fh)))


@dataclass
class VerifiedClaim:
    claim: Claim | None  # None when the bytes could not be fetched
    record: LedgerRecord
    verdict: str  # accepted | filtered | bad_signature | revoked | integrity_failed


@dataclass
class VerifyStats:
    records: int = 0
    deduplicated: int = 0
    integrity_failed: int = 0
    filtered: int = 0
    signature_checks: int = 0  # step-3 envelope verifications only
    revocation_checks: int = 0  # step-4 authority verifications
    revoked: int = 0
    accepted: int = 0


@dataclass
class ReceiptRecord:
    receipt: IssuanceReceipt
    claim_uid: str
    target_url: str
    status: str = "pending"  # pending | ok | request_drop | request_corruption | replica_drop
    complaint_link: str | None = None


class ClaimClient:
    """One user's client: an identity, a local store node, and a whitelist."""

    def __init__(
        self,
        identity: Identity,
        ledger: Ledger,
        store: StoreNetwork,
        clock: SimClock | None = None,
        whitelist: Whitelist | None = None,
        node_id: str | None = None,
    ):
        self.identity = identity
        self.ledger = ledger
        self.store = store
        self.clock = clock or store.clock
        self.whitelist = whitelist if whitelist is not None else Whitelist()
        self.node_id = node_id or identity.address
        store.add_node(self.node_id)
        self.publisher_transports: dict[str, object] = {}
        self.receipts: list[ReceiptRecord] = []
        self.own_claims: dict[str, Claim] = {}
        self.last_verify_stats = VerifyStats()
        self._seq = 0

    @property
    def address(self) -> str:
        return self.identity.address

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    # -- creation -------------------------------------------------------------

    def create_annotation(
        self, url: str, *, text: str | None = None, verdict: str | None = None
    ) -> Claim:
        topic = topic_of(url)  # raises InvalidUrl first
        now = self.clock.now()
        payload = annotation_payload(
            self.identity, url, text=text, verdict=verdict,
            created_at=now, seq=self._next_seq(),
        )
        claim = build_claim(
            ClaimKind.ANNOTATION, self.identity, payload, topic=topic, created_at=now
        )
        self.own_claims[claim.uid().hex] = claim
        return claim

    def create_revocation(self, target: ClaimUid, topic: Topic | None = None) -> Claim:
        """Revocations live under the same topic as their target so one topic
        query surfaces them at verification time."""
        if topic is None:
            known = self.own_claims.get(target.hex)
            if known is None or known.topic is None:
                raise MissingField("topic (target claim unknown to this client)")
            topic = known.topic
        now = self.clock.now()
        payload = revocation_payload(
            self.identity, target, created_at=now, seq=self._next_seq()
        )
        claim = build_claim(
            ClaimKind.REVOCATION, self.identity, payload, topic=topic, created_at=now
        )
        self.own_claims[claim.uid().hex] = claim
        return claim

    # -- issuance -------------------------------------------------------------

    def _keep_local_copy(self, claim_bytes: bytes) -> None:
        # The creator always retains a pinned copy of what it issued.
        try:
            link = self.store.put(self.node_id, claim_bytes)
            self.store.pin(self.node_id, link, None)
        except NodeOffline as exc:
            raise StoreFailure(str(exc)) from exc

    def issue_direct(self, claim: Claim, wait: bool = True) -> LedgerRecord | TxHandle:
        """Store the claim and register its link in one self-paid transaction."""
        if not claim.signed:
            raise MissingField("signature (claim must be signed before issuance)")
        if claim.topic is None:
            raise MissingField("topic")
        data = canonical_serialize(claim)
        self._keep_local_copy(data)
        link = link_for(data)
        handle = self.ledger.register_claims(self.address, [(claim.topic, link)])
        if not wait:
            return handle
        if handle.confirm_at > self.clock.now():
            self.clock.advance(handle.confirm_at - self.clock.now())
        self.ledger.process()
        for record in reversed(self.ledger.get_claim_links(claim.topic)):
            if record.link == link and record.timestamp == handle.confirm_at:
                return record
        raise StoreFailure("registration confirmed but record not found")  # unreachable

    def issue_via_publisher(
        self, claim: Claim, publisher: str, token: str | None = None
    ) -> IssuanceReceipt:
        """Send the claim to a publisher and insist on a verifiable receipt."""
        entry = self.ledger.get_publisher(publisher)
        if entry is None or entry.status != "active":
            raise UnknownPublisher(publisher)
        transport = self.publisher_transports.get(publisher)
        if transport is None:
            raise PublisherUnreachable(f"no route to {publisher}")
        data = canonical_serialize(claim)
        self._keep_local_copy(data)
        try:
            receipt = transport.issue(data, self.address, token)
        except ConnectionError as exc:
            raise PublisherUnreachable(str(exc)) from exc
        check_receipt_matches(
            receipt, claim.uid().digest, claim.topic, publisher, entry.certificate
        )
        if receipt.deadline <= self.clock.now():
            raise BadReceipt("receipt deadline is already in the past")
        self.receipts.append(
            ReceiptRecord(
                receipt=receipt,
                claim_uid=claim.uid().hex,
                target_url=claim.payload_doc().get("target", ""),
            )
        )
        return receipt

    def revoke(
        self,
        target: ClaimUid,
        *,
        topic: Topic | None = None,
        publisher: str | None = None,
        token: str | None = None,
    ):
        """Issue a revocation claim for `target` via the chosen path."""
        revocation = self.create_revocation(target, topic)
        if publisher is None:
            return revocation, self.issue_direct(revocation)
        return revocation, self.issue_via_publisher(revocation, publisher, token)

    # -- verification -----------------------------------------------------------

    def verify_topic(self, url: str, whitelist: Whitelist | None = None) -> list[VerifiedClaim]:
        topic = topic_of(url)
        wl = whitelist if whitelist is not None else self.whitelist
        stats = VerifyStats()
        records = self.ledger.get_claim_links(topic)
        stats.records = len(records)

        # step 1: fetch with digest verification, dedup by uid (first record wins)
        fetched: list[tuple[LedgerRecord, Claim | None, str | None]] = []
        seen_uids: set[str] = set()
        for record in records:
            try:
                data = self.store.get(record.link, via=self.node_id)
            except (NotFound, IntegrityViolation, NodeOffline):
                fetched.append((record, None, "integrity_failed"))
                continue
            try:
                claim = parse_claim(data)
            except MalformedClaim:
                fetched.append((record, None, "integrity_failed"))
                continue
            uid_hex = claim.uid().hex
            if uid_hex in seen_uids:
                stats.deduplicated += 1
                continue
            seen_uids.add(uid_hex)
            if claim.topic != topic:
                # registered under a topic the claim does not name
                fetched.append((record, claim, "integrity_failed"))
                continue
            fetched.append((record, claim, None))

        revocations = [
            c for _, c, verdict in fetched
            if c is not None and verdict is None and c.kind == ClaimKind.REVOCATION
        ]

        results: list[VerifiedClaim] = []
        for record, claim, verdict in fetched:
            if verdict == "integrity_failed":
                stats.integrity_failed += 1
                results.append(VerifiedClaim(claim, record, "integrity_failed"))
                continue
            if claim.kind != ClaimKind.ANNOTATION:
                continue  # revocations are pipeline inputs, not viewable entries
            # step 2: whitelist filter
            if not wl.allows(claim.creator_id):
                stats.filtered += 1
                results.append(VerifiedClaim(claim, record, "filtered"))
                continue
            # step 3: creator signature
            stats.signature_checks += 1
            if not verify_claim_signature(claim):
                results.append(VerifiedClaim(claim, record, "bad_signature"))
                continue
            # step 4: revocation by the claim's own creator
            if self._is_revoked(claim, revocations, stats):
                stats.revoked += 1
                results.append(VerifiedClaim(claim, record, "revoked"))
                continue
            stats.accepted += 1
            results.append(VerifiedClaim(claim, record, "accepted"))

        self.last_verify_stats = stats
        return results

    def _is_revoked(self, claim: Claim, revocations: list[Claim], stats: VerifyStats) -> bool:
        uid_hex = claim.uid().hex
        for rev in revocations:
            if rev.creator_id != claim.creator_id:
                continue
            try:
                if rev.payload_doc().get("targetUid") != uid_hex:
                    continue
            except MalformedClaim:
                continue
            stats.revocation_checks += 1
            if verify_claim_signature(rev):
                return True
        return False

    def accepted_claims(self, url: str, whitelist: Whitelist | None = None) -> list[Claim]:
        return [
            v.claim for v in self.verify_topic(url, whitelist)
            if v.verdict == "accepted" and v.claim is not None
        ]

    # -- receipt audits ------------------------------------------------------------

    def audit_receipt(self, receipt: IssuanceReceipt) -> AuditResult:
        """Classify a publisher's promise after its deadline.

        request_drop: the promised link never appeared under the topic.
        request_corruption: the link appears only under some other topic.
        replica_drop: the ledger record exists but no node other than this
        creator serves the bytes.
        """
        if self.clock.now() < receipt.deadline:
            raise DeadlineNotReached(
                f"receipt deadline {receipt.deadline} is after now {self.clock.now()}"
            )
        link = receipt.claim_link()
        result = self._classify(receipt, link)
        for rec in self.receipts:
            if rec.receipt.request_digest == receipt.request_digest:
                rec.status = result.value
        return result

    def _classify(self, receipt: IssuanceReceipt, link) -> AuditResult:
        records = self.ledger.get_claim_links(receipt.topic)
        if any(r.link == link for r in records):
            # The promise is that publisher-side copies serve the bytes with
            # the creator offline, so the probe is restricted to publisher
            # nodes; viewer caches must not mask a dropped replica.
            publisher_nodes = {e.address for e in self.ledger.list_publishers()}
            try:
                self.store.get(link, exclude={self.node_id}, allow=publisher_nodes)
            except (NotFound, IntegrityViolation):
                return AuditResult.REPLICA_DROP
            return AuditResult.OK
        elsewhere = [t for t in self.ledger.topics_of_link(link) if t != receipt.topic.hex]
        if elsewhere:
            return AuditResult.REQUEST_CORRUPTION
        return AuditResult.REQUEST_DROP

    # -- complaints ------------------------------------------------------------------

    def build_complaint(self, receipt: IssuanceReceipt, fault: AuditResult) -> Claim:
        if fault == AuditResult.OK:
            raise InvalidFault("cannot complain about a kept promise")
        now = self.clock.now()
        payload = complaint_payload(
            self.identity, receipt_to_doc(receipt), fault.value,
            created_at=now, seq=self._next_seq(),
        )
        return build_claim(
            ClaimKind.COMPLAINT, self.identity, payload, topic=None, created_at=now
        )

    def file_complaint(self, receipt: IssuanceReceipt, fault: AuditResult) -> tuple[Claim, TxHandle]:
        """Store the complaint claim and index its link under the publisher."""
        complaint = self.build_complaint(receipt, fault)
        data = canonical_serialize(complaint)
        self._keep_local_copy(data)
        handle = self.ledger.file_complaint(self.address, receipt.publisher, link_for(data))
        for rec in self.receipts:
            if rec.receipt.request_digest == receipt.request_digest:
                rec.complaint_link = link_for(data).render()
        return complaint, handle


def validate_complaint(
    complaint: Claim,
    ledger: Ledger,
    store: StoreNetwork,
) -> tuple[bool, str]:
    """Third-party complaint check: receipt must verify under the registered
    certificate and the claimed fault must still be observable. Complaints
    that fail any step are disregarded."""
    if complaint.kind != ClaimKind.COMPLAINT:
        return False, "not a complaint claim"
    try:
        if not verify_claim_signature(complaint):
            return False, "complaint signature invalid"
        doc = complaint.payload_doc()
        fault = doc.get("fault", "")
        receipt = receipt_from_doc(doc.get("receipt", {}))
    except (MalformedClaim, KeyError):
        return False, "malformed complaint payload"
    entry = ledger.get_publisher(receipt.publisher)
    if entry is None:
        return False, "publisher not registered"
    if not verify_receipt(receipt, entry.certificate):
        return False, "embedded receipt signature invalid"
    link = receipt.claim_link()
    records = ledger.get_claim_links(receipt.topic)
    present = any(r.link == link for r in records)
    if fault == AuditResult.REQUEST_DROP.value:
        if present:
            return False, "link is registered under the promised topic"
        if any(t != receipt.topic.hex for t in ledger.topics_of_link(link)):
            return False, "link registered elsewhere: corruption, not drop"
        return True, "link absent from the promised topic"
    if fault == AuditResult.REQUEST_CORRUPTION.value:
        if present:
            return False, "link is registered under the promised topic"
        if any(t != receipt.topic.hex for t in ledger.topics_of_link(link)):
            return True, "link registered under a different topic"
        return False, "link not registered anywhere"
    if fault == AuditResult.REPLICA_DROP.value:
        if not present:
            return False, "no ledger record: not a replica fault"
        publisher_nodes = {e.address for e in ledger.list_publishers()}
        try:
            store.get(link, exclude={complaint.creator_id}, allow=publisher_nodes)
        except (NotFound, IntegrityViolation):
            return True, "no publisher serves the bytes without the creator"
        return False, "bytes are retrievable without the creator"
    return False, f"unknown fault kind {fault!r}"

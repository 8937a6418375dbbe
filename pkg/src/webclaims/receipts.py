"""Issuance receipts: a publisher's signed promise to register and serve a claim.

A receipt binds the digest of the exact claim bytes submitted, the topic it
must be registered under, the promising publisher and a deadline. Holders can
later audit the promise against the ledger and the store network, and embed
the receipt in a complaint as transferable evidence.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .claims import Identity, Topic, _lp_encode, verify_raw_signature
from .errors import BadReceipt, MalformedClaim
from .store import HASH_FN_SHA3_256, ContentLink


class AuditResult(Enum):
    OK = "ok"
    REQUEST_DROP = "request_drop"
    REQUEST_CORRUPTION = "request_corruption"
    REPLICA_DROP = "replica_drop"


FAULT_RESULTS = (
    AuditResult.REQUEST_DROP,
    AuditResult.REQUEST_CORRUPTION,
    AuditResult.REPLICA_DROP,
)


@dataclass(frozen=True)
class IssuanceReceipt:
    request_digest: bytes  # SHA-3-256 of the canonical claim bytes
    topic: Topic
    publisher: str
    deadline: int
    signature: bytes | None = None

    def signing_bytes(self) -> bytes:
        return _lp_encode([
            self.request_digest,
            self.topic.digest,
            self.publisher.encode("ascii"),
            str(self.deadline).encode("ascii"),
        ])

    def claim_link(self) -> ContentLink:
        """The content link the promised registration must carry."""
        return ContentLink(HASH_FN_SHA3_256, len(self.request_digest), self.request_digest)


def sign_receipt(receipt: IssuanceReceipt, identity: Identity) -> IssuanceReceipt:
    return replace(receipt, signature=identity.sign(receipt.signing_bytes()))


def verify_receipt(receipt: IssuanceReceipt, certificate_hex: str) -> bool:
    """Check the receipt signature against a publisher's registered certificate."""
    if receipt.signature is None:
        return False
    try:
        public_key = bytes.fromhex(certificate_hex)
    except ValueError:
        return False
    if len(public_key) != 32 or len(receipt.signature) != 64:
        return False
    return verify_raw_signature(public_key, receipt.signature, receipt.signing_bytes())


def receipt_to_doc(receipt: IssuanceReceipt) -> dict:
    doc = {
        "type": "IssuanceReceipt",
        "requestDigest": receipt.request_digest.hex(),
        "topic": receipt.topic.hex,
        "publisher": receipt.publisher,
        "deadline": receipt.deadline,
    }
    if receipt.signature is not None:
        doc["signature"] = receipt.signature.hex()
    return doc


def receipt_from_doc(doc: dict) -> IssuanceReceipt:
    try:
        signature = bytes.fromhex(doc["signature"]) if "signature" in doc else None
        return IssuanceReceipt(
            request_digest=bytes.fromhex(doc["requestDigest"]),
            topic=Topic.from_hex(doc["topic"]),
            publisher=doc["publisher"],
            deadline=int(doc["deadline"]),
            signature=signature,
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise MalformedClaim(f"bad receipt document: {exc}") from exc


def check_receipt_matches(receipt: IssuanceReceipt, claim_digest: bytes, topic: Topic,
                          publisher: str, certificate_hex: str) -> None:
    """Client-side acceptance check; raises BadReceipt on any mismatch."""
    if receipt.request_digest != claim_digest:
        raise BadReceipt("receipt digest does not match the submitted claim")
    if receipt.topic != topic:
        raise BadReceipt("receipt names a different topic")
    if receipt.publisher != publisher:
        raise BadReceipt("receipt names a different publisher")
    if not verify_receipt(receipt, certificate_hex):
        raise BadReceipt("receipt signature does not verify under registered certificate")

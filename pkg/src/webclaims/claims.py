"""Claim envelopes, identities, signatures and topic derivation.

A claim is a signed envelope around one of four payload kinds: a web
annotation, a publisher batch manifest, a revocation, or a publisher
complaint. Signatures and content addresses are computed over a canonical
binary form so they are deterministic across machines and round trips.

Canonical wire format (fixed field order, each field prefixed with its
length as a 4-byte big-endian integer):

    kind | creator_id | issuer_id | topic | created_at | payload [| signature]

* kind           ascii token: "annotation", "batch", "revocation", "complaint"
* creator_id     ascii "0x" + 40 hex chars (address)
* issuer_id      ascii, same shape
* topic          32 raw digest bytes, or empty for batch/complaint claims
* created_at     ascii decimal UNIX seconds
* payload        UTF-8 text of the payload document (stored verbatim,
                 never re-normalized after creation)
* signature      64 raw Ed25519 bytes, present once signed

The payload document is a W3C-shaped JSON object (id, type, target/body,
creatorKey). It is rendered once at creation with sorted keys and compact
separators; afterwards the claim carries the text as opaque bytes, so
whitespace differences produce different envelopes by design.

Claims can also be exported/imported as UTF-8 JSON documents carrying the
same fields plus a proof block; the binary form above is what signatures
and content addresses are computed over.
"""

from __future__ import annotations

import hashlib
import json
import os
import stat
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from enum import Enum
from urllib.parse import urlsplit, urlunsplit

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .errors import (
    EmptyBody,
    IdentityMismatch,
    InvalidUrl,
    MalformedClaim,
    MalformedSignature,
    MissingField,
)

SIGNATURE_LEN = 64
TOPIC_LEN = 32


def sha3_256(data: bytes) -> bytes:
    return hashlib.sha3_256(data).digest()


def canonical_json(obj) -> str:
    """Deterministic JSON text: sorted keys, compact separators, raw UTF-8."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


# ---------------------------------------------------------------------------
# identities


@dataclass(frozen=True)
class Identity:
    """Ed25519 keypair plus the derived on-ledger address.

    The address is the hex encoding of the last 20 bytes of the SHA-3-256
    digest of the raw public key; it is a pure function of the public key.
    """

    seed: bytes

    def __post_init__(self):
        if len(self.seed) != 32:
            raise ValueError("identity seed must be 32 bytes")

    @classmethod
    def generate(cls, rng=None) -> "Identity":
        if rng is None:
            return cls(os.urandom(32))
        return cls(bytes(rng.getrandbits(8) for _ in range(32)))

    @property
    def _private_key(self) -> Ed25519PrivateKey:
        return Ed25519PrivateKey.from_private_bytes(self.seed)

    @property
    def public_key(self) -> bytes:
        return self._private_key.public_key().public_bytes_raw()

    @property
    def address(self) -> str:
        return address_of_key(self.public_key)

    def sign(self, message: bytes) -> bytes:
        return self._private_key.sign(message)


def address_of_key(public_key: bytes) -> str:
    return "0x" + sha3_256(public_key)[-20:].hex()


def verify_raw_signature(public_key: bytes, signature: bytes, message: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
        return True
    except (InvalidSignature, ValueError):
        return False


def save_identity(identity: Identity, path: str) -> None:
    """Write the seed as hex with owner-only permissions."""
    fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
    try:
        os.write(fd, identity.seed.hex().encode("ascii") + b"\n")
    finally:
        os.close(fd)
    os.chmod(path, stat.S_IRUSR | stat.S_IWUSR)


def load_identity(path: str) -> Identity:
    with open(path, "r", encoding="ascii") as fh:
        seed_hex = fh.read().strip()
    try:
        seed = bytes.fromhex(seed_hex)
    except ValueError as exc:
        raise MalformedClaim(f"key file {path} is not hex") from exc
    return Identity(seed)


# ---------------------------------------------------------------------------
# topics


@dataclass(frozen=True)
class Topic:
    """SHA-3-256 digest of a normalized target URL; the registry key."""

    digest: bytes

    def __post_init__(self):
        if len(self.digest) != TOPIC_LEN:
            raise ValueError("topic digest must be 32 bytes")

    @property
    def hex(self) -> str:
        return self.digest.hex()

    @classmethod
    def from_hex(cls, text: str) -> "Topic":
        return cls(bytes.fromhex(text))

    def __repr__(self) -> str:
        return f"Topic({self.hex[:12]}…)"


def normalize_url(url: str) -> str:
    """Lowercase scheme and host, strip the fragment, keep path and query."""
    try:
        parts = urlsplit(url)
    except ValueError as exc:
        raise InvalidUrl(f"unparseable URL: {url!r}") from exc
    if parts.scheme.lower() not in ("http", "https") or not parts.netloc:
        raise InvalidUrl(f"not an absolute http(s) URL: {url!r}")
    host = parts.hostname or ""
    netloc = host.lower()
    if parts.port is not None:
        netloc = f"{netloc}:{parts.port}"
    if parts.username:
        cred = parts.username
        if parts.password:
            cred += f":{parts.password}"
        netloc = f"{cred}@{netloc}"
    return urlunsplit((parts.scheme.lower(), netloc, parts.path, parts.query, ""))


def topic_of(url: str) -> Topic:
    return Topic(sha3_256(normalize_url(url).encode("utf-8")))


# ---------------------------------------------------------------------------
# claim envelopes


class ClaimKind(Enum):
    ANNOTATION = "annotation"
    BATCH = "batch"
    REVOCATION = "revocation"
    COMPLAINT = "complaint"


# kinds whose envelope carries a topic
_TOPICFUL = (ClaimKind.ANNOTATION, ClaimKind.REVOCATION)


@dataclass(frozen=True)
class ClaimUid:
    """Content digest of the full signed envelope; the revocation target key."""

    digest: bytes

    @property
    def hex(self) -> str:
        return self.digest.hex()

    @classmethod
    def from_hex(cls, text: str) -> "ClaimUid":
        return cls(bytes.fromhex(text))

    def __repr__(self) -> str:
        return f"ClaimUid({self.hex[:12]}…)"


@dataclass(frozen=True)
class Claim:
    kind: ClaimKind
    creator_id: str
    issuer_id: str
    topic: Topic | None
    created_at: int
    payload: str  # canonical payload document text, opaque after creation
    signature: bytes | None = None

    @property
    def signed(self) -> bool:
        return self.signature is not None

    def payload_doc(self) -> dict:
        try:
            doc = json.loads(self.payload)
        except json.JSONDecodeError as exc:
            raise MalformedClaim("payload is not valid JSON") from exc
        if not isinstance(doc, dict):
            raise MalformedClaim("payload document must be a JSON object")
        return doc

    def uid(self) -> ClaimUid:
        return ClaimUid(sha3_256(canonical_serialize(self)))


def _lp_encode(fields: list[bytes]) -> bytes:
    out = bytearray()
    for field in fields:
        out += len(field).to_bytes(4, "big")
        out += field
    return bytes(out)


def _lp_decode(data: bytes) -> list[bytes]:
    fields = []
    pos = 0
    while pos < len(data):
        if pos + 4 > len(data):
            raise MalformedClaim("truncated length prefix")
        length = int.from_bytes(data[pos : pos + 4], "big")
        pos += 4
        if pos + length > len(data):
            raise MalformedClaim("field overruns buffer")
        fields.append(data[pos : pos + length])
        pos += length
    return fields


def _check_envelope(claim: Claim) -> None:
    if not claim.creator_id:
        raise MissingField("creator_id")
    if not claim.issuer_id:
        raise MissingField("issuer_id")
    if not claim.payload:
        raise MissingField("payload")
    if claim.created_at is None or claim.created_at < 0:
        raise MissingField("created_at")
    if claim.kind in _TOPICFUL and claim.topic is None:
        raise MissingField("topic")
    if claim.kind not in _TOPICFUL and claim.topic is not None:
        raise MalformedClaim(f"{claim.kind.value} claims carry no topic")


def canonical_serialize(claim: Claim) -> bytes:
    """Deterministic envelope bytes; includes the signature when present."""
    _check_envelope(claim)
    fields = [
        claim.kind.value.encode("ascii"),
        claim.creator_id.encode("ascii"),
        claim.issuer_id.encode("ascii"),
        claim.topic.digest if claim.topic is not None else b"",
        str(claim.created_at).encode("ascii"),
        claim.payload.encode("utf-8"),
    ]
    if claim.signature is not None:
        fields.append(claim.signature)
    return _lp_encode(fields)


def signing_bytes(claim: Claim) -> bytes:
    """Envelope bytes without the signature field: what the creator signs."""
    return canonical_serialize(replace(claim, signature=None))


def parse_claim(data: bytes) -> Claim:
    fields = _lp_decode(data)
    if len(fields) not in (6, 7):
        raise MalformedClaim(f"expected 6 or 7 fields, got {len(fields)}")
    try:
        kind = ClaimKind(fields[0].decode("ascii"))
    except (UnicodeDecodeError, ValueError) as exc:
        raise MalformedClaim("unknown claim kind") from exc
    try:
        creator_id = fields[1].decode("ascii")
        issuer_id = fields[2].decode("ascii")
        created_at = int(fields[4].decode("ascii"))
        payload = fields[5].decode("utf-8")
    except (UnicodeDecodeError, ValueError) as exc:
        raise MalformedClaim("undecodable envelope field") from exc
    if fields[3]:
        if len(fields[3]) != TOPIC_LEN:
            raise MalformedClaim("topic digest must be 32 bytes")
        topic = Topic(fields[3])
    else:
        topic = None
    signature = fields[6] if len(fields) == 7 else None
    claim = Claim(kind, creator_id, issuer_id, topic, created_at, payload, signature)
    _check_envelope(claim)
    return claim


def sign_claim(claim: Claim, identity: Identity) -> Claim:
    if claim.signed:
        raise IdentityMismatch("claim is already signed")
    if claim.creator_id != identity.address:
        raise IdentityMismatch(
            f"creator_id {claim.creator_id} != identity {identity.address}"
        )
    return replace(claim, signature=identity.sign(signing_bytes(claim)))


def verify_claim_signature(claim: Claim) -> bool:
    """True iff the signature verifies under the key whose address is creator_id.

    The creator's public key travels inside the payload document
    ("creatorKey"); the address binding is checked before the signature, so
    substituting a different key flips the result to False.
    """
    if claim.signature is None:
        raise MissingField("signature")
    if len(claim.signature) != SIGNATURE_LEN:
        raise MalformedSignature(
            f"signature must be {SIGNATURE_LEN} bytes, got {len(claim.signature)}"
        )
    try:
        key_hex = claim.payload_doc().get("creatorKey", "")
        public_key = bytes.fromhex(key_hex)
    except (MalformedClaim, ValueError, TypeError, AttributeError):
        return False
    if len(public_key) != 32:
        return False
    if address_of_key(public_key) != claim.creator_id:
        return False
    return verify_raw_signature(public_key, claim.signature, signing_bytes(claim))


# ---------------------------------------------------------------------------
# payload documents

VERDICTS = ("true", "false")


def _note_id(creator_id: str, created_at: int, seq: int) -> str:
    return f"urn:note:{creator_id}:{created_at}:{seq}"


def annotation_payload(
    identity: Identity,
    target_url: str,
    *,
    text: str | None = None,
    verdict: str | None = None,
    created_at: int = 0,
    seq: int = 0,
) -> dict:
    """Web-annotation body: a text comment or a true/false classification."""
    if (text is None) == (verdict is None):
        raise EmptyBody("exactly one of text or verdict is required")
    if verdict is not None:
        if verdict not in VERDICTS:
            raise EmptyBody(f"verdict must be one of {VERDICTS}")
        body = {"type": "Classification", "value": verdict}
    else:
        if not text:
            raise EmptyBody("annotation text is empty")
        body = {"type": "TextualBody", "value": text, "purpose": "commenting"}
    return {
        "type": "Annotation",
        "id": _note_id(identity.address, created_at, seq),
        "target": normalize_url(target_url),
        "body": body,
        "creatorKey": identity.public_key.hex(),
    }


def revocation_payload(
    identity: Identity, target: ClaimUid, *, created_at: int = 0, seq: int = 0
) -> dict:
    return {
        "type": "Revocation",
        "id": _note_id(identity.address, created_at, seq),
        "targetUid": target.hex,
        "creatorKey": identity.public_key.hex(),
    }


def batch_payload(
    identity: Identity,
    entries: list[tuple[str, str]],
    *,
    created_at: int = 0,
    seq: int = 0,
) -> dict:
    """Manifest of (topic hex, link text) pairs a publisher flushed together."""
    return {
        "type": "BatchManifest",
        "id": _note_id(identity.address, created_at, seq),
        "entries": [{"topic": t, "link": l} for t, l in entries],
        "creatorKey": identity.public_key.hex(),
    }


def complaint_payload(
    identity: Identity,
    receipt_doc: dict,
    fault: str,
    *,
    created_at: int = 0,
    seq: int = 0,
) -> dict:
    return {
        "type": "Complaint",
        "id": _note_id(identity.address, created_at, seq),
        "fault": fault,
        "receipt": receipt_doc,
        "creatorKey": identity.public_key.hex(),
    }


def build_claim(
    kind: ClaimKind,
    identity: Identity,
    payload: dict,
    *,
    topic: Topic | None,
    created_at: int,
    issuer_id: str | None = None,
) -> Claim:
    """Assemble and sign an envelope around an already-built payload doc.

    The envelope's issuer_id defaults to the creator; the authoritative
    fee-payer is whatever address the ledger records on registration.
    """
    claim = Claim(
        kind=kind,
        creator_id=identity.address,
        issuer_id=issuer_id or identity.address,
        topic=topic,
        created_at=created_at,
        payload=canonical_json(payload),
    )
    return sign_claim(claim, identity)


# ---------------------------------------------------------------------------
# document import/export (UTF-8 JSON, W3C-shaped)

_KIND_TO_TYPE = {
    ClaimKind.ANNOTATION: "AnnotationClaim",
    ClaimKind.BATCH: "BatchClaim",
    ClaimKind.REVOCATION: "RevocationClaim",
    ClaimKind.COMPLAINT: "ComplaintClaim",
}
_TYPE_TO_KIND = {v: k for k, v in _KIND_TO_TYPE.items()}


def _iso(created_at: int) -> str:
    return datetime.fromtimestamp(created_at, tz=timezone.utc).strftime(
        "%Y-%m-%dT%H:%M:%SZ"
    )


def _from_iso(text: str) -> int:
    dt = datetime.strptime(text, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def claim_to_document(claim: Claim) -> dict:
    doc = {
        "@context": [
            "https://www.w3.org/2018/credentials/v1",
            "http://www.w3.org/ns/anno.jsonld",
        ],
        "id": f"urn:claim:{claim.uid().hex}" if claim.signed else None,
        "type": ["VerifiableClaim", _KIND_TO_TYPE[claim.kind]],
        "issuer": claim.issuer_id,
        "issuanceDate": _iso(claim.created_at),
        "creator": claim.creator_id,
        "topic": claim.topic.hex if claim.topic is not None else None,
        "claim": claim.payload_doc(),
    }
    if claim.signature is not None:
        doc["proof"] = {
            "type": "Ed25519Signature2020",
            "verificationMethod": claim.creator_id,
            "proofValue": claim.signature.hex(),
        }
    return doc


def claim_to_text(claim: Claim) -> str:
    return json.dumps(claim_to_document(claim), indent=2, ensure_ascii=False)


def claim_from_document(doc: dict) -> Claim:
    try:
        kind_tokens = [t for t in doc["type"] if t in _TYPE_TO_KIND]
        if len(kind_tokens) != 1:
            raise MalformedClaim("document type must name exactly one claim kind")
        kind = _TYPE_TO_KIND[kind_tokens[0]]
        topic = Topic.from_hex(doc["topic"]) if doc.get("topic") else None
        signature = None
        if "proof" in doc:
            signature = bytes.fromhex(doc["proof"]["proofValue"])
        claim = Claim(
            kind=kind,
            creator_id=doc["creator"],
            issuer_id=doc["issuer"],
            topic=topic,
            created_at=_from_iso(doc["issuanceDate"]),
            payload=canonical_json(doc["claim"]),
            signature=signature,
        )
    except MalformedClaim:
        raise
    except (KeyError, ValueError, TypeError) as exc:
        raise MalformedClaim(f"bad claim document: {exc}") from exc
    _check_envelope(claim)
    return claim


def claim_from_text(text: str) -> Claim:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedClaim("claim document is not valid JSON") from exc
    return claim_from_document(doc)

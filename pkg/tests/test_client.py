"""Client life cycle: creation, issuance paths, verification pipeline, audits."""

import random

import pytest

from webclaims.claims import (
    ClaimKind,
    ClaimUid,
    Identity,
    canonical_serialize,
    claim_to_text,
    parse_claim,
    topic_of,
)
from webclaims.client import Whitelist, validate_complaint
from webclaims.errors import (
    BadReceipt,
    DeadlineNotReached,
    EmptyBody,
    InvalidFault,
    InvalidUrl,
    MissingField,
    PublisherUnreachable,
    UnknownPublisher,
)
from webclaims.publisher import FaultProfile, InProcessTransport
from webclaims.receipts import AuditResult, IssuanceReceipt, sign_receipt
from webclaims.store import link_for

URL = "https://news.example/articles/breaking-story"


@pytest.fixture
def honest_world(world):
    world.add_publisher(40, threshold=1, max_wait=60, deadline_margin=10)
    world.settle()
    return world


def _full_whitelist(*clients):
    return Whitelist({c.address for c in clients})


# --- creation ------------------------------------------------------------------

def test_create_verdict_annotation(world):
    client = world.add_client(1)
    claim = client.create_annotation(URL, verdict="false")
    assert claim.kind == ClaimKind.ANNOTATION
    assert claim.signed
    assert claim.topic == topic_of(URL)
    assert claim.creator_id == client.address
    assert claim.payload_doc()["body"] == {"type": "Classification", "value": "false"}


def test_create_comment_annotation_document(world):
    client = world.add_client(1)
    comment = "x" * 148
    claim = client.create_annotation(URL, text=comment)
    doc_text = claim_to_text(claim)
    # self-contained export: envelope, body, key material and proof
    assert comment in doc_text
    assert 800 < len(doc_text.encode("utf-8")) < 4096
    assert parse_claim(canonical_serialize(claim)) == claim


def test_create_rejects_bad_inputs(world):
    client = world.add_client(1)
    with pytest.raises(EmptyBody):
        client.create_annotation(URL, text="")
    with pytest.raises(InvalidUrl):
        client.create_annotation("nope", text="x")


# --- direct issuance ----------------------------------------------------------------

def test_issue_direct_registers_link(world):
    client = world.add_client(1)
    claim = client.create_annotation(URL, text="direct path")
    record = client.issue_direct(claim)
    links = [r.link for r in world.ledger.get_claim_links(claim.topic)]
    assert record.link in links
    assert record.issuer == client.address


def test_issue_direct_fee_is_single_claim_fee(world):
    client = world.add_client(1)
    claim = client.create_annotation(URL, text="fee check")
    client.issue_direct(claim)
    fees = [c.fee_usd for c in world.ledger.confirm_log if c.sender == client.address]
    assert fees == [pytest.approx(world.ledger.config.single_claim_fee_usd())]


def test_issue_direct_requires_signature(world, alice):
    client = world.add_client(1)
    claim = client.create_annotation(URL, text="x")
    unsigned = type(claim)(claim.kind, claim.creator_id, claim.issuer_id,
                           claim.topic, claim.created_at, claim.payload, None)
    with pytest.raises(MissingField):
        client.issue_direct(unsigned)


# --- publisher issuance ------------------------------------------------------------

def test_issue_via_publisher_and_registration(honest_world):
    client = honest_world.add_client(1)
    pub = honest_world.publishers[0]
    claim = client.create_annotation(URL, text="via publisher")
    receipt = client.issue_via_publisher(claim, pub.address)
    assert receipt.request_digest == claim.uid().digest
    honest_world.settle()
    links = [r.link for r in honest_world.ledger.get_claim_links(claim.topic)]
    assert link_for(canonical_serialize(claim)) in links


def test_wrong_key_receipt_refused(honest_world):
    client = honest_world.add_client(1)
    pub = honest_world.publishers[0]
    imposter = Identity(bytes([99]) * 32)

    class ForgingTransport:
        def issue(self, claim_bytes, client_addr, token=None):
            real = pub.handle_issuance(claim_bytes, client_addr, token)
            return sign_receipt(
                IssuanceReceipt(real.request_digest, real.topic, real.publisher,
                                real.deadline),
                imposter,
            )

    client.publisher_transports[pub.address] = ForgingTransport()
    claim = client.create_annotation(URL, text="x")
    with pytest.raises(BadReceipt):
        client.issue_via_publisher(claim, pub.address)


def test_digest_mismatch_receipt_refused(honest_world):
    client = honest_world.add_client(1)
    pub = honest_world.publishers[0]

    class SwappingTransport:
        def issue(self, claim_bytes, client_addr, token=None):
            real = pub.handle_issuance(claim_bytes, client_addr, token)
            return sign_receipt(
                IssuanceReceipt(bytes(32), real.topic, real.publisher, real.deadline),
                pub.config.identity,
            )

    client.publisher_transports[pub.address] = SwappingTransport()
    claim = client.create_annotation(URL, text="x")
    with pytest.raises(BadReceipt):
        client.issue_via_publisher(claim, pub.address)


def test_unreachable_publisher(honest_world):
    client = honest_world.add_client(1)
    pub = honest_world.publishers[0]
    client.publisher_transports[pub.address].reachable = False
    claim = client.create_annotation(URL, text="x")
    with pytest.raises(PublisherUnreachable):
        client.issue_via_publisher(claim, pub.address)
    # recovery path: another (reachable) publisher can take the same claim
    other = honest_world.add_publisher(41, threshold=1, max_wait=60)
    honest_world.settle()
    client.publisher_transports[other.address] = InProcessTransport(other)
    receipt = client.issue_via_publisher(claim, other.address)
    assert receipt.publisher == other.address


def test_unregistered_publisher_rejected(world):
    client = world.add_client(1)
    claim = client.create_annotation(URL, text="x")
    with pytest.raises(UnknownPublisher):
        client.issue_via_publisher(claim, "0x" + "ab" * 20)


# --- verification pipeline -----------------------------------------------------------

def test_pipeline_filters_before_signature_checks(honest_world):
    viewer = honest_world.add_client(1)
    insider = honest_world.add_client(2)
    outsider = honest_world.add_client(3)
    viewer.whitelist = _full_whitelist(viewer, insider)  # outsider not listed

    for author, text in ((viewer, "a"), (insider, "b"), (outsider, "c")):
        author.issue_direct(author.create_annotation(URL, text=text))

    results = viewer.verify_topic(URL)
    verdicts = sorted(v.verdict for v in results)
    assert verdicts == ["accepted", "accepted", "filtered"]
    assert viewer.last_verify_stats.signature_checks == 2  # filtered claim skipped


def test_empty_whitelist_accepts_nothing(honest_world):
    author = honest_world.add_client(2)
    author.issue_direct(author.create_annotation(URL, text="spam?"))
    viewer = honest_world.add_client(1, whitelist=Whitelist())
    results = viewer.verify_topic(URL)
    assert [v.verdict for v in results] == ["filtered"]
    assert viewer.last_verify_stats.signature_checks == 0


def test_self_revocation_excludes_claim(honest_world):
    author = honest_world.add_client(2)
    viewer = honest_world.add_client(1, whitelist=_full_whitelist(author))
    claim = author.create_annotation(URL, text="retract me")
    author.issue_direct(claim)
    author.revoke(claim.uid())
    results = viewer.verify_topic(URL)
    assert [v.verdict for v in results] == ["revoked"]


def test_foreign_revocation_is_ignored(honest_world):
    author = honest_world.add_client(2)
    attacker = honest_world.add_client(3)
    viewer = honest_world.add_client(1, whitelist=_full_whitelist(author, attacker))
    claim = author.create_annotation(URL, text="stay up")
    author.issue_direct(claim)
    attacker.revoke(claim.uid(), topic=claim.topic)  # registered but powerless
    results = viewer.verify_topic(URL)
    assert [v.verdict for v in results] == ["accepted"]


def test_revocation_of_unknown_uid_has_no_effect(honest_world):
    author = honest_world.add_client(2)
    viewer = honest_world.add_client(1, whitelist=_full_whitelist(author))
    author.issue_direct(author.create_annotation(URL, text="real claim"))
    author.revoke(ClaimUid(bytes(32)), topic=topic_of(URL))
    assert [v.verdict for v in viewer.verify_topic(URL)] == ["accepted"]


def test_unfetchable_claim_marked_integrity_failed(honest_world):
    author = honest_world.add_client(2)
    viewer = honest_world.add_client(1, whitelist=_full_whitelist(author))
    claim = author.create_annotation(URL, text="will vanish")
    author.issue_direct(claim)
    # drop every copy: author node is the only holder
    honest_world.store.set_online(author.node_id, False)
    results = viewer.verify_topic(URL)
    assert [v.verdict for v in results] == ["integrity_failed"]
    assert results[0].claim is None


def test_wrong_topic_registration_marked_integrity_failed(honest_world):
    author = honest_world.add_client(2)
    viewer = honest_world.add_client(1, whitelist=_full_whitelist(author))
    other_url = "https://news.example/articles/other-story"
    claim = author.create_annotation(other_url, text="about the other page")
    data = canonical_serialize(claim)
    honest_world.store.put(author.node_id, data)
    honest_world.ledger.register_claims(author.address, [(topic_of(URL), link_for(data))])
    honest_world.settle()
    assert [v.verdict for v in viewer.verify_topic(URL)] == ["integrity_failed"]


def test_duplicate_records_deduplicated_first_wins(honest_world):
    author = honest_world.add_client(2)
    viewer = honest_world.add_client(1, whitelist=_full_whitelist(author))
    claim = author.create_annotation(URL, text="only once")
    author.issue_direct(claim)
    data = canonical_serialize(claim)
    honest_world.ledger.register_claims(author.address, [(claim.topic, link_for(data))])
    honest_world.settle()
    results = viewer.verify_topic(URL)
    assert len(results) == 1
    assert viewer.last_verify_stats.deduplicated == 1


def test_results_follow_ledger_order(honest_world):
    authors = [honest_world.add_client(i) for i in (2, 3, 4)]
    viewer = honest_world.add_client(1, whitelist=_full_whitelist(*authors))
    expected = []
    for author in authors:
        claim = author.create_annotation(URL, text=f"by {author.address[:8]}")
        author.issue_direct(claim)
        expected.append(claim.uid())
    results = viewer.verify_topic(URL)
    assert [v.claim.uid() for v in results] == expected


# --- audits -------------------------------------------------------------------------

def test_audit_before_deadline_rejected(honest_world):
    client = honest_world.add_client(1)
    pub = honest_world.publishers[0]
    claim = client.create_annotation(URL, text="early audit")
    receipt = client.issue_via_publisher(claim, pub.address)
    with pytest.raises(DeadlineNotReached):
        client.audit_receipt(receipt)


def test_audit_honest_flow_ok(honest_world):
    client = honest_world.add_client(1)
    pub = honest_world.publishers[0]
    claim = client.create_annotation(URL, text="honest")
    receipt = client.issue_via_publisher(claim, pub.address)
    honest_world.clock.advance(receipt.deadline - honest_world.clock.now() + 1)
    assert client.audit_receipt(receipt) == AuditResult.OK


def _issue_and_audit(world, fault, seed=50):
    pub = world.add_publisher(seed, fault=fault, threshold=1, max_wait=30,
                              deadline_margin=10)
    world.settle()
    client = world.add_client(1)
    claim = client.create_annotation(URL, text="under attack")
    receipt = client.issue_via_publisher(claim, pub.address)
    world.clock.advance(receipt.deadline - world.clock.now() + 1)
    world.ledger.process()
    return client, receipt, client.audit_receipt(receipt)


def test_audit_detects_request_drop(world):
    _, _, result = _issue_and_audit(world, FaultProfile("drop_requests"))
    assert result == AuditResult.REQUEST_DROP


def test_audit_detects_request_corruption(world):
    _, _, result = _issue_and_audit(world, FaultProfile("corrupt_topic"))
    assert result == AuditResult.REQUEST_CORRUPTION


def test_audit_detects_replica_drop(world):
    client, receipt, result = _issue_and_audit(world, FaultProfile("drop_replicas"))
    assert result == AuditResult.REPLICA_DROP
    # the creator itself still holds a copy; availability fails only without it
    assert client.store.get(receipt.claim_link(), via=client.node_id)


# --- complaints ------------------------------------------------------------------------

def test_complaint_requires_fault(honest_world):
    client = honest_world.add_client(1)
    pub = honest_world.publishers[0]
    claim = client.create_annotation(URL, text="fine")
    receipt = client.issue_via_publisher(claim, pub.address)
    with pytest.raises(InvalidFault):
        client.build_complaint(receipt, AuditResult.OK)


def test_complaint_filed_and_validated(world):
    client, receipt, result = _issue_and_audit(world, FaultProfile("drop_requests"))
    complaint, _ = client.file_complaint(receipt, result)
    world.settle()
    assert world.ledger.complaints_for(receipt.publisher)
    ok, reason = validate_complaint(complaint, world.ledger, world.store)
    assert ok, reason


def test_complaint_with_forged_receipt_judged_invalid(world):
    pub = world.add_publisher(50, threshold=1, max_wait=30)
    world.settle()
    client = world.add_client(1)
    imposter = Identity(bytes([99]) * 32)
    forged = sign_receipt(
        IssuanceReceipt(bytes(32), topic_of(URL), pub.address, deadline=0), imposter
    )
    complaint = client.build_complaint(forged, AuditResult.REQUEST_DROP)
    ok, reason = validate_complaint(complaint, world.ledger, world.store)
    assert not ok
    assert "receipt" in reason


def test_stale_complaint_judged_invalid(world):
    # a complaint about a promise the publisher did eventually keep
    pub = world.add_publisher(50, threshold=1, max_wait=30)
    world.settle()
    client = world.add_client(1)
    claim = client.create_annotation(URL, text="late but kept")
    receipt = client.issue_via_publisher(claim, pub.address)
    world.settle()
    complaint = client.build_complaint(receipt, AuditResult.REQUEST_DROP)
    ok, reason = validate_complaint(complaint, world.ledger, world.store)
    assert not ok


# --- randomized pipeline properties ------------------------------------------------------

def test_pipeline_economy_and_soundness_random_corpus(world):
    world.add_publisher(40, threshold=5, max_wait=10, deadline_margin=5)
    world.settle()
    rng = random.Random(123)
    authors = [world.add_client(i) for i in range(2, 8)]
    whitelisted = {a.address for a in authors[:3]}
    viewer = world.add_client(1, whitelist=Whitelist(set(whitelisted)))
    urls = [f"https://news.example/a{i}" for i in range(4)]

    for i in range(60):
        author = rng.choice(authors)
        url = rng.choice(urls)
        claim = author.create_annotation(url, text=f"c{i}")
        if rng.random() < 0.5:
            author.issue_direct(claim)
        else:
            author.issue_via_publisher(claim, world.publishers[0].address)
        if rng.random() < 0.1:
            author.revoke(claim.uid())
    for pub in world.publishers:
        pub.flush(force=True)
    world.settle()

    for url in urls:
        results = viewer.verify_topic(url)
        stats = viewer.last_verify_stats
        accepted = [v for v in results if v.verdict == "accepted"]
        # filter soundness: accepted ⊆ whitelisted creators
        assert all(v.claim.creator_id in whitelisted for v in accepted)
        # pipeline economy: step-3 checks never exceed post-filter survivors
        survivors = sum(
            1 for v in results
            if v.verdict in ("accepted", "bad_signature", "revoked")
        )
        assert stats.signature_checks <= survivors
        assert stats.signature_checks == survivors  # exactly one check each

"""Deterministic multi-node scenario runner.

Builds a whole in-process deployment (clients, publishers, store network,
ledger) under one seeded clock, replays a workload (issue claims about
random articles, fetch topics periodically, audit receipts after their
deadlines), injects publisher faults, and collects metrics. One tick is one
simulated second; two runs with the same config and seed produce identical
event traces and byte-identical metrics CSVs.

Module invariants are asserted while the run progresses and at the end;
violations surface as InvariantViolation carrying the failing event index.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .claims import Claim, Identity, canonical_serialize
from .client import ClaimClient, Whitelist
from .clock import SimClock
from .costs import ActivityStats
from .errors import InvariantViolation, WebClaimsError
from .ledger import ChainConfig, Ledger
from .publisher import (
    FaultProfile,
    InProcessTransport,
    PublisherConfig,
    PublisherNode,
)
from .receipts import AuditResult, IssuanceReceipt
from .store import ReplicationPolicy, StoreNetwork, link_for

EXPECTED_RESULT = {
    "drop_requests": AuditResult.REQUEST_DROP,
    "corrupt_topic": AuditResult.REQUEST_CORRUPTION,
    "drop_replicas": AuditResult.REPLICA_DROP,
}


@dataclass
class WorkloadSpec:
    n_topics: int = 30
    issues_per_client: int = 5
    fetch_interval: int = 10  # seconds between topic fetches per client
    interaction_rate: float = 4.2  # interactions / minute / topic
    issue_window: int = 300  # seconds over which issuance events are spread

    def __post_init__(self):
        if self.n_topics < 1 or self.fetch_interval < 1 or self.issue_window < 1:
            raise ValueError("workload sizes must be positive")
        if self.interaction_rate < 0:
            raise ValueError("interaction rate cannot be negative")
        if self.issues_per_client < 0:
            raise ValueError("issues_per_client must be nonnegative")


def replay_facebook_workload(stats: ActivityStats) -> WorkloadSpec:
    """Workload shaped like one big news page's measured activity."""
    rate = stats.interactions_per_post_day / (24 * 60)
    return WorkloadSpec(
        n_topics=int(stats.posts_per_page_day) or 1,
        issues_per_client=5,
        fetch_interval=10,
        interaction_rate=rate,
    )


@dataclass
class ScenarioConfig:
    seed: int = 0
    n_clients: int = 10
    n_publishers: int = 1
    duration: int = 600
    workload: WorkloadSpec = field(default_factory=WorkloadSpec)
    fault_profiles: dict[int, FaultProfile] = field(default_factory=dict)
    confirmation_delay: int = 30
    max_tx_per_second: int = 20
    threshold: int = 100
    max_wait: int = 600
    deadline_margin: int = 30
    pin_duration: int = 30 * 24 * 3600
    replication_copies: int = 3
    rate_limit: int = 1000
    recovery_enabled: bool = True
    primary_publisher: int | None = None  # force all clients onto one publisher
    drain_to_deadlines: bool = True

    def __post_init__(self):
        if self.n_clients < 1 or self.n_publishers < 1 or self.duration < 1:
            raise ValueError("scenario sizes must be positive")
        for index in self.fault_profiles:
            if not 0 <= index < self.n_publishers:
                raise ValueError(f"fault profile names unknown publisher {index}")

    @classmethod
    def from_file(cls, path: str) -> "ScenarioConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return parse_scenario(fh.read())


def parse_scenario(text: str) -> ScenarioConfig:
    """Line-oriented `key = value` scenario format; see scenarios/ for examples."""
    config = ScenarioConfig()
    workload = WorkloadSpec()
    faults: dict[int, dict] = {}
    scalar_keys = {
        "seed": int, "clients": int, "publishers": int, "duration": int,
        "confirmation_delay": int, "max_tx_per_second": int, "threshold": int,
        "max_wait": int, "deadline_margin": int, "pin_duration": int,
        "replication_copies": int, "rate_limit": int,
    }
    workload_keys = {
        "topics": int, "issues_per_client": int, "fetch_interval": int,
        "interaction_rate": float, "issue_window": int,
    }
    attr = {
        "clients": "n_clients", "publishers": "n_publishers", "topics": "n_topics",
    }
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise WebClaimsError(f"scenario line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in scalar_keys:
            setattr(config, attr.get(key, key), scalar_keys[key](value))
        elif key in workload_keys:
            setattr(workload, attr.get(key, key), workload_keys[key](value))
        elif key == "recovery":
            config.recovery_enabled = value.lower() in ("on", "true", "1", "yes")
        elif key == "drain":
            config.drain_to_deadlines = value.lower() in ("on", "true", "1", "yes")
        elif key == "primary_publisher":
            config.primary_publisher = None if value == "none" else int(value)
        elif key.startswith("fault."):
            _, index, fault_key = key.split(".", 2)
            faults.setdefault(int(index), {})[fault_key] = value
        else:
            raise WebClaimsError(f"scenario line {lineno}: unknown key {key!r}")
    config.workload = workload
    config.fault_profiles = {
        index: FaultProfile(
            mode=spec.get("mode", "honest"),
            probability=float(spec.get("probability", 1.0)),
        )
        for index, spec in faults.items()
    }
    config.__post_init__()  # re-validate after mutation
    return config


@dataclass
class IssuedClaim:
    claim: Claim
    creator_index: int
    topic_index: int
    publisher: str
    receipt: IssuanceReceipt
    issued_tick: int
    reissued_via: str | None = None


@dataclass
class AuditEvent:
    digest_hex: str
    publisher: str
    result: AuditResult
    deadline: int
    detect_tick: int


@dataclass
class MetricsReport:
    """End-of-run metrics; availability is measured against publisher-side
    copies only, with every client (creator and viewer) node excluded."""

    seed: int
    claims_issued: int
    claims_verified_ok: int
    ledger_tx_count: int  # claim-registration transactions
    registry_tx_count: int  # publisher registrations + complaints
    total_claim_fees_usd: float
    per_claim_fee_usd: float
    complaints_filed: int
    false_complaints: int
    faults_injected: dict[str, int]
    faults_detected_correctly: int
    detection_events: int
    detection_latency_max: int  # max detect_tick - deadline, -1 when no faults
    detection_latency_by_fault: dict[str, int]  # fault kind -> max latency
    detections_by_deadline_plus_one: int
    availability_ratio: float
    availability_samples: int
    recoveries_attempted: int
    recoveries_succeeded: int
    flush_events: dict[str, int]
    fetch_operations: int

    def as_rows(self) -> list[tuple[str, str]]:
        rows: list[tuple[str, str]] = []
        for key, value in sorted(vars(self).items()):
            if isinstance(value, dict):
                for sub in sorted(value):
                    rows.append((f"{key}.{sub}", repr(value[sub])))
            elif isinstance(value, float):
                rows.append((key, repr(value)))
            else:
                rows.append((key, str(value)))
        return rows

    def to_csv(self) -> str:
        lines = ["metric,value"]
        lines += [f"{key},{value}" for key, value in self.as_rows()]
        return "\n".join(lines) + "\n"

    def summary(self) -> str:
        lines = [
            f"claims issued {self.claims_issued}, verified ok {self.claims_verified_ok}",
            f"claim-registration transactions {self.ledger_tx_count} "
            f"(fees {self.total_claim_fees_usd:.4f} USD, "
            f"{self.per_claim_fee_usd:.6f} USD/claim)",
            f"faults injected {sum(self.faults_injected.values())}, "
            f"detected correctly {self.faults_detected_correctly}, "
            f"complaints {self.complaints_filed} "
            f"(false {self.false_complaints})",
            f"availability with creators offline "
            f"{self.availability_ratio:.3f} over {self.availability_samples} claims",
            f"recoveries {self.recoveries_succeeded}/{self.recoveries_attempted}",
        ]
        return "\n".join(lines)


class ScenarioRunner:
    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.clock = SimClock()
        self.master_rng = random.Random(config.seed)
        self.store = StoreNetwork(self.clock)
        self.ledger = Ledger(
            ChainConfig(
                max_tx_per_second=config.max_tx_per_second,
                confirmation_delay=config.confirmation_delay,
            ),
            self.clock,
        )
        self.publishers: list[PublisherNode] = []
        self.clients: list[ClaimClient] = []
        self.topics: list[str] = []
        self.issued: list[IssuedClaim] = []
        self.audits: list[AuditEvent] = []
        self.complaints: list[tuple[str, str]] = []  # (digest hex, publisher)
        self.recoveries: list[tuple[str, bool]] = []
        self.fetch_operations = 0
        self._audited: set[str] = set()
        self._event_seq = 0
        self._schedule: dict[int, list[tuple[int, int]]] = {}  # tick -> [(client, topic)]

    # -- setup ------------------------------------------------------------------

    def setup(self) -> None:
        config = self.config
        self.topics = [
            f"https://news.example/articles/{i:04d}" for i in range(config.workload.n_topics)
        ]
        for index in range(config.n_publishers):
            identity = Identity.generate(self.master_rng)
            node = PublisherNode(
                PublisherConfig(
                    identity=identity,
                    endpoint=f"publisher-{index}.sim",
                    threshold=config.threshold,
                    max_wait=config.max_wait,
                    replication=ReplicationPolicy(config.replication_copies),
                    pin_duration=config.pin_duration,
                    rate_limit=config.rate_limit,
                    deadline_margin=config.deadline_margin,
                ),
                self.ledger,
                self.store,
                self.clock,
                rng=random.Random(self.master_rng.getrandbits(64)),
                fault=config.fault_profiles.get(index),
            )
            node.register_self()
            self.publishers.append(node)

        identities = [Identity.generate(self.master_rng) for _ in range(config.n_clients)]
        whitelist = {identity.address for identity in identities}
        for identity in identities:
            client = ClaimClient(
                identity, self.ledger, self.store, self.clock,
                whitelist=Whitelist(set(whitelist)),
            )
            for node in self.publishers:
                client.publisher_transports[node.address] = InProcessTransport(node)
            self.clients.append(client)

        # publisher registrations settle before the measured window starts
        self.clock.advance(config.confirmation_delay)
        self.ledger.process()

        rng = random.Random(self.master_rng.getrandbits(64))
        for client_index in range(config.n_clients):
            ticks = sorted(
                rng.randrange(config.workload.issue_window)
                for _ in range(config.workload.issues_per_client)
            )
            for tick in ticks:
                topic_index = rng.randrange(config.workload.n_topics)
                self._schedule.setdefault(tick, []).append((client_index, topic_index))
        self._fetch_offsets = [
            rng.randrange(config.workload.fetch_interval) for _ in range(config.n_clients)
        ]
        self._fetch_rng = random.Random(self.master_rng.getrandbits(64))

    # -- run loop -----------------------------------------------------------------

    def run(self) -> MetricsReport:
        self.setup()
        start = self.clock.now()
        for tick in range(self.config.duration):
            self._event_seq = 0
            self._issue_due(tick)
            for node in self.publishers:
                node.tick()
            self.ledger.process()
            self._fetch_due(tick)
            self._audit_due(tick)
            self.store.sweep()
            self.clock.advance(1)
        self._drain(start)
        report = self._measure()
        self._check_invariants(report)
        return report

    def _fail(self, tick: int, message: str) -> None:
        raise InvariantViolation(message, event_index=(tick, self._event_seq))

    def _choose_publisher(self, client_index: int) -> PublisherNode:
        if self.config.primary_publisher is not None:
            return self.publishers[self.config.primary_publisher]
        return self.publishers[client_index % len(self.publishers)]

    def _issue_due(self, tick: int) -> None:
        for client_index, topic_index in self._schedule.get(tick, ()):
            self._event_seq += 1
            client = self.clients[client_index]
            node = self._choose_publisher(client_index)
            claim = client.create_annotation(
                self.topics[topic_index],
                text=f"claim by client {client_index} at tick {tick}",
            )
            receipt = client.issue_via_publisher(claim, node.address)
            self.issued.append(
                IssuedClaim(claim, client_index, topic_index, node.address, receipt, tick)
            )

    def _fetch_due(self, tick: int) -> None:
        for client_index, client in enumerate(self.clients):
            if (tick + self._fetch_offsets[client_index]) % self.config.workload.fetch_interval:
                continue
            url = self.topics[self._fetch_rng.randrange(len(self.topics))]
            client.verify_topic(url)
            self.fetch_operations += 1

    def _audit_due(self, tick: int) -> None:
        now = self.clock.now()
        for item in self.issued:
            digest_hex = item.receipt.request_digest.hex()
            if digest_hex in self._audited or item.receipt.deadline >= now:
                continue
            self._event_seq += 1
            client = self.clients[item.creator_index]
            result = client.audit_receipt(item.receipt)
            self._audited.add(digest_hex)
            self.audits.append(
                AuditEvent(digest_hex, item.publisher, result, item.receipt.deadline, now)
            )
            if result != AuditResult.OK:
                client.file_complaint(item.receipt, result)
                self.complaints.append((digest_hex, item.publisher))
                if self.config.recovery_enabled:
                    self._recover(item)

    def _recover(self, item: IssuedClaim) -> None:
        # re-issue through the least-complained-about other publisher
        client = self.clients[item.creator_index]
        candidates = [n for n in self.publishers if n.address != item.publisher]
        if not candidates:
            self.recoveries.append((item.receipt.request_digest.hex(), False))
            return
        candidates.sort(key=lambda n: (len(self.ledger.complaints.get(n.address, [])),
                                       n.address))
        target = candidates[0]
        receipt = client.issue_via_publisher(item.claim, target.address)
        item.reissued_via = target.address
        self.issued.append(
            IssuedClaim(
                item.claim, item.creator_index, item.topic_index, target.address,
                receipt, self.clock.now(), reissued_via=target.address,
            )
        )
        self.recoveries.append((item.receipt.request_digest.hex(), True))

    def _drain(self, start: int) -> None:
        for node in self.publishers:
            node.flush(force=True)
        horizon = self.clock.now()
        if self.config.drain_to_deadlines and self.issued:
            horizon = max(horizon, max(i.receipt.deadline for i in self.issued) + 1)
        while self.clock.now() < horizon or self.ledger._pending:
            self.clock.advance(1)
            for node in self.publishers:
                node.tick()
            self.ledger.process()
        self._audit_due(self.config.duration)

    # -- measurement ----------------------------------------------------------------

    def _publisher_nodes(self) -> set[str]:
        return {node.address for node in self.publishers}

    def _measure(self) -> MetricsReport:
        client_nodes = {c.node_id for c in self.clients}
        publisher_nodes = self._publisher_nodes()

        # availability: one sample per distinct claim, creator (and every other
        # client cache) excluded, publisher copies only
        available = 0
        by_uid: dict[str, IssuedClaim] = {}
        for item in self.issued:
            by_uid[item.claim.uid().hex] = item  # re-issues collapse to one sample
        for uid_hex, item in by_uid.items():
            link = link_for(canonical_serialize(item.claim))
            try:
                self.store.get(link, exclude=client_nodes, allow=publisher_nodes)
                available += 1
            except WebClaimsError:
                pass

        verifier = ClaimClient(
            Identity.generate(self.master_rng), self.ledger, self.store, self.clock,
            whitelist=Whitelist({c.address for c in self.clients}),
            node_id="metrics-verifier",
        )
        verified_ok = 0
        for url in self.topics:
            verified_ok += sum(
                1 for v in verifier.verify_topic(url) if v.verdict == "accepted"
            )

        ground_truth: dict[str, str] = {}
        for node in self.publishers:
            for digest_hex, mode in node.fault_log:
                ground_truth[digest_hex] = mode
        detected_correctly = 0
        within_one = 0
        latency_max = -1
        latency_by_fault: dict[str, int] = {}
        for audit in self.audits:
            expected = EXPECTED_RESULT.get(ground_truth.get(audit.digest_hex, "honest"),
                                           AuditResult.OK)
            if audit.result == expected:
                detected_correctly += 1
            if audit.result != AuditResult.OK:
                latency = audit.detect_tick - audit.deadline
                latency_max = max(latency_max, latency)
                kind = audit.result.value
                latency_by_fault[kind] = max(latency_by_fault.get(kind, -1), latency)
                if audit.detect_tick <= audit.deadline + 1:
                    within_one += 1
        false_complaints = sum(
            1 for digest_hex, _ in self.complaints if digest_hex not in ground_truth
        )

        faults_injected: dict[str, int] = {}
        for mode in ground_truth.values():
            faults_injected[mode] = faults_injected.get(mode, 0) + 1

        claim_fees = self.ledger.fees_paid("RegisterClaims")
        pairs_registered = sum(
            c.n_pairs for c in self.ledger.confirm_log if c.kind_name == "RegisterClaims"
        )
        flush_events: dict[str, int] = {}
        for node in self.publishers:
            for reason, count in node.flush_reasons.items():
                flush_events[reason] = flush_events.get(reason, 0) + count

        return MetricsReport(
            seed=self.config.seed,
            claims_issued=len(by_uid),
            claims_verified_ok=verified_ok,
            ledger_tx_count=self.ledger.tx_count("RegisterClaims"),
            registry_tx_count=(
                self.ledger.tx_count("RegisterPublisher")
                + self.ledger.tx_count("FileComplaint")
            ),
            total_claim_fees_usd=claim_fees,
            per_claim_fee_usd=claim_fees / pairs_registered if pairs_registered else 0.0,
            complaints_filed=len(self.complaints),
            false_complaints=false_complaints,
            faults_injected=faults_injected,
            faults_detected_correctly=detected_correctly,
            detection_events=len(self.audits),
            detection_latency_max=latency_max,
            detection_latency_by_fault=latency_by_fault,
            detections_by_deadline_plus_one=within_one,
            availability_ratio=available / len(by_uid) if by_uid else 1.0,
            availability_samples=len(by_uid),
            recoveries_attempted=len(self.recoveries),
            recoveries_succeeded=sum(1 for _, ok in self.recoveries if ok),
            flush_events=flush_events,
            fetch_operations=self.fetch_operations,
        )

    # -- invariants -------------------------------------------------------------------

    def _check_invariants(self, report: MetricsReport) -> None:
        end = (self.config.duration, self._event_seq)
        if report.claims_verified_ok > report.claims_issued:
            raise InvariantViolation("verified more claims than were issued", end)
        if not 0.0 <= report.availability_ratio <= 1.0:
            raise InvariantViolation("availability ratio out of range", end)

        by_second: dict[int, int] = {}
        for conf in self.ledger.confirm_log:
            by_second[conf.confirmed_at] = by_second.get(conf.confirmed_at, 0) + 1
        if any(c > self.config.max_tx_per_second for c in by_second.values()):
            raise InvariantViolation("throughput cap exceeded", end)

        all_honest = all(
            profile.mode == "honest" for profile in self.config.fault_profiles.values()
        )
        if all_honest and report.complaints_filed:
            raise InvariantViolation("complaints generated in an all-honest run", end)

        # complete detection: every injected fault classified correctly
        ground_truth: dict[str, str] = {}
        for node in self.publishers:
            for digest_hex, mode in node.fault_log:
                ground_truth[digest_hex] = mode
        audited = {a.digest_hex: a.result for a in self.audits}
        for digest_hex, mode in ground_truth.items():
            if audited.get(digest_hex) != EXPECTED_RESULT[mode]:
                raise InvariantViolation(
                    f"fault {mode} on {digest_hex[:12]} not classified correctly", end
                )

        # ledger economy: claim txs bounded by threshold flushes + slack
        min_threshold = min(node.config.threshold for node in self.publishers)
        issuance_requests = len(self.issued)
        slack = sum(
            count for reason, count in report.flush_events.items()
            if reason != "threshold"
        )
        bound = math.ceil(issuance_requests / min_threshold) + slack + len(self.publishers)
        if report.ledger_tx_count > bound:
            raise InvariantViolation(
                f"{report.ledger_tx_count} claim transactions exceeds bound {bound}", end
            )


def run(config: ScenarioConfig) -> MetricsReport:
    return ScenarioRunner(config).run()

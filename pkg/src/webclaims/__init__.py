"""webclaims: censorship-resistant web annotations.

Signed claims about web pages, stored content-addressed across simulated
storage nodes, indexed by topic on a deterministic fee-charging ledger, and
issued through batching publishers that sign receipts and answer for them.
"""

__version__ = "0.1.0"

from .claims import (  # noqa: F401
    Claim,
    ClaimKind,
    ClaimUid,
    Identity,
    Topic,
    canonical_serialize,
    parse_claim,
    sign_claim,
    topic_of,
    verify_claim_signature,
)
from .client import ClaimClient, VerifiedClaim, Whitelist, validate_complaint  # noqa: F401
from .clock import SimClock  # noqa: F401
from .costs import ActivityStats, CostParams, CostReport, summarize  # noqa: F401
from .errors import WebClaimsError  # noqa: F401
from .ledger import ChainConfig, Ledger, LedgerRecord  # noqa: F401
from .netsim import MetricsReport, ScenarioConfig, WorkloadSpec  # noqa: F401
from .netsim import run as run_scenario  # noqa: F401
from .publisher import FaultProfile, PublisherConfig, PublisherNode  # noqa: F401
from .receipts import AuditResult, IssuanceReceipt  # noqa: F401
from .store import ContentLink, ReplicationPolicy, StoreNetwork, link_for  # noqa: F401

"""Exception hierarchy shared by every subsystem.

All domain errors derive from WebClaimsError so callers (CLI, HTTP services)
can map them to exit codes / status codes in one place.
"""


class WebClaimsError(Exception):
    """Base class for all domain errors."""


# --- claim model ---

class MissingField(WebClaimsError):
    """A kind-required claim field is absent."""


class MalformedClaim(WebClaimsError):
    """Bytes or document do not decode to a well-formed claim."""


class IdentityMismatch(WebClaimsError):
    """Signing identity does not match the claim's creator id."""


class MalformedSignature(WebClaimsError):
    """Signature bytes cannot be decoded (wrong length / not hex)."""


class InvalidUrl(WebClaimsError):
    """Target is not an absolute http(s) URL."""


class EmptyBody(WebClaimsError):
    """Annotation body has no content."""


# --- content store ---

class NodeOffline(WebClaimsError):
    """Operation requires an online store node."""


class NotFound(WebClaimsError):
    """No online node holds the requested content."""


class IntegrityViolation(WebClaimsError):
    """Every holder returned bytes whose digest does not match the link."""


class StoreFailure(WebClaimsError):
    """Store-side failure during an issuance flow."""


# --- ledger ---

class LedgerRejection(WebClaimsError):
    """The ledger refused a transaction."""


class LedgerUnavailable(LedgerRejection):
    """The ledger cannot be reached (simulated outage or dead endpoint)."""


class MalformedTransaction(LedgerRejection):
    """Transaction payload violates basic shape rules (e.g. empty batch)."""


class InsufficientFunds(LedgerRejection):
    """Sender balance cannot cover the transaction fee."""


class AlreadyRegistered(LedgerRejection):
    """Publisher address is already active in the registry."""


class UnknownPublisher(LedgerRejection):
    """Complaint target is not a registered publisher."""


# --- client / publisher protocol ---

class PublisherUnreachable(WebClaimsError):
    """Selected publisher endpoint did not answer."""


class BadReceipt(WebClaimsError):
    """Receipt signature or request digest does not match; must be refused."""


class Unauthorized(WebClaimsError):
    """Client not allowed to use this publisher (auth mode / deactivated)."""


class RateLimited(WebClaimsError):
    """Client exceeded the publisher's per-second request budget."""


class InvalidClaim(WebClaimsError):
    """Issuance request carries a claim that fails validation."""


class DeadlineNotReached(WebClaimsError):
    """Receipt audited before its deadline elapsed."""


class InvalidFault(WebClaimsError):
    """Complaint requested for a receipt whose audit result is ok."""


# --- simulation harness ---

class InvariantViolation(WebClaimsError):
    """A runtime invariant failed during a scenario run.

    Carries the failing assertion text and the event index (tick, seq)
    at which it was detected.
    """

    def __init__(self, message: str, event_index: tuple[int, int] | None = None):
        super().__init__(message)
        self.event_index = event_index

    def __str__(self) -> str:  # pragma: no cover - formatting only
        base = super().__str__()
        if self.event_index is not None:
            return f"{base} (at event {self.event_index[0]}:{self.event_index[1]})"
        return base

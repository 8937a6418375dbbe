"""HTTP surfaces and remote adapters.

Three FastAPI apps:
  * client app    — the local service the CLI and browser UI talk to
                    (POST /annotations, GET /annotations?url=, POST /revocations,
                    GET /receipts, POST /audits, POST /complaints, GET/PUT
                    /whitelist, GET /publishers, plus /sim/advance in embedded
                    mode)
  * publisher app — one publisher daemon (POST /issue, GET /claim/<link>,
                    GET /health, GET /stats)
  * ledger app    — thin facade over the ledger simulation so daemons in
                    separate processes share one chain

plus duck-typed remote counterparts (RemoteLedger, RemoteStore,
HttpPublisherTransport) that let ClaimClient run against those daemons
exactly as it runs against in-process objects.
"""

from __future__ import annotations

import threading
from typing import Any

import httpx
import uvicorn
from fastapi import Body, FastAPI, Request
from fastapi.responses import JSONResponse, Response

from . import errors
from .claims import (
    ClaimUid,
    Identity,
    Topic,
    canonical_serialize,
    claim_from_document,
    claim_to_document,
    parse_claim,
    topic_of,
)
from .client import ClaimClient, Whitelist
from .clock import SimClock
from .errors import (
    IntegrityViolation,
    NotFound,
    PublisherUnreachable,
    WebClaimsError,
)
from .ledger import ChainConfig, Ledger, LedgerRecord, PublisherEntry, TxHandle
from .publisher import PublisherNode
from .receipts import IssuanceReceipt, receipt_from_doc, receipt_to_doc
from .simenv import SimEnvironment
from .store import ContentLink, link_for, matches

_STATUS = {
    "NotFound": 404,
    "UnknownPublisher": 404,
    "Unauthorized": 403,
    "RateLimited": 429,
    "DeadlineNotReached": 409,
    "AlreadyRegistered": 409,
    "InvalidFault": 409,
    "LedgerUnavailable": 503,
    "PublisherUnreachable": 502,
    "InsufficientFunds": 402,
    "InvariantViolation": 500,
}


def _error_response(exc: WebClaimsError) -> JSONResponse:
    name = type(exc).__name__
    return JSONResponse(
        status_code=_STATUS.get(name, 400),
        content={"error": name, "detail": str(exc)},
    )


def _install_error_handler(app: FastAPI) -> None:
    @app.exception_handler(WebClaimsError)
    async def _handle(request: Request, exc: WebClaimsError):
        return _error_response(exc)


def _raise_remote_error(response: httpx.Response) -> None:
    if response.status_code < 400:
        return
    try:
        payload = response.json()
        name = payload.get("error", "")
        detail = payload.get("detail", response.text)
    except ValueError:
        name, detail = "", response.text
    exc_type = getattr(errors, name, None)
    if exc_type is not None and issubclass(exc_type, WebClaimsError):
        raise exc_type(detail)
    raise WebClaimsError(f"remote error {response.status_code}: {detail}")


# ---------------------------------------------------------------------------
# client service


class ClientService:
    """One user's local service over an embedded world."""

    def __init__(
        self,
        env: SimEnvironment,
        identity: Identity,
        whitelist: Whitelist | None = None,
        whitelist_path: str | None = None,
        state_dir: str | None = None,
        sim_control: bool = True,
    ):
        self.env = env
        self.whitelist_path = whitelist_path
        if whitelist is None and whitelist_path is not None:
            try:
                whitelist = Whitelist.load(whitelist_path)
            except FileNotFoundError:
                whitelist = None
        if whitelist is None:
            whitelist = Whitelist({identity.address})
        self.client = env.client_for(identity, whitelist)
        self.state_dir = state_dir
        self.sim_control = sim_control

    def save(self) -> None:
        self.env.persist_client(self.client)
        if self.state_dir is not None:
            self.env.save(self.state_dir)
        if self.whitelist_path is not None:
            self.client.whitelist.save(self.whitelist_path)

    def default_publisher(self) -> str:
        entries = self.env.ledger.list_publishers()
        if not entries:
            raise PublisherUnreachable("no publishers registered")
        return entries[0].address

    def receipt_by_digest(self, digest_hex: str) -> IssuanceReceipt:
        for rec in self.client.receipts:
            if rec.receipt.request_digest.hex() == digest_hex:
                return rec.receipt
        raise NotFound(f"no receipt with digest {digest_hex}")


def _verified_payload(client: ClaimClient, url: str, show_all: bool) -> dict:
    results = client.verify_topic(url)
    counts: dict[str, int] = {}
    claims = []
    for item in results:
        counts[item.verdict] = counts.get(item.verdict, 0) + 1
        if not show_all and item.verdict != "accepted":
            continue
        claims.append(
            {
                "verdict": item.verdict,
                "claim": claim_to_document(item.claim) if item.claim else None,
                "record": {
                    "link": item.record.link.render(),
                    "issuer": item.record.issuer,
                    "timestamp": item.record.timestamp,
                },
            }
        )
    return {
        "url": url,
        "topic": topic_of(url).hex,
        "claims": claims,
        "counts": counts,
    }


def build_client_app(service: ClientService) -> FastAPI:
    app = FastAPI(title="annotation client service")
    _install_error_handler(app)
    client = service.client

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "address": client.address,
            "now": client.clock.now(),
        }

    @app.post("/annotations")
    def post_annotation(body: dict = Body(...)):
        claim = client.create_annotation(
            body["url"], text=body.get("text"), verdict=body.get("verdict")
        )
        via = body.get("via", "publisher")
        if via == "direct":
            record = client.issue_direct(claim)
            service.env.tick(0)
            out: dict[str, Any] = {
                "claim": claim_to_document(claim),
                "record": {
                    "link": record.link.render(),
                    "issuer": record.issuer,
                    "timestamp": record.timestamp,
                },
                "fee_usd": client.ledger.config.single_claim_fee_usd(),
            }
        else:
            publisher = body.get("publisher") or service.default_publisher()
            receipt = client.issue_via_publisher(claim, publisher, body.get("token"))
            out = {
                "claim": claim_to_document(claim),
                "receipt": receipt_to_doc(receipt),
            }
        service.save()
        return out

    @app.get("/annotations")
    def get_annotations(url: str, all: bool = False):
        return _verified_payload(client, url, all)

    @app.post("/revocations")
    def post_revocation(body: dict = Body(...)):
        target = ClaimUid.from_hex(body["target_uid"])
        topic = topic_of(body["topic_url"]) if body.get("topic_url") else None
        via = body.get("via", "publisher")
        if via == "direct":
            revocation, record = client.revoke(target, topic=topic)
            out = {
                "claim": claim_to_document(revocation),
                "record": {"link": record.link.render(), "issuer": record.issuer,
                           "timestamp": record.timestamp},
            }
        else:
            publisher = body.get("publisher") or service.default_publisher()
            revocation, receipt = client.revoke(target, topic=topic, publisher=publisher)
            out = {
                "claim": claim_to_document(revocation),
                "receipt": receipt_to_doc(receipt),
            }
        service.save()
        return out

    @app.get("/receipts")
    def get_receipts():
        return [
            {
                "receipt": receipt_to_doc(rec.receipt),
                "status": rec.status,
                "claim_uid": rec.claim_uid,
                "target_url": rec.target_url,
                "complaint_link": rec.complaint_link,
            }
            for rec in client.receipts
        ]

    @app.post("/audits")
    def post_audit(body: dict = Body(...)):
        receipt = service.receipt_by_digest(body["request_digest"])
        if client.clock.now() < receipt.deadline:
            return {"result": "pending", "deadline": receipt.deadline,
                    "now": client.clock.now()}
        result = client.audit_receipt(receipt)
        service.save()
        return {"result": result.value}

    @app.post("/complaints")
    def post_complaint(body: dict = Body(...)):
        receipt = service.receipt_by_digest(body["request_digest"])
        result = client.audit_receipt(receipt)
        complaint, handle = client.file_complaint(receipt, result)  # raises on ok
        service.env.tick(service.env.ledger.config.confirmation_delay)
        service.save()
        return {
            "complaint": claim_to_document(complaint),
            "publisher": receipt.publisher,
            "publisher_complaints": len(
                service.env.ledger.complaints_for(receipt.publisher)
            ),
            "confirmed_at": handle.confirm_at,
        }

    @app.get("/whitelist")
    def get_whitelist():
        return {"addresses": sorted(client.whitelist.allowed_creators)}

    @app.put("/whitelist")
    def put_whitelist(body: dict = Body(...)):
        client.whitelist.allowed_creators = set(body["addresses"])
        service.save()
        return {"addresses": sorted(client.whitelist.allowed_creators)}

    @app.get("/publishers")
    def get_publishers():
        return service.env.publisher_summary()

    if service.sim_control:
        @app.post("/sim/advance")
        def sim_advance(body: dict = Body(...)):
            now = service.env.tick(int(body.get("seconds", 0)))
            service.save()
            return {"now": now}

    return app


# ---------------------------------------------------------------------------
# publisher daemon


def build_publisher_app(node: PublisherNode) -> FastAPI:
    app = FastAPI(title=f"publisher {node.address}")
    _install_error_handler(app)

    @app.get("/health")
    def health():
        return {"status": "ok", "address": node.address, "endpoint": node.config.endpoint}

    @app.get("/stats")
    def stats():
        return node.stats_snapshot()

    @app.post("/issue")
    def issue(request: Request, body: dict = Body(...)):
        claim = claim_from_document(body)
        token = request.headers.get("x-auth-token")
        receipt = node.handle_issuance(
            canonical_serialize(claim), claim.creator_id, token
        )
        return receipt_to_doc(receipt)

    @app.get("/claim/{link}")
    def claim(link: str):
        blob = node.serve_claim(ContentLink.decode(link))
        return Response(content=blob, media_type="application/octet-stream")

    return app


class HttpPublisherTransport:
    """Publisher endpoint over HTTP with the in-process transport's surface."""

    def __init__(self, base_url: str, timeout: float = 10.0):
        self.base_url = base_url.rstrip("/")
        self._http = httpx.Client(base_url=self.base_url, timeout=timeout)

    def issue(self, claim_bytes: bytes, client: str, token: str | None = None) -> IssuanceReceipt:
        doc = claim_to_document(parse_claim(claim_bytes))
        headers = {"x-auth-token": token} if token else {}
        try:
            response = self._http.post("/issue", json=doc, headers=headers)
        except httpx.TransportError as exc:
            raise ConnectionError(str(exc)) from exc
        _raise_remote_error(response)
        return receipt_from_doc(response.json())

    def fetch(self, link: ContentLink) -> bytes:
        try:
            response = self._http.get(f"/claim/{link.render()}")
        except httpx.TransportError as exc:
            raise ConnectionError(str(exc)) from exc
        _raise_remote_error(response)
        return response.content


# ---------------------------------------------------------------------------
# ledger daemon


def build_ledger_app(ledger: Ledger, clock: SimClock) -> FastAPI:
    app = FastAPI(title="ledger service")
    _install_error_handler(app)
    handles: dict[int, TxHandle] = {}

    @app.get("/config")
    def config():
        return ledger.config.to_dict()

    @app.get("/time")
    def time_():
        return {"now": clock.now()}

    @app.post("/advance")
    def advance(body: dict = Body(...)):
        clock.advance(int(body.get("seconds", 0)))
        ledger.process()
        return {"now": clock.now()}

    @app.post("/transactions")
    def submit(body: dict = Body(...)):
        from .ledger import FileComplaint, RegisterClaims, RegisterPublisher

        kind_raw = body["kind"]
        name = kind_raw["name"]
        if name == "RegisterClaims":
            kind = RegisterClaims(tuple(
                (Topic.from_hex(t), ContentLink.decode(l)) for t, l in kind_raw["pairs"]
            ))
        elif name == "RegisterPublisher":
            kind = RegisterPublisher(kind_raw["endpoint"], kind_raw["certificate"])
        elif name == "FileComplaint":
            kind = FileComplaint(kind_raw["publisher"],
                                 ContentLink.decode(kind_raw["complaint_link"]))
        else:
            raise errors.MalformedTransaction(f"unknown kind {name!r}")
        handle = ledger.submit(body["sender"], kind, body.get("gas_price"))
        handles[handle.tx_id] = handle
        return {
            "tx_id": handle.tx_id,
            "admitted_second": handle.admitted_second,
            "confirm_at": handle.confirm_at,
        }

    @app.get("/transactions/{tx_id}")
    def status(tx_id: int):
        handle = handles.get(tx_id)
        if handle is None:
            raise NotFound(f"unknown transaction {tx_id}")
        return {"status": ledger.status(handle), "confirm_at": handle.confirm_at}

    @app.get("/topics/{topic_hex}")
    def topic_records(topic_hex: str):
        records = ledger.get_claim_links(Topic.from_hex(topic_hex))
        return [
            {"link": r.link.render(), "issuer": r.issuer, "timestamp": r.timestamp}
            for r in records
        ]

    @app.get("/links/{link}/topics")
    def link_topics(link: str):
        return ledger.topics_of_link(ContentLink.decode(link))

    @app.get("/publishers")
    def publishers():
        return [vars(e) for e in ledger.list_publishers()]

    @app.get("/publishers/{address}")
    def publisher(address: str):
        entry = ledger.get_publisher(address)
        if entry is None:
            raise NotFound(f"publisher {address} not registered")
        return vars(entry)

    @app.get("/publishers/{address}/complaints")
    def complaints(address: str):
        return ledger.complaints_for(address)

    return app


class RemoteLedger:
    """Ledger reads/submits over HTTP; same duck type as the in-process Ledger
    for everything ClaimClient and PublisherNode touch."""

    def __init__(self, base_url: str, timeout: float = 10.0):
        self._http = httpx.Client(base_url=base_url.rstrip("/"), timeout=timeout)
        try:
            response = self._http.get("/config")
        except httpx.TransportError as exc:
            raise errors.LedgerUnavailable(str(exc)) from exc
        _raise_remote_error(response)
        self.config = ChainConfig(**response.json())
        self.complaints = _RemoteComplaints(self)

    def _get(self, path: str):
        try:
            response = self._http.get(path)
        except httpx.TransportError as exc:
            raise errors.LedgerUnavailable(str(exc)) from exc
        _raise_remote_error(response)
        return response.json()

    def _submit(self, sender: str, kind: dict, gas_price: float | None = None) -> TxHandle:
        try:
            response = self._http.post(
                "/transactions",
                json={"sender": sender, "kind": kind, "gas_price": gas_price},
            )
        except httpx.TransportError as exc:
            raise errors.LedgerUnavailable(str(exc)) from exc
        _raise_remote_error(response)
        return TxHandle(**response.json())

    def register_claims(self, sender, pairs, gas_price=None) -> TxHandle:
        kind = {
            "name": "RegisterClaims",
            "pairs": [[t.hex, l.render()] for t, l in pairs],
        }
        return self._submit(sender, kind, gas_price)

    def register_publisher(self, sender, endpoint, certificate) -> TxHandle:
        return self._submit(
            sender,
            {"name": "RegisterPublisher", "endpoint": endpoint, "certificate": certificate},
        )

    def file_complaint(self, sender, publisher, complaint_link) -> TxHandle:
        return self._submit(
            sender,
            {"name": "FileComplaint", "publisher": publisher,
             "complaint_link": complaint_link.render()},
        )

    def get_claim_links(self, topic: Topic) -> list[LedgerRecord]:
        return [
            LedgerRecord(ContentLink.decode(r["link"]), r["issuer"], r["timestamp"])
            for r in self._get(f"/topics/{topic.hex}")
        ]

    def topics_of_link(self, link: ContentLink) -> list[str]:
        return self._get(f"/links/{link.render()}/topics")

    def list_publishers(self) -> list[PublisherEntry]:
        return [PublisherEntry(**e) for e in self._get("/publishers")]

    def get_publisher(self, address: str) -> PublisherEntry | None:
        try:
            return PublisherEntry(**self._get(f"/publishers/{address}"))
        except NotFound:
            return None

    def complaints_for(self, address: str) -> list[str]:
        return self._get(f"/publishers/{address}/complaints")

    def status(self, handle: TxHandle) -> str:
        return self._get(f"/transactions/{handle.tx_id}")["status"]

    def advance(self, seconds: int) -> int:
        try:
            response = self._http.post("/advance", json={"seconds": seconds})
        except httpx.TransportError as exc:
            raise errors.LedgerUnavailable(str(exc)) from exc
        _raise_remote_error(response)
        return response.json()["now"]

    def now(self) -> int:
        return self._get("/time")["now"]

    def process(self) -> int:
        return 0  # confirmations happen server-side


class _RemoteComplaints:
    """dict-like read view used by recovery heuristics."""

    def __init__(self, ledger: RemoteLedger):
        self._ledger = ledger

    def get(self, address: str, default=None):
        try:
            return self._ledger.complaints_for(address)
        except WebClaimsError:
            return default


class RemoteClock:
    """Clock slaved to a ledger daemon's simulated time."""

    def __init__(self, ledger: RemoteLedger):
        self._ledger = ledger

    def now(self) -> int:
        return self._ledger.now()

    def advance(self, seconds: int) -> int:
        return self._ledger.advance(int(seconds))


class RemoteStore:
    """Local blob dir plus publisher fetches; quacks like StoreNetwork for
    the operations ClaimClient performs."""

    def __init__(self, node_id: str, ledger: RemoteLedger,
                 blob_dir: str | None = None, timeout: float = 10.0):
        self.node_id = node_id
        self.ledger = ledger
        self.blobs: dict[str, bytes] = {}
        self.blob_dir = blob_dir
        self._timeout = timeout
        if blob_dir:
            import os

            os.makedirs(blob_dir, exist_ok=True)
            for name in os.listdir(blob_dir):
                with open(os.path.join(blob_dir, name), "rb") as fh:
                    self.blobs[name] = fh.read()

    def add_node(self, node_id: str, capacity_bytes: int | None = None):
        return None

    def put(self, node_id: str, content: bytes) -> ContentLink:
        link = link_for(content)
        key = link.render()
        self.blobs[key] = content
        if self.blob_dir:
            import os

            with open(os.path.join(self.blob_dir, key), "wb") as fh:
                fh.write(content)
        return link

    def pin(self, node_id: str, link: ContentLink, duration: int | None) -> None:
        return None

    def get(self, link: ContentLink, via: str | None = None,
            exclude: set[str] = frozenset(), allow: set[str] | None = None) -> bytes:
        key = link.render()
        local_ok = self.node_id not in exclude and (allow is None or self.node_id in allow)
        if local_ok and key in self.blobs and matches(link, self.blobs[key]):
            return self.blobs[key]
        saw_corrupt = False
        for entry in self.ledger.list_publishers():
            if entry.address in exclude:
                continue
            if allow is not None and entry.address not in allow:
                continue
            transport = HttpPublisherTransport(entry.endpoint, timeout=self._timeout)
            try:
                blob = transport.fetch(link)
            except (ConnectionError, WebClaimsError):
                continue
            if not matches(link, blob):
                saw_corrupt = True
                continue
            if local_ok:
                self.blobs[key] = blob
            return blob
        if saw_corrupt:
            raise IntegrityViolation(f"only corrupt copies of {key} were served")
        raise NotFound(f"no reachable publisher serves {key}")

    def sweep(self) -> int:
        return 0


# ---------------------------------------------------------------------------
# serving helper


class ServerThread:
    """uvicorn in a daemon thread; used by the CLI and integration tests."""

    def __init__(self, app: FastAPI, host: str = "127.0.0.1", port: int = 8000):
        self.config = uvicorn.Config(app, host=host, port=port, log_level="warning")
        self.server = uvicorn.Server(self.config)
        self.thread = threading.Thread(target=self.server.run, daemon=True)

    def start(self, timeout: float = 10.0) -> None:
        import time as _time

        self.thread.start()
        deadline = _time.monotonic() + timeout
        while not self.server.started:
            if _time.monotonic() > deadline:
                raise RuntimeError("server failed to start")
            _time.sleep(0.02)

    def stop(self) -> None:
        self.server.should_exit = True
        self.thread.join(timeout=5)

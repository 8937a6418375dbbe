"""Command-line front end.

Two ways to run against a ledger, exactly one of which must be selected:
  --state DIR   embedded simulation persisted in a state directory
                (zero daemons; `init` creates it)
  --ledger URL  a ledger daemon started with `webclaims ledger-run`,
                with publishers reached over HTTP

Every command supports `--format json-lines` for scripting: one JSON record
per output line. Exit codes: 1 domain error, 2 I/O error, 3 ledger
unavailable, 4 invariant violation.
"""

from __future__ import annotations

import json
import os
import sys

import click

from .claims import (
    ClaimUid,
    Identity,
    claim_to_document,
    load_identity,
    save_identity,
    topic_of,
)
from .client import ClaimClient, Whitelist
from .costs import ActivityStats, CostParams, summarize
from .errors import (
    InvariantViolation,
    LedgerUnavailable,
    WebClaimsError,
)
from .ledger import ChainConfig, Ledger
from .netsim import ScenarioConfig, run as run_scenario
from .publisher import PublisherConfig, PublisherNode
from .receipts import receipt_from_doc, receipt_to_doc
from .simenv import PublisherSpec, SimEnvironment
from .store import ReplicationPolicy, StoreNetwork


class CliError(WebClaimsError):
    def __init__(self, message: str, exit_code: int = 1):
        super().__init__(message)
        self.exit_code = exit_code


def _fail(message: str, code: int) -> CliError:
    return CliError(message, code)


def _emit(records: list[dict], fmt: str, text_lines: list[str]) -> None:
    if fmt == "json-lines":
        for record in records:
            click.echo(json.dumps(record, sort_keys=True))
    else:
        for line in text_lines:
            click.echo(line)


def _load_key(key_path: str | None) -> Identity:
    if not key_path:
        raise _fail("a key file is required (--key; create one with keygen)", 2)
    if not os.path.exists(key_path):
        raise _fail(f"key file not found: {key_path}", 2)
    return load_identity(key_path)


def _load_whitelist(path: str | None, default: set[str]) -> Whitelist:
    if path and os.path.exists(path):
        return Whitelist.load(path)
    return Whitelist(set(default))


class Backend:
    """Resolves the ledger mode and builds a wired ClaimClient."""

    def __init__(self, state_dir: str | None, ledger_url: str | None):
        if bool(state_dir) == bool(ledger_url):
            raise _fail("select exactly one ledger mode: --state DIR or --ledger URL", 2)
        self.state_dir = state_dir
        self.ledger_url = ledger_url
        self.env: SimEnvironment | None = None
        if state_dir:
            try:
                self.env = SimEnvironment.load(state_dir)
            except WebClaimsError as exc:
                raise _fail(str(exc), 2) from exc

    def client(self, identity: Identity, whitelist: Whitelist) -> ClaimClient:
        if self.env is not None:
            return self.env.client_for(identity, whitelist)
        from .service import (
            HttpPublisherTransport,
            RemoteClock,
            RemoteLedger,
            RemoteStore,
        )

        ledger = RemoteLedger(self.ledger_url)
        clock = RemoteClock(ledger)
        blob_dir = os.path.join(
            os.environ.get("WEBCLAIMS_HOME", os.path.expanduser("~/.webclaims")),
            "blobs", identity.address,
        )
        store = RemoteStore(identity.address, ledger, blob_dir=blob_dir)
        client = ClaimClient(identity, ledger, store, clock, whitelist=whitelist)
        for entry in ledger.list_publishers():
            client.publisher_transports[entry.address] = HttpPublisherTransport(
                entry.endpoint
            )
        return client

    def save(self, client: ClaimClient) -> None:
        if self.env is not None:
            self.env.persist_client(client)
            self.env.save(self.state_dir)

    def tick(self, seconds: int) -> int:
        if self.env is not None:
            now = self.env.tick(seconds)
            self.env.save(self.state_dir)
            return now
        from .service import RemoteLedger

        return RemoteLedger(self.ledger_url).advance(seconds)


def _record_dict(record) -> dict:
    return {
        "link": record.link.render(),
        "issuer": record.issuer,
        "timestamp": record.timestamp,
    }


@click.group()
def main():
    """Censorship-resistant web annotations over content-addressed storage
    and a simulated fee-charging ledger."""


@main.command()
@click.option("--out", "out_path", required=True, type=click.Path())
def keygen(out_path):
    """Generate an identity key file (hex seed, owner-readable only)."""
    identity = Identity.generate()
    save_identity(identity, out_path)
    click.echo(f"address {identity.address}")
    click.echo(f"key written to {out_path}")


@main.command()
@click.option("--state", "state_dir", required=True, type=click.Path())
@click.option("--demo", is_flag=True, help="include a misbehaving publisher")
def init(state_dir, demo):
    """Create an embedded-simulation state directory."""
    if os.path.exists(os.path.join(state_dir, "state.json")):
        raise _fail(f"{state_dir} already holds embedded state", 2)
    if demo:
        env = SimEnvironment.demo()
    else:
        env = SimEnvironment.create(
            specs=[
                PublisherSpec(seed_hex="61" * 32, endpoint="local.publisher",
                              threshold=1, max_wait=60, deadline_margin=30)
            ],
            chain=ChainConfig(confirmation_delay=15),
        )
    env.save(state_dir)
    click.echo(f"embedded world written to {state_dir}")
    for entry in env.publisher_summary():
        click.echo(f"publisher {entry['address']} ({entry['endpoint']})")


@main.command()
@click.argument("url")
@click.option("--text", default=None)
@click.option("--verdict", type=click.Choice(["true", "false"]), default=None)
@click.option("--publisher", "publisher_addr", default=None)
@click.option("--direct", is_flag=True)
@click.option("--key", "key_path", type=click.Path())
@click.option("--state", "state_dir", type=click.Path(), default=None)
@click.option("--ledger", "ledger_url", default=None)
@click.option("--whitelist", "whitelist_path", type=click.Path(), default=None)
@click.option("--receipt-out", type=click.Path(), default=None,
              help="write the issuance receipt document to this file")
@click.option("--format", "fmt", type=click.Choice(["text", "json-lines"]),
              default="text")
def annotate(url, text, verdict, publisher_addr, direct, key_path, state_dir,
             ledger_url, whitelist_path, receipt_out, fmt):
    """Create and issue an annotation (a comment or a true/false verdict)."""
    identity = _load_key(key_path)
    backend = Backend(state_dir, ledger_url)
    client = backend.client(identity, _load_whitelist(whitelist_path, {identity.address}))
    claim = client.create_annotation(url, text=text, verdict=verdict)
    if direct:
        record = client.issue_direct(claim)
        backend.save(client)
        fee = client.ledger.config.single_claim_fee_usd()
        _emit(
            [{"claim": claim_to_document(claim), "record": _record_dict(record),
              "fee_usd": fee}],
            fmt,
            [f"registered {record.link.render()}",
             f"issuer {record.issuer} at t={record.timestamp}",
             f"fee {fee:.6f} USD"],
        )
        return
    target = publisher_addr or _default_publisher(client)
    receipt = client.issue_via_publisher(claim, target)
    backend.save(client)
    doc = receipt_to_doc(receipt)
    if receipt_out:
        with open(receipt_out, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
    _emit(
        [{"claim": claim_to_document(claim), "receipt": doc}],
        fmt,
        [f"claim {claim.uid().hex}",
         f"receipt from {receipt.publisher}",
         f"promised under topic {receipt.topic.hex[:16]}… by t={receipt.deadline}"]
        + ([f"receipt written to {receipt_out}"] if receipt_out else []),
    )


def _default_publisher(client: ClaimClient) -> str:
    entries = client.ledger.list_publishers()
    if not entries:
        raise _fail("no publishers registered; use --direct", 1)
    return entries[0].address


@main.command()
@click.argument("url")
@click.option("--all", "show_all", is_flag=True,
              help="include filtered/revoked/failed claims")
@click.option("--key", "key_path", type=click.Path(), default=None)
@click.option("--state", "state_dir", type=click.Path(), default=None)
@click.option("--ledger", "ledger_url", default=None)
@click.option("--whitelist", "whitelist_path", type=click.Path(), default=None)
@click.option("--format", "fmt", type=click.Choice(["text", "json-lines"]),
              default="text")
def view(url, show_all, key_path, state_dir, ledger_url, whitelist_path, fmt):
    """List verified annotations for a page, in ledger order."""
    identity = load_identity(key_path) if key_path and os.path.exists(key_path) \
        else Identity(bytes([0x7F]) * 32)  # viewing needs no persistent identity
    backend = Backend(state_dir, ledger_url)
    whitelist = _load_whitelist(whitelist_path, _all_creators(backend, identity))
    client = backend.client(identity, whitelist)
    results = client.verify_topic(url)
    records = []
    lines = []
    shown = 0
    for item in results:
        if not show_all and item.verdict != "accepted":
            continue
        shown += 1
        body = ""
        creator = item.record.issuer
        if item.claim is not None:
            doc = item.claim.payload_doc()
            creator = item.claim.creator_id
            body = doc.get("body", {}).get("value", "") if isinstance(
                doc.get("body"), dict) else ""
        records.append({
            "verdict": item.verdict,
            "creator": creator,
            "body": body,
            "record": _record_dict(item.record),
        })
        lines.append(f"[{item.verdict}] {creator} t={item.record.timestamp} {body!r}")
    if not lines:
        lines = ["no claims"]
    _emit(records, fmt, lines)


def _all_creators(backend: Backend, identity: Identity) -> set[str]:
    # viewing default: trust own claims; a real deployment would ship a curated list
    default = {identity.address}
    if backend.env is not None:
        default |= set(backend.env.receipts.keys())
        default |= set(backend.env.seqs.keys())
    return default


@main.command()
@click.argument("uid_hex")
@click.option("--topic-url", default=None,
              help="target page, required when the claim is not in this client's log")
@click.option("--publisher", "publisher_addr", default=None)
@click.option("--direct", is_flag=True)
@click.option("--key", "key_path", type=click.Path())
@click.option("--state", "state_dir", type=click.Path(), default=None)
@click.option("--ledger", "ledger_url", default=None)
@click.option("--format", "fmt", type=click.Choice(["text", "json-lines"]),
              default="text")
def revoke(uid_hex, topic_url, publisher_addr, direct, key_path, state_dir,
           ledger_url, fmt):
    """Issue a revocation for one of your claims."""
    identity = _load_key(key_path)
    backend = Backend(state_dir, ledger_url)
    client = backend.client(identity, Whitelist({identity.address}))
    topic = topic_of(topic_url) if topic_url else None
    if direct:
        revocation, record = client.revoke(ClaimUid.from_hex(uid_hex), topic=topic)
        backend.save(client)
        _emit([{"claim": claim_to_document(revocation), "record": _record_dict(record)}],
              fmt, [f"revocation registered: {record.link.render()}"])
    else:
        target = publisher_addr or _default_publisher(client)
        revocation, receipt = client.revoke(ClaimUid.from_hex(uid_hex), topic=topic,
                                            publisher=target)
        backend.save(client)
        _emit([{"claim": claim_to_document(revocation),
                "receipt": receipt_to_doc(receipt)}],
              fmt, [f"revocation receipt from {receipt.publisher}, "
                    f"deadline t={receipt.deadline}"])


@main.command()
@click.option("--key", "key_path", type=click.Path())
@click.option("--state", "state_dir", type=click.Path(), default=None)
@click.option("--ledger", "ledger_url", default=None)
@click.option("--format", "fmt", type=click.Choice(["text", "json-lines"]),
              default="text")
def receipts(key_path, state_dir, ledger_url, fmt):
    """List receipts this identity holds, with their audit status."""
    identity = _load_key(key_path)
    backend = Backend(state_dir, ledger_url)
    client = backend.client(identity, Whitelist({identity.address}))
    records = [
        {
            "receipt": receipt_to_doc(rec.receipt),
            "status": rec.status,
            "claim_uid": rec.claim_uid,
            "target_url": rec.target_url,
        }
        for rec in client.receipts
    ]
    lines = [
        f"{rec.receipt.request_digest.hex()[:16]}… publisher {rec.receipt.publisher} "
        f"deadline t={rec.receipt.deadline} [{rec.status}]"
        for rec in client.receipts
    ] or ["no receipts"]
    _emit(records, fmt, lines)


@main.command()
@click.argument("receipt_path", type=click.Path(exists=True))
@click.option("--key", "key_path", type=click.Path())
@click.option("--state", "state_dir", type=click.Path(), default=None)
@click.option("--ledger", "ledger_url", default=None)
@click.option("--format", "fmt", type=click.Choice(["text", "json-lines"]),
              default="text")
def audit(receipt_path, key_path, state_dir, ledger_url, fmt):
    """Audit a receipt after its deadline: was the promise kept?"""
    identity = _load_key(key_path)
    backend = Backend(state_dir, ledger_url)
    client = backend.client(identity, Whitelist({identity.address}))
    with open(receipt_path, "r", encoding="utf-8") as fh:
        receipt = receipt_from_doc(json.load(fh))
    result = client.audit_receipt(receipt)
    backend.save(client)
    _emit([{"result": result.value, "publisher": receipt.publisher}],
          fmt, [result.value])


@main.command()
@click.argument("receipt_path", type=click.Path(exists=True))
@click.option("--key", "key_path", type=click.Path())
@click.option("--state", "state_dir", type=click.Path(), default=None)
@click.option("--ledger", "ledger_url", default=None)
@click.option("--format", "fmt", type=click.Choice(["text", "json-lines"]),
              default="text")
def complain(receipt_path, key_path, state_dir, ledger_url, fmt):
    """Audit a receipt and file a complaint if the promise was broken."""
    identity = _load_key(key_path)
    backend = Backend(state_dir, ledger_url)
    client = backend.client(identity, Whitelist({identity.address}))
    with open(receipt_path, "r", encoding="utf-8") as fh:
        receipt = receipt_from_doc(json.load(fh))
    result = client.audit_receipt(receipt)
    complaint, handle = client.file_complaint(receipt, result)  # raises if ok
    backend.tick(client.ledger.config.confirmation_delay)
    backend.save(client)
    _emit(
        [{"fault": result.value, "publisher": receipt.publisher,
          "complaint_uid": complaint.uid().hex, "confirmed_at": handle.confirm_at}],
        fmt,
        [f"fault {result.value}; complaint filed against {receipt.publisher}"],
    )


@main.command()
@click.argument("seconds", type=int)
@click.option("--state", "state_dir", type=click.Path(), default=None)
@click.option("--ledger", "ledger_url", default=None)
def tick(seconds, state_dir, ledger_url):
    """Advance simulated time (confirmations, batch timeouts, pin expiry)."""
    backend = Backend(state_dir, ledger_url)
    now = backend.tick(seconds)
    click.echo(f"t={now}")


@main.command()
@click.option("--state", "state_dir", type=click.Path(), default=None)
@click.option("--ledger", "ledger_url", default=None)
@click.option("--format", "fmt", type=click.Choice(["text", "json-lines"]),
              default="text")
def publishers(state_dir, ledger_url, fmt):
    """List registered publishers and their complaint counts."""
    backend = Backend(state_dir, ledger_url)
    if backend.env is not None:
        entries = backend.env.publisher_summary()
    else:
        from .service import RemoteLedger

        ledger = RemoteLedger(ledger_url)
        entries = [
            {"address": e.address, "endpoint": e.endpoint, "status": e.status,
             "complaints": len(ledger.complaints_for(e.address))}
            for e in ledger.list_publishers()
        ]
    _emit(entries, fmt, [
        f"{e['address']} {e['endpoint']} [{e['status']}] complaints={e['complaints']}"
        for e in entries
    ] or ["no publishers"])


@main.group()
def whitelist():
    """Manage the creator whitelist file."""


@whitelist.command("show")
@click.option("--file", "path", required=True, type=click.Path())
def whitelist_show(path):
    wl = Whitelist.load(path) if os.path.exists(path) else Whitelist()
    for address in sorted(wl.allowed_creators):
        click.echo(address)


@whitelist.command("add")
@click.argument("address")
@click.option("--file", "path", required=True, type=click.Path())
def whitelist_add(address, path):
    wl = Whitelist.load(path) if os.path.exists(path) else Whitelist()
    wl.add(address)
    wl.save(path)
    click.echo(f"{len(wl.allowed_creators)} creators whitelisted")


@whitelist.command("remove")
@click.argument("address")
@click.option("--file", "path", required=True, type=click.Path())
def whitelist_remove(address, path):
    wl = Whitelist.load(path) if os.path.exists(path) else Whitelist()
    wl.remove(address)
    wl.save(path)
    click.echo(f"{len(wl.allowed_creators)} creators whitelisted")


@main.command()
@click.option("--params", "params_path", type=click.Path(), default=None)
@click.option("--format", "fmt", type=click.Choice(["text", "json-lines"]),
              default="text")
def costs(params_path, fmt):
    """Annual publisher operating costs for one big news outlet."""
    params = CostParams.from_file(params_path) if params_path else CostParams()
    report = summarize(ActivityStats(), params)
    if fmt == "json-lines":
        payload = {key: value for key, value in vars(report).items() if key != "notes"}
        payload["notes"] = list(report.notes)
        click.echo(json.dumps(payload, sort_keys=True))
        return
    width = max(len(label) for label, _ in report.rows())
    for label, value in report.rows():
        click.echo(f"{label:<{width}}  {value}")
    click.echo("")
    for note in report.notes:
        click.echo(f"note: {note}")


@main.command(name="sim-run")
@click.argument("scenario_path", type=click.Path(exists=True))
@click.option("--csv", "csv_path", type=click.Path(), default=None)
@click.option("--quiet", is_flag=True)
def sim_run(scenario_path, csv_path, quiet):
    """Run a scenario file; exits 4 on an invariant violation."""
    config = ScenarioConfig.from_file(scenario_path)
    if not quiet:
        click.echo(
            f"running scenario: {config.n_clients} clients, "
            f"{config.n_publishers} publishers, {config.duration}s", err=True)
    report = run_scenario(config)
    if csv_path:
        with open(csv_path, "w", encoding="utf-8") as fh:
            fh.write(report.to_csv())
        if not quiet:
            click.echo(f"metrics written to {csv_path}", err=True)
    click.echo(report.summary())


@main.command()
@click.option("--state", "state_dir", type=click.Path(), default=None)
@click.option("--demo", is_flag=True, help="fresh in-memory demo world")
@click.option("--key", "key_path", type=click.Path(), default=None)
@click.option("--whitelist", "whitelist_path", type=click.Path(), default=None)
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8701)
def serve(state_dir, demo, key_path, whitelist_path, host, port):
    """Run the local client HTTP service (the browser UI's backend)."""
    import uvicorn

    from .service import ClientService, build_client_app

    if bool(state_dir) == bool(demo):
        raise _fail("select exactly one of --state DIR or --demo", 2)
    env = SimEnvironment.demo() if demo else SimEnvironment.load(state_dir)
    identity = load_identity(key_path) if key_path else Identity.generate()
    service = ClientService(env, identity, whitelist_path=whitelist_path,
                            state_dir=state_dir)
    app = build_client_app(service)
    click.echo(f"client {identity.address} listening on http://{host}:{port}", err=True)
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command(name="publisher-run")
@click.argument("config_path", type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8702)
def publisher_run(config_path, host, port):
    """Run a publisher daemon against a ledger daemon (see ledger-run)."""
    import threading
    import time as _time

    import uvicorn

    from .service import RemoteClock, RemoteLedger, build_publisher_app

    with open(config_path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    identity = (load_identity(raw["key_path"]) if "key_path" in raw
                else Identity(bytes.fromhex(raw["seed_hex"])))
    ledger = RemoteLedger(raw["ledger_url"])
    clock = RemoteClock(ledger)
    store = StoreNetwork(clock)
    node = PublisherNode(
        PublisherConfig(
            identity=identity,
            endpoint=raw.get("endpoint", f"http://{host}:{port}"),
            threshold=raw.get("threshold", 100),
            max_wait=raw.get("max_wait", 1800),
            replication=ReplicationPolicy(raw.get("copies", 3)),
            pin_duration=raw.get("pin_duration", 30 * 24 * 3600),
            auth_mode=raw.get("auth_mode", "open"),
            rate_limit=raw.get("rate_limit", 50),
            deadline_margin=raw.get("deadline_margin", 1500),
        ),
        ledger, store, clock,
    )
    try:
        node.register_self()
    except WebClaimsError as exc:
        click.echo(f"registration: {exc}", err=True)  # restart of a known publisher

    def housekeeping():
        while True:
            _time.sleep(0.5)
            try:
                node.tick()
                store.sweep()
            except WebClaimsError:
                pass  # ledger outage: tick retries later

    threading.Thread(target=housekeeping, daemon=True).start()
    app = build_publisher_app(node)
    click.echo(f"publisher {node.address} listening on http://{host}:{port}", err=True)
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command(name="ledger-run")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8703)
@click.option("--auto-tick", is_flag=True,
              help="advance simulated time with wall-clock seconds")
def ledger_run(config_path, host, port, auto_tick):
    """Run the shared ledger daemon."""
    import threading
    import time as _time

    import uvicorn

    from .clock import SimClock
    from .service import build_ledger_app

    config = ChainConfig.from_file(config_path) if config_path else ChainConfig()
    clock = SimClock()
    ledger = Ledger(config, clock)
    if auto_tick:
        def ticker():
            while True:
                _time.sleep(1.0)
                clock.advance(1)
                ledger.process()

        threading.Thread(target=ticker, daemon=True).start()
    app = build_ledger_app(ledger, clock)
    click.echo(f"ledger listening on http://{host}:{port}", err=True)
    uvicorn.run(app, host=host, port=port, log_level="warning")


def run_main() -> int:
    try:
        main.main(standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return 2
    except CliError as exc:
        click.echo(f"error: {exc}", err=True)
        return exc.exit_code
    except InvariantViolation as exc:
        click.echo(f"invariant violation: {exc}", err=True)
        return 4
    except LedgerUnavailable as exc:
        click.echo(f"ledger unavailable: {exc}", err=True)
        return 3
    except FileNotFoundError as exc:
        click.echo(f"missing file: {exc}", err=True)
        return 2
    except WebClaimsError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1


def entrypoint():  # console-script shim
    sys.exit(run_main())


if __name__ == "__main__":
    entrypoint()

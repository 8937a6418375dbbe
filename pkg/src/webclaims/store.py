"""Content-addressed claim storage across simulated nodes.

Plays the distributed-file-system role: blobs are addressed by
self-describing hash links, reads verify integrity against the link,
any single online holder makes content retrievable network-wide, and
nodes keep local caches of what they fetched.

Rendered link format (fixed): ``b16-<fn_id>-<digest_len>-<hex digest>``
where fn_id and digest_len are decimal (default fn 22 = SHA-3-256, 32
bytes). Decoding a rendered link recovers the triple exactly.

Provider resolution uses a global in-process index instead of a DHT;
routing is orthogonal to every property exercised here.
"""

from __future__ import annotations

import os
import threading
from collections import OrderedDict
from dataclasses import dataclass

from .claims import sha3_256
from .clock import SimClock
from .errors import IntegrityViolation, MalformedClaim, NodeOffline, NotFound

HASH_FN_SHA3_256 = 22  # 0x16
_HASHERS = {HASH_FN_SHA3_256: sha3_256}


@dataclass(frozen=True)
class ContentLink:
    """Self-describing content hash: function id, digest length, digest."""

    hash_fn_id: int
    digest_len: int
    digest: bytes

    def render(self) -> str:
        return f"b16-{self.hash_fn_id}-{self.digest_len}-{self.digest.hex()}"

    @classmethod
    def decode(cls, text: str) -> "ContentLink":
        try:
            base, fn_id, digest_len, digest_hex = text.split("-")
            if base != "b16":
                raise ValueError(f"unknown link base {base!r}")
            link = cls(int(fn_id), int(digest_len), bytes.fromhex(digest_hex))
        except ValueError as exc:
            raise MalformedClaim(f"bad content link {text!r}: {exc}") from exc
        if len(link.digest) != link.digest_len:
            raise MalformedClaim(f"digest length mismatch in link {text!r}")
        return link

    def __repr__(self) -> str:
        return f"ContentLink({self.render()[:24]}…)"


def link_for(content: bytes, hash_fn_id: int = HASH_FN_SHA3_256) -> ContentLink:
    digest = _HASHERS[hash_fn_id](content)
    return ContentLink(hash_fn_id, len(digest), digest)


def matches(link: ContentLink, content: bytes) -> bool:
    hasher = _HASHERS.get(link.hash_fn_id)
    return hasher is not None and hasher(content) == link.digest


@dataclass
class ReplicationPolicy:
    """How many total copies a publisher places (itself included)."""

    copies: int = 3

    def __post_init__(self):
        if self.copies < 1:
            raise ValueError("replication policy needs at least one copy")


class StoreNode:
    """One storage node: blob map, pins with expiry, LRU cache accounting.

    capacity_bytes bounds unpinned cache content; pinned blobs are never
    evicted before their expiry. A byzantine node serves corrupted bytes
    to readers while keeping its stored copy intact.
    """

    def __init__(self, node_id: str, capacity_bytes: int | None = None):
        self.node_id = node_id
        self.online = True
        self.byzantine = False
        self.capacity_bytes = capacity_bytes
        self.blobs: dict[str, bytes] = {}
        self.pins: dict[str, int | None] = {}  # rendered link -> expiry (None = forever)
        self._lru: OrderedDict[str, None] = OrderedDict()
        self.bytes_used = 0
        self._lock = threading.Lock()

    def holds(self, key: str) -> bool:
        return key in self.blobs

    def serve(self, key: str) -> bytes | None:
        """Raw read as seen by the network; byzantine nodes corrupt it."""
        blob = self.blobs.get(key)
        if blob is None:
            return None
        if self.byzantine and blob:
            return bytes([blob[0] ^ 0xFF]) + blob[1:]
        return blob

    def _touch(self, key: str) -> None:
        if key in self._lru:
            self._lru.move_to_end(key)

    def _store(self, key: str, content: bytes, exempt: str | None = None) -> None:
        with self._lock:
            if key not in self.blobs:
                self.blobs[key] = content
                self.bytes_used += len(content)
            self._lru[key] = None
            self._lru.move_to_end(key)
            self._evict_over_capacity(exempt=exempt or key)

    def _drop(self, key: str) -> None:
        blob = self.blobs.pop(key, None)
        if blob is not None:
            self.bytes_used -= len(blob)
        self._lru.pop(key, None)
        self.pins.pop(key, None)

    def _evict_over_capacity(self, exempt: str) -> None:
        if self.capacity_bytes is None:
            return
        for key in list(self._lru):
            if self.bytes_used <= self.capacity_bytes:
                break
            if key == exempt or key in self.pins:
                continue
            self._drop(key)

    def expired_pins(self, now: int) -> list[str]:
        return [k for k, exp in self.pins.items() if exp is not None and exp < now]


class StoreStats:
    def __init__(self):
        self.local_hits = 0
        self.remote_fetches = 0
        self.integrity_rejections = 0

    def as_dict(self) -> dict:
        return {
            "local_hits": self.local_hits,
            "remote_fetches": self.remote_fetches,
            "integrity_rejections": self.integrity_rejections,
        }


class StoreNetwork:
    """The set of store nodes plus the global provider index."""

    def __init__(self, clock: SimClock | None = None):
        self.clock = clock or SimClock()
        self.nodes: dict[str, StoreNode] = {}
        self.providers: dict[str, set[str]] = {}
        self.stats = StoreStats()
        self._lock = threading.Lock()

    # -- membership -----------------------------------------------------

    def add_node(self, node_id: str, capacity_bytes: int | None = None) -> StoreNode:
        if node_id in self.nodes:
            return self.nodes[node_id]
        node = StoreNode(node_id, capacity_bytes)
        self.nodes[node_id] = node
        return node

    def node(self, node_id: str) -> StoreNode:
        return self.nodes[node_id]

    def set_online(self, node_id: str, online: bool) -> None:
        self.nodes[node_id].online = online

    # -- core operations --------------------------------------------------

    def put(self, node_id: str, content: bytes) -> ContentLink:
        """Store content on one node; idempotent, link depends only on bytes."""
        node = self.nodes[node_id]
        if not node.online:
            raise NodeOffline(node_id)
        link = link_for(content)
        key = link.render()
        node._store(key, content)
        with self._lock:
            self.providers.setdefault(key, set()).add(node_id)
        return link

    def get(
        self,
        link: ContentLink,
        via: str | None = None,
        exclude: set[str] | frozenset[str] = frozenset(),
        allow: set[str] | None = None,
    ) -> bytes:
        """Verified read: never returns bytes whose digest mismatches the link.

        Serves from `via`'s local blob when possible, otherwise fetches from
        any online holder (skipping `exclude`; restricted to `allow` when
        given) and caches the copy at `via`. Corrupted responses are filtered
        and the next holder is tried.
        """
        key = link.render()

        if via is not None and (allow is None or via in allow):
            local = self.nodes[via]
            if local.online and local.holds(key) and via not in exclude:
                blob = local.blobs[key]
                if matches(link, blob):
                    local._touch(key)
                    self.stats.local_hits += 1
                    return blob
                local._drop(key)  # corrupted local copy: refetch below

        holders = self.providers.get(key, set())
        any_holder = False
        for node_id in sorted(holders):
            if node_id in exclude or node_id == via:
                continue
            if allow is not None and node_id not in allow:
                continue
            node = self.nodes.get(node_id)
            if node is None or not node.online or not node.holds(key):
                continue
            any_holder = True
            blob = node.serve(key)
            if blob is None or not matches(link, blob):
                self.stats.integrity_rejections += 1
                continue
            self.stats.remote_fetches += 1
            if via is not None and self.nodes[via].online:
                self.nodes[via]._store(key, blob)
                with self._lock:
                    self.providers.setdefault(key, set()).add(via)
            return blob

        if any_holder:
            raise IntegrityViolation(f"all holders returned corrupt bytes for {key}")
        raise NotFound(f"no online node holds {key}")

    def pin(self, node_id: str, link: ContentLink, duration: int | None) -> None:
        """Promise to hold the content at least `duration` seconds (None: forever)."""
        node = self.nodes[node_id]
        if not node.online:
            raise NodeOffline(node_id)
        key = link.render()
        if not node.holds(key):
            self.get(link, via=node_id)  # raises NotFound if nowhere
        expiry = None if duration is None else self.clock.now() + int(duration)
        if key in node.pins:
            existing = node.pins[key]
            # extending: keep the later expiry; None (forever) wins
            if existing is None or expiry is None:
                node.pins[key] = None
            else:
                node.pins[key] = max(existing, expiry)
        else:
            node.pins[key] = expiry

    def unpin(self, node_id: str, link: ContentLink) -> None:
        self.nodes[node_id].pins.pop(link.render(), None)

    def sweep(self) -> int:
        """Drop blobs whose pin promise expired; returns number dropped."""
        now = self.clock.now()
        dropped = 0
        for node in self.nodes.values():
            for key in node.expired_pins(now):
                node._drop(key)
                with self._lock:
                    held = self.providers.get(key)
                    if held is not None:
                        held.discard(node.node_id)
                dropped += 1
        return dropped

    # -- persistence ------------------------------------------------------

    def dump_blobs(self, node_id: str, directory: str) -> int:
        """Write one file per blob, named by rendered link."""
        os.makedirs(directory, exist_ok=True)
        node = self.nodes[node_id]
        for key, blob in node.blobs.items():
            with open(os.path.join(directory, key), "wb") as fh:
                fh.write(blob)
        return len(node.blobs)

    def restore_blobs(self, node_id: str, directory: str) -> int:
        node = self.add_node(node_id)
        count = 0
        if not os.path.isdir(directory):
            return 0
        for name in sorted(os.listdir(directory)):
            link = ContentLink.decode(name)
            with open(os.path.join(directory, name), "rb") as fh:
                blob = fh.read()
            if not matches(link, blob):
                raise IntegrityViolation(f"blob file {name} does not match its name")
            node._store(name, blob)
            with self._lock:
                self.providers.setdefault(name, set()).add(node_id)
            count += 1
        return count

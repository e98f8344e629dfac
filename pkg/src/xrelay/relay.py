"""Relay node state machine and forwarding protocols.

A relay receives signed envelopes, gates them (rate limit, replay,
ring signature over the packet bytes, layer decryption), peels one
onion layer, and acts per its forwarding protocol: forward to the
successor(s) the onion names, or submit the terminal payload to the
destination chain. Every handled envelope leaves an entry in the
node's hash-chained audit log; the log holds digests only, never
payload or identity plaintext.

Protocol randomness (stem length, diffusion fan-out, proxy walks) is
drawn when the originating contract samples the path and builds the
onion, one layer per realized hop; the per-hop step functions execute
that realized structure. The path samplers in this module embody the
protocol distributions and are what the contract calls.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence, Union

from .crypto.aead import AuthenticationFailure, EncryptionKeyPair, HybridCiphertext
from .crypto.encoding import _prefixed
from .crypto.group import DEFAULT_GROUP, SchnorrGroup
from .crypto.onion import Forward, OnionPacket, Terminal, encode_packet, onion_peel
from .crypto.ring import RingKeyPair, RingSignature, ring_sign, ring_verify
from .pki import AuditLog, Certificate, EventKind, append_log
from .wire import decode_terminal_payload

DEFAULT_STEM_CONTINUE_PROB = 0.9
DEFAULT_FANOUT = 2
DEFAULT_PROXY_CONTINUE_PROB = 0.8
DEFAULT_MAX_PATH_DEPTH = 20


class NoPeersAvailable(Exception):
    pass


class UncertifiedPeer(Exception):
    pass


class ProtocolKind(str, Enum):
    DANDELION_PP = "dandelion"
    CLOVER = "clover"
    SHORTEST_PING = "shortest_ping"


class PhaseTag(str, Enum):
    STEM = "STEM"
    FLUFF = "FLUFF"
    DIFFUSION = "DIFFUSION"
    PROXY = "PROXY"
    DIRECT = "DIRECT"


class RejectReason(str, Enum):
    INVALID_SIGNATURE = "INVALID_SIGNATURE"
    RATE_LIMITED = "RATE_LIMITED"
    AUTH_FAILURE = "AUTH_FAILURE"
    DUPLICATE_TX = "DUPLICATE_TX"


@dataclass(frozen=True)
class ForwardingProtocol:
    variant: ProtocolKind
    stem_continue_prob: float = DEFAULT_STEM_CONTINUE_PROB
    fanout: int = DEFAULT_FANOUT
    proxy_continue_prob: float = DEFAULT_PROXY_CONTINUE_PROB
    max_path_depth: int = DEFAULT_MAX_PATH_DEPTH
    shortest_ping_hops: int = 4

    def __post_init__(self):
        if not 0.0 <= self.stem_continue_prob < 1.0:
            raise ValueError("stem_continue_prob must be in [0, 1)")
        if not 0.0 <= self.proxy_continue_prob < 1.0:
            raise ValueError("proxy_continue_prob must be in [0, 1)")
        if self.fanout < 2:
            raise ValueError("fanout must be at least 2")
        if self.max_path_depth < 1:
            raise ValueError("max_path_depth must be at least 1")

    @classmethod
    def from_config(cls, doc: dict) -> "ForwardingProtocol":
        kind = ProtocolKind(doc["protocol"])
        kwargs = {}
        for key in (
            "stem_continue_prob",
            "fanout",
            "proxy_continue_prob",
            "max_path_depth",
            "shortest_ping_hops",
        ):
            if key in doc:
                kwargs[key] = doc[key]
        return cls(variant=kind, **kwargs)

    @property
    def initial_phase(self) -> PhaseTag:
        return {
            ProtocolKind.DANDELION_PP: PhaseTag.STEM,
            ProtocolKind.CLOVER: PhaseTag.DIFFUSION,
            ProtocolKind.SHORTEST_PING: PhaseTag.DIRECT,
        }[self.variant]


@dataclass(frozen=True)
class RateLimiterConfig:
    max_requests_per_window: int = 100
    window: float = 1000.0
    enabled: bool = False

    def __post_init__(self):
        if self.window <= 0:
            raise ValueError("window must be positive")
        if self.max_requests_per_window < 1:
            raise ValueError("max_requests_per_window must be positive")


@dataclass
class _RateWindow:
    index: int = -1
    count: int = 0


@dataclass(frozen=True)
class RelayEnvelope:
    packet: OnionPacket
    hop_signature: RingSignature
    ring_snapshot: tuple[int, ...]
    phase_tag: PhaseTag
    tx_id: str


def envelope_signing_bytes(
    packet: OnionPacket,
    tx_id: str,
    phase_tag: PhaseTag,
    ring_snapshot: Sequence[int],
    group: SchnorrGroup,
) -> bytes:
    ring_digest = hashlib.sha256(
        b"".join(group.encode_element(y) for y in ring_snapshot)
    ).digest()
    return (
        encode_packet(packet)
        + _prefixed(tx_id.encode("utf-8"))
        + _prefixed(phase_tag.value.encode("ascii"))
        + ring_digest
    )


def envelope_digest(envelope: RelayEnvelope, group: SchnorrGroup) -> bytes:
    return hashlib.sha256(
        envelope_signing_bytes(
            envelope.packet,
            envelope.tx_id,
            envelope.phase_tag,
            envelope.ring_snapshot,
            group,
        )
    ).digest()


# --- actions -------------------------------------------------------------


@dataclass(frozen=True)
class ForwardTo:
    recipients: tuple[tuple[str, RelayEnvelope], ...]


@dataclass(frozen=True)
class SubmitToChain:
    origin: str
    destination: str
    body: bytes
    identity_blob: HybridCiphertext
    tx_id: str


@dataclass(frozen=True)
class Reject:
    reason: RejectReason
    tx_id: str


Action = Union[ForwardTo, SubmitToChain, Reject]


@dataclass(frozen=True)
class DirectoryEntry:
    encryption_pub: bytes
    ring_pub: int


class RelayNode:
    """Certified relay participant.

    Holds its own keys, a view of the certified directory (peers plus
    the chain contracts' signing keys), protocol configuration, a rate
    limiter, a replay filter, and an append-only audit log. Observable
    state never contains payload plaintext or decrypted identities.
    """

    def __init__(
        self,
        node_id: str,
        certificate: Certificate,
        encryption_keypair: EncryptionKeyPair,
        ring_keypair: RingKeyPair,
        protocol: ForwardingProtocol,
        rng: random.Random,
        rate_limiter: RateLimiterConfig = RateLimiterConfig(),
        group: SchnorrGroup = DEFAULT_GROUP,
        ring_size: Optional[int] = None,
    ):
        if certificate.subject_id != node_id:
            raise ValueError("certificate subject does not match node id")
        self.id = node_id
        self.certificate = certificate
        self.encryption_keypair = encryption_keypair
        self.ring_keypair = ring_keypair
        self.protocol = protocol
        self.rng = rng
        self.rate_limiter = rate_limiter
        self.group = group
        self.ring_size = ring_size
        self.audit_log = AuditLog()
        self.directory: dict[str, DirectoryEntry] = {}
        self._known_ring_pubs: set[int] = set()
        self._rate = _RateWindow()
        self._seen: set[tuple[str, bytes]] = set()

    # -- directory ---------------------------------------------------

    def update_directory(self, entries: dict[str, DirectoryEntry]) -> None:
        """Replace the certified-participant view (relays and contracts)."""
        self.directory = dict(entries)
        self._known_ring_pubs = {e.ring_pub for e in entries.values()}

    @property
    def peer_view(self) -> list[str]:
        return sorted(
            rid for rid in self.directory if rid != self.id and not rid.startswith("chain:")
        )

    # -- gates -------------------------------------------------------

    def _rate_limit_ok(self, now: float) -> bool:
        if not self.rate_limiter.enabled:
            return True
        index = int(now // self.rate_limiter.window)
        if index != self._rate.index:
            self._rate = _RateWindow(index=index, count=0)
        if self._rate.count >= self.rate_limiter.max_requests_per_window:
            return False
        self._rate.count += 1
        return True

    def _signature_ok(self, envelope: RelayEnvelope) -> bool:
        if not set(envelope.ring_snapshot) <= self._known_ring_pubs:
            return False
        message = envelope_signing_bytes(
            envelope.packet,
            envelope.tx_id,
            envelope.phase_tag,
            envelope.ring_snapshot,
            self.group,
        )
        return ring_verify(
            message, list(envelope.ring_snapshot), envelope.hop_signature, self.group
        )

    def _log(self, kind: EventKind, digest: bytes, now: float) -> None:
        append_log(self.audit_log, kind, digest, now)

    # -- main entry point ---------------------------------------------

    def on_receive(self, envelope: RelayEnvelope, sender_id: str, now: float) -> Action:
        """Gate, peel, and act on one envelope. All inputs untrusted."""
        digest = envelope_digest(envelope, self.group)
        if not self._rate_limit_ok(now):
            self._log(EventKind.RATE_LIMITED, digest, now)
            return Reject(RejectReason.RATE_LIMITED, envelope.tx_id)
        replay_key = (envelope.tx_id, hashlib.sha256(encode_packet(envelope.packet)).digest())
        if replay_key in self._seen:
            self._log(EventKind.REJECTED, digest, now)
            return Reject(RejectReason.DUPLICATE_TX, envelope.tx_id)
        if not self._signature_ok(envelope):
            self._log(EventKind.REJECTED, digest, now)
            return Reject(RejectReason.INVALID_SIGNATURE, envelope.tx_id)
        try:
            action = self._dispatch(envelope, now)
        except AuthenticationFailure:
            self._log(EventKind.REJECTED, digest, now)
            return Reject(RejectReason.AUTH_FAILURE, envelope.tx_id)
        self._seen.add(replay_key)
        self._log(EventKind.RECEIVED, digest, now)
        outcome = (
            EventKind.SUBMITTED if isinstance(action, SubmitToChain) else EventKind.FORWARDED
        )
        self._log(outcome, digest, now)
        return action

    def _dispatch(self, envelope: RelayEnvelope, now: float) -> Action:
        if self.protocol.variant is ProtocolKind.DANDELION_PP:
            return dandelion_step(self, envelope, self.rng)
        if self.protocol.variant is ProtocolKind.CLOVER:
            return clover_step(self, envelope, self.rng)
        return shortest_ping_step(self, envelope)

    # -- state inspection (used by confidentiality assertions) --------

    def observable_state(self) -> bytes:
        """Everything the node persists between envelopes, as bytes."""
        parts = [self.id.encode()]
        for entry in self.audit_log.entries:
            parts.append(entry.payload_digest)
            parts.append(entry.entry_hash)
            parts.append(entry.event_kind.value.encode())
        for tx, h in sorted(self._seen):
            parts.append(tx.encode())
            parts.append(h)
        parts.append(str(self._rate).encode())
        return b"\x00".join(parts)


def _peel(node: RelayNode, envelope: RelayEnvelope):
    return onion_peel(node.encryption_keypair.private_bytes, envelope.packet)


def _submit_from_terminal(node: RelayNode, payload: bytes, identity, tx_id: str) -> SubmitToChain:
    origin, destination, body = decode_terminal_payload(payload)
    return SubmitToChain(
        origin=origin,
        destination=destination,
        body=body,
        identity_blob=identity,
        tx_id=tx_id,
    )


def dandelion_step(node: RelayNode, envelope: RelayEnvelope, rng) -> Action:
    """Stem hop: forward along the realized random walk, or fluff.

    The fluff phase of the original gossip protocol is realized here as
    direct submission to the destination chain adapter; the stem length
    was drawn geometrically when the path was sampled.
    """
    if envelope.phase_tag not in (PhaseTag.STEM, PhaseTag.FLUFF):
        raise ValueError(f"dandelion node got phase {envelope.phase_tag}")
    peeled = _peel(node, envelope)
    if isinstance(peeled, Terminal):
        return _submit_from_terminal(node, peeled.payload, peeled.identity_blob, envelope.tx_id)
    (next_id, inner) = peeled.next_hops[0]
    out = wrap_next_hop(node, inner, next_id, peeled.identity_blob, PhaseTag.STEM, envelope.tx_id)
    return ForwardTo(recipients=((next_id, out),))


def clover_step(node: RelayNode, envelope: RelayEnvelope, rng) -> Action:
    """Diffusion at the entry (fan-out to disjoint branch walks), then
    per-branch proxy hops until the walk's sampled stopping point."""
    if envelope.phase_tag not in (PhaseTag.DIFFUSION, PhaseTag.PROXY):
        raise ValueError(f"clover node got phase {envelope.phase_tag}")
    peeled = _peel(node, envelope)
    if isinstance(peeled, Terminal):
        return _submit_from_terminal(node, peeled.payload, peeled.identity_blob, envelope.tx_id)
    recipients = []
    for next_id, inner in peeled.next_hops:
        out = wrap_next_hop(
            node, inner, next_id, peeled.identity_blob, PhaseTag.PROXY, envelope.tx_id
        )
        recipients.append((next_id, out))
    return ForwardTo(recipients=tuple(recipients))


def shortest_ping_step(node: RelayNode, envelope: RelayEnvelope) -> Action:
    """Execute one hop of the latency-greedy path."""
    if envelope.phase_tag is not PhaseTag.DIRECT:
        raise ValueError(f"shortest-ping node got phase {envelope.phase_tag}")
    peeled = _peel(node, envelope)
    if isinstance(peeled, Terminal):
        return _submit_from_terminal(node, peeled.payload, peeled.identity_blob, envelope.tx_id)
    (next_id, inner) = peeled.next_hops[0]
    out = wrap_next_hop(node, inner, next_id, peeled.identity_blob, PhaseTag.DIRECT, envelope.tx_id)
    return ForwardTo(recipients=((next_id, out),))


def make_ring_snapshot(
    known_pubs: set[int],
    mine: int,
    rng,
    ring_size: Optional[int] = None,
) -> tuple[tuple[int, ...], int]:
    """Canonically ordered ring containing the signer, possibly sampled."""
    if mine not in known_pubs:
        raise UncertifiedPeer("signer key is not in the certified directory")
    pubs = sorted(known_pubs)
    if ring_size is not None and ring_size < len(pubs):
        others = [y for y in pubs if y != mine]
        pubs = sorted(rng.sample(others, ring_size - 1) + [mine])
    return tuple(pubs), pubs.index(mine)


def sign_envelope(
    packet: OnionPacket,
    tx_id: str,
    phase_tag: PhaseTag,
    secret: int,
    ring: tuple[int, ...],
    my_index: int,
    rng,
    group: SchnorrGroup,
) -> RelayEnvelope:
    message = envelope_signing_bytes(packet, tx_id, phase_tag, ring, group)
    signature = ring_sign(message, list(ring), my_index, secret, rng, group)
    return RelayEnvelope(
        packet=packet,
        hop_signature=signature,
        ring_snapshot=ring,
        phase_tag=phase_tag,
        tx_id=tx_id,
    )


def build_ring_snapshot(node: RelayNode) -> tuple[tuple[int, ...], int]:
    """Ring public keys this node signs under, plus its own index.

    Default is the full certified directory (relays and contracts),
    the maximal anonymity set. ring_size trims it to a random subset
    that always includes the signer; experiment presets use this to
    bound per-hop cost.
    """
    return make_ring_snapshot(
        node._known_ring_pubs, node.ring_keypair.public_point, node.rng, node.ring_size
    )


def wrap_next_hop(
    node: RelayNode,
    inner_packet: OnionPacket,
    next_id: str,
    identity_blob: HybridCiphertext,
    phase_tag: PhaseTag,
    tx_id: str,
) -> RelayEnvelope:
    """Sign the peeled inner packet for delivery to the next relay."""
    if next_id not in node.directory:
        raise UncertifiedPeer(next_id)
    if inner_packet.layer_for != next_id:
        raise ValueError("inner packet is keyed to a different relay")
    packet = inner_packet
    if packet.identity_blob is None:
        packet = OnionPacket(
            layer_for=packet.layer_for,
            header=packet.header,
            body=packet.body,
            identity_blob=identity_blob,
        )
    ring, index = build_ring_snapshot(node)
    return sign_envelope(
        packet,
        tx_id,
        phase_tag,
        node.ring_keypair.secret_scalar,
        ring,
        index,
        node.rng,
        node.group,
    )


# --- path samplers (called by the originating contract) -----------------


def _geometric_extra_hops(rng, continue_prob: float, cap: int) -> int:
    """Number of continuation hops after the first: Geom0(continue_prob)."""
    hops = 0
    while hops < cap and rng.random() < continue_prob:
        hops += 1
    return hops


def sample_stem_path(
    rng,
    candidates: Sequence[str],
    entry: str,
    continue_prob: float,
    max_depth: int,
) -> list[str]:
    """Entry plus a simple uniform random walk of geometric length.

    The walk never revisits a node (each hop holds one onion layer),
    which also enforces no immediate backtracking. Counting the
    injection hop, the expected length is 1/(1 - continue_prob),
    truncated at max_depth.
    """
    path = [entry]
    extra = _geometric_extra_hops(rng, continue_prob, max_depth - 1)
    pool = [c for c in candidates if c != entry]
    for _ in range(extra):
        pool = [c for c in pool if c not in path]
        if not pool:
            break
        path.append(rng.choice(sorted(pool)))
    return path


def sample_clover_branches(
    rng,
    candidates: Sequence[str],
    entry: str,
    fanout: int,
    proxy_continue_prob: float,
    max_depth: int,
) -> list[list[str]]:
    """Fan-out heads plus per-branch proxy walks, all pairwise disjoint.

    Disjointness keeps one relay from holding layers of two branches
    of the same transaction. Expected total forwardings (branch nodes)
    is fanout / (1 - proxy_continue_prob), truncated at max_depth per
    branch.
    """
    pool = sorted(c for c in candidates if c != entry)
    if len(pool) < fanout:
        raise NoPeersAvailable(
            f"need {fanout} distinct peers, have {len(pool)}"
        )
    heads = rng.sample(pool, fanout)
    taken = set(heads) | {entry}
    branches = []
    for head in heads:
        branch = [head]
        extra = _geometric_extra_hops(rng, proxy_continue_prob, max_depth - 1)
        for _ in range(extra):
            free = [c for c in pool if c not in taken]
            if not free:
                break
            nxt = rng.choice(free)
            branch.append(nxt)
            taken.add(nxt)
        branches.append(branch)
    return branches


def pick_min_ping_peer(
    ping: Callable[[str], Union[float, object]],
    peers: Sequence[str],
) -> str:
    """Lowest round-trip-time peer; ties break to the lowest id."""
    best = None
    for peer in sorted(peers):
        rtt = ping(peer)
        if isinstance(rtt, (int, float)):
            if best is None or rtt < best[0]:
                best = (rtt, peer)
    if best is None:
        raise NoPeersAvailable("all peers unreachable")
    return best[1]


def sample_shortest_ping_path(
    ping_from: Callable[[str, str], Union[float, object]],
    candidates: Sequence[str],
    entry: str,
    hops: int,
) -> list[str]:
    """Latency-greedy path: each step takes the minimum-ping unvisited
    peer of the current node. Deterministic given the topology."""
    path = [entry]
    current = entry
    for _ in range(hops - 1):
        remaining = [c for c in candidates if c not in path]
        if not remaining:
            break
        current = pick_min_ping_peer(lambda peer: ping_from(current, peer), remaining)
        path.append(current)
    return path

"""In-process simulations of the two bridged chains.

The permissioned side hosts the cross-chain contract: the relay
registry gated by CA certificates, the blind-signing endpoint, the
identity-decryption key, and an append-only ledger of executed
requests. The permissionless side verifies unblinded signatures,
credits token transfers, and deduplicates by transaction id.

Contracts originate requests: they authorize the user, sample the
forwarding path for the configured protocol (one onion layer per
realized hop, truncated at the depth cap), encrypt the user identity
to the destination contract, and inject a ring-signed envelope at a
uniformly chosen entry relay. A pending table keeps enough material
to rebuild a path from the last good hop when a delivery fails.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

from .crypto.aead import (
    AuthenticationFailure,
    EncryptionKeyPair,
    HybridCiphertext,
    generate_encryption_keypair,
    hybrid_decrypt,
    hybrid_encrypt,
)
from .crypto.blindsig import (
    BlindKeyPair,
    BlindPublicKey,
    BlindSignature,
    fdh,
    generate_blind_keypair,
    sign_blinded,
    verify_unblinded,
)
from .crypto.encoding import DecodeError, _prefixed, _Reader
from .crypto.group import DEFAULT_GROUP, SchnorrGroup
from .crypto.onion import (
    IDENTITY_AD,
    build_branched_onion_prewrapped,
    onion_wrap_prewrapped,
)
from .crypto.ring import RingKeyPair, generate_ring_keypair
from .pki import Certificate, CertificateAuthority, verify_certificate
from .relay import (
    DirectoryEntry,
    ForwardingProtocol,
    NoPeersAvailable,
    PhaseTag,
    ProtocolKind,
    RelayEnvelope,
    make_ring_snapshot,
    sample_clover_branches,
    sample_shortest_ping_path,
    sample_stem_path,
    sign_envelope,
)
from .wire import encode_terminal_payload

PAYLOAD_AD = b"xrelay/request-payload"
MAX_TOKEN_BALANCE = 2**63 - 1

PERMISSIONED_NODE = "chain:permissioned"
PERMISSIONLESS_NODE = "chain:permissionless"


class ChainKind(str, Enum):
    PERMISSIONED = "PERMISSIONED"
    PERMISSIONLESS = "PERMISSIONLESS"


class RegistrationError(str, Enum):
    INVALID_CERT = "INVALID_CERT"
    EXPIRED = "EXPIRED"
    REVOKED = "REVOKED"


class SubmitError(str, Enum):
    BAD_SIGNATURE = "BAD_SIGNATURE"
    DUPLICATE = "DUPLICATE"
    OVERFLOW = "OVERFLOW"


class UnauthorizedUser(Exception):
    pass


class NoAvailableRelays(Exception):
    pass


@dataclass(frozen=True)
class RegistrationResult:
    accepted: bool
    reason: Optional[RegistrationError] = None


@dataclass
class RegistryEntry:
    encryption_pub: bytes
    ring_pub: int
    available: bool = True


@dataclass(frozen=True)
class CrossChainRequest:
    tx_id: str
    payload_ciphertext: bytes
    identity_ciphertext: HybridCiphertext
    origin_chain: ChainKind
    destination_chain: ChainKind


@dataclass(frozen=True)
class LedgerEntry:
    channel: str
    tx_id: str
    identity: str
    payload: bytes
    payload_digest: bytes
    virtual_time: float


@dataclass(frozen=True)
class TokenTransferMessage:
    recipient_account: str
    amount: int
    nonce: int
    digest: int

    def canonical_bytes(self) -> bytes:
        return (
            _prefixed(self.recipient_account.encode("utf-8"))
            + _prefixed(str(self.amount).encode("ascii"))
            + self.nonce.to_bytes(16, "big")
        )


def make_token_transfer_message(
    recipient_account: str, amount: int, nonce: int, signer_pub: BlindPublicKey
) -> TokenTransferMessage:
    if amount <= 0:
        raise ValueError("amount must be positive")
    msg = TokenTransferMessage(recipient_account, amount, nonce, digest=0)
    digest = fdh(msg.canonical_bytes(), signer_pub.modulus_n)
    return TokenTransferMessage(recipient_account, amount, nonce, digest=digest)


@dataclass(frozen=True)
class SubmitResult:
    credited: bool
    reason: Optional[SubmitError] = None


# --- terminal body payloads ---------------------------------------------

_BODY_EXECUTE = 0
_BODY_TOKEN = 1
_BODY_BLINDSIGN = 2


def encode_execute_body(payload_ciphertext: bytes) -> bytes:
    return bytes([_BODY_EXECUTE]) + _prefixed(payload_ciphertext)


def encode_token_body(message: TokenTransferMessage, sig: BlindSignature) -> bytes:
    out = bytes([_BODY_TOKEN])
    out += _prefixed(message.recipient_account.encode("utf-8"))
    out += _prefixed(str(message.amount).encode("ascii"))
    out += message.nonce.to_bytes(16, "big")
    width = max(1, (sig.value_s.bit_length() + 7) // 8)
    out += _prefixed(sig.value_s.to_bytes(width, "big"))
    return out


def encode_blindsign_body(blinded_value: int, request_id: str) -> bytes:
    width = max(1, (blinded_value.bit_length() + 7) // 8)
    return (
        bytes([_BODY_BLINDSIGN])
        + _prefixed(request_id.encode("utf-8"))
        + _prefixed(blinded_value.to_bytes(width, "big"))
    )


def decode_body(data: bytes):
    if not data:
        raise DecodeError("empty terminal body")
    kind = data[0]
    reader = _Reader(data[1:])
    if kind == _BODY_EXECUTE:
        return ("execute", reader.take_prefixed())
    if kind == _BODY_TOKEN:
        recipient = reader.take_prefixed().decode("utf-8")
        amount = int(reader.take_prefixed().decode("ascii"))
        nonce = int.from_bytes(reader.take(16), "big")
        sig = BlindSignature(int.from_bytes(reader.take_prefixed(), "big"))
        return ("token", recipient, amount, nonce, sig)
    if kind == _BODY_BLINDSIGN:
        request_id = reader.take_prefixed().decode("utf-8")
        blinded = int.from_bytes(reader.take_prefixed(), "big")
        return ("blindsign", request_id, blinded)
    raise DecodeError(f"unknown body kind {kind}")


# --- pending requests (failure recovery) ---------------------------------


@dataclass
class PendingRequest:
    tx_id: str
    terminal_payload: bytes
    identity_blob: HybridCiphertext
    protocol: ForwardingProtocol
    entry_retries_left: int = 5
    reroutes_left: int = 3


class _ContractBase:
    """State shared by both chain contracts."""

    kind: ChainKind
    node_id: str

    def __init__(self, rng: random.Random, group: SchnorrGroup):
        self.group = group
        self.rng = rng
        self.contract_keypair: EncryptionKeyPair = generate_encryption_keypair(rng)
        self.contract_ring: RingKeyPair = generate_ring_keypair(rng, group)
        self.authorized_users: set[str] = set()
        self.pending: dict[str, PendingRequest] = {}
        self.directory: dict[str, DirectoryEntry] = {}
        self.ring_size: Optional[int] = None

    def authorize_user(self, user_id: str) -> None:
        self.authorized_users.add(user_id)

    def update_directory(self, entries: dict[str, DirectoryEntry]) -> None:
        self.directory = dict(entries)

    @property
    def _known_ring_pubs(self) -> set[int]:
        return {e.ring_pub for e in self.directory.values()}

    def _sign(self, packet, tx_id: str, phase: PhaseTag) -> RelayEnvelope:
        ring, index = make_ring_snapshot(
            self._known_ring_pubs,
            self.contract_ring.public_point,
            self.rng,
            self.ring_size,
        )
        return sign_envelope(
            packet,
            tx_id,
            phase,
            self.contract_ring.secret_scalar,
            ring,
            index,
            self.rng,
            self.group,
        )

    def _enc_pub(self, relay_id: str) -> bytes:
        return self.directory[relay_id].encryption_pub

    def _new_tx_id(self, user_id: str) -> str:
        nonce = self.rng.getrandbits(128)
        return hashlib.sha256(
            user_id.encode("utf-8") + nonce.to_bytes(16, "big")
        ).hexdigest()[:32]


class PermissionedChainSim(_ContractBase):
    """Cross-chain contract on the permissioned network."""

    kind = ChainKind.PERMISSIONED
    node_id = PERMISSIONED_NODE
    channel = "interop-channel"

    def __init__(
        self,
        rng: random.Random,
        ca: CertificateAuthority,
        group: SchnorrGroup = DEFAULT_GROUP,
        blind_signer_bits: int = 512,
        blind_signer_seed: int = 0xB11D,
    ):
        super().__init__(rng, group)
        self.ca = ca
        self.registry: dict[str, RegistryEntry] = {}
        self.ledger: list[LedgerEntry] = []
        self.executed: set[str] = set()
        self.blind_signer: BlindKeyPair = generate_blind_keypair(
            blind_signer_bits, blind_signer_seed
        )
        self.signer_transcript: list[int] = []

    # -- membership ---------------------------------------------------

    def register_relay(self, cert: Certificate, now: float) -> RegistrationResult:
        if not verify_certificate(
            self.ca.public_key, cert, now, revoked=set(), group=self.group
        ):
            # Distinguish a bad signature from a stale window.
            from .crypto.ring import schnorr_verify

            if not schnorr_verify(
                cert.signed_bytes(), self.ca.public_key, cert.issuer_signature, self.group
            ):
                return RegistrationResult(False, RegistrationError.INVALID_CERT)
            return RegistrationResult(False, RegistrationError.EXPIRED)
        if cert.subject_id in self.ca.revoked:
            return RegistrationResult(False, RegistrationError.REVOKED)
        self.registry[cert.subject_id] = RegistryEntry(
            encryption_pub=cert.encryption_pub, ring_pub=cert.signing_pub
        )
        return RegistrationResult(True)

    def set_relay_available(self, relay_id: str, available: bool) -> None:
        self.registry[relay_id].available = available

    def select_entry_node(self, rng: random.Random) -> str:
        available = sorted(r for r, e in self.registry.items() if e.available)
        if not available:
            raise NoAvailableRelays()
        return available[rng.randrange(len(available))]

    # -- blind signing endpoint ----------------------------------------

    def blind_sign_endpoint(self, blinded_message: int) -> int:
        """Sign a masked value; the transcript records exactly what the
        signer saw, which the blindness tests compare against uniform."""
        result = sign_blinded(blinded_message, self.blind_signer)
        self.signer_transcript.append(blinded_message)
        return result

    # -- execution ------------------------------------------------------

    def execute_permissioned_request(
        self,
        terminal_payload: bytes,
        identity_ciphertext: HybridCiphertext,
        tx_id: str,
        now: float,
    ) -> Optional[LedgerEntry]:
        """Decrypt identity and payload, append to the ledger.

        Returns None for a duplicate tx_id (already executed); raises
        AuthenticationFailure if the identity does not decrypt under
        the contract key.
        """
        if tx_id in self.executed:
            return None
        identity = hybrid_decrypt(
            self.contract_keypair.private_bytes, identity_ciphertext, IDENTITY_AD
        ).decode("utf-8")
        payload = hybrid_decrypt(
            self.contract_keypair.private_bytes,
            _hybrid_from(terminal_payload),
            PAYLOAD_AD,
        )
        entry = LedgerEntry(
            channel=self.channel,
            tx_id=tx_id,
            identity=identity,
            payload=payload,
            payload_digest=hashlib.sha256(terminal_payload).digest(),
            virtual_time=now,
        )
        self.executed.add(tx_id)
        self.ledger.append(entry)
        return entry

    def export_ledger_json(self) -> str:
        rows = [
            {
                "channel": e.channel,
                "tx_id": e.tx_id,
                "identity": e.identity,
                "payload": e.payload.hex(),
                "payload_digest": e.payload_digest.hex(),
                "virtual_time": e.virtual_time,
            }
            for e in self.ledger
        ]
        return json.dumps(rows, separators=(",", ":"), sort_keys=False)


class PermissionlessChainSim(_ContractBase):
    """Token ledger on the permissionless network."""

    kind = ChainKind.PERMISSIONLESS
    node_id = PERMISSIONLESS_NODE

    def __init__(
        self,
        rng: random.Random,
        signer_pub: BlindPublicKey,
        group: SchnorrGroup = DEFAULT_GROUP,
    ):
        super().__init__(rng, group)
        self.signer_pub = signer_pub
        self.balances: dict[str, int] = {}
        self.processed: set[str] = set()
        self.total_credited = 0
        self.ledger: list[LedgerEntry] = []
        self.executed: set[str] = set()

    def submit_token_transfer(
        self, message: TokenTransferMessage, sig: BlindSignature, tx_id: Optional[str] = None
    ) -> SubmitResult:
        """Verify the unblinded signature and credit exactly once."""
        key = tx_id if tx_id is not None else f"nonce:{message.nonce:032x}"
        expected = fdh(message.canonical_bytes(), self.signer_pub.modulus_n)
        if message.digest != expected or not verify_unblinded(
            message.digest, sig, self.signer_pub
        ):
            return SubmitResult(False, SubmitError.BAD_SIGNATURE)
        if key in self.processed:
            return SubmitResult(False, SubmitError.DUPLICATE)
        balance = self.balances.get(message.recipient_account, 0)
        if message.amount <= 0 or balance + message.amount > MAX_TOKEN_BALANCE:
            return SubmitResult(False, SubmitError.OVERFLOW)
        self.processed.add(key)
        self.balances[message.recipient_account] = balance + message.amount
        self.total_credited += message.amount
        return SubmitResult(True)

    def execute_permissionless_request(
        self,
        terminal_payload: bytes,
        identity_ciphertext: HybridCiphertext,
        tx_id: str,
        now: float,
    ) -> Optional[LedgerEntry]:
        """Generic data request landing on the permissionless side."""
        if tx_id in self.executed:
            return None
        identity = hybrid_decrypt(
            self.contract_keypair.private_bytes, identity_ciphertext, IDENTITY_AD
        ).decode("utf-8")
        payload = hybrid_decrypt(
            self.contract_keypair.private_bytes,
            _hybrid_from(terminal_payload),
            PAYLOAD_AD,
        )
        entry = LedgerEntry(
            channel="public",
            tx_id=tx_id,
            identity=identity,
            payload=payload,
            payload_digest=hashlib.sha256(terminal_payload).digest(),
            virtual_time=now,
        )
        self.executed.add(tx_id)
        self.ledger.append(entry)
        return entry

    def export_balances_json(self) -> str:
        return json.dumps(
            dict(sorted(self.balances.items())), separators=(",", ":")
        )


def _hybrid_from(data: bytes) -> HybridCiphertext:
    from .crypto.encoding import hybrid_from_bytes

    return hybrid_from_bytes(data)


# --- request initiation ---------------------------------------------------


@dataclass(frozen=True)
class Injection:
    tx_id: str
    entry: str
    envelope: RelayEnvelope
    request: CrossChainRequest


def initiate_request(
    origin: _ContractBase,
    registry_holder: PermissionedChainSim,
    destination: _ContractBase,
    user_id: str,
    payload: bytes,
    protocol: ForwardingProtocol,
    rng: random.Random,
    path_length: Optional[int] = None,
    body: Optional[bytes] = None,
    ping=None,
) -> Injection:
    """Authorize, sample a path, build the onion, and sign the envelope.

    ``body`` overrides the default execute-request terminal body (the
    token-transfer flow supplies its own). ``ping`` is required for the
    shortest-ping protocol: callable (src, dst) -> rtt or unreachable.
    """
    if user_id not in origin.authorized_users:
        raise UnauthorizedUser(user_id)
    tx_id = origin._new_tx_id(user_id)
    identity_blob = hybrid_encrypt(
        destination.contract_keypair.public_bytes, user_id.encode("utf-8"), IDENTITY_AD, rng
    )
    if body is None:
        payload_ct = hybrid_encrypt(
            destination.contract_keypair.public_bytes, payload, PAYLOAD_AD, rng
        )
        from .crypto.encoding import hybrid_to_bytes

        payload_bytes = hybrid_to_bytes(payload_ct)
        body = encode_execute_body(payload_bytes)
    else:
        payload_bytes = body
    terminal = encode_terminal_payload(origin.node_id, destination.node_id, body)

    entry = registry_holder.select_entry_node(rng)
    candidates = sorted(registry_holder.registry)
    packet = _build_onion_for_protocol(
        origin, registry_holder, protocol, rng, entry, candidates,
        terminal, identity_blob, path_length, ping,
    )
    envelope = origin._sign(packet, tx_id, protocol.initial_phase)
    origin.pending[tx_id] = PendingRequest(
        tx_id=tx_id,
        terminal_payload=terminal,
        identity_blob=identity_blob,
        protocol=protocol,
    )
    request = CrossChainRequest(
        tx_id=tx_id,
        payload_ciphertext=payload_bytes,
        identity_ciphertext=identity_blob,
        origin_chain=origin.kind,
        destination_chain=destination.kind,
    )
    return Injection(tx_id=tx_id, entry=entry, envelope=envelope, request=request)


def _build_onion_for_protocol(
    origin: _ContractBase,
    registry_holder: PermissionedChainSim,
    protocol: ForwardingProtocol,
    rng: random.Random,
    entry: str,
    candidates: list[str],
    terminal: bytes,
    identity_blob: HybridCiphertext,
    path_length: Optional[int],
    ping,
):
    def keyed(path: list[str]) -> list[tuple[str, bytes]]:
        return [(rid, registry_holder.registry[rid].encryption_pub) for rid in path]

    if protocol.variant is ProtocolKind.DANDELION_PP:
        path = sample_stem_path(
            rng, candidates, entry, protocol.stem_continue_prob, protocol.max_path_depth
        )
        return onion_wrap_prewrapped(keyed(path), terminal, identity_blob, rng)
    if protocol.variant is ProtocolKind.CLOVER:
        branches = sample_clover_branches(
            rng,
            candidates,
            entry,
            protocol.fanout,
            protocol.proxy_continue_prob,
            protocol.max_path_depth,
        )
        return build_branched_onion_prewrapped(
            (entry, registry_holder.registry[entry].encryption_pub),
            [keyed(b) for b in branches],
            terminal,
            identity_blob,
            rng,
        )
    if ping is None:
        raise ValueError("shortest-ping routing needs a ping function")
    hops = path_length if path_length is not None else protocol.shortest_ping_hops
    path = sample_shortest_ping_path(ping, candidates, entry, hops)
    return onion_wrap_prewrapped(keyed(path), terminal, identity_blob, rng)


def rebuild_from_relay(
    origin: _ContractBase,
    registry_holder: PermissionedChainSim,
    tx_id: str,
    at_relay: str,
    rng: random.Random,
    avoid: frozenset[str] = frozenset(),
    ping=None,
) -> Optional[tuple[str, RelayEnvelope]]:
    """Re-path a stuck transaction starting at the given relay.

    Returns the (entry, envelope) to inject, or None when the pending
    entry is gone or out of reroute budget.
    """
    pend = origin.pending.get(tx_id)
    if pend is None or pend.reroutes_left <= 0:
        return None
    pend.reroutes_left -= 1
    protocol = pend.protocol
    candidates = sorted(
        r for r in registry_holder.registry if r not in avoid
    )
    if at_relay not in registry_holder.registry:
        return None

    def keyed(path: list[str]) -> list[tuple[str, bytes]]:
        return [(rid, registry_holder.registry[rid].encryption_pub) for rid in path]

    if protocol.variant is ProtocolKind.CLOVER:
        # Continue as a single proxy walk from the stuck relay.
        path = sample_stem_path(
            rng, candidates, at_relay, protocol.proxy_continue_prob, protocol.max_path_depth
        )
        phase = PhaseTag.PROXY
    elif protocol.variant is ProtocolKind.SHORTEST_PING:
        if ping is None:
            raise ValueError("shortest-ping reroute needs a ping function")
        path = sample_shortest_ping_path(
            ping, candidates, at_relay, protocol.shortest_ping_hops
        )
        phase = PhaseTag.DIRECT
    else:
        path = sample_stem_path(
            rng, candidates, at_relay, protocol.stem_continue_prob, protocol.max_path_depth
        )
        phase = PhaseTag.STEM
    packet = onion_wrap_prewrapped(
        keyed(path), pend.terminal_payload, pend.identity_blob, rng
    )
    envelope = origin._sign(packet, tx_id, phase)
    return at_relay, envelope

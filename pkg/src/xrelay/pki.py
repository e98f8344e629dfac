"""Certificate authority, membership gating, and tamper-evident logs.

Certificates bind a relay's id, encryption key, and ring signing key
under an ordinary Schnorr signature from the CA root key (same group
as the ring scheme, so the system needs only one asymmetric family
besides the blind signer). Revocation is a live in-memory set
consulted at verification time. Validity is half-open:
``issued_at <= now < expires_at``.

Audit logs are append-only hash chains: each entry commits to the
previous entry's hash, so any mutation of any persisted field is
detected by ``verify_log_chain``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Union

from .crypto.group import DEFAULT_GROUP, SchnorrGroup
from .crypto.ring import (
    RingKeyPair,
    SchnorrSignature,
    generate_ring_keypair,
    schnorr_sign,
    schnorr_verify,
)

GENESIS_HASH = bytes(32)


class DuplicateSubject(Exception):
    pass


class UnknownSubject(Exception):
    pass


@dataclass(frozen=True)
class Certificate:
    subject_id: str
    encryption_pub: bytes
    signing_pub: int
    issued_at: float
    expires_at: float
    issuer_signature: SchnorrSignature

    def signed_bytes(self) -> bytes:
        return _certificate_bytes(
            self.subject_id,
            self.encryption_pub,
            self.signing_pub,
            self.issued_at,
            self.expires_at,
        )


def _certificate_bytes(
    subject_id: str,
    encryption_pub: bytes,
    signing_pub: int,
    issued_at: float,
    expires_at: float,
) -> bytes:
    h = hashlib.sha256()
    for part in (
        subject_id.encode("utf-8"),
        encryption_pub,
        signing_pub.to_bytes((signing_pub.bit_length() + 7) // 8 or 1, "big"),
        repr(issued_at).encode(),
        repr(expires_at).encode(),
    ):
        h.update(len(part).to_bytes(4, "big"))
        h.update(part)
    return b"xrelay/certificate" + h.digest()


class CertificateAuthority:
    """Issues relay certificates and tracks membership."""

    def __init__(self, rng, group: SchnorrGroup = DEFAULT_GROUP):
        self.group = group
        self.root_keypair: RingKeyPair = generate_ring_keypair(rng, group)
        self.issued: set[str] = set()
        self.revoked: set[str] = set()
        self._rng = rng

    @property
    def public_key(self) -> int:
        return self.root_keypair.public_point

    def issue_certificate(
        self,
        subject_id: str,
        encryption_pub: bytes,
        signing_pub: int,
        issued_at: float,
        expires_at: float,
    ) -> Certificate:
        if subject_id in self.issued:
            raise DuplicateSubject(subject_id)
        if expires_at <= issued_at:
            raise ValueError("expires_at must be after issued_at")
        sig = schnorr_sign(
            _certificate_bytes(
                subject_id, encryption_pub, signing_pub, issued_at, expires_at
            ),
            self.root_keypair.secret_scalar,
            self._rng,
            self.group,
        )
        self.issued.add(subject_id)
        return Certificate(
            subject_id=subject_id,
            encryption_pub=encryption_pub,
            signing_pub=signing_pub,
            issued_at=issued_at,
            expires_at=expires_at,
            issuer_signature=sig,
        )

    def revoke(self, subject_id: str) -> None:
        if subject_id not in self.issued:
            raise UnknownSubject(subject_id)
        self.revoked.add(subject_id)

    def verify(self, cert: Certificate, now: float) -> bool:
        return verify_certificate(
            self.public_key, cert, now, revoked=self.revoked, group=self.group
        )


def verify_certificate(
    ca_pub: int,
    cert: Certificate,
    now: float,
    revoked: set[str] = frozenset(),
    group: SchnorrGroup = DEFAULT_GROUP,
) -> bool:
    """Signature valid, now within [issued_at, expires_at), not revoked."""
    if cert.subject_id in revoked:
        return False
    if not cert.issued_at <= now < cert.expires_at:
        return False
    return schnorr_verify(cert.signed_bytes(), ca_pub, cert.issuer_signature, group)


class EventKind(str, Enum):
    RECEIVED = "RECEIVED"
    FORWARDED = "FORWARDED"
    SUBMITTED = "SUBMITTED"
    REJECTED = "REJECTED"
    RATE_LIMITED = "RATE_LIMITED"


@dataclass(frozen=True)
class LogEntry:
    prev_hash: bytes
    event_kind: EventKind
    payload_digest: bytes
    virtual_time: float
    entry_hash: bytes


def _entry_hash(
    prev_hash: bytes, event_kind: EventKind, payload_digest: bytes, virtual_time: float
) -> bytes:
    h = hashlib.sha256(b"xrelay/log-entry")
    h.update(prev_hash)
    h.update(event_kind.value.encode("ascii"))
    h.update(payload_digest)
    h.update(repr(virtual_time).encode("ascii"))
    return h.digest()


@dataclass
class AuditLog:
    entries: list[LogEntry] = field(default_factory=list)


def append_log(
    log: AuditLog, event_kind: EventKind, payload_digest: bytes, now: float
) -> LogEntry:
    prev = log.entries[-1].entry_hash if log.entries else GENESIS_HASH
    if log.entries and now < log.entries[-1].virtual_time:
        raise ValueError("virtual time must be nondecreasing")
    entry = LogEntry(
        prev_hash=prev,
        event_kind=event_kind,
        payload_digest=payload_digest,
        virtual_time=now,
        entry_hash=_entry_hash(prev, event_kind, payload_digest, now),
    )
    log.entries.append(entry)
    return entry


def verify_log_chain(log: AuditLog) -> Union[bool, int]:
    """True for an intact chain, else the earliest broken entry index.

    The index may be 0, so callers must compare with ``is True``.
    """
    prev = GENESIS_HASH
    for i, entry in enumerate(log.entries):
        if entry.prev_hash != prev:
            return i
        if (
            _entry_hash(
                entry.prev_hash,
                entry.event_kind,
                entry.payload_digest,
                entry.virtual_time,
            )
            != entry.entry_hash
        ):
            return i
        if i > 0 and entry.virtual_time < log.entries[i - 1].virtual_time:
            return i
        prev = entry.entry_hash
    return True


def export_log_jsonl(log: AuditLog) -> str:
    """One JSON object per line, fixed field order, lowercase hex hashes."""
    lines = []
    for i, e in enumerate(log.entries):
        lines.append(
            json.dumps(
                {
                    "index": i,
                    "prev_hash": e.prev_hash.hex(),
                    "event_kind": e.event_kind.value,
                    "payload_digest": e.payload_digest.hex(),
                    "virtual_time": e.virtual_time,
                    "entry_hash": e.entry_hash.hex(),
                },
                separators=(",", ":"),
            )
        )
    return "\n".join(lines) + ("\n" if lines else "")

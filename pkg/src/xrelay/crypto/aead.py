"""Authenticated encryption and hybrid (KEM + AEAD) envelopes.

A SealedEnvelope is an AEAD ciphertext with a 96-bit nonce, 128-bit
tag, and a digest binding the associated data. Any bit flip in any
field makes decryption fail; no partial plaintext is ever returned.

A HybridCiphertext carries a fresh per-message symmetric key,
encrypted to the recipient's X25519 public key via an ephemeral
Diffie-Hellman exchange, plus the sealed payload under that key.
All randomness comes from the caller's rng, so outputs are
deterministic per seed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers.aead import AESGCM, ChaCha20Poly1305

DEFAULT_MAX_PLAINTEXT = 64 * 1024
NONCE_SIZE = 12
TAG_SIZE = 16
KEY_SIZE = 32

# Cipher is a deployment-wide configuration choice; both sides of an
# exchange must agree. AES-GCM is the default.
CIPHERS = {
    "aes-gcm": AESGCM,
    "chacha20-poly1305": ChaCha20Poly1305,
}
DEFAULT_CIPHER = "aes-gcm"


class AuthenticationFailure(Exception):
    """Wrong key, modified ciphertext, or modified associated data."""


class OversizePayload(Exception):
    """Plaintext exceeds the configured maximum."""


@dataclass(frozen=True)
class SealedEnvelope:
    nonce: bytes
    ciphertext: bytes
    auth_tag: bytes
    associated_data_hash: bytes


@dataclass(frozen=True)
class HybridCiphertext:
    encapsulated_key: bytes
    sealed_payload: SealedEnvelope


@dataclass(frozen=True)
class EncryptionKeyPair:
    """X25519 keypair held as raw 32-byte strings."""

    private_bytes: bytes
    public_bytes: bytes


def generate_encryption_keypair(rng) -> EncryptionKeyPair:
    priv = rng.randbytes(KEY_SIZE)
    pub = (
        X25519PrivateKey.from_private_bytes(priv)
        .public_key()
        .public_bytes_raw()
    )
    return EncryptionKeyPair(private_bytes=priv, public_bytes=pub)


def _cipher(name: str, key: bytes):
    try:
        return CIPHERS[name](key)
    except KeyError:
        raise ValueError(f"unknown cipher {name!r}") from None


def seal(
    key: bytes,
    plaintext: bytes,
    associated_data: bytes,
    rng,
    cipher: str = DEFAULT_CIPHER,
    max_plaintext: int = DEFAULT_MAX_PLAINTEXT,
) -> SealedEnvelope:
    if len(plaintext) > max_plaintext:
        raise OversizePayload(f"{len(plaintext)} bytes exceeds {max_plaintext}")
    nonce = rng.randbytes(NONCE_SIZE)
    blob = _cipher(cipher, key).encrypt(nonce, plaintext, associated_data)
    return SealedEnvelope(
        nonce=nonce,
        ciphertext=blob[:-TAG_SIZE],
        auth_tag=blob[-TAG_SIZE:],
        associated_data_hash=hashlib.sha256(associated_data).digest(),
    )


def open_sealed(
    key: bytes,
    envelope: SealedEnvelope,
    associated_data: bytes,
    cipher: str = DEFAULT_CIPHER,
) -> bytes:
    if hashlib.sha256(associated_data).digest() != envelope.associated_data_hash:
        raise AuthenticationFailure("associated data binding mismatch")
    try:
        return _cipher(cipher, key).decrypt(
            envelope.nonce,
            envelope.ciphertext + envelope.auth_tag,
            associated_data,
        )
    except InvalidTag:
        raise AuthenticationFailure("AEAD tag verification failed") from None


def _kem_key(shared_secret: bytes, ephemeral_pub: bytes) -> bytes:
    return hashlib.sha256(b"xrelay/kem" + shared_secret + ephemeral_pub).digest()


def hybrid_encrypt(
    recipient_pub: bytes,
    plaintext: bytes,
    associated_data: bytes,
    rng,
    cipher: str = DEFAULT_CIPHER,
    max_plaintext: int = DEFAULT_MAX_PLAINTEXT,
) -> HybridCiphertext:
    """Encrypt under a fresh symmetric key encapsulated to recipient_pub."""
    payload_key = rng.randbytes(KEY_SIZE)
    eph_priv = rng.randbytes(KEY_SIZE)
    eph = X25519PrivateKey.from_private_bytes(eph_priv)
    eph_pub = eph.public_key().public_bytes_raw()
    shared = eph.exchange(X25519PublicKey.from_public_bytes(recipient_pub))
    wrap_nonce = rng.randbytes(NONCE_SIZE)
    wrapped = _cipher(cipher, _kem_key(shared, eph_pub)).encrypt(
        wrap_nonce, payload_key, eph_pub
    )
    sealed = seal(
        payload_key, plaintext, associated_data, rng, cipher, max_plaintext
    )
    return HybridCiphertext(
        encapsulated_key=eph_pub + wrap_nonce + wrapped,
        sealed_payload=sealed,
    )


def hybrid_decrypt(
    recipient_priv: bytes,
    ct: HybridCiphertext,
    associated_data: bytes,
    cipher: str = DEFAULT_CIPHER,
) -> bytes:
    blob = ct.encapsulated_key
    if len(blob) < KEY_SIZE + NONCE_SIZE + KEY_SIZE + TAG_SIZE:
        raise AuthenticationFailure("malformed key encapsulation")
    eph_pub = blob[:KEY_SIZE]
    wrap_nonce = blob[KEY_SIZE : KEY_SIZE + NONCE_SIZE]
    wrapped = blob[KEY_SIZE + NONCE_SIZE :]
    shared = X25519PrivateKey.from_private_bytes(recipient_priv).exchange(
        X25519PublicKey.from_public_bytes(eph_pub)
    )
    try:
        payload_key = _cipher(cipher, _kem_key(shared, eph_pub)).decrypt(
            wrap_nonce, wrapped, eph_pub
        )
    except InvalidTag:
        raise AuthenticationFailure("key encapsulation rejected") from None
    return open_sealed(payload_key, ct.sealed_payload, associated_data, cipher)

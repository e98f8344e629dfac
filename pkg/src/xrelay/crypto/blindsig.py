"""Chaum-style RSA blind signatures with full-domain hashing.

The signer holds an RSA pair (n, e, d) and signs values it cannot
read: the requester blinds a message digest m as m * b^e mod n, the
signer exponentiates with d, and the requester strips the factor b
to recover m^d, an ordinary signature on the digest. Verification is
s^e mod n == digest.

Digests are produced by ``fdh``, a counter-mode full-domain hash onto
[1, n), so that the signer only ever exponentiates hashed values.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass

from gmpy2 import next_prime, powmod

SUPPORTED_BIT_LENGTHS = (512, 1024, 2048, 3072)

# 512 is the simulation/test size; it keeps exhaustive oracles and
# statistical acceptance runs tractable.
DEFAULT_BIT_LENGTH = 2048


@dataclass(frozen=True)
class BlindPublicKey:
    modulus_n: int
    public_exponent_e: int


@dataclass(frozen=True)
class BlindKeyPair:
    modulus_n: int
    public_exponent_e: int
    private_exponent_d: int

    @property
    def public(self) -> BlindPublicKey:
        return BlindPublicKey(self.modulus_n, self.public_exponent_e)


@dataclass(frozen=True)
class BlindingFactor:
    """Multiplicative mask b and its inverse mod n."""

    b: int
    b_inverse: int


@dataclass(frozen=True)
class BlindSignature:
    value_s: int


def generate_blind_keypair(bit_length: int, rng_seed: int) -> BlindKeyPair:
    """Deterministic RSA keypair for the given seed.

    Only bit lengths in SUPPORTED_BIT_LENGTHS are accepted; 512 exists
    for tests and simulation presets.
    """
    if bit_length not in SUPPORTED_BIT_LENGTHS:
        raise ValueError(f"unsupported bit length {bit_length}")
    rng = random.Random(rng_seed)
    e = 65537
    half = bit_length // 2
    while True:
        p = int(next_prime(rng.getrandbits(half) | (3 << (half - 2)) | 1))
        q = int(next_prime(rng.getrandbits(half) | (3 << (half - 2)) | 1))
        if p == q:
            continue
        n = p * q
        if n.bit_length() != bit_length:
            continue
        phi = (p - 1) * (q - 1)
        if math.gcd(e, phi) != 1:
            continue
        d = pow(e, -1, phi)
        return BlindKeyPair(modulus_n=n, public_exponent_e=e, private_exponent_d=d)


def fdh(message: bytes, n: int) -> int:
    """Counter-mode SHA-256 full-domain hash onto [1, n)."""
    out = b""
    width = (n.bit_length() + 7) // 8
    counter = 0
    while len(out) < width:
        out += hashlib.sha256(message + counter.to_bytes(4, "big")).digest()
        counter += 1
    return int.from_bytes(out[:width], "big") % (n - 1) + 1


def sample_blinding_factor(pub: BlindPublicKey, rng) -> BlindingFactor:
    n = pub.modulus_n
    while True:
        b = rng.randrange(2, n)
        if math.gcd(b, n) == 1:
            return BlindingFactor(b=b, b_inverse=pow(b, -1, n))


def blind(
    message_digest: int, pub: BlindPublicKey, rng
) -> tuple[int, BlindingFactor]:
    """Mask a digest so the signer cannot recognise it.

    Returns (digest * b^e mod n, factor). The masked value is a
    uniform residue for uniform b, independent of the digest.
    """
    n = pub.modulus_n
    if not 0 < message_digest < n:
        raise ValueError("message digest out of range [1, n)")
    if math.gcd(message_digest, n) != 1:
        raise ValueError("message digest shares a factor with the modulus")
    factor = sample_blinding_factor(pub, rng)
    blinded = (message_digest * int(powmod(factor.b, pub.public_exponent_e, n))) % n
    return blinded, factor


def apply_blinding(message_digest: int, factor: BlindingFactor, pub: BlindPublicKey) -> int:
    """Blinding with a caller-supplied factor (tests use b=1 identities)."""
    n = pub.modulus_n
    return (message_digest * int(powmod(factor.b, pub.public_exponent_e, n))) % n


def sign_blinded(blinded: int, priv: BlindKeyPair) -> int:
    if not 0 < blinded < priv.modulus_n:
        raise ValueError("blinded value out of range [1, n)")
    return int(powmod(blinded, priv.private_exponent_d, priv.modulus_n))


def unblind(s_prime: int, factor: BlindingFactor, n: int) -> BlindSignature:
    return BlindSignature(value_s=(s_prime * factor.b_inverse) % n)


def verify_unblinded(message_digest: int, sig: BlindSignature, pub: BlindPublicKey) -> bool:
    if not 0 <= sig.value_s < pub.modulus_n:
        return False
    return (
        int(powmod(sig.value_s, pub.public_exponent_e, pub.modulus_n))
        == message_digest
    )

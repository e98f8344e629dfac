"""Ring and ordinary Schnorr signatures over a prime-order group.

The ring scheme is the classic 1-out-of-n construction built from a
cycle of Schnorr proofs: each challenge is the hash of the previous
link, the signer closes the cycle with their secret, and a verifier
recomputes the whole cycle from a single seed challenge. Verification
is a pure function of (message, ring public keys, signature) and takes
no signer index; a valid signature is equally attributable to every
ring member.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .group import DEFAULT_GROUP, SchnorrGroup

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RingKeyPair:
    """Scalar secret and its public point g^secret."""

    secret_scalar: int
    public_point: int
    group_name: str


@dataclass(frozen=True)
class RingSignature:
    challenge_seed: int
    responses: tuple[int, ...]

    @property
    def ring_size(self) -> int:
        return len(self.responses)


@dataclass(frozen=True)
class SchnorrSignature:
    """Ordinary (non-ring) Schnorr signature, used for certificates."""

    challenge: int
    response: int


def generate_ring_keypair(rng, group: SchnorrGroup = DEFAULT_GROUP) -> RingKeyPair:
    x = group.random_scalar(rng)
    y = group.exp(group.g, x)
    return RingKeyPair(secret_scalar=x, public_point=y, group_name=group.name)


def _ring_digest(group: SchnorrGroup, ring: list[int]) -> bytes:
    parts = [group.encode_element(y) for y in ring]
    return b"".join(parts)


def _link_challenge(group: SchnorrGroup, ring_bytes: bytes, message: bytes, a: int) -> int:
    return group.hash_to_scalar(ring_bytes, message, group.encode_element(a))


def ring_sign(
    message: bytes,
    ring: list[int],
    signer_index: int,
    signer_secret: int,
    rng,
    group: SchnorrGroup = DEFAULT_GROUP,
) -> RingSignature:
    """Sign ``message`` as an undisclosed member of ``ring``.

    Raises ValueError for rings smaller than 2, an out-of-range index,
    or a secret that does not match the public point at signer_index.
    """
    n = len(ring)
    if n < 2:
        raise ValueError("ring must contain at least 2 members")
    if not 0 <= signer_index < n:
        raise ValueError("signer_index out of range")
    if group.exp(group.g, signer_secret) != ring[signer_index]:
        raise ValueError("signer secret does not match ring public point")

    ring_bytes = _ring_digest(group, ring)
    cees = [0] * n
    tees = [0] * n

    alpha = group.random_scalar(rng)
    cees[(signer_index + 1) % n] = _link_challenge(
        group, ring_bytes, message, group.exp(group.g, alpha)
    )
    # Walk the cycle away from the signer, simulating every other link.
    for step in range(1, n):
        i = (signer_index + step) % n
        tees[i] = group.random_scalar(rng)
        a = group.mul(group.exp(group.g, tees[i]), group.exp(ring[i], cees[i]))
        cees[(i + 1) % n] = _link_challenge(group, ring_bytes, message, a)
    # Close the cycle: g^t * y^c must equal g^alpha at the signer.
    tees[signer_index] = (alpha - cees[signer_index] * signer_secret) % group.q

    return RingSignature(challenge_seed=cees[0], responses=tuple(tees))


def ring_verify(
    message: bytes,
    ring: list[int],
    sig: RingSignature,
    group: SchnorrGroup = DEFAULT_GROUP,
) -> bool:
    """Recompute the challenge cycle; true iff it closes on the seed."""
    if sig.ring_size != len(ring):
        logger.warning(
            "ring signature size mismatch: %d responses for %d keys",
            sig.ring_size,
            len(ring),
        )
        return False
    if len(ring) < 2:
        return False
    ring_bytes = _ring_digest(group, ring)
    c = sig.challenge_seed % group.q
    for i, y in enumerate(ring):
        a = group.mul(group.exp(group.g, sig.responses[i]), group.exp(y, c))
        c = _link_challenge(group, ring_bytes, message, a)
    return c == sig.challenge_seed


def schnorr_sign(
    message: bytes,
    secret: int,
    rng,
    group: SchnorrGroup = DEFAULT_GROUP,
) -> SchnorrSignature:
    public = group.exp(group.g, secret)
    k = group.random_scalar(rng)
    r = group.exp(group.g, k)
    c = group.hash_to_scalar(
        group.encode_element(public), group.encode_element(r), message
    )
    s = (k - c * secret) % group.q
    return SchnorrSignature(challenge=c, response=s)


def schnorr_verify(
    message: bytes,
    public: int,
    sig: SchnorrSignature,
    group: SchnorrGroup = DEFAULT_GROUP,
) -> bool:
    r = group.mul(group.exp(group.g, sig.response), group.exp(public, sig.challenge))
    c = group.hash_to_scalar(
        group.encode_element(public), group.encode_element(r), message
    )
    return c == sig.challenge

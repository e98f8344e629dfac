"""Cryptographic primitives: blind signatures, ring signatures,
hybrid authenticated encryption, and onion packets."""

from .aead import (
    AuthenticationFailure,
    EncryptionKeyPair,
    HybridCiphertext,
    OversizePayload,
    SealedEnvelope,
    generate_encryption_keypair,
    hybrid_decrypt,
    hybrid_encrypt,
    open_sealed,
    seal,
)
from .blindsig import (
    BlindKeyPair,
    BlindPublicKey,
    BlindSignature,
    BlindingFactor,
    blind,
    fdh,
    generate_blind_keypair,
    sign_blinded,
    unblind,
    verify_unblinded,
)
from .group import DEFAULT_GROUP, GROUPS, SchnorrGroup, get_group
from .onion import (
    Forward,
    OnionPacket,
    PeelResult,
    Terminal,
    build_branched_onion,
    decode_packet,
    encode_packet,
    onion_peel,
    onion_wrap,
)
from .ring import (
    RingKeyPair,
    RingSignature,
    SchnorrSignature,
    generate_ring_keypair,
    ring_sign,
    ring_verify,
    schnorr_sign,
    schnorr_verify,
)

__all__ = [
    "AuthenticationFailure",
    "BlindKeyPair",
    "BlindPublicKey",
    "BlindSignature",
    "BlindingFactor",
    "DEFAULT_GROUP",
    "EncryptionKeyPair",
    "Forward",
    "GROUPS",
    "HybridCiphertext",
    "OnionPacket",
    "OversizePayload",
    "PeelResult",
    "RingKeyPair",
    "RingSignature",
    "SchnorrGroup",
    "SchnorrSignature",
    "SealedEnvelope",
    "Terminal",
    "blind",
    "build_branched_onion",
    "decode_packet",
    "encode_packet",
    "fdh",
    "generate_blind_keypair",
    "generate_encryption_keypair",
    "generate_ring_keypair",
    "get_group",
    "hybrid_decrypt",
    "hybrid_encrypt",
    "onion_peel",
    "onion_wrap",
    "open_sealed",
    "ring_sign",
    "ring_verify",
    "schnorr_sign",
    "schnorr_verify",
    "seal",
    "sign_blinded",
    "unblind",
    "verify_unblinded",
]

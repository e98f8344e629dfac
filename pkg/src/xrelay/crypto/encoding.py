"""Deterministic byte encodings for wire objects.

All variable-length fields are length-prefixed with big-endian 32-bit
integers; fixed-width fields (nonces, tags, digests) are raw. Field
order is fixed and documented in FORMAT.md. These encodings are what
ring signatures cover and what the golden-file fixtures pin down.
"""

from __future__ import annotations

import struct

from .aead import NONCE_SIZE, TAG_SIZE, HybridCiphertext, SealedEnvelope


class DecodeError(Exception):
    pass


def _prefixed(data: bytes) -> bytes:
    return struct.pack(">I", len(data)) + data


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise DecodeError("truncated input")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def take_prefixed(self) -> bytes:
        (n,) = struct.unpack(">I", self.take(4))
        return self.take(n)

    def done(self) -> bool:
        return self.pos == len(self.data)


def encode_sealed(env: SealedEnvelope) -> bytes:
    return (
        env.nonce
        + _prefixed(env.ciphertext)
        + env.auth_tag
        + env.associated_data_hash
    )


def decode_sealed(reader: _Reader) -> SealedEnvelope:
    nonce = reader.take(NONCE_SIZE)
    ciphertext = reader.take_prefixed()
    tag = reader.take(TAG_SIZE)
    ad_hash = reader.take(32)
    return SealedEnvelope(
        nonce=nonce, ciphertext=ciphertext, auth_tag=tag, associated_data_hash=ad_hash
    )


def encode_hybrid(ct: HybridCiphertext) -> bytes:
    return _prefixed(ct.encapsulated_key) + encode_sealed(ct.sealed_payload)


def decode_hybrid(reader: _Reader) -> HybridCiphertext:
    encapsulated = reader.take_prefixed()
    sealed = decode_sealed(reader)
    return HybridCiphertext(encapsulated_key=encapsulated, sealed_payload=sealed)


def hybrid_to_bytes(ct: HybridCiphertext) -> bytes:
    return encode_hybrid(ct)


def hybrid_from_bytes(data: bytes) -> HybridCiphertext:
    reader = _Reader(data)
    ct = decode_hybrid(reader)
    if not reader.done():
        raise DecodeError("trailing bytes after hybrid ciphertext")
    return ct


def encode_str(value: str) -> bytes:
    return _prefixed(value.encode("utf-8"))


def encode_int(value: int) -> bytes:
    width = max(1, (value.bit_length() + 7) // 8)
    return _prefixed(value.to_bytes(width, "big"))


def decode_int(reader: _Reader) -> int:
    return int.from_bytes(reader.take_prefixed(), "big")

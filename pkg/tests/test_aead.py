import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xrelay.crypto import aead


@pytest.fixture()
def rng():
    return random.Random(1234)


@pytest.fixture()
def keys(rng):
    return aead.generate_encryption_keypair(rng)


def test_roundtrip_random_payload(rng, keys):
    payload = rng.randbytes(1024)
    ct = aead.hybrid_encrypt(keys.public_bytes, payload, b"ad", rng)
    assert aead.hybrid_decrypt(keys.private_bytes, ct, b"ad") == payload


def test_bit_flip_in_ciphertext_fails(rng, keys):
    ct = aead.hybrid_encrypt(keys.public_bytes, b"secret", b"ad", rng)
    sealed = ct.sealed_payload
    flipped = bytes([sealed.ciphertext[0] ^ 1]) + sealed.ciphertext[1:]
    bad = aead.HybridCiphertext(
        encapsulated_key=ct.encapsulated_key,
        sealed_payload=aead.SealedEnvelope(
            nonce=sealed.nonce,
            ciphertext=flipped,
            auth_tag=sealed.auth_tag,
            associated_data_hash=sealed.associated_data_hash,
        ),
    )
    with pytest.raises(aead.AuthenticationFailure):
        aead.hybrid_decrypt(keys.private_bytes, bad, b"ad")


def test_wrong_recipient_key_fails(rng, keys):
    other = aead.generate_encryption_keypair(rng)
    ct = aead.hybrid_encrypt(keys.public_bytes, b"secret", b"ad", rng)
    with pytest.raises(aead.AuthenticationFailure):
        aead.hybrid_decrypt(other.private_bytes, ct, b"ad")


def test_wrong_associated_data_fails(rng, keys):
    ct = aead.hybrid_encrypt(keys.public_bytes, b"secret", b"ad", rng)
    with pytest.raises(aead.AuthenticationFailure):
        aead.hybrid_decrypt(keys.private_bytes, ct, b"other")


def test_oversize_payload_rejected(rng, keys):
    with pytest.raises(aead.OversizePayload):
        aead.hybrid_encrypt(keys.public_bytes, bytes(64 * 1024 + 1), b"", rng)


def test_fresh_symmetric_key_per_message(rng, keys):
    a = aead.hybrid_encrypt(keys.public_bytes, b"same", b"", rng)
    b = aead.hybrid_encrypt(keys.public_bytes, b"same", b"", rng)
    assert a.encapsulated_key != b.encapsulated_key
    assert a.sealed_payload.ciphertext != b.sealed_payload.ciphertext


def test_deterministic_given_seed(keys):
    a = aead.hybrid_encrypt(keys.public_bytes, b"m", b"ad", random.Random(9))
    b = aead.hybrid_encrypt(keys.public_bytes, b"m", b"ad", random.Random(9))
    assert a == b


def test_chacha_cipher_roundtrip(rng, keys):
    ct = aead.hybrid_encrypt(
        keys.public_bytes, b"m", b"ad", rng, cipher="chacha20-poly1305"
    )
    out = aead.hybrid_decrypt(keys.private_bytes, ct, b"ad", cipher="chacha20-poly1305")
    assert out == b"m"
    with pytest.raises(aead.AuthenticationFailure):
        aead.hybrid_decrypt(keys.private_bytes, ct, b"ad", cipher="aes-gcm")


@settings(max_examples=60, deadline=None)
@given(
    field=st.sampled_from(["nonce", "ciphertext", "auth_tag", "associated_data_hash"]),
    position=st.integers(min_value=0, max_value=10_000),
    bit=st.integers(min_value=0, max_value=7),
)
def test_any_single_bit_mutation_fails(field, position, bit):
    rng = random.Random(77)
    keys = aead.generate_encryption_keypair(rng)
    key = rng.randbytes(32)
    env = aead.seal(key, b"payload bytes", b"meta", rng)
    original = getattr(env, field)
    idx = position % len(original)
    mutated = bytes(
        b ^ (1 << bit) if i == idx else b for i, b in enumerate(original)
    )
    bad = aead.SealedEnvelope(
        **{
            **{
                "nonce": env.nonce,
                "ciphertext": env.ciphertext,
                "auth_tag": env.auth_tag,
                "associated_data_hash": env.associated_data_hash,
            },
            field: mutated,
        }
    )
    with pytest.raises(aead.AuthenticationFailure):
        aead.open_sealed(key, bad, b"meta")

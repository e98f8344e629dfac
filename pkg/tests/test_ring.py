import random

import pytest

from xrelay.crypto import group as grp
from xrelay.crypto import ring as rg

SIM = grp.get_group("sim-512-160")


def make_ring(n, rng, group=SIM):
    pairs = [rg.generate_ring_keypair(rng, group) for _ in range(n)]
    return pairs, [p.public_point for p in pairs]


def test_sign_verify_roundtrip():
    rng = random.Random(1)
    pairs, pubs = make_ring(3, rng)
    sig = rg.ring_sign(b"msg", pubs, 0, pairs[0].secret_scalar, rng, SIM)
    assert rg.ring_verify(b"msg", pubs, sig, SIM)
    assert not rg.ring_verify(b"other", pubs, sig, SIM)


def test_every_member_can_sign():
    rng = random.Random(2)
    pairs, pubs = make_ring(3, rng)
    for i, pair in enumerate(pairs):
        sig = rg.ring_sign(b"m", pubs, i, pair.secret_scalar, rng, SIM)
        assert rg.ring_verify(b"m", pubs, sig, SIM)


def test_replaced_ring_key_fails():
    rng = random.Random(3)
    pairs, pubs = make_ring(4, rng)
    sig = rg.ring_sign(b"m", pubs, 1, pairs[1].secret_scalar, rng, SIM)
    outsider = rg.generate_ring_keypair(rng, SIM)
    mutated = list(pubs)
    mutated[2] = outsider.public_point
    assert not rg.ring_verify(b"m", mutated, sig, SIM)


def test_size_mismatch_is_false_not_error():
    rng = random.Random(4)
    pairs, pubs = make_ring(3, rng)
    sig = rg.ring_sign(b"m", pubs, 0, pairs[0].secret_scalar, rng, SIM)
    assert not rg.ring_verify(b"m", pubs + [pubs[0]], sig, SIM)


def test_empty_message_is_well_defined():
    rng = random.Random(5)
    pairs, pubs = make_ring(2, rng)
    sig = rg.ring_sign(b"", pubs, 1, pairs[1].secret_scalar, rng, SIM)
    assert rg.ring_verify(b"", pubs, sig, SIM)


def test_ring_too_small_and_bad_key_errors():
    rng = random.Random(6)
    pairs, pubs = make_ring(2, rng)
    with pytest.raises(ValueError, match="at least 2"):
        rg.ring_sign(b"m", pubs[:1], 0, pairs[0].secret_scalar, rng, SIM)
    with pytest.raises(ValueError, match="does not match"):
        rg.ring_sign(b"m", pubs, 0, pairs[1].secret_scalar, rng, SIM)


def test_tampered_response_fails():
    rng = random.Random(7)
    pairs, pubs = make_ring(3, rng)
    sig = rg.ring_sign(b"m", pubs, 2, pairs[2].secret_scalar, rng, SIM)
    bad = rg.RingSignature(
        challenge_seed=sig.challenge_seed,
        responses=(sig.responses[0] ^ 1,) + sig.responses[1:],
    )
    assert not rg.ring_verify(b"m", pubs, bad, SIM)


def signer_guess_accuracy(ring_size, trials, rng, group=SIM):
    """Empirical accuracy of simple distinguishers given (msg, ring, sig).

    Heuristics look for any positional bias in the response scalars;
    for an ambiguous scheme each should hover near 1/ring_size.
    """
    heuristics = {
        "argmax": lambda sig: max(range(ring_size), key=lambda i: sig.responses[i]),
        "argmin": lambda sig: min(range(ring_size), key=lambda i: sig.responses[i]),
        "seed_mod": lambda sig: sig.challenge_seed % ring_size,
    }
    hits = {name: 0 for name in heuristics}
    pairs, pubs = make_ring(ring_size, rng, group)
    for t in range(trials):
        signer = rng.randrange(ring_size)
        msg = t.to_bytes(4, "big")
        sig = rg.ring_sign(msg, pubs, signer, pairs[signer].secret_scalar, rng, group)
        for name, h in heuristics.items():
            if h(sig) == signer:
                hits[name] += 1
    return max(count / trials for count in hits.values())


@pytest.mark.parametrize("ring_size", [3, 10])
def test_signer_ambiguity_small_rings(ring_size):
    rng = random.Random(100 + ring_size)
    acc = signer_guess_accuracy(ring_size, 100 * ring_size, rng)
    assert acc <= 1 / ring_size + 0.1


def test_default_group_roundtrip():
    rng = random.Random(8)
    pairs, pubs = make_ring(3, rng, grp.DEFAULT_GROUP)
    sig = rg.ring_sign(b"m", pubs, 0, pairs[0].secret_scalar, rng, grp.DEFAULT_GROUP)
    assert rg.ring_verify(b"m", pubs, sig, grp.DEFAULT_GROUP)


def test_schnorr_sign_verify():
    rng = random.Random(9)
    pair = rg.generate_ring_keypair(rng, SIM)
    sig = rg.schnorr_sign(b"cert", pair.secret_scalar, rng, SIM)
    assert rg.schnorr_verify(b"cert", pair.public_point, sig, SIM)
    assert not rg.schnorr_verify(b"cert2", pair.public_point, sig, SIM)
    other = rg.generate_ring_keypair(rng, SIM)
    assert not rg.schnorr_verify(b"cert", other.public_point, sig, SIM)


def test_group_membership_check():
    rng = random.Random(10)
    pair = rg.generate_ring_keypair(rng, SIM)
    assert SIM.is_member(pair.public_point)
    assert not SIM.is_member(1)
    assert not SIM.is_member(0)
    assert not SIM.is_member(SIM.p - 1) or SIM.exp(SIM.p - 1, SIM.q) == 1

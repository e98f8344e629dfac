import random

import pytest

import xrelay.chains as ch
import xrelay.crypto.blindsig as bl
from conftest import small_stack
from xrelay.crypto import generate_encryption_keypair, generate_ring_keypair
from xrelay.crypto.group import get_group
from xrelay.crypto.ring import schnorr_sign
from xrelay.harness.stack import summarize_transactions
from xrelay.pki import Certificate, CertificateAuthority
from xrelay.relay import ForwardingProtocol, ProtocolKind

SIM = get_group("sim-512-160")


@pytest.fixture()
def rng():
    return random.Random(5)


@pytest.fixture()
def ca(rng):
    return CertificateAuthority(rng, SIM)


@pytest.fixture()
def chain(rng, ca):
    return ch.PermissionedChainSim(rng, ca, SIM, blind_signer_bits=512)


def make_cert(ca, rng, subject="relay-x", issued=0.0, expires=1000.0):
    enc = generate_encryption_keypair(rng)
    ring = generate_ring_keypair(rng, SIM)
    return ca.issue_certificate(subject, enc.public_bytes, ring.public_point, issued, expires)


def test_register_valid_cert_accepted(chain, ca, rng):
    cert = make_cert(ca, rng)
    result = chain.register_relay(cert, now=1.0)
    assert result.accepted
    assert len(chain.registry) == 1


def test_register_revoked_rejected(chain, ca, rng):
    cert = make_cert(ca, rng)
    ca.revoke("relay-x")
    result = chain.register_relay(cert, now=1.0)
    assert not result.accepted
    assert result.reason is ch.RegistrationError.REVOKED
    assert len(chain.registry) == 0


def test_register_self_signed_rejected(chain, ca, rng):
    impostor = CertificateAuthority(random.Random(99), SIM)
    cert = make_cert(impostor, rng)
    result = chain.register_relay(cert, now=1.0)
    assert not result.accepted
    assert result.reason is ch.RegistrationError.INVALID_CERT
    assert len(chain.registry) == 0


def test_register_expired_rejected(chain, ca, rng):
    cert = make_cert(ca, rng, issued=0.0, expires=10.0)
    result = chain.register_relay(cert, now=10.0)
    assert not result.accepted
    assert result.reason is ch.RegistrationError.EXPIRED


def test_entry_selection_uniform(chain, ca, rng):
    for i in range(10):
        chain.register_relay(make_cert(ca, rng, subject=f"relay-{i}"), now=0.0)
    draws = random.Random(123)
    counts = {}
    for _ in range(10_000):
        pick = chain.select_entry_node(draws)
        counts[pick] = counts.get(pick, 0) + 1
    assert len(counts) == 10
    for count in counts.values():
        assert abs(count - 1000) <= 150  # 3 sigma for p=0.1, n=10000


def test_entry_selection_single_and_empty(chain, ca, rng):
    with pytest.raises(ch.NoAvailableRelays):
        chain.select_entry_node(rng)
    for i in range(10):
        chain.register_relay(make_cert(ca, rng, subject=f"relay-{i}"), now=0.0)
    for i in range(10):
        if i != 3:
            chain.set_relay_available(f"relay-{i}", False)
    for _ in range(20):
        assert chain.select_entry_node(rng) == "relay-3"


def test_unauthorized_user_rejected():
    stack = small_stack(seed=30)
    with pytest.raises(ch.UnauthorizedUser):
        stack.issue_request("nobody", b"data")


def test_end_to_end_round_trip_both_directions():
    stack = small_stack(seed=31)
    stack.authorize("alice")
    stack.issue_request("alice", b"to-permissioned", origin="permissionless")
    stack.issue_request("alice", b"to-permissionless", origin="permissioned")
    stack.run()
    assert stack.permissioned.ledger[0].payload == b"to-permissioned"
    assert stack.permissioned.ledger[0].identity == "alice"
    assert stack.permissionless.ledger[0].payload == b"to-permissionless"
    assert stack.permissionless.ledger[0].identity == "alice"


def test_blind_sign_endpoint_range_and_transcript(chain):
    n = chain.blind_signer.modulus_n
    with pytest.raises(ValueError):
        chain.blind_sign_endpoint(0)
    with pytest.raises(ValueError):
        chain.blind_sign_endpoint(n)
    out = chain.blind_sign_endpoint(12345)
    assert out == pow(12345, chain.blind_signer.private_exponent_d, n)
    assert chain.signer_transcript == [12345]


def token_setup(seed=0):
    rng = random.Random(seed)
    signer = bl.generate_blind_keypair(512, rng_seed=77)
    sub = ch.PermissionlessChainSim(rng, signer.public, SIM)
    return rng, signer, sub


def signed_transfer(rng, signer, recipient, amount, nonce):
    msg = ch.make_token_transfer_message(recipient, amount, nonce, signer.public)
    blinded, factor = bl.blind(msg.digest, signer.public, rng)
    s_prime = bl.sign_blinded(blinded, signer)
    sig = bl.unblind(s_prime, factor, signer.modulus_n)
    return msg, sig


def test_token_transfer_credits_once():
    rng, signer, sub = token_setup()
    msg, sig = signed_transfer(rng, signer, "acct-1", 25, nonce=1)
    assert sub.submit_token_transfer(msg, sig).credited
    assert sub.balances["acct-1"] == 25
    again = sub.submit_token_transfer(msg, sig)
    assert not again.credited
    assert again.reason is ch.SubmitError.DUPLICATE
    assert sub.balances["acct-1"] == 25


def test_token_transfer_bad_signature_rejected():
    rng, signer, sub = token_setup()
    msg, sig = signed_transfer(rng, signer, "acct-1", 25, nonce=2)
    other_msg = ch.make_token_transfer_message("acct-2", 25, 3, signer.public)
    result = sub.submit_token_transfer(other_msg, sig)
    assert not result.credited
    assert result.reason is ch.SubmitError.BAD_SIGNATURE
    assert sub.balances == {}


def test_token_transfer_overflow_rejected():
    rng, signer, sub = token_setup()
    msg, sig = signed_transfer(rng, signer, "acct-1", ch.MAX_TOKEN_BALANCE, nonce=4)
    assert sub.submit_token_transfer(msg, sig).credited
    msg2, sig2 = signed_transfer(rng, signer, "acct-1", 1, nonce=5)
    result = sub.submit_token_transfer(msg2, sig2)
    assert not result.credited
    assert result.reason is ch.SubmitError.OVERFLOW


def test_token_conservation_randomized():
    rng, signer, sub = token_setup(seed=42)
    expected_total = 0
    for i in range(300):
        amount = rng.randrange(1, 1000)
        account = f"acct-{rng.randrange(20)}"
        msg, sig = signed_transfer(rng, signer, account, amount, nonce=i)
        duplicate = rng.random() < 0.3
        result = sub.submit_token_transfer(msg, sig)
        assert result.credited
        expected_total += amount
        if duplicate:
            assert not sub.submit_token_transfer(msg, sig).credited
    assert sum(sub.balances.values()) == expected_total == sub.total_credited


def test_identity_never_in_relay_logs():
    stack = small_stack(seed=32)
    stack.authorize("alice-identity-string")
    for i in range(5):
        stack.issue_request("alice-identity-string", b"data%d" % i, at=i * 10.0)
    stack.run()
    needle = b"alice-identity-string"
    for node in stack.nodes.values():
        from xrelay.pki import export_log_jsonl

        assert needle.decode() not in export_log_jsonl(node.audit_log)
        assert needle not in node.observable_state()
    assert all(e.identity == "alice-identity-string" for e in stack.permissioned.ledger)


def test_registry_soundness_every_forwarder_registered():
    stack = small_stack(seed=33)
    stack.authorize("u")
    for i in range(5):
        stack.issue_request("u", b"x", at=i * 5.0)
    stack.run()
    for ev in stack.trace:
        if ev.kind == "forward":
            assert ev.node in stack.permissioned.registry
            cert = stack.nodes[ev.node].certificate
            assert stack.ca.verify(cert, now=ev.t)


def test_exports_are_deterministic():
    def build():
        stack = small_stack(seed=34)
        stack.authorize("u")
        for i in range(3):
            stack.issue_request("u", b"x%d" % i, at=i * 7.0)
        stack.run()
        return (
            stack.permissioned.export_ledger_json(),
            stack.permissionless.export_balances_json(),
        )

    assert build() == build()


def test_initiate_requires_ping_for_shortest_ping():
    stack = small_stack(seed=35)
    stack.authorize("u")
    with pytest.raises(ValueError):
        ch.initiate_request(
            stack.permissionless,
            stack.permissioned,
            stack.permissioned,
            "u",
            b"x",
            ForwardingProtocol(ProtocolKind.SHORTEST_PING),
            stack.permissionless.rng,
            ping=None,
        )

"""Layered onion packets for relay forwarding.

Each layer is keyed to exactly one relay: the header names the next
hop (or a terminal marker) and the body nests the next layer, so a
relay peeling its layer learns only its predecessor (implicit from
the sender) and successor(s). The user-identity blob is encrypted
once, under the destination contract key, and is re-attached
bit-identical at every hop; no relay key can open it.

Every header also carries the terminal payload, so a relay whose
protocol decides to stop early (or whose successor is unreachable)
can submit to the destination without peeling further. The payload a
relay submits is whatever ciphertext or public data the originator
chose; the identity stays sealed either way.

Layers support fan-out: a body may nest several independent branch
onions, which is how diffusion-style forwarding hands one packet to
multiple successors.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .aead import AuthenticationFailure, HybridCiphertext, hybrid_decrypt, hybrid_encrypt
from .encoding import DecodeError, _prefixed, _Reader, decode_hybrid, encode_hybrid

_KIND_FORWARD = 0
_KIND_TERMINAL = 1

IDENTITY_AD = b"xrelay/identity"


@dataclass(frozen=True)
class OnionPacket:
    layer_for: str
    header: HybridCiphertext
    body: HybridCiphertext
    identity_blob: Optional[HybridCiphertext]


@dataclass(frozen=True)
class Forward:
    """Peel result for a non-terminal layer."""

    next_hops: tuple[tuple[str, OnionPacket], ...]
    identity_blob: HybridCiphertext
    early_exit_payload: bytes

    @property
    def next_hop(self) -> str:
        return self.next_hops[0][0]

    @property
    def inner(self) -> OnionPacket:
        return self.next_hops[0][1]


@dataclass(frozen=True)
class Terminal:
    payload: bytes
    identity_blob: HybridCiphertext


PeelResult = Union[Forward, Terminal]


def _header_ad(relay_id: str) -> bytes:
    return b"xrelay/onion-header/" + relay_id.encode("utf-8")


def _body_ad(relay_id: str) -> bytes:
    return b"xrelay/onion-body/" + relay_id.encode("utf-8")


def encode_packet(packet: OnionPacket, include_identity: bool = True) -> bytes:
    identity = b""
    if include_identity and packet.identity_blob is not None:
        identity = encode_hybrid(packet.identity_blob)
    return (
        _prefixed(packet.layer_for.encode("utf-8"))
        + _prefixed(encode_hybrid(packet.header))
        + _prefixed(encode_hybrid(packet.body))
        + _prefixed(identity)
    )


def decode_packet(data: bytes) -> OnionPacket:
    reader = _Reader(data)
    layer_for = reader.take_prefixed().decode("utf-8")
    header = decode_hybrid(_Reader(reader.take_prefixed()))
    body = decode_hybrid(_Reader(reader.take_prefixed()))
    identity_bytes = reader.take_prefixed()
    if not reader.done():
        raise DecodeError("trailing bytes after onion packet")
    identity = None
    if identity_bytes:
        identity = decode_hybrid(_Reader(identity_bytes))
    return OnionPacket(
        layer_for=layer_for, header=header, body=body, identity_blob=identity
    )


def _encode_header(kind: int, next_hops: Sequence[str], early_exit: bytes) -> bytes:
    out = struct.pack(">B", kind) + _prefixed(early_exit)
    out += struct.pack(">I", len(next_hops))
    for hop in next_hops:
        out += _prefixed(hop.encode("utf-8"))
    return out


def _decode_header(data: bytes) -> tuple[int, list[str], bytes]:
    reader = _Reader(data)
    (kind,) = struct.unpack(">B", reader.take(1))
    early_exit = reader.take_prefixed()
    (count,) = struct.unpack(">I", reader.take(4))
    hops = [reader.take_prefixed().decode("utf-8") for _ in range(count)]
    return kind, hops, early_exit


def _encode_body_packets(packets: Sequence[bytes]) -> bytes:
    out = struct.pack(">I", len(packets))
    for p in packets:
        out += _prefixed(p)
    return out


def _decode_body_packets(data: bytes) -> list[bytes]:
    reader = _Reader(data)
    (count,) = struct.unpack(">I", reader.take(4))
    return [reader.take_prefixed() for _ in range(count)]


def _wrap_layer(
    relay_id: str,
    relay_pub: bytes,
    kind: int,
    next_hops: Sequence[str],
    body_plain: bytes,
    early_exit: bytes,
    rng,
    identity_blob: Optional[HybridCiphertext],
) -> OnionPacket:
    header = hybrid_encrypt(
        relay_pub, _encode_header(kind, next_hops, early_exit), _header_ad(relay_id), rng
    )
    body = hybrid_encrypt(relay_pub, body_plain, _body_ad(relay_id), rng)
    return OnionPacket(
        layer_for=relay_id, header=header, body=body, identity_blob=identity_blob
    )


def _wrap_chain(
    path: Sequence[tuple[str, bytes]],
    terminal_payload: bytes,
    rng,
) -> OnionPacket:
    """Innermost-first linear wrap; no identity attached."""
    relay_id, relay_pub = path[-1]
    packet = _wrap_layer(
        relay_id,
        relay_pub,
        _KIND_TERMINAL,
        (),
        terminal_payload,
        terminal_payload,
        rng,
        None,
    )
    for relay_id, relay_pub in reversed(path[:-1]):
        inner_bytes = encode_packet(packet, include_identity=False)
        packet = _wrap_layer(
            relay_id,
            relay_pub,
            _KIND_FORWARD,
            (packet.layer_for,),
            _encode_body_packets([inner_bytes]),
            terminal_payload,
            rng,
            None,
        )
    return packet


def _check_path(path: Sequence[tuple[str, bytes]]) -> None:
    if not path:
        raise ValueError("onion path must not be empty")
    ids = [relay_id for relay_id, _ in path]
    if len(set(ids)) != len(ids):
        raise ValueError("onion path contains duplicate relay ids")


def onion_wrap_prewrapped(
    path: Sequence[tuple[str, bytes]],
    terminal_payload: bytes,
    identity_blob: HybridCiphertext,
    rng,
) -> OnionPacket:
    """Linear onion reusing an already-encrypted identity blob.

    Path reroutes rebuild layers around the same identity ciphertext,
    which stays bit-identical across the transaction's lifetime.
    """
    _check_path(path)
    packet = _wrap_chain(path, terminal_payload, rng)
    return OnionPacket(
        layer_for=packet.layer_for,
        header=packet.header,
        body=packet.body,
        identity_blob=identity_blob,
    )


def onion_wrap(
    path: Sequence[tuple[str, bytes]],
    terminal_payload: bytes,
    identity_blob_plain: bytes,
    destination_contract_pub: bytes,
    rng,
) -> OnionPacket:
    """Build a linear onion over ``path`` (ordered (relay_id, enc_pub)).

    The terminal payload surfaces at the last relay; the identity blob
    decrypts only under the destination contract key.
    """
    identity = hybrid_encrypt(
        destination_contract_pub, identity_blob_plain, IDENTITY_AD, rng
    )
    return onion_wrap_prewrapped(path, terminal_payload, identity, rng)


def build_branched_onion_prewrapped(
    entry: tuple[str, bytes],
    branches: Sequence[Sequence[tuple[str, bytes]]],
    terminal_payload: bytes,
    identity_blob: HybridCiphertext,
    rng,
) -> OnionPacket:
    """Entry layer fanning out to one independent onion per branch.

    Branches must be non-empty and pairwise disjoint (and exclude the
    entry), so a peeled copy can never revisit a relay that already
    holds a layer of the same transaction.
    """
    if not branches:
        raise ValueError("at least one branch required")
    entry_id, entry_pub = entry
    seen = {entry_id}
    for branch in branches:
        _check_path(branch)
        for relay_id, _ in branch:
            if relay_id in seen:
                raise ValueError(f"relay {relay_id!r} appears in multiple branches")
            seen.add(relay_id)
    identity = identity_blob
    inner = [_wrap_chain(branch, terminal_payload, rng) for branch in branches]
    inner_bytes = [encode_packet(p, include_identity=False) for p in inner]
    packet = _wrap_layer(
        entry_id,
        entry_pub,
        _KIND_FORWARD,
        [p.layer_for for p in inner],
        _encode_body_packets(inner_bytes),
        terminal_payload,
        rng,
        identity,
    )
    return packet


def build_branched_onion(
    entry: tuple[str, bytes],
    branches: Sequence[Sequence[tuple[str, bytes]]],
    terminal_payload: bytes,
    identity_blob_plain: bytes,
    destination_contract_pub: bytes,
    rng,
) -> OnionPacket:
    identity = hybrid_encrypt(
        destination_contract_pub, identity_blob_plain, IDENTITY_AD, rng
    )
    return build_branched_onion_prewrapped(
        entry, branches, terminal_payload, identity, rng
    )


def onion_peel(relay_priv: bytes, packet: OnionPacket) -> PeelResult:
    """Remove exactly one layer with the holder relay's private key.

    Raises AuthenticationFailure if the packet is keyed to a different
    relay or has been tampered with. The identity blob is passed
    through untouched.
    """
    if packet.identity_blob is None:
        raise AuthenticationFailure("packet is missing its identity blob")
    header_plain = hybrid_decrypt(
        relay_priv, packet.header, _header_ad(packet.layer_for)
    )
    kind, hops, early_exit = _decode_header(header_plain)
    body_plain = hybrid_decrypt(relay_priv, packet.body, _body_ad(packet.layer_for))
    if kind == _KIND_TERMINAL:
        return Terminal(payload=body_plain, identity_blob=packet.identity_blob)
    inner_packets = [decode_packet(raw) for raw in _decode_body_packets(body_plain)]
    if len(inner_packets) != len(hops):
        raise AuthenticationFailure("header and body disagree on fan-out")
    reattached = tuple(
        (
            hop,
            OnionPacket(
                layer_for=inner.layer_for,
                header=inner.header,
                body=inner.body,
                identity_blob=packet.identity_blob,
            ),
        )
        for hop, inner in zip(hops, inner_packets)
    )
    return Forward(
        next_hops=reattached,
        identity_blob=packet.identity_blob,
        early_exit_payload=early_exit,
    )

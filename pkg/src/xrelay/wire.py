"""Shared message shapes carried over the simulated network.

The terminal payload of an onion names the public chain endpoints
(origin for failure recovery, destination for submission) plus the
opaque body the destination will interpret. Chain endpoints are public
infrastructure, so carrying them in the terminal payload leaks nothing
a relay could not already see at submission time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional

from .crypto.encoding import DecodeError, _prefixed, _Reader
from .crypto.onion import OnionPacket


def encode_terminal_payload(origin: str, destination: str, body: bytes) -> bytes:
    return (
        _prefixed(origin.encode("utf-8"))
        + _prefixed(destination.encode("utf-8"))
        + _prefixed(body)
    )


def decode_terminal_payload(data: bytes) -> tuple[str, str, bytes]:
    reader = _Reader(data)
    origin = reader.take_prefixed().decode("utf-8")
    destination = reader.take_prefixed().decode("utf-8")
    body = reader.take_prefixed()
    if not reader.done():
        raise DecodeError("trailing bytes after terminal payload")
    return origin, destination, body


@dataclass(frozen=True)
class Submission:
    """Relay-to-chain delivery of a terminal payload."""

    tx_id: str
    body: bytes
    identity_blob: Any
    submitter: str


@dataclass(frozen=True)
class RejectNotice:
    """Acknowledgment returned to a sender whose envelope was refused."""

    tx_id: str
    reason: str


@dataclass(frozen=True)
class RerouteRequest:
    """Stuck relay asking the origin contract to rebuild a path."""

    tx_id: str
    at_relay: str
    dead_hop: Optional[str] = None


@dataclass(frozen=True)
class BlindSignRequest:
    blinded_value: int
    reply_to: str


@dataclass(frozen=True)
class BlindSignReply:
    blinded_signature: int

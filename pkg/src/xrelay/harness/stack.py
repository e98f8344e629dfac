"""Full simulated deployment: certified relays, both chain contracts,
and the virtual-time network, with ground-truth tracing.

The trace is driver-side instrumentation: experiments and adversary
models read it, relay nodes never do. Failure recovery follows the
delivery-failure signals: a contract whose injection bounces retries
entry selection (bounded), and a relay whose forward bounces reports
to both chain contracts, the request's originator rebuilding a fresh
path from that relay (bounded reroutes).
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from typing import Optional, Union

from .. import chains as ch
from .. import netsim, relay
from ..crypto.aead import generate_encryption_keypair
from ..crypto.group import get_group
from ..crypto.ring import generate_ring_keypair
from ..pki import CertificateAuthority
from ..wire import RejectNotice, RerouteRequest, Submission

DEFAULT_GROUP_NAME = "sim-512-160"


@dataclass(frozen=True)
class StackConfig:
    n_relays: int
    protocol: relay.ForwardingProtocol
    seed: int
    group_name: str = DEFAULT_GROUP_NAME
    ring_size: Optional[int] = 8
    latency_range: tuple[float, float] = netsim.DEFAULT_LATENCY_RANGE
    service_time: float = 2.0
    rate_limiter: relay.RateLimiterConfig = relay.RateLimiterConfig()
    blind_signer_bits: int = 512
    cert_lifetime: float = 10**9


@dataclass(frozen=True)
class TraceEvent:
    kind: str
    tx_id: str
    t: float
    node: str
    peer: Optional[str] = None
    info: str = ""


def _node_rng(seed: int, node_id: str) -> random.Random:
    digest = hashlib.sha256(f"{seed}:{node_id}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


class RelayStack:
    """One isolated simulation instance."""

    def __init__(self, config: StackConfig):
        self.config = config
        self.group = get_group(config.group_name)
        self.rng = random.Random(config.seed)
        self.relay_ids = [f"relay-{i:03d}" for i in range(config.n_relays)]

        topo = netsim.Topology(
            self.relay_ids + [ch.PERMISSIONED_NODE, ch.PERMISSIONLESS_NODE],
            latency_seed=config.seed,
            latency_range=config.latency_range,
        )
        self.net = netsim.Network(
            topo,
            service_times={rid: config.service_time for rid in self.relay_ids},
        )

        self.ca = CertificateAuthority(_node_rng(config.seed, "ca"), self.group)
        self.permissioned = ch.PermissionedChainSim(
            _node_rng(config.seed, "hf"),
            self.ca,
            self.group,
            blind_signer_bits=config.blind_signer_bits,
            blind_signer_seed=config.seed ^ 0xB11D,
        )
        self.permissionless = ch.PermissionlessChainSim(
            _node_rng(config.seed, "sub"),
            self.permissioned.blind_signer.public,
            self.group,
        )
        self.permissioned.ring_size = config.ring_size
        self.permissionless.ring_size = config.ring_size

        self.nodes: dict[str, relay.RelayNode] = {}
        for rid in self.relay_ids:
            rng = _node_rng(config.seed, rid)
            enc = generate_encryption_keypair(rng)
            ring = generate_ring_keypair(rng, self.group)
            cert = self.ca.issue_certificate(
                rid, enc.public_bytes, ring.public_point, 0.0, config.cert_lifetime
            )
            result = self.permissioned.register_relay(cert, now=0.0)
            assert result.accepted, result
            self.nodes[rid] = relay.RelayNode(
                node_id=rid,
                certificate=cert,
                encryption_keypair=enc,
                ring_keypair=ring,
                protocol=config.protocol,
                rng=rng,
                rate_limiter=config.rate_limiter,
                group=self.group,
                ring_size=config.ring_size,
            )
        self._sync_directory()

        for rid in self.relay_ids:
            self.net.register_handler(rid, self._relay_handler(rid))
        self.net.register_handler(
            ch.PERMISSIONED_NODE, self._chain_handler(self.permissioned)
        )
        self.net.register_handler(
            ch.PERMISSIONLESS_NODE, self._chain_handler(self.permissionless)
        )

        self.trace: list[TraceEvent] = []
        self.blindsign_replies: dict[str, int] = {}
        self.invalid_signature_forwards = 0

    # -- directory ------------------------------------------------------

    def _sync_directory(self) -> None:
        entries = {
            rid: relay.DirectoryEntry(e.encryption_pub, e.ring_pub)
            for rid, e in self.permissioned.registry.items()
        }
        for contract in (self.permissioned, self.permissionless):
            entries[contract.node_id] = relay.DirectoryEntry(
                contract.contract_keypair.public_bytes,
                contract.contract_ring.public_point,
            )
        for node in self.nodes.values():
            node.update_directory(entries)
        self.permissioned.update_directory(entries)
        self.permissionless.update_directory(entries)

    # -- tracing ---------------------------------------------------------

    def _record(self, kind: str, tx_id: str, t: float, node: str, peer=None, info=""):
        self.trace.append(TraceEvent(kind, tx_id, t, node, peer, info))

    # -- handlers ---------------------------------------------------------

    def _chain_for(self, node_id: str) -> ch._ContractBase:
        if node_id == ch.PERMISSIONED_NODE:
            return self.permissioned
        if node_id == ch.PERMISSIONLESS_NODE:
            return self.permissionless
        raise KeyError(node_id)

    def _ping(self, src: str, dst: str):
        return self.net.ping(src, dst)

    def _relay_handler(self, rid: str):
        node = self.nodes[rid]

        def handler(ev):
            if isinstance(ev, netsim.DeliveryFailure):
                msg = ev.message
                if isinstance(msg, relay.RelayEnvelope):
                    self._record(
                        "delivery_failure", msg.tx_id, ev.now, rid, ev.receiver
                    )
                    req = RerouteRequest(
                        tx_id=msg.tx_id, at_relay=rid, dead_hop=ev.receiver
                    )
                    self.net.send(rid, ch.PERMISSIONED_NODE, req)
                    self.net.send(rid, ch.PERMISSIONLESS_NODE, req)
                return
            msg = ev.message
            if isinstance(msg, relay.RelayEnvelope):
                action = node.on_receive(msg, ev.sender, ev.now)
                self._record("receive", msg.tx_id, ev.now, rid, ev.sender, msg.phase_tag.value)
                if isinstance(action, relay.Reject):
                    self._record("reject", msg.tx_id, ev.now, rid, ev.sender, action.reason.value)
                    self.net.send(rid, ev.sender, RejectNotice(msg.tx_id, action.reason.value))
                elif isinstance(action, relay.ForwardTo):
                    for next_id, env in action.recipients:
                        self.net.send(rid, next_id, env)
                        self._record("forward", msg.tx_id, ev.now, rid, next_id)
                elif isinstance(action, relay.SubmitToChain):
                    self.net.send(
                        rid,
                        action.destination,
                        Submission(
                            tx_id=action.tx_id,
                            body=action.body,
                            identity_blob=action.identity_blob,
                            submitter=rid,
                        ),
                    )
                    self._record("submit_sent", msg.tx_id, ev.now, rid, action.destination)
            # RejectNotice and other messages need no relay action.

        return handler

    def _chain_handler(self, contract: ch._ContractBase):
        def handler(ev):
            if isinstance(ev, netsim.DeliveryFailure):
                msg = ev.message
                if isinstance(msg, relay.RelayEnvelope):
                    self._retry_entry(contract, msg.tx_id, ev.now, dead=ev.receiver)
                return
            msg = ev.message
            if isinstance(msg, Submission):
                self._handle_submission(contract, msg, ev.now)
            elif isinstance(msg, RerouteRequest):
                self._handle_reroute(contract, msg, ev.now)

        return handler

    def _retry_entry(self, contract, tx_id: str, now: float, dead: str) -> None:
        pend = contract.pending.get(tx_id)
        if pend is None:
            return
        if pend.entry_retries_left <= 0:
            self._record("gave_up", tx_id, now, contract.node_id, dead, "entry retries")
            contract.pending.pop(tx_id, None)
            return
        pend.entry_retries_left -= 1
        entry = self.permissioned.select_entry_node(contract.rng)
        rebuilt = ch.rebuild_from_relay(
            contract,
            self.permissioned,
            tx_id,
            entry,
            contract.rng,
            ping=self._ping,
        )
        if rebuilt is None:
            self._record("gave_up", tx_id, now, contract.node_id, dead, "reroutes")
            contract.pending.pop(tx_id, None)
            return
        # Entry retries use the fresh-injection phase, not the reroute budget.
        pend.reroutes_left += 1
        target, envelope = rebuilt
        self.net.send(contract.node_id, target, envelope)
        self._record("entry_retry", tx_id, now, contract.node_id, target)

    def _handle_reroute(self, contract, msg: RerouteRequest, now: float) -> None:
        if msg.tx_id not in contract.pending:
            return
        avoid = frozenset({msg.dead_hop}) if msg.dead_hop else frozenset()
        rebuilt = ch.rebuild_from_relay(
            contract,
            self.permissioned,
            msg.tx_id,
            msg.at_relay,
            contract.rng,
            avoid=avoid,
            ping=self._ping,
        )
        if rebuilt is None:
            self._record("gave_up", msg.tx_id, now, contract.node_id, msg.at_relay, "reroutes")
            contract.pending.pop(msg.tx_id, None)
            return
        target, envelope = rebuilt
        self.net.send(contract.node_id, target, envelope)
        self._record("reroute", msg.tx_id, now, contract.node_id, target)

    def _handle_submission(self, contract, msg: Submission, now: float) -> None:
        decoded = ch.decode_body(msg.body)
        kind = decoded[0]
        if kind == "execute":
            payload_bytes = decoded[1]
            try:
                if contract.kind is ch.ChainKind.PERMISSIONED:
                    entry = contract.execute_permissioned_request(
                        payload_bytes, msg.identity_blob, msg.tx_id, now
                    )
                else:
                    entry = contract.execute_permissionless_request(
                        payload_bytes, msg.identity_blob, msg.tx_id, now
                    )
            except ch.AuthenticationFailure:
                self._record("submission_rejected", msg.tx_id, now, contract.node_id,
                             msg.submitter, "AUTH_FAILURE")
                return
            credited = entry is not None
        elif kind == "token":
            _, recipient, amount, nonce, sig = decoded
            message = ch.make_token_transfer_message(
                recipient, amount, nonce, self.permissionless.signer_pub
            )
            result = self.permissionless.submit_token_transfer(message, sig, msg.tx_id)
            credited = result.credited
            if not credited and result.reason is not ch.SubmitError.DUPLICATE:
                self._record("submission_rejected", msg.tx_id, now, contract.node_id,
                             msg.submitter, result.reason.value)
                return
        elif kind == "blindsign":
            _, request_id, blinded = decoded
            if request_id in self.blindsign_replies:
                credited = False
            else:
                self.blindsign_replies[request_id] = (
                    self.permissioned.blind_sign_endpoint(blinded)
                )
                credited = True
        else:  # pragma: no cover
            raise AssertionError(kind)
        self._record(
            "delivered",
            msg.tx_id,
            now,
            contract.node_id,
            msg.submitter,
            "credited" if credited else "duplicate",
        )
        if credited:
            for origin in (self.permissioned, self.permissionless):
                origin.pending.pop(msg.tx_id, None)

    # -- issuing work -----------------------------------------------------

    def authorize(self, user_id: str) -> None:
        self.permissioned.authorize_user(user_id)
        self.permissionless.authorize_user(user_id)

    def issue_request(
        self,
        user_id: str,
        payload: bytes,
        origin: str = "permissionless",
        at: float = 0.0,
        body: Optional[bytes] = None,
        path_length: Optional[int] = None,
    ) -> str:
        """Schedule a cross-chain request injection at virtual time."""
        origin_chain = (
            self.permissionless if origin == "permissionless" else self.permissioned
        )
        destination = (
            self.permissioned if origin == "permissionless" else self.permissionless
        )
        injection = ch.initiate_request(
            origin_chain,
            self.permissioned,
            destination,
            user_id,
            payload,
            self.config.protocol,
            origin_chain.rng,
            path_length=path_length,
            body=body,
            ping=self._ping,
        )

        def fire():
            self._record(
                "inject",
                injection.tx_id,
                self.net.now,
                origin_chain.node_id,
                injection.entry,
                self.config.protocol.variant.value,
            )
            self.net.send(origin_chain.node_id, injection.entry, injection.envelope)

        if at <= self.net.now:
            fire()
        else:
            self.net.at(at, fire)
        return injection.tx_id

    def run(self, max_virtual_time: Optional[float] = None) -> netsim.RunStats:
        return self.net.run_until_idle(max_virtual_time)


# --- trace post-processing -------------------------------------------------


@dataclass
class TxSummary:
    tx_id: str
    injected_at: float = 0.0
    entry: str = ""
    origin_node: str = ""
    completed_at: Optional[float] = None
    submitter: Optional[str] = None
    receive_events: int = 0
    rerouted: bool = False
    gave_up: bool = False
    edges: list[TraceEvent] = field(default_factory=list)


def summarize_transactions(trace: list[TraceEvent]) -> dict[str, TxSummary]:
    txs: dict[str, TxSummary] = {}

    def get(tx_id: str) -> TxSummary:
        if tx_id not in txs:
            txs[tx_id] = TxSummary(tx_id=tx_id)
        return txs[tx_id]

    for ev in trace:
        s = get(ev.tx_id)
        if ev.kind == "inject":
            s.injected_at = ev.t
            s.entry = ev.peer or ""
            s.origin_node = ev.node
        elif ev.kind == "receive":
            s.receive_events += 1
            s.edges.append(ev)
        elif ev.kind == "delivered":
            if ev.info == "credited" and s.completed_at is None:
                s.completed_at = ev.t
                s.submitter = ev.peer
        elif ev.kind in ("reroute", "entry_retry"):
            s.rerouted = True
        elif ev.kind == "gave_up":
            s.gave_up = True
    return txs

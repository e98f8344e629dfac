import pytest

from xrelay.harness.stack import RelayStack, StackConfig
from xrelay.relay import ForwardingProtocol, ProtocolKind, RateLimiterConfig


def small_stack(protocol_kind=ProtocolKind.DANDELION_PP, n_relays=12, seed=7, **kwargs):
    proto_kwargs = {}
    for key in ("stem_continue_prob", "fanout", "proxy_continue_prob",
                "max_path_depth", "shortest_ping_hops"):
        if key in kwargs:
            proto_kwargs[key] = kwargs.pop(key)
    protocol = ForwardingProtocol(protocol_kind, **proto_kwargs)
    config = StackConfig(n_relays=n_relays, protocol=protocol, seed=seed, **kwargs)
    return RelayStack(config)


@pytest.fixture()
def dandelion_stack():
    return small_stack(ProtocolKind.DANDELION_PP)


@pytest.fixture()
def clover_stack():
    return small_stack(ProtocolKind.CLOVER)

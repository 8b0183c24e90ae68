"""Demand fabric: demand records, the store state machine, and delivery."""

from .codec import ACK, Frame, decode_frame, encode_frame, read_frame
from .demand import ClaimOutcome, Demand, DemandKind, DemandState, IssueOutcome
from .dispatcher import DEFAULT_TIMEOUT_S, Dispatcher
from .frontend import StoreFrontend
from .remote import RemoteStore
from .server import StoreTcpServer
from .store import DemandStore
from .transport import (
    LATENCY_WINDOW,
    InProcessNamespace,
    InProcessTransport,
    LatencyModel,
    TcpTransport,
    TransportAgent,
)

__all__ = [
    "ACK",
    "ClaimOutcome",
    "DEFAULT_TIMEOUT_S",
    "Demand",
    "DemandKind",
    "DemandState",
    "DemandStore",
    "Dispatcher",
    "Frame",
    "InProcessNamespace",
    "InProcessTransport",
    "IssueOutcome",
    "LATENCY_WINDOW",
    "LatencyModel",
    "RemoteStore",
    "StoreFrontend",
    "StoreTcpServer",
    "TcpTransport",
    "TransportAgent",
    "decode_frame",
    "encode_frame",
    "read_frame",
]

"""Demand store lifecycle, wire codec, transports, and dispatcher failover."""

import random
import threading

import pytest

from educe.errors import (
    DeliveryError,
    FabricDownError,
    ProtocolError,
    StoreShutdownError,
    TransportError,
)
from educe.fabric import (
    ACK,
    Demand,
    DemandKind,
    DemandState,
    DemandStore,
    Dispatcher,
    Frame,
    InProcessNamespace,
    InProcessTransport,
    LatencyModel,
    RemoteStore,
    StoreFrontend,
    StoreTcpServer,
    TcpTransport,
    TransportAgent,
    decode_frame,
    encode_frame,
)


def _demand(sig, payload=b"p", kind=DemandKind.INTENSIONAL, issuer="gen",
            attempt=1):
    return Demand(signature=sig, kind=kind, payload=payload, issuer=issuer,
                  attempt=attempt)


# ---------------------------------------------------------------------------
# store state machine


def test_issue_enqueues_fresh_demand():
    store = DemandStore()
    outcome = store.issue(_demand("a"))
    assert outcome.status == "enqueued"
    assert store.pending_count() == 1
    assert store.get("a").state is DemandState.PENDING


def test_issue_deduplicates_pending():
    store = DemandStore()
    store.issue(_demand("a"))
    outcome = store.issue(_demand("a"))
    assert outcome.status == "deduplicated"
    assert store.pending_count() == 1
    stats = store.stats()
    assert stats["issued"] == 2
    assert stats["enqueued"] == 1
    assert stats["deduplicated"] == 1


def test_issue_after_completion_returns_stored_result():
    store = DemandStore()
    store.issue(_demand("a"))
    store.take_pending("w1")
    store.complete("a", b"42", worker_id="w1")
    outcome = store.issue(_demand("a"))
    assert outcome.status == "already_computed"
    assert outcome.result == b"42"
    stats = store.stats()
    # the already-computed reply still counts as a duplicate issue
    assert stats["deduplicated"] == 1
    assert stats["already_computed"] == 1
    assert stats["issued"] == stats["deduplicated"] + stats["enqueued"]


def test_take_is_fifo_and_empties():
    store = DemandStore()
    store.issue(_demand("a"))
    store.issue(_demand("b"))
    first = store.take_pending("w1")
    second = store.take_pending("w1")
    assert (first.signature, second.signature) == ("a", "b")
    assert first.state is DemandState.IN_PROCESS
    assert store.take_pending("w1") is None


def test_complete_requires_in_process():
    store = DemandStore()
    store.issue(_demand("a"))
    with pytest.raises(ProtocolError):
        store.complete("a", b"1")
    with pytest.raises(ProtocolError):
        store.complete("missing", b"1")


def test_complete_is_exactly_once():
    store = DemandStore()
    store.issue(_demand("a"))
    store.take_pending("w1")
    store.complete("a", b"1", worker_id="w1")
    with pytest.raises(ProtocolError):
        store.complete("a", b"2", worker_id="w1")
    assert store.query("a") == b"1"


def test_complete_checks_holder():
    store = DemandStore()
    store.issue(_demand("a"))
    store.take_pending("w1")
    with pytest.raises(ProtocolError):
        store.complete("a", b"1", worker_id="w2")
    store.complete("a", b"1", worker_id="w1")


def test_requeue_lost_restores_queue_order():
    store = DemandStore()
    for sig in ("a", "b", "c"):
        store.issue(_demand(sig))
    assert store.take_pending("w1").signature == "a"
    assert store.take_pending("w1").signature == "b"
    count = store.requeue_lost("w1")
    assert count == 2
    # requeued work runs before the untouched backlog, earliest first
    order = [store.take_pending("w2").signature for _ in range(3)]
    assert order == ["a", "b", "c"]
    assert store.get("a").attempt == 2
    assert store.stats()["requeued"] == 2
    assert store.requeue_lost("w1") == 0


def test_requeued_demand_completes_normally():
    store = DemandStore()
    store.issue(_demand("a"))
    store.take_pending("w1")
    store.requeue_lost("w1")
    store.take_pending("w2")
    store.complete("a", b"9", worker_id="w2")
    assert store.query("a") == b"9"
    assert store.quiescent()


def test_requeue_one_bumps_attempt():
    store = DemandStore()
    store.issue(_demand("a"))
    store.take_pending("w1")
    assert store.requeue_one("a", "w1") == 2
    assert store.get("a").state is DemandState.PENDING


def test_failed_completion_reclassifies_demand():
    store = DemandStore()
    store.issue(_demand("a"))
    store.take_pending("w1")
    store.complete("a", b"", worker_id="w1", failed=True)
    record = store.get("a")
    assert record.failed
    assert record.kind is DemandKind.SYSTEM
    assert store.stats()["failed"] == 1


def test_claim_outcomes():
    store = DemandStore()
    store.issue(_demand("a"))
    store.issue(_demand("b"))
    store.issue(_demand("c"))
    # claim from the middle of the queue
    claimed = store.claim("b", "w1")
    assert claimed.status == "claimed"
    assert claimed.demand.state is DemandState.IN_PROCESS
    busy = store.claim("b", "w2")
    assert busy.status == "busy"
    store.complete("b", b"7", worker_id="w1")
    assert store.claim("b", "w2").status == "computed"
    assert store.claim("b", "w2").result == b"7"
    assert store.claim("zz", "w2").status == "absent"
    # the queue no longer offers the claimed signature
    offered = [store.take_pending("w3").signature for _ in range(2)]
    assert offered == ["a", "c"]


def test_watermark_and_completions():
    store = DemandStore()
    for sig in ("a", "b"):
        store.issue(_demand(sig))
        store.take_pending("w1")
        store.complete(sig, b"1", worker_id="w1")
    assert store.watermark == 2
    assert sum(store.completions.values()) == 2


def test_query_counts_warehouse_traffic():
    store = DemandStore()
    store.issue(_demand("a"))
    assert store.query("a") is None
    store.take_pending("w1")
    store.complete("a", b"1", worker_id="w1")
    assert store.query("a") == b"1"
    stats = store.stats()
    assert stats["warehouse_hits"] == 1
    assert stats["warehouse_misses"] == 1


def test_shutdown_rejects_new_work():
    store = DemandStore()
    store.issue(_demand("a"))
    store.shutdown()
    with pytest.raises(StoreShutdownError):
        store.issue(_demand("b"))
    with pytest.raises(StoreShutdownError):
        store.take_pending("w1")


def test_exactly_one_winner_randomized():
    rng = random.Random(60901)
    for _ in range(10_000):
        store = DemandStore()
        store.issue(_demand("a"))
        workers = ["w1", "w2"]
        rng.shuffle(workers)
        grants = [store.take_pending(w) for w in workers]
        assert sum(1 for g in grants if g is not None) == 1
        assert store.coherent()


def test_threaded_takes_partition_the_queue():
    store = DemandStore()
    total = 240
    for i in range(total):
        store.issue(_demand(f"s{i:03d}"))
    grabbed: dict[str, list[str]] = {}
    barrier = threading.Barrier(8)

    def drain(worker: str):
        got = []
        barrier.wait()
        while True:
            demand = store.take_pending(worker)
            if demand is None:
                break
            got.append(demand.signature)
        grabbed[worker] = got

    threads = [threading.Thread(target=drain, args=(f"w{n}",)) for n in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    union = [sig for got in grabbed.values() for sig in got]
    assert len(union) == total
    assert len(set(union)) == total
    assert store.coherent()


def test_random_operation_soup_stays_coherent():
    rng = random.Random(417)
    store = DemandStore()
    held: list[str] = []
    n = 0
    for _ in range(4000):
        move = rng.random()
        if move < 0.35:
            store.issue(_demand(f"d{rng.randrange(200)}"))
        elif move < 0.60:
            demand = store.take_pending("w1")
            if demand is not None:
                held.append(demand.signature)
        elif move < 0.85 and held:
            sig = held.pop(rng.randrange(len(held)))
            store.complete(sig, b"v", worker_id="w1")
        elif held:
            store.requeue_lost("w1")
            held.clear()
        n += 1
        assert store.coherent()
    stats = store.stats()
    assert stats["issued"] == stats["deduplicated"] + stats["enqueued"]


# ---------------------------------------------------------------------------
# codec


def test_frame_round_trip_preserves_every_field():
    frame = Frame(op="result", signature="sig:abc", kind="intensional",
                  attempt=3, payload=b"\x00\xffbytes", worker="w7",
                  failed=True, replicated=True)
    assert decode_frame(encode_frame(frame)) == frame


def test_frame_defaults_round_trip():
    frame = Frame(op="take", worker="w1")
    assert decode_frame(encode_frame(frame)) == frame


def test_ack_is_a_single_control_byte():
    assert ACK == b"\x06"
    assert len(ACK) == 1


def test_decode_rejects_length_mismatch():
    raw = encode_frame(Frame(op="query", signature="x"))
    with pytest.raises(TransportError):
        decode_frame(raw[:-1])
    with pytest.raises(TransportError):
        decode_frame(raw + b"!")


def test_decode_rejects_malformed_body():
    body = b"not json"
    raw = len(body).to_bytes(4, "big") + body
    with pytest.raises(TransportError):
        decode_frame(raw)


# ---------------------------------------------------------------------------
# in-process transport


def _inproc_pair():
    store = DemandStore()
    namespace = InProcessNamespace()
    namespace.register("dst", StoreFrontend(store).handle)
    return store, InProcessTransport(namespace)


def test_inproc_issue_and_take():
    store, transport = _inproc_pair()
    dispatcher = Dispatcher([transport])
    remote = RemoteStore(dispatcher, {"inproc": "dst"})
    remote.issue(_demand("a", payload=b"body", attempt=2))
    record = store.get("a")
    assert record.payload == b"body"
    assert record.attempt == 2
    taken = remote.take_pending("w1")
    assert taken.signature == "a"
    assert taken.payload == b"body"
    assert remote.take_pending("w1") is None


def test_inproc_dead_endpoint_is_a_transport_error():
    _, transport = _inproc_pair()
    with pytest.raises(TransportError):
        transport.request("nowhere", Frame(op="take", worker="w"), 1.0, False)


def test_inproc_protocol_error_travels_back():
    store, transport = _inproc_pair()
    dispatcher = Dispatcher([transport])
    remote = RemoteStore(dispatcher, {"inproc": "dst"})
    remote.issue(_demand("a"))
    remote.take_pending("w1")
    remote.complete("a", b"1", worker_id="w1")
    # same bytes again: treated as a duplicate delivery, not an error
    remote.complete("a", b"1", worker_id="w1")
    with pytest.raises(ProtocolError):
        remote.complete("a", b"2", worker_id="w1")
    assert store.query("a") == b"1"


def test_inproc_buffer_capacity_bound():
    _, transport = _inproc_pair()
    assert transport.CAPACITY == 1024


# ---------------------------------------------------------------------------
# dispatcher selection and failover


class _ScriptedAgent(TransportAgent):
    """Test double: fails the first `failures` deliveries, then acks."""

    def __init__(self, name, failures=0, latency_model=None):
        super().__init__(name, latency_model)
        self.failures = failures
        self.delivered: list[Frame] = []

    def _deliver(self, endpoint, frame, timeout_s, expect_ack):
        if self.failures > 0:
            self.failures -= 1
            raise TransportError("scripted failure")
        self.delivered.append(frame)
        return None if expect_ack else Frame(op="none")


def test_selection_prefers_lowest_effective_latency():
    fast = _ScriptedAgent("fast")
    slow = _ScriptedAgent("slow")
    fast.record_latency(80)
    slow.record_latency(5000)
    dispatcher = Dispatcher([slow, fast])
    assert dispatcher.select_protocol() is fast


def test_selection_tie_breaks_by_registration_order():
    a = _ScriptedAgent("a")
    b = _ScriptedAgent("b")
    for agent in (a, b):
        agent.record_latency(100)
    assert Dispatcher([a, b]).select_protocol() is a
    assert Dispatcher([b, a]).select_protocol() is b


def test_unmeasured_transport_gets_probed_first():
    veteran = _ScriptedAgent("veteran")
    veteran.record_latency(3)
    newcomer = _ScriptedAgent("newcomer")
    dispatcher = Dispatcher([veteran, newcomer])
    assert newcomer.effective_latency() == 0.0
    assert dispatcher.select_protocol() is newcomer


def test_selection_is_optimal_over_random_histories():
    rng = random.Random(7331)
    for _ in range(200):
        agents = [_ScriptedAgent(f"t{i}") for i in range(rng.randint(2, 5))]
        for agent in agents:
            for _ in range(rng.randint(1, 24)):
                agent.record_latency(rng.randint(1, 10_000))
            agent.available = rng.random() < 0.8
        dispatcher = Dispatcher(agents)
        available = [a for a in agents if a.available]
        if not available:
            with pytest.raises(FabricDownError):
                dispatcher.select_protocol()
            continue
        chosen = dispatcher.select_protocol()
        floor = min(a.effective_latency() for a in available)
        assert chosen.available
        assert chosen.effective_latency() == floor


def test_latency_mean_uses_a_bounded_window():
    agent = _ScriptedAgent("t")
    for _ in range(50):
        agent.record_latency(1000)
    for _ in range(16):
        agent.record_latency(10)
    assert agent.effective_latency() == 10
    assert agent.sample_count == 66


def test_send_demand_records_latency_but_take_does_not():
    store, transport = _inproc_pair()
    transport.latency_model = LatencyModel(base_us=120)
    dispatcher = Dispatcher([transport])
    remote = RemoteStore(dispatcher, {"inproc": "dst"})
    remote.issue(_demand("a"))
    assert transport.sample_count == 1
    remote.take_pending("w1")
    remote.query("a")
    assert transport.sample_count == 1
    remote.complete("a", b"1", worker_id="w1")
    assert transport.sample_count == 2
    assert store.query("a") == b"1"


def test_failover_retries_once_on_the_next_transport():
    flaky = _ScriptedAgent("flaky", failures=1)
    backup = _ScriptedAgent("backup")
    backup.record_latency(999)  # flaky (unmeasured) is tried first
    dispatcher = Dispatcher([backup, flaky])
    dispatcher.send_demand({"flaky": "e1", "backup": "e2"}, _demand("a"))
    assert not flaky.available
    assert [f.signature for f in backup.delivered] == ["a"]
    events = [e["event"] for e in dispatcher.events]
    assert "transport_down" in events
    assert events.count("protocol_switch") >= 2


def test_failover_gives_up_after_one_retry():
    dispatcher = Dispatcher([_ScriptedAgent("a", failures=5),
                             _ScriptedAgent("b", failures=5)])
    with pytest.raises(DeliveryError):
        dispatcher.send_demand({"a": "e1", "b": "e2"}, _demand("x"))
    with pytest.raises(FabricDownError):
        dispatcher.select_protocol()


def test_reset_availability_reopens_transports():
    agent = _ScriptedAgent("a", failures=5)
    dispatcher = Dispatcher([agent])
    with pytest.raises(DeliveryError):
        dispatcher.send_demand({"a": "e1"}, _demand("x"))
    dispatcher.reset_availability()
    assert dispatcher.select_protocol() is agent


def test_failed_send_does_not_record_a_latency_sample():
    agent = _ScriptedAgent("a", failures=5,
                           latency_model=LatencyModel(base_us=50))
    dispatcher = Dispatcher([agent])
    with pytest.raises(DeliveryError):
        dispatcher.send_demand({"a": "e1"}, _demand("x"))
    assert agent.sample_count == 0


def test_selection_respects_endpoint_coverage():
    a = _ScriptedAgent("a")
    b = _ScriptedAgent("b")
    dispatcher = Dispatcher([a, b])
    # whoever lacks an endpoint for this peer is not a candidate
    assert dispatcher.select_protocol({"b": "e"}) is b


# ---------------------------------------------------------------------------
# TCP loopback


@pytest.fixture()
def tcp_store():
    store = DemandStore()
    server = StoreTcpServer(StoreFrontend(store)).start()
    transport = TcpTransport()
    dispatcher = Dispatcher([transport], timeout_s=5.0)
    remote = RemoteStore(dispatcher, {"tcp": server.endpoint})
    yield store, remote
    dispatcher.close()
    server.stop()


def test_tcp_round_trip_full_lifecycle(tcp_store):
    store, remote = tcp_store
    remote.issue(_demand("a", payload=b"\x01\x02"))
    assert remote.query("a") is None
    taken = remote.take_pending("w1")
    assert taken.signature == "a"
    assert taken.payload == b"\x01\x02"
    remote.complete("a", b"99", worker_id="w1")
    assert remote.query("a") == b"99"
    assert store.quiescent()
    assert remote.requeue_lost("w1") == 0


def test_tcp_claim_verbs(tcp_store):
    store, remote = tcp_store
    for sig in ("a", "b"):
        remote.issue(_demand(sig))
    outcome = remote.claim("b", "w1")
    assert outcome.status == "claimed"
    assert outcome.demand.signature == "b"
    assert remote.claim("b", "w2").status == "busy"
    remote.complete("b", b"5", worker_id="w1")
    assert remote.claim("b", "w2").result == b"5"
    assert remote.claim("nope", "w2").status == "absent"


def test_tcp_protocol_error_crosses_the_wire(tcp_store):
    store, remote = tcp_store
    remote.issue(_demand("a"))
    remote.take_pending("w1")
    remote.complete("a", b"1", worker_id="w1")
    with pytest.raises(ProtocolError):
        remote.complete("a", b"other", worker_id="w1")


def test_tcp_requeue_after_worker_loss(tcp_store):
    store, remote = tcp_store
    for sig in ("a", "b"):
        remote.issue(_demand(sig))
    remote.take_pending("w1")
    remote.take_pending("w1")
    assert remote.requeue_lost("w1") == 2
    assert store.pending_count() == 2


def test_tcp_connect_refused_is_a_transport_error():
    transport = TcpTransport(connect_timeout_s=0.5)
    with pytest.raises(TransportError):
        transport.request("127.0.0.1:1", Frame(op="take", worker="w"),
                          0.5, False)

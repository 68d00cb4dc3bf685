import random
import threading

import pytest

from src.collaboration.envelope import DataEnvelope
from src.collaboration.events import HandlerRegistration
from src.components.errors import (
    AlreadyBound,
    DuplicateId,
    DuplicateType,
    IllegalTransition,
    IncompatibleInterfaces,
    NoBinding,
    ProviderFault,
    ProviderInactive,
    RejectedValue,
    UnknownComponent,
    UnknownType,
)
from src.components.interfaces import (
    BindingMode,
    CollaborationStyle,
    DataFlow,
    Direction,
    InterfaceRef,
    LifecycleState,
)
from src.backchannel.adapters import PullClientAdapter, PullServerAdapter

from .support import BLOB, Provider

ACTIVE, DEACTIVATED, UNLOADED = LifecycleState.ACTIVE, LifecycleState.DEACTIVATED, LifecycleState.UNLOADED


def ref(text):
    return InterfaceRef.parse(text)


class TestTypesAndLoading:
    def test_load_registered_type(self, container):
        record = container.load_component(None, "gatherer1", "DataGatherer")
        assert record.state == LifecycleState.LOADED
        assert record.type_id == "DataGatherer"
        output = record.interface("output")
        assert output.style == CollaborationStyle.DATA
        assert output.flow == DataFlow.PUSH

    def test_duplicate_type(self, container):
        with pytest.raises(DuplicateType):
            container.register_component_type("DataGatherer", Provider)

    def test_unknown_type(self, container):
        with pytest.raises(UnknownType):
            container.load_component(None, "x", "NoSuchType")

    def test_duplicate_id(self, container):
        container.load_component(None, "q1", "DataQueue")
        with pytest.raises(DuplicateId):
            container.load_component(None, "q1", "DataQueue")

    def test_child_context_visible_recursively(self, container):
        child = container.create_context("child")
        container.load_component(child, "q1", "DataQueue")
        assert [r.id for r in container.query_components(container.root)] == []
        assert [r.id for r in container.query_components(container.root, recursive=True)] == ["q1"]

    def test_properties_initialised_from_config(self, container):
        record = container.load_component(None, "h1", "Hooked", {"size": 3})
        assert record.properties["size"] == 3

    def test_rejected_initial_property(self, container):
        with pytest.raises(RejectedValue):
            container.load_component(None, "h1", "Hooked", {"size": -1})
        assert container.find_record("h1") is None


class TestLifecycle:
    def test_full_legal_walk(self, container):
        container.load_component(None, "h1", "Hooked")
        for target in (ACTIVE, DEACTIVATED, ACTIVE, UNLOADED):
            container.set_lifecycle(None, "h1", target)
        assert container.find_record("h1") is None

    def test_operation_on_unloaded(self, container):
        container.load_component(None, "h1", "Hooked")
        container.unload("h1")
        with pytest.raises(UnknownComponent):
            container.activate("h1")
        with pytest.raises(UnknownComponent):
            container.describe_interfaces("h1")

    def test_activate_active_is_noop(self, container):
        container.load_component(None, "h1", "Hooked")
        container.activate("h1")
        container.activate("h1")
        assert container.instance("h1").calls == ["activate"]

    def test_illegal_edge_keeps_state(self, container):
        container.load_component(None, "h1", "Hooked")
        with pytest.raises(IllegalTransition):
            container.deactivate("h1")
        assert container.get_record("h1").state == LifecycleState.LOADED

    def test_failed_activation_rolls_back(self, container):
        container.load_component(None, "h1", "Hooked", {"broken": True})
        with pytest.raises(ProviderFault):
            container.activate("h1")
        assert container.get_record("h1").state == LifecycleState.LOADED

    def test_random_transition_sequences(self, container):
        legal = {
            LifecycleState.LOADED: {ACTIVE, UNLOADED},
            ACTIVE: {ACTIVE, DEACTIVATED, UNLOADED},
            DEACTIVATED: {ACTIVE, UNLOADED},
        }
        rng = random.Random(11)
        for n in range(200):
            component_id = f"h{n}"
            container.load_component(None, component_id, "Hooked")
            state = LifecycleState.LOADED
            for _ in range(rng.randint(1, 8)):
                target = rng.choice([ACTIVE, ACTIVE, DEACTIVATED, DEACTIVATED, UNLOADED])
                if target in legal[state]:
                    container.set_lifecycle(None, component_id, target)
                    state = target
                else:
                    with pytest.raises(IllegalTransition):
                        container.set_lifecycle(None, component_id, target)
                if state == UNLOADED:
                    assert container.find_record(component_id) is None
                    break
                assert container.get_record(component_id).state == state

    def test_hooks_follow_transitions(self, container):
        container.load_component(None, "h1", "Hooked")
        hooked = container.instance("h1")
        container.activate("h1")
        container.deactivate("h1")
        container.unload("h1")
        assert hooked.calls == ["activate", "deactivate", "unload"]


class TestDescribeInterfaces:
    def test_data_queue(self, container):
        container.load_component(None, "q1", "DataQueue")
        described = {(d.name, d.direction, d.style, d.flow) for d in container.describe_interfaces("q1")}
        assert described == {
            ("input", Direction.PROVIDED, CollaborationStyle.DATA, DataFlow.PUSH),
            ("pull", Direction.PROVIDED, CollaborationStyle.DATA, DataFlow.PULL),
        }

    def test_stable_and_complete(self, container):
        container.load_component(None, "t1", "Translator")
        first = container.describe_interfaces("t1")
        assert first == container.describe_interfaces("t1")
        assert all(d.endpoint is not None for d in first)

    def test_unknown(self, container):
        with pytest.raises(UnknownComponent):
            container.describe_interfaces("ghost")


class TestBroker:
    requirement = (CollaborationStyle.DATA, BLOB)

    def test_same_context(self, container):
        container.load_component(None, "p1", "Provider")
        assert container.broker(None, self.requirement) == [ref("p1.out")]

    def test_parent_fallback(self, container):
        child = container.create_context("child")
        container.load_component(None, "p1", "Provider")
        assert container.broker(child, self.requirement) == [ref("p1.out")]

    def test_nearest_context_wins(self, container):
        child = container.create_context("child")
        container.load_component(None, "p1", "Provider")
        container.load_component(child, "p2", "Provider")
        assert container.broker(child, self.requirement) == [ref("p2.out")]

    def test_nothing_anywhere(self, container):
        child = container.create_context("child")
        assert container.broker(child, (CollaborationStyle.SERVICE, BLOB)) == []

    def test_matches_ancestor_chain_oracle(self, container):
        rng = random.Random(5)
        for trial in range(50):
            parents = {}
            contexts = {"root": container.root}
            loaded = []
            for n in range(rng.randint(0, 5)):
                parent_id = rng.choice(list(contexts))
                depth = 0
                walker = parent_id
                while walker != "root":
                    walker = parents[walker]
                    depth += 1
                if depth >= 3:
                    continue
                ctx_id = f"t{trial}c{n}"
                contexts[ctx_id] = container.create_context(ctx_id, contexts[parent_id])
                parents[ctx_id] = parent_id
            for n in range(rng.randint(0, 12)):
                ctx_id = rng.choice(list(contexts))
                payload = rng.choice(["A", "B"])
                component_id = f"t{trial}p{n}"
                container.load_component(contexts[ctx_id], component_id, "Provider", {"payload": payload})
                loaded.append((ctx_id, component_id, payload))

            for ctx_id, ctx in contexts.items():
                for payload in ("A", "B", "C"):
                    expected = []
                    walker = ctx_id
                    while True:
                        expected = [InterfaceRef(c, "out") for owner, c, p in loaded if owner == walker and p == payload]
                        if expected or walker == "root":
                            break
                        walker = parents[walker]
                    assert container.broker(ctx, (CollaborationStyle.DATA, payload)) == expected

            for ctx_id in [c for c in contexts if c != "root" and parents[c] == "root"]:
                container.remove_context(contexts[ctx_id])
            for record in container.query_components(container.root):
                container.unload(record.id)

    def test_unloaded_component_disappears(self, container):
        container.load_component(None, "p1", "Provider")
        container.load_component(None, "c1", "BundleConsumer")
        container.unload("p1")
        assert container.broker(None, self.requirement) == []
        assert not any("p1" in (b.client.component_id, b.server.component_id) for b in container.all_bindings())


class TestBinding:
    def test_gatherer_output_to_queue(self, container):
        container.load_component(None, "gatherer1", "DataGatherer")
        container.load_component(None, "queue1", "DataQueue")
        binding = container.bind(ref("gatherer1.output"), ref("queue1.input"))
        assert binding.mode == BindingMode.EXPLICIT
        assert container.bindings_for(ref("gatherer1.output")) == [binding]
        assert binding in container.root.bindings

    def test_service_client_to_data_provider(self, container):
        container.load_component(None, "c1", "ServiceClient")
        container.load_component(None, "p1", "Provider")
        with pytest.raises(IncompatibleInterfaces):
            container.bind(ref("c1.svc"), ref("p1.out"))

    def test_payload_types_must_match(self, container):
        container.load_component(None, "c1", "BundleConsumer")
        container.load_component(None, "p1", "Provider")
        with pytest.raises(IncompatibleInterfaces):
            container.bind(ref("c1.source"), ref("p1.out"))

    def test_unicast_already_bound(self, container):
        container.load_component(None, "c1", "ServiceClient")
        container.load_component(None, "e1", "EchoService")
        container.load_component(None, "e2", "EchoService")
        container.bind(ref("c1.svc"), ref("e1.echo"))
        with pytest.raises(AlreadyBound):
            container.bind(ref("c1.svc"), ref("e2.echo"))

    def test_implicit_picks_first_in_broker_order(self, container):
        container.load_component(None, "c1", "ServiceClient")
        container.load_component(None, "e2", "EchoService")
        container.load_component(None, "e1", "EchoService")
        binding = container.bind(ref("c1.svc"), None, BindingMode.IMPLICIT)
        assert binding.server == ref("e2.echo")

    def test_implicit_without_provider(self, container):
        container.load_component(None, "c1", "ServiceClient")
        with pytest.raises(NoBinding):
            container.bind(ref("c1.svc"), None, BindingMode.IMPLICIT)

    def test_unbind(self, container):
        container.load_component(None, "c1", "ServiceClient")
        container.load_component(None, "e1", "EchoService")
        container.bind(ref("c1.svc"), ref("e1.echo"))
        assert len(container.unbind(ref("c1.svc"))) == 1
        assert container.bindings_for(ref("c1.svc")) == []

    def test_unload_removes_bindings(self, container):
        container.load_component(None, "gatherer1", "DataGatherer")
        container.load_component(None, "queue1", "DataQueue")
        container.bind(ref("gatherer1.output"), ref("queue1.input"))
        container.unload("queue1")
        assert container.all_bindings() == []


class TestHotSwap:
    def test_implicit_client_rebound_to_stateless_spare(self, container):
        container.load_component(None, "c1", "ServiceClient")
        container.load_component(None, "e1", "EchoService")
        container.load_component(None, "s1", "StatefulEcho")
        container.load_component(None, "e2", "EchoService")
        for component_id in ("e1", "s1", "e2"):
            container.activate(component_id)
        container.bind(ref("c1.svc"), None, BindingMode.IMPLICIT)

        container.unload("e1")

        [binding] = container.bindings_for(ref("c1.svc"))
        assert binding.server == ref("e2.echo")
        assert binding.mode == BindingMode.IMPLICIT
        response = container.instance("c1").port("svc").call(DataEnvelope.of([b"x"], BLOB))
        assert response.items() == [b"x"]

    def test_explicit_binding_is_not_swapped(self, container):
        container.load_component(None, "c1", "ServiceClient")
        container.load_component(None, "e1", "EchoService")
        container.load_component(None, "e2", "EchoService")
        container.bind(ref("c1.svc"), ref("e1.echo"))
        container.unload("e1")
        assert container.bindings_for(ref("c1.svc")) == []

    def test_no_stateless_spare(self, container):
        container.load_component(None, "c1", "ServiceClient")
        container.load_component(None, "e1", "EchoService")
        container.load_component(None, "s1", "StatefulEcho")
        container.bind(ref("c1.svc"), None, BindingMode.IMPLICIT)
        container.unload("e1")
        assert container.bindings_for(ref("c1.svc")) == []
        with pytest.raises(ProviderInactive):
            container.instance("c1").port("svc").call(DataEnvelope.of([b"x"], BLOB))

    def test_swap_dispatches_bound_event(self, container):
        seen = []
        container.events.register_handler(HandlerRegistration(
            handler=lambda e: seen.append((e.name, dict(e.payload))), source="c1", name="bound"))
        container.load_component(None, "c1", "ServiceClient")
        container.load_component(None, "e1", "EchoService")
        container.load_component(None, "e2", "EchoService")
        container.bind(ref("c1.svc"), None, BindingMode.IMPLICIT)
        container.unload("e1")
        assert [payload["server"] for _, payload in seen] == ["e1.echo", "e2.echo"]


class TestConfigure:
    def test_server_address_accepted(self, container):
        container.register_types(PullServerAdapter, PullClientAdapter)
        container.load_component(None, "pullClient1", "TcpPullClient")
        assert container.configure("pullClient1", "server_address", "127.0.0.1:7001")
        assert container.get_record("pullClient1").properties["server_address"] == "127.0.0.1:7001"

    def test_unknown_component(self, container):
        with pytest.raises(UnknownComponent):
            container.configure("ghost", "key", 1)

    def test_negative_port_rejected(self, container):
        container.register_types(PullServerAdapter, PullClientAdapter)
        container.load_component(None, "server1", "TcpPullServer")
        with pytest.raises(RejectedValue):
            container.configure("server1", "port", -1)
        assert "port" not in container.get_record("server1").properties

    def test_non_scalar_rejected(self, container):
        container.load_component(None, "h1", "Hooked")
        with pytest.raises(RejectedValue):
            container.configure("h1", "tags", ["a", "b"])

    def test_property_change_event(self, container):
        seen = []
        container.events.register_handler(HandlerRegistration(handler=seen.append, name="property_changed"))
        container.load_component(None, "h1", "Hooked")
        container.configure("h1", "size", 4)
        assert [(e.source, e.payload["key"], e.payload["value"]) for e in seen] == [("h1", "size", 4)]


def test_events_dispatch_outside_the_container_lock(container):
    """A handler may use the container from another thread while an event is dispatched"""
    finished = []

    def on_created(event):
        worker = threading.Thread(target=lambda: finished.append(container.find_record(event.source) is not None))
        worker.start()
        worker.join(2.0)

    container.events.register_handler(HandlerRegistration(handler=on_created, name="created"))
    container.load_component(None, "q1", "DataQueue")
    assert finished == [True]


def test_remove_context_unloads_members(container):
    child = container.create_context("child")
    grandchild = container.create_context("grandchild", child)
    container.load_component(child, "q1", "DataQueue")
    container.load_component(grandchild, "q2", "DataQueue")
    container.remove_context(child)
    assert container.find_record("q1") is None
    assert container.find_record("q2") is None
    with pytest.raises(UnknownComponent):
        container.context("grandchild")

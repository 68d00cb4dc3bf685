import time

import pytest

from src.agents.beliefs import atom
from src.agents.errors import UnknownAgent
from src.agents.transport import AclMessage, LocalTransport, Performative
from src.backchannel.adapters import traffic
from src.components.interfaces import InterfaceRef
from src.pipeline.advertising import Advertisement, Team
from src.pipeline.agents import (
    Mode,
    NodeEnvironment,
    PerformanceManagerAgent,
    TranslatorAgent,
    apply_action,
    fetch_from,
)
from src.pipeline.errors import SourceEmpty, SourceGone
from src.pipeline.index_store import IndexStore
from src.pipeline.node import PipelineNode
from src.pipeline.policy import ActionKind, ManagementAction

from .support import free_port, wait_until

CORPUS_IDS = [f"d{n:06d}" for n in range(1, 21)]
PIPELINE = [("DataGatherer", "n0:datagatherer-1"), ("Translator", "n0:translator-1"), ("Indexer", "n0:indexer-1")]


@pytest.fixture
def transport():
    return LocalTransport()


@pytest.fixture
def make_node(tmp_path, corpus, fast_settings, transport):
    """Build PipelineNodes sharing one run directory; all are shut down afterwards"""
    nodes = []

    def make(node_id="n0", mode=Mode.HYBRID, nodes_in_run=None, port_base=0, settings=None):
        env = NodeEnvironment(node_id, mode, str(corpus), str(tmp_path / "claims"), str(tmp_path / "index"),
                              settings or fast_settings, list(nodes_in_run or [node_id]), port_base, "n0:manager")
        node = PipelineNode(env, transport)
        nodes.append(node)
        return node

    yield make
    for node in nodes:
        node.shutdown()


class Inbox:
    """A message recorder registered on the transport under an agent id"""

    def __init__(self, transport, agent_id):
        self.agent_id = agent_id
        self.messages = []
        transport.register(agent_id, self._receive)

    def _receive(self, message):
        self.messages.append((time.monotonic(), message))

    def of(self, performative):
        return [m for _, m in self.messages if m.performative == performative]


def index_of(tmp_path):
    return IndexStore(str(tmp_path / "index"))


class TestSingleNodeRuns:
    @pytest.mark.parametrize("mode", [Mode.HYBRID, Mode.ACL_ONLY])
    def test_every_document_indexed_once(self, make_node, tmp_path, transport, mode):
        node = make_node(mode=mode)
        node.start(PIPELINE)
        assert wait_until(lambda: index_of(tmp_path).count() == 20, timeout=60)
        assert sorted(index_of(tmp_path).manifest()) == CORPUS_IDS
        assert wait_until(lambda: node.indexed() == 20)
        requests = transport.counters()["per_performative"].get("REQUEST", 0)
        if mode == Mode.HYBRID:
            assert requests == 0
        else:
            assert requests >= 4

    @pytest.mark.parametrize("mode", [Mode.HYBRID, Mode.ACL_ONLY])
    def test_terminate_and_create_mid_run(self, make_node, tmp_path, transport, fast_settings, mode):
        fast_settings.pipeline.batch_size = 1
        node = make_node(mode=mode)
        tester = Inbox(transport, "tester")
        node.start(PIPELINE + [("DataGatherer", "n0:datagatherer-2")])
        doomed = node.platform.get("n0:datagatherer-2")
        assert wait_until(lambda: doomed.ready)

        transport.send(AclMessage(Performative.REQUEST, "tester", doomed.id, atom("terminate")))
        transport.send(AclMessage(Performative.REQUEST, "tester", "n0:controller",
                                  atom("create", "Translator", "n0:translator-2", "")))
        assert wait_until(lambda: len(tester.of(Performative.AGREE)) == 2)
        assert wait_until(lambda: index_of(tmp_path).count() == 20, timeout=60)
        assert wait_until(lambda: doomed.retired, timeout=10)
        assert "n0:translator-2" in [agent.id for agent in node.platform.agents()]
        assert sorted(index_of(tmp_path).manifest()) == CORPUS_IDS

    def test_store_swapped_under_indexer(self, make_node, tmp_path):
        node = make_node()
        node.start(PIPELINE)
        indexer = node.platform.get("n0:indexer-1")
        assert wait_until(lambda: indexer.ready)
        node.container.unload("store-1")
        [binding] = node.container.bindings_for(InterfaceRef(indexer.worker_id, "store"))
        assert str(binding.server) == "store-2.index"
        assert wait_until(lambda: index_of(tmp_path).count() == 20, timeout=60)
        assert sorted(index_of(tmp_path).manifest()) == CORPUS_IDS

    def test_report(self, make_node):
        node = make_node()
        node.start(PIPELINE)
        report = node.report()
        assert report["node"] == "n0"
        assert report["mode"] == "HYBRID"
        assert "n0:controller" in report["agents"]
        assert report["rss_mib"] > 0


class TestManagementRequests:
    def test_halt_and_auto_resume(self, make_node, transport):
        node = make_node()
        tester = Inbox(transport, "tester")
        node.start([("DataGatherer", "n0:datagatherer-1")])
        gatherer = node.platform.get("n0:datagatherer-1")
        assert wait_until(lambda: gatherer.ready)

        transport.send(AclMessage(Performative.REQUEST, "tester", gatherer.id, atom("halt", 1.0), "conv-1"))
        assert wait_until(lambda: tester.of(Performative.AGREE))
        agreed_at = next(t for t, m in tester.messages if m.performative == Performative.AGREE)
        [agree] = tester.of(Performative.AGREE)
        assert agree.conversation_id == "conv-1"
        assert gatherer.worker.properties["paused"] is True

        assert wait_until(lambda: not gatherer.worker.properties["paused"], timeout=5)
        assert wait_until(lambda: any(t > agreed_at + 1.0 and m.sender == gatherer.id
                                      for t, m in tester.messages), timeout=5)
        halted_ads = [m for t, m in tester.messages
                      if m.sender == gatherer.id and m.performative == Performative.INFORM
                      and agreed_at < t < agreed_at + 0.8]
        assert halted_ads == []

    def test_unsupported_request_refused(self, make_node, transport):
        node = make_node()
        tester = Inbox(transport, "tester")
        node.start([("DataGatherer", "n0:datagatherer-1")])
        gatherer = node.platform.get("n0:datagatherer-1")
        assert wait_until(lambda: gatherer.ready)
        transport.send(AclMessage(Performative.REQUEST, "tester", gatherer.id, atom("dance")))
        assert wait_until(lambda: tester.of(Performative.REFUSE))

    def test_controller_creates_agent(self, make_node, transport):
        node = make_node()
        tester = Inbox(transport, "tester")
        node.start()
        transport.send(AclMessage(Performative.REQUEST, "tester", "n0:controller",
                                  atom("create", "Indexer", "n0:indexer-9", "")))
        assert wait_until(lambda: tester.of(Performative.AGREE))
        assert tester.of(Performative.AGREE)[0].content == atom("created", "n0:indexer-9")
        assert "n0:indexer-9" in [agent.id for agent in node.platform.agents()]


class TestFetch:
    def _consumer(self, node, mode_ready=True):
        consumer = TranslatorAgent(node.platform, "n0:translator-1", node.env)
        node.platform.add_agent(consumer, start=False)
        if mode_ready:
            for _ in range(100):
                if consumer.ready:
                    break
                consumer.step()
        return consumer

    def _ad(self, queue_len, queue="g-queue"):
        return Advertisement("n0:g", Team.GATHER, queue_len, "n0", time.monotonic(), queue)

    def test_unknown_source(self, make_node):
        consumer = self._consumer(make_node(mode=Mode.ACL_ONLY))
        with pytest.raises(SourceGone):
            fetch_from(consumer, "n0:g", 1)

    def test_empty_source(self, make_node):
        consumer = self._consumer(make_node(mode=Mode.ACL_ONLY))
        consumer.book.update(self._ad(0))
        with pytest.raises(SourceEmpty):
            fetch_from(consumer, "n0:g", 1)

    def test_directed_fetch_asks_anyway(self, make_node, transport):
        consumer = self._consumer(make_node(mode=Mode.ACL_ONLY))
        producer = Inbox(transport, "n0:g")
        consumer.book.update(self._ad(0))
        consumer.set_route("n0:g", 5.0)
        fetch = fetch_from(consumer, "n0:g", 1)
        assert fetch.via == "acl"
        [request] = producer.of(Performative.REQUEST)
        assert request.content == atom("fetch", 1)
        assert request.conversation_id == fetch.conversation_id

    def test_unreachable_source(self, make_node):
        consumer = self._consumer(make_node(mode=Mode.ACL_ONLY))
        consumer.book.update(self._ad(3))
        with pytest.raises(SourceGone):
            fetch_from(consumer, "n0:g", 1)

    def test_local_wiring_needs_no_messages(self, make_node, transport):
        node = make_node()
        node.container.load_component(None, "g-queue", "DataQueue")
        node.container.activate("g-queue")
        consumer = self._consumer(node)
        assert consumer.ready
        consumer.book.update(self._ad(2))
        fetch = fetch_from(consumer, "n0:g", 1)
        assert fetch.via == "local"
        [binding] = node.container.bindings_for(InterfaceRef(consumer.worker_id, "source"))
        assert str(binding.server) == "g-queue.pull"
        assert atom("sourcing", consumer.id, "n0:g") in consumer.beliefs
        assert transport.counters()["per_performative"].get("REQUEST", 0) == 0
        assert consumer.fetches == [fetch]

    def _timed_out_fetch(self, consumer, transport):
        Inbox(transport, "n0:g")
        consumer.book.update(self._ad(3))
        fetch = fetch_from(consumer, "n0:g", 1)
        consumer._pursue_requests(time.monotonic() + consumer.pipeline.fetch_timeout + 1)
        return fetch

    def test_timed_out_fetch_holds_drain_until_answered(self, make_node, transport):
        consumer = self._consumer(make_node(mode=Mode.ACL_ONLY))
        fetch = self._timed_out_fetch(consumer, transport)
        assert consumer.outstanding is None
        assert consumer.late == {fetch.conversation_id: "n0:g"}
        assert not consumer.drained()

        consumer.handle_message(AclMessage(Performative.REFUSE, "n0:g", consumer.id, atom("empty", "n0:g"),
                                           fetch.conversation_id))
        assert consumer.late == {}
        assert wait_until(consumer.drained)

    def test_timed_out_fetch_released_when_source_retires(self, make_node, transport):
        consumer = self._consumer(make_node(mode=Mode.ACL_ONLY))
        self._timed_out_fetch(consumer, transport)
        consumer.handle_message(AclMessage(Performative.REFUSE, "n0:g", consumer.id, atom("empty", "n0:g"), "other#1"))
        assert not consumer.drained()

        consumer.handle_message(AclMessage(Performative.INFORM, "n0:g", consumer.id, atom("retired", "n0:g")))
        assert consumer.late == {}
        assert wait_until(consumer.drained)


class TestPerformanceManager:
    def _manager(self, node):
        manager = PerformanceManagerAgent(node.platform, "n0:manager", node.env)
        node.platform.add_agent(manager, start=False)
        return manager

    def test_scripted_imbalance(self, make_node, transport):
        node = make_node()
        manager = self._manager(node)
        gatherers = {agent_id: Inbox(transport, agent_id) for agent_id in ("n0:g1", "n0:g2")}
        controller = Inbox(transport, "n0:controller")
        manager.observe(Advertisement("n0:t1", Team.TRANSLATE, 0, "n0", 0.5, "t1-queue", active_components=2))

        clock = 1.0
        level = {"n0:g1": 0, "n0:g2": 0}

        def window():
            nonlocal clock
            for _ in range(5):
                for agent_id in ("n0:g1", "n0:g2"):
                    if agent_id in manager.terminated:
                        continue
                    level[agent_id] += 1
                    clock += 1.0
                    manager.observe(Advertisement(agent_id, Team.GATHER, level[agent_id], "n0", clock,
                                                  "q", active_components=2))
            manager.tick()

        window()
        for inbox in gatherers.values():
            [request] = inbox.of(Performative.REQUEST)
            assert request.content == atom("halt", 5.0)

        window()
        window()
        kinds = [action.kind for action in manager.applied]
        assert kinds == [ActionKind.HALT] * 4 + [ActionKind.TERMINATE, ActionKind.CREATE]
        assert gatherers["n0:g1"].of(Performative.REQUEST)[-1].content == atom("terminate")
        [create] = controller.of(Performative.REQUEST)
        assert create.content.predicate == "create"
        assert create.content.args[0] == "Translator"
        assert create.content.args[1].startswith("n0:translator-m")
        assert manager.terminated == {"n0:g1"}
        assert len(manager.traces()["GATHER"]) == 30

    def test_unknown_target(self, make_node):
        manager = self._manager(make_node())
        with pytest.raises(UnknownAgent):
            apply_action(manager, ManagementAction(ActionKind.HALT, "n0:ghost", Team.GATHER, 1.0))

    def test_last_agent_not_terminated(self, make_node, transport):
        manager = self._manager(make_node())
        Inbox(transport, "n0:g1")
        manager.observe(Advertisement("n0:g1", Team.GATHER, 4, "n0", 1.0))
        with pytest.raises(ValueError):
            apply_action(manager, ManagementAction(ActionKind.TERMINATE, "n0:g1", Team.GATHER))
        assert manager.terminated == set()

    def test_agree_counted(self, make_node, transport):
        manager = self._manager(make_node())
        manager.deliver(AclMessage(Performative.AGREE, "n0:g1", manager.id, atom("halt", 5.0)))
        manager.step()
        assert manager.acknowledged == 1


class TestCrossNode:
    def test_hybrid_over_backchannels(self, make_node, tmp_path, transport):
        run_nodes = ["n0", "n1"]
        first = make_node("n0", nodes_in_run=run_nodes, port_base=free_port())
        second = make_node("n1", nodes_in_run=run_nodes, port_base=free_port())
        first.start([("DataGatherer", "n0:datagatherer-1"), ("Indexer", "n0:indexer-1")])
        second.start([("Translator", "n1:translator-1")])
        assert wait_until(lambda: index_of(tmp_path).count() == 20, timeout=60)
        assert sorted(index_of(tmp_path).manifest()) == CORPUS_IDS
        assert traffic.snapshot()["bytes_sent"] > 0
        assert transport.counters()["per_performative"].get("REQUEST", 0) == 0
        translator = second.platform.get("n1:translator-1")
        assert translator.fetches and translator.fetches[0].via == "backchannel"

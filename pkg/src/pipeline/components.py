"""
Pipeline Components

Component types of the indexing pipeline. Workers (DataGatherer, Translator,
Indexer) run on scheduler tasks while their agents deliberate; DataQueue is
the only state a worker shares with its agent.

A worker that pulled a bundle but could not hand it on keeps it as pending
and retries before pulling anything else, so a rebinding or a hot-swap never
drops a bundle.
"""

import struct
import threading
from collections import deque
from typing import Any, Deque, Dict, Optional

from ..backchannel.errors import BackchannelError
from ..collaboration.envelope import DataEnvelope
from ..components.component import Component
from ..components.errors import ContainerError
from .documents import BUNDLE_PAYLOAD_TYPE, DocumentBundle, Stage
from .errors import PipelineError
from .index_store import IndexStore
from .sources import CorpusSource
from .translation import DocumentTranslator

_COUNT = struct.Struct(">I")

EMPTY_PULLS_BEFORE_REPORT = 20


class DataQueue(Component):
    """FIFO of serialized bundles: push on `input`, pull on `pull`"""

    type_id = "DataQueue"

    def __init__(self, component_id: str, properties: Optional[Dict[str, Any]] = None):
        super().__init__(component_id, properties)
        self._items: Deque[bytes] = deque()
        self._lock = threading.Lock()
        self.total_in = 0
        self.total_out = 0

    def get_interfaces_info(self):
        return [
            self.provide_push("input", BUNDLE_PAYLOAD_TYPE, self),
            self.provide_pull("pull", BUNDLE_PAYLOAD_TYPE, self),
        ]

    def push(self, envelope: DataEnvelope) -> None:
        items = envelope.items()
        with self._lock:
            was_empty = not self._items
            self._items.extend(items)
            self.total_in += len(items)
            length = len(self._items)
        if was_empty and length:
            self.emit("queue_grew", length)

    def pull(self, max_items: int) -> DataEnvelope:
        with self._lock:
            count = min(max_items, len(self._items))
            items = [self._items.popleft() for _ in range(count)]
            self.total_out += count
        return DataEnvelope.of(items, BUNDLE_PAYLOAD_TYPE)

    def __len__(self):
        with self._lock:
            return len(self._items)


class WorkerComponent(Component):
    """
    Base for components that loop on a scheduler task while ACTIVE

    Properties:
        paused: When true, no new work is started (pending work still flushes)
        batch: Items per unit of work
        idle_sleep: Seconds to wait after a loop that did nothing
    """

    def __init__(self, component_id: str, properties: Optional[Dict[str, Any]] = None):
        super().__init__(component_id, properties)
        self.properties.setdefault("paused", False)
        self.properties.setdefault("batch", 1)
        self.properties.setdefault("idle_sleep", 0.01)
        self.pending: Optional[DataEnvelope] = None
        self.busy = False
        self.processed = 0
        self.errors = 0

    def validate_property(self, key, value):
        if key == "paused" and not isinstance(value, bool):
            raise ValueError("paused must be a boolean")
        if key == "batch" and (isinstance(value, bool) or not isinstance(value, int) or value < 1):
            raise ValueError("batch must be a positive integer")
        if key == "idle_sleep" and (isinstance(value, bool) or not isinstance(value, (int, float)) or value < 0):
            raise ValueError("idle_sleep must be a non-negative number")

    @property
    def idle(self) -> bool:
        return not self.busy and self.pending is None

    def on_activate(self):
        self.run_task(self._loop, f"{self.id}-worker")

    def _loop(self, stop: threading.Event):
        while not stop.is_set():
            did_work = False
            self.busy = True
            try:
                if self.pending is not None:
                    did_work = self._flush()
                elif not self.properties["paused"]:
                    did_work = self.work_once()
            except (ContainerError, BackchannelError, PipelineError) as e:
                self.errors += 1
                self.on_work_error(e)
            except ValueError as e:
                self.errors += 1
                self.logger.warning(f"Dropped undecodable work item: {str(e)}")
            finally:
                self.busy = False
            if not did_work:
                stop.wait(float(self.properties["idle_sleep"]))

    def _flush(self) -> bool:
        envelope, self.pending = self.pending, None
        try:
            self.deliver(envelope)
        except (ContainerError, BackchannelError, PipelineError):
            self.pending = envelope
            raise
        return True

    def work_once(self) -> bool:
        """Do one unit of work; return False when there was nothing to do"""
        raise NotImplementedError

    def deliver(self, envelope: DataEnvelope) -> None:
        """Hand a finished envelope downstream"""
        raise NotImplementedError

    def produce(self, envelope: DataEnvelope) -> None:
        self.pending = envelope
        self._flush()

    def on_work_error(self, error: Exception) -> None:
        if isinstance(error, PipelineError):
            self.logger.warning(f"{type(error).__name__}: {str(error)}")
        else:
            self.logger.debug(f"{type(error).__name__}: {str(error)}")


class PullingWorker(WorkerComponent):
    """A worker fed through a REQUIRED pull interface named `source`"""

    def __init__(self, component_id: str, properties: Optional[Dict[str, Any]] = None):
        super().__init__(component_id, properties)
        self._empty_pulls = 0
        self._gone_reported = False

    def pull_source(self) -> Optional[DataEnvelope]:
        source = self.port("source")
        if not source.is_bound:
            return None
        try:
            envelope = source.pull(int(self.properties["batch"]))
        except ContainerError as e:
            if not self._gone_reported:
                self._gone_reported = True
                self.emit("source_gone", {"error": str(e)})
            raise
        self._gone_reported = False
        if envelope.is_empty:
            self._empty_pulls += 1
            if self._empty_pulls % EMPTY_PULLS_BEFORE_REPORT == 0:
                self.emit("source_empty")
            return None
        self._empty_pulls = 0
        return envelope

    def on_property_changed(self, key, value):
        if key == "paused" and not value:
            self._empty_pulls = 0


class DataGatherer(WorkerComponent):
    """
    Claims corpus documents and pushes RAW bundles on `output`

    Properties:
        corpus_dir: Corpus directory
        claims_dir: Claim directory shared by all gatherers of a run
    """

    type_id = "DataGatherer"

    def __init__(self, component_id: str, properties: Optional[Dict[str, Any]] = None):
        super().__init__(component_id, properties)
        self._source: Optional[CorpusSource] = None
        self._bundles = 0
        self._exhausted_reported = False

    def get_interfaces_info(self):
        return [self.require_push("output", BUNDLE_PAYLOAD_TYPE)]

    def validate_property(self, key, value):
        super().validate_property(key, value)
        if key in ("corpus_dir", "claims_dir") and not (isinstance(value, str) and value):
            raise ValueError(f"{key} must be a non-empty path")

    def on_property_changed(self, key, value):
        if key in ("corpus_dir", "claims_dir"):
            self._source = None

    def gather(self) -> Optional[DocumentBundle]:
        """
        Claim up to `batch` documents into a RAW bundle

        Returns:
            The bundle, or None when every document has been claimed

        Raises:
            SourceUnavailable: The corpus cannot be read
        """
        if self._source is None:
            self._source = CorpusSource(self.properties["corpus_dir"], self.properties.get("claims_dir"))
        docs = self._source.claim_batch(int(self.properties["batch"]))
        if not docs:
            if not self._exhausted_reported:
                self._exhausted_reported = True
                self.emit("source_exhausted", self._bundles)
            return None
        self._bundles += 1
        return DocumentBundle(f"{self.id}-b{self._bundles}", tuple(docs), Stage.RAW)

    def work_once(self) -> bool:
        if "corpus_dir" not in self.properties:
            return False
        bundle = self.gather()
        if bundle is None:
            return False
        self.produce(DataEnvelope.of([bundle.to_bytes()], BUNDLE_PAYLOAD_TYPE))
        self.processed += len(bundle)
        return True

    def deliver(self, envelope: DataEnvelope) -> None:
        self.port("output").push(envelope)


class Translator(PullingWorker):
    """Pulls RAW bundles on `source`, pushes TRANSLATED ones on `output`"""

    type_id = "Translator"

    def __init__(self, component_id: str, properties: Optional[Dict[str, Any]] = None):
        super().__init__(component_id, properties)
        self.translator = DocumentTranslator()
        self.skipped = 0

    def get_interfaces_info(self):
        return [
            self.require_pull("source", BUNDLE_PAYLOAD_TYPE),
            self.require_push("output", BUNDLE_PAYLOAD_TYPE),
        ]

    def work_once(self) -> bool:
        envelope = self.pull_source()
        if envelope is None:
            return False
        translated = []
        for item in envelope.items():
            bundle, skipped = self.translator.translate(DocumentBundle.from_bytes(item))
            for error in skipped:
                self.skipped += 1
                self.emit("malformed_doc", {"doc_id": error.doc_id, "reason": error.reason})
            translated.append(bundle.to_bytes())
            self.processed += len(bundle)
        self.produce(DataEnvelope.of(translated, BUNDLE_PAYLOAD_TYPE))
        return True

    def deliver(self, envelope: DataEnvelope) -> None:
        self.port("output").push(envelope)


class Indexer(PullingWorker):
    """Pulls TRANSLATED bundles on `source` and sends them to the `store` service"""

    type_id = "Indexer"

    def get_interfaces_info(self):
        return [
            self.require_pull("source", BUNDLE_PAYLOAD_TYPE),
            self.require_service("store", BUNDLE_PAYLOAD_TYPE),
        ]

    def work_once(self) -> bool:
        envelope = self.pull_source()
        if envelope is None:
            return False
        self.produce(envelope)
        return True

    def deliver(self, envelope: DataEnvelope) -> None:
        response = self.port("store").call(envelope)
        (indexed,) = _COUNT.unpack(response.items()[0])
        self.processed += indexed
        if indexed:
            self.emit("indexed", indexed)


class IndexStoreService(Component):
    """
    Stateless SERVICE front of the shared on-disk index

    Request: envelope of TRANSLATED bundles; response: one item holding the
    number of documents indexed (4-byte big-endian).
    """

    type_id = "IndexStore"
    stateless = True

    def __init__(self, component_id: str, properties: Optional[Dict[str, Any]] = None):
        super().__init__(component_id, properties)
        self._store: Optional[IndexStore] = None

    def get_interfaces_info(self):
        return [self.provide_service("index", BUNDLE_PAYLOAD_TYPE, self.handle)]

    def validate_property(self, key, value):
        if key == "index_dir" and not (isinstance(value, str) and value):
            raise ValueError("index_dir must be a non-empty path")

    def on_property_changed(self, key, value):
        if key == "index_dir":
            self._store = None

    @property
    def store(self) -> IndexStore:
        if self._store is None:
            self._store = IndexStore(self.properties["index_dir"])
        return self._store

    def handle(self, request: DataEnvelope) -> DataEnvelope:
        indexed = 0
        for item in request.items():
            indexed += self.store.index(DocumentBundle.from_bytes(item))
        return DataEnvelope.of([_COUNT.pack(indexed)], BUNDLE_PAYLOAD_TYPE)


PIPELINE_COMPONENT_TYPES = (DataQueue, DataGatherer, Translator, Indexer, IndexStoreService)

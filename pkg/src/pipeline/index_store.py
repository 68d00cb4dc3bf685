"""
Index Store

Append-only inverted index on disk, shared by every indexer of a run:

    postings.tsv   term<TAB>doc_id<TAB>tf
    manifest.txt   one doc_id per line, each indexed doc exactly once

Writers take an exclusive advisory lock on the store; a doc_id already in
the manifest is never indexed again.
"""

import fcntl
import logging
import os
from collections import Counter
from contextlib import contextmanager
from typing import Iterator, List, Set, Tuple

from .documents import CanonicalDoc, DocumentBundle, Stage
from .errors import StoreUnavailable

logger = logging.getLogger('hybrid-indexer.index')

POSTINGS_FILE = "postings.tsv"
MANIFEST_FILE = "manifest.txt"
LOCK_FILE = ".lock"


def term_frequencies(doc: CanonicalDoc) -> Counter:
    return Counter(token.lower() for token in doc.body.split())


class IndexStore:
    def __init__(self, directory: str):
        self.directory = directory
        self.postings_path = os.path.join(directory, POSTINGS_FILE)
        self.manifest_path = os.path.join(directory, MANIFEST_FILE)
        self.lock_path = os.path.join(directory, LOCK_FILE)
        self._known: Set[str] = set()
        self._manifest_offset = 0

    @contextmanager
    def _locked(self):
        try:
            os.makedirs(self.directory, exist_ok=True)
            lock = open(self.lock_path, "a")
        except OSError as e:
            raise StoreUnavailable(f"Index store {self.directory} is not writable: {str(e)}") from e
        try:
            fcntl.flock(lock.fileno(), fcntl.LOCK_EX)
            yield
        finally:
            fcntl.flock(lock.fileno(), fcntl.LOCK_UN)
            lock.close()

    def _refresh_manifest(self) -> None:
        """Read manifest lines appended (by any process) since the last refresh"""
        if not os.path.exists(self.manifest_path):
            return
        with open(self.manifest_path, "r", encoding="utf-8") as manifest:
            manifest.seek(self._manifest_offset)
            for line in manifest:
                if line.endswith("\n"):
                    self._known.add(line.strip())
                    self._manifest_offset += len(line.encode("utf-8"))

    def index(self, bundle: DocumentBundle) -> int:
        """
        Append postings for every document not yet in the manifest

        Returns:
            int: Number of documents indexed by this call

        Raises:
            StoreUnavailable: The store directory cannot be written
        """
        if bundle.stage != Stage.TRANSLATED:
            raise ValueError(f"Bundle {bundle.bundle_id} is not TRANSLATED")
        indexed = 0
        with self._locked():
            try:
                self._refresh_manifest()
                fresh = [doc for doc in bundle.docs if doc.doc_id not in self._known]
                if not fresh:
                    return 0
                with open(self.postings_path, "a", encoding="utf-8") as postings:
                    for doc in fresh:
                        for term, tf in sorted(term_frequencies(doc).items()):
                            postings.write(f"{term}\t{doc.doc_id}\t{tf}\n")
                with open(self.manifest_path, "a", encoding="utf-8") as manifest:
                    for doc in fresh:
                        manifest.write(f"{doc.doc_id}\n")
                        self._known.add(doc.doc_id)
                        indexed += 1
            except OSError as e:
                raise StoreUnavailable(f"Index store {self.directory} failed: {str(e)}") from e
        logger.debug(f"Indexed {indexed} of {len(bundle)} docs from {bundle.bundle_id}")
        return indexed

    def manifest(self) -> List[str]:
        if not os.path.exists(self.manifest_path):
            return []
        with open(self.manifest_path, "r", encoding="utf-8") as manifest:
            return [line.strip() for line in manifest if line.strip()]

    def count(self) -> int:
        return len(self.manifest())

    def postings(self) -> Iterator[Tuple[str, str, int]]:
        if not os.path.exists(self.postings_path):
            return
        with open(self.postings_path, "r", encoding="utf-8") as postings:
            for line in postings:
                term, doc_id, tf = line.rstrip("\n").split("\t")
                yield term, doc_id, int(tf)

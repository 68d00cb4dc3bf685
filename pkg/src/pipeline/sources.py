"""
Corpus Source

This module provides functionality to read corpus documents for gatherers.
Documents are files named <doc_id>.<txt|htm|bin>; a gatherer owns a document
once it has created its zero-length claim file, which is done atomically with
create-exclusive so that concurrent gatherers never claim the same document.
"""

import logging
import os
from typing import List, Optional

from .documents import DocFormat, RawDoc
from .errors import SourceUnavailable

logger = logging.getLogger('hybrid-indexer.sources')

CLAIM_SUFFIX = ".claim"


def split_name(filename: str):
    """'d000042.htm' -> ('d000042', DocFormat.MARKUP); None for foreign files"""
    stem, _, extension = filename.rpartition(".")
    if not stem:
        return None
    try:
        return stem, DocFormat.from_extension(extension)
    except ValueError:
        return None


class CorpusSource:
    """
    Class for claiming and reading documents from a corpus directory

    Args:
        directory: Corpus directory
        claims_dir: Where claim files go; defaults to <directory>/.claims
    """

    def __init__(self, directory: str, claims_dir: Optional[str] = None):
        self.directory = directory
        self.claims_dir = claims_dir or os.path.join(directory, ".claims")
        self._listing: Optional[List[str]] = None
        self._cursor = 0

    def _files(self) -> List[str]:
        if self._listing is None:
            try:
                names = sorted(os.listdir(self.directory))
                os.makedirs(self.claims_dir, exist_ok=True)
            except OSError as e:
                raise SourceUnavailable(f"Cannot read corpus {self.directory}: {str(e)}") from e
            self._listing = [name for name in names
                             if split_name(name) and os.path.isfile(os.path.join(self.directory, name))]
            logger.info(f"Corpus {self.directory} lists {len(self._listing)} documents")
        return self._listing

    def _claim(self, doc_id: str) -> bool:
        path = os.path.join(self.claims_dir, doc_id + CLAIM_SUFFIX)
        try:
            fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY, 0o644)
        except FileExistsError:
            return False
        except OSError as e:
            raise SourceUnavailable(f"Cannot write claim {path}: {str(e)}") from e
        os.close(fd)
        return True

    def claim_batch(self, batch: int) -> List[RawDoc]:
        """
        Claim and read up to `batch` unclaimed documents, in file-name order

        Returns:
            List[RawDoc]: Empty once every document has been claimed

        Raises:
            SourceUnavailable: The corpus or claim directory cannot be used
        """
        if batch < 1:
            raise ValueError("batch must be positive")
        files = self._files()
        docs: List[RawDoc] = []
        while len(docs) < batch and self._cursor < len(files):
            name = files[self._cursor]
            self._cursor += 1
            doc_id, fmt = split_name(name)
            if not self._claim(doc_id):
                continue
            path = os.path.join(self.directory, name)
            try:
                with open(path, "rb") as file:
                    content = file.read()
            except OSError as e:
                raise SourceUnavailable(f"Cannot read {path}: {str(e)}") from e
            docs.append(RawDoc(doc_id, fmt, content, f"file://{os.path.abspath(path)}"))
        return docs

    @property
    def exhausted(self) -> bool:
        return self._listing is not None and self._cursor >= len(self._listing)

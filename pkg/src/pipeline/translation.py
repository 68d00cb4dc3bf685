"""
Document Translation

This module provides functionality to convert raw corpus documents into the
canonical tagged-text form: TXT passes through, MARKUP has its tags stripped,
BINARY keeps its printable runs of four or more bytes.
"""

import html
import logging
import re
from typing import List, Tuple

from .documents import CanonicalDoc, DocFormat, DocumentBundle, RawDoc, Stage
from .errors import MalformedDoc

logger = logging.getLogger('hybrid-indexer.translation')

MIN_PRINTABLE_RUN = 4
TITLE_LENGTH = 80

_TAG = re.compile(r"<[^>]*>")
_SCRIPT = re.compile(r"<(script|style)\b[^>]*>.*?</\1\s*>", re.IGNORECASE | re.DOTALL)
_TITLE = re.compile(r"<title\b[^>]*>(.*?)</title\s*>", re.IGNORECASE | re.DOTALL)
_PRINTABLE_RUN = re.compile(rb"[\x20-\x7e]{%d,}" % MIN_PRINTABLE_RUN)


def strip_tags(markup: str) -> str:
    """Drop tags (and script/style bodies), unescape entities, collapse whitespace"""
    text = _SCRIPT.sub(" ", markup)
    text = _TAG.sub(" ", text)
    return " ".join(html.unescape(text).split())


def printable_runs(data: bytes, min_length: int = MIN_PRINTABLE_RUN) -> List[str]:
    if min_length == MIN_PRINTABLE_RUN:
        pattern = _PRINTABLE_RUN
    else:
        pattern = re.compile(rb"[\x20-\x7e]{%d,}" % min_length)
    return [run.decode("ascii") for run in pattern.findall(data)]


def _first_line(text: str) -> str:
    for line in text.splitlines():
        if line.strip():
            return " ".join(line.split())[:TITLE_LENGTH]
    return ""


class DocumentTranslator:
    """
    Class for converting raw documents to canonical records
    """

    def translate_doc(self, doc: RawDoc) -> CanonicalDoc:
        """
        Convert one document

        Args:
            doc: Raw document

        Returns:
            CanonicalDoc: The canonical record, same doc_id

        Raises:
            MalformedDoc: Text formats that are not valid UTF-8
        """
        if doc.format == DocFormat.BINARY:
            body = " ".join(printable_runs(doc.content))
            return CanonicalDoc(doc.doc_id, doc.source_uri, _first_line(body), body)
        try:
            text = doc.content.decode("utf-8")
        except UnicodeDecodeError as e:
            raise MalformedDoc(doc.doc_id, f"not UTF-8 at byte {e.start}") from e
        if doc.format == DocFormat.TXT:
            return CanonicalDoc(doc.doc_id, doc.source_uri, _first_line(text), text)
        match = _TITLE.search(text)
        body = strip_tags(text)
        title = strip_tags(match.group(1)) if match else _first_line(body)
        return CanonicalDoc(doc.doc_id, doc.source_uri, title, body)

    def translate(self, bundle: DocumentBundle) -> Tuple[DocumentBundle, List[MalformedDoc]]:
        """
        Convert a RAW bundle; malformed documents are skipped and returned

        Returns:
            (TRANSLATED bundle with the same bundle_id, skipped documents)
        """
        if bundle.stage != Stage.RAW:
            raise ValueError(f"Bundle {bundle.bundle_id} is already {bundle.stage.value}")
        translated, skipped = [], []
        for doc in bundle.docs:
            try:
                translated.append(self.translate_doc(doc))
            except MalformedDoc as e:
                logger.warning(f"Skipping malformed document {e.doc_id}: {e.reason}")
                skipped.append(e)
        return DocumentBundle(bundle.bundle_id, tuple(translated), Stage.TRANSLATED), skipped


def translate(bundle: DocumentBundle) -> Tuple[DocumentBundle, List[MalformedDoc]]:
    return DocumentTranslator().translate(bundle)

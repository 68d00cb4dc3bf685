"""
Synthetic Corpus

Deterministic stand-in for a static document collection: for a fixed seed the
generated directory is byte-identical. Formats are drawn roughly 60% TXT, 30%
MARKUP and 10% BINARY; sizes between 0.5 and 8 KiB.
"""

import logging
import os
import random
import string
from typing import Dict, List

from ..pipeline.documents import DocFormat
from ..pipeline.sources import split_name
from .errors import DirectoryNotWritable

logger = logging.getLogger('hybrid-indexer.corpus')

FORMAT_WEIGHTS = {DocFormat.TXT: 60, DocFormat.MARKUP: 30, DocFormat.BINARY: 10}
MIN_SIZE = 512
MAX_SIZE = 8 * 1024
VOCABULARY_SIZE = 2000


def doc_id_for(n: int) -> str:
    return f"d{n:06d}"


def _vocabulary(rng: random.Random) -> List[str]:
    words = set()
    while len(words) < VOCABULARY_SIZE:
        words.add("".join(rng.choice(string.ascii_lowercase) for _ in range(rng.randint(4, 10))))
    return sorted(words)


def _words(rng: random.Random, vocabulary: List[str], size: int) -> str:
    parts: List[str] = []
    length = 0
    while length < size:
        word = rng.choice(vocabulary)
        parts.append(word)
        length += len(word) + 1
    return " ".join(parts)


def _title(rng: random.Random, vocabulary: List[str]) -> str:
    return " ".join(rng.choice(vocabulary) for _ in range(rng.randint(2, 6))).title()


def render_document(fmt: DocFormat, rng: random.Random, vocabulary: List[str], size: int) -> bytes:
    """Content of roughly `size` bytes in the given format"""
    title = _title(rng, vocabulary)
    if fmt == DocFormat.TXT:
        return f"{title}\n\n{_words(rng, vocabulary, size - len(title) - 2)}\n".encode("utf-8")
    if fmt == DocFormat.MARKUP:
        head = f"<html><head><title>{title}</title></head><body>"
        paragraphs = []
        remaining = size - len(head) - len("</body></html>")
        while remaining > 0:
            text = _words(rng, vocabulary, min(remaining, rng.randint(80, 400)))
            first, _, rest = text.partition(" ")
            paragraph = f"<p><b>{first}</b> {rest}</p>"
            paragraphs.append(paragraph)
            remaining -= len(paragraph)
        return (head + "".join(paragraphs) + "</body></html>").encode("utf-8")
    chunks = []
    length = 0
    while length < size:
        noise = bytes(rng.randrange(0, 0x20) for _ in range(rng.randint(1, 24)))
        word = rng.choice(vocabulary).encode("ascii")
        chunks.append(noise + word)
        length += len(noise) + len(word)
    return b"".join(chunks)


def corpus_files(directory: str) -> List[str]:
    """Corpus document file names in directory, sorted"""
    return sorted(name for name in os.listdir(directory) if split_name(name))


def generate_corpus(n: int, seed: int, out: str) -> str:
    """
    Write n documents named d000001... into out

    Args:
        n: Number of documents (>= 1)
        seed: Generator seed
        out: Target directory; earlier corpus files in it are replaced

    Returns:
        str: The corpus directory

    Raises:
        DirectoryNotWritable: out cannot be created or written
    """
    if n < 1:
        raise ValueError("A corpus needs at least one document")
    try:
        os.makedirs(out, exist_ok=True)
        for name in corpus_files(out):
            os.remove(os.path.join(out, name))
    except OSError as e:
        raise DirectoryNotWritable(f"Cannot prepare corpus directory {out}: {str(e)}") from e
    if not os.access(out, os.W_OK):
        raise DirectoryNotWritable(f"Corpus directory {out} is not writable")

    rng = random.Random(seed)
    vocabulary = _vocabulary(rng)
    formats = list(FORMAT_WEIGHTS)
    weights = [FORMAT_WEIGHTS[fmt] for fmt in formats]
    counts: Dict[DocFormat, int] = {fmt: 0 for fmt in formats}
    for i in range(1, n + 1):
        fmt = rng.choices(formats, weights)[0]
        content = render_document(fmt, rng, vocabulary, rng.randint(MIN_SIZE, MAX_SIZE))
        path = os.path.join(out, f"{doc_id_for(i)}.{fmt.extension}")
        try:
            with open(path, "wb") as f:
                f.write(content)
        except OSError as e:
            raise DirectoryNotWritable(f"Cannot write {path}: {str(e)}") from e
        counts[fmt] += 1
    logger.info(f"Generated {n} documents in {out} (seed {seed}): "
                + ", ".join(f"{fmt.value}={count}" for fmt, count in counts.items()))
    return out

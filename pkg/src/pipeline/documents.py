"""
Documents and Bundles

Raw documents as read from the corpus, their canonical tagged-text form, and
the bundles that carry them between pipeline stages. Bundles travel through
queues and channels as JSON with base64-encoded raw content.
"""

import base64
import json
from dataclasses import dataclass
from enum import Enum
from typing import List, Tuple, Union

BUNDLE_PAYLOAD_TYPE = "DocumentBundle"


class DocFormat(str, Enum):
    TXT = "TXT"
    MARKUP = "MARKUP"
    BINARY = "BINARY"

    @property
    def extension(self) -> str:
        return {"TXT": "txt", "MARKUP": "htm", "BINARY": "bin"}[self.value]

    @classmethod
    def from_extension(cls, extension: str) -> "DocFormat":
        for fmt in cls:
            if fmt.extension == extension.lower().lstrip("."):
                return fmt
        raise ValueError(f"Unknown document extension: {extension}")


class Stage(str, Enum):
    RAW = "RAW"
    TRANSLATED = "TRANSLATED"


@dataclass(frozen=True)
class RawDoc:
    doc_id: str
    format: DocFormat
    content: bytes
    source_uri: str = ""


@dataclass(frozen=True)
class CanonicalDoc:
    doc_id: str
    source_uri: str
    title: str
    body: str

    @property
    def token_count(self) -> int:
        return len(self.body.split())

    def to_record(self) -> str:
        """Tagged text record: #DOC, #SRC, #TITLE lines then #BODY and the text"""
        title = " ".join(self.title.split())
        return f"#DOC {self.doc_id}\n#SRC {self.source_uri}\n#TITLE {title}\n#BODY\n{self.body}"

    @classmethod
    def from_record(cls, record: str) -> "CanonicalDoc":
        header, sep, body = record.partition("\n#BODY\n")
        if not sep:
            raise ValueError("Record has no #BODY section")
        fields = {}
        for line in header.split("\n"):
            tag, _, value = line.partition(" ")
            fields[tag] = value
        try:
            return cls(fields["#DOC"], fields["#SRC"], fields["#TITLE"], body)
        except KeyError as e:
            raise ValueError(f"Record misses {e.args[0]}") from None


Doc = Union[RawDoc, CanonicalDoc]


@dataclass(frozen=True)
class DocumentBundle:
    bundle_id: str
    docs: Tuple[Doc, ...]
    stage: Stage

    @property
    def doc_ids(self) -> List[str]:
        return [doc.doc_id for doc in self.docs]

    def __len__(self):
        return len(self.docs)

    def to_bytes(self) -> bytes:
        if self.stage == Stage.RAW:
            docs = [{"id": d.doc_id, "format": d.format.value, "uri": d.source_uri,
                     "content": base64.b64encode(d.content).decode("ascii")} for d in self.docs]
        else:
            docs = [{"record": d.to_record()} for d in self.docs]
        return json.dumps({"bundle": self.bundle_id, "stage": self.stage.value, "docs": docs}).encode("utf-8")

    @classmethod
    def from_bytes(cls, data: bytes) -> "DocumentBundle":
        raw = json.loads(data.decode("utf-8"))
        stage = Stage(raw["stage"])
        if stage == Stage.RAW:
            docs = tuple(RawDoc(d["id"], DocFormat(d["format"]), base64.b64decode(d["content"]), d.get("uri", ""))
                         for d in raw["docs"])
        else:
            docs = tuple(CanonicalDoc.from_record(d["record"]) for d in raw["docs"])
        return cls(raw["bundle"], docs, stage)

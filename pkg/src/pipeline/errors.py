"""
Pipeline Errors
"""


class PipelineError(Exception):
    """Base class for indexing pipeline failures"""


class SourceUnavailable(PipelineError):
    pass


class MalformedDoc(PipelineError):
    def __init__(self, doc_id, reason):
        super().__init__(f"{doc_id}: {reason}")
        self.doc_id = doc_id
        self.reason = reason


class StoreUnavailable(PipelineError):
    pass


class SourceEmpty(PipelineError):
    """Soft: the selected source had nothing to give; retry later"""


class SourceGone(PipelineError):
    """The selected source disappeared; select another"""

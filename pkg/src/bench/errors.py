"""
Benchmark Errors
"""


class BenchError(Exception):
    """Base class for benchmark harness failures; the CLI exits with status 1 on these"""


class RunTimeout(BenchError):
    """A repeat did not reach its document target within the run ceiling"""


class IncompleteIndex(BenchError):
    """A node process died before the document target was reached"""


class MismatchedConfigs(BenchError):
    pass


class DirectoryNotWritable(BenchError):
    pass

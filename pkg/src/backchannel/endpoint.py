"""
Network Endpoints
"""

from dataclasses import dataclass

from .errors import InvalidEndpoint


@dataclass(frozen=True)
class Endpoint:
    host: str
    port: int

    def __post_init__(self):
        if not self.host:
            raise InvalidEndpoint("Endpoint host must not be empty")
        if isinstance(self.port, bool) or not isinstance(self.port, int) or not 1 <= self.port <= 65535:
            raise InvalidEndpoint(f"Endpoint port must be in 1..65535, got {self.port!r}")

    @classmethod
    def parse(cls, text: str) -> "Endpoint":
        """Parse 'host:port'"""
        host, sep, port = str(text).rpartition(":")
        if not sep:
            raise InvalidEndpoint(f"Expected host:port, got {text!r}")
        try:
            return cls(host, int(port))
        except ValueError as e:
            if isinstance(e, InvalidEndpoint):
                raise
            raise InvalidEndpoint(f"Port is not a number in {text!r}") from e

    def as_tuple(self):
        return (self.host, self.port)

    def __str__(self):
        return f"{self.host}:{self.port}"

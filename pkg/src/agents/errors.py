"""
Agent Errors
"""


class AgentError(Exception):
    """Base class for agent-layer failures"""


class NonGroundAssert(AgentError):
    pass


class UnknownAgent(AgentError):
    pass


class UnknownReceiver(AgentError):
    pass


class TransportDown(AgentError):
    def __init__(self, message, cause=None):
        super().__init__(message)
        self.cause = cause


class ActionFailed(AgentError):
    """A directive failed; wraps the container (or channel) error"""

    def __init__(self, message, directive=None, cause=None):
        super().__init__(message)
        self.directive = directive
        self.cause = cause


class PlanFailed(AgentError):
    """A plan aborted; `leaf` is the directive that failed"""

    def __init__(self, message, leaf=None, cause=None):
        super().__init__(message)
        self.leaf = leaf
        self.cause = cause

"""
Container Errors

Exception hierarchy shared by the component container and the collaboration
layer. Every error carries the component or type it is about in its message.
"""


class ContainerError(Exception):
    """Base class for all container and collaboration errors"""


class DuplicateType(ContainerError):
    pass


class UnknownType(ContainerError):
    pass


class DuplicateId(ContainerError):
    pass


class UnknownComponent(ContainerError):
    pass


class IllegalTransition(ContainerError):
    pass


class IncompatibleInterfaces(ContainerError):
    pass


class AlreadyBound(ContainerError):
    pass


class RejectedValue(ContainerError):
    pass


class NoBinding(ContainerError):
    pass


class ProviderInactive(ContainerError):
    pass


class ProviderFault(ContainerError):
    """Wraps an exception raised by provider code"""

    def __init__(self, message, cause=None):
        super().__init__(message)
        self.cause = cause

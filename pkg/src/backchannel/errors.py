"""
Backchannel Errors
"""


class BackchannelError(Exception):
    """Base class for backchannel failures"""


class InvalidEndpoint(BackchannelError, ValueError):
    pass


class FramingError(BackchannelError):
    pass


class PortUnavailable(BackchannelError):
    pass


class ConnectionRefused(BackchannelError):
    pass


class ChannelTimeout(BackchannelError):
    pass


class ChannelClosed(BackchannelError):
    """The channel went away; in_flight counts items that may have been lost"""

    def __init__(self, message, in_flight=0, cause=None):
        super().__init__(message)
        self.in_flight = in_flight
        self.cause = cause

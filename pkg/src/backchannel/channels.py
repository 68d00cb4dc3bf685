"""
Backchannel Setup

Agent-facing operations that wire a backchannel between a provider on one node
and a consumer on another. Opening a client follows three steps: load the
TcpPullClient, bind it to the consumer, configure the remote address; then it
connects.
"""

import itertools
import logging
from typing import Optional

from ..collaboration.envelope import DataEnvelope
from ..components.container import Container
from ..components.context import ComponentContext
from ..components.errors import ContainerError, IncompatibleInterfaces, ProviderFault, UnknownComponent
from ..components.interfaces import CollaborationStyle, DataFlow, Direction, InterfaceRef
from .adapters import PullClientAdapter, PullServerAdapter
from .endpoint import Endpoint
from .errors import BackchannelError

logger = logging.getLogger('hybrid-indexer.backchannel')

_adapter_ids = itertools.count(1)


def _pull_descriptor(container: Container, ref: InterfaceRef, direction: Direction):
    record = container.get_record(ref.component_id)
    try:
        descriptor = record.interface(ref.interface, provided=direction == Direction.PROVIDED)
    except KeyError:
        raise IncompatibleInterfaces(f"{ref} is not a {direction.value} interface") from None
    if descriptor.style != CollaborationStyle.DATA or descriptor.flow != DataFlow.PULL:
        raise IncompatibleInterfaces(
            f"{ref} is {descriptor.style.value} {descriptor.flow}, a DATA pull interface is needed")
    return descriptor


def _activate_adapter(container: Container, adapter_id: str) -> None:
    """Activate an adapter, unloading it and surfacing the channel error on failure"""
    try:
        container.activate(adapter_id)
    except ProviderFault as e:
        container.unload(adapter_id)
        if isinstance(e.cause, BackchannelError):
            raise e.cause from e
        raise


def start_pull_server(container: Container, ctx: Optional[ComponentContext], provider: InterfaceRef,
                      endpoint: Endpoint, adapter_id: Optional[str] = None) -> str:
    """
    Load a TcpPullServer bound to provider and listening on endpoint

    Returns:
        str: The adapter component id

    Raises:
        IncompatibleInterfaces: provider is not a PROVIDED DATA pull interface
        PortUnavailable: endpoint cannot be listened on
    """
    descriptor = _pull_descriptor(container, provider, Direction.PROVIDED)
    container.register_types(PullServerAdapter, PullClientAdapter)
    adapter_id = adapter_id or f"tcp-server-{endpoint.port}-{next(_adapter_ids)}"
    container.load_component(ctx, adapter_id, PullServerAdapter.type_name(),
                             {"host": endpoint.host, "port": endpoint.port,
                              "payload_type": descriptor.payload_type})
    try:
        container.bind(InterfaceRef(adapter_id, "source"), provider)
    except ContainerError:
        container.unload(adapter_id)
        raise
    _activate_adapter(container, adapter_id)
    logger.info(f"Serving {provider} on {endpoint} as {adapter_id}")
    return adapter_id


def open_pull_client(container: Container, ctx: Optional[ComponentContext], consumer: InterfaceRef,
                     endpoint: Endpoint, timeout: Optional[float] = None,
                     adapter_id: Optional[str] = None, pull_timeout: Optional[float] = None) -> str:
    """
    Load a TcpPullClient, bind the consumer to it, configure the address and connect

    Returns:
        str: The adapter component id

    Raises:
        IncompatibleInterfaces: consumer is not a REQUIRED DATA pull interface
        ConnectionRefused: Nothing listens at endpoint; the consumer stays unbound
        ChannelTimeout: The connect or handshake did not finish within timeout
    """
    descriptor = _pull_descriptor(container, consumer, Direction.REQUIRED)
    container.register_types(PullServerAdapter, PullClientAdapter)
    adapter_id = adapter_id or f"tcp-client-{consumer.component_id}-{next(_adapter_ids)}"
    config = {"payload_type": descriptor.payload_type}
    if timeout is not None:
        config["timeout"] = float(timeout)
    if pull_timeout is not None:
        config["pull_timeout"] = float(pull_timeout)
    container.load_component(ctx, adapter_id, PullClientAdapter.type_name(), config)
    try:
        container.bind(consumer, InterfaceRef(adapter_id, "pull"))
        container.configure(adapter_id, "server_address", str(endpoint))
    except ContainerError:
        container.unload(adapter_id)
        raise
    _activate_adapter(container, adapter_id)
    logger.info(f"{consumer} pulls from {endpoint} through {adapter_id}")
    return adapter_id


def remote_pull(container: Container, adapter_id: str, max_items: int) -> DataEnvelope:
    """
    Pull up to max_items through an open client adapter

    Raises:
        ChannelClosed: The channel failed; a channel_closed event has been emitted
    """
    instance = container.instance(adapter_id)
    if not isinstance(instance, PullClientAdapter):
        raise UnknownComponent(f"{adapter_id} is not a TcpPullClient")
    if max_items < 1:
        raise ValueError("max_items must be positive")
    return instance.pull(max_items)

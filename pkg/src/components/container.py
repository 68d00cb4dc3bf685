"""
Component Container

The platform service of one node: component type registry, the recursive
context tree rooted at `root`, lifecycle control, interface description,
brokering, explicit/implicit binding, configuration, and the built-in
framework services (event dispatching, scheduling, collaboration).

Structural mutations are serialized by one container lock. Component code
(hooks, validators, event handlers) is never called while the lock is held:
mutations collect the events they cause and dispatch them after release.
"""

import logging
import threading
from collections import OrderedDict
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from ..collaboration.events import DispatchReport, EventDispatcher, HandlerOrigin, HandlerRegistration
from ..collaboration.service import CollaborationService
from ..utils.settings import ContainerSettings
from .component import Component, Scalar
from .context import ComponentContext, ComponentRecord
from .errors import (
    AlreadyBound,
    ContainerError,
    DuplicateId,
    DuplicateType,
    IllegalTransition,
    IncompatibleInterfaces,
    NoBinding,
    ProviderFault,
    RejectedValue,
    UnknownComponent,
    UnknownType,
)
from .scheduler import Scheduler
from .interfaces import (
    BindingMode,
    BindingRecord,
    CollaborationStyle,
    DataFlow,
    Direction,
    InterfaceRef,
    LifecycleState,
    interfaces_compatible,
)

logger = logging.getLogger('hybrid-indexer.container')

ComponentFactory = Callable[[str, Dict[str, Any]], Component]
Requirement = Union[Tuple[CollaborationStyle, str], Tuple[CollaborationStyle, str, Optional[DataFlow]]]

LEGAL_TRANSITIONS = {
    LifecycleState.LOADED: {LifecycleState.ACTIVE, LifecycleState.UNLOADED},
    LifecycleState.ACTIVE: {LifecycleState.DEACTIVATED, LifecycleState.UNLOADED},
    LifecycleState.DEACTIVATED: {LifecycleState.ACTIVE, LifecycleState.UNLOADED},
}

_PendingEvent = Tuple[str, str, Any]


class Container:
    def __init__(self, settings: Optional[ContainerSettings] = None, name: str = "node"):
        settings = settings or ContainerSettings()
        self.name = name
        self.root = ComponentContext("root")
        self.events = EventDispatcher()
        self.scheduler = Scheduler()
        self.collaboration = CollaborationService(self, settings.async_queue_size)
        self._types: "OrderedDict[str, ComponentFactory]" = OrderedDict()
        self._records: Dict[str, ComponentRecord] = {}
        self._contexts: Dict[str, ComponentContext] = {"root": self.root}
        self._bindings_by_client: Dict[InterfaceRef, List[BindingRecord]] = {}
        self._event_handlers: Dict[BindingRecord, str] = {}
        self._lock = threading.RLock()

    # -- types -----------------------------------------------------------------

    def register_component_type(self, type_id: str, factory: ComponentFactory) -> str:
        """
        Register a component type

        Args:
            type_id: Type name used by load_component
            factory: Called as factory(component_id, properties)

        Returns:
            str: The registered type id

        Raises:
            DuplicateType: If type_id is already registered
        """
        with self._lock:
            if type_id in self._types:
                raise DuplicateType(f"Component type already registered: {type_id}")
            self._types[type_id] = factory
        logger.debug(f"Registered component type {type_id}")
        return type_id

    def register_types(self, *classes: type) -> None:
        """Register Component subclasses under their type names, skipping known ones"""
        for cls in classes:
            if cls.type_name() not in self._types:
                self.register_component_type(cls.type_name(), cls)

    def registered_types(self) -> List[str]:
        with self._lock:
            return list(self._types)

    # -- contexts --------------------------------------------------------------

    def create_context(self, context_id: str, parent: Optional[ComponentContext] = None,
                       owner: Optional[str] = None) -> ComponentContext:
        with self._lock:
            if context_id in self._contexts:
                raise DuplicateId(f"Context already exists: {context_id}")
            parent = parent or self.root
            ctx = ComponentContext(context_id, parent, owner)
            parent.child_contexts[context_id] = ctx
            self._contexts[context_id] = ctx
            return ctx

    def context(self, context_id: str) -> ComponentContext:
        with self._lock:
            try:
                return self._contexts[context_id]
            except KeyError:
                raise UnknownComponent(f"Unknown context: {context_id}") from None

    def remove_context(self, ctx: ComponentContext) -> None:
        """Unload everything inside ctx (recursively) and detach it from its parent"""
        if ctx.is_root:
            raise ContainerError("The root context cannot be removed")
        for inner in reversed(list(ctx.walk())):
            for component_id in list(inner.components):
                if self.find_record(component_id) is not None:
                    self.set_lifecycle(None, component_id, LifecycleState.UNLOADED)
        with self._lock:
            for inner in list(ctx.walk()):
                self._contexts.pop(inner.id, None)
            if ctx.parent is not None:
                ctx.parent.child_contexts.pop(ctx.id, None)

    # -- loading and lookup ----------------------------------------------------

    def load_component(self, ctx: Optional[ComponentContext], component_id: str, type_id: str,
                       config: Optional[Dict[str, Any]] = None) -> ComponentRecord:
        """
        Load a component of a registered type into ctx (root when None)

        Returns:
            ComponentRecord: The new record, in state LOADED

        Raises:
            DuplicateId: component_id already loaded
            UnknownType: type_id not registered
            RejectedValue: a config value is not a scalar or fails validation
        """
        ctx = ctx or self.root
        config = dict(config or {})
        for key, value in config.items():
            if not isinstance(value, Scalar):
                raise RejectedValue(f"Property {key} of {component_id} must be a scalar")
        with self._lock:
            if component_id in self._records:
                raise DuplicateId(f"Component id already in use: {component_id}")
            factory = self._types.get(type_id)
            if factory is None:
                raise UnknownType(f"Unknown component type: {type_id}")

        instance = factory(component_id, config)
        for key, value in config.items():
            try:
                instance.validate_property(key, value)
            except ValueError as e:
                raise RejectedValue(f"{component_id}.{key}={value!r} rejected: {str(e)}") from e
        descriptors = instance.interfaces()
        seen = set()
        for descriptor in descriptors:
            key = (descriptor.name, descriptor.direction)
            if key in seen:
                raise ContainerError(f"{component_id} declares {descriptor.direction.value} {descriptor.name} twice")
            if descriptor.endpoint is None:
                raise ContainerError(f"{component_id}.{descriptor.name} has no endpoint")
            seen.add(key)

        with self._lock:
            if component_id in self._records:
                raise DuplicateId(f"Component id already in use: {component_id}")
            if ctx.id not in self._contexts:
                raise UnknownComponent(f"Context {ctx.id} has been removed")
            record = ComponentRecord(component_id, type_id, LifecycleState.LOADED, list(descriptors), ctx, instance)
            instance.container = self
            instance.context = ctx
            ctx.components[component_id] = record
            self._records[component_id] = record
            if instance.composite:
                inner = ComponentContext(f"{component_id}.inner", ctx, owner=component_id)
                ctx.child_contexts[inner.id] = inner
                self._contexts[inner.id] = inner
                instance.inner_context = inner

        logger.info(f"Loaded {type_id} {component_id} into {ctx.path()}")
        instance.on_load()
        self._dispatch([(component_id, "created", {"type": type_id})])
        return record

    def find_record(self, component_id: str) -> Optional[ComponentRecord]:
        with self._lock:
            return self._records.get(component_id)

    def get_record(self, component_id: str) -> ComponentRecord:
        record = self.find_record(component_id)
        if record is None:
            raise UnknownComponent(f"Unknown component: {component_id}")
        return record

    def instance(self, component_id: str) -> Component:
        return self.get_record(component_id).instance

    def query_components(self, ctx: Optional[ComponentContext] = None, recursive: bool = False) -> List[ComponentRecord]:
        ctx = ctx or self.root
        with self._lock:
            contexts = list(ctx.walk()) if recursive else [ctx]
            return [record for c in contexts for record in c.components.values()]

    def describe_interfaces(self, component_id: str) -> List:
        """
        The complete interface list of a loaded component

        Raises:
            UnknownComponent: Unknown or UNLOADED component
        """
        return list(self.get_record(component_id).interfaces)

    # -- lifecycle -------------------------------------------------------------

    def set_lifecycle(self, ctx: Optional[ComponentContext], component_id: str,
                      target: LifecycleState) -> ComponentRecord:
        """
        Move a component along LOADED -> ACTIVE <-> DEACTIVATED -> UNLOADED

        Raises:
            UnknownComponent: Unknown or already UNLOADED component
            IllegalTransition: Edge not in the state machine
        """
        target = LifecycleState(target)
        with self._lock:
            record = self._records.get(component_id)
            if record is None or (ctx is not None and record.context is not ctx):
                raise UnknownComponent(f"Unknown component: {component_id}")
            previous = record.state
            if target == LifecycleState.ACTIVE and previous == LifecycleState.ACTIVE:
                return record
            if target not in LEGAL_TRANSITIONS[previous]:
                raise IllegalTransition(f"{component_id}: {previous.value} -> {target.value} is not allowed")
            if target != LifecycleState.UNLOADED:
                record.state = target

        if target == LifecycleState.UNLOADED:
            self._unload(record)
            return record

        instance = record.instance
        if target == LifecycleState.ACTIVE:
            try:
                instance.on_activate()
            except Exception as e:
                with self._lock:
                    record.state = previous
                self.scheduler.stop(component_id)
                raise ProviderFault(f"{component_id} failed to activate: {str(e)}", cause=e) from e
            self._dispatch([(component_id, "activated", None)])
        else:
            self.scheduler.stop(component_id)
            instance.on_deactivate()
            self._dispatch([(component_id, "deactivated", None)])
        logger.debug(f"{component_id}: {previous.value} -> {target.value}")
        return record

    def activate(self, component_id: str) -> ComponentRecord:
        return self.set_lifecycle(None, component_id, LifecycleState.ACTIVE)

    def deactivate(self, component_id: str) -> ComponentRecord:
        return self.set_lifecycle(None, component_id, LifecycleState.DEACTIVATED)

    def unload(self, component_id: str) -> ComponentRecord:
        return self.set_lifecycle(None, component_id, LifecycleState.UNLOADED)

    def _unload(self, record: ComponentRecord) -> None:
        inner = record.instance.inner_context
        if inner is not None:
            for nested in reversed(list(inner.walk())):
                for child_id in list(nested.components):
                    if self.find_record(child_id) is not None:
                        self.unload(child_id)

        events: List[_PendingEvent] = []
        removed_handlers: List[str] = []
        with self._lock:
            if self._records.get(record.id) is not record:
                return
            record.state = LifecycleState.UNLOADED
            record.context.components.pop(record.id, None)
            del self._records[record.id]
            if inner is not None:
                record.context.child_contexts.pop(inner.id, None)
                for nested in list(inner.walk()):
                    self._contexts.pop(nested.id, None)

            orphaned: List[BindingRecord] = []
            for binding in self._all_bindings_locked():
                if record.id not in (binding.client.component_id, binding.server.component_id):
                    continue
                self._remove_binding_locked(binding)
                handler_id = self._event_handlers.pop(binding, None)
                if handler_id:
                    removed_handlers.append(handler_id)
                events.append((binding.client.component_id, "unbound",
                               {"client": str(binding.client), "server": str(binding.server)}))
                if binding.client.component_id != record.id and binding.mode == BindingMode.IMPLICIT:
                    orphaned.append(binding)

            swapped: List[BindingRecord] = []
            for binding in orphaned:
                substitute = self._substitute_locked(binding, exclude={record.id})
                if substitute is None:
                    logger.warning(f"No substitute provider for {binding.client} after unloading {record.id}")
                    continue
                self._add_binding_locked(substitute)
                swapped.append(substitute)
                events.append((substitute.client.component_id, "bound",
                               {"client": str(substitute.client), "server": str(substitute.server),
                                "mode": substitute.mode.value}))
                logger.info(f"Hot-swapped {binding.client}: {binding.server} -> {substitute.server}")
            events.append((record.id, "removed", {"type": record.type_id}))

        for handler_id in removed_handlers:
            self.events.deregister_handler(handler_id)
        for binding in swapped:
            self._register_event_binding(binding)
        self.scheduler.stop(record.id)
        self.collaboration.forget(record.id)
        try:
            record.instance.on_unload()
        except Exception:
            logger.exception(f"{record.id} failed while unloading")
        logger.info(f"Unloaded {record.type_id} {record.id}")
        self._dispatch(events)

    # -- brokering and binding -------------------------------------------------

    def broker(self, ctx: Optional[ComponentContext], requirement: Requirement,
               exclude: Iterable[str] = ()) -> List[InterfaceRef]:
        """
        Locate PROVIDED interfaces matching (style, payload_type[, flow])

        Searches ctx first and, only while nothing matches, each parent up to
        the root. Within a context results follow registration order.
        """
        ctx = ctx or self.root
        with self._lock:
            return self._broker_locked(ctx, requirement, set(exclude))

    def _broker_locked(self, ctx: ComponentContext, requirement: Requirement, exclude: set,
                       stateless_only: bool = False) -> List[InterfaceRef]:
        style, payload_type = CollaborationStyle(requirement[0]), requirement[1]
        flow = requirement[2] if len(requirement) > 2 else None
        for scope in ctx.ancestors():
            found = [
                InterfaceRef(record.id, descriptor.name)
                for record in scope.components.values()
                if record.id not in exclude and (not stateless_only or record.instance.stateless)
                for descriptor in record.interfaces
                if descriptor.direction == Direction.PROVIDED
                and descriptor.style == style
                and descriptor.payload_type == payload_type
                and (flow is None or descriptor.flow == flow)
            ]
            if found:
                return found
        return []

    def bind(self, client: InterfaceRef, server: Optional[InterfaceRef] = None,
             mode: BindingMode = BindingMode.EXPLICIT) -> BindingRecord:
        """
        Bind a REQUIRED interface to a PROVIDED one

        With mode IMPLICIT and no server, the first broker result for the
        client's requirement (searched from the client's context) is used.

        Raises:
            UnknownComponent: Either component is unknown
            IncompatibleInterfaces: The binding predicate does not hold
            AlreadyBound: Unicast REQUIRED interface already bound
            NoBinding: IMPLICIT bind found no provider
        """
        mode = BindingMode(mode)
        with self._lock:
            client_record = self._records.get(client.component_id)
            if client_record is None:
                raise UnknownComponent(f"Unknown component: {client.component_id}")
            try:
                client_desc = client_record.interface(client.interface, provided=False)
            except KeyError:
                raise IncompatibleInterfaces(f"{client} is not a required interface") from None
            if server is None:
                if mode != BindingMode.IMPLICIT:
                    raise ValueError("EXPLICIT binding needs a server interface")
                candidates = self._broker_locked(
                    client_record.context, (client_desc.style, client_desc.payload_type, client_desc.flow),
                    exclude={client.component_id})
                candidates = [c for c in candidates if not self._is_bound_locked(client, c)]
                if not candidates:
                    raise NoBinding(f"No provider for {client} ({client_desc.style.value} {client_desc.payload_type})")
                server = candidates[0]
            server_record = self._records.get(server.component_id)
            if server_record is None:
                raise UnknownComponent(f"Unknown component: {server.component_id}")
            try:
                server_desc = server_record.interface(server.interface, provided=True)
            except KeyError:
                raise IncompatibleInterfaces(f"{server} is not a provided interface") from None
            if not interfaces_compatible(client_desc, server_desc):
                raise IncompatibleInterfaces(
                    f"{client} ({client_desc.style.value} {client_desc.payload_type} {client_desc.flow}) cannot bind "
                    f"{server} ({server_desc.style.value} {server_desc.payload_type} {server_desc.flow})")
            existing = self._bindings_by_client.get(client, [])
            if existing and not client_desc.multicast:
                raise AlreadyBound(f"{client} is already bound to {existing[0].server}")
            if any(b.server == server for b in existing):
                raise AlreadyBound(f"{client} is already bound to {server}")
            binding = BindingRecord(client, server, mode, client_desc.style, client_desc.payload_type)
            self._add_binding_locked(binding)

        self._register_event_binding(binding)
        logger.debug(f"Bound {client} -> {server} ({mode.value})")
        self._dispatch([(client.component_id, "bound",
                         {"client": str(client), "server": str(server), "mode": mode.value})])
        return binding

    def unbind(self, client: InterfaceRef, server: Optional[InterfaceRef] = None) -> List[BindingRecord]:
        """Remove the client's binding(s), optionally only the one to `server`"""
        removed: List[BindingRecord] = []
        handlers: List[str] = []
        with self._lock:
            for binding in list(self._bindings_by_client.get(client, [])):
                if server is not None and binding.server != server:
                    continue
                self._remove_binding_locked(binding)
                removed.append(binding)
                handler_id = self._event_handlers.pop(binding, None)
                if handler_id:
                    handlers.append(handler_id)
        for handler_id in handlers:
            self.events.deregister_handler(handler_id)
        self._dispatch([(b.client.component_id, "unbound", {"client": str(b.client), "server": str(b.server)})
                        for b in removed])
        return removed

    def bindings_for(self, client: InterfaceRef) -> List[BindingRecord]:
        with self._lock:
            return list(self._bindings_by_client.get(client, ()))

    def all_bindings(self) -> List[BindingRecord]:
        with self._lock:
            return self._all_bindings_locked()

    def _all_bindings_locked(self) -> List[BindingRecord]:
        return [b for ctx in self._contexts.values() for b in ctx.bindings]

    def _is_bound_locked(self, client: InterfaceRef, server: InterfaceRef) -> bool:
        return any(b.server == server for b in self._bindings_by_client.get(client, ()))

    def _add_binding_locked(self, binding: BindingRecord) -> None:
        self._records[binding.client.component_id].context.bindings.append(binding)
        self._bindings_by_client.setdefault(binding.client, []).append(binding)

    def _remove_binding_locked(self, binding: BindingRecord) -> None:
        for ctx in self._contexts.values():
            if binding in ctx.bindings:
                ctx.bindings.remove(binding)
        remaining = [b for b in self._bindings_by_client.get(binding.client, []) if b != binding]
        if remaining:
            self._bindings_by_client[binding.client] = remaining
        else:
            self._bindings_by_client.pop(binding.client, None)

    def _substitute_locked(self, binding: BindingRecord, exclude: set) -> Optional[BindingRecord]:
        client_record = self._records.get(binding.client.component_id)
        if client_record is None:
            return None
        client_desc = client_record.interface(binding.client.interface, provided=False)
        candidates = self._broker_locked(
            client_record.context, (client_desc.style, client_desc.payload_type, client_desc.flow),
            exclude=exclude | {binding.client.component_id}, stateless_only=True)
        candidates = [c for c in candidates if not self._is_bound_locked(binding.client, c)]
        if not candidates:
            return None
        return BindingRecord(binding.client, candidates[0], BindingMode.IMPLICIT, binding.style, binding.payload_type)

    def _register_event_binding(self, binding: BindingRecord) -> None:
        if binding.style != CollaborationStyle.EVENT:
            return
        port = self.get_record(binding.client.component_id).interface(binding.client.interface, provided=False).endpoint
        handler_id = self.events.register_handler(HandlerRegistration(
            handler=port.on_event, source=binding.server.component_id, name=binding.payload_type,
            origin=HandlerOrigin.FRAMEWORK))
        with self._lock:
            self._event_handlers[binding] = handler_id

    # -- configuration ---------------------------------------------------------

    def configure(self, component_id: str, key: str, value: Any) -> bool:
        """
        Set one scalar property

        Raises:
            UnknownComponent: Unknown or UNLOADED component
            RejectedValue: Non-scalar value or the component type refuses it
        """
        if not isinstance(value, Scalar):
            raise RejectedValue(f"Property {key} of {component_id} must be a scalar, got {type(value).__name__}")
        instance = self.get_record(component_id).instance
        try:
            instance.validate_property(key, value)
        except ValueError as e:
            raise RejectedValue(f"{component_id}.{key}={value!r} rejected: {str(e)}") from e
        with self._lock:
            if component_id not in self._records:
                raise UnknownComponent(f"Unknown component: {component_id}")
            instance.properties[key] = value
        instance.on_property_changed(key, value)
        self._dispatch([(component_id, "property_changed", {"key": key, "value": value})])
        return True

    # -- events ----------------------------------------------------------------

    def emit_event(self, source: str, name: str, payload: Any = None, consumable: bool = False) -> DispatchReport:
        """
        Emit an event on behalf of a loaded component

        Raises:
            UnknownComponent: The source is unknown or UNLOADED
        """
        if self.find_record(source) is None:
            raise UnknownComponent(f"Unknown component: {source}")
        return self.events.emit(source, name, payload, consumable)

    def emit_framework_event(self, source: str, name: str, payload: Any = None) -> DispatchReport:
        """Emit a container-originated event; the source may already be gone"""
        return self.events.emit(source, name, payload)

    def _dispatch(self, events: Sequence[_PendingEvent]) -> None:
        for source, name, payload in events:
            self.events.emit(source, name, payload)

    # -- shutdown --------------------------------------------------------------

    def shutdown(self) -> None:
        for record in reversed(self.query_components(self.root, recursive=True)):
            if self.find_record(record.id) is not None:
                try:
                    self.unload(record.id)
                except ContainerError as e:
                    logger.warning(f"Unload of {record.id} during shutdown failed: {str(e)}")
        self.scheduler.stop_all()
        self.collaboration.close()



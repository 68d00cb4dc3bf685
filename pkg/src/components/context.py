"""
Component Contexts

Contexts group components and nest recursively under one root. The container
owns all mutation; this module only holds the tree and the per-context records.
"""

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional

from .component import Component
from .interfaces import BindingRecord, Direction, InterfaceDescriptor, LifecycleState


@dataclass
class ComponentRecord:
    id: str
    type_id: str
    state: LifecycleState
    interfaces: List[InterfaceDescriptor]
    context: "ComponentContext"
    instance: Component = field(repr=False)

    @property
    def properties(self) -> Dict[str, Any]:
        return self.instance.properties

    def interface(self, name: str, provided: Optional[bool] = None) -> InterfaceDescriptor:
        for descriptor in self.interfaces:
            if descriptor.name != name:
                continue
            if provided is None or (descriptor.direction == Direction.PROVIDED) == provided:
                return descriptor
        raise KeyError(f"{self.id} has no interface {name}")


class ComponentContext:
    def __init__(self, context_id: str, parent: Optional["ComponentContext"] = None,
                 owner: Optional[str] = None):
        self.id = context_id
        self.parent = parent
        self.owner = owner
        self.components: "OrderedDict[str, ComponentRecord]" = OrderedDict()
        self.child_contexts: "OrderedDict[str, ComponentContext]" = OrderedDict()
        self.bindings: List[BindingRecord] = []

    @property
    def is_root(self) -> bool:
        return self.parent is None

    @property
    def children(self) -> List[str]:
        return list(self.components)

    def ancestors(self) -> Iterator["ComponentContext"]:
        """Self first, then each parent up to the root"""
        ctx: Optional[ComponentContext] = self
        while ctx is not None:
            yield ctx
            ctx = ctx.parent

    def walk(self) -> Iterator["ComponentContext"]:
        """Depth-first pre-order over this context and its descendants"""
        yield self
        for child in list(self.child_contexts.values()):
            yield from child.walk()

    def path(self) -> str:
        return "/".join(reversed([ctx.id for ctx in self.ancestors()]))

    def __repr__(self):
        return f"ComponentContext({self.path()})"

"""
Beliefs

Belief atoms, syntactic unification and the agent's belief store.

Terms are constants (str, int, float, bool, bytes), variables (strings starting
with '?') or one level of nested atoms such as queue_grew(5). Stored beliefs
are always ground; queries may contain variables.
"""

import threading
from collections import OrderedDict
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional, Tuple

from .errors import NonGroundAssert

Bindings = Dict[str, Any]

# predicate -> arity of the built-in component ontology
ONTOLOGY = {
    "activated": 1,
    "deactivated": 1,
    "focusingOn": 2,
    "property": 3,
    "event": 2,
    "created": 1,
    "removed": 1,
    "component": 1,
    "bound": 2,
    "clientInterface": 5,
    "serverInterface": 4,
}

# asserting the key retracts the matching value atom about the same component
EXCLUSIVE = {
    "activated": "deactivated",
    "deactivated": "activated",
    "created": "removed",
    "removed": "created",
}


@dataclass(frozen=True)
class BeliefAtom:
    predicate: str
    args: Tuple[Any, ...] = ()

    @property
    def arity(self) -> int:
        return len(self.args)

    def __str__(self):
        if not self.args:
            return self.predicate
        return f"{self.predicate}({', '.join(str(a) for a in self.args)})"


def atom(predicate: str, *args: Any) -> BeliefAtom:
    return BeliefAtom(predicate, tuple(args))


TRUE = atom("true")


def is_variable(term: Any) -> bool:
    return isinstance(term, str) and term.startswith("?") and len(term) > 1


def is_ground(term: Any) -> bool:
    if isinstance(term, BeliefAtom):
        return all(is_ground(arg) for arg in term.args)
    return not is_variable(term)


def substitute(term: Any, bindings: Bindings) -> Any:
    if isinstance(term, BeliefAtom):
        return BeliefAtom(term.predicate, tuple(substitute(arg, bindings) for arg in term.args))
    if is_variable(term):
        return bindings.get(term, term)
    return term


def unify(pattern: Any, fact: Any, bindings: Optional[Bindings] = None) -> Optional[Bindings]:
    """
    Match a (possibly non-ground) pattern against a ground fact

    Returns:
        The extended bindings, or None when they do not unify
    """
    bindings = dict(bindings or {})
    if is_variable(pattern):
        if pattern in bindings:
            return bindings if bindings[pattern] == fact else None
        bindings[pattern] = fact
        return bindings
    if isinstance(pattern, BeliefAtom):
        if (not isinstance(fact, BeliefAtom) or pattern.predicate != fact.predicate
                or pattern.arity != fact.arity):
            return None
        for p_arg, f_arg in zip(pattern.args, fact.args):
            bindings = unify(p_arg, f_arg, bindings)
            if bindings is None:
                return None
        return bindings
    if type(pattern) is bool or type(fact) is bool:
        return bindings if type(pattern) is type(fact) and pattern == fact else None
    return bindings if pattern == fact else None


def atom_to_json(term: Any) -> Any:
    """JSON-safe form of a term; atoms and bytes become tagged objects"""
    if isinstance(term, BeliefAtom):
        return {"$atom": term.predicate, "args": [atom_to_json(a) for a in term.args]}
    if isinstance(term, (bytes, bytearray)):
        return {"$bytes": bytes(term).hex()}
    if isinstance(term, (list, tuple)):
        return [atom_to_json(item) for item in term]
    if isinstance(term, dict):
        return {str(key): atom_to_json(value) for key, value in term.items()}
    return term


def _as_term(value: Any) -> Any:
    """Lists inside atoms become tuples so atoms stay hashable"""
    if isinstance(value, list):
        return tuple(_as_term(item) for item in value)
    return value


def atom_from_json(value: Any) -> Any:
    if isinstance(value, dict):
        if "$atom" in value:
            return BeliefAtom(value["$atom"], tuple(_as_term(atom_from_json(a)) for a in value.get("args", [])))
        if "$bytes" in value:
            return bytes.fromhex(value["$bytes"])
        return {key: atom_from_json(item) for key, item in value.items()}
    if isinstance(value, list):
        return [atom_from_json(item) for item in value]
    return value


class BeliefStore:
    """
    Set of ground atoms indexed by predicate, in insertion order

    activated/deactivated and created/removed are kept mutually exclusive and
    property/3 is last-write-wins per (component, property).
    """

    def __init__(self):
        self._atoms: Dict[str, "OrderedDict[BeliefAtom, None]"] = {}
        self._lock = threading.RLock()

    def assert_belief(self, belief: BeliefAtom) -> bool:
        """
        Add a ground atom

        Returns:
            bool: False when the atom was already believed

        Raises:
            NonGroundAssert: The atom contains a variable
        """
        if not is_ground(belief):
            raise NonGroundAssert(f"Cannot believe non-ground {belief}")
        with self._lock:
            for displaced in self._displaced_by(belief):
                self.retract_belief(displaced)
            bucket = self._atoms.setdefault(belief.predicate, OrderedDict())
            if belief in bucket:
                return False
            bucket[belief] = None
            return True

    def _displaced_by(self, belief: BeliefAtom) -> List[BeliefAtom]:
        opposite = EXCLUSIVE.get(belief.predicate)
        if opposite and belief.arity == 1:
            return [atom(opposite, belief.args[0])]
        if belief.predicate == "property" and belief.arity == 3:
            return [atom("property", belief.args[0], belief.args[1], "?value")]
        return []

    def retract_belief(self, query: BeliefAtom) -> List[BeliefAtom]:
        """Remove every atom matching query; returns the removed atoms"""
        with self._lock:
            bucket = self._atoms.get(query.predicate)
            if not bucket:
                return []
            removed = [fact for fact in bucket if unify(query, fact) is not None]
            for fact in removed:
                del bucket[fact]
            return removed

    def query(self, query: BeliefAtom) -> List[Bindings]:
        """Every substitution that makes query match a stored atom"""
        if query == TRUE:
            return [{}]
        with self._lock:
            facts = list(self._atoms.get(query.predicate, ()))
        results = []
        for fact in facts:
            bindings = unify(query, fact)
            if bindings is not None:
                results.append(bindings)
        return results

    def holds(self, query: BeliefAtom) -> bool:
        return bool(self.query(query))

    def atoms(self, predicate: Optional[str] = None) -> List[BeliefAtom]:
        with self._lock:
            if predicate is not None:
                return list(self._atoms.get(predicate, ()))
            return [fact for bucket in self._atoms.values() for fact in bucket]

    def update(self, beliefs: Iterable[BeliefAtom]) -> List[BeliefAtom]:
        """Assert several atoms; returns the ones that were new"""
        return [belief for belief in beliefs if self.assert_belief(belief)]

    def __contains__(self, belief: BeliefAtom) -> bool:
        with self._lock:
            return belief in self._atoms.get(belief.predicate, ())

    def __len__(self):
        with self._lock:
            return sum(len(bucket) for bucket in self._atoms.values())

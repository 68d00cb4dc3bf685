"""
Plans

Plan trees built from ACT leaves and the SEQ, PAR and DO_WHEN operators, and
their step-wise execution. A running plan is a generator: every executed
directive is followed by a yield, so one deliberation cycle advances each
branch of a plan by at most one directive.
"""

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Any, Callable, Generator, List, Optional, Sequence, Tuple

from .beliefs import BeliefAtom, Bindings, substitute
from .errors import ActionFailed, PlanFailed

if TYPE_CHECKING:
    from .agent import Agent

# built-in actuator -> accepted argument counts
ACTUATOR_ARITY = {
    "create": (2,),
    "remove": (1,),
    "bind": (4,),
    "configure": (3,),
    "activate": (1,),
    "deactivate": (1,),
    "focus": (1,),
    "lookup": (1, 2),
}

PlanStep = Generator[None, None, None]
# Orders the pending PAR branches for one round: (pending indices, round) -> order
InterleaveStrategy = Callable[[List[int], int], Sequence[int]]


def round_robin(pending: List[int], round_no: int) -> Sequence[int]:
    return pending


class Operator(str, Enum):
    ACT = "ACT"
    SEQ = "SEQ"
    PAR = "PAR"
    DO_WHEN = "DO_WHEN"


@dataclass(frozen=True)
class Directive:
    action: str
    args: Tuple[Any, ...] = ()

    def __str__(self):
        return f"{self.action}({', '.join(str(a) for a in self.args)})"


@dataclass(frozen=True)
class PlanNode:
    operator: Operator
    children: Tuple["PlanNode", ...] = ()
    act: Optional[Directive] = None
    trigger: Optional[BeliefAtom] = None

    def __post_init__(self):
        if self.operator == Operator.ACT and (self.act is None or self.children):
            raise ValueError("ACT nodes are leaves carrying a directive")
        if self.operator == Operator.DO_WHEN and (self.trigger is None or len(self.children) != 1):
            raise ValueError("DO_WHEN needs exactly one trigger and one child")

    def leaves(self) -> List[Directive]:
        if self.operator == Operator.ACT:
            return [self.act]
        return [leaf for child in self.children for leaf in child.leaves()]


def act(action: str, *args: Any) -> PlanNode:
    return PlanNode(Operator.ACT, act=Directive(action, tuple(args)))


def seq(*children: PlanNode) -> PlanNode:
    return PlanNode(Operator.SEQ, tuple(children))


def par(*children: PlanNode) -> PlanNode:
    return PlanNode(Operator.PAR, tuple(children))


def do_when(trigger: BeliefAtom, child: PlanNode) -> PlanNode:
    return PlanNode(Operator.DO_WHEN, (child,), trigger=trigger)


def bind_plan(node: PlanNode, bindings: Bindings) -> PlanNode:
    """Substitute trigger variables throughout a plan"""
    if not bindings:
        return node
    if node.operator == Operator.ACT:
        return PlanNode(Operator.ACT, act=Directive(node.act.action, tuple(substitute(a, bindings) for a in node.act.args)))
    trigger = substitute(node.trigger, bindings) if node.trigger is not None else None
    return PlanNode(node.operator, tuple(bind_plan(c, bindings) for c in node.children), trigger=trigger)


def execute(node: PlanNode, agent: "Agent", strategy: InterleaveStrategy = round_robin) -> PlanStep:
    """
    Generator running node against agent

    Raises:
        PlanFailed: identifying the failing leaf
    """
    if node.operator == Operator.ACT:
        try:
            agent.execute_directive(node.act)
        except ActionFailed as e:
            raise PlanFailed(f"{node.act} failed: {str(e)}", leaf=node.act, cause=e) from e
        yield
    elif node.operator == Operator.SEQ:
        for child in node.children:
            yield from execute(child, agent, strategy)
    elif node.operator == Operator.PAR:
        yield from _run_parallel(node.children, agent, strategy)
    elif node.operator == Operator.DO_WHEN:
        while True:
            matches = agent.beliefs.query(node.trigger)
            if matches:
                break
            yield
        yield from execute(bind_plan(node.children[0], matches[0]), agent, strategy)


def _run_parallel(children: Sequence[PlanNode], agent: "Agent", strategy: InterleaveStrategy) -> PlanStep:
    branches = {i: execute(child, agent, strategy) for i, child in enumerate(children)}
    failures: List[PlanFailed] = []
    for round_no in itertools.count():
        if not branches:
            break
        for i in list(strategy(sorted(branches), round_no)):
            try:
                next(branches[i])
            except StopIteration:
                del branches[i]
            except PlanFailed as e:
                failures.append(e)
                del branches[i]
        if branches:
            yield
    if failures:
        first = failures[0]
        raise PlanFailed(f"PAR branch failed: {str(first)}", leaf=first.leaf, cause=first.cause)


class PlanStatus(str, Enum):
    PENDING = "PENDING"
    SUCCEEDED = "SUCCEEDED"
    FAILED = "FAILED"


_plan_ids = itertools.count(1)


@dataclass
class PlanRun:
    """A plan adopted by an agent, advanced once per deliberation cycle"""
    plan: PlanNode
    steps: PlanStep = field(repr=False)
    plan_id: str = field(default_factory=lambda: f"plan-{next(_plan_ids)}")
    status: PlanStatus = PlanStatus.PENDING
    cycles: int = 0
    failure: Optional[PlanFailed] = None

    @property
    def done(self) -> bool:
        return self.status != PlanStatus.PENDING

    def advance(self) -> PlanStatus:
        if self.done:
            return self.status
        self.cycles += 1
        try:
            next(self.steps)
        except StopIteration:
            self.status = PlanStatus.SUCCEEDED
        except PlanFailed as e:
            self.failure = e
            self.status = PlanStatus.FAILED
        except Exception as e:
            # a generator that raised is closed; it must not read as finished next cycle
            self.failure = PlanFailed(f"{self.plan_id} aborted: {str(e)}", cause=e)
            self.status = PlanStatus.FAILED
        return self.status


@dataclass
class PlanReport:
    plan_id: str
    status: PlanStatus
    cycles: int
    failed_leaf: Optional[Directive] = None
    error: Optional[str] = None

    @classmethod
    def of(cls, run: PlanRun) -> "PlanReport":
        failure = run.failure
        return cls(run.plan_id, run.status, run.cycles,
                   failure.leaf if failure else None, str(failure) if failure else None)

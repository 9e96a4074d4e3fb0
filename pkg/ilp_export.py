"""
ILP formulation of checkpoint selection as a constant-length path through the
transitive DAG of candidate steps (implicit path enumeration).

The module builds the model, writes it as CPLEX-LP text for any external solver
and imports a solver's ``name value`` solution dump back into a CheckpointPlan.
"""

import itertools
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Mapping, Tuple

from distribution_core import CheckpointPlan, FaultDistribution, step_table

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-6


class IlpParameterError(ValueError):
    """Raised when a model cannot be built for the requested parameters."""


class SolutionParseError(ValueError):
    """Raised for unreadable or non-binary solution values."""


class SolutionInconsistencyError(ValueError):
    """Raised when a solution violates the model's constraints."""


def node_var(t: int) -> str:
    return f"v{t}"


def arc_var(i: int, j: int) -> str:
    return f"e_{i}_{j}"


@dataclass(frozen=True)
class LinearConstraint:
    name: str
    terms: Tuple[Tuple[int, str], ...]
    rhs: int

    def lhs(self, assignment: Mapping[str, int]) -> int:
        return sum(coef * assignment.get(var, 0) for coef, var in self.terms)

    def holds(self, assignment: Mapping[str, int]) -> bool:
        return self.lhs(assignment) == self.rhs


@dataclass(frozen=True)
class IlpModel:
    """Binary node and arc variables, equality constraints and arc weights.

    Nodes v_0..v_n: v_0 is the reset at t_start, v_n an artificial exit at t_end.
    """

    node_times: Tuple[int, ...]
    k: int
    arcs: Tuple[Tuple[int, int, int], ...]
    constraints: Tuple[LinearConstraint, ...]

    @property
    def n(self) -> int:
        return len(self.node_times) - 1

    @cached_property
    def node_vars(self) -> Tuple[str, ...]:
        return tuple(node_var(t) for t in range(self.n + 1))

    @cached_property
    def arc_vars(self) -> Tuple[str, ...]:
        return tuple(arc_var(i, j) for i, j, _ in self.arcs)

    @cached_property
    def weights(self) -> Dict[Tuple[int, int], int]:
        return {(i, j): w for i, j, w in self.arcs}

    @cached_property
    def variables(self) -> frozenset:
        return frozenset(self.node_vars) | frozenset(self.arc_vars)

    def evaluate(self, assignment: Mapping[str, int]) -> int:
        """Objective value of an assignment."""
        return sum(w * assignment.get(arc_var(i, j), 0) for i, j, w in self.arcs)

    def violations(self, assignment: Mapping[str, int]) -> List[str]:
        return [c.name for c in self.constraints if not c.holds(assignment)]

    def path_assignment(self, inner_nodes) -> Dict[str, int]:
        """The unique assignment visiting v_0, the given inner nodes and v_n in order."""
        nodes = [0, *sorted(inner_nodes), self.n]
        assignment = {node_var(t): 1 for t in nodes}
        for a, b in zip(nodes, nodes[1:]):
            assignment[arc_var(a, b)] = 1
        return assignment


def build_ilp(d: FaultDistribution, k: int) -> IlpModel:
    """Model choosing k inner nodes on a path v_0 -> v_n of maximum rectangle weight."""
    table = step_table(d)
    if table.size < 1:
        raise IlpParameterError("The distribution has no candidate steps after t_start")
    if not (0 <= k <= table.size):
        raise IlpParameterError(f"k must lie in [0, {table.size}], got {k}")

    node_times = (d.t_start, *(int(t) for t in table.times), d.t_end)
    heights = (0, *(int(h) for h in table.heights), 0)
    n = len(node_times) - 1

    arcs = tuple(
        (i, j, (node_times[j] - node_times[i]) * heights[j])
        for i in range(n) for j in range(i + 1, n + 1)
    )

    constraints = [
        LinearConstraint('card', tuple((1, node_var(t)) for t in range(n + 1)), k + 2),
        LinearConstraint('entry', ((1, node_var(0)),), 1),
        LinearConstraint('exit', ((1, node_var(n)),), 1),
        LinearConstraint('source', tuple((1, arc_var(0, j)) for j in range(1, n + 1)), 1),
        LinearConstraint('sink', tuple((1, arc_var(i, n)) for i in range(n)), 1),
    ]
    for t in range(1, n):
        incoming = tuple((1, arc_var(i, t)) for i in range(t))
        outgoing = tuple((1, arc_var(t, j)) for j in range(t + 1, n + 1))
        constraints.append(LinearConstraint(f'in_{t}', incoming + ((-1, node_var(t)),), 0))
        constraints.append(LinearConstraint(f'out_{t}', outgoing + ((-1, node_var(t)),), 0))

    model = IlpModel(node_times=node_times, k=k, arcs=arcs, constraints=tuple(constraints))
    logger.info(f"Built ILP with {n + 1} nodes, {len(arcs)} arcs, {len(constraints)} constraints")
    return model


def _term(coef: int, var: str) -> str:
    return f"{'+' if coef >= 0 else '-'}{abs(coef)} {var}"


def emit_lp(m: IlpModel) -> str:
    """Deterministic CPLEX-LP text of the model."""
    lines = [f"\\* checkpoint selection: {m.n + 1} nodes, k={m.k} *\\", "", "Maximize", "obj:"]
    lines.extend(_term(w, arc_var(i, j)) for i, j, w in m.arcs if w != 0)
    lines.extend(["", "Subject To"])
    for constraint in m.constraints:
        lines.append("")
        lines.append(f"{constraint.name}:")
        lines.extend(_term(coef, var) for coef, var in constraint.terms)
        lines.append(f"= {constraint.rhs}")
    lines.extend(["", "Binaries"])
    lines.extend(m.node_vars)
    lines.extend(m.arc_vars)
    lines.extend(["", "End"])
    return "\n".join(lines) + "\n"


def parse_solution(m: IlpModel, sol: str, tolerance: float = DEFAULT_TOLERANCE) -> CheckpointPlan:
    """Read ``name value`` lines, check binarity and constraints, return the plan."""
    assignment: Dict[str, int] = {}
    for line_no, raw in enumerate(sol.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 2:
            raise SolutionParseError(f"line {line_no}: expected '<name> <value>', got {raw!r}")
        name, text = fields
        if name not in m.variables:
            raise SolutionParseError(f"line {line_no}: unknown variable {name!r}")
        try:
            value = float(text)
        except ValueError:
            raise SolutionParseError(f"line {line_no}: non-numeric value {text!r} for {name}")
        rounded = round(value)
        if abs(value - rounded) > tolerance:
            raise SolutionParseError(f"line {line_no}: {name} = {value} is not integral")
        if rounded not in (0, 1):
            raise SolutionParseError(f"line {line_no}: {name} = {value} is not binary")
        assignment[name] = int(rounded)

    violated = m.violations(assignment)
    if violated:
        raise SolutionInconsistencyError(f"Solution violates constraints: {', '.join(violated)}")

    inner = [t for t in range(1, m.n) if assignment.get(node_var(t), 0) == 1]
    return CheckpointPlan(tuple(m.node_times[t] for t in inner))


def solve_by_enumeration(m: IlpModel) -> Tuple[int, CheckpointPlan]:
    """Optimum of a small model by checking every path with k inner nodes."""
    best_value, best_inner = None, ()
    for inner in itertools.combinations(range(1, m.n), m.k):
        assignment = m.path_assignment(inner)
        if m.violations(assignment):
            continue
        value = m.evaluate(assignment)
        if best_value is None or value > best_value:
            best_value, best_inner = value, inner
    if best_value is None:
        raise SolutionInconsistencyError("The model admits no feasible path")
    return best_value, CheckpointPlan(tuple(m.node_times[t] for t in best_inner))

"""Rules: patterns, typed variables, conditions, and their evaluation.

Label expressions evaluate over 32-bit signed integers with C
semantics: arithmetic wraps silently, division truncates toward zero,
and dividing by zero raises EvalError, which aborts the whole run.

Expressions and conditions are plain tagged tuples, e.g.
``('add', ('var', 'n'), ('int', 1))`` or ``('not', ('edge', 1, 3, None))``.
"""

from __future__ import annotations

from typing import Optional

from .graph import EDGE_MARKS, MARK_ANY, NODE_MARKS

VAR_TYPES = ("int", "char", "string", "atom", "list")

# variable types whose repetition or comparison breaks the fast-rule
# guarantees (their domains are unbounded)
UNBOUNDED_TYPES = frozenset(("list", "string", "atom"))


class EvalError(Exception):
    """Runtime label/condition evaluation failure (e.g. division by zero)."""


class RuleError(Exception):
    pass


def wrap32(v: int) -> int:
    v &= 0xFFFFFFFF
    return v - 0x100000000 if v >= 0x80000000 else v


def as_list(v) -> tuple:
    return v if isinstance(v, tuple) else (v,)


class PatternNode:
    __slots__ = ("pid", "label", "mark", "root")

    def __init__(self, pid: int, label, mark: str, root: bool):
        self.pid = pid
        self.label = label          # LHS: LabelPattern, RHS: expression
        self.mark = mark
        self.root = root


class PatternEdge:
    __slots__ = ("eid", "src", "tgt", "label", "mark", "bidir")

    def __init__(self, eid: int, src: int, tgt: int, label, mark: str, bidir: bool):
        self.eid = eid
        self.src = src
        self.tgt = tgt
        self.label = label
        self.mark = mark
        self.bidir = bidir


class PatternGraph:
    __slots__ = ("nodes", "edges", "by_id")

    def __init__(self, nodes: list[PatternNode], edges: list[PatternEdge]):
        self.nodes = nodes
        self.edges = edges
        self.by_id = {n.pid: i for i, n in enumerate(nodes)}


class LabelPattern:
    """A left-hand-side label: fixed atoms and typed variables around at
    most one list variable, unified positionally against a host label."""

    __slots__ = ("items", "list_var_pos", "kind", "detail")

    def __init__(self, items: list[tuple]):
        # items: ('lit', atom) or ('var', name, type)
        self.items = items
        pos = None
        for i, item in enumerate(items):
            if item[0] == "var" and item[2] == "list":
                if pos is not None:
                    raise RuleError("at most one list variable per label")
                pos = i
        self.list_var_pos = pos
        # matching fast paths: a lone list variable absorbs anything, a
        # constant pattern is a plain comparison
        if len(items) == 1 and pos == 0:
            self.kind = "list_var"
            self.detail = items[0][1]
        elif all(it[0] == "lit" for it in items):
            self.kind = "const"
            self.detail = tuple(it[1] for it in items)
        else:
            self.kind = "general"
            self.detail = None

    def variables(self):
        return [(it[1], it[2]) for it in self.items if it[0] == "var"]


class Rule:
    __slots__ = (
        "name", "variables", "lhs", "rhs", "condition", "interface",
        "plans", "_scratch",
    )

    def __init__(self, name: str, variables: dict[str, str],
                 lhs: PatternGraph, rhs: PatternGraph, condition=None):
        self.name = name
        self.variables = variables
        self.lhs = lhs
        self.rhs = rhs
        self.condition = condition
        self.interface = sorted(set(lhs.by_id) & set(rhs.by_id))
        self.plans: dict = {}
        self._scratch = None


# -- label matching -----------------------------------------------------


def _bind_atom(item, atom, assignment, trail) -> bool:
    kind = item[0]
    if kind == "lit":
        return item[1] == atom
    name, vtype = item[1], item[2]
    if vtype == "int":
        if not isinstance(atom, int):
            return False
    elif vtype == "string":
        if not isinstance(atom, str):
            return False
    elif vtype == "char":
        if not (isinstance(atom, str) and len(atom) == 1):
            return False
    # atom type accepts both
    bound = assignment.get(name, _UNSET)
    if bound is _UNSET:
        assignment[name] = atom
        trail.append(name)
        return True
    return bound == atom


_UNSET = object()


def label_match(pattern: LabelPattern, host_label: tuple, assignment: dict,
                trail: Optional[list] = None):
    """Unify a pattern label with a host label, extending ``assignment``.

    Returns the list of variable names bound by this call, or None on
    mismatch (in which case any partial bindings are already undone).
    """
    own_trail = [] if trail is None else trail
    start = len(own_trail)

    def fail():
        for name in own_trail[start:]:
            del assignment[name]
        del own_trail[start:]
        return None

    items = pattern.items
    pos = pattern.list_var_pos
    if pos is None:
        if len(items) != len(host_label):
            return fail()
        for item, atom in zip(items, host_label):
            if not _bind_atom(item, atom, assignment, own_trail):
                return fail()
        return own_trail[start:]

    prefix, suffix = items[:pos], items[pos + 1:]
    if len(host_label) < len(prefix) + len(suffix):
        return fail()
    for item, atom in zip(prefix, host_label):
        if not _bind_atom(item, atom, assignment, own_trail):
            return fail()
    for item, atom in zip(reversed(suffix), reversed(host_label)):
        if not _bind_atom(item, atom, assignment, own_trail):
            return fail()
    mid = host_label[len(prefix):len(host_label) - len(suffix)]
    name = items[pos][1]
    bound = assignment.get(name, _UNSET)
    if bound is _UNSET:
        assignment[name] = mid
        own_trail.append(name)
    elif bound != mid:
        return fail()
    return own_trail[start:]


# -- expression evaluation ----------------------------------------------


def eval_expr(expr, assignment: dict, node_images=None, g=None):
    tag = expr[0]
    if tag == "int" or tag == "str":
        return expr[1]
    if tag == "var":
        try:
            return assignment[expr[1]]
        except KeyError:
            raise EvalError(f"unbound variable {expr[1]!r}")
    if tag == "empty":
        return ()
    if tag == "cons":
        left = eval_expr(expr[1], assignment, node_images, g)
        right = eval_expr(expr[2], assignment, node_images, g)
        return as_list(left) + as_list(right)
    if tag == "cat":
        left = eval_expr(expr[1], assignment, node_images, g)
        right = eval_expr(expr[2], assignment, node_images, g)
        if not isinstance(left, str) or not isinstance(right, str):
            raise EvalError("'.' requires string operands")
        return left + right
    if tag == "neg":
        return wrap32(-_int_operand(expr[1], assignment, node_images, g))
    if tag in ("add", "sub", "mul", "div"):
        a = _int_operand(expr[1], assignment, node_images, g)
        b = _int_operand(expr[2], assignment, node_images, g)
        if tag == "add":
            return wrap32(a + b)
        if tag == "sub":
            return wrap32(a - b)
        if tag == "mul":
            return wrap32(a * b)
        if b == 0:
            raise EvalError("division by zero")
        q = abs(a) // abs(b)
        return wrap32(q if (a < 0) == (b < 0) else -q)
    if tag == "indeg":
        return node_images[expr[1]].indegree
    if tag == "outdeg":
        return node_images[expr[1]].outdegree
    raise EvalError(f"bad expression node {tag!r}")


def _int_operand(expr, assignment, node_images, g) -> int:
    v = eval_expr(expr, assignment, node_images, g)
    if not isinstance(v, int):
        raise EvalError("arithmetic on a non-integer value")
    return v


def eval_cond(cond, assignment: dict, node_images, g) -> bool:
    tag = cond[0]
    if tag == "and":
        return eval_cond(cond[1], assignment, node_images, g) and \
            eval_cond(cond[2], assignment, node_images, g)
    if tag == "or":
        return eval_cond(cond[1], assignment, node_images, g) or \
            eval_cond(cond[2], assignment, node_images, g)
    if tag == "not":
        return not eval_cond(cond[1], assignment, node_images, g)
    if tag == "rel":
        op = cond[1]
        left = eval_expr(cond[2], assignment, node_images, g)
        right = eval_expr(cond[3], assignment, node_images, g)
        if op == "=":
            return as_list(left) == as_list(right)
        if op == "!=":
            return as_list(left) != as_list(right)
        if not isinstance(left, int) or not isinstance(right, int):
            raise EvalError(f"ordering comparison on non-integers")
        if op == ">":
            return left > right
        if op == ">=":
            return left >= right
        if op == "<":
            return left < right
        if op == "<=":
            return left <= right
        raise EvalError(f"bad relational operator {op!r}")
    if tag == "edge":
        src = node_images[cond[1]]
        tgt = node_images[cond[2]]
        want_label = cond[3]
        label = None
        if want_label is not None:
            label = as_list(eval_expr(want_label, assignment, node_images, g))
        for e in src.out_chain:
            if e.target is tgt and (label is None or e.label == label):
                return True
        return False
    if tag == "typecheck":
        vtype, name = cond[1], cond[2]
        try:
            v = assignment[name]
        except KeyError:
            raise EvalError(f"unbound variable {name!r}")
        if vtype == "int":
            return isinstance(v, int)
        if vtype == "string":
            return isinstance(v, str)
        if vtype == "char":
            return isinstance(v, str) and len(v) == 1
        if vtype == "atom":
            return not isinstance(v, tuple)
        raise EvalError(f"bad type check {vtype!r}")
    raise EvalError(f"bad condition node {tag!r}")


# -- right-hand-side instantiation ---------------------------------------


class ConcreteItem:
    __slots__ = ("pid", "label", "mark", "root")

    def __init__(self, pid, label, mark, root):
        self.pid = pid
        self.label = label
        self.mark = mark
        self.root = root


class ConcreteEdge:
    __slots__ = ("src", "tgt", "label", "mark", "flip")

    def __init__(self, src, tgt, label, mark, flip):
        self.src = src
        self.tgt = tgt
        self.label = label
        self.mark = mark
        self.flip = flip


def instantiate_rhs(rule: Rule, assignment: dict, node_images=None,
                    edge_images=None, g=None, orientations=None):
    """Evaluate every RHS expression to a host label and resolve
    wildcard marks to the matched host marks.

    Returns (nodes, edges) of concrete items; a bidirectional RHS edge
    is flipped when its matched counterpart was embedded against the
    edge direction.
    """
    nodes = []
    for pn in rule.rhs.nodes:
        label = as_list(eval_expr(pn.label, assignment, node_images, g))
        mark = pn.mark
        if mark == MARK_ANY:
            mark = node_images[pn.pid].mark
        if mark not in NODE_MARKS:
            raise EvalError(f"{mark!r} is not a node mark")
        nodes.append(ConcreteItem(pn.pid, label, mark, pn.root))
    edges = []
    for pe in rule.rhs.edges:
        label = as_list(eval_expr(pe.label, assignment, node_images, g))
        mark = pe.mark
        if mark == MARK_ANY:
            mark = edge_images[pe.eid].mark
        if mark not in EDGE_MARKS:
            raise EvalError(f"{mark!r} is not an edge mark")
        flip = bool(pe.bidir and orientations and orientations.get(pe.eid))
        edges.append(ConcreteEdge(pe.src, pe.tgt, label, mark, flip))
    return nodes, edges


# -- fast-rule classifier -------------------------------------------------


def _label_var_uses(side: PatternGraph, variables: dict[str, str],
                    lhs: bool) -> dict[str, int]:
    counts: dict[str, int] = {}

    def count_label(label):
        if lhs:
            for name, _ in label.variables():
                counts[name] = counts.get(name, 0) + 1
        else:
            _count_expr_vars(label, counts)

    for n in side.nodes:
        count_label(n.label)
    for e in side.edges:
        count_label(e.label)
    return counts


def _count_expr_vars(expr, counts):
    tag = expr[0]
    if tag == "var":
        counts[expr[1]] = counts.get(expr[1], 0) + 1
        return
    for part in expr[1:]:
        if isinstance(part, tuple):
            _count_expr_vars(part, counts)


def _cond_has_edge_predicate(cond) -> bool:
    if cond is None:
        return False
    tag = cond[0]
    if tag == "edge":
        return True
    if tag in ("and", "or"):
        return _cond_has_edge_predicate(cond[1]) or _cond_has_edge_predicate(cond[2])
    if tag == "not":
        return _cond_has_edge_predicate(cond[1])
    return False


def _expr_has_unbounded_var(expr, variables) -> bool:
    tag = expr[0]
    if tag == "var":
        return variables.get(expr[1]) in UNBOUNDED_TYPES
    return any(
        _expr_has_unbounded_var(p, variables)
        for p in expr[1:] if isinstance(p, tuple)
    )


def _cond_has_unbounded_equality(cond, variables) -> bool:
    if cond is None:
        return False
    tag = cond[0]
    if tag == "rel" and cond[1] in ("=", "!="):
        return _expr_has_unbounded_var(cond[2], variables) and \
            _expr_has_unbounded_var(cond[3], variables)
    if tag in ("and", "or"):
        return _cond_has_unbounded_equality(cond[1], variables) or \
            _cond_has_unbounded_equality(cond[2], variables)
    if tag == "not":
        return _cond_has_unbounded_equality(cond[1], variables)
    return False


def check_fast_rule(rule: Rule) -> tuple[bool, list[str]]:
    """Decide whether the rule can be matched in constant time on hosts
    with bounded degree and bounded root count.

    The three requirements: every left-hand node is undirectedly
    reachable from a root; no list/string/atom variable occurs twice in
    either side; and the condition uses no edge predicate and no
    (in)equality with such variables on both sides.
    """
    problems = []

    reached = {n.pid for n in rule.lhs.nodes if n.root}
    frontier = list(reached)
    adj: dict[int, list[int]] = {}
    for e in rule.lhs.edges:
        adj.setdefault(e.src, []).append(e.tgt)
        adj.setdefault(e.tgt, []).append(e.src)
    while frontier:
        pid = frontier.pop()
        for other in adj.get(pid, ()):
            if other not in reached:
                reached.add(other)
                frontier.append(other)
    unreachable = [n.pid for n in rule.lhs.nodes if n.pid not in reached]
    if unreachable:
        problems.append(
            f"left-hand nodes not undirectedly reachable from a root: {unreachable}")

    for side, graph, lhs in (("left", rule.lhs, True), ("right", rule.rhs, False)):
        for name, count in _label_var_uses(graph, rule.variables, lhs).items():
            if count > 1 and rule.variables.get(name) in UNBOUNDED_TYPES:
                problems.append(
                    f"{rule.variables[name]} variable {name!r} occurs "
                    f"{count} times in the {side}-hand side")

    if _cond_has_edge_predicate(rule.condition):
        problems.append("condition uses the edge predicate")
    if _cond_has_unbounded_equality(rule.condition, rule.variables):
        problems.append(
            "condition compares list/string/atom variables for (in)equality")

    return not problems, problems

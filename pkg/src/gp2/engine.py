"""Program execution: rule application with rollback, control constructs.

Rule application follows the deletion-before-insertion discipline:
left-hand-only edges go first, then left-hand-only nodes, interface
nodes are updated in place (relabel, remark, re-root), and right-hand
items are created last.  Every mutation is journaled while a rollback
scope is open, so if/try guards and loop iterations can be undone
exactly; straight-line execution outside any scope journals nothing.

Deleted records referenced from the journal are kept off the free list
until the enclosing scope is undone or finally discarded, which is what
keeps journal entries as bare handles sound.
"""

from __future__ import annotations

from dataclasses import dataclass

from .graph import FLAG_IN_STACK, FLAG_ROOT, Graph, GraphError
from .match import compile_plan, find_match, prepare_rule
from .rules import EvalError, Rule, instantiate_rhs

OK = 0
FAILED = 1
BROKE = 2


class ConfigError(Exception):
    pass


@dataclass
class ExecConfig:
    backend: str = "chain"            # 'chain' or 'index_scan'
    root_mode: str = "preserve"       # 'preserve' or 'reflect'
    fast_shutdown: bool = False
    minimal_gc: bool = False
    optimize_plans: bool = True

    def __post_init__(self):
        if self.backend not in ("chain", "index_scan"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.root_mode not in ("preserve", "reflect"):
            raise ConfigError(f"unknown root mode {self.root_mode!r}")
        if self.minimal_gc and not self.fast_shutdown:
            raise ConfigError("minimal garbage collection requires fast shutdown")


# -- command AST ---------------------------------------------------------


class Command:
    __slots__ = ()


class RuleSet(Command):
    __slots__ = ("names", "loc", "rules")

    def __init__(self, names, loc=None):
        self.names = names
        self.loc = loc
        self.rules: list[Rule] = []

    def run(self, ctx):
        g = ctx.graph
        try:
            for rule in self.rules:
                m = find_match(rule, g, ctx.mode, ctx.backend, ctx.optimize)
                if m is not None:
                    apply_rule(rule, m, g, ctx.stack.top())
                    return OK
        except EvalError as exc:
            raise EvalError(f"in rule {rule.name!r}: {exc}") from exc
        return FAILED


class ProcCall(Command):
    """Placeholder for a named call; inlining replaces it."""

    __slots__ = ("name", "loc")

    def __init__(self, name, loc=None):
        self.name = name
        self.loc = loc

    def run(self, ctx):
        raise RuntimeError(f"procedure call {self.name!r} was never inlined")


class Seq(Command):
    __slots__ = ("commands",)

    def __init__(self, commands):
        self.commands = commands

    def run(self, ctx):
        for cmd in self.commands:
            st = cmd.run(ctx)
            if st != OK:
                return st
        return OK


class If(Command):
    __slots__ = ("guard", "then_cmd", "else_cmd")

    def __init__(self, guard, then_cmd, else_cmd):
        self.guard = guard
        self.then_cmd = then_cmd
        self.else_cmd = else_cmd

    def run(self, ctx):
        ctx.stack.open_frame()
        st = self.guard.run(ctx)
        ctx.stack.undo_frame(ctx.graph)
        if st == BROKE:
            return BROKE
        branch = self.then_cmd if st == OK else self.else_cmd
        return branch.run(ctx)


class Try(Command):
    __slots__ = ("guard", "then_cmd", "else_cmd")

    def __init__(self, guard, then_cmd, else_cmd):
        self.guard = guard
        self.then_cmd = then_cmd
        self.else_cmd = else_cmd

    def run(self, ctx):
        ctx.stack.open_frame()
        st = self.guard.run(ctx)
        if st == FAILED:
            ctx.stack.undo_frame(ctx.graph)
            return self.else_cmd.run(ctx)
        ctx.stack.commit_frame(ctx.graph)
        if st == BROKE:
            return BROKE
        return self.then_cmd.run(ctx)


class Loop(Command):
    __slots__ = ("body", "needs_frame")

    def __init__(self, body):
        self.body = body
        # Safe default; prepare_commands() refines it so loops whose
        # bodies can only fail before mutating skip per-iteration frames.
        self.needs_frame = True

    def run(self, ctx):
        body = self.body
        stack = ctx.stack
        if self.needs_frame:
            g = ctx.graph
            while True:
                stack.open_frame()
                st = body.run(ctx)
                if st == OK:
                    stack.commit_frame(g)
                    continue
                if st == FAILED:
                    stack.undo_frame(g)
                else:
                    stack.commit_frame(g)
                return OK
        while True:
            st = body.run(ctx)
            if st != OK:
                return OK


class Skip(Command):
    __slots__ = ()

    def run(self, ctx):
        return OK


class Fail(Command):
    __slots__ = ()

    def run(self, ctx):
        return FAILED


class Break(Command):
    __slots__ = ()

    def run(self, ctx):
        return BROKE


# -- static analysis -------------------------------------------------------


def may_fail(cmd) -> bool:
    if isinstance(cmd, (RuleSet, Fail)):
        return True
    if isinstance(cmd, Seq):
        return any(may_fail(c) for c in cmd.commands)
    if isinstance(cmd, (If, Try)):
        return may_fail(cmd.then_cmd) or may_fail(cmd.else_cmd)
    return False     # Skip, Break, Loop


def may_mutate(cmd) -> bool:
    if isinstance(cmd, RuleSet):
        return True
    if isinstance(cmd, Seq):
        return any(may_mutate(c) for c in cmd.commands)
    if isinstance(cmd, Loop):
        return may_mutate(cmd.body)
    if isinstance(cmd, If):
        # guard effects are always rolled back
        return may_mutate(cmd.then_cmd) or may_mutate(cmd.else_cmd)
    if isinstance(cmd, Try):
        return may_mutate(cmd.guard) or may_mutate(cmd.then_cmd) or \
            may_mutate(cmd.else_cmd)
    return False


def fails_cleanly(cmd) -> bool:
    """True when a failure of cmd implies it has not changed the graph."""
    if isinstance(cmd, (RuleSet, Skip, Fail, Break, Loop)):
        return True
    if isinstance(cmd, Seq):
        mutated = False
        for c in cmd.commands:
            if may_fail(c) and (mutated or not fails_cleanly(c)):
                return False
            if may_mutate(c):
                mutated = True
        return True
    if isinstance(cmd, If):
        return fails_cleanly(cmd.then_cmd) and fails_cleanly(cmd.else_cmd)
    if isinstance(cmd, Try):
        ok_path = not may_fail(cmd.then_cmd) or \
            (fails_cleanly(cmd.then_cmd) and not may_mutate(cmd.guard))
        return ok_path and fails_cleanly(cmd.else_cmd)
    return False


# -- inlining and preparation ------------------------------------------------


def _walk(cmd):
    yield cmd
    if isinstance(cmd, Seq):
        for c in cmd.commands:
            yield from _walk(c)
    elif isinstance(cmd, (If, Try)):
        yield from _walk(cmd.guard)
        yield from _walk(cmd.then_cmd)
        yield from _walk(cmd.else_cmd)
    elif isinstance(cmd, Loop):
        yield from _walk(cmd.body)


def check_calls_and_recursion(program) -> None:
    """Semantic checks shared by validation and execution: every called
    name exists, braced sets call rules only, procedures are
    non-recursive, and break sits inside some loop."""
    from .textio import SourceError

    def err(loc, message):
        line, col = loc or (1, 1)
        raise SourceError("semantic", line, col, message)

    bodies = dict(program.procedures)
    bodies["Main"] = program.main
    for body in bodies.values():
        for cmd in _walk(body):
            if isinstance(cmd, RuleSet):
                for name in cmd.names:
                    if name not in program.rules:
                        err(cmd.loc, f"unknown rule {name!r} in rule-set call")
            elif isinstance(cmd, ProcCall):
                if cmd.name not in program.procedures and cmd.name not in program.rules:
                    err(cmd.loc, f"call of undeclared name {cmd.name!r}")

    # procedure recursion
    calls: dict[str, set[str]] = {}
    for name, body in program.procedures.items():
        calls[name] = {
            c.name for c in _walk(body)
            if isinstance(c, ProcCall) and c.name in program.procedures
        }
    state: dict[str, int] = {}

    def visit(name, loc=None):
        if state.get(name) == 1:
            err(loc, f"recursive procedure {name!r}")
        if state.get(name) == 2:
            return
        state[name] = 1
        for callee in calls.get(name, ()):
            visit(callee, loc)
        state[name] = 2

    for name in program.procedures:
        visit(name)

    inlined = inline_procedures(program)
    _check_breaks(inlined, in_loop=False)


def _check_breaks(cmd, in_loop: bool) -> None:
    from .textio import SourceError

    if isinstance(cmd, Break):
        if not in_loop:
            raise SourceError("semantic", 1, 1, "break outside of any loop")
    elif isinstance(cmd, Seq):
        for c in cmd.commands:
            _check_breaks(c, in_loop)
    elif isinstance(cmd, (If, Try)):
        _check_breaks(cmd.guard, in_loop)
        _check_breaks(cmd.then_cmd, in_loop)
        _check_breaks(cmd.else_cmd, in_loop)
    elif isinstance(cmd, Loop):
        _check_breaks(cmd.body, True)


def inline_procedures(program):
    """Expand every procedure call into its body (procedures are macros)
    and turn bare rule calls into one-rule sets."""

    def expand(cmd, seen):
        if isinstance(cmd, ProcCall):
            if cmd.name in program.procedures:
                if cmd.name in seen:
                    from .textio import SourceError
                    line, col = cmd.loc or (1, 1)
                    raise SourceError("semantic", line, col,
                                      f"recursive procedure {cmd.name!r}")
                return expand(program.procedures[cmd.name], seen | {cmd.name})
            return RuleSet([cmd.name], cmd.loc)
        if isinstance(cmd, Seq):
            return Seq([expand(c, seen) for c in cmd.commands])
        if isinstance(cmd, If):
            return If(expand(cmd.guard, seen), expand(cmd.then_cmd, seen),
                      expand(cmd.else_cmd, seen))
        if isinstance(cmd, Try):
            return Try(expand(cmd.guard, seen), expand(cmd.then_cmd, seen),
                       expand(cmd.else_cmd, seen))
        if isinstance(cmd, Loop):
            return Loop(expand(cmd.body, seen))
        return cmd

    return expand(program.main, frozenset())


def prepare_commands(cmd, rules: dict[str, Rule], optimize: bool) -> None:
    """Resolve rule names, precompile plans, and mark which loops need a
    per-iteration journal frame."""
    for c in _walk(cmd):
        if isinstance(c, RuleSet):
            c.rules = [rules[name] for name in c.names]
            for r in c.rules:
                prepare_rule(r)
                compile_plan(r, optimize)
        elif isinstance(c, Loop):
            c.needs_frame = not fails_cleanly(c.body)


# -- the change journal -------------------------------------------------------


class ChangeStack:
    """Framed journal of graph mutations.

    Each rollback scope pushes a frame; undoing a frame replays its
    entries in reverse.  Discarding an inner frame folds its entries
    into the parent so an outer scope can still undo them; only when the
    last frame goes away are deferred-deleted records finally released.
    """

    __slots__ = ("frames",)

    def __init__(self):
        self.frames: list[list] = []

    def top(self):
        return self.frames[-1] if self.frames else None

    def open_frame(self) -> None:
        self.frames.append([])

    def undo_frame(self, g: Graph) -> None:
        entries = self.frames.pop()
        for entry in reversed(entries):
            tag = entry[0]
            if tag == "nd":
                g.restore_node(entry[1], entry[2])
            elif tag == "ed":
                g.restore_edge(entry[1], entry[2])
            elif tag == "ea":
                g.delete_edge(entry[1])
            elif tag == "na":
                g.delete_node(entry[1])
            elif tag == "rl":
                g.relabel_node(entry[1], entry[2])
            elif tag == "rm":
                entry[1].mark = entry[2]
            elif tag == "rt":
                g.set_root(entry[1], entry[2])

    def commit_frame(self, g: Graph) -> None:
        entries = self.frames.pop()
        if self.frames:
            self.frames[-1].extend(entries)
            return
        for entry in entries:
            tag = entry[0]
            if tag == "nd":
                g.release_node(entry[1])
            elif tag == "ed":
                g.release_edge(entry[1])


def undo_frame(g: Graph, stack: ChangeStack) -> None:
    stack.undo_frame(g)


# -- journaled mutations ---------------------------------------------------------


def journal_delete_node(g: Graph, frame, node) -> None:
    frame.append(("nd", node, node.flags))
    node.flags |= FLAG_IN_STACK
    g.delete_node(node)


def journal_delete_edge(g: Graph, frame, edge) -> None:
    frame.append(("ed", edge, edge.flags))
    edge.flags |= FLAG_IN_STACK
    g.delete_edge(edge)


def journal_add_node(g: Graph, frame, label=(), mark="none", root=False):
    node = g.add_node(label, mark, root)
    frame.append(("na", node))
    return node


def journal_add_edge(g: Graph, frame, src, tgt, label=(), mark="none"):
    edge = g.add_edge(src, tgt, label, mark)
    frame.append(("ea", edge))
    return edge


def journal_relabel_node(g: Graph, frame, node, label) -> None:
    frame.append(("rl", node, node.label))
    g.relabel_node(node, label)


def journal_remark_node(g: Graph, frame, node, mark) -> None:
    frame.append(("rm", node, node.mark))
    node.mark = mark


def journal_set_root(g: Graph, frame, node, flag) -> None:
    frame.append(("rt", node, bool(node.flags & FLAG_ROOT)))
    g.set_root(node, flag)


# -- rule application ----------------------------------------------------------


def apply_rule(rule: Rule, m, g: Graph, frame=None) -> None:
    """Replace the matched left-hand side with the instantiated right-hand
    side.  Evaluation happens first so an evaluation error aborts before
    any mutation."""
    new_nodes, new_edges = instantiate_rhs(
        rule, m.assignment, m.node_images, m.edge_images, g, m.orientations)
    interface = rule.interface

    for host in m.edge_images.values():
        if frame is not None:
            journal_delete_edge(g, frame, host)
        else:
            g.delete_edge(host)

    iface = set(interface)
    for pn in rule.lhs.nodes:
        if pn.pid in iface:
            continue
        host = m.node_images[pn.pid]
        if frame is not None:
            journal_delete_node(g, frame, host)
        else:
            g.delete_node(host)

    created: dict[int, object] = {}
    for item in new_nodes:
        if item.pid in iface:
            host = m.node_images[item.pid]
            if host.label != item.label:
                if frame is not None:
                    frame.append(("rl", host, host.label))
                g.relabel_node(host, item.label)
            if host.mark != item.mark:
                if frame is not None:
                    frame.append(("rm", host, host.mark))
                host.mark = item.mark
            was_root = bool(host.flags & FLAG_ROOT)
            if was_root != item.root:
                if frame is not None:
                    frame.append(("rt", host, was_root))
                g.set_root(host, item.root)
        else:
            host = g.add_node(item.label, item.mark, item.root)
            created[item.pid] = host
            if frame is not None:
                frame.append(("na", host))

    for item in new_edges:
        src = created.get(item.src) or m.node_images.get(item.src)
        tgt = created.get(item.tgt) or m.node_images.get(item.tgt)
        if item.flip:
            src, tgt = tgt, src
        edge = g.add_edge(src, tgt, item.label, item.mark)
        if frame is not None:
            frame.append(("ea", edge))


# -- whole-program execution -----------------------------------------------------


class _Ctx:
    __slots__ = ("graph", "stack", "mode", "backend", "optimize")

    def __init__(self, graph, stack, cfg: ExecConfig):
        self.graph = graph
        self.stack = stack
        self.mode = cfg.root_mode
        self.backend = cfg.backend
        self.optimize = cfg.optimize_plans


def exec_command(cmd, g: Graph, cfg: ExecConfig, stack: ChangeStack | None = None) -> int:
    ctx = _Ctx(g, stack if stack is not None else ChangeStack(), cfg)
    return cmd.run(ctx)


class Outcome:
    """Result of a whole run: success carries the printed graph, the
    error variants carry a diagnostic."""

    __slots__ = ("status", "output", "diagnostic", "graph")

    def __init__(self, status, output=None, diagnostic=None, graph=None):
        self.status = status     # success | fail | validation_error | program_error
        self.output = output
        self.diagnostic = diagnostic
        self.graph = graph

    @property
    def exit_code(self) -> int:
        if self.status == "success":
            return 0
        if self.status == "validation_error":
            return 1
        return 2


class Executable:
    __slots__ = ("rules", "main", "cfg")

    def __init__(self, parsed, cfg: ExecConfig):
        self.rules = parsed.rules
        self.main = inline_procedures(parsed)
        prepare_commands(self.main, self.rules, cfg.optimize_plans)
        self.cfg = cfg

    def run(self, g: Graph) -> int:
        return exec_command(self.main, g, self.cfg)


def run_program(program_text: str, host_text: str, cfg: ExecConfig | None = None) -> Outcome:
    from . import textio

    if cfg is None:
        cfg = ExecConfig()
    try:
        parsed = textio.parse_program(program_text)
        executable = Executable(parsed, cfg)
    except textio.SourceError as exc:
        return Outcome("validation_error", diagnostic=str(exc))
    try:
        g = textio.parse_host_graph(host_text, minimal_gc=cfg.minimal_gc)
    except textio.SourceError as exc:
        # a bad host graph is a runtime problem, not a validation one
        return Outcome("program_error", diagnostic=str(exc))
    try:
        status = executable.run(g)
    except EvalError as exc:
        return Outcome("program_error", diagnostic=str(exc))
    if status == OK:
        return Outcome("success", output=textio.print_graph(g), graph=g)
    return Outcome("fail", diagnostic="program evaluated to fail", graph=g)

"""Text formats: program and host-graph parsing, graph printing.

Host graph grammar::

    Graph ::= '[' Node* '|' Edge* ']'
    Node  ::= '(' INT Root? ',' Label ')'        Root ::= '(R)'
    Edge  ::= '(' INT ',' INT ',' INT ',' Label ')'   (id, source, target)
    Label ::= List ('#' Mark)?
    List  ::= 'empty' | Atom (':' Atom)*
    Atom  ::= INT | STRING

Programs are declarations ``Name = CommandSequence`` plus rule
declarations ``name(vars) [ lhs ] => [ rhs ] where cond``; rule graphs
reuse the host syntax with expression labels, and interface nodes are
the ones whose number appears on both sides.  A bidirectional rule edge
carries the marker ``(B)`` after its id.  Whitespace and newlines are
insignificant; ``//`` starts a line comment.
"""

from __future__ import annotations

from typing import Optional

from .engine import Break, Fail, If, Loop, ProcCall, RuleSet, Seq, Skip, Try
from .graph import (
    EDGE_MARKS,
    INT32_MAX,
    INT32_MIN,
    MARK_ANY,
    MARK_NONE,
    NODE_MARKS,
    Graph,
    GraphError,
    IdMap,
)
from .rules import LabelPattern, PatternEdge, PatternGraph, PatternNode, Rule, RuleError

KEYWORDS = frozenset((
    "if", "then", "else", "try", "skip", "fail", "break", "where",
    "not", "and", "or", "edge", "empty", "indeg", "outdeg",
    "int", "char", "string", "atom", "list",
))

ALL_MARKS = frozenset(("none", "red", "green", "blue", "grey", "dashed", "any"))


class SourceError(Exception):
    def __init__(self, kind: str, line: int, column: int, message: str):
        self.kind = kind
        self.line = line
        self.column = column
        self.message = message
        super().__init__(f"{kind} error at {line}:{column}: {message}")


# -- lexer ---------------------------------------------------------------

_PUNCT2 = ("=>", "!=", ">=", "<=")
_PUNCT1 = "[](){}|,;:#=!<>+-*/."


class Token:
    __slots__ = ("kind", "value", "line", "column")

    def __init__(self, kind, value, line, column):
        self.kind = kind
        self.value = value
        self.line = line
        self.column = column


def tokenize(text: str) -> list[Token]:
    tokens = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if text[i:i + 2] in _PUNCT2:
            tokens.append(Token(text[i:i + 2], text[i:i + 2], line, col))
            i += 2
            col += 2
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(Token("INT", int(text[i:j]), line, col))
            col += j - i
            i = j
            continue
        if c == '"':
            j = i + 1
            while j < n and text[j] != '"':
                if text[j] == "\n" or not text[j].isprintable():
                    raise SourceError("lex", line, col, "bad character in string literal")
                j += 1
            if j >= n:
                raise SourceError("lex", line, col, "unterminated string literal")
            tokens.append(Token("STRING", text[i + 1:j], line, col))
            col += j - i + 1
            i = j + 1
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(Token("IDENT", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if c in _PUNCT1:
            tokens.append(Token(c, c, line, col))
            i += 1
            col += 1
            continue
        raise SourceError("lex", start_line, start_col, f"unexpected character {c!r}")
    tokens.append(Token("EOF", None, line, col))
    return tokens


class _Stream:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def expect(self, kind: str) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            raise SourceError("syntax", tok.line, tok.column,
                              f"expected {kind!r}, found {describe(tok)}")
        return self.next()

    def accept(self, kind: str) -> Optional[Token]:
        if self.peek().kind == kind:
            return self.next()
        return None


def describe(tok: Token) -> str:
    if tok.kind == "EOF":
        return "end of input"
    return repr(tok.value)


def _error(tok: Token, message: str, kind: str = "syntax") -> SourceError:
    return SourceError(kind, tok.line, tok.column, message)


# -- host graphs ----------------------------------------------------------


def _parse_host_atom(ts: _Stream):
    tok = ts.peek()
    if tok.kind == "-":
        ts.next()
        v = -ts.expect("INT").value
        if v < INT32_MIN:
            raise _error(tok, "integer does not fit 32 bits", "semantic")
        return v
    if tok.kind == "INT":
        ts.next()
        if tok.value > INT32_MAX:
            raise _error(tok, "integer does not fit 32 bits", "semantic")
        return tok.value
    if tok.kind == "STRING":
        ts.next()
        return tok.value
    raise _error(tok, f"expected a list atom, found {describe(tok)}")


def _parse_host_label(ts: _Stream, marks) -> tuple[tuple, str]:
    tok = ts.peek()
    if tok.kind == "IDENT" and tok.value == "empty":
        ts.next()
        atoms = ()
    else:
        items = [_parse_host_atom(ts)]
        while ts.accept(":"):
            items.append(_parse_host_atom(ts))
        atoms = tuple(items)
    mark = MARK_NONE
    if ts.accept("#"):
        mtok = ts.expect("IDENT")
        if mtok.value not in marks:
            raise _error(mtok, f"{mtok.value!r} is not a valid mark here", "semantic")
        mark = mtok.value
    return atoms, mark


def parse_host_graph(text: str, minimal_gc: bool = False) -> Graph:
    ts = _Stream(tokenize(text))
    ts.expect("[")
    node_decls = []
    while ts.peek().kind == "(":
        ts.next()
        id_tok = ts.peek()
        if id_tok.kind == "-":
            raise _error(id_tok, "node ids must be non-negative integers", "semantic")
        node_id = ts.expect("INT").value
        root = False
        if ts.peek().kind == "(":
            ts.next()
            marker = ts.expect("IDENT")
            if marker.value != "R":
                raise _error(marker, "expected root marker (R)")
            ts.expect(")")
            root = True
        ts.expect(",")
        label, mark = _parse_host_label(ts, NODE_MARKS)
        ts.expect(")")
        node_decls.append((id_tok, node_id, label, mark, root))
    ts.expect("|")
    edge_decls = []
    while ts.peek().kind == "(":
        ts.next()
        ts.expect("INT")                        # edge id, cosmetic
        ts.expect(",")
        src_tok = ts.expect("INT")
        ts.expect(",")
        tgt_tok = ts.expect("INT")
        ts.expect(",")
        label, mark = _parse_host_label(ts, EDGE_MARKS)
        ts.expect(")")
        edge_decls.append((src_tok, tgt_tok, label, mark))
    ts.expect("]")
    tok = ts.peek()
    if tok.kind != "EOF":
        raise _error(tok, f"unexpected {describe(tok)} after graph")

    # Insert in reverse declaration order: the chains are head-inserted,
    # so the live chains then iterate in declaration order and printing
    # a parsed graph reproduces the input's ordering.
    g = Graph(minimal_gc=minimal_gc)
    ids = IdMap()
    seen = set()
    for id_tok, node_id, label, mark, root in node_decls:
        if node_id in seen:
            raise _error(id_tok, f"duplicate node id: {node_id}", "semantic")
        if node_id < 0 or node_id > 2 ** 63 - 1:
            raise _error(id_tok, f"node id out of range: {node_id}", "semantic")
        seen.add(node_id)
    for id_tok, node_id, label, mark, root in reversed(node_decls):
        ids.insert(node_id, g.add_node(label, mark, root))
    for src_tok, tgt_tok, label, mark in reversed(edge_decls):
        src = ids.lookup(src_tok.value)
        tgt = ids.lookup(tgt_tok.value)
        if src is None:
            raise _error(src_tok, f"edge refers to unknown node {src_tok.value}",
                         "semantic")
        if tgt is None:
            raise _error(tgt_tok, f"edge refers to unknown node {tgt_tok.value}",
                         "semantic")
        g.add_edge(src, tgt, label, mark)
    return g


def _format_label(label: tuple, mark: str) -> str:
    if not label:
        text = "empty"
    else:
        text = ":".join(f'"{a}"' if isinstance(a, str) else str(a) for a in label)
    if mark != MARK_NONE:
        text += f" # {mark}"
    return text


def print_graph(g: Graph) -> str:
    parts = ["["]
    number = {}
    for i, node in enumerate(g.nodes_chain()):
        number[id(node)] = i
        root = " (R)" if node.is_root else ""
        parts.append(f"({i}{root}, {_format_label(node.label, node.mark)})")
    parts.append("|")
    eid = 0
    for node in g.nodes_chain():
        for edge in node.out_chain:
            parts.append(
                f"({eid}, {number[id(edge.source)]}, {number[id(edge.target)]}, "
                f"{_format_label(edge.label, edge.mark)})")
            eid += 1
    parts.append("]")
    return " ".join(parts)


# -- expressions ----------------------------------------------------------


def _parse_expr(ts: _Stream):
    return _parse_cons(ts)


def _parse_cons(ts: _Stream):
    left = _parse_cat(ts)
    while ts.accept(":"):
        right = _parse_cat(ts)
        left = ("cons", left, right)
    return left


def _parse_cat(ts: _Stream):
    left = _parse_sum(ts)
    while ts.accept("."):
        right = _parse_sum(ts)
        left = ("cat", left, right)
    return left


def _parse_sum(ts: _Stream):
    left = _parse_term(ts)
    while True:
        if ts.accept("+"):
            left = ("add", left, _parse_term(ts))
        elif ts.accept("-"):
            left = ("sub", left, _parse_term(ts))
        else:
            return left


def _parse_term(ts: _Stream):
    left = _parse_unary(ts)
    while True:
        if ts.accept("*"):
            left = ("mul", left, _parse_unary(ts))
        elif ts.accept("/"):
            left = ("div", left, _parse_unary(ts))
        else:
            return left


def _parse_unary(ts: _Stream):
    if ts.accept("-"):
        inner = _parse_unary(ts)
        if inner[0] == "int":
            return ("int", -inner[1])
        return ("neg", inner)
    return _parse_primary(ts)


def _parse_primary(ts: _Stream):
    tok = ts.peek()
    if tok.kind == "INT":
        ts.next()
        if tok.value > INT32_MAX:
            raise _error(tok, "integer does not fit 32 bits", "semantic")
        return ("int", tok.value)
    if tok.kind == "STRING":
        ts.next()
        return ("str", tok.value)
    if tok.kind == "(":
        ts.next()
        inner = _parse_expr(ts)
        ts.expect(")")
        return inner
    if tok.kind == "IDENT":
        if tok.value == "empty":
            ts.next()
            return ("empty",)
        if tok.value in ("indeg", "outdeg"):
            ts.next()
            ts.expect("(")
            node_tok = ts.expect("INT")
            ts.expect(")")
            return (tok.value, node_tok.value)
        ts.next()
        return ("var", tok.value)
    raise _error(tok, f"expected an expression, found {describe(tok)}")


# -- conditions ------------------------------------------------------------

_RELOPS = ("=", "!=", ">", ">=", "<", "<=")
_EXPR_CONT = (":", ".", "+", "-", "*", "/")


def _parse_cond(ts: _Stream):
    left = _parse_cond_and(ts)
    while ts.peek().kind == "IDENT" and ts.peek().value == "or":
        ts.next()
        left = ("or", left, _parse_cond_and(ts))
    return left


def _parse_cond_and(ts: _Stream):
    left = _parse_cond_not(ts)
    while ts.peek().kind == "IDENT" and ts.peek().value == "and":
        ts.next()
        left = ("and", left, _parse_cond_not(ts))
    return left


def _parse_cond_not(ts: _Stream):
    if ts.peek().kind == "IDENT" and ts.peek().value == "not":
        ts.next()
        return ("not", _parse_cond_not(ts))
    return _parse_cond_atom(ts)


def _parse_cond_atom(ts: _Stream):
    tok = ts.peek()
    if tok.kind == "IDENT" and tok.value == "edge":
        ts.next()
        ts.expect("(")
        src = ts.expect("INT").value
        ts.expect(",")
        tgt = ts.expect("INT").value
        label = None
        if ts.accept(","):
            label = _parse_expr(ts)
        ts.expect(")")
        return ("edge", src, tgt, label)
    if tok.kind == "IDENT" and tok.value in ("int", "char", "string", "atom") \
            and ts.peek(1).kind == "(":
        ts.next()
        ts.expect("(")
        var = ts.expect("IDENT")
        ts.expect(")")
        return ("typecheck", tok.value, var.value)
    if tok.kind == "(":
        # Could be a bracketed condition or a bracketed expression that
        # starts a comparison; try the condition reading first.
        saved = ts.pos
        try:
            ts.next()
            inner = _parse_cond(ts)
            ts.expect(")")
            nxt = ts.peek()
            if nxt.kind not in _RELOPS and nxt.kind not in _EXPR_CONT:
                return inner
        except SourceError:
            pass
        ts.pos = saved
    left = _parse_expr(ts)
    op = ts.peek()
    if op.kind not in _RELOPS:
        raise _error(op, f"expected a relational operator, found {describe(op)}")
    ts.next()
    right = _parse_expr(ts)
    return ("rel", op.kind, left, right)


# -- rule declarations ------------------------------------------------------


def _expr_to_label_pattern(expr, tok: Token, variables) -> LabelPattern:
    items: list[tuple] = []

    def flatten(e):
        tag = e[0]
        if tag == "cons":
            flatten(e[1])
            flatten(e[2])
        elif tag == "empty":
            pass
        elif tag == "int" or tag == "str":
            items.append(("lit", e[1]))
        elif tag == "var":
            name = e[1]
            if name not in variables:
                raise _error(tok, f"undeclared variable {name!r}", "semantic")
            items.append(("var", name, variables[name]))
        else:
            raise _error(tok, "left-hand labels may only contain constants "
                              "and variables", "semantic")

    flatten(expr)
    try:
        return LabelPattern(items)
    except RuleError as exc:
        raise _error(tok, str(exc), "semantic")


def _parse_rule_side(ts: _Stream, variables, lhs: bool):
    open_tok = ts.expect("[")
    nodes = []
    node_ids = set()
    while ts.peek().kind == "(":
        ts.next()
        id_tok = ts.expect("INT")
        if id_tok.value in node_ids:
            raise _error(id_tok, f"node {id_tok.value} declared twice", "semantic")
        node_ids.add(id_tok.value)
        root = False
        if ts.peek().kind == "(":
            ts.next()
            marker = ts.expect("IDENT")
            if marker.value != "R":
                raise _error(marker, "expected root marker (R)")
            ts.expect(")")
            root = True
        ts.expect(",")
        lab_tok = ts.peek()
        expr = _parse_expr(ts)
        mark = MARK_NONE
        if ts.accept("#"):
            mtok = ts.expect("IDENT")
            if mtok.value not in ALL_MARKS:
                raise _error(mtok, f"unknown mark {mtok.value!r}", "semantic")
            mark = mtok.value
        ts.expect(")")
        if mark != MARK_ANY and mark not in NODE_MARKS:
            raise _error(lab_tok, f"{mark!r} is not a node mark", "semantic")
        label = _expr_to_label_pattern(expr, lab_tok, variables) if lhs else expr
        nodes.append(PatternNode(id_tok.value, label, mark, root))
    ts.expect("|")
    edges = []
    edge_ids = set()
    while ts.peek().kind == "(":
        ts.next()
        eid_tok = ts.expect("INT")
        if eid_tok.value in edge_ids:
            raise _error(eid_tok, f"edge {eid_tok.value} declared twice", "semantic")
        edge_ids.add(eid_tok.value)
        bidir = False
        if ts.peek().kind == "(":
            ts.next()
            marker = ts.expect("IDENT")
            if marker.value != "B":
                raise _error(marker, "expected bidirectional marker (B)")
            ts.expect(")")
            bidir = True
        ts.expect(",")
        src_tok = ts.expect("INT")
        ts.expect(",")
        tgt_tok = ts.expect("INT")
        ts.expect(",")
        lab_tok = ts.peek()
        expr = _parse_expr(ts)
        mark = MARK_NONE
        if ts.accept("#"):
            mtok = ts.expect("IDENT")
            if mtok.value not in ALL_MARKS:
                raise _error(mtok, f"unknown mark {mtok.value!r}", "semantic")
            mark = mtok.value
        ts.expect(")")
        if mark != MARK_ANY and mark not in EDGE_MARKS:
            raise _error(lab_tok, f"{mark!r} is not an edge mark", "semantic")
        for t in (src_tok, tgt_tok):
            if t.value not in node_ids:
                raise _error(t, f"edge endpoint {t.value} is not a node on this side",
                             "semantic")
        label = _expr_to_label_pattern(expr, lab_tok, variables) if lhs else expr
        edges.append(PatternEdge(eid_tok.value, src_tok.value, tgt_tok.value,
                                 label, mark, bidir))
    ts.expect("]")
    return PatternGraph(nodes, edges)


def _expr_vars(expr, acc: set):
    if expr[0] == "var":
        acc.add(expr[1])
        return
    for part in expr[1:]:
        if isinstance(part, tuple):
            _expr_vars(part, acc)


def _cond_vars(cond, acc: set):
    tag = cond[0]
    if tag in ("and", "or"):
        _cond_vars(cond[1], acc)
        _cond_vars(cond[2], acc)
    elif tag == "not":
        _cond_vars(cond[1], acc)
    elif tag == "rel":
        _expr_vars(cond[2], acc)
        _expr_vars(cond[3], acc)
    elif tag == "edge":
        if cond[3] is not None:
            _expr_vars(cond[3], acc)
    elif tag == "typecheck":
        acc.add(cond[2])


def _cond_node_refs(cond, acc: list):
    tag = cond[0]
    if tag in ("and", "or"):
        _cond_node_refs(cond[1], acc)
        _cond_node_refs(cond[2], acc)
    elif tag == "not":
        _cond_node_refs(cond[1], acc)
    elif tag == "edge":
        acc.append(cond[1])
        acc.append(cond[2])
        if cond[3] is not None:
            _expr_node_refs(cond[3], acc)
    elif tag == "rel":
        _expr_node_refs(cond[2], acc)
        _expr_node_refs(cond[3], acc)


def _expr_node_refs(expr, acc: list):
    if expr[0] in ("indeg", "outdeg"):
        acc.append(expr[1])
        return
    for part in expr[1:]:
        if isinstance(part, tuple):
            _expr_node_refs(part, acc)


def _expr_type(expr, variables, tok) -> str:
    tag = expr[0]
    if tag == "int":
        return "int"
    if tag == "str":
        return "string"
    if tag == "empty":
        return "list"
    if tag == "var":
        if expr[1] not in variables:
            raise _error(tok, f"undeclared variable {expr[1]!r}", "semantic")
        return variables[expr[1]]
    if tag in ("indeg", "outdeg"):
        return "int"
    if tag == "cons":
        _expr_type(expr[1], variables, tok)
        _expr_type(expr[2], variables, tok)
        return "list"
    if tag == "cat":
        for sub in (expr[1], expr[2]):
            if _expr_type(sub, variables, tok) not in ("string", "char"):
                raise _error(tok, "'.' requires string operands", "semantic")
        return "string"
    if tag == "neg":
        if _expr_type(expr[1], variables, tok) != "int":
            raise _error(tok, "unary '-' requires an integer operand", "semantic")
        return "int"
    # add/sub/mul/div
    for sub in (expr[1], expr[2]):
        if _expr_type(sub, variables, tok) != "int":
            raise _error(tok, "arithmetic requires integer operands", "semantic")
    return "int"


def _check_cond_types(cond, variables, tok):
    tag = cond[0]
    if tag in ("and", "or"):
        _check_cond_types(cond[1], variables, tok)
        _check_cond_types(cond[2], variables, tok)
    elif tag == "not":
        _check_cond_types(cond[1], variables, tok)
    elif tag == "rel":
        lt = _expr_type(cond[2], variables, tok)
        rt = _expr_type(cond[3], variables, tok)
        if cond[1] in (">", ">=", "<", "<="):
            for t in (lt, rt):
                if t != "int":
                    raise _error(tok, f"ordering comparison requires integers, got {t}",
                                 "semantic")
    elif tag == "edge" and cond[3] is not None:
        _expr_type(cond[3], variables, tok)


def _parse_rule_decl(ts: _Stream, name_tok: Token) -> Rule:
    name = name_tok.value
    ts.expect("(")
    variables: dict[str, str] = {}
    if ts.peek().kind != ")":
        while True:
            group = [ts.expect("IDENT")]
            while ts.accept(","):
                group.append(ts.expect("IDENT"))
            ts.expect(":")
            type_tok = ts.expect("IDENT")
            if type_tok.value not in ("int", "char", "string", "atom", "list"):
                raise _error(type_tok, f"unknown variable type {type_tok.value!r}",
                             "semantic")
            for t in group:
                if t.value in variables:
                    raise _error(t, f"variable {t.value!r} declared twice", "semantic")
                variables[t.value] = type_tok.value
            if not ts.accept(";"):
                break
    ts.expect(")")
    lhs = _parse_rule_side(ts, variables, lhs=True)
    ts.expect("=>")
    rhs = _parse_rule_side(ts, variables, lhs=False)
    condition = None
    if ts.peek().kind == "IDENT" and ts.peek().value == "where":
        ts.next()
        condition = _parse_cond(ts)

    rule = Rule(name, variables, lhs, rhs, condition)
    _validate_rule(rule, name_tok)
    return rule


def _validate_rule(rule: Rule, tok: Token) -> None:
    bound = set()
    for n in rule.lhs.nodes:
        bound.update(name for name, _ in n.label.variables())
    for e in rule.lhs.edges:
        bound.update(name for name, _ in e.label.variables())

    interface = set(rule.interface)
    rhs_vars: set[str] = set()
    for n in rule.rhs.nodes:
        _expr_vars(n.label, rhs_vars)
        _expr_type(n.label, rule.variables, tok)
        if n.mark == MARK_ANY and n.pid not in interface:
            raise _error(tok, "wildcard mark on a created node has nothing "
                              "to inherit from", "semantic")
    lhs_edge_ids = {e.eid: e for e in rule.lhs.edges}
    for e in rule.rhs.edges:
        _expr_vars(e.label, rhs_vars)
        _expr_type(e.label, rule.variables, tok)
        counterpart = lhs_edge_ids.get(e.eid)
        if e.mark == MARK_ANY and counterpart is None:
            raise _error(tok, "wildcard mark on a created edge has nothing "
                              "to inherit from", "semantic")
        if e.bidir:
            if counterpart is None or not counterpart.bidir or \
                    {counterpart.src, counterpart.tgt} != {e.src, e.tgt}:
                raise _error(tok, "bidirectional right-hand edge needs a "
                                  "matching bidirectional left-hand edge",
                             "semantic")

    unbound = rhs_vars - bound
    if unbound:
        raise _error(tok, f"right-hand side uses unbound variables: "
                          f"{sorted(unbound)}", "semantic")
    cond_vars: set[str] = set()
    if rule.condition is not None:
        _cond_vars(rule.condition, cond_vars)
        for name in sorted(cond_vars):
            if name not in rule.variables:
                raise _error(tok, f"undeclared variable {name!r} in condition",
                             "semantic")
        unbound = cond_vars - bound
        if unbound:
            raise _error(tok, f"condition uses unbound variables: {sorted(unbound)}",
                         "semantic")
        refs: list[int] = []
        _cond_node_refs(rule.condition, refs)
        for pid in refs:
            if pid not in rule.lhs.by_id:
                raise _error(tok, f"condition refers to node {pid}, which is not "
                                  f"in the left-hand side", "semantic")
        _check_cond_types(rule.condition, rule.variables, tok)
    for n in rule.rhs.nodes:
        _expr_node_refs_check(n.label, rule, tok)
    for e in rule.rhs.edges:
        _expr_node_refs_check(e.label, rule, tok)


def _expr_node_refs_check(expr, rule, tok):
    refs: list[int] = []
    _expr_node_refs(expr, refs)
    for pid in refs:
        if pid not in rule.lhs.by_id:
            raise _error(tok, f"degree operator refers to node {pid}, which is "
                              f"not in the left-hand side", "semantic")


# -- command sequences --------------------------------------------------------


def _parse_command_seq(ts: _Stream):
    cmds = [_parse_command(ts)]
    while ts.accept(";"):
        cmds.append(_parse_command(ts))
    return cmds[0] if len(cmds) == 1 else Seq(cmds)


def _parse_command(ts: _Stream):
    cmd = _parse_command_primary(ts)
    while ts.accept("!"):
        cmd = Loop(cmd)
    return cmd


def _parse_command_primary(ts: _Stream):
    tok = ts.peek()
    if tok.kind == "(":
        ts.next()
        inner = _parse_command_seq(ts)
        ts.expect(")")
        return inner
    if tok.kind == "{":
        ts.next()
        names = [ts.expect("IDENT")]
        while ts.accept(","):
            names.append(ts.expect("IDENT"))
        ts.expect("}")
        return RuleSet([t.value for t in names], (names[0].line, names[0].column))
    if tok.kind != "IDENT":
        raise _error(tok, f"expected a command, found {describe(tok)}")
    word = tok.value
    if word == "if":
        ts.next()
        guard = _parse_command(ts)
        then_tok = ts.expect("IDENT")
        if then_tok.value != "then":
            raise _error(then_tok, "expected 'then'")
        then_cmd = _parse_command(ts)
        else_cmd = Skip()
        if ts.peek().kind == "IDENT" and ts.peek().value == "else":
            ts.next()
            else_cmd = _parse_command(ts)
        return If(guard, then_cmd, else_cmd)
    if word == "try":
        ts.next()
        guard = _parse_command(ts)
        then_cmd = Skip()
        else_cmd = Skip()
        if ts.peek().kind == "IDENT" and ts.peek().value == "then":
            ts.next()
            then_cmd = _parse_command(ts)
        if ts.peek().kind == "IDENT" and ts.peek().value == "else":
            ts.next()
            else_cmd = _parse_command(ts)
        return Try(guard, then_cmd, else_cmd)
    if word == "skip":
        ts.next()
        return Skip()
    if word == "fail":
        ts.next()
        return Fail()
    if word == "break":
        ts.next()
        return Break()
    if word in KEYWORDS:
        raise _error(tok, f"expected a command, found {describe(tok)}")
    ts.next()
    return ProcCall(tok.value, (tok.line, tok.column))


# -- programs ------------------------------------------------------------------


class ParsedProgram:
    def __init__(self, rules: dict[str, Rule], procedures: dict, main):
        self.rules = rules
        self.procedures = procedures
        self.main = main


def parse_program(text: str) -> ParsedProgram:
    ts = _Stream(tokenize(text))
    rules: dict[str, Rule] = {}
    procedures: dict = {}
    main = None
    declared: dict[str, Token] = {}
    while ts.peek().kind != "EOF":
        name_tok = ts.expect("IDENT")
        if name_tok.value in KEYWORDS:
            raise _error(name_tok, f"{name_tok.value!r} cannot be a declaration name",
                         "semantic")
        if ts.accept("="):
            body = _parse_command_seq(ts)
            if name_tok.value == "Main":
                if main is not None:
                    raise _error(name_tok, "repeated Main declaration", "semantic")
                main = body
            else:
                if name_tok.value in declared:
                    raise _error(name_tok, f"{name_tok.value!r} declared twice",
                                 "semantic")
                procedures[name_tok.value] = body
                declared[name_tok.value] = name_tok
        elif ts.peek().kind == "(":
            if name_tok.value in declared:
                raise _error(name_tok, f"{name_tok.value!r} declared twice", "semantic")
            rules[name_tok.value] = _parse_rule_decl(ts, name_tok)
            declared[name_tok.value] = name_tok
        else:
            raise _error(ts.peek(), "expected '=' or '(' after declaration name")
    if main is None:
        tok = ts.peek()
        raise _error(tok, "program has no Main declaration", "semantic")

    program = ParsedProgram(rules, procedures, main)
    _validate_program(program)
    return program


def _validate_program(program: ParsedProgram) -> None:
    from .engine import check_calls_and_recursion

    check_calls_and_recursion(program)


def parse_rule(text: str) -> Rule:
    ts = _Stream(tokenize(text))
    name_tok = ts.expect("IDENT")
    rule = _parse_rule_decl(ts, name_tok)
    tok = ts.peek()
    if tok.kind != "EOF":
        raise _error(tok, f"unexpected {describe(tok)} after rule")
    return rule


def validate(kind: str, text: str) -> None:
    """Parse-only check; raises SourceError on any problem."""
    if kind == "program":
        parse_program(text)
    elif kind == "rule":
        parse_rule(text)
    elif kind == "graph":
        parse_host_graph(text)
    else:
        raise ValueError(f"unknown validation kind {kind!r}")

"""Host graphs: nodes, edges, labels, marks, roots.

Two iteration backends coexist over the same records.  The chain
backend follows the live-node list and therefore skips deleted nodes in
one step; the index-scan backend walks every slot index below the
high-water mark and filters on the in-graph flag, which is how the
legacy layout iterated.  Both see exactly the live nodes.

Deletion is deferred: a record's slot is only returned to its store
once nothing references it any more (neither the graph chains nor a
change journal), so handles held elsewhere never dangle.
"""

from __future__ import annotations

from collections import Counter
from typing import Iterator, Optional

from .storage import BigArray, Chain, Record, chain_entry_store, chain_push, chain_unlink

# Marks ----------------------------------------------------------------

MARK_NONE = "none"
MARK_RED = "red"
MARK_GREEN = "green"
MARK_BLUE = "blue"
MARK_GREY = "grey"
MARK_DASHED = "dashed"
MARK_ANY = "any"

NODE_MARKS = frozenset((MARK_NONE, MARK_RED, MARK_GREEN, MARK_BLUE, MARK_GREY))
EDGE_MARKS = frozenset((MARK_NONE, MARK_RED, MARK_GREEN, MARK_BLUE, MARK_DASHED))

# Flag bits, packed into one byte per record.
FLAG_ROOT = 0x01
FLAG_IN_GRAPH = 0x02
FLAG_IN_STACK = 0x04
FLAG_MATCHED = 0x08
FLAG_IN_SRC_CHAIN = 0x10
FLAG_IN_TGT_CHAIN = 0x20

INT32_MIN = -(2 ** 31)
INT32_MAX = 2 ** 31 - 1
MAX_EXTERNAL_ID = 2 ** 63 - 1

# Record sizes (bytes) used for store geometry.
NODE_SIZE = 64
EDGE_SIZE = 48


class GraphError(Exception):
    pass


class LabelStore:
    """Interns host labels so identical lists share one tuple.

    Reference counts let the store drop a label once no live item
    carries it; the minimal-GC mode turns the counting off entirely.
    """

    __slots__ = ("_table", "refcounting")

    def __init__(self, refcounting: bool = True):
        self._table: dict[tuple, list] = {}
        self.refcounting = refcounting

    def intern(self, label: tuple) -> tuple:
        entry = self._table.get(label)
        if entry is None:
            self._table[label] = [label, 1]
            return label
        if self.refcounting:
            entry[1] += 1
        return entry[0]

    def release(self, label: tuple) -> None:
        if not self.refcounting:
            return
        entry = self._table.get(label)
        if entry is not None:
            entry[1] -= 1
            if entry[1] <= 0:
                del self._table[label]

    def __len__(self) -> int:
        return len(self._table)


class Node(Record):
    __slots__ = (
        "label", "mark", "flags", "indegree", "outdegree",
        "out_chain", "in_chain", "edge_entry_store", "chain_entry",
    )

    def __init__(self) -> None:
        super().__init__()
        self.label = ()
        self.mark = MARK_NONE
        self.flags = 0
        self.indegree = 0
        self.outdegree = 0
        self.out_chain: Optional[Chain] = None
        self.in_chain: Optional[Chain] = None
        self.edge_entry_store: Optional[BigArray] = None
        self.chain_entry = None

    @property
    def is_root(self) -> bool:
        return bool(self.flags & FLAG_ROOT)

    @property
    def in_graph(self) -> bool:
        return bool(self.flags & FLAG_IN_GRAPH)


class Edge(Record):
    __slots__ = ("label", "mark", "flags", "source", "target", "src_entry", "tgt_entry")

    def __init__(self) -> None:
        super().__init__()
        self.label = ()
        self.mark = MARK_NONE
        self.flags = 0
        self.source: Optional[Node] = None
        self.target: Optional[Node] = None
        self.src_entry = None
        self.tgt_entry = None


class IdMap:
    """External integer id -> node handle, sized by entry count only."""

    __slots__ = ("_map",)

    def __init__(self) -> None:
        self._map: dict[int, Node] = {}

    def insert(self, external_id: int, node: Node) -> None:
        if external_id < 0 or external_id > MAX_EXTERNAL_ID:
            raise GraphError(f"node id out of range: {external_id}")
        if external_id in self._map:
            raise GraphError(f"duplicate node id: {external_id}")
        self._map[external_id] = node

    def lookup(self, external_id: int) -> Optional[Node]:
        return self._map.get(external_id)

    def __len__(self) -> int:
        return len(self._map)


# How many flag bytes an index scan inspects per chunk before giving
# control back to Python.  Chunks are skipped at C speed via find().
SCAN_CHUNK = 128


class Graph:
    __slots__ = (
        "node_store", "edge_store", "node_chain_entry_store",
        "node_chain", "root_list", "node_count", "edge_count",
        "labels", "live_bytes", "iter_steps", "minimal_gc",
    )

    def __init__(self, minimal_gc: bool = False):
        self.node_store = BigArray(NODE_SIZE, Node)
        self.edge_store = BigArray(EDGE_SIZE, Edge)
        self.node_chain_entry_store = chain_entry_store()
        self.node_chain = Chain()
        self.root_list: list[Node] = []
        self.node_count = 0
        self.edge_count = 0
        self.labels = LabelStore(refcounting=not minimal_gc)
        # One byte per node slot mirroring the in-graph bit; lets the
        # index-scan backend skip hole runs without touching records.
        self.live_bytes = bytearray()
        self.iter_steps = 0
        self.minimal_gc = minimal_gc

    # -- nodes ----------------------------------------------------------

    def add_node(self, label: tuple = (), mark: str = MARK_NONE, root: bool = False) -> Node:
        if mark not in NODE_MARKS:
            raise GraphError(f"not a node mark: {mark}")
        node = self.node_store.alloc()
        node.label = self.labels.intern(label)
        node.mark = mark
        node.flags = FLAG_IN_GRAPH
        node.indegree = 0
        node.outdegree = 0
        if node.out_chain is None:
            node.out_chain = Chain()
            node.in_chain = Chain()
            node.edge_entry_store = chain_entry_store()
        node.chain_entry = chain_push(self.node_chain, node, self.node_chain_entry_store)
        idx = node.slot_index
        if idx == len(self.live_bytes):
            self.live_bytes.append(1)
        else:
            self.live_bytes[idx] = 1
        if root:
            node.flags |= FLAG_ROOT
            self.root_list.append(node)
        self.node_count += 1
        return node

    def delete_node(self, node: Node) -> None:
        if not node.flags & FLAG_IN_GRAPH:
            raise GraphError("node is not in the graph")
        if node.indegree or node.outdegree:
            raise GraphError("cannot delete a node with incident edges")
        chain_unlink(self.node_chain, node.chain_entry, self.node_chain_entry_store)
        node.chain_entry = None
        self.live_bytes[node.slot_index] = 0
        if node.flags & FLAG_ROOT:
            self.root_list.remove(node)
        self.labels.release(node.label)
        node.flags &= ~(FLAG_IN_GRAPH | FLAG_ROOT)
        self.node_count -= 1
        if not node.flags & FLAG_IN_STACK and not self.minimal_gc:
            self.node_store.free(node)

    def restore_node(self, node: Node, flags: int) -> None:
        """Relink a deferred-deleted node exactly as it was (modulo its
        position in the node chain, which is head insertion)."""
        node.flags = flags & ~FLAG_IN_STACK | FLAG_IN_GRAPH
        node.label = self.labels.intern(node.label)
        node.chain_entry = chain_push(self.node_chain, node, self.node_chain_entry_store)
        self.live_bytes[node.slot_index] = 1
        if node.flags & FLAG_ROOT:
            self.root_list.append(node)
        self.node_count += 1

    def release_node(self, node: Node) -> None:
        """Drop a journal reference; frees the slot if nothing else
        holds the record."""
        node.flags &= ~FLAG_IN_STACK
        if not node.flags & FLAG_IN_GRAPH and not self.minimal_gc:
            self.node_store.free(node)

    # -- edges ----------------------------------------------------------

    def add_edge(self, src: Node, tgt: Node, label: tuple = (), mark: str = MARK_NONE) -> Edge:
        if mark not in EDGE_MARKS:
            raise GraphError(f"not an edge mark: {mark}")
        if not src.flags & FLAG_IN_GRAPH or not tgt.flags & FLAG_IN_GRAPH:
            raise GraphError("edge endpoint is not live")
        edge = self.edge_store.alloc()
        edge.label = self.labels.intern(label)
        edge.mark = mark
        edge.flags = FLAG_IN_SRC_CHAIN | FLAG_IN_TGT_CHAIN
        edge.source = src
        edge.target = tgt
        edge.src_entry = chain_push(src.out_chain, edge, src.edge_entry_store)
        edge.tgt_entry = chain_push(tgt.in_chain, edge, tgt.edge_entry_store)
        src.outdegree += 1
        tgt.indegree += 1
        self.edge_count += 1
        return edge

    def delete_edge(self, edge: Edge) -> None:
        if not edge.flags & (FLAG_IN_SRC_CHAIN | FLAG_IN_TGT_CHAIN):
            raise GraphError("edge already deleted")
        src, tgt = edge.source, edge.target
        chain_unlink(src.out_chain, edge.src_entry, src.edge_entry_store)
        chain_unlink(tgt.in_chain, edge.tgt_entry, tgt.edge_entry_store)
        edge.src_entry = edge.tgt_entry = None
        src.outdegree -= 1
        tgt.indegree -= 1
        self.labels.release(edge.label)
        edge.flags &= ~(FLAG_IN_SRC_CHAIN | FLAG_IN_TGT_CHAIN)
        self.edge_count -= 1
        if not edge.flags & FLAG_IN_STACK and not self.minimal_gc:
            self.edge_store.free(edge)

    def restore_edge(self, edge: Edge, flags: int) -> None:
        src, tgt = edge.source, edge.target
        edge.flags = flags & ~FLAG_IN_STACK | FLAG_IN_SRC_CHAIN | FLAG_IN_TGT_CHAIN
        edge.label = self.labels.intern(edge.label)
        edge.src_entry = chain_push(src.out_chain, edge, src.edge_entry_store)
        edge.tgt_entry = chain_push(tgt.in_chain, edge, tgt.edge_entry_store)
        src.outdegree += 1
        tgt.indegree += 1
        self.edge_count += 1

    def release_edge(self, edge: Edge) -> None:
        edge.flags &= ~FLAG_IN_STACK
        if not edge.flags & (FLAG_IN_SRC_CHAIN | FLAG_IN_TGT_CHAIN) and not self.minimal_gc:
            self.edge_store.free(edge)

    # -- in-place updates ------------------------------------------------

    def relabel_node(self, node: Node, label: tuple) -> None:
        self.labels.release(node.label)
        node.label = self.labels.intern(label)

    def remark_node(self, node: Node, mark: str) -> None:
        if mark not in NODE_MARKS:
            raise GraphError(f"not a node mark: {mark}")
        node.mark = mark

    def relabel_edge(self, edge: Edge, label: tuple) -> None:
        self.labels.release(edge.label)
        edge.label = self.labels.intern(label)

    def remark_edge(self, edge: Edge, mark: str) -> None:
        if mark not in EDGE_MARKS:
            raise GraphError(f"not an edge mark: {mark}")
        edge.mark = mark

    def set_root(self, node: Node, flag: bool) -> None:
        if flag and not node.flags & FLAG_ROOT:
            node.flags |= FLAG_ROOT
            self.root_list.append(node)
        elif not flag and node.flags & FLAG_ROOT:
            node.flags &= ~FLAG_ROOT
            self.root_list.remove(node)

    # -- iteration --------------------------------------------------------

    def nodes_chain(self) -> Iterator[Node]:
        entry = self.node_chain.head
        steps = 0
        while entry is not None:
            steps += 1
            yield entry.payload
            entry = entry.next
        self.iter_steps += steps

    def nodes_index_scan(self) -> Iterator[Node]:
        live = self.live_bytes
        store = self.node_store
        i = 0
        while True:
            hw = store.high_water
            if i >= hw:
                self.iter_steps += 0
                return
            j = live.find(1, i, min(i + SCAN_CHUNK, hw))
            if j < 0:
                self.iter_steps += min(i + SCAN_CHUNK, hw) - i
                i = min(i + SCAN_CHUNK, hw)
                continue
            self.iter_steps += j - i + 1
            yield store.get(j)
            i = j + 1

    def nodes_iter(self, backend: str = "chain") -> Iterator[Node]:
        if backend == "chain":
            return self.nodes_chain()
        if backend == "index_scan":
            return self.nodes_index_scan()
        raise GraphError(f"unknown iteration backend: {backend}")

    def out_edges(self, node: Node) -> Iterator[Edge]:
        return iter(node.out_chain)

    def in_edges(self, node: Node) -> Iterator[Edge]:
        return iter(node.in_chain)

    def nodes(self) -> list[Node]:
        return list(self.nodes_chain())

    def edges(self) -> list[Edge]:
        out = []
        for node in self.nodes_chain():
            out.extend(node.out_chain)
        return out

    def teardown(self) -> None:
        """Drop internal structure explicitly (skipped in fast-shutdown
        mode, where the process exits right after output)."""
        self.node_store = self.edge_store = self.node_chain_entry_store = None
        self.node_chain = None
        self.root_list = []
        self.live_bytes = bytearray()


def check_consistency(g: Graph) -> None:
    """Test-build auditor for the structural invariants."""
    nodes = g.nodes()
    assert len(nodes) == g.node_count
    roots = [n for n in nodes if n.flags & FLAG_ROOT]
    assert set(id(n) for n in roots) == set(id(n) for n in g.root_list)
    total_out = 0
    for n in nodes:
        assert g.live_bytes[n.slot_index] == 1
        assert n.indegree == len(n.in_chain)
        assert n.outdegree == len(n.out_chain)
        total_out += n.outdegree
        for e in n.out_chain:
            assert e.source is n
        for e in n.in_chain:
            assert e.target is n
    assert total_out == g.edge_count
    live_idx = {n.slot_index for n in nodes}
    for i in range(g.node_store.high_water):
        assert (g.live_bytes[i] == 1) == (i in live_idx)


# Isomorphism ----------------------------------------------------------


def _node_signature(n: Node, with_labels: bool) -> tuple:
    label = n.label if with_labels else None
    return (label, n.mark, bool(n.flags & FLAG_ROOT), n.indegree, n.outdegree)


def _edge_key(e: Edge, mapping: dict, with_labels: bool) -> tuple:
    label = e.label if with_labels else None
    return (mapping[id(e.source)], mapping[id(e.target)], label, e.mark)


def _edge_blocks(g: Graph, index: dict, with_labels: bool) -> dict:
    """Multiset of (label, mark) per ordered node pair, loops included."""
    blocks: dict[tuple[int, int], Counter] = {}
    for node in g.nodes_chain():
        for e in node.out_chain:
            key = (index[id(e.source)], index[id(e.target)])
            blocks.setdefault(key, Counter())[
                (e.label if with_labels else None, e.mark)] += 1
    return blocks


def graphs_isomorphic(g1: Graph, g2: Graph, ignore_labels: bool = False) -> bool:
    """Label-, mark-, root- and direction-preserving isomorphism test.

    Backtracking over node bijections; candidates are pruned by node
    signature and, at every assignment, by the edge multisets between
    the new node and everything already mapped.  Meant for the small
    graphs that appear in tests.
    """
    with_labels = not ignore_labels
    if g1.node_count != g2.node_count or g1.edge_count != g2.edge_count:
        return False
    n1 = g1.nodes()
    n2 = g2.nodes()
    sig1 = Counter(_node_signature(n, with_labels) for n in n1)
    sig2 = Counter(_node_signature(n, with_labels) for n in n2)
    if sig1 != sig2:
        return False

    idx1 = {id(n): i for i, n in enumerate(n1)}
    idx2 = {id(n): i for i, n in enumerate(n2)}
    blocks1 = _edge_blocks(g1, idx1, with_labels)
    blocks2 = _edge_blocks(g2, idx2, with_labels)

    by_sig: dict[tuple, list[int]] = {}
    for i, n in enumerate(n2):
        by_sig.setdefault(_node_signature(n, with_labels), []).append(i)

    # order g1 nodes so each one touches the already-ordered region where
    # possible, rarest signatures first
    neighbours: dict[int, set[int]] = {i: set() for i in range(len(n1))}
    for (a, b) in blocks1:
        neighbours[a].add(b)
        neighbours[b].add(a)
    remaining = set(range(len(n1)))
    order: list[int] = []
    ordered: set[int] = set()

    def rarity(i: int) -> int:
        return len(by_sig[_node_signature(n1[i], with_labels)])

    while remaining:
        touching = [i for i in remaining if neighbours[i] & ordered]
        pool = touching or list(remaining)
        pick = min(pool, key=rarity)
        order.append(pick)
        ordered.add(pick)
        remaining.discard(pick)

    mapping: list[int | None] = [None] * len(n1)   # g1 index -> g2 index
    used = [False] * len(n2)

    def compatible(a: int, b: int) -> bool:
        if blocks1.get((a, a)) != blocks2.get((b, b)):
            return False
        for p in order:
            q = mapping[p]
            if q is None or p == a:
                continue
            if blocks1.get((a, p)) != blocks2.get((b, q)):
                return False
            if blocks1.get((p, a)) != blocks2.get((q, b)):
                return False
        return True

    def assign(k: int) -> bool:
        if k == len(order):
            return True
        a = order[k]
        for b in by_sig[_node_signature(n1[a], with_labels)]:
            if used[b]:
                continue
            mapping[a] = b
            if compatible(a, b):
                used[b] = True
                if assign(k + 1):
                    return True
                used[b] = False
            mapping[a] = None
        return False

    return assign(0)

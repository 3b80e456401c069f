"""Slot storage with stable handles and intrusive chains.

A BigArray is a grow-only store made of a small inline chunk plus a
directory of sub-regions whose sizes double (region k holds 2**(k+1)
slots).  Regions are only ever added, so a slot never moves once
allocated: handles stay valid across any amount of later growth.  Freed
slots form an embedded LIFO free list threaded through the records
themselves, which makes deletion O(1) and costs no extra memory.

Records are plain Python objects produced by a caller-supplied factory.
The handle for a slot is the record object itself; its logical index is
kept on the record (``slot_index``) for scans and coordinate checks.
"""

from __future__ import annotations

from typing import Callable, Iterator, Optional

INLINE_BYTES = 160


def region_coords(index: int) -> tuple[int, int]:
    """Map a logical slot index to (region, offset).

    Region k spans logical indices [2**(k+1) - 2, 2**(k+2) - 2); the
    region holding an index is found from the most significant set bit
    of index + 2.  Indices below the inline-chunk capacity are stored
    inline and never consult this map.
    """
    k = (index + 2).bit_length() - 2
    return k, index + 2 - (1 << (k + 1))


class Record:
    """Base class for slot records: carries the slot's own index and
    the embedded free-list link."""

    __slots__ = ("slot_index", "next_hole")

    def __init__(self) -> None:
        self.slot_index = -1
        self.next_hole: Optional[Record] = None


class StorageError(Exception):
    pass


class BigArray:
    __slots__ = (
        "elem_size",
        "inline_cap",
        "factory",
        "_inline",
        "_regions",
        "high_water",
        "first_hole",
        "live_count",
        "check_liveness",
        "_live",
    )

    def __init__(self, elem_size: int, factory: Callable[[], Record] = Record,
                 check_liveness: bool = False):
        if elem_size <= 0 or elem_size > INLINE_BYTES:
            raise StorageError(
                f"element size must be in 1..{INLINE_BYTES}, got {elem_size}")
        self.elem_size = elem_size
        self.inline_cap = INLINE_BYTES // elem_size
        self.factory = factory
        self._inline: Optional[list] = None
        self._regions: list = []          # index k -> list of records, or None
        self.high_water = 0
        self.first_hole: Optional[Record] = None
        self.live_count = 0
        # Liveness tracking is for debug/test builds only; the engine
        # relies on reference flags instead.
        self.check_liveness = check_liveness
        self._live: set[int] = set()

    def alloc(self) -> Record:
        hole = self.first_hole
        if hole is not None:
            self.first_hole = hole.next_hole
            hole.next_hole = None
            self.live_count += 1
            if self.check_liveness:
                self._live.add(hole.slot_index)
            return hole
        index = self.high_water
        rec = self.factory()
        rec.slot_index = index
        if index < self.inline_cap:
            if self._inline is None:
                self._inline = [None] * self.inline_cap
            self._inline[index] = rec
        else:
            k, off = region_coords(index)
            while len(self._regions) <= k:
                self._regions.append(None)
            region = self._regions[k]
            if region is None:
                region = [None] * (1 << (k + 1))
                self._regions[k] = region
            region[off] = rec
        self.high_water = index + 1
        self.live_count += 1
        if self.check_liveness:
            self._live.add(index)
        return rec

    def free(self, rec: Record) -> None:
        if self.check_liveness:
            if rec.slot_index not in self._live:
                raise StorageError(f"double free of slot {rec.slot_index}")
            self._live.discard(rec.slot_index)
        rec.next_hole = self.first_hole
        self.first_hole = rec
        self.live_count -= 1

    def get(self, index: int) -> Record:
        if index < 0 or index >= self.high_water:
            raise IndexError(index)
        if self.check_liveness and index not in self._live:
            raise StorageError(f"use after free of slot {index}")
        if index < self.inline_cap:
            return self._inline[index]
        k, off = region_coords(index)
        return self._regions[k][off]

    def index_scan(self, visit: Callable[[int, Record], None]) -> None:
        """Visit every slot below the high-water mark, holes included.

        Whether a slot is live is the caller's business (records carry
        their own flag bytes); the store has no idea.
        """
        for index, rec in self.scan():
            visit(index, rec)

    def scan(self) -> Iterator[tuple[int, Record]]:
        hw = self.high_water
        if hw == 0:
            return
        index = 0
        if self._inline is not None:
            for rec in self._inline[:min(hw, self.inline_cap)]:
                yield index, rec
                index += 1
        for region in self._regions:
            if index >= hw:
                return
            if region is None:
                continue
            for rec in region[:hw - index]:
                yield index, rec
                index += 1

    def region_count(self) -> int:
        return sum(1 for r in self._regions if r is not None)


class ChainEntry(Record):
    """Intrusive list cell: a payload plus next/prev links.

    The links are doubly connected so an entry can be unlinked without
    traversal, keeping chain deletion constant time.
    """

    __slots__ = ("payload", "next", "prev")

    def __init__(self) -> None:
        super().__init__()
        self.payload = None
        self.next: Optional[ChainEntry] = None
        self.prev: Optional[ChainEntry] = None


CHAIN_ENTRY_SIZE = 24


def chain_entry_store(check_liveness: bool = False) -> BigArray:
    return BigArray(CHAIN_ENTRY_SIZE, ChainEntry, check_liveness)


class Chain:
    """Anchor of an intrusive singly-headed chain of ChainEntry cells."""

    __slots__ = ("head",)

    def __init__(self) -> None:
        self.head: Optional[ChainEntry] = None

    def __iter__(self) -> Iterator:
        entry = self.head
        while entry is not None:
            yield entry.payload
            entry = entry.next

    def entries(self) -> Iterator[ChainEntry]:
        entry = self.head
        while entry is not None:
            yield entry
            entry = entry.next

    def __len__(self) -> int:
        n = 0
        entry = self.head
        while entry is not None:
            n += 1
            entry = entry.next
        return n


def chain_push(chain: Chain, payload, entry_store: BigArray) -> ChainEntry:
    entry = entry_store.alloc()
    entry.payload = payload
    entry.prev = None
    old = chain.head
    entry.next = old
    if old is not None:
        old.prev = entry
    chain.head = entry
    return entry


def chain_unlink(chain: Chain, entry: ChainEntry, entry_store: BigArray) -> None:
    prev, nxt = entry.prev, entry.next
    if prev is None:
        if chain.head is not entry:
            raise StorageError("entry is not in this chain")
        chain.head = nxt
    else:
        prev.next = nxt
    if nxt is not None:
        nxt.prev = prev
    entry.payload = None
    entry.next = entry.prev = None
    entry_store.free(entry)

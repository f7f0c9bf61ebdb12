"""Syntax tree of the annotated batch-kernel (ABK) language."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union


@dataclass(frozen=True)
class Num:
    value: int


@dataclass(frozen=True)
class Name:
    id: str


@dataclass(frozen=True)
class Index:
    name: str
    indices: tuple


@dataclass(frozen=True)
class Unary:
    op: str  # "-", "~", "!"
    operand: "Node"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Ternary:
    cond: "Node"
    then: "Node"
    other: "Node"


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple


Node = Union[Num, Name, Index, Unary, Binary, Ternary, Call]


@dataclass
class AssignStmt:
    target: Union[Name, Index]
    value: Node
    line: int = 0


@dataclass
class ForStmt:
    var: str
    lo: Node
    hi: Node
    body: list
    line: int = 0
    dynamic: bool = False  # bounds depend on runtime values (RB mode only)


@dataclass
class WhileStmt:
    cond: Node
    body: list
    line: int = 0


@dataclass
class VarDecl:
    name: str
    dims: tuple
    init: object = None  # None, a flat tuple of ints
    line: int = 0

    @property
    def size(self) -> int:
        n = 1
        for d in self.dims:
            n *= d
        return n


@dataclass
class AllocRule:
    """Lane-to-cells mapping: ``in(x) addr range = [row]...[lo : hi]``."""
    head: str
    var: str
    rows: tuple
    lo: Node
    hi: Node
    text: str = ""
    bindings: dict = field(default_factory=dict)
    lanes: tuple = ()  # per lane, flat element offsets into the backing array


@dataclass
class BatchAnnotation:
    in_size: int | None = None
    in_batch_size: int | None = None
    batch_mem_in: str | None = None
    in_alloc_rule: AllocRule | None = None
    out_size: int | None = None
    out_batch_size: int | None = None
    batch_mem_out: str | None = None
    out_alloc_rule: AllocRule | None = None
    rel_vars: tuple = ()  # of (name, index tuple or None)
    n_actions: int = 1
    action_mem: str | None = None
    spec: tuple = ()  # one expression per output word
    sac_rel: tuple | None = None  # explicit relevant-state rows for single-action checks

    REQUIRED = ("in_size", "in_batch_size", "batch_mem_in", "in_alloc_rule",
                "out_size", "out_batch_size", "batch_mem_out", "out_alloc_rule")

    def missing(self) -> list:
        return [f for f in self.REQUIRED if getattr(self, f) is None]


@dataclass
class Block:
    name: str
    body: list
    annotation: BatchAnnotation
    line: int = 0
    end_line: int = 0

    @property
    def children(self) -> list:
        return [s for s in self.body if isinstance(s, Block)]


Stmt = Union[AssignStmt, ForStmt, WhileStmt, Block]


@dataclass
class AbkProgram:
    width: int
    consts: dict
    decls: dict  # name -> VarDecl, in declaration order
    body: list
    rb_mode: bool = False
    source: str = ""
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def blocks(self) -> list:
        """All blocks, depth-first in source order."""
        out: list = []

        def walk(stmts):
            for s in stmts:
                if isinstance(s, Block):
                    out.append(s)
                    walk(s.body)
                elif isinstance(s, (ForStmt, WhileStmt)):
                    walk(s.body)
        walk(self.body)
        return out

    @property
    def leaf_blocks(self) -> list:
        return [b for b in self.blocks if not b.children]

    def block(self, name: str) -> Block:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)

    @property
    def rel_vars(self) -> tuple:
        """Union of every block's relevant-state declarations, in first-seen order."""
        seen: list = []
        for b in self.blocks:
            for r in b.annotation.rel_vars:
                if r not in seen:
                    seen.append(r)
        return tuple(seen)

    def statement_count(self) -> int:
        def count(stmts):
            n = 0
            for s in stmts:
                if isinstance(s, AssignStmt):
                    n += 1
                elif isinstance(s, (ForStmt, WhileStmt, Block)):
                    n += count(s.body)
            return n
        return count(self.body)

"""Annotated batch-kernel (ABK) frontend."""
from .ast import AbkProgram, AllocRule, BatchAnnotation, Block, VarDecl
from .interp import fresh_memory, interpret
from .lower import lower, program_layout
from .parser import parse
from .ssa import SsaProgram, interpret_ssa, unroll_and_ssa

__all__ = [
    "AbkProgram", "AllocRule", "BatchAnnotation", "Block", "VarDecl", "fresh_memory",
    "interpret", "interpret_ssa", "lower", "parse", "program_layout", "SsaProgram",
    "unroll_and_ssa",
]

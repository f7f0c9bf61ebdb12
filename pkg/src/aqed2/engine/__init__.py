"""Checking backends: symbolic bit-blasting with CDCL, and exhaustive enumeration."""
from .check import Budget, CheckResult, Verdict, check, check_sat, export_dimacs
from .encode import ConstraintSystem, encode
from .exhaustive import Caps, check_exhaustive
from .minimize import minimize

__all__ = ["Budget", "Caps", "CheckResult", "ConstraintSystem", "Verdict", "check",
           "check_exhaustive", "check_sat", "encode", "export_dimacs", "minimize"]

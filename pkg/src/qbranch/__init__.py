"""Learned branching for a CDCL SAT solver with a graph-network Q-function.

``BACKEND`` names the solver kernel in use (``"cython"`` or ``"python"``);
``GNN_BACKEND`` does the same for the fused graph-network kernels.  Set
``QBRANCH_PURE_PYTHON=1`` before import to force the pure-Python fallbacks.
"""
from .cnf import CnfFormula, Literal, Verdict, parse_dimacs, read_dimacs
from .gnn_ops import BACKEND as GNN_BACKEND
from .kernel import BACKEND
from .solver import SolverConfig, solve

__version__ = "0.1.0"

__all__ = ["BACKEND", "GNN_BACKEND", "CnfFormula", "Literal", "Verdict", "SolverConfig",
           "parse_dimacs", "read_dimacs", "solve", "__version__"]

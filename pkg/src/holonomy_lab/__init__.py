"""
Parallel transport on compact Lie groups, holonomy of connections along loops,
and the geometry of the transport map on the loop algebra.
"""

__version__ = "0.1.0"

from .errors import (BranchError, ConfigError, ConstantSpeedError, DegeneracyError, DomainError,
                     HolonomyLabError, TruncationError)
from .lie_core import (GROUP_IDS, Ad, AlgebraVector, GroupElement, LieGroup, exp_group, get_group,
                       inner, killing_inner, log_group, root_decomposition)
from .loop_space import AlgebraLoop, BasisLabel, GroupPath, LoopBasis, basis_loop, gauge_act, l2_inner
from .transport import TransportSolution, check_riemannian_submersion, phi, solve_transport

__all__ = [
    "__version__", "Ad", "AlgebraLoop", "AlgebraVector", "BasisLabel", "BranchError", "ConfigError",
    "ConstantSpeedError", "DegeneracyError", "DomainError", "GROUP_IDS", "GroupElement", "GroupPath",
    "HolonomyLabError", "LieGroup", "LoopBasis", "TransportSolution", "TruncationError", "basis_loop",
    "check_riemannian_submersion", "exp_group", "gauge_act", "get_group", "inner", "killing_inner",
    "l2_inner", "log_group", "phi", "root_decomposition", "solve_transport",
]

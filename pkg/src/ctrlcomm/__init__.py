"""Minimum-energy control protocols that let two agents steer a shared plant.

Alice picks a row i, Bob a column j, and together they must drive the
output of the Brockett-Heisenberg integrator to H[i, j] using only their own
open-loop controls (single round), or after exchanging a few bits through the
plant itself (two-phase).
"""

__version__ = "0.1.0"

from .bh_system import enclosed_area, simulate_bh, simulate_bloch
from .controls import BilinearMap, ControlSignal, fb_map, pair_output
from .errors import (
    CtrlCommError,
    DecodeError,
    InfeasibleError,
    InvalidInputError,
    PreconditionError,
    TreeConstructionError,
    UnsupportedRepresentationError,
)
from .linalg import polar_decompose, svd, sym_eig
from .partition import (
    MatrixPartition,
    PartitionBlock,
    ProtocolTree,
    build_protocol_tree,
    min_monochromatic_partition,
    partition_cost_A,
    protocol_complexity,
    value_of_bit,
)
from .protocol_sim import RoundConfig, average_two_phase_cost, make_epsilon_signal, run_single_round, run_two_phase
from .synthesis import (
    ProtocolSolution,
    bh_optimal_cost,
    cost_report,
    optimal_cost,
    shared_info_cost,
    synthesize_single_round,
)

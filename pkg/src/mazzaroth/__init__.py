"""Mazzaroth blockDAG consensus: ordering, state roots, difficulty control, simulation."""

from .dag import Block, BlockId, DagStore, add_block
from .difficulty import CalibrationTable, DifficultyConfig, adjust_target, check_pow, f_eval
from .ledger import LedgerState, Transaction, apply_backward, apply_forward, compute_state, state_root
from .ordering import agree, distance, head_of, link_of, order_from, order_full, state_set
from .simnet import SimConfig, run, step_response, sweep

__all__ = [
    "Block", "BlockId", "DagStore", "add_block",
    "CalibrationTable", "DifficultyConfig", "adjust_target", "check_pow", "f_eval",
    "LedgerState", "Transaction", "apply_backward", "apply_forward", "compute_state", "state_root",
    "agree", "distance", "head_of", "link_of", "order_from", "order_full", "state_set",
    "SimConfig", "run", "step_response", "sweep",
]

from .contract_engine import ContractEngine, compute_penalty
from .contract_state import ContractRules, ContractState, contract_address, execute, replay, replay_chain

__all__ = [
    "ContractEngine",
    "ContractRules",
    "ContractState",
    "compute_penalty",
    "contract_address",
    "execute",
    "replay",
    "replay_chain",
]

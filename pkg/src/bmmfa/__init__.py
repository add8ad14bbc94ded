"""Fair online allocation of items under bandit feedback with a max-min objective."""

from .allocator import Policy, PolicyConfig, RunRecord, run_policy
from .benchmark import regret_report, solve_pstar
from .core import Allocation, Instance, RngHandle, UtilityLedger

__all__ = ["Allocation", "Instance", "Policy", "PolicyConfig", "RngHandle", "RunRecord",
           "UtilityLedger", "regret_report", "run_policy", "solve_pstar"]
__version__ = "0.1.0"

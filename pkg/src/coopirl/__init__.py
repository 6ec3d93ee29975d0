"""Interactive inverse reinforcement learning for two-agent leader/follower MDPs."""
from .mdp_core import TwoAgentMdp, joint_value
from .planners import ResponseModel, avi_boltzmann, avi_eps_greedy, optimal_joint_policy
from .lp_solver import LpProblem, LpStatus, solve
from .feasible_set import ConstraintSet, build_ideal_environment, constraints_for
from .interactive_irl import run_algorithm1
from .bayesian_irl import BayesConfig, run_algorithm2
from .environments import MazeMakerSpec, RandomMdpSpec, build_maze_maker, build_random_mdp

__all__ = [
    "TwoAgentMdp", "joint_value", "ResponseModel", "avi_boltzmann", "avi_eps_greedy",
    "optimal_joint_policy", "LpProblem", "LpStatus", "solve", "ConstraintSet",
    "build_ideal_environment", "constraints_for", "run_algorithm1", "BayesConfig",
    "run_algorithm2", "MazeMakerSpec", "RandomMdpSpec", "build_maze_maker", "build_random_mdp",
]

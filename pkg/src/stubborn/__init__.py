"""Object-goal navigation on synthetic floor plans with a stubborn exploration agent."""

from .fmm import arrival_times, eikonal_residual
from .grid_map import MapGrid, LocalWindow
from .planner import Ablation, ABLATION_LADDER, plan_step
from .detection import NBModel, nb_predict, nb_train
from .metrics import EpisodeResult, bootstrap_ci, spl, success_rate
from .world_sim import World, WorldParams, generate_world
from .harness import SuiteConfig, run_episode, run_suite, run_ablation, run_detection_comparison

__version__ = "0.1.0"

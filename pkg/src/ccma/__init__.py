"""Trajectory and concurrent design optimization for mobile bases coupled by
closed-loop kinematic chains."""

from .constraints import ConstraintSystem, DimensionError, assemble
from .forward import SolverError, SolverOptions, Trajectory, rollout, solve_state
from .kernels import BACKEND
from .objectives import (
    Cylinder,
    EndEffectorGoal,
    ObjectiveConfig,
    ObstacleSet,
    PenaltyParams,
    decompose_spheres,
    f_pen,
)
from .scenario import ScenarioError, load_scenario, load_scenario_file, resolve_scenario
from .sensitivity import SensitivityError, trajectory_sensitivities
from .topology import RobotTopology, TopologyError
from .trajopt import (
    CONCURRENT,
    STANDALONE,
    OptimizerOptions,
    OptVariable,
    Scenario,
    check_gradients,
    optimize,
    total_gradient,
    total_objective,
)

__version__ = "0.1.0"

"""Active acoustic source tracking with particle filters and Monte Carlo tree search."""

from .belief import ParticleSet, RewardNormalizer, point_estimate, sir_update, systematic_resample
from .kinematics import Action, AgentState, MotionNoise, WorldState, wrap_angle
from .observation import AoaGrid, ObservationTable, build_synthetic_table
from .planner import Planner, PlannerConfig
from .tracking import TrackingModel

__version__ = "0.1.0"

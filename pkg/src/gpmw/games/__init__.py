from .base import Environment
from .matrix import MatrixGame, sample_matrix_game
from .robust_bo import RobustBoGame, robust_bo_round, synthetic_game
from .routing import (
    AgentRoutes,
    RoutingGame,
    agent_travel_time,
    bpr_travel_time,
    congestion,
    enumerate_all,
    enumerate_routes,
    occupancy,
    scale_rewards,
)
from .tntp import RoadNetwork, TntpError, read_network, read_trips, sioux_falls

__all__ = [
    "AgentRoutes",
    "Environment",
    "MatrixGame",
    "RoadNetwork",
    "RobustBoGame",
    "RoutingGame",
    "TntpError",
    "agent_travel_time",
    "bpr_travel_time",
    "congestion",
    "enumerate_all",
    "enumerate_routes",
    "occupancy",
    "read_network",
    "read_trips",
    "robust_bo_round",
    "sample_matrix_game",
    "scale_rewards",
    "sioux_falls",
    "synthetic_game",
]

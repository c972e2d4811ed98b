"""Learning to rank paths in road networks from trajectory evidence."""

from .errors import (ConfigError, DivergenceError, InputMissingError, NoPathError, ParseError,
                     PathRankError, ReplayMismatchError, ValidationError)
from .network import CostKind, Edge, RoadNetwork, generate_grid_network, load_network, path_cost

__version__ = "0.1.0"

"""Blume-Capel-Potts model and its diluted random-cluster representation."""

from .errors import BCPError, CapacityError, DomainError, PositivityError, ValidationError
from .graph import (ONE, PERIODIC, ZERO, BoundaryCondition, Graph, Region, build_box,
                    build_box_bounds, induced_open_subgraph, parse_edge_list, torus_graph)
from .params import ModelParams, apq, kdq
from .distribution import FiniteDistribution

__version__ = "0.1.0"

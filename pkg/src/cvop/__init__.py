"""Outer approximation of the upper image of a convex vector optimization problem."""

from .algorithm import RunConfig, SolveResult, Status, run
from .problem import CvopInstance, builtin, load_problem, parse_problem

__version__ = "0.1.0"

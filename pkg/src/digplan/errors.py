"""Shared exception types."""


class DigPlanError(Exception):
    """Base class for planner/simulator failures."""


class GridError(DigPlanError):
    """Invalid grid data or layer contents."""


class InfeasiblePlan(DigPlanError):
    """No feasible coverage plan exists for the requested input."""


class DumpDeadlock(DigPlanError):
    """All candidate dump zones are unusable at the current base pose."""


class PathNotFound(DigPlanError):
    """Navigation planner exhausted all trials without reaching the goal."""

from .decompose import Cell, Frame, decompose
from .graph import min_branching_tree, quotient_graph, visit_order
from .lanes import CellRoute, Lane, plan_cell_routes
from .orientation import optimize_orientation, plan_component, plan_site, principal_axis
from .plan import CoveragePlan, load_plan, save_plan

__all__ = [
    "Cell",
    "CellRoute",
    "CoveragePlan",
    "Frame",
    "Lane",
    "decompose",
    "load_plan",
    "min_branching_tree",
    "optimize_orientation",
    "plan_cell_routes",
    "plan_component",
    "plan_site",
    "principal_axis",
    "quotient_graph",
    "save_plan",
    "visit_order",
]

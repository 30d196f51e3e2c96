"""Serializable site coverage plan (deterministic JSON)."""

from __future__ import annotations

import json
from dataclasses import dataclass, field


@dataclass
class CoveragePlan:
    """Flat, file-friendly view of a planned site.

    components: one entry per diggable component, each with its sweep angle,
    dig-cell visit order, per-cell base poses, and score terms.
    component_order: tour over component indices.
    """

    resolution: float
    components: list = field(default_factory=list)
    component_order: list = field(default_factory=list)

    @property
    def poses(self):
        out = []
        for idx in self.component_order:
            for cell in self.components[idx]["cells"]:
                out.extend(tuple(p) for p in cell["poses"])
        return out

    @property
    def total_path_length(self) -> float:
        return sum(c["path_length"] for c in self.components)


def from_component_plans(resolution, plans, order) -> CoveragePlan:
    components = []
    for plan in plans:
        cells = [
            {
                "cell_id": route.cell_id,
                "subroutine": route.option.subroutine,
                "poses": [[round(v, 6) for v in p] for p in route.world_poses],
            }
            for route in plan.routes
        ]
        components.append(
            {
                "theta": round(plan.theta, 9),
                "area": round(plan.area, 6),
                "coverage": round(plan.coverage, 6),
                "path_length": round(plan.path_length, 6),
                "score": round(plan.score, 9),
                "cells": cells,
            }
        )
    return CoveragePlan(resolution=resolution, components=components, component_order=list(order))


def save_plan(plan: CoveragePlan, path) -> None:
    payload = {
        "component_order": plan.component_order,
        "components": plan.components,
        "resolution": plan.resolution,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_plan(path) -> CoveragePlan:
    with open(path) as fh:
        payload = json.load(fh)
    return CoveragePlan(
        resolution=payload["resolution"],
        components=payload["components"],
        component_order=payload["component_order"],
    )

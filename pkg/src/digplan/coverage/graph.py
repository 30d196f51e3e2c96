"""Cell adjacency quotient graph, minimum-branching spanning tree, visit order."""

from __future__ import annotations

import math

import numpy as np

from ..errors import InfeasiblePlan

EXACT_TREE_LIMIT = 15
BRANCH_PENALTY = 1e6  # greedy fallback: one branch outweighs any edge length


def quotient_graph(cells, frame, label):
    """Directed adjacency: edge p -> q when a corner of q touches p's region.

    "Touches" means within one cell diagonal, i.e. the corner cell's
    8-neighborhood in the rotated raster. Cells reachable only through
    their opening side (pockets) thus get incoming edges only.
    """
    adj = {c.id: set() for c in cells}
    n_rows, n_cols = label.shape
    for cell in cells:
        for row, col in cell.corners_rc():
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    r, c = row + dr, col + dc
                    if 0 <= r < n_rows and 0 <= c < n_cols:
                        p = label[r, c]
                        if p >= 0 and p != cell.id:
                            adj[p].add(cell.id)
    return {k: sorted(v) for k, v in adj.items()}


def reachable_from(adj, root) -> set:
    """Nodes reachable from root along directed adjacency edges."""
    seen = {root}
    stack = [root]
    while stack:
        for q in adj[stack.pop()]:
            if q not in seen:
                seen.add(q)
                stack.append(q)
    return seen


def edge_length(cells_by_id, p, q, resolution):
    rp, cp = cells_by_id[p].centroid_rc()
    rq, cq = cells_by_id[q].centroid_rc()
    return math.hypot(rp - rq, cp - cq) * resolution


def _tree_cost(parent, lengths):
    children = {}
    total = 0.0
    for node, par in parent.items():
        if par is None:
            continue
        children[par] = children.get(par, 0) + 1
        total += lengths[(par, node)]
    branches = sum(1 for n in children.values() if n >= 2)
    return branches, total


def min_branching_tree(cells, adj, root, resolution):
    """Spanning arborescence from root minimizing (branch count, length).

    Exact branch-and-bound up to EXACT_TREE_LIMIT nodes; a branch-penalized
    greedy attachment beyond that. Returns {node: parent}, root maps to None.
    """
    by_id = {c.id: c for c in cells}
    nodes = sorted(by_id)
    lengths = {(p, q): edge_length(by_id, p, q, resolution) for p in adj for q in adj[p]}

    # reachability check up front: an unreachable cell means the region is
    # not coverable from this root at all
    seen = reachable_from(adj, root)
    if seen != set(nodes):
        missing = sorted(set(nodes) - seen)
        raise InfeasiblePlan(f"cells unreachable from root {root}: {missing}")

    if len(nodes) > EXACT_TREE_LIMIT:
        return _greedy_tree(nodes, adj, root, lengths)
    return _exact_tree(nodes, adj, root, lengths)


def _greedy_tree(nodes, adj, root, lengths):
    parent = {root: None}
    n_children = {n: 0 for n in nodes}
    while len(parent) < len(nodes):
        best = None
        for p in parent:
            for q in adj[p]:
                if q in parent:
                    continue
                penalty = BRANCH_PENALTY if n_children[p] >= 1 else 0.0
                key = (penalty + lengths[(p, q)], lengths[(p, q)], q)
                if best is None or key < best[0]:
                    best = (key, p, q)
        _, p, q = best
        parent[q] = p
        n_children[p] += 1
    return parent


def _exact_tree(nodes, adj, root, lengths):
    parents_of = {
        q: sorted((p for p in nodes if q in adj[p]), key=lambda p: (lengths[(p, q)], p))
        for q in nodes
        if q != root
    }
    # assign constrained nodes first; the greedy tree seeds the incumbent so
    # pruning bites immediately
    others = sorted(parents_of, key=lambda q: (len(parents_of[q]), q))
    greedy = _greedy_tree(nodes, adj, root, lengths)
    best = {"cost": _tree_cost(greedy, lengths), "parent": greedy}

    parent = {root: None}
    n_children = {n: 0 for n in nodes}

    def creates_cycle(q, p):
        # a cycle closes exactly when its last edge is assigned, so walking
        # the already-assigned chain upward from p is a complete check
        cur = p
        while cur is not None:
            if cur == q:
                return True
            cur = parent.get(cur)  # stops at the root or an unassigned node
        return False

    def rec(i, branches, length):
        if (branches, length) >= best["cost"]:
            return
        if i == len(others):
            best["cost"] = (branches, length)
            best["parent"] = dict(parent)
            return
        q = others[i]
        for p in parents_of[q]:
            if creates_cycle(q, p):
                continue
            parent[q] = p
            n_children[p] += 1
            extra = 1 if n_children[p] == 2 else 0
            rec(i + 1, branches + extra, length + lengths[(p, q)])
            n_children[p] -= 1
            del parent[q]

    rec(0, 0, 0.0)
    return best["parent"]


def _children(parent):
    children = {n: [] for n in parent}
    for node, par in parent.items():
        if par is not None:
            children[par].append(node)
    return children


def _entry_point_rc(cell, toward_rc):
    """Midpoint of the corner pair (opening side) nearest a reference point."""
    corners = cell.corners_rc()
    first = corners[0], corners[1]
    last = corners[2], corners[3]

    def mid(pair):
        return ((pair[0][0] + pair[1][0]) / 2.0, (pair[0][1] + pair[1][1]) / 2.0)

    m_first, m_last = mid(first), mid(last)
    df = math.hypot(m_first[0] - toward_rc[0], m_first[1] - toward_rc[1])
    dl = math.hypot(m_last[0] - toward_rc[0], m_last[1] - toward_rc[1])
    return m_first if df <= dl else m_last


def visit_order(cells, parent, root):
    """Post-order dig sequence: every pocket is dug before the cell it opens
    into, and among siblings the one nearest the parent's entry side goes
    last so the machine ends next to its continuation."""
    by_id = {c.id: c for c in cells}
    children = _children(parent)
    order = []

    def rec(node, grand_rc):
        if grand_rc is None:
            anchor = by_id[node].centroid_rc()
        else:
            anchor = _entry_point_rc(by_id[node], grand_rc)
        kids = children[node]
        dist = {}
        for k in kids:
            kr, kc = by_id[k].centroid_rc()
            dist[k] = math.hypot(kr - anchor[0], kc - anchor[1])
        for k in sorted(kids, key=lambda k: (-dist[k], k)):
            rec(k, by_id[node].centroid_rc())
        order.append(node)

    rec(root, None)
    return order

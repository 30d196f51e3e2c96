"""Reeds-Shepp shortest paths for a forward/reverse vehicle with bounded
turning radius.

Paths are words over {L, S, R} with signed segment lengths (negative means
reverse). All word families (CSC, CCC, CCCC, CCSC, CCSCC) are generated
from nine base solutions via timeflip, reflection, and word reversal.
Lengths are computed for unit turning radius and scaled on output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_ZERO = 1e-10
_HALF_PI = math.pi / 2.0


def _mod2pi(x: float) -> float:
    v = math.fmod(x, 2.0 * math.pi)
    if v < -math.pi:
        v += 2.0 * math.pi
    elif v > math.pi:
        v -= 2.0 * math.pi
    return v


def _polar(x: float, y: float):
    return math.hypot(x, y), math.atan2(y, x)


def _tau_omega(u, v, xi, eta, phi):
    delta = _mod2pi(u - v)
    a = math.sin(u) - math.sin(delta)
    b = math.cos(u) - math.cos(delta) - 1.0
    t1 = math.atan2(eta * a - xi * b, xi * a + eta * b)
    t2 = 2.0 * (math.cos(delta) - math.cos(v) - math.cos(u)) + 3.0
    tau = _mod2pi(t1 + math.pi) if t2 < 0 else _mod2pi(t1)
    omega = _mod2pi(tau - u + v - phi)
    return tau, omega


# --- base words (each returns (types, lengths) or None) ----------------------


def _lp_sp_lp(x, y, phi):
    u, t = _polar(x - math.sin(phi), y - 1.0 + math.cos(phi))
    if t >= -_ZERO:
        v = _mod2pi(phi - t)
        if v >= -_ZERO:
            return "LSL", [t, u, v]
    return None


def _lp_sp_rp(x, y, phi):
    u1, t1 = _polar(x + math.sin(phi), y - 1.0 - math.cos(phi))
    if u1 * u1 >= 4.0:
        u = math.sqrt(u1 * u1 - 4.0)
        theta = math.atan2(2.0, u)
        t = _mod2pi(t1 + theta)
        v = _mod2pi(t - phi)
        if t >= -_ZERO and v >= -_ZERO:
            return "LSR", [t, u, v]
    return None


def _lp_rm_l(x, y, phi):
    xi = x - math.sin(phi)
    eta = y - 1.0 + math.cos(phi)
    u1, theta = _polar(xi, eta)
    if u1 <= 4.0:
        u = -2.0 * math.asin(u1 / 4.0)
        t = _mod2pi(theta + u / 2.0 + math.pi)
        v = _mod2pi(phi - t + u)
        if t >= -_ZERO and u <= _ZERO:
            return "LRL", [t, u, v]
    return None


def _lp_rup_lum_rm(x, y, phi):
    xi = x + math.sin(phi)
    eta = y - 1.0 - math.cos(phi)
    rho = (2.0 + math.hypot(xi, eta)) / 4.0
    if rho <= 1.0:
        u = math.acos(rho)
        t, v = _tau_omega(u, -u, xi, eta, phi)
        if t >= -_ZERO and v <= _ZERO:
            return "LRLR", [t, u, -u, v]
    return None


def _lp_rum_lum_rp(x, y, phi):
    xi = x + math.sin(phi)
    eta = y - 1.0 - math.cos(phi)
    rho = (20.0 - xi * xi - eta * eta) / 16.0
    if 0.0 <= rho <= 1.0:
        u = -math.acos(rho)
        if u >= -_HALF_PI:
            t, v = _tau_omega(u, u, xi, eta, phi)
            if t >= -_ZERO and v >= -_ZERO:
                return "LRLR", [t, u, u, v]
    return None


def _lp_rm_sm_lm(x, y, phi):
    xi = x - math.sin(phi)
    eta = y - 1.0 + math.cos(phi)
    rho, theta = _polar(xi, eta)
    if rho >= 2.0:
        r = math.sqrt(rho * rho - 4.0)
        u = 2.0 - r
        t = _mod2pi(theta + math.atan2(r, -2.0))
        v = _mod2pi(phi - _HALF_PI - t)
        if t >= -_ZERO and u <= _ZERO and v <= _ZERO:
            return "LRSL", [t, -_HALF_PI, u, v]
    return None


def _lp_rm_sm_rm(x, y, phi):
    xi = x + math.sin(phi)
    eta = y - 1.0 - math.cos(phi)
    rho, theta = _polar(-eta, xi)
    if rho >= 2.0:
        t = theta
        u = 2.0 - rho
        v = _mod2pi(t + _HALF_PI - phi)
        if t >= -_ZERO and u <= _ZERO and v <= _ZERO:
            return "LRSR", [t, -_HALF_PI, u, v]
    return None


def _lp_rm_s_lm_rp(x, y, phi):
    xi = x + math.sin(phi)
    eta = y - 1.0 - math.cos(phi)
    rho, _ = _polar(xi, eta)
    if rho >= 2.0:
        u = 4.0 - math.sqrt(rho * rho - 4.0)
        if u <= _ZERO:
            t = _mod2pi(math.atan2((4.0 - u) * xi - 2.0 * eta, -2.0 * xi + (u - 4.0) * eta))
            v = _mod2pi(t - phi)
            if t >= -_ZERO and v >= -_ZERO:
                return "LRSLR", [t, -_HALF_PI, u, -_HALF_PI, v]
    return None


_BASES = [
    (_lp_sp_lp, False),
    (_lp_sp_rp, False),
    (_lp_rm_l, True),
    (_lp_rup_lum_rm, False),
    (_lp_rum_lum_rp, False),
    (_lp_rm_sm_lm, True),
    (_lp_rm_sm_rm, True),
    (_lp_rm_s_lm_rp, False),
]

_SWAP = str.maketrans("LR", "RL")


@dataclass
class RSPath:
    types: str
    lengths: list  # signed, in radius units

    @property
    def length(self) -> float:
        return sum(abs(v) for v in self.lengths)


def _candidates(x, y, phi):
    xb = x * math.cos(phi) + y * math.sin(phi)
    yb = x * math.sin(phi) - y * math.cos(phi)
    for solver, reversible in _BASES:
        frames = [
            ((x, y, phi), 1, False, False),
            ((-x, y, -phi), -1, False, False),  # timeflip
            ((x, -y, -phi), 1, True, False),  # reflect
            ((-x, -y, phi), -1, True, False),
        ]
        if reversible:
            frames += [
                ((xb, yb, phi), 1, False, True),  # word reversal
                ((-xb, yb, -phi), -1, False, True),
                ((xb, -yb, -phi), 1, True, True),
                ((-xb, -yb, phi), -1, True, True),
            ]
        for args, sign, reflect, backwards in frames:
            sol = solver(*args)
            if sol is None:
                continue
            types, lengths = sol
            lengths = [sign * v for v in lengths]
            if reflect:
                types = types.translate(_SWAP)
            if backwards:
                types = types[::-1]
                lengths = lengths[::-1]
            yield RSPath(types, lengths)


def shortest_path(start, goal, radius: float) -> RSPath:
    """Shortest Reeds-Shepp path between SE(2) poses; lengths in meters."""
    dx = goal[0] - start[0]
    dy = goal[1] - start[1]
    c, s = math.cos(start[2]), math.sin(start[2])
    x = (c * dx + s * dy) / radius
    y = (-s * dx + c * dy) / radius
    phi = _mod2pi(goal[2] - start[2])
    best = None
    for path in _candidates(x, y, phi):
        if best is None or path.length < best.length - 1e-12:
            best = path
    return RSPath(best.types, [v * radius for v in best.lengths])


def sample_path(start, path: RSPath, radius: float, step: float = 0.1):
    """Poses along the path at roughly `step` arc-length spacing.

    Returns an (n, 4) array of (x, y, heading, direction); direction is
    +1/-1 for the segment the pose lies on. Includes both endpoints.
    """
    poses = [(start[0], start[1], start[2], 1.0)]
    x, y, h = start
    for ch, seg in zip(path.types, path.lengths):
        if abs(seg) < 1e-12:
            continue
        direction = 1.0 if seg > 0 else -1.0
        n = max(1, int(math.ceil(abs(seg) / step)))
        d = seg / n
        for _ in range(n):
            if ch == "S":
                x += d * math.cos(h)
                y += d * math.sin(h)
            else:
                turn = 1.0 if ch == "L" else -1.0
                dh = turn * d / radius
                # exact arc update
                x += radius * turn * (math.sin(h + dh) - math.sin(h))
                y -= radius * turn * (math.cos(h + dh) - math.cos(h))
                h += dh
            poses.append((x, y, h, direction))
    return np.asarray(poses)


def path_end(start, path: RSPath, radius: float):
    """Endpoint pose implied by integrating the path from start."""
    pts = sample_path(start, path, radius, step=max(radius, 1.0))
    x, y, h, _ = pts[-1]
    return float(x), float(y), _mod2pi(float(h))

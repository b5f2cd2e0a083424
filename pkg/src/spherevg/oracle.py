"""Brute-force reference computations used only for validation.

Nothing in the fast path imports this module.  The reflection angle is found
by golden-section minimisation of the path length, and the mixed Hessian by
double finite differences of an action whose path length is re-minimised at
every stencil point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalInstability

GRID_POINTS = 2000
EDGE = 1e-9
BRACKET_TOL = 1e-13
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _scalars(r1, r2):
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    m1 = math.sqrt(float(r1 @ r1))
    m2 = math.sqrt(float(r2 @ r2))
    cross = np.cross(r1, r2)
    theta = math.atan2(math.sqrt(float(cross @ cross)), float(r1 @ r2))
    return m1, m2, theta


class _PathLength:
    """Length of the broken path through the sphere point at angle ``phi`` from r1."""

    def __init__(self, a, r1, r2, theta):
        self.a, self.r1, self.r2, self.theta = a, r1, r2, theta
        self.evaluations = 0

    def _sq(self, r, phi):
        d = r - self.a
        return d * d + 4.0 * self.a * r * math.sin(0.5 * phi) ** 2

    def length(self, alpha):
        self.evaluations += 1
        half = 0.5 * self.theta
        return math.sqrt(self._sq(self.r1, half + alpha)) + math.sqrt(self._sq(self.r2, half - alpha))

    def grid(self, alphas):
        self.evaluations += alphas.size
        a, half = self.a, 0.5 * self.theta
        l1 = np.sqrt(a * a + self.r1**2 - 2.0 * a * self.r1 * np.cos(half + alphas))
        l2 = np.sqrt(a * a + self.r2**2 - 2.0 * a * self.r2 * np.cos(half - alphas))
        return l1 + l2

    def _leg_diff(self, r, phi, phi_ref, dphi):
        # l(phi) - l(phi_ref) without cancellation; dphi is passed separately
        # because forming phi - phi_ref after rounding loses the small difference
        num = 4.0 * self.a * r * math.sin(0.5 * (phi + phi_ref)) * math.sin(0.5 * dphi)
        return num / (math.sqrt(self._sq(r, phi)) + math.sqrt(self._sq(r, phi_ref)))

    def difference(self, alpha, alpha_ref):
        """``L(alpha) - L(alpha_ref)`` to full relative precision."""
        self.evaluations += 2
        half = 0.5 * self.theta
        delta = alpha - alpha_ref
        return (self._leg_diff(self.r1, half + alpha, half + alpha_ref, delta)
                + self._leg_diff(self.r2, half - alpha, half - alpha_ref, -delta))


def _minimise(path: _PathLength) -> float:
    half = 0.5 * path.theta
    lo, hi = -half + EDGE, half - EDGE
    if hi <= lo:
        return 0.0
    alphas = np.linspace(lo, hi, GRID_POINTS)
    k = int(np.argmin(path.grid(alphas)))
    a = alphas[max(k - 1, 0)]
    b = alphas[min(k + 1, GRID_POINTS - 1)]
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    while b - a > BRACKET_TOL:
        if path.difference(c, d) < 0.0:
            b, d = d, c
            c = b - _INVPHI * (b - a)
        else:
            a, c = c, d
            d = a + _INVPHI * (b - a)
    return 0.5 * (a + b)


def brute_force_alpha(g) -> float:
    """Minimise the path length over the arc between the endpoints."""
    return _minimise(_PathLength(g.a, g.r1_mag, g.r2_mag, g.theta))


def brute_force_path(a: float, r1, r2) -> tuple[float, float, int]:
    """``(alpha, L, evaluations)`` for endpoint vectors, by direct minimisation."""
    m1, m2, theta = _scalars(r1, r2)
    path = _PathLength(a, m1, m2, theta)
    alpha = _minimise(path)
    return alpha, path.length(alpha), path.evaluations


def _double_difference(action, r1, r2, h):
    hess = np.empty((3, 3))
    eye = np.eye(3)
    for i in range(3):
        for j in range(3):
            di, dj = h * eye[i], h * eye[j]
            hess[i, j] = (action(r1 + dj, r2 + di) - action(r1 + dj, r2 - di)
                          - action(r1 - dj, r2 + di) + action(r1 - dj, r2 - di)) / (4.0 * h * h)
    return hess


def _fd_hessian(scene, p, step, rtol):
    r1 = np.asarray(scene.r1, dtype=float)
    r2 = np.asarray(scene.r2, dtype=float)
    h = step * max(np.linalg.norm(r1), np.linalg.norm(r2))
    evaluations = 0

    def action(q1, q2):
        nonlocal evaluations
        _, length, evals = brute_force_path(scene.a, q1, q2)
        evaluations += evals
        return p.mass * length * length / (2.0 * p.time)

    coarse = _double_difference(action, r1, r2, h)
    fine = _double_difference(action, r1, r2, 0.5 * h)
    best = (4.0 * fine - coarse) / 3.0
    gap = np.linalg.norm(fine - coarse) / np.linalg.norm(best)
    if gap > rtol:
        raise NumericalInstability(f"Richardson pair disagrees by {gap:.3g}")
    return best, evaluations


def fd_mixed_hessian_of_minimized_S(scene, p, step: float = 1e-4,
                                    rtol: float = 1e-3) -> np.ndarray:
    """``d^2 S / dr2_i dr1_j`` by double central differences, Richardson-combined.

    Every action evaluation re-minimises the path length from scratch.
    """
    return _fd_hessian(scene, p, step, rtol)[0]


def companion_roots(coeffs) -> np.ndarray:
    """Polynomial roots as eigenvalues of the companion matrix."""
    c = np.trim_zeros(np.asarray(coeffs, dtype=float), "f")
    n = c.size - 1
    comp = np.zeros((n, n))
    comp[0, :] = -c[1:] / c[0]
    comp[1:, :-1] = np.eye(n - 1)
    return np.linalg.eigvals(comp)


@dataclass
class OracleReport:
    alpha_bruteforce: float
    L_bruteforce: float
    S_fd_hessian: np.ndarray
    discrepancies: dict
    evaluations: int

    @property
    def max_discrepancy(self) -> float:
        return max(self.discrepancies.values())


def cross_check(scene, p, with_hessian: bool = True) -> OracleReport:
    """Compare the analytic pipeline with brute force on one scene.

    Discrepancies are absolute for ``alpha`` and relative for ``L``, ``S``,
    the mixed Hessian (Frobenius) and ``D``.
    """
    from .dynamics import action_derivatives

    alpha, length, evals = brute_force_path(scene.a, scene.r1, scene.r2)
    deriv = action_derivatives(scene, p)
    sol = deriv.solution
    s_bf = p.mass * length * length / (2.0 * p.time)
    disc = {
        "alpha": abs(sol.alpha - alpha),
        "L": abs(sol.L - length) / length,
        "S": abs(deriv.S - s_bf) / s_bf,
    }
    hess = np.full((3, 3), np.nan)
    if with_hessian:
        hess, hess_evals = _fd_hessian(scene, p, 1e-4, 1e-3)
        evals += hess_evals
        disc["hessian"] = float(np.linalg.norm(hess - deriv.mixed) / np.linalg.norm(deriv.mixed))
        d_bf = float(np.linalg.det(-hess))
        disc["D"] = abs(d_bf - deriv.D) / abs(deriv.D)
    return OracleReport(alpha, length, hess, disc, evals)


def random_rotation(rng) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_scene(rng, a_range=(0.1, 10.0), r_range=(1.05, 100.0),
                 grazing_margin=1e-3, visible=True):
    """Random scene with endpoint radii log-uniform in ``r_range`` (units of a).

    With ``visible`` the opening angle is drawn uniformly below the shadow
    boundary, less ``grazing_margin`` radians.
    """
    from .geometry import Scene

    a = rng.uniform(*a_range)
    lo, hi = np.log(r_range[0]), np.log(r_range[1])
    m1, m2 = a * np.exp(rng.uniform(lo, hi, size=2))
    limit = math.pi
    if visible:
        limit = min(limit, math.acos(a / m1) + math.acos(a / m2) - grazing_margin)
    theta = rng.uniform(0.0, limit)
    rot = random_rotation(rng)
    r1 = rot @ np.array([m1, 0.0, 0.0])
    r2 = rot @ np.array([m2 * math.cos(theta), m2 * math.sin(theta), 0.0])
    return Scene(a, r1, r2)

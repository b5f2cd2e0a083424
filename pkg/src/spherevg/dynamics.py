"""Classical action of the bounce path and the Van Vleck determinant."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalInstability
from .geometry import Scene, Vec3, cross3
from .reflection import ReflectionSolution, solve_reflection

RICHARDSON_RTOL = 1e-4
STEP_FRACTION = 1e-5


@dataclass(frozen=True)
class PhysicalParams:
    mass: float = 1.0
    hbar: float = 1.0
    time: float = 1.0

    def __post_init__(self):
        for name in ("mass", "hbar", "time"):
            val = float(getattr(self, name))
            if not (val > 0.0 and math.isfinite(val)):
                raise ValueError(f"{name} must be positive and finite, got {val!r}")
            object.__setattr__(self, name, val)


@dataclass(frozen=True)
class ActionDerivatives:
    S: float
    grad1: Vec3
    grad2: Vec3
    mixed: np.ndarray
    D: float
    solution: ReflectionSolution

    @property
    def D_sign(self) -> int:
        return 1 if self.D >= 0.0 else -1


def action(sol: ReflectionSolution, p: PhysicalParams) -> float:
    return p.mass * sol.L * sol.L / (2.0 * p.time)


def _gradients(scene: Scene, p: PhysicalParams, sol: ReflectionSolution):
    # the collision point is stationary, so only the explicit endpoint
    # dependence of each leg survives
    speed = p.mass * sol.L / p.time
    grad1 = speed * (scene.r1 - sol.r_coll) / sol.ell_plus
    grad2 = speed * (scene.r2 - sol.r_coll) / sol.ell_minus
    return grad1, grad2


def action_gradients(scene: Scene, p: PhysicalParams) -> tuple[Vec3, Vec3]:
    """``(dS/dr1, dS/dr2)``; each has magnitude ``M L / t``."""
    return _gradients(scene, p, solve_reflection(scene))


def free_action(r1, r2, p: PhysicalParams) -> float:
    d = np.asarray(r2, dtype=float) - np.asarray(r1, dtype=float)
    return p.mass * float(d @ d) / (2.0 * p.time)


def free_action_gradients(r1, r2, p: PhysicalParams) -> tuple[Vec3, Vec3]:
    d = np.asarray(r2, dtype=float) - np.asarray(r1, dtype=float)
    k = p.mass / p.time
    return -k * d, k * d


def _central_jacobian(fn, x0, h):
    """``J[i, j] = d fn_j / d x_i`` by central differences."""
    jac = np.empty((3, 3))
    for i in range(3):
        step = np.zeros(3)
        step[i] = h
        jac[i] = (np.asarray(fn(x0 + step)) - np.asarray(fn(x0 - step))) / (2.0 * h)
    return jac


def richardson_jacobian(fn, x0, h, rtol: float = RICHARDSON_RTOL):
    """Central-difference Jacobian at steps ``h`` and ``h/2``, extrapolated.

    Returns ``(jacobian, coarse, fine)``.  Raises ``NumericalInstability``
    when the two estimates differ by more than ``rtol`` relative.
    """
    x0 = np.asarray(x0, dtype=float)
    coarse = _central_jacobian(fn, x0, h)
    fine = _central_jacobian(fn, x0, 0.5 * h)
    best = (4.0 * fine - coarse) / 3.0
    scale = np.linalg.norm(best)
    gap = np.linalg.norm(fine - coarse) / scale if scale > 0.0 else 0.0
    if gap > rtol:
        raise NumericalInstability(f"Richardson pair disagrees by {gap:.3g} (h={h:.3g})")
    return best, coarse, fine


def default_step(scene: Scene) -> float:
    return STEP_FRACTION * max(np.linalg.norm(scene.r1), np.linalg.norm(scene.r2))


def mixed_hessian(scene: Scene, p: PhysicalParams, h: float | None = None,
                  wrt: str = "r2") -> np.ndarray:
    """``M[i, j] = d^2 S / dr2_i dr1_j`` from differences of the analytic gradient.

    By default ``dS/dr1`` is differenced along ``r2``; ``wrt="r1"`` differences
    ``dS/dr2`` along ``r1`` instead and transposes, which gives an independent
    estimate of the same matrix.
    """
    h = default_step(scene) if h is None else h
    if wrt == "r2":
        def grad(q):
            return action_gradients(scene.with_endpoints(scene.r1, q), p)[0]
        return richardson_jacobian(grad, scene.r2, h)[0]
    if wrt == "r1":
        def grad(q):
            return action_gradients(scene.with_endpoints(q, scene.r2), p)[1]
        return richardson_jacobian(grad, scene.r1, h)[0].T
    raise ValueError(f"wrt must be 'r1' or 'r2', got {wrt!r}")


def _tangent_basis(m):
    pick = np.eye(3)[int(np.argmin(np.abs(m)))]
    t1 = cross3(m, pick)
    t1 /= np.linalg.norm(t1)
    return np.column_stack((t1, cross3(m, t1)))


def _exact_mixed(scene: Scene, p: PhysicalParams, sol: ReflectionSolution) -> np.ndarray:
    m = sol.r_coll / scene.a
    n1 = (scene.r1 - sol.r_coll) / sol.ell_plus
    n2 = (scene.r2 - sol.r_coll) / sol.ell_minus
    eye = np.eye(3)
    perp1 = eye - np.outer(n1, n1)
    perp2 = eye - np.outer(n2, n2)
    tb = _tangent_basis(m)
    hess_c = perp1 / sol.ell_plus + perp2 / sol.ell_minus
    k = tb.T @ hess_c @ tb + (float((n1 + n2) @ m) / scene.a) * np.eye(2)
    dcoll = tb @ np.linalg.solve(k, tb.T @ perp2) / sol.ell_minus
    # jac[j, i] = d grad1_j / d r2_i
    jac = (p.mass / p.time) * (np.outer(n1, n2) - (sol.L / sol.ell_plus) * perp1 @ dcoll)
    return jac.T


def mixed_hessian_exact(scene: Scene, p: PhysicalParams) -> np.ndarray:
    """``d^2 S / dr2_i dr1_j`` in closed form.

    The collision point's response to ``r2`` follows from differentiating
    the condition that ``grad L`` is normal to the sphere; its tangent-plane
    Hessian carries the extra curvature term ``((n1 + n2) . m) / a``.
    """
    return _exact_mixed(scene, p, solve_reflection(scene))


def free_mixed_hessian(r1, r2, p: PhysicalParams, h: float = 1e-3) -> np.ndarray:
    """Same differencing applied to the free action; exact answer ``-(M/t) I``."""
    r1 = np.asarray(r1, dtype=float)
    return richardson_jacobian(lambda q: free_action_gradients(r1, q, p)[0], r2, h)[0]


def van_vleck_D(scene: Scene, p: PhysicalParams, method: str = "exact",
                h: float | None = None) -> float:
    """Signed ``det(-d^2 S / dr2 dr1)``; ``method`` is ``"exact"`` or ``"fd"``."""
    return action_derivatives(scene, p, method, h).D


def action_derivatives(scene: Scene, p: PhysicalParams, method: str = "exact",
                       h: float | None = None,
                       solution: ReflectionSolution | None = None) -> ActionDerivatives:
    sol = solve_reflection(scene) if solution is None else solution
    grad1, grad2 = _gradients(scene, p, sol)
    if method == "exact":
        mixed = _exact_mixed(scene, p, sol)
    elif method == "fd":
        mixed = mixed_hessian(scene, p, h)
    else:
        raise ValueError(f"method must be 'exact' or 'fd', got {method!r}")
    return ActionDerivatives(
        S=action(sol, p),
        grad1=grad1,
        grad2=grad2,
        mixed=mixed,
        D=float(np.linalg.det(-mixed)),
        solution=sol,
    )

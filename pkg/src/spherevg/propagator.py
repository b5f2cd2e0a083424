"""Semiclassical propagator for a point particle bouncing off a hard sphere.

The amplitude is the free propagator minus a single reflected-path term,

    K = K_free - sqrt(|D|) / (2 pi i hbar)^(3/2) * exp(i S / hbar),

with ``i^(3/2)`` taken on the principal branch, ``exp(3 i pi / 4)``, for both
terms.  Amplitudes carry units of length^-3.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import ActionDerivatives, PhysicalParams, action_derivatives
from .errors import ShadowedInput
from .geometry import PathClass, Scene, classify_with_root
from .reflection import solve_reflection

BRANCH_PHASE = cmath.exp(-0.75j * math.pi)

_SHADOWED = (PathClass.ShadowedDirect, PathClass.ShadowedReflection)


def free_propagator(r1, r2, p: PhysicalParams) -> complex:
    d = np.asarray(r2, dtype=float) - np.asarray(r1, dtype=float)
    modulus = (p.mass / (2.0 * math.pi * p.hbar * p.time)) ** 1.5
    phase = p.mass * float(d @ d) / (2.0 * p.hbar * p.time)
    return modulus * BRANCH_PHASE * cmath.exp(1j * phase)


def reflected_term(S: float, D: float, p: PhysicalParams) -> complex:
    """Reflected-path amplitude before the overall minus sign is applied."""
    modulus = math.sqrt(abs(D)) / (2.0 * math.pi * p.hbar) ** 1.5
    return modulus * BRANCH_PHASE * cmath.exp(1j * S / p.hbar)


@dataclass(frozen=True)
class PropagatorResult:
    """Free and reflected contributions plus their combination.

    ``reflected_term`` is the bare path amplitude; ``total`` is
    ``free_term - reflected_term``.  For shadowed scenes evaluated with
    ``strict=False`` the reflected term is zero, ``total`` is ``None`` and
    ``reflected_valid`` is false.
    """

    free_term: complex
    reflected_term: complex
    total: complex | None
    path_class: PathClass
    D_sign: int | None
    derivatives: ActionDerivatives | None = field(default=None, repr=False)
    diagnostics: dict = field(default_factory=dict)

    @property
    def reflected_valid(self) -> bool:
        return self.derivatives is not None


def vg_propagator(scene: Scene, p: PhysicalParams, strict: bool = True,
                  verify: bool = False) -> PropagatorResult:
    """Evaluate the semiclassical propagator between the scene endpoints.

    Raises ``ShadowedInput`` when either point lies in the other's shadow
    unless ``strict`` is false, in which case only the free term is
    returned.  ``verify`` adds the Newton-iteration angle to the diagnostics.
    """
    path_class, root = classify_with_root(scene)
    free = free_propagator(scene.r1, scene.r2, p)
    if path_class in _SHADOWED:
        if strict:
            raise ShadowedInput(f"endpoints are shadowed ({path_class.value})", path_class)
        return PropagatorResult(free, 0j, None, path_class, None)

    deriv = action_derivatives(scene, p, solution=solve_reflection(scene, root=root))
    sol = deriv.solution
    refl = reflected_term(deriv.S, deriv.D, p)
    diagnostics = {
        "residual_eq4": sol.residual_eq4,
        "residual_eq5": sol.residual_eq5,
        "residual_eq6": sol.residual_eq6,
    }
    if verify:
        from .reflection import solve_alpha_newton

        alpha_newton = 0.0 if sol.geometry.is_radial else solve_alpha_newton(sol.geometry)
        diagnostics["alpha_newton"] = alpha_newton
        diagnostics["alpha_discrepancy"] = abs(alpha_newton - sol.alpha)
    return PropagatorResult(free, refl, free - refl, path_class, deriv.D_sign,
                            deriv, diagnostics)

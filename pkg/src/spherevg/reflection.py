"""Specular reflection point on the sphere.

The collision point sits at angle ``theta/2 + alpha`` from ``r1`` in the plane
of the two endpoints.  ``alpha`` solves

    sin(a) cos(a) - u sin(a) + v cos(a) = 0,

which becomes a quartic in ``x = tan(alpha/2)``.  ``solve_alpha_exact`` uses
the closed-form quartic; ``solve_alpha_newton`` attacks the trigonometric
equation directly and ``alpha_series`` is the small-``v`` expansion.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import quartic
from .errors import AmbiguousRoot, NoConvergence, NoPhysicalRoot
from .geometry import ReducedGeometry, Scene, Vec3, collision_point, reduce

AMBIGUITY_RTOL = 1e-12
DUPLICATE_ATOL = 1e-9
NEWTON_MAX_ITER = 100
NEWTON_FTOL = 1e-14


class Method(enum.Enum):
    QuarticExact = "QuarticExact"
    NewtonTrig = "NewtonTrig"
    Series = "Series"


def trig_residual(g: ReducedGeometry, alpha: float) -> float:
    s, c = math.sin(alpha), math.cos(alpha)
    return s * c - g.u * s + g.v * c


def trig_residual_derivative(g: ReducedGeometry, alpha: float) -> float:
    return math.cos(2.0 * alpha) - g.u * math.cos(alpha) - g.v * math.sin(alpha)


def _half_angles(g: ReducedGeometry, alpha: float) -> tuple[float, float]:
    return 0.5 * g.theta + alpha, 0.5 * g.theta - alpha


def visibility_numerators(g: ReducedGeometry, alpha: float) -> tuple[float, float]:
    """``r cos(phi) - a`` for each leg; both positive when the point is lit.

    Written as ``(r - a) - 2 r sin^2(phi/2)`` to survive endpoints close to
    the sphere.
    """
    phi1, phi2 = _half_angles(g, alpha)
    n1 = (g.r1_mag - g.a) - 2.0 * g.r1_mag * math.sin(0.5 * phi1) ** 2
    n2 = (g.r2_mag - g.a) - 2.0 * g.r2_mag * math.sin(0.5 * phi2) ** 2
    return n1, n2


def leg_lengths(g: ReducedGeometry, alpha: float) -> tuple[float, float]:
    """Distances from ``r1`` and ``r2`` to the collision point (law of cosines)."""
    phi1, phi2 = _half_angles(g, alpha)
    a = g.a
    d1 = g.r1_mag - a
    d2 = g.r2_mag - a
    ell_plus = math.sqrt(d1 * d1 + 4.0 * a * g.r1_mag * math.sin(0.5 * phi1) ** 2)
    ell_minus = math.sqrt(d2 * d2 + 4.0 * a * g.r2_mag * math.sin(0.5 * phi2) ** 2)
    return ell_plus, ell_minus


def path_length(g: ReducedGeometry, alpha: float) -> float:
    ell_plus, ell_minus = leg_lengths(g, alpha)
    return ell_plus + ell_minus


def reflection_residuals(g: ReducedGeometry, alpha: float) -> tuple[float, float, float]:
    """Equal-cosine, stationarity and trigonometric-equation residuals."""
    ell_plus, ell_minus = leg_lengths(g, alpha)
    n1, n2 = visibility_numerators(g, alpha)
    phi1, phi2 = _half_angles(g, alpha)
    res_cos = abs(n1 / ell_plus - n2 / ell_minus)
    res_sin = abs(g.r1_mag * math.sin(phi1) / ell_plus - g.r2_mag * math.sin(phi2) / ell_minus)
    return res_cos, res_sin, abs(trig_residual(g, alpha))


@dataclass(frozen=True)
class RootCandidate:
    x: float
    alpha: float
    L: float
    visible: bool
    between: bool

    @property
    def physical(self) -> bool:
        return self.visible and self.between and abs(self.alpha) < 0.5 * math.pi


def root_candidates(g: ReducedGeometry) -> list[RootCandidate]:
    """Every real root of the quartic mapped to an angle, with filter flags."""
    roots = quartic.solve_eq9(g.u, g.v)
    out = []
    for x in roots.real_roots:
        alpha = 2.0 * math.atan(x)
        n1, n2 = visibility_numerators(g, alpha)
        phi1, phi2 = _half_angles(g, alpha)
        out.append(
            RootCandidate(
                x=x,
                alpha=alpha,
                L=path_length(g, alpha),
                visible=n1 > 0.0 and n2 > 0.0,
                between=math.sin(phi1) > 0.0 and math.sin(phi2) > 0.0,
            )
        )
    return out


def exact_root(g: ReducedGeometry) -> RootCandidate:
    """Accepted root of the quartic with its angle and path length."""
    if g.is_radial:
        return RootCandidate(0.0, 0.0, path_length(g, 0.0), True, True)
    kept: list[RootCandidate] = []
    for cand in sorted(root_candidates(g), key=lambda c: c.L):
        if cand.physical and all(abs(cand.alpha - k.alpha) > DUPLICATE_ATOL for k in kept):
            kept.append(cand)
    if not kept:
        raise NoPhysicalRoot(
            f"no visible specular point for u={g.u!r}, v={g.v!r}, theta={g.theta!r}"
        )
    if len(kept) > 1 and kept[1].L - kept[0].L < AMBIGUITY_RTOL * kept[0].L:
        raise AmbiguousRoot(f"two specular points with equal length: {kept[:2]}")
    return kept[0]


def solve_alpha_exact(g: ReducedGeometry) -> float:
    """Reflection angle from the closed-form quartic.

    Of the real roots only those with ``|alpha| < pi/2``, a collision point
    lit from both endpoints, and lying angularly between them survive; the
    shortest surviving path wins.
    """
    return exact_root(g).alpha


def alpha_series(g: ReducedGeometry) -> float:
    """Small-``v`` expansion of the reflection angle through third order.

    The remainder is fifth order in ``v``; the coefficients blow up like
    powers of ``1/(1 - u)`` as ``u -> 1``.
    """
    u, v = g.u, g.v
    w = 1.0 - u
    return -v / w - (1.0 + 2.0 * u) * v**3 / (6.0 * w**4)


def visible_window(g: ReducedGeometry) -> tuple[float, float]:
    """Range of alpha for which the collision point is lit from both ends."""
    beta1, beta2 = g.visible_caps()
    half = 0.5 * g.theta
    return max(-half, half - beta2), min(half, beta1 - half)


def solve_alpha_newton(g: ReducedGeometry) -> float:
    """Safeguarded Newton iteration on the trigonometric equation.

    Seeded with the series value and confined to the visible window, where
    the residual runs from negative to positive; a bisection step replaces
    any Newton step that leaves the bracket.
    """
    if g.is_radial or g.v == 0.0:
        return 0.0
    lo, hi = visible_window(g)
    if not lo < hi:
        raise NoPhysicalRoot("visible window is empty")
    alpha = alpha_series(g)
    if not lo < alpha < hi:
        alpha = 0.5 * (lo + hi)
    for _ in range(NEWTON_MAX_ITER):
        f = trig_residual(g, alpha)
        if abs(f) <= NEWTON_FTOL:
            return alpha
        if f < 0.0:
            lo = alpha
        else:
            hi = alpha
        if hi - lo <= 4.0 * np.finfo(float).eps * max(1.0, abs(alpha)):
            return alpha
        df = trig_residual_derivative(g, alpha)
        nxt = alpha - f / df if df != 0.0 else lo - 1.0
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        alpha = nxt
    raise NoConvergence(
        f"no convergence after {NEWTON_MAX_ITER} iterations; bracket [{lo!r}, {hi!r}]"
    )


def geometry_from_uv(u: float, v: float, a: float = 1.0) -> ReducedGeometry:
    """Construct a visible scene whose reduced parameters are ``(u, v)``.

    Scans the half-angle cosine ``c`` and solves ``a/r1 = u/c + v/s``,
    ``a/r2 = u/c - v/s``; the candidate with the widest visibility margin is
    returned.
    """
    if not (0.0 < u < 1.0 and abs(v) < 0.5):
        raise ValueError(f"(u, v) = ({u!r}, {v!r}) outside the admissible range")
    best = None
    for c in np.linspace(u, 1.0, 2001)[1:-1]:
        s = math.sqrt(1.0 - c * c)
        inv1 = u / c + v / s
        inv2 = u / c - v / s
        if not (0.0 < inv1 < 1.0 and 0.0 < inv2 < 1.0):
            continue
        theta = 2.0 * math.acos(c)
        margin = math.acos(inv1) + math.acos(inv2) - theta
        if margin > 0.0 and (best is None or margin > best[0]):
            best = (margin, theta, a / inv1, a / inv2)
    if best is None:
        raise ValueError(f"no visible geometry realises (u, v) = ({u!r}, {v!r})")
    _, theta, r1, r2 = best
    g = ReducedGeometry.from_scalars(a, r1, r2, theta)
    # pin the exact requested values; the construction only matches to rounding
    return ReducedGeometry(g.a, g.r1_mag, g.r2_mag, g.theta, u, v)


@dataclass(frozen=True)
class ReflectionSolution:
    geometry: ReducedGeometry
    alpha: float
    x: float
    ell_plus: float
    ell_minus: float
    L: float
    r_coll: Vec3 = field(repr=False)
    residual_eq4: float
    residual_eq5: float
    residual_eq6: float
    method: Method
    alpha_newton: float | None = None


def solve_reflection(scene: Scene, method: Method = Method.QuarticExact,
                     verify: bool = False, root: RootCandidate | None = None) -> ReflectionSolution:
    """Full reflection-path solution for a scene.

    With ``verify`` the Newton solution is also computed and stored in
    ``alpha_newton`` for comparison.  A ``root`` already accepted by
    ``exact_root`` for this scene skips the quartic solve.
    """
    g = reduce(scene)
    if method is Method.QuarticExact:
        cand = exact_root(g) if root is None else root
        alpha, x = cand.alpha, cand.x
    elif method is Method.NewtonTrig:
        alpha = solve_alpha_newton(g)
        x = math.tan(0.5 * alpha)
    else:
        alpha = 0.0 if g.is_radial else alpha_series(g)
        x = math.tan(0.5 * alpha)
    ell_plus, ell_minus = leg_lengths(g, alpha)
    res4, res5, res6 = reflection_residuals(g, alpha)
    return ReflectionSolution(
        geometry=g,
        alpha=alpha,
        x=x,
        ell_plus=ell_plus,
        ell_minus=ell_minus,
        L=ell_plus + ell_minus,
        r_coll=collision_point(scene, alpha),
        residual_eq4=res4,
        residual_eq5=res5,
        residual_eq6=res6,
        method=method,
        alpha_newton=solve_alpha_newton(g) if verify else None,
    )

"""Scene types and the reduction of a 3-D collision problem to scalars.

The sphere is centred at the origin.  A scene is a sphere radius plus two
endpoints strictly outside it; ``reduce`` collapses it to
``(a, r1, r2, theta)`` and the two dimensionless parameters ``u`` and ``v``
that control the reflection condition.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import DegeneratePlane, EndpointInsideSphere, NoPhysicalRoot

Vec3 = NDArray[np.float64]

# below this angle the reflection plane is undefined and the bounce is radial
DEGENERATE_THETA = 1e-9
# reflections closer than this (rad) to grazing incidence are refused
GRAZING_GUARD = 1e-6


def as_vec3(value) -> Vec3:
    """Return a read-only float64 copy of a length-3 vector."""
    vec = np.array(value, dtype=np.float64).reshape(-1)
    if vec.shape != (3,):
        raise ValueError(f"expected 3 components, got {vec.shape[0]}")
    if not np.all(np.isfinite(vec)):
        raise ValueError(f"non-finite vector component in {value!r}")
    vec.setflags(write=False)
    return vec


def cross3(p, q) -> Vec3:
    """Cross product of two 3-vectors; ``np.cross`` is slow for single pairs."""
    p0, p1, p2 = float(p[0]), float(p[1]), float(p[2])
    q0, q1, q2 = float(q[0]), float(q[1]), float(q[2])
    return np.array([p1 * q2 - p2 * q1, p2 * q0 - p0 * q2, p0 * q1 - p1 * q0])


def angle_between(p: Vec3, q: Vec3) -> float:
    """Angle in [0, pi] between two vectors, accurate near 0 and pi."""
    c = cross3(p, q)
    return math.atan2(math.sqrt(float(c @ c)), float(np.dot(p, q)))


@dataclass(frozen=True)
class Scene:
    """Sphere radius ``a`` and two endpoints outside the sphere."""

    a: float
    r1: Vec3
    r2: Vec3

    def __post_init__(self):
        a = float(self.a)
        if not (a > 0.0 and math.isfinite(a)):
            raise ValueError(f"sphere radius must be positive, got {self.a!r}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "r1", as_vec3(self.r1))
        object.__setattr__(self, "r2", as_vec3(self.r2))
        for name in ("r1", "r2"):
            mag = float(np.linalg.norm(getattr(self, name)))
            if mag <= a:
                raise EndpointInsideSphere(
                    f"|{name}| = {mag!r} is not outside the sphere of radius {a!r}"
                )

    def swapped(self) -> Scene:
        return Scene(self.a, self.r2, self.r1)

    def rotated(self, rotation) -> Scene:
        rot = np.asarray(rotation, dtype=np.float64)
        return Scene(self.a, rot @ self.r1, rot @ self.r2)

    def with_endpoints(self, r1, r2) -> Scene:
        return Scene(self.a, r1, r2)


@dataclass(frozen=True)
class ReducedGeometry:
    a: float
    r1_mag: float
    r2_mag: float
    theta: float
    u: float
    v: float

    @classmethod
    def from_scalars(cls, a: float, r1_mag: float, r2_mag: float, theta: float):
        """Build the reduced problem directly from radii and the opening angle."""
        if r1_mag <= a or r2_mag <= a:
            raise EndpointInsideSphere(
                f"radii ({r1_mag!r}, {r2_mag!r}) must exceed a = {a!r}"
            )
        if not 0.0 <= theta <= math.pi:
            raise ValueError(f"theta must lie in [0, pi], got {theta!r}")
        half = 0.5 * theta
        u = 0.5 * a * (1.0 / r1_mag + 1.0 / r2_mag) * math.cos(half)
        v = 0.5 * a * (1.0 / r1_mag - 1.0 / r2_mag) * math.sin(half)
        return cls(float(a), float(r1_mag), float(r2_mag), float(theta), u, v)

    @property
    def is_radial(self) -> bool:
        return self.theta < DEGENERATE_THETA

    def visible_caps(self) -> tuple[float, float]:
        """Angular radii of the sphere caps seen from each endpoint."""
        return math.acos(self.a / self.r1_mag), math.acos(self.a / self.r2_mag)


class PathClass(enum.Enum):
    DirectAndReflected = "DirectAndReflected"
    ShadowedDirect = "ShadowedDirect"
    ShadowedReflection = "ShadowedReflection"
    Degenerate = "Degenerate"


def reduce(scene: Scene) -> ReducedGeometry:
    r1_mag = float(np.linalg.norm(scene.r1))
    r2_mag = float(np.linalg.norm(scene.r2))
    if r1_mag <= scene.a or r2_mag <= scene.a:
        raise EndpointInsideSphere("endpoint on or inside the sphere")
    theta = angle_between(scene.r1, scene.r2)
    return ReducedGeometry.from_scalars(scene.a, r1_mag, r2_mag, theta)


def segment_distance_to_origin(p: Vec3, q: Vec3) -> float:
    """Distance from the origin to the closed segment ``p -> q``."""
    d = q - p
    dd = float(np.dot(d, d))
    if dd == 0.0:
        return float(np.linalg.norm(p))
    s = min(1.0, max(0.0, -float(np.dot(p, d)) / dd))
    return float(np.linalg.norm(p + s * d))


def direct_path_shadowed(scene: Scene) -> bool:
    # tangency (distance == a) counts as visible
    return segment_distance_to_origin(scene.r1, scene.r2) < scene.a


def classify_path(scene: Scene) -> PathClass:
    """Decide which classical paths connect the endpoints.

    Collinear endpoints on the same side of the sphere are ``Degenerate``:
    the bounce is radial and the reflection plane is undefined.  Antipodal
    endpoints are always ``ShadowedDirect``.  Reflections within
    ``GRAZING_GUARD`` of grazing incidence are ``ShadowedReflection``.
    """
    return classify_with_root(scene)[0]


def classify_with_root(scene: Scene):
    """``classify_path`` plus the accepted quartic root when one was found."""
    if direct_path_shadowed(scene):
        return PathClass.ShadowedDirect, None
    g = reduce(scene)
    if g.is_radial:
        return PathClass.Degenerate, None
    beta1, beta2 = g.visible_caps()
    if beta1 + beta2 - g.theta < GRAZING_GUARD:
        return PathClass.ShadowedReflection, None
    from .reflection import exact_root, visibility_numerators

    try:
        root = exact_root(g)
    except NoPhysicalRoot:
        return PathClass.ShadowedReflection, None
    if min(visibility_numerators(g, root.alpha)) <= 0.0:
        return PathClass.ShadowedReflection, None
    return PathClass.DirectAndReflected, root


def _plane_basis(scene: Scene) -> tuple[Vec3, Vec3]:
    e1 = scene.r1 / np.linalg.norm(scene.r1)
    normal = cross3(scene.r1, scene.r2)
    nn = float(np.linalg.norm(normal))
    if nn <= DEGENERATE_THETA * np.linalg.norm(scene.r1) * np.linalg.norm(scene.r2):
        raise DegeneratePlane("r1 and r2 are collinear")
    e2 = cross3(normal / nn, e1)
    return e1, e2


def collision_point(scene: Scene, alpha: float) -> Vec3:
    """Point on the sphere at angle ``theta/2 + alpha`` from ``r1`` toward ``r2``.

    For collinear endpoints only ``alpha == 0`` is meaningful and yields the
    radial point ``a * r1/|r1|``.
    """
    g = reduce(scene)
    if g.is_radial:
        if alpha != 0.0:
            raise DegeneratePlane("nonzero alpha with collinear endpoints")
        return as_vec3(scene.a * scene.r1 / np.linalg.norm(scene.r1))
    e1, e2 = _plane_basis(scene)
    phi = 0.5 * g.theta + alpha
    return as_vec3(scene.a * (math.cos(phi) * e1 + math.sin(phi) * e2))


def rotation_matrix(axis, angle: float) -> NDArray[np.float64]:
    """Rodrigues rotation about ``axis`` by ``angle`` radians."""
    k = np.asarray(axis, dtype=np.float64)
    k = k / np.linalg.norm(k)
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + math.sin(angle) * kx + (1.0 - math.cos(angle)) * (kx @ kx)

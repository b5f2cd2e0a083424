"""Closed-form roots of real quartics (Ferrari) with Newton polishing.

Lower-degree polynomials are handled when the leading coefficients vanish,
which the reflection quartic does whenever the endpoints are equidistant
from the sphere centre.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

from .errors import ZeroPolynomial

LEADING_TOL = 1e-12
POLISH_ITERATIONS = 20
# |imag| below this (relative to max(1, |x|)) after polishing marks a real root
REAL_TOL = 1e-7
RECONSTRUCT_TOL = 1e-13
_EPS = 2.220446049250313e-16


@dataclass(frozen=True)
class QuarticCoeffs:
    """Coefficients of ``c4 x^4 + c3 x^3 + c2 x^2 + c1 x + c0``."""

    c4: float
    c3: float
    c2: float
    c1: float
    c0: float

    def __post_init__(self):
        vals = tuple(float(c) for c in self.as_tuple())
        if not all(math.isfinite(c) for c in vals):
            raise ValueError(f"non-finite coefficient in {vals}")
        for name, val in zip(("c4", "c3", "c2", "c1", "c0"), vals):
            object.__setattr__(self, name, val)

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.c4, self.c3, self.c2, self.c1, self.c0)

    @property
    def scale(self) -> float:
        return max(abs(c) for c in self.as_tuple())


@dataclass(frozen=True)
class QuarticRoots:
    """Roots of a (possibly degenerate) quartic.

    ``residuals[k]`` is ``|p(x_k)| / max(1, |x_k|)**n`` for degree ``n``: the
    plain residual for roots inside the unit disc and the residual of the
    reversed polynomial at ``1/x_k`` outside it.
    """

    roots: tuple[complex, ...]
    real_roots: tuple[float, ...]
    residuals: tuple[float, ...]
    degree: int


def eq9_coeffs(u: float, v: float) -> QuarticCoeffs:
    """Quartic in ``x = tan(alpha/2)`` for the reduced reflection problem."""
    return QuarticCoeffs(v, 2.0 * (1.0 + u), 0.0, -2.0 * (1.0 - u), -v)


def _horner(coeffs, x):
    p = 0.0
    dp = 0.0
    for c in coeffs:
        dp = dp * x + p
        p = p * x + c
    return p, dp


def _polish(coeffs, x, real: bool):
    p, dp = _horner(coeffs, x)
    best = abs(p)
    for _ in range(POLISH_ITERATIONS):
        if best == 0.0 or dp == 0:
            break
        step = p / dp
        if real:
            step = step.real if isinstance(step, complex) else step
        nxt = x - step
        p_n, dp_n = _horner(coeffs, nxt)
        if abs(p_n) > best:
            break
        x, p, dp, best = nxt, p_n, dp_n, abs(p_n)
        if abs(step) <= 2.0 * _EPS * abs(x):
            break
    return x


def _quadratic(b: float, c: float, d: float) -> list[complex]:
    disc = c * c - 4.0 * b * d
    if disc >= 0.0:
        q = -0.5 * (c + math.copysign(math.sqrt(disc), c))
        if q == 0.0:
            return [0j, 0j]
        return [complex(q / b), complex(d / q)]
    re = -c / (2.0 * b)
    im = math.sqrt(-disc) / (2.0 * abs(b))
    return [complex(re, im), complex(re, -im)]


def _cbrt(x: float) -> float:
    return math.copysign(abs(x) ** (1.0 / 3.0), x)


def _depressed_cubic(p: float, q: float) -> list[complex]:
    """Roots of ``t^3 + p t + q``."""
    # rescale so both coefficients are O(1); avoids underflow in the discriminant
    k = max(math.sqrt(abs(p)), abs(q) ** (1.0 / 3.0))
    if k == 0.0:
        return [0j, 0j, 0j]
    p, q = p / k / k, q / k / k / k
    disc = (0.5 * q) ** 2 + (p / 3.0) ** 3
    if disc > 0.0 or p >= 0.0:
        big = -_cbrt(0.5 * q + math.copysign(math.sqrt(max(disc, 0.0)), q))
        small = -p / (3.0 * big) if big != 0.0 else 0.0
        re = -0.5 * (big + small)
        im = 0.5 * math.sqrt(3.0) * (big - small)
        return [k * complex(big + small), k * complex(re, im), k * complex(re, -im)]
    m = 2.0 * math.sqrt(-p / 3.0)
    arg = max(-1.0, min(1.0, 3.0 * q / (p * m)))
    phi = math.acos(arg) / 3.0
    return [complex(k * m * math.cos(phi - 2.0 * math.pi * j / 3.0)) for j in range(3)]


def _cubic(b: float, c: float, d: float) -> list[complex]:
    """Roots of the monic cubic ``x^3 + b x^2 + c x + d``."""
    shift = b / 3.0
    p = c - b * shift
    q = d - c * shift + 2.0 * shift**3
    return [t - shift for t in _depressed_cubic(p, q)]


def _ferrari(b: float, c: float, d: float, e: float) -> list[complex]:
    """Roots of the monic quartic ``x^4 + b x^3 + c x^2 + d x + e``."""
    shift = 0.25 * b
    b2 = b * b
    p = c - 0.375 * b2
    q = d - 0.5 * b * c + 0.125 * b2 * b
    r = e - 0.25 * b * d + b2 * c / 16.0 - 3.0 * b2 * b2 / 256.0
    size = max(abs(p), math.sqrt(abs(r)), 1e-300)

    if abs(q) <= _EPS * size**1.5:
        ys = []
        for z in _quadratic(1.0, p, r):
            w = cmath.sqrt(z)
            ys += [w, -w]
        return [y - shift for y in ys]

    # resolvent: m^3 - (p/2) m^2 - r m + (p r / 2 - q^2 / 8) = 0
    rc = (-0.5 * p, -r, 0.5 * p * r - 0.125 * q * q)
    m = max(z.real for z in _cubic(*rc))
    m = float(_polish((1.0,) + rc, m, real=True))
    s2 = 2.0 * m - p
    if s2 <= 0.0:
        s2 = abs(q) * 1e-300 + 1e-300
    s = math.sqrt(s2)
    # q/(2s) equals sign(q)*sqrt(m^2 - r); prefer whichever is better conditioned
    half = q / (2.0 * s)
    alt = m * m - r
    if alt > 0.0 and (m * m + abs(r)) / alt < (abs(m) + abs(p)) / s2:
        half = math.copysign(math.sqrt(alt), q)
    ys = _quadratic(1.0, -s, m + half) + _quadratic(1.0, s, m - half)
    return [y - shift for y in ys]


def _pair_conjugates(roots: list[complex]) -> list[complex]:
    real, cplx = [], []
    for z in roots:
        if abs(z.imag) <= REAL_TOL * abs(z):
            real.append(complex(z.real, 0.0))
        else:
            cplx.append(z)
    if len(cplx) % 2:
        cplx.sort(key=lambda z: abs(z.imag))
        real.append(complex(cplx.pop(0).real, 0.0))
    upper = sorted((z for z in cplx if z.imag > 0), key=lambda z: z.real)
    lower = sorted((z for z in cplx if z.imag <= 0), key=lambda z: z.real)
    paired = []
    if len(upper) == len(lower):
        for zu, zl in zip(upper, lower):
            re = 0.5 * (zu.real + zl.real)
            im = 0.5 * (zu.imag - zl.imag)
            paired += [complex(re, im), complex(re, -im)]
    else:
        # both members landed on one side of the axis; split them
        ordered = sorted(cplx, key=lambda z: z.real)
        for z1, z2 in zip(ordered[::2], ordered[1::2]):
            re = 0.5 * (z1.real + z2.real)
            im = 0.5 * (abs(z1.imag) + abs(z2.imag))
            paired += [complex(re, im), complex(re, -im)]
    return real + paired


def _refine(poly, guesses) -> list[complex]:
    polished = [_polish(poly, complex(z), real=False) for z in guesses]
    roots = []
    for z in _pair_conjugates([complex(z) for z in polished]):
        if z.imag == 0.0:
            roots.append(complex(_polish(poly, z.real, real=True), 0.0))
        else:
            roots.append(z)
    roots.sort(key=lambda z: (z.real, z.imag))
    return roots


def _reconstruction_error(roots, monic) -> float:
    """Coefficient mismatch of prod(x - z_k), each relative to prod(x + |z_k|)."""
    signed = [1.0 + 0j]
    absolute = [1.0]
    for z in roots:
        signed = [s - z * t for s, t in zip(signed + [0j], [0j] + signed)]
        absolute = [s + abs(z) * t for s, t in zip(absolute + [0.0], [0.0] + absolute)]
    worst = 0.0
    for k, c in enumerate(monic, start=1):
        worst = max(worst, abs(signed[k] - c) / max(absolute[k], 1e-300))
    return worst


def _deflated_guesses(poly, roots) -> list[complex]:
    big = max(roots, key=abs)
    if big.imag != 0.0:
        return roots
    big = big.real
    if big == 0.0:
        return roots
    # backward deflation is the stable direction for the largest root
    n = len(poly) - 1
    quot = [0.0] * n
    prev = 0.0
    for k in range(n - 1, -1, -1):
        quot[k] = (prev - poly[k + 1]) / big
        prev = quot[k]
    monic = [c / quot[0] for c in quot[1:]]
    rest = _cubic(*monic) if len(monic) == 3 else _quadratic(1.0, *monic)
    return [complex(big)] + rest


def solve_quartic(coeffs) -> QuarticRoots:
    """All complex roots of a real polynomial of degree at most four.

    Leading coefficients smaller than ``LEADING_TOL * max|c_i|`` are dropped,
    so the number of roots equals the effective degree.  Roots come from the
    closed form (Ferrari / Cardano / quadratic formula) and are then refined
    by Newton steps on the original polynomial.
    """
    if not isinstance(coeffs, QuarticCoeffs):
        coeffs = QuarticCoeffs(*coeffs)
    full = coeffs.as_tuple()
    scale = coeffs.scale
    if scale == 0.0:
        raise ZeroPolynomial("all coefficients are zero")
    lead = 0
    while abs(full[lead]) < LEADING_TOL * scale:
        lead += 1
    poly = full[lead:]
    degree = len(poly) - 1
    if degree == 0:
        return QuarticRoots((), (), (), 0)
    monic = [c / poly[0] for c in poly[1:]]
    if degree == 1:
        guesses = [complex(-monic[0])]
    elif degree == 2:
        guesses = _quadratic(1.0, *monic)
    elif degree == 3:
        guesses = _cubic(*monic)
    else:
        guesses = _ferrari(*monic)

    roots = _refine(poly, guesses)
    if degree >= 3 and _reconstruction_error(roots, monic) > RECONSTRUCT_TOL:
        # widely spread roots defeat the depressed form; peel off the
        # dominant root and solve the remaining cubic/quadratic instead
        alt = _refine(poly, _deflated_guesses(poly, roots))
        if _reconstruction_error(alt, monic) < _reconstruction_error(roots, monic):
            roots = alt
    residuals = tuple(
        abs(_horner(poly, z)[0]) / max(1.0, abs(z)) ** degree for z in roots
    )
    real_roots = tuple(z.real for z in roots if z.imag == 0.0)
    return QuarticRoots(tuple(roots), real_roots, residuals, degree)


def solve_eq9(u: float, v: float) -> QuarticRoots:
    return solve_quartic(eq9_coeffs(u, v))

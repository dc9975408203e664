"""Quantum recoupling core at a primitive 4r-th root of unity.

Everything downstream (spin-network evaluation, state sums, surgery
invariants) is built from the scalars defined here: quantum integers,
quantum dimensions, theta and tetrahedral nets, recoupling (F-move)
coefficients, framing twists, and the global normalization constants
eta and kappa.

Conventions: integer colors ``c = 2j`` in ``{0, ..., r-2}``, loop value
``delta(c) = (-1)^c [c+1]``, ``A = exp(2*pi*i/(4r))``, ``q = A**2``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache

import mpmath

__all__ = [
    "RootParams",
    "ColorOutOfRange",
    "NotAdmissible",
    "quantum_integer",
    "quantum_factorial",
    "quantum_dimension",
    "is_admissible",
    "admissible_triples",
    "channels",
    "theta",
    "tet",
    "fmove_coeff",
    "fmove_table",
    "twist",
    "eta",
    "global_dim_sq",
    "kappa",
]


class ColorOutOfRange(ValueError):
    """Color outside {0, ..., r-2}."""


class NotAdmissible(ValueError):
    """A required triple of colors violates the fusion constraints."""


# Native IEEE doubles are used up to this many bits; above it, mpmath.
_NATIVE_BITS = 64


@dataclass(frozen=True)
class RootParams:
    """Root-of-unity datum shared by all quantum modules.

    r: integer level parameter, r >= 2; colors live in {0, ..., r-2}.
    precision: working precision in bits.  Up to 64 bits the native
        float/complex types are used; larger values switch every
        scalar to mpmath with that mantissa size.
    """

    r: int
    precision: int = 64

    def __post_init__(self):
        if self.r < 2:
            raise ValueError(f"r must be >= 2, got {self.r}")
        if self.precision < 24:
            raise ValueError(f"precision must be >= 24 bits, got {self.precision}")

    @property
    def native(self):
        return self.precision <= _NATIVE_BITS

    @property
    def colors(self):
        return range(self.r - 1)

    @property
    def A(self):
        """Primitive 4r-th root of unity exp(2*pi*i/(4r))."""
        return self._root_power(1)

    @property
    def q(self):
        """Deformation parameter q = A**2."""
        return self._root_power(2)

    def _root_power(self, k):
        """A**k, with the exponent reduced mod 4r."""
        k %= 4 * self.r
        if self.native:
            return cmath.exp(2j * math.pi * k / (4 * self.r))
        with mpmath.workprec(self.precision):
            return mpmath.expjpi(mpmath.mpf(2 * k) / (4 * self.r))

    def check_color(self, c):
        if not (0 <= c <= self.r - 2):
            raise ColorOutOfRange(f"color {c} not in 0..{self.r - 2} (r={self.r})")
        return c


@lru_cache(maxsize=None)
def _qint(n, r, prec):
    if n % r == 0:
        return 0.0 if prec <= _NATIVE_BITS else mpmath.mpf(0)
    if prec <= _NATIVE_BITS:
        return math.sin(n * math.pi / r) / math.sin(math.pi / r)
    with mpmath.workprec(prec):
        return mpmath.sinpi(mpmath.mpf(n) / r) / mpmath.sinpi(mpmath.mpf(1) / r)


@lru_cache(maxsize=None)
def _qfact(n, r, prec):
    if n == 0:
        return 1.0 if prec <= _NATIVE_BITS else mpmath.mpf(1)
    return _qfact(n - 1, r, prec) * _qint(n, r, prec)


def quantum_integer(n, p):
    """Quantum integer [n] = sin(n*pi/r)/sin(pi/r); zero iff r divides n."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    return _qint(n, p.r, p.precision)


def quantum_factorial(n, p):
    """Quantum factorial [n]! = [1][2]...[n], with [0]! = 1."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    return _qfact(n, p.r, p.precision)


def _qfact_net(n, r, prec):
    # Factorials inside admissible theta/tet nets never reach n >= r;
    # hitting the assert means an inadmissible label slipped through.
    assert 0 <= n < r, f"net factorial argument {n} out of range at r={r}"
    return _qfact(n, r, prec)


def quantum_dimension(c, p):
    """Loop value delta(c) = (-1)^c [c+1] of a color-c strand."""
    p.check_color(c)
    d = _qint(c + 1, p.r, p.precision)
    return -d if c % 2 else d


def is_admissible(a, b, c, p):
    """Fusion admissibility of the color triple (a, b, c).

    Even total, triangle inequalities, and the root-of-unity cutoff
    a+b+c <= 2r-4.  Symmetric in all three arguments.
    """
    for x in (a, b, c):
        p.check_color(x)
    if (a + b + c) % 2:
        return False
    if a + b + c > 2 * p.r - 4:
        return False
    return abs(a - b) <= c <= a + b


def admissible_triples(p):
    """All admissible triples (a, b, c) with a <= b <= c."""
    out = []
    for a in p.colors:
        for b in range(a, p.r - 1):
            for c in range(b, p.r - 1):
                if is_admissible(a, b, c, p):
                    out.append((a, b, c))
    return out


def channels(a, b, p):
    """Colors c with (a, b, c) admissible, ascending."""
    return [c for c in p.colors if is_admissible(a, b, c, p)]


@lru_cache(maxsize=None)
def _theta(a, b, c, r, prec):
    x = (a + b - c) // 2
    y = (b + c - a) // 2
    z = (c + a - b) // 2
    num = (
        _qfact_net(x + y + z + 1, r, prec)
        * _qfact_net(x, r, prec)
        * _qfact_net(y, r, prec)
        * _qfact_net(z, r, prec)
    )
    den = (
        _qfact_net(x + y, r, prec)
        * _qfact_net(y + z, r, prec)
        * _qfact_net(z + x, r, prec)
    )
    sign = -1 if (x + y + z) % 2 else 1
    return sign * num / den


def theta(a, b, c, p):
    """Theta-net value of the two-vertex graph with strands a, b, c.

    Fully symmetric; theta(a, a, 0) equals quantum_dimension(a).
    """
    if not is_admissible(a, b, c, p):
        raise NotAdmissible(f"({a},{b},{c}) is not admissible at r={p.r}")
    return _theta(a, b, c, p.r, p.precision)


def _tet_faces(a, b, e, c, d, f):
    # Vertices of the tetrahedral net: e joins (a,b,e) and (c,d,e),
    # f joins (a,d,f) and (b,c,f); opposite edge pairs (a,c),(b,d),(e,f).
    return ((a, b, e), (c, d, e), (a, d, f), (b, c, f))


@lru_cache(maxsize=None)
def _tet(a, b, e, c, d, f, r, prec):
    faces = _tet_faces(a, b, e, c, d, f)
    avals = [sum(face) // 2 for face in faces]
    bvals = [(b + d + e + f) // 2, (a + c + e + f) // 2, (a + b + c + d) // 2]
    lo = max(avals)
    hi = min(min(bvals), r - 2)
    interchange = 1.0 if prec <= _NATIVE_BITS else mpmath.mpf(1)
    for bv in bvals:
        for av in avals:
            interchange *= _qfact_net(bv - av, r, prec)
    edge = 1.0 if prec <= _NATIVE_BITS else mpmath.mpf(1)
    for x in (a, b, e, c, d, f):
        edge *= _qfact_net(x, r, prec)
    total = 0.0 if prec <= _NATIVE_BITS else mpmath.mpf(0)
    for s in range(lo, hi + 1):
        term = _qfact_net(s + 1, r, prec)
        for av in avals:
            term /= _qfact_net(s - av, r, prec)
        for bv in bvals:
            term /= _qfact_net(bv - s, r, prec)
        total += -term if s % 2 else term
    return (interchange / edge) * total


def tet(a, b, e, c, d, f, p):
    """Tetrahedral-net value with vertex triples (a,b,e), (c,d,e), (a,d,f), (b,c,f).

    Opposite strand pairs are (a,c), (b,d), (e,f).  The value is invariant
    under the full symmetry group of the tetrahedron acting on the labels.
    """
    for face in _tet_faces(a, b, e, c, d, f):
        if not is_admissible(*face, p):
            raise NotAdmissible(f"face {face} is not admissible at r={p.r}")
    return _tet(a, b, e, c, d, f, p.r, p.precision)


def fmove_coeff(a, b, c, d, e, f, p):
    """Recoupling coefficient for re-channeling an internal edge.

    The source edge e joins vertices (a,b,e) and (c,d,e); the target
    channel f joins (a,d,f) and (b,c,f).  Returns 0 when the target
    channel is inadmissible; raises NotAdmissible when the source
    configuration itself is invalid.
    """
    if not is_admissible(a, b, e, p):
        raise NotAdmissible(f"source vertex ({a},{b},{e}) is not admissible at r={p.r}")
    if not is_admissible(c, d, e, p):
        raise NotAdmissible(f"source vertex ({c},{d},{e}) is not admissible at r={p.r}")
    if not (is_admissible(a, d, f, p) and is_admissible(b, c, f, p)):
        return 0.0 if p.native else mpmath.mpf(0)
    return (
        _tet(a, b, e, c, d, f, p.r, p.precision)
        * quantum_dimension(f, p)
        / (_theta(a, d, f, p.r, p.precision) * _theta(b, c, f, p.r, p.precision))
    )


def fmove_table(p):
    """All nonzero recoupling coefficients, keyed (a, b, c, d, e, f)."""
    table = {}
    cols = list(p.colors)
    for a in cols:
        for b in cols:
            for c in cols:
                for d in cols:
                    for e in channels(a, b, p):
                        if not is_admissible(c, d, e, p):
                            continue
                        for f in channels(a, d, p):
                            if not is_admissible(b, c, f, p):
                                continue
                            table[(a, b, c, d, e, f)] = fmove_coeff(a, b, c, d, e, f, p)
    return table


def twist(c, p):
    """Framing twist mu(c) = (-1)^c A^(c^2+2c); unit modulus, mu(0) = 1."""
    p.check_color(c)
    w = p._root_power(c * c + 2 * c)
    return -w if c % 2 else w


def eta(p):
    """Normalization eta = (A^2 - A^-2)/(i*sqrt(2r)) = sqrt(2/r)*sin(pi/r)."""
    if p.native:
        return math.sqrt(2.0 / p.r) * math.sin(math.pi / p.r)
    with mpmath.workprec(p.precision):
        return mpmath.sqrt(mpmath.mpf(2) / p.r) * mpmath.sinpi(mpmath.mpf(1) / p.r)


def global_dim_sq(p):
    """Total quantum dimension squared, sum of delta(c)^2 = eta^-2."""
    total = 0.0 if p.native else mpmath.mpf(0)
    for c in p.colors:
        total += quantum_dimension(c, p) ** 2
    return total


def kappa(p):
    """Unit-modulus framing anomaly kappa = eta * sum_c delta(c)^2 mu(c).

    Uniquely makes the surgery normalization insensitive to framing
    changes: a +1-framed unknot evaluates to the same invariant as the
    empty surgery presentation.
    """
    total = 0.0 + 0.0j if p.native else mpmath.mpc(0)
    for c in p.colors:
        total += quantum_dimension(c, p) ** 2 * twist(c, p)
    return eta(p) * total

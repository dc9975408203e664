"""Exact-rational positive Grassmannian and polygon positive geometry.

Everything here is exact: matrices over Fraction, maximal minors by
fraction-free elimination, positivity predicates as exact sign tests,
and polygon canonical forms as rational functions.  Particle labels
are 1-based throughout (Pluecker subsets of {1..n}, bracket row
indices, triangulation triples), matching the usual cyclic-label
conventions for scattering data.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from qtopo.errors import ParseError, QtopoError

__all__ = [
    "RationalMatrix",
    "PluckerVector",
    "AmplituhedronPoint",
    "RankDeficient",
    "DimensionMismatch",
    "RankCollapse",
    "PointOnBoundary",
    "NotATriangulation",
    "pluecker",
    "is_totally_positive",
    "is_totally_nonneg",
    "amplituhedron_point",
    "moment_map",
    "hypersimplex_contains",
    "hypersimplex_vertices",
    "bracket",
    "polygon_canonical_form",
    "polygon_triangulations",
    "fan_triangulation",
    "check_plucker_relations",
    "moment_curve",
    "random_tnn_matrix",
    "amplituhedron_dimension_probe",
]


class RankDeficient(QtopoError):
    pass


class DimensionMismatch(QtopoError):
    pass


class RankCollapse(QtopoError):
    pass


class PointOnBoundary(QtopoError):
    pass


class NotATriangulation(QtopoError):
    pass


class RationalMatrix:
    """Immutable matrix of exact rationals."""

    __slots__ = ("rows",)

    def __init__(self, rows):
        self.rows = tuple(tuple(Fraction(x) for x in row) for row in rows)
        if not self.rows:
            raise ValueError("empty matrix")
        w = len(self.rows[0])
        if any(len(row) != w for row in self.rows):
            raise ValueError("ragged rows")

    @classmethod
    def parse(cls, text):
        """Comma-separated rationals ('p/q' tokens allowed), one row per line."""
        rows = []
        for ln, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            row = []
            for col, tok in enumerate(line.split(","), start=1):
                tok = tok.strip()
                try:
                    row.append(Fraction(tok))
                except (ValueError, ZeroDivisionError):
                    raise ParseError(f"bad rational {tok!r}", line=ln, column=col) from None
            rows.append(row)
        if not rows:
            raise ParseError("no rows")
        try:
            return cls(rows)
        except ValueError as exc:
            raise ParseError(str(exc)) from None

    def serialize(self):
        return "\n".join(",".join(str(x) for x in row) for row in self.rows) + "\n"

    @property
    def nrows(self):
        return len(self.rows)

    @property
    def ncols(self):
        return len(self.rows[0])

    @property
    def shape(self):
        return (self.nrows, self.ncols)

    def row(self, i):
        return self.rows[i]

    def transpose(self):
        return RationalMatrix(list(zip(*self.rows)))

    def __matmul__(self, other):
        if self.ncols != other.nrows:
            raise DimensionMismatch(f"{self.shape} @ {other.shape}")
        bt = list(zip(*other.rows))
        return RationalMatrix(
            [[sum(a * b for a, b in zip(row, col)) for col in bt] for row in self.rows]
        )

    def __eq__(self, other):
        return isinstance(other, RationalMatrix) and self.rows == other.rows

    def __hash__(self):
        return hash(self.rows)

    def __repr__(self):
        return f"RationalMatrix({[[str(x) for x in row] for row in self.rows]})"

    def det(self):
        if self.nrows != self.ncols:
            raise DimensionMismatch("determinant of a non-square matrix")
        return _det(self.rows)

    def rank(self):
        m = [list(row) for row in self.rows]
        nr, nc = self.nrows, self.ncols
        rank = 0
        for col in range(nc):
            piv = next((i for i in range(rank, nr) if m[i][col] != 0), None)
            if piv is None:
                continue
            m[rank], m[piv] = m[piv], m[rank]
            inv = 1 / m[rank][col]
            for i in range(nr):
                if i != rank and m[i][col] != 0:
                    factor = m[i][col] * inv
                    m[i] = [a - factor * b for a, b in zip(m[i], m[rank])]
            rank += 1
            if rank == nr:
                break
        return rank

    def float_array(self):
        return np.array([[float(x) for x in row] for row in self.rows], dtype=float)


def _det(rows):
    """Bareiss fraction-free determinant of a tuple-of-tuples."""
    n = len(rows)
    if n == 1:
        return rows[0][0]
    if n == 2:
        return rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0]
    m = [list(r) for r in rows]
    sign = 1
    prev = Fraction(1)
    for k in range(n - 1):
        if m[k][k] == 0:
            piv = next((i for i in range(k + 1, n) if m[i][k] != 0), None)
            if piv is None:
                return Fraction(0)
            m[k], m[piv] = m[piv], m[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) / prev
        prev = m[k][k]
    return sign * m[n - 1][n - 1]


@dataclass(frozen=True)
class PluckerVector:
    """Maximal minors of a k x n matrix, keyed by sorted 1-based k-subsets."""

    k: int
    n: int
    coords: dict

    def coord(self, subset):
        """Signed coordinate for an arbitrary index tuple (0 on repeats)."""
        if len(set(subset)) != len(subset):
            return Fraction(0)
        order = tuple(sorted(subset))
        sign = _sort_sign(subset)
        return sign * self.coords[order]

    def items(self):
        return sorted(self.coords.items())

    def is_nonnegative(self):
        return all(v >= 0 for v in self.coords.values())


def _sort_sign(seq):
    sign = 1
    lst = list(seq)
    for i in range(len(lst)):
        for j in range(len(lst) - 1 - i):
            if lst[j] > lst[j + 1]:
                lst[j], lst[j + 1] = lst[j + 1], lst[j]
                sign = -sign
    return sign


def pluecker(C):
    """All maximal minors of C (k x n, k <= n), lexicographic subset order."""
    k, n = C.shape
    if k > n:
        raise DimensionMismatch(f"need k <= n, got {C.shape}")
    if C.rank() < k:
        raise RankDeficient("matrix does not have full row rank")
    coords = {}
    for subset in itertools.combinations(range(1, n + 1), k):
        sub = tuple(tuple(C.rows[i][j - 1] for j in subset) for i in range(k))
        coords[subset] = _det(sub)
    return PluckerVector(k=k, n=n, coords=coords)


def _maximal_minors(M):
    nr, nc = M.shape
    if nr >= nc:
        for rows in itertools.combinations(range(nr), nc):
            yield rows, _det(tuple(M.rows[i] for i in rows))
    else:
        cols = list(range(nc))
        for sel in itertools.combinations(cols, nr):
            yield sel, _det(tuple(tuple(M.rows[i][j] for j in sel) for i in range(nr)))


def is_totally_positive(Z):
    """Exact test: all ordered maximal minors strictly positive."""
    return all(d > 0 for _, d in _maximal_minors(Z))


def is_totally_nonneg(C):
    """Exact test: all ordered maximal minors nonnegative."""
    return all(d >= 0 for _, d in _maximal_minors(C))


@dataclass(frozen=True)
class AmplituhedronPoint:
    """A k-plane Y in (k+m)-space, represented by a full-rank matrix."""

    Y: RationalMatrix

    @property
    def k(self):
        return self.Y.nrows

    def row_space_equals(self, other):
        stacked = RationalMatrix(self.Y.rows + other.Y.rows)
        return stacked.rank() == self.k == other.k


def amplituhedron_point(C, Z):
    """Y = C Z, the image of a Grassmannian point under the external data."""
    if C.ncols != Z.nrows:
        raise DimensionMismatch(f"C is {C.shape}, Z is {Z.shape}")
    if C.rank() < C.nrows:
        raise RankDeficient("C does not have full row rank")
    Y = C @ Z
    if Y.rank() < C.nrows:
        raise RankCollapse("image plane has deficient rank")
    return AmplituhedronPoint(Y=Y)


def moment_map(C):
    """Squared-Pluecker moment map; lands exactly in the hypersimplex.

    mu_i = sum over k-subsets J containing i of p_J^2, normalized by
    the sum over all J; coordinates are in [0,1] and add up to k.
    """
    pv = pluecker(C)
    total = sum(v * v for v in pv.coords.values())
    if total == 0:
        raise RankDeficient("all maximal minors vanish")
    out = []
    for i in range(1, pv.n + 1):
        num = sum(v * v for J, v in pv.coords.items() if i in J)
        out.append(num / total)
    return tuple(out)


def hypersimplex_contains(x, k, n):
    """Exact membership of x in the hypersimplex: 0 <= x_i <= 1, sum = k."""
    if len(x) != n:
        return False
    xs = [Fraction(v) for v in x]
    return all(0 <= v <= 1 for v in xs) and sum(xs) == k


def hypersimplex_vertices(k, n):
    """All 0/1 vectors with exactly k ones (the C(n,k) vertices)."""
    out = []
    for ones in itertools.combinations(range(n), k):
        out.append(tuple(Fraction(1) if i in ones else Fraction(0) for i in range(n)))
    return out


def bracket(Y, Z, idx):
    """Determinant of Y's rows stacked over the 1-based Z rows idx."""
    if isinstance(Y, AmplituhedronPoint):
        Y = Y.Y
    width = Y.ncols
    if Z.ncols != width or Y.nrows + len(idx) != width:
        raise DimensionMismatch(
            f"need k + |idx| = k + m: Y {Y.shape}, Z {Z.shape}, idx {tuple(idx)}"
        )
    rows = Y.rows + tuple(Z.rows[i - 1] for i in idx)
    return _det(rows)


# -- polygon canonical forms ---------------------------------------------------


def _validate_triangulation(n, triangles):
    if n < 3:
        raise NotATriangulation(f"need n >= 3, got {n}")
    tris = [tuple(t) for t in triangles]
    if len(tris) != n - 2:
        raise NotATriangulation(f"{len(tris)} triangles for an {n}-gon, want {n - 2}")
    edge_count = {}
    for t in tris:
        if len(t) != 3 or len(set(t)) != 3 or not all(1 <= v <= n for v in t):
            raise NotATriangulation(f"bad triangle {t}")
        a, b, c = sorted(t)
        for e in ((a, b), (b, c), (a, c)):
            edge_count[e] = edge_count.get(e, 0) + 1
    sides = {(i, i + 1) for i in range(1, n)} | {(1, n)}
    diagonals = []
    for e, cnt in edge_count.items():
        if e in sides:
            if cnt != 1:
                raise NotATriangulation(f"side {e} used {cnt} times")
        else:
            if cnt != 2:
                raise NotATriangulation(f"diagonal {e} used {cnt} times")
            diagonals.append(e)
    if sides - set(edge_count):
        raise NotATriangulation(f"missing sides {sorted(sides - set(edge_count))}")
    for (a, b), (c, d) in itertools.combinations(diagonals, 2):
        if len({a, b, c, d}) < 4:
            continue  # chords sharing an endpoint cannot cross
        # distinct chords cross iff exactly one of c,d lies strictly between a and b
        if (a < c < b) != (a < d < b):
            raise NotATriangulation(f"diagonals {(a, b)} and {(c, d)} cross")
    return tris


def polygon_canonical_form(Z, triangulation, Y):
    """Canonical rational function of the convex n-gon at the point Y.

    Sum over triangulation triangles (a,b,c) of
    <abc>^2 / (<Yab><Ybc><Yca>), exact; the value is independent of the
    choice of triangulation.
    """
    if isinstance(Y, AmplituhedronPoint):
        Y = Y.Y
    n = Z.nrows
    if Z.ncols != 3 or Y.shape != (1, 3):
        raise DimensionMismatch(f"polygon form needs Z n x 3 and Y 1 x 3, got {Z.shape}, {Y.shape}")
    tris = _validate_triangulation(n, triangulation)
    total = Fraction(0)
    for a, b, c in tris:
        num = _det((Z.rows[a - 1], Z.rows[b - 1], Z.rows[c - 1])) ** 2
        den = Fraction(1)
        for i, j in ((a, b), (b, c), (c, a)):
            d = _det((Y.rows[0], Z.rows[i - 1], Z.rows[j - 1]))
            if d == 0:
                raise PointOnBoundary(f"bracket <Y {i} {j}> vanishes")
            den *= d
        total += num / den
    return total


def fan_triangulation(n, apex=1):
    """The fan of the n-gon from the given vertex."""
    rest = [v for v in range(1, n + 1) if v != apex]
    return [(apex, rest[i], rest[i + 1]) for i in range(n - 2)]


def polygon_triangulations(n):
    """All triangulations of the convex n-gon (Catalan(n-2) of them)."""

    def rec(vs):
        if len(vs) == 2:
            return [[]]
        if len(vs) == 3:
            return [[tuple(vs)]]
        out = []
        first, last = vs[0], vs[-1]
        for idx in range(1, len(vs) - 1):
            mid = vs[idx]
            for left in rec(vs[: idx + 1]):
                for right in rec(vs[idx:]):
                    out.append(left + [(first, mid, last)] + right)
        return out

    return [tuple(t) for t in rec(list(range(1, n + 1)))]


# -- relations, generators, probes ---------------------------------------------


def check_plucker_relations(pv):
    """Exact Grassmann-Pluecker three-term (exchange) relations.

    For every (k-1)-subset S and (k+1)-subset T of {1..n}:
    sum over t in T of (-1)^pos * p(S + t) * p(T - t) = 0.
    """
    if pv.k == 0:
        return True
    labels = range(1, pv.n + 1)
    for S in itertools.combinations(labels, pv.k - 1):
        for T in itertools.combinations(labels, pv.k + 1):
            total = Fraction(0)
            for pos, t in enumerate(T):
                rest = T[:pos] + T[pos + 1 :]
                term = pv.coord(S + (t,)) * pv.coord(rest)
                total += -term if pos % 2 else term
            if total != 0:
                return False
    return True


def moment_curve(n, dim, ts=None):
    """Vandermonde external data: row i is (1, t_i, ..., t_i^(dim-1)).

    Totally positive for any increasing positive t's.
    """
    if ts is None:
        ts = list(range(1, n + 1))
    if len(ts) != n:
        raise DimensionMismatch(f"need {n} parameters, got {len(ts)}")
    return RationalMatrix([[Fraction(t) ** j for j in range(dim)] for t in ts])


def random_tnn_matrix(k, n, rng, strict=False):
    """Random totally nonnegative k x n matrix of full row rank.

    Built as the first k rows of a product of elementary nonnegative
    bidiagonal matrices and a positive diagonal; such products are
    totally nonnegative and invertible.  With strict=True the factor
    parameters are kept positive, giving generic interior points.
    """
    lo = 1 if strict else 0
    m = [[Fraction(1 if i == j else 0) for j in range(n)] for i in range(n)]

    def apply_elementary(i, j, t):
        # right-multiply by I + t E_{ij}: col_j += t * col_i
        for row in m:
            row[j] += t * row[i]

    for _ in range(2):
        for i in range(n - 1):
            apply_elementary(i, i + 1, Fraction(rng.randint(lo, 4), rng.randint(1, 3)))
        for i in range(n - 1):
            apply_elementary(i + 1, i, Fraction(rng.randint(lo, 4), rng.randint(1, 3)))
    for i in range(n):
        d = Fraction(rng.randint(1, 4))
        for row in m:
            row[i] *= d
    return RationalMatrix(m[:k])


def amplituhedron_dimension_probe(k, m, n, seed=0, samples=3, step=1e-6, tol=1e-4):
    """Observed rank of the differential of C -> Y = CZ between charts.

    Numerical finite-difference probe at a few random interior points
    with moment-curve external data; returns the largest observed rank
    without asserting a theoretical value.
    """
    import random

    if k + m > n:
        raise DimensionMismatch("need k + m <= n")
    rng = random.Random(seed)
    Z = moment_curve(n, k + m).float_array()
    best = 0
    for _ in range(samples):
        C0 = random_tnn_matrix(k, n, rng, strict=True).float_array()
        X0 = np.linalg.solve(C0[:, :k], C0[:, k:])  # chart coordinates

        def chart_image(X):
            C = np.hstack([np.eye(k), X])
            Y = C @ Z
            return np.linalg.solve(Y[:, :k], Y[:, k:]).ravel()

        base = chart_image(X0)
        cols = []
        for idx in range(X0.size):
            dX = np.zeros_like(X0)
            dX.flat[idx] = step
            cols.append((chart_image(X0 + dX) - chart_image(X0 - dX)) / (2 * step))
        jac = np.stack(cols, axis=1)
        svals = np.linalg.svd(jac, compute_uv=False)
        best = max(best, int(np.sum(svals > tol * max(1.0, svals[0]))))
    return best

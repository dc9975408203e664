"""Glued-tetrahedra complexes, admissible-coloring state sums, Pachner
moves, surface products, and the cylinder (code) operator.

Tetrahedra have corners 0..3; face f is the triangle opposite corner f.
A gluing identifies two faces through a corner bijection, stored as a
full permutation of {0,1,2,3} sending the source face corners onto the
target face corners (and the source face index to the target face
index).  Face-pairing pseudo-triangulations are first-class inputs:
distinct faces of the same tetrahedron may be glued, and derived
vertex/edge classes may be wildly identified, as long as every edge
class has a consistent cyclic link.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import mpmath
import numpy as np

from qtopo import recoupling as rc
from qtopo._statesum import StateSumProblem, sweep, sweep_matrix
from qtopo.errors import ParseError, QtopoError

__all__ = [
    "Triangulation",
    "SurfaceTriangulation",
    "EdgeColoring",
    "TVCodeOperator",
    "MalformedGluing",
    "NonInvolutiveGluing",
    "OrientationMismatch",
    "NotClosed",
    "MoveNotApplicable",
    "boundary_4_simplex",
    "count_admissible_colorings",
    "tv_invariant",
    "pachner_23",
    "pachner_14",
    "prism",
    "surface_times_circle",
    "boundary_components",
    "tv_boundary_operator",
    "parse_triangulation",
    "serialize_triangulation",
    "parse_surface",
    "serialize_surface",
]

FACE_CORNERS = {f: tuple(c for c in range(4) if c != f) for f in range(4)}
EDGE_PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
_CORNER_LETTERS = "abcd"


class MalformedGluing(QtopoError):
    pass


class NonInvolutiveGluing(QtopoError):
    pass


class OrientationMismatch(QtopoError):
    pass


class NotClosed(QtopoError):
    pass


class MoveNotApplicable(QtopoError):
    pass


def _perm_inverse(p):
    inv = [0] * len(p)
    for i, x in enumerate(p):
        inv[x] = i
    return tuple(inv)


def _perm_sign(p):
    sign = 1
    p = list(p)
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            sign = -sign
    return sign


class _UnionFind:
    def __init__(self):
        self.parent = {}

    def find(self, x):
        parent = self.parent
        if x not in parent:
            parent[x] = x
            return x
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, x, y):
        rx, ry = self.find(x), self.find(y)
        if rx != ry:
            # keep the smaller representative for deterministic class ids
            if ry < rx:
                rx, ry = ry, rx
            self.parent[ry] = rx

    def classes(self, keys):
        by_root = {}
        for k in keys:
            by_root.setdefault(self.find(k), []).append(k)
        ordered = sorted(by_root.values(), key=lambda ms: min(ms))
        index = {}
        for i, members in enumerate(ordered):
            for m in members:
                index[m] = i
        return index, [sorted(ms) for ms in ordered]


class Triangulation:
    """A closed or bounded glued-tetrahedra complex with derived classes."""

    def __init__(self, ntets, pairs, oriented=False):
        if ntets < 1:
            raise MalformedGluing("need at least one tetrahedron")
        self.ntets = ntets
        self.oriented = oriented
        self.gluings = {}
        for (t1, f1), (t2, f2), perm in pairs:
            self._add_gluing(t1, f1, t2, f2, tuple(perm))
        self._derive()
        self._check_edge_links()
        if not self.boundary_faces and self.euler_characteristic != 0:
            raise MalformedGluing(
                f"closed complex has V-E+F-T = {self.euler_characteristic}, want 0"
            )
        if oriented:
            self._check_orientable()

    # -- construction ------------------------------------------------------

    @classmethod
    def build(cls, ntets, glue_specs, oriented=False):
        """Build from gluing descriptions.

        Each spec is (t1, f1, t2, f2, code) where code is a 3-letter
        word over 'abcd' listing the images (corners of t2) of the
        sorted corners of face f1 of t1.
        """
        pairs = []
        for spec in glue_specs:
            t1, f1, t2, f2, code = spec
            pairs.append(((t1, f1), (t2, f2), _perm_from_code(t1, f1, t2, f2, code)))
        return cls(ntets, pairs, oriented=oriented)

    def _add_gluing(self, t1, f1, t2, f2, perm):
        for t, f in ((t1, f1), (t2, f2)):
            if not (0 <= t < self.ntets and 0 <= f < 4):
                raise MalformedGluing(f"face ({t},{f}) out of range")
        if (t1, f1) == (t2, f2):
            raise NonInvolutiveGluing(f"face ({t1},{f1}) glued to itself")
        if sorted(perm) != [0, 1, 2, 3] or perm[f1] != f2:
            raise MalformedGluing(f"invalid corner bijection {perm} for ({t1},{f1})->({t2},{f2})")
        inv = _perm_inverse(perm)
        for slot, entry in (((t1, f1), (t2, f2, perm)), ((t2, f2), (t1, f1, inv))):
            existing = self.gluings.get(slot)
            if existing is not None and existing != entry:
                raise NonInvolutiveGluing(f"face {slot} glued twice")
            self.gluings[slot] = entry

    def gluing_pairs(self):
        """Each gluing once, from its lexicographically smaller slot."""
        out = []
        for (t, f), (t2, f2, perm) in sorted(self.gluings.items()):
            if (t, f) <= (t2, f2):
                out.append(((t, f), (t2, f2), perm))
        return out

    def _derive(self):
        uf_v, uf_e, uf_f = _UnionFind(), _UnionFind(), _UnionFind()
        for t in range(self.ntets):
            for c in range(4):
                uf_v.find((t, c))
            for pair in EDGE_PAIRS:
                uf_e.find((t, pair))
            for f in range(4):
                uf_f.find((t, f))
        for (t, f), (t2, f2, perm) in self.gluings.items():
            uf_f.union((t, f), (t2, f2))
            for c in FACE_CORNERS[f]:
                uf_v.union((t, c), (t2, perm[c]))
            for i, j in ((x, y) for x in FACE_CORNERS[f] for y in FACE_CORNERS[f] if x < y):
                img = tuple(sorted((perm[i], perm[j])))
                uf_e.union((t, (i, j)), (t2, img))
        self.vertex_class, self.vertex_members = uf_v.classes(
            [(t, c) for t in range(self.ntets) for c in range(4)]
        )
        self.edge_class, self.edge_members = uf_e.classes(
            [(t, pair) for t in range(self.ntets) for pair in EDGE_PAIRS]
        )
        self.triangle_class, self.triangle_members = uf_f.classes(
            [(t, f) for t in range(self.ntets) for f in range(4)]
        )
        self.boundary_faces = sorted(
            (t, f) for t in range(self.ntets) for f in range(4) if (t, f) not in self.gluings
        )
        self.nvertices = len(self.vertex_members)
        self.nedges = len(self.edge_members)
        self.ntriangles = len(self.triangle_members)
        bf = set(self.boundary_faces)
        self.boundary_triangle_classes = {self.triangle_class[s] for s in bf}
        self.boundary_edge_classes = {
            self.edge_class[(t, (i, j))]
            for (t, f) in bf
            for i in FACE_CORNERS[f]
            for j in FACE_CORNERS[f]
            if i < j
        }
        self.boundary_vertex_classes = {
            self.vertex_class[(t, c)] for (t, f) in bf for c in FACE_CORNERS[f]
        }

    @property
    def is_closed(self):
        return not self.boundary_faces

    @property
    def euler_characteristic(self):
        return self.nvertices - self.nedges + self.ntriangles - self.ntets

    def triangle_edge_classes(self, slot):
        """Edge classes of a triangle slot (t, f), in corner-pair order."""
        t, f = slot
        x, y, z = FACE_CORNERS[f]
        return (
            self.edge_class[(t, (x, y))],
            self.edge_class[(t, (x, z))],
            self.edge_class[(t, (y, z))],
        )

    def tet_edge_classes(self, t):
        """Edge classes of tet t as (c01, c02, c03, c12, c13, c23)."""
        return tuple(self.edge_class[(t, pair)] for pair in EDGE_PAIRS)

    # -- validity ----------------------------------------------------------

    def _check_edge_links(self):
        for members in self.edge_members:
            rep_t, rep_pair = members[0]
            direction = {}
            direction[(rep_t, rep_pair)] = rep_pair
            others = [c for c in range(4) if c not in rep_pair]
            boundary_hits = 0
            for start_exit in others:
                t, (i, j), exit_corner = rep_t, rep_pair, start_exit
                while True:
                    glu = self.gluings.get((t, exit_corner))
                    if glu is None:
                        boundary_hits += 1
                        break
                    t2, f2, perm = glu
                    i2, j2 = perm[i], perm[j]
                    key = (t2, tuple(sorted((i2, j2))))
                    if key in direction:
                        if direction[key] != (i2, j2):
                            raise MalformedGluing(
                                f"edge {key} is identified with itself reversed"
                            )
                        break  # closed up (or rejoined the seen arc)
                    direction[key] = (i2, j2)
                    rest = [c for c in range(4) if c not in (i2, j2, f2)]
                    t, i, j, exit_corner = t2, i2, j2, rest[0]
                if boundary_hits == 0:
                    break  # interior edge: one direction suffices
            if len(direction) != len(members):
                raise MalformedGluing(
                    f"edge class of {members[0]} has a disconnected link"
                )

    def _check_orientable(self):
        sign = {}
        for t0 in range(self.ntets):
            if t0 in sign:
                continue
            sign[t0] = 1
            stack = [t0]
            while stack:
                t = stack.pop()
                for f in range(4):
                    glu = self.gluings.get((t, f))
                    if glu is None:
                        continue
                    t2, _, perm = glu
                    want = -sign[t] * _perm_sign(perm)
                    if t2 not in sign:
                        sign[t2] = want
                        stack.append(t2)
                    elif sign[t2] != want:
                        raise OrientationMismatch(
                            f"gluing ({t},{f})->({t2},...) breaks orientability"
                        )
        self.orientation = sign


def _perm_from_code(t1, f1, t2, f2, code):
    if len(code) != 3 or any(ch not in _CORNER_LETTERS for ch in code):
        raise MalformedGluing(f"bad corner code {code!r}")
    images = [_CORNER_LETTERS.index(ch) for ch in code]
    if len(set(images)) != 3 or f2 in images:
        raise MalformedGluing(f"corner code {code!r} does not map onto face {f2}")
    perm = [None] * 4
    for src, dst in zip(FACE_CORNERS[f1], images):
        perm[src] = dst
    perm[f1] = f2
    return tuple(perm)


def _code_from_perm(f1, perm):
    return "".join(_CORNER_LETTERS[perm[c]] for c in FACE_CORNERS[f1])


def boundary_4_simplex():
    """The boundary of the 4-simplex: five tetrahedra, all faces paired."""
    verts = [tuple(v for v in range(5) if v != i) for i in range(5)]
    pairs = []
    for i in range(5):
        for j in range(i + 1, 5):
            shared = [v for v in range(5) if v not in (i, j)]
            fi = verts[i].index(j)
            fj = verts[j].index(i)
            perm = [None] * 4
            for v in shared:
                perm[verts[i].index(v)] = verts[j].index(v)
            perm[fi] = fj
            pairs.append(((i, fi), (j, fj), tuple(perm)))
    return Triangulation(5, pairs, oriented=True)


# -- state sums --------------------------------------------------------------


@dataclass(frozen=True)
class EdgeColoring:
    """An assignment of a color to every edge class, in class-id order."""

    colors: tuple

    def color_of(self, edge_class):
        return self.colors[edge_class]

    def is_admissible(self, tri, p):
        for members in tri.triangle_members:
            e1, e2, e3 = tri.triangle_edge_classes(members[0])
            if not rc.is_admissible(self.colors[e1], self.colors[e2], self.colors[e3], p):
                return False
        return True


def _elimination_order(tri):
    degree = [0] * tri.nedges
    for members in tri.triangle_members:
        for e in tri.triangle_edge_classes(members[0]):
            degree[e] += 1
    order = sorted(range(tri.nedges), key=lambda e: (-degree[e], e))
    pos = {e: i for i, e in enumerate(order)}
    return order, pos


def _triangle_table(p, weight):
    """table[c1][c2][c3] -> weight(c1,c2,c3) if admissible else None."""
    m = p.r - 1
    table = [[[None] * m for _ in range(m)] for _ in range(m)]
    for a in range(m):
        for b in range(m):
            for c in range(m):
                if rc.is_admissible(a, b, c, p):
                    table[a][b][c] = weight(a, b, c)
    return table


def _build_problem(tri, p, mode, threads_hint=None):
    """mode: 'count' (unit weights), 'tv' (real closed weights),
    'bounded' (complex weights with half-weight boundary simplices)."""
    order, pos = _elimination_order(tri)
    m = p.r - 1
    unit = 1.0
    if mode == "tv" and not p.native:
        unit = mpmath.mpf(1)
    if mode == "bounded":
        unit = 1.0 + 0.0j

    if mode == "count":
        var_factors = [[unit] * m for _ in order]
    else:
        var_factors = []
        for e in order:
            facs = []
            for c in range(m):
                d = rc.quantum_dimension(c, p)
                if mode == "bounded" and e in tri.boundary_edge_classes:
                    facs.append(cmath.sqrt(complex(d)))
                else:
                    facs.append(d if mode == "tv" else complex(d))
            var_factors.append(facs)

    tri_checks = [[] for _ in order]
    table_cache = {}
    for fid, members in enumerate(tri.triangle_members):
        e1, e2, e3 = tri.triangle_edge_classes(members[0])
        positions = sorted((pos[e1], pos[e2], pos[e3]))
        if mode == "count":
            kind = "count"
        elif mode == "bounded" and fid in tri.boundary_triangle_classes:
            kind = "half"
        else:
            kind = "full"
        if kind not in table_cache:
            if kind == "count":
                table_cache[kind] = _triangle_table(p, lambda a, b, c: unit)
            elif kind == "full":
                if mode == "tv":
                    table_cache[kind] = _triangle_table(p, lambda a, b, c: 1.0 / rc.theta(a, b, c, p))
                else:
                    table_cache[kind] = _triangle_table(
                        p, lambda a, b, c: 1.0 / complex(rc.theta(a, b, c, p))
                    )
            else:
                table_cache[kind] = _triangle_table(
                    p, lambda a, b, c: 1.0 / cmath.sqrt(complex(rc.theta(a, b, c, p)))
                )
        tri_checks[positions[2]].append((positions[0], positions[1], table_cache[kind]))

    tet_checks = [[] for _ in order]
    if mode != "count":
        tet_cache = {}
        r, prec = p.r, p.precision

        if mode == "tv":
            def tet_fn(a, b, e, c, d, f):
                return rc._tet(a, b, e, c, d, f, r, prec)
        else:
            def tet_fn(a, b, e, c, d, f):
                return complex(rc._tet(a, b, e, c, d, f, r, prec))

        for t in range(tri.ntets):
            c01, c02, c03, c12, c13, c23 = tri.tet_edge_classes(t)
            # (a,b,e,c,d,f) with faces (a,b,e)={0,1,3}, (c,d,e)={0,2,3},
            # (a,d,f)={0,1,2}, (b,c,f)={1,2,3}
            arg_edges = (c01, c13, c03, c23, c02, c12)
            arg_positions = tuple(pos[e] for e in arg_edges)
            completion = max(arg_positions)
            tet_checks[completion].append((arg_positions, tet_cache, tet_fn))

    return StateSumProblem(m, var_factors, tri_checks, tet_checks, unit), order, pos


def count_admissible_colorings(tri, p, threads=1):
    """Exact number of admissible edge colorings (boundary colorings free)."""
    problem, _, _ = _build_problem(tri, p, "count")
    return sweep(problem, threads=threads).count


def coloring_census(tri, p, threads=1):
    """(count, visits) of the admissibility backtracking sweep."""
    problem, _, _ = _build_problem(tri, p, "count")
    res = sweep(problem, threads=threads)
    return res.count, res.visits


def tv_invariant(tri, p, threads=1):
    """State-sum invariant of a closed complex.

    Sum over admissible colorings of
    eta^(2V) * prod_edges delta * prod_triangles theta^-1 * prod_tets tet.
    """
    if not tri.is_closed:
        raise NotClosed(f"{len(tri.boundary_faces)} unglued faces")
    problem, _, _ = _build_problem(tri, p, "tv")
    res = sweep(problem, threads=threads)
    return rc.eta(p) ** (2 * tri.nvertices) * res.total


# -- Pachner moves ------------------------------------------------------------


def _rewrite_external(tri, removed, slot_map, pairs):
    for (sa, sb, sigma) in tri.gluing_pairs():
        if sa in removed or sb in removed:
            continue
        ta, fa, ca = slot_map[sa]
        tb, fb, cb = slot_map[sb]
        inv = _perm_inverse(ca)
        newperm = tuple(cb[sigma[inv[x]]] for x in range(4))
        pairs.append(((ta, fa), (tb, fb), newperm))


def pachner_23(tri, triangle_class_id):
    """Replace two tetrahedra sharing an interior triangle by three
    around a new edge.  Tet count +1, vertex count unchanged."""
    members = tri.triangle_members[triangle_class_id]
    if len(members) != 2:
        raise MoveNotApplicable("triangle is on the boundary")
    (t1, f1), (t2, f2) = members
    if t1 == t2:
        raise MoveNotApplicable("both sides of the triangle lie in one tetrahedron")
    perm = tri.gluings[(t1, f1)][2]
    s = FACE_CORNERS[f1]
    survivors = [t for t in range(tri.ntets) if t not in (t1, t2)]
    newid = {t: i for i, t in enumerate(survivors)}
    base = len(survivors)
    comp = {0: (1, 2), 1: (0, 2), 2: (0, 1)}

    def pos_in(i, m):
        pq = comp[i]
        return 2 if m == pq[0] else 3

    pairs = []
    for i in range(3):
        for j in range(i + 1, 3):
            k = 3 - i - j
            fa, fb = pos_in(i, j), pos_in(j, i)
            q = [None] * 4
            q[0], q[1] = 0, 1
            q[pos_in(i, k)] = pos_in(j, k)
            q[fa] = fb
            pairs.append(((base + i, fa), (base + j, fb), tuple(q)))

    slot_map = {(t, f): (newid[t], f, (0, 1, 2, 3)) for t in survivors for f in range(4)}
    for c in range(3):
        cmap1 = [None] * 4
        cmap1[f1] = 0
        for m in range(3):
            if m != c:
                cmap1[s[m]] = pos_in(c, m)
        cmap1[s[c]] = 1
        slot_map[(t1, s[c])] = (base + c, 1, tuple(cmap1))
        cmap2 = [None] * 4
        cmap2[f2] = 1
        for m in range(3):
            if m != c:
                cmap2[perm[s[m]]] = pos_in(c, m)
        cmap2[perm[s[c]]] = 0
        slot_map[(t2, perm[s[c]])] = (base + c, 0, tuple(cmap2))

    _rewrite_external(tri, {(t1, f1), (t2, f2)}, slot_map, pairs)
    return Triangulation(base + 3, pairs, oriented=tri.oriented)


def pachner_14(tri, tet_id):
    """Cone a tetrahedron from a new interior vertex: four tetrahedra
    replace one.  Tet count +3, vertex count +1."""
    if not (0 <= tet_id < tri.ntets):
        raise MoveNotApplicable(f"no tetrahedron {tet_id}")
    survivors = [t for t in range(tri.ntets) if t != tet_id]
    newid = {t: i for i, t in enumerate(survivors)}
    base = len(survivors)
    pairs = []
    for i in range(4):
        for j in range(i + 1, 4):
            q = list(range(4))
            q[i], q[j] = j, i
            pairs.append(((base + i, j), (base + j, i), tuple(q)))
    slot_map = {(t, f): (newid[t], f, (0, 1, 2, 3)) for t in survivors for f in range(4)}
    for f in range(4):
        slot_map[(tet_id, f)] = (base + f, f, (0, 1, 2, 3))
    _rewrite_external(tri, set(), slot_map, pairs)
    return Triangulation(base + 4, pairs, oriented=tri.oriented)


def interior_23_triangles(tri):
    """Triangle class ids where a 2-3 move applies."""
    out = []
    for fid, members in enumerate(tri.triangle_members):
        if len(members) == 2 and members[0][0] != members[1][0]:
            out.append(fid)
    return out


# -- text format --------------------------------------------------------------


def parse_triangulation(text):
    """Parse the gluing format: ``tet <id>`` and
    ``glue <t1> <f1> <t2> <f2> <code>`` lines, optional ``oriented``."""
    ntets = 0
    seen = set()
    specs = []
    oriented = False
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "tet":
                tid = int(parts[1])
                if tid in seen:
                    raise ParseError(f"duplicate tet id {tid}", line=ln)
                seen.add(tid)
                ntets = max(ntets, tid + 1)
            elif parts[0] == "glue":
                t1, f1, t2, f2 = (int(x) for x in parts[1:5])
                specs.append((t1, f1, t2, f2, parts[5]))
            elif parts[0] == "oriented":
                oriented = True
            else:
                raise ParseError(f"unknown directive {parts[0]!r}", line=ln, column=1)
        except ParseError:
            raise
        except (ValueError, IndexError):
            raise ParseError(f"malformed line {raw!r}", line=ln) from None
    if seen != set(range(ntets)):
        raise ParseError(f"tet ids must form 0..{ntets - 1}")
    try:
        return Triangulation.build(ntets, specs, oriented=oriented)
    except QtopoError:
        raise


def serialize_triangulation(tri):
    lines = [f"tet {t}" for t in range(tri.ntets)]
    if tri.oriented:
        lines.append("oriented")
    for (t1, f1), (t2, f2), perm in tri.gluing_pairs():
        lines.append(f"glue {t1} {f1} {t2} {f2} {_code_from_perm(f1, perm)}")
    return "\n".join(lines) + "\n"


# -- surfaces -----------------------------------------------------------------

TRI_EDGE_CORNERS = {e: tuple(c for c in range(3) if c != e) for e in range(3)}
_3LETTERS = "abc"


class SurfaceTriangulation:
    """A closed triangulated surface as glued triangles.

    Triangle corners are 0..2; edge e is opposite corner e.  Gluings
    are stored as full permutations of {0,1,2} with perm[e1] = e2.
    """

    def __init__(self, ntris, pairs, genus=None):
        if ntris < 1:
            raise MalformedGluing("need at least one triangle")
        self.ntris = ntris
        self.gluings = {}
        for (t1, e1), (t2, e2), perm in pairs:
            self._add_gluing(t1, e1, t2, e2, tuple(perm))
        self._derive()
        if self.boundary_edges:
            raise NotClosed(f"{len(self.boundary_edges)} unglued edges")
        chi = self.nvertices - self.nedges + self.ntris
        if chi % 2:
            raise MalformedGluing(f"odd Euler characteristic {chi}")
        self.genus = (2 - chi) // 2
        if genus is not None and genus != self.genus:
            raise MalformedGluing(f"declared genus {genus}, derived {self.genus}")

    @classmethod
    def build(cls, ntris, glue_specs, genus=None):
        pairs = []
        for t1, e1, t2, e2, code in glue_specs:
            if len(code) != 2 or any(ch not in _3LETTERS for ch in code):
                raise MalformedGluing(f"bad corner code {code!r}")
            images = [_3LETTERS.index(ch) for ch in code]
            if len(set(images)) != 2 or e2 in images:
                raise MalformedGluing(f"corner code {code!r} does not map onto edge {e2}")
            perm = [None] * 3
            for src, dst in zip(TRI_EDGE_CORNERS[e1], images):
                perm[src] = dst
            perm[e1] = e2
            pairs.append(((t1, e1), (t2, e2), tuple(perm)))
        return cls(ntris, pairs, genus=genus)

    def _add_gluing(self, t1, e1, t2, e2, perm):
        for t, e in ((t1, e1), (t2, e2)):
            if not (0 <= t < self.ntris and 0 <= e < 3):
                raise MalformedGluing(f"edge ({t},{e}) out of range")
        if (t1, e1) == (t2, e2):
            raise NonInvolutiveGluing(f"edge ({t1},{e1}) glued to itself")
        if sorted(perm) != [0, 1, 2] or perm[e1] != e2:
            raise MalformedGluing(f"invalid corner bijection {perm}")
        inv = _perm_inverse(perm)
        for slot, entry in (((t1, e1), (t2, e2, perm)), ((t2, e2), (t1, e1, inv))):
            existing = self.gluings.get(slot)
            if existing is not None and existing != entry:
                raise NonInvolutiveGluing(f"edge {slot} glued twice")
            self.gluings[slot] = entry

    def gluing_pairs(self):
        out = []
        for (t, e), (t2, e2, perm) in sorted(self.gluings.items()):
            if (t, e) <= (t2, e2):
                out.append(((t, e), (t2, e2), perm))
        return out

    def _derive(self):
        uf_v, uf_e = _UnionFind(), _UnionFind()
        for t in range(self.ntris):
            for c in range(3):
                uf_v.find((t, c))
            for e in range(3):
                uf_e.find((t, e))
        for (t, e), (t2, e2, perm) in self.gluings.items():
            uf_e.union((t, e), (t2, e2))
            for c in TRI_EDGE_CORNERS[e]:
                uf_v.union((t, c), (t2, perm[c]))
        self.vertex_class, self.vertex_members = uf_v.classes(
            [(t, c) for t in range(self.ntris) for c in range(3)]
        )
        self.edge_class, self.edge_members = uf_e.classes(
            [(t, e) for t in range(self.ntris) for e in range(3)]
        )
        self.nvertices = len(self.vertex_members)
        self.nedges = len(self.edge_members)
        self.boundary_edges = sorted(
            (t, e) for t in range(self.ntris) for e in range(3) if (t, e) not in self.gluings
        )

    def triangle_edge_classes(self, t):
        return tuple(self.edge_class[(t, e)] for e in range(3))

    def admissible_colorings(self, p):
        """All admissible edge colorings, lexicographic in class order."""
        m = p.r - 1
        table = _triangle_table(p, lambda a, b, c: 1.0)
        tri_checks = [[] for _ in range(self.nedges)]
        for t in range(self.ntris):
            e1, e2, e3 = sorted(self.triangle_edge_classes(t))
            tri_checks[e3].append((e1, e2, table))
        problem = StateSumProblem(
            m, [[1.0] * m for _ in range(self.nedges)], tri_checks, [[] for _ in range(self.nedges)]
        )
        out = []

        def leaf(w, assign):
            out.append(tuple(assign))

        from qtopo._statesum import _dfs

        for c in range(m):
            _dfs(problem, leaf, c)
        return out


def sphere_surface():
    """The boundary of the tetrahedron: 4 triangles, 6 edges, 4 vertices."""
    verts = [tuple(v for v in range(4) if v != i) for i in range(4)]
    pairs = []
    for i in range(4):
        for j in range(i + 1, 4):
            ei = verts[i].index(j)
            ej = verts[j].index(i)
            perm = [None] * 3
            for v in range(4):
                if v not in (i, j):
                    perm[verts[i].index(v)] = verts[j].index(v)
            perm[ei] = ej
            pairs.append(((i, ei), (j, ej), tuple(perm)))
    return SurfaceTriangulation(4, pairs)


def torus_surface():
    """The 7-vertex (complete-graph) torus: 14 triangles, 21 edges."""
    tris = []
    for i in range(7):
        tris.append((i % 7, (i + 1) % 7, (i + 3) % 7))
        tris.append((i % 7, (i + 2) % 7, (i + 3) % 7))
    return _surface_from_vertex_triangles(tris)


def _surface_from_vertex_triangles(tris):
    """Assemble a SurfaceTriangulation from triangles given by global
    vertex labels (each undirected vertex pair on exactly two triangles)."""
    by_pair = {}
    for t, tri in enumerate(tris):
        for e in range(3):
            pair = tuple(sorted(tri[c] for c in TRI_EDGE_CORNERS[e]))
            by_pair.setdefault(pair, []).append((t, e))
    pairs = []
    for pair, slots in sorted(by_pair.items()):
        if len(slots) != 2:
            raise MalformedGluing(f"vertex pair {pair} lies on {len(slots)} triangles")
        (t1, e1), (t2, e2) = slots
        perm = [None] * 3
        for c in TRI_EDGE_CORNERS[e1]:
            v = tris[t1][c]
            perm[c] = next(c2 for c2 in TRI_EDGE_CORNERS[e2] if tris[t2][c2] == v)
        perm[e1] = e2
        pairs.append(((t1, e1), (t2, e2), tuple(perm)))
    return SurfaceTriangulation(len(tris), pairs)


def parse_surface(text):
    """Parse ``tri <id>`` / ``glue <t1> <e1> <t2> <e2> <code>`` lines."""
    ntris = 0
    seen = set()
    specs = []
    genus = None
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "tri":
                tid = int(parts[1])
                if tid in seen:
                    raise ParseError(f"duplicate tri id {tid}", line=ln)
                seen.add(tid)
                ntris = max(ntris, tid + 1)
            elif parts[0] == "glue":
                t1, e1, t2, e2 = (int(x) for x in parts[1:5])
                specs.append((t1, e1, t2, e2, parts[5]))
            elif parts[0] == "genus":
                genus = int(parts[1])
            else:
                raise ParseError(f"unknown directive {parts[0]!r}", line=ln, column=1)
        except ParseError:
            raise
        except (ValueError, IndexError):
            raise ParseError(f"malformed line {raw!r}", line=ln) from None
    if seen != set(range(ntris)):
        raise ParseError(f"tri ids must form 0..{ntris - 1}")
    return SurfaceTriangulation.build(ntris, specs, genus=genus)


def serialize_surface(s):
    lines = [f"tri {t}" for t in range(s.ntris)]
    lines.append(f"genus {s.genus}")
    for (t1, e1), (t2, e2), perm in s.gluing_pairs():
        code = "".join(_3LETTERS[perm[c]] for c in TRI_EDGE_CORNERS[e1])
        lines.append(f"glue {t1} {e1} {t2} {e2} {code}")
    return "\n".join(lines) + "\n"


# -- products and the cylinder operator ---------------------------------------


def _prism_with_maps(s):
    """Triangulate s x [-1,1] with three tetrahedra per triangle.

    Returns (tri, info) where info maps the surface's edges and
    triangles onto the bottom (level 0) and top (level 1) boundary.
    Requires every triangle to have three distinct vertex classes.
    """
    xyz = []  # per triangle: corner indices ordered by global vertex class
    for t in range(s.ntris):
        classes = [s.vertex_class[(t, c)] for c in range(3)]
        if len(set(classes)) != 3:
            raise MalformedGluing(
                f"triangle {t} repeats a vertex class; prism needs 3 distinct"
            )
        xyz.append(tuple(sorted(range(3), key=lambda c: classes[c])))

    def T1(t):
        return 3 * t

    def T2(t):
        return 3 * t + 1

    def T3(t):
        return 3 * t + 2

    # corner labels (level, surface corner position in xyz order):
    # T1 = (a_x a_y a_z b_z), T2 = (a_x a_y b_y b_z), T3 = (a_x b_x b_y b_z)
    corner_label = {
        0: ((0, 0), (0, 1), (0, 2), (1, 2)),
        1: ((0, 0), (0, 1), (1, 1), (1, 2)),
        2: ((0, 0), (1, 0), (1, 1), (1, 2)),
    }

    pairs = []
    for t in range(s.ntris):
        pairs.append(((T1(t), 2), (T2(t), 2), (0, 1, 2, 3)))
        pairs.append(((T2(t), 1), (T3(t), 1), (0, 1, 2, 3)))

    # quad faces over each surface edge slot: (lower, upper) prism faces
    def quad_faces(t, e):
        pe = xyz[t].index(e)  # position of the omitted corner
        if pe == 2:
            return (T2(t), 3), (T3(t), 3)
        if pe == 0:
            return (T1(t), 0), (T2(t), 0)
        return (T1(t), 1), (T3(t), 2)

    def face_labels(tet, f):
        local = tet % 3
        return {corner_label[local][c]: c for c in FACE_CORNERS[f]}

    for (t1, e1), (t2, e2), perm in s.gluing_pairs():
        # surface corner positions correspond through shared vertex classes;
        # prism corners are matched by (level, vertex class) labels
        posmap = {}  # xyz position in t1 -> xyz position in t2
        for c in TRI_EDGE_CORNERS[e1]:
            posmap[xyz[t1].index(c)] = xyz[t2].index(perm[c])
        for side, (fa, fb) in enumerate(zip(quad_faces(t1, e1), quad_faces(t2, e2))):
            la = face_labels(*fa)
            lb = face_labels(*fb)
            q = [None] * 4
            for (level, posn), ca in la.items():
                q[ca] = lb[(level, posmap[posn])]
            q[fa[1]] = fb[1]
            pairs.append(((fa[0], fa[1]), (fb[0], fb[1]), tuple(q)))

    tri = Triangulation(3 * s.ntris, pairs)

    # bottom a-edges live in T1 (corners 0,1,2 = positions x,y,z);
    # top b-edges in T3 (corners 1,2,3 = positions x,y,z)
    bottom_edge = {}
    top_edge = {}
    for cls, members in enumerate(s.edge_members):
        t, e = members[0]
        ps = sorted(xyz[t].index(c) for c in TRI_EDGE_CORNERS[e])
        bottom_edge[cls] = tri.edge_class[(T1(t), (ps[0], ps[1]))]
        top_edge[cls] = tri.edge_class[(T3(t), (ps[0] + 1, ps[1] + 1))]
    bottom_face = {t: (T1(t), 3) for t in range(s.ntris)}
    top_face = {t: (T3(t), 0) for t in range(s.ntris)}
    info = {
        "bottom_edge": bottom_edge,
        "top_edge": top_edge,
        "bottom_face": bottom_face,
        "top_face": top_face,
    }
    return tri, info


def prism(s):
    """Triangulation of s x [-1,1]; two boundary components, each a copy of s."""
    tri, _ = _prism_with_maps(s)
    return tri


def surface_times_circle(s):
    """Triangulation of s x S^1: the prism with its ends identified."""
    tri, info = _prism_with_maps(s)
    pairs = list(tri.gluing_pairs())
    for t in range(s.ntris):
        pairs.append((info["bottom_face"][t], info["top_face"][t], (1, 2, 3, 0)))
    return Triangulation(tri.ntets, pairs)


def boundary_components(tri):
    """The boundary surfaces of a bounded complex, as SurfaceTriangulations.

    Returns a list of (surface, face_list) where face_list[i] is the
    (tet, face) slot realizing surface triangle i.
    """
    faces = list(tri.boundary_faces)
    index = {slot: i for i, slot in enumerate(faces)}
    adj = {}  # (face index, edge slot) -> (face index, edge slot, perm)
    for slot in faces:
        t, f = slot
        corners = FACE_CORNERS[f]
        for e in range(3):
            i, j = (corners[c] for c in TRI_EDGE_CORNERS[e])
            # walk around the tet edge (i, j) away from this boundary face
            others = [c for c in range(4) if c not in (i, j)]
            exit_corner = others[0] if others[1] == f else others[1]
            ct, ci, cj, cexit = t, i, j, exit_corner
            while True:
                glu = tri.gluings.get((ct, cexit))
                if glu is None:
                    break
                t2, f2, perm = glu
                ci, cj = perm[ci], perm[cj]
                rest = [c for c in range(4) if c not in (ci, cj, f2)]
                ct, cexit = t2, rest[0]
            other_slot = (ct, cexit)
            oc = FACE_CORNERS[cexit]
            e2 = next(k for k in range(3) if set(oc[c] for c in TRI_EDGE_CORNERS[k]) == {ci, cj})
            perm3 = [None] * 3
            src = [corners.index(i), corners.index(j)]
            dst = [oc.index(ci), oc.index(cj)]
            perm3[src[0]], perm3[src[1]] = dst[0], dst[1]
            perm3[e] = e2
            adj[(index[slot], e)] = (index[other_slot], e2, tuple(perm3))

    seen = set()
    components = []
    for start in range(len(faces)):
        if start in seen:
            continue
        comp = []
        stack = [start]
        seen.add(start)
        while stack:
            i = stack.pop()
            comp.append(i)
            for e in range(3):
                j = adj[(i, e)][0]
                if j not in seen:
                    seen.add(j)
                    stack.append(j)
        comp.sort()
        renum = {i: k for k, i in enumerate(comp)}
        pairs = []
        done = set()
        for i in comp:
            for e in range(3):
                j, e2, perm3 = adj[(i, e)]
                key = frozenset({(i, e), (j, e2)})
                if key in done:
                    continue
                done.add(key)
                pairs.append(((renum[i], e), (renum[j], e2), perm3))
        components.append((SurfaceTriangulation(len(comp), pairs), [faces[i] for i in comp]))
    return components


@dataclass
class TVCodeOperator:
    """Cylinder operator on the admissible colorings of a surface.

    matrix[i, j] is the bounded state sum with top coloring i and
    bottom coloring j; colorings are tuples in edge-class order.
    """

    matrix: np.ndarray
    colorings: list
    surface: SurfaceTriangulation

    def index_of(self, coloring):
        return self.colorings.index(tuple(coloring))

    @property
    def trace(self):
        return complex(np.trace(self.matrix))

    def idempotency_defect(self):
        return float(np.max(np.abs(self.matrix @ self.matrix - self.matrix)))

    def rank(self, tol=1e-6):
        svals = np.linalg.svd(self.matrix, compute_uv=False)
        return int(np.sum(svals > tol))


def tv_boundary_operator(s, p, threads=1):
    """The cylinder operator of s x [-1,1] in the coloring basis.

    Boundary simplices carry half weights (eta per vertex, sqrt-delta
    per edge, 1/sqrt-theta per triangle), interior ones full weight, so
    stacking two cylinders reproduces the operator: it is idempotent.
    """
    tri, info = _prism_with_maps(s)
    colorings = s.admissible_colorings(p)
    index_of = {col: i for i, col in enumerate(colorings)}
    problem, order, pos = _build_problem(tri, p, "bounded")
    row_positions = [pos[info["top_edge"][cls]] for cls in range(s.nedges)]
    col_positions = [pos[info["bottom_edge"][cls]] for cls in range(s.nedges)]
    res = sweep_matrix(problem, row_positions, col_positions, index_of, len(colorings), threads=threads)
    scale = complex(rc.eta(p)) ** (2 * s.nvertices)
    return TVCodeOperator(matrix=scale * res.matrix, colorings=colorings, surface=s)

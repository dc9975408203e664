"""Evaluation of closed planar trivalent colored spin-networks.

A graph is reduced to a scalar by deleting circles and tadpole loops,
merging parallel-edge bubbles, and re-channeling edges with recoupling
moves until only closed-form pieces remain.  The engine is a pure
function of the input graph; branch sums are accumulated in ascending
channel order so results are reproducible bit-for-bit.
"""

from __future__ import annotations

from collections import deque

import mpmath

from qtopo import recoupling as rc
from qtopo.errors import ParseError, QtopoError

__all__ = [
    "SpinGraph",
    "NotTrivalent",
    "NotAdmissibleVertex",
    "NotPlanar",
    "GraphIrreducible",
    "EdgeIsLoop",
    "evaluate",
    "apply_fmove",
    "delete_zero_edge",
    "parse_graph",
    "serialize_graph",
    "theta_graph",
    "tet_graph",
]

DEFAULT_FMOVE_DEPTH = 12


class NotTrivalent(QtopoError):
    pass


class NotAdmissibleVertex(QtopoError):
    pass


class NotPlanar(QtopoError):
    pass


class GraphIrreducible(QtopoError):
    """Bounded reduction search exhausted; input too large or unsupported."""


class EdgeIsLoop(QtopoError):
    pass


class SpinGraph:
    """Closed trivalent colored graph with a rotation system.

    edges: mapping edge id -> (v1, v2, color); loops (v1 == v2) and
        multi-edges are permitted.
    rotations: mapping vertex -> cyclic order of the three incident
        edge ids; a loop's id appears twice, first occurrence meaning
        its end 0.
    circles: colors of free (vertex-less) loop components.

    The rotation system must describe a genus-0 embedding of every
    component; this is checked at construction via face tracing.
    """

    __slots__ = ("edge_ends", "colors", "rotation", "circles")

    def __init__(self, edges, rotations, circles=()):
        edge_ends = {}
        colors = {}
        for eid, (v1, v2, col) in edges.items():
            edge_ends[eid] = (v1, v2)
            colors[eid] = col
        rotation = {}
        for v, entry in rotations.items():
            rotation[v] = _normalize_rotation(v, entry, edge_ends)
        self.edge_ends = edge_ends
        self.colors = colors
        self.rotation = rotation
        self.circles = tuple(circles)
        self._validate_structure()

    # -- structure ---------------------------------------------------------

    def _validate_structure(self):
        incident = {}
        for eid, (v1, v2) in self.edge_ends.items():
            incident.setdefault(v1, []).append((eid, 0))
            incident.setdefault(v2, []).append((eid, 1))
        if set(incident) != set(self.rotation):
            missing = set(incident) ^ set(self.rotation)
            raise NotTrivalent(f"rotation/vertex mismatch at {sorted(missing)}")
        for v, ends in incident.items():
            rot = self.rotation[v]
            if len(ends) != 3 or len(rot) != 3:
                raise NotTrivalent(f"vertex {v} has degree {len(ends)}, want 3")
            if sorted(rot) != sorted(ends):
                raise NotTrivalent(f"rotation at {v} does not list its incident ends")
        self._check_planar()

    def _check_planar(self):
        succ = {}
        for v, rot in self.rotation.items():
            for i, end in enumerate(rot):
                succ[end] = rot[(i + 1) % 3]
        vertex_of = {}
        for v, rot in self.rotation.items():
            for end in rot:
                vertex_of[end] = v
        # faces: orbits of (flip edge end, then rotation successor)
        seen = set()
        faces_by_comp = {}
        for start in succ:
            if start in seen:
                continue
            end = start
            comp = self._component_of(vertex_of[start])
            while True:
                seen.add(end)
                eid, k = end
                end = succ[(eid, 1 - k)]
                if end == start:
                    break
            faces_by_comp[comp] = faces_by_comp.get(comp, 0) + 1
        for comp, nfaces in faces_by_comp.items():
            nverts = len(comp)
            nedges = sum(1 for eid, (v1, v2) in self.edge_ends.items() if v1 in comp)
            if nverts - nedges + nfaces != 2:
                raise NotPlanar(
                    f"component with {nverts} vertices, {nedges} edges has "
                    f"V-E+F = {nverts - nedges + nfaces}, want 2"
                )

    def _component_of(self, v0):
        comp = {v0}
        queue = deque([v0])
        while queue:
            v = queue.popleft()
            for eid, k in self.rotation[v]:
                w = self.edge_ends[eid][1 - k]
                if w not in comp:
                    comp.add(w)
                    queue.append(w)
        return frozenset(comp)

    # -- queries -----------------------------------------------------------

    @property
    def vertices(self):
        return sorted(self.rotation)

    @property
    def edges(self):
        return {eid: (*self.edge_ends[eid], self.colors[eid]) for eid in self.edge_ends}

    def vertex_colors(self, v):
        return tuple(self.colors[eid] for eid, _ in self.rotation[v])

    def is_loop(self, eid):
        v1, v2 = self.edge_ends[eid]
        return v1 == v2

    def encode(self):
        """Deterministic structural key (vertex ids as given, no isomorphism)."""
        e = tuple(sorted((eid, self.edge_ends[eid], self.colors[eid]) for eid in self.edge_ends))
        r = tuple(sorted((v, tuple(rot)) for v, rot in self.rotation.items()))
        return (e, r, tuple(sorted(self.circles)))


def _normalize_rotation(v, entry, edge_ends):
    ends = []
    seen_first = set()
    for item in entry:
        if isinstance(item, tuple):
            ends.append(item)
            continue
        eid = item
        v1, v2 = edge_ends[eid]
        if v1 == v2:  # loop: occurrences map to end 0 then end 1
            k = 1 if eid in seen_first else 0
            seen_first.add(eid)
        elif v1 == v:
            k = 0
        elif v2 == v:
            k = 1
        else:
            raise NotTrivalent(f"edge {eid} in rotation of {v} is not incident to it")
        ends.append((eid, k))
    return tuple(ends)


# -- local rewrites ---------------------------------------------------------


def _copy_parts(g):
    return dict(g.edge_ends), dict(g.colors), {v: list(r) for v, r in g.rotation.items()}, list(g.circles)


def _build(edge_ends, colors, rotation, circles):
    edges = {eid: (*edge_ends[eid], colors[eid]) for eid in edge_ends}
    return SpinGraph(edges, {v: tuple(r) for v, r in rotation.items()}, circles)


def _end_vertex(edge_ends, end):
    eid, k = end
    return edge_ends[eid][k]


def _replace_end(rotation, edge_ends, v, old_end, new_end):
    rot = rotation[v]
    rot[rot.index(old_end)] = new_end
    eid, k = new_end
    pair = list(edge_ends[eid])
    pair[k] = v
    edge_ends[eid] = tuple(pair)


def _smooth_two_valent(edge_ends, colors, rotation, circles, v):
    """Remove a 2-valent vertex, joining (or circling) its two strands."""
    ends = [end for end in rotation[v]]
    assert len(ends) == 2
    (e1, k1), (e2, k2) = ends
    if e1 == e2:
        circles.append(colors[e1])
        del edge_ends[e1], colors[e1], rotation[v]
        return
    assert colors[e1] == colors[e2], "smoothing mismatched colors"
    w = edge_ends[e2][1 - k2]
    _replace_end(rotation, edge_ends, w, (e2, 1 - k2), (e1, k1))
    del edge_ends[e2], colors[e2], rotation[v]


def delete_zero_edge(g, eid):
    """Delete a 0-colored non-loop edge and smooth its endpoints."""
    if g.colors[eid] != 0:
        raise ValueError(f"edge {eid} has color {g.colors[eid]}, not 0")
    if g.is_loop(eid):
        raise EdgeIsLoop(f"edge {eid} is a loop")
    edge_ends, colors, rotation, circles = _copy_parts(g)
    u, v = edge_ends[eid]
    for vert, k in ((u, 0), (v, 1)):
        rotation[vert].remove((eid, k))
    del edge_ends[eid], colors[eid]
    for vert in (u, v):
        if vert in rotation and len(rotation[vert]) == 2:
            _smooth_two_valent(edge_ends, colors, rotation, circles, vert)
    return _build(edge_ends, colors, rotation, circles)


def _square_ends(g, eid):
    """The four corner ends (a, b, c, d) of the recoupling square at eid.

    a/b are the rotation predecessor/successor of eid's end at one
    endpoint, c/d the predecessor/successor at the other, so that the
    re-channeled edge f joins new vertices (a, d, f) and (b, c, f).
    """
    u, v = g.edge_ends[eid]
    rot_u, rot_v = list(g.rotation[u]), list(g.rotation[v])
    iu, iv = rot_u.index((eid, 0)), rot_v.index((eid, 1))
    a = rot_u[(iu - 1) % 3]
    b = rot_u[(iu + 1) % 3]
    c = rot_v[(iv - 1) % 3]
    d = rot_v[(iv + 1) % 3]
    return a, b, c, d


def _rewire_fmove(g, eid, new_color):
    """Topological rewiring of the square at eid; color of eid becomes new_color."""
    edge_ends, colors, rotation, circles = _copy_parts(g)
    u, v = edge_ends[eid]
    a, b, c, d = _square_ends(g, eid)
    colors[eid] = new_color
    rotation[u] = [a, d, (eid, 0)]
    rotation[v] = [b, (eid, 1), c]
    for end, vert in ((a, u), (d, u), (b, v), (c, v)):
        e2, k2 = end
        pair = list(edge_ends[e2])
        pair[k2] = vert
        edge_ends[e2] = tuple(pair)
    return _build(edge_ends, colors, rotation, circles)


def apply_fmove(g, eid, p):
    """Re-channel internal edge eid; returns [(weight, graph), ...].

    The weighted evaluations of the branches sum to the evaluation of
    the input graph.  Branches are listed by ascending channel color.
    """
    if g.is_loop(eid):
        raise EdgeIsLoop(f"edge {eid} is a loop")
    a_end, b_end, c_end, d_end = _square_ends(g, eid)
    a, b = g.colors[a_end[0]], g.colors[b_end[0]]
    c, d = g.colors[c_end[0]], g.colors[d_end[0]]
    e = g.colors[eid]
    branches = []
    for f in p.colors:
        w = rc.fmove_coeff(a, b, c, d, e, f, p)
        if w != 0:
            branches.append((w, _rewire_fmove(g, eid, f)))
    return branches


# -- reduction engine --------------------------------------------------------


def _find_cheap_rule(g):
    """Locate the first applicable local rule, or None.

    Returns a tag and data; priority: circle, zero-edge, tadpole loop,
    multi-edge (theta or bubble).
    """
    if g.circles:
        return ("circle",)
    for eid in sorted(g.edge_ends):
        if g.colors[eid] == 0 and not g.is_loop(eid):
            return ("zero", eid)
    for eid in sorted(g.edge_ends):
        if g.is_loop(eid):
            return ("tadpole", eid)
    pair_count = {}
    for eid in sorted(g.edge_ends):
        v1, v2 = g.edge_ends[eid]
        if v1 != v2:
            key = (min(v1, v2), max(v1, v2))
            pair_count.setdefault(key, []).append(eid)
    for key in sorted(pair_count):
        eids = pair_count[key]
        if len(eids) == 3:
            return ("theta", key, eids)
        if len(eids) == 2:
            return ("bubble", key, eids)
    return None


def _apply_cheap_rule(g, rule, p):
    """Apply one local rule; returns (scalar factor, graph or None-if-zero)."""
    one = 1.0 if p.native else mpmath.mpf(1)
    if rule[0] == "circle":
        factor = one
        for col in g.circles:
            factor *= rc.quantum_dimension(col, p)
        edge_ends, colors, rotation, _ = _copy_parts(g)
        return factor, _build(edge_ends, colors, rotation, [])
    if rule[0] == "zero":
        return one, delete_zero_edge(g, rule[1])
    if rule[0] == "tadpole":
        eid = rule[1]
        v = g.edge_ends[eid][0]
        tail_end = next(end for end in g.rotation[v] if end[0] != eid)
        tail, tk = tail_end
        if g.colors[tail] != 0:
            return None, None  # evaluation vanishes
        factor = rc.quantum_dimension(g.colors[eid], p)
        edge_ends, colors, rotation, circles = _copy_parts(g)
        del edge_ends[eid], colors[eid], rotation[v]
        w = _end_vertex(edge_ends, (tail, 1 - tk))
        rotation[w].remove((tail, 1 - tk))
        del edge_ends[tail], colors[tail]
        if len(rotation[w]) == 2:
            _smooth_two_valent(edge_ends, colors, rotation, circles, w)
        return factor, _build(edge_ends, colors, rotation, circles)
    if rule[0] == "theta":
        (u, v), eids = rule[1], rule[2]
        cols = [g.colors[e] for e in eids]
        factor = rc.theta(cols[0], cols[1], cols[2], p)
        edge_ends, colors, rotation, circles = _copy_parts(g)
        for e in eids:
            del edge_ends[e], colors[e]
        del rotation[u], rotation[v]
        return factor, _build(edge_ends, colors, rotation, circles)
    if rule[0] == "bubble":
        (u, v), eids = rule[1], rule[2]
        e1, e2 = eids
        tail_u = next(end for end in g.rotation[u] if end[0] not in eids)
        tail_v = next(end for end in g.rotation[v] if end[0] not in eids)
        x, y = g.colors[tail_u[0]], g.colors[tail_v[0]]
        if x != y:
            return None, None
        factor = rc.theta(g.colors[e1], g.colors[e2], x, p) / rc.quantum_dimension(x, p)
        edge_ends, colors, rotation, circles = _copy_parts(g)
        for e in eids:
            del edge_ends[e], colors[e]
        del rotation[u], rotation[v]
        tu, ku = tail_u
        tv, kv = tail_v
        if tu == tv:  # strand closes into a circle
            circles.append(colors[tu])
            del edge_ends[tu], colors[tu]
        else:
            w = edge_ends[tv][1 - kv]
            _replace_end(rotation, edge_ends, w, (tv, 1 - kv), (tu, ku))
            del edge_ends[tv], colors[tv]
        return factor, _build(edge_ends, colors, rotation, circles)
    raise AssertionError(f"unknown rule {rule}")


def _has_reducible_pattern(edge_ends):
    pairs = set()
    for eid, (v1, v2) in edge_ends.items():
        if v1 == v2:
            return True
        key = (min(v1, v2), max(v1, v2))
        if key in pairs:
            return True
        pairs.add(key)
    return False


def _topo_rewire(edge_ends, rotation, eid):
    edge_ends = dict(edge_ends)
    rotation = {v: list(r) for v, r in rotation.items()}
    u, v = edge_ends[eid]
    rot_u, rot_v = rotation[u], rotation[v]
    iu, iv = rot_u.index((eid, 0)), rot_v.index((eid, 1))
    a = rot_u[(iu - 1) % 3]
    b = rot_u[(iu + 1) % 3]
    c = rot_v[(iv - 1) % 3]
    d = rot_v[(iv + 1) % 3]
    rotation[u] = [a, d, (eid, 0)]
    rotation[v] = [b, (eid, 1), c]
    for end, vert in ((a, u), (d, u), (b, v), (c, v)):
        e2, k2 = end
        pair = list(edge_ends[e2])
        pair[k2] = vert
        edge_ends[e2] = tuple(pair)
    return edge_ends, rotation


def _find_reducing_sequence(g, depth):
    """Shortest sequence of re-channeling moves that creates a loop or
    parallel pair, found by breadth-first search on the topology only
    (branch colors do not affect the rewiring)."""
    start = (g.edge_ends, {v: list(r) for v, r in g.rotation.items()})
    key0 = _topo_key(*start)
    queue = deque([(start, ())])
    seen = {key0}
    while queue:
        (edge_ends, rotation), seq = queue.popleft()
        if len(seq) >= depth:
            continue
        for eid in sorted(edge_ends):
            v1, v2 = edge_ends[eid]
            if v1 == v2:
                continue
            nxt = _topo_rewire(edge_ends, rotation, eid)
            if _has_reducible_pattern(nxt[0]):
                return seq + (eid,)
            key = _topo_key(*nxt)
            if key not in seen:
                seen.add(key)
                queue.append((nxt, seq + (eid,)))
    return None


def _topo_key(edge_ends, rotation):
    return (
        tuple(sorted(edge_ends.items())),
        tuple(sorted((v, tuple(r)) for v, r in rotation.items())),
    )


def _reduce(g, p, fbudget, depth, hint=()):
    acc = 1.0 if p.native else mpmath.mpf(1)
    while True:
        rule = _find_cheap_rule(g)
        if rule is not None:
            factor, g2 = _apply_cheap_rule(g, rule, p)
            if g2 is None:
                return 0.0 if p.native else mpmath.mpf(0)
            acc *= factor
            g = g2
            fbudget = depth  # structural progress resets the move budget
            hint = ()
            if not g.edge_ends and not g.circles:
                return acc
            continue
        if not g.edge_ends:
            return acc
        if hint:
            seq = hint
        else:
            if fbudget <= 0:
                raise GraphIrreducible("re-channeling budget exhausted")
            seq = _find_reducing_sequence(g, min(fbudget, depth))
            if seq is None:
                raise GraphIrreducible(
                    f"no reducing move sequence within depth {min(fbudget, depth)}"
                )
        total = 0.0 if p.native else mpmath.mpf(0)
        for w, g2 in apply_fmove(g, seq[0], p):
            total += w * _reduce(g2, p, fbudget - 1, depth, hint=seq[1:])
        return acc * total


def evaluate(g, p, fmove_depth=DEFAULT_FMOVE_DEPTH):
    """Evaluate a closed planar trivalent colored graph to a scalar.

    Agrees with the closed forms on circles, theta graphs and
    tetrahedral graphs, and is multiplicative over disjoint unions.
    """
    for eid, col in g.colors.items():
        p.check_color(col)
    for col in g.circles:
        p.check_color(col)
    for v in g.rotation:
        cols = g.vertex_colors(v)
        if not rc.is_admissible(*cols, p):
            raise NotAdmissibleVertex(f"vertex {v} carries inadmissible colors {cols}")
    return _reduce(g, p, fmove_depth, fmove_depth)


# -- standard graphs ---------------------------------------------------------


def theta_graph(a, b, c):
    """Two vertices joined by three strands colored a, b, c."""
    edges = {0: (0, 1, a), 1: (0, 1, b), 2: (0, 1, c)}
    rotations = {0: (0, 1, 2), 1: (2, 1, 0)}
    return SpinGraph(edges, rotations)


def tet_graph(a, b, e, c, d, f):
    """Tetrahedral 1-skeleton with vertex triples (a,b,e), (c,d,e), (a,d,f), (b,c,f).

    Evaluates to tet(a, b, e, c, d, f).
    """
    # vertices: 0=(a,b,e) 1=(c,d,e) 2=(a,d,f) 3=(b,c,f)
    edges = {
        0: (0, 2, a),
        1: (0, 3, b),
        2: (0, 1, e),
        3: (1, 3, c),
        4: (1, 2, d),
        5: (2, 3, f),
    }
    rotations = {0: (0, 1, 2), 1: (2, 3, 4), 2: (0, 4, 5), 3: (5, 3, 1)}
    return SpinGraph(edges, rotations)


# -- text format -------------------------------------------------------------


def parse_graph(text):
    """Parse the spin-graph text format.

    Lines: ``edge <id> <v1> <v2> <color>`` and ``rot <v> <e1> <e2> <e3>``;
    blank lines and ``#`` comments are ignored.
    """
    edges = {}
    rotations = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "edge":
                eid, v1, v2, col = (int(x) for x in parts[1:5])
                if len(parts) != 5:
                    raise ValueError
                if eid in edges:
                    raise ParseError(f"duplicate edge id {eid}", line=ln)
                edges[eid] = (v1, v2, col)
            elif parts[0] == "rot":
                if len(parts) != 5:
                    raise ValueError
                v = int(parts[1])
                if v in rotations:
                    raise ParseError(f"duplicate rotation for vertex {v}", line=ln)
                rotations[v] = tuple(int(x) for x in parts[2:5])
            else:
                raise ParseError(f"unknown directive {parts[0]!r}", line=ln, column=1)
        except (ValueError, IndexError):
            raise ParseError(f"malformed line {raw!r}", line=ln) from None
    try:
        return SpinGraph(edges, rotations)
    except KeyError as exc:
        raise ParseError(f"rotation references unknown edge {exc}") from None


def serialize_graph(g):
    lines = []
    for eid in sorted(g.edge_ends):
        v1, v2 = g.edge_ends[eid]
        lines.append(f"edge {eid} {v1} {v2} {g.colors[eid]}")
    for v in sorted(g.rotation):
        eids = " ".join(str(eid) for eid, _ in g.rotation[v])
        lines.append(f"rot {v} {eids}")
    return "\n".join(lines) + "\n"

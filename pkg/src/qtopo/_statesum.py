"""Backtracking enumeration core for edge-coloring state sums.

Variables are edge classes in a fixed elimination order; a triangle's
admissibility (and weight) is applied the moment its last edge is
colored, a tetrahedron's weight the moment its sixth edge slot is
colored.  Work is partitioned over the colors of the first variable;
partial results are combined in ascending color order, so counts,
visit tallies and floating-point sums are identical for every thread
count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

__all__ = ["StateSumProblem", "SweepResult", "sweep", "sweep_matrix"]


@dataclass
class StateSumProblem:
    """A prepared coloring problem.

    ncolors: colors are 0..ncolors-1.
    var_factors: [pos][color] -> multiplicative weight of assigning
        that color (1 for pure counting).
    tri_checks: [pos] -> list of (pos1, pos2, table); the triangle's
        last edge sits at pos, the other two slots at pos1, pos2 (which
        may repeat pos for triangles with identified edges);
        table[c1][c2][c] is the triangle's weight factor, or None if
        the triple is inadmissible.
    tet_checks: [pos] -> list of (arg_positions, cache, fn); applied
        when the slot at pos completes the tetrahedron; arg_positions
        are the six positions in tet-argument order.
    unit: multiplicative identity of the weight domain.
    """

    ncolors: int
    var_factors: list
    tri_checks: list
    tet_checks: list
    unit: object = 1.0

    @property
    def nvars(self):
        return len(self.var_factors)


@dataclass
class SweepResult:
    total: object
    count: int = 0
    visits: int = 0
    matrix: object = None


def _dfs(problem, leaf, first_color):
    """Depth-first sweep with the first variable pinned; returns visits."""
    ncolors = problem.ncolors
    nvars = problem.nvars
    var_factors = problem.var_factors
    tri_checks = problem.tri_checks
    tet_checks = problem.tet_checks
    assign = [0] * nvars
    visits = 0

    def rec(pos, w):
        nonlocal visits
        colors = (first_color,) if pos == 0 else range(ncolors)
        factors = var_factors[pos]
        tris = tri_checks[pos]
        tets = tet_checks[pos]
        last = pos + 1 == nvars
        for c in colors:
            w2 = w * factors[c]
            assign[pos] = c
            ok = True
            for p1, p2, table in tris:
                f = table[assign[p1]][assign[p2]][c]
                if f is None:
                    ok = False
                    break
                w2 = w2 * f
            if not ok:
                continue
            for arg_positions, cache, fn in tets:
                key = (
                    assign[arg_positions[0]],
                    assign[arg_positions[1]],
                    assign[arg_positions[2]],
                    assign[arg_positions[3]],
                    assign[arg_positions[4]],
                    assign[arg_positions[5]],
                )
                val = cache.get(key)
                if val is None:
                    val = fn(*key)
                    cache[key] = val
                w2 = w2 * val
            visits += 1
            if last:
                leaf(w2, assign)
            else:
                rec(pos + 1, w2)

    if nvars == 0:
        leaf(problem.unit, assign)
    else:
        rec(0, problem.unit)
    return visits


def _partitioned(problem, threads, make_state):
    """One partition per first-variable color, combined in color order."""
    if problem.nvars == 0:
        state = make_state()
        _dfs(problem, state["leaf"], 0)
        return [state], [0]
    ncolors = problem.ncolors
    states = [make_state() for _ in range(ncolors)]

    def job(c):
        return _dfs(problem, states[c]["leaf"], c)

    if threads is None or threads <= 1:
        visits = [job(c) for c in range(ncolors)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            visits = list(pool.map(job, range(ncolors)))
    return states, visits


def sweep(problem, threads=1):
    """Accumulate (count, total weight) over all admissible colorings."""

    def make_state():
        state = {"count": 0, "total": problem.unit * 0}

        def leaf(w, assign):
            state["count"] += 1
            state["total"] = state["total"] + w

        state["leaf"] = leaf
        return state

    states, visits = _partitioned(problem, threads, make_state)
    total = problem.unit * 0
    count = 0
    for st in states:
        total = total + st["total"]
        count += st["count"]
    return SweepResult(total=total, count=count, visits=sum(visits))


def sweep_matrix(problem, row_positions, col_positions, index_of, size, threads=1):
    """Accumulate weights into a matrix bucketed by two marginal colorings."""

    def make_state():
        state = {"count": 0, "matrix": np.zeros((size, size), dtype=complex)}
        mat = state["matrix"]

        def leaf(w, assign):
            state["count"] += 1
            row = index_of[tuple(assign[q] for q in row_positions)]
            col = index_of[tuple(assign[q] for q in col_positions)]
            mat[row, col] += w

        state["leaf"] = leaf
        return state

    states, visits = _partitioned(problem, threads, make_state)
    total = np.zeros((size, size), dtype=complex)
    count = 0
    for st in states:
        total += st["matrix"]
        count += st["count"]
    return SweepResult(total=None, count=count, visits=sum(visits), matrix=total)

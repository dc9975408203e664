"""Quantum-topological invariants and positive geometry.

Submodules:
  recoupling  -- quantum 6j/recoupling scalars at a root of unity
  spinnet     -- closed planar trivalent spin-network evaluation
  triangulate -- glued-tetrahedra complexes, state sums, Pachner moves, TV code
  surgery     -- closed-form surgery invariants and the TV = |RT|^2 harness
  posgeom     -- exact-rational positive Grassmannian / amplituhedron objects
  cli         -- command-line surface over all of the above
"""

from qtopo.recoupling import RootParams

__all__ = ["RootParams"]
__version__ = "0.1.0"

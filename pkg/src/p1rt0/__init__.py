"""Locking-free P1 + RT0 discretizations of linear elasticity."""
from .mesh import (MeshError, Triangulation, generate_cook_membrane,
                   generate_structured_unit_square, load_mesh)
from .femspace import BoundarySpec, DofMap, FeFunction, mixed_right
from .assembly import LinearSystem, SchemeConfig, assemble_scheme
from .linalg import solve_cg, solve_direct

__all__ = [
    "MeshError", "Triangulation", "generate_cook_membrane",
    "generate_structured_unit_square", "load_mesh", "BoundarySpec", "DofMap",
    "FeFunction", "mixed_right", "LinearSystem", "SchemeConfig",
    "assemble_scheme", "solve_cg", "solve_direct",
]

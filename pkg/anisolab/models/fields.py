"""
Numeric carriers: polygons, triangle meshes, P1 fields and solver outputs.

These are immutable dataclasses over numpy arrays. Derived geometry is cached
on first access.
"""
from dataclasses import dataclass, field as dataclass_field
from functools import cached_property
from typing import List, Optional

import numpy as np

from anisolab.models.schemas import GaugeSpec, SourceSpec


@dataclass(frozen=True, eq=False)
class Polygon:
    """Simple polygon, vertices counter-clockwise, shape (k, 2)."""
    vertices: np.ndarray

    @cached_property
    def signed_area(self) -> float:
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))

    @property
    def area(self) -> float:
        return abs(self.signed_area)

    @cached_property
    def diameter(self) -> float:
        diffs = self.vertices[:, None, :] - self.vertices[None, :, :]
        return float(np.sqrt((diffs ** 2).sum(axis=-1)).max())

    @property
    def edges(self) -> np.ndarray:
        """Edge vectors v_{i+1} - v_i, shape (k, 2)."""
        return np.roll(self.vertices, -1, axis=0) - self.vertices


@dataclass(frozen=True, eq=False)
class BoundaryEdges:
    """Boundary edges with outward unit normals and the adjacent triangle."""
    nodes: np.ndarray       # (m, 2) vertex indices, oriented with the domain on the left
    normals: np.ndarray     # (m, 2)
    lengths: np.ndarray     # (m,)
    midpoints: np.ndarray   # (m, 2)
    triangles: np.ndarray   # (m,) index of the triangle owning the edge

    def __len__(self) -> int:
        return len(self.lengths)


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Conforming triangulation; triangles are positively oriented."""
    vertices: np.ndarray    # (N, 2)
    triangles: np.ndarray   # (M, 3)
    boundary: BoundaryEdges
    h_max: float
    polygon: Optional[Polygon] = None

    @cached_property
    def areas(self) -> np.ndarray:
        p0, p1, p2 = (self.vertices[self.triangles[:, k]] for k in range(3))
        e1, e2 = p1 - p0, p2 - p0
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def area(self) -> float:
        return float(self.areas.sum())

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def shape_gradients(self) -> np.ndarray:
        """Constant gradients of the three hat functions per triangle, shape (M, 3, 2)."""
        p = self.vertices[self.triangles]
        # grad(phi_i) = (-e_y, e_x) / (2A) with e = p_{i+2} - p_{i+1}
        opposite = np.roll(p, -2, axis=1) - np.roll(p, -1, axis=1)
        grads = np.stack([-opposite[..., 1], opposite[..., 0]], axis=-1)
        return grads / (2.0 * self.areas[:, None, None])

    @cached_property
    def boundary_nodes(self) -> np.ndarray:
        return np.unique(self.boundary.nodes.reshape(-1))

    @cached_property
    def interior_nodes(self) -> np.ndarray:
        mask = np.ones(len(self.vertices), dtype=bool)
        mask[self.boundary_nodes] = False
        return np.flatnonzero(mask)

    @property
    def node_count(self) -> int:
        return len(self.vertices)

    @property
    def triangle_count(self) -> int:
        return len(self.triangles)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Continuous piecewise-linear function given by nodal values."""
    mesh: TriMesh
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.mesh.node_count,):
            raise ValueError(
                f"field has {self.values.shape} values for {self.mesh.node_count} vertices"
            )

    @cached_property
    def gradients(self) -> np.ndarray:
        """Per-triangle gradient of the interpolant, shape (M, 2)."""
        local = self.values[self.mesh.triangles]
        return np.einsum("tk,tkd->td", local, self.mesh.shape_gradients)

    @cached_property
    def centroid_values(self) -> np.ndarray:
        return self.values[self.mesh.triangles].mean(axis=1)

    @property
    def sup(self) -> float:
        return float(self.values.max())


@dataclass(frozen=True, eq=False)
class LevelProfile:
    """Distribution function and anisotropic perimeter of superlevel sets."""
    levels: np.ndarray
    mu: np.ndarray
    perim_F: np.ndarray
    wulff_slack: Optional[np.ndarray] = None


@dataclass(frozen=True, eq=False)
class SolveReport:
    """Outcome of an energy minimization."""
    field: ScalarField
    energy: float
    grad_norm: float
    iterations: int
    converged: bool
    tolerance: float
    residual: float
    gauge: GaugeSpec
    p: float
    source: SourceSpec
    kind: str = "dirichlet"
    energy_history: List[float] = dataclass_field(default_factory=list)

    @property
    def mesh(self) -> TriMesh:
        return self.field.mesh


@dataclass(frozen=True, eq=False)
class EigenPair:
    """First Dirichlet eigenpair; the field is nonnegative with unit L^p norm."""
    eigenvalue: float
    field: ScalarField
    iterations: int
    gauge: GaugeSpec
    p: float
    quotient_history: List[float] = dataclass_field(default_factory=list)


@dataclass(frozen=True, eq=False)
class SpaceformBall:
    """Geodesic ball of radius theta in the simply connected space form of curvature kappa."""
    n: int
    kappa: int
    theta: float
    grid_points: int = 2001

    @cached_property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.theta, self.grid_points)


@dataclass(frozen=True, eq=False)
class RadialSolution:
    """Radial torsion function u(r) on a geodesic ball and its integrals."""
    ball: SpaceformBall
    u: np.ndarray
    u_prime: np.ndarray
    u_double_prime: np.ndarray
    T: float
    V: float
    A: float
    H_boundary: float

    @property
    def max_boundary_grad_sq(self) -> float:
        return float(self.u_prime[-1] ** 2)


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Radial test function f(r) with f'(0) = 0, sampled on a ball grid."""
    f: np.ndarray
    f_prime: np.ndarray
    f_double_prime: np.ndarray

"""
Polygonal domains and their triangulations.
Builds named domains, meshes them, refines meshes uniformly and evaluates
boundary quantities.
"""
import logging
import math
from typing import Callable, Optional, Union

import numpy as np
from scipy.spatial import Delaunay

from anisolab.exceptions import DegenerateGeometry
from anisolab.models.fields import BoundaryEdges, Polygon, TriMesh
from anisolab.models.schemas import DomainKind, DomainSpec, GaugeSpec, MeshStats
from anisolab.services.gauge import gauge_calculus

logger = logging.getLogger(__name__)

EdgeDensity = Union[float, Callable[[BoundaryEdges], np.ndarray]]


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def points_in_polygon(points: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    """Even-odd crossing test, vectorized over points."""
    px, py = points[:, 0], points[:, 1]
    inside = np.zeros(len(points), dtype=bool)
    nxt = np.roll(vertices, -1, axis=0)
    for (x0, y0), (x1, y1) in zip(vertices, nxt):
        crosses = (y0 > py) != (y1 > py)
        if not np.any(crosses):
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            x_int = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
        inside ^= crosses & (px < x_int)
    return inside


def distance_to_boundary(points: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    """Euclidean distance from each point to the polygon boundary."""
    best = np.full(len(points), np.inf)
    nxt = np.roll(vertices, -1, axis=0)
    for a, b in zip(vertices, nxt):
        edge = b - a
        t = np.clip(((points - a) @ edge) / float(edge @ edge), 0.0, 1.0)
        d = np.linalg.norm(points - a - t[:, None] * edge, axis=1)
        np.minimum(best, d, out=best)
    return best


class DomainMesher:
    """
    Builds polygons and conforming P1 triangulations.

    Meshes are generated from a boundary sampling plus a hexagonal interior lattice
    and a Delaunay triangulation. Boundary samples are spaced finer than the gap kept
    to the lattice, so every boundary segment is a Delaunay edge. When the recovered
    mesh does not reproduce the polygon, ear clipping followed by uniform bisection
    is used instead.
    """

    # Spacing factors relative to target_h
    BOUNDARY_SPACING = 0.8
    LATTICE_SPACING = 0.9
    LATTICE_CLEARANCE = 0.45

    # L-shaped domain (-1,1)^2 minus [0,1)^2, counter-clockwise
    LSHAPE_VERTICES = [(-1.0, -1.0), (1.0, -1.0), (1.0, 0.0), (0.0, 0.0), (0.0, 1.0), (-1.0, 1.0)]

    # === Polygons ===

    def build_polygon(self, spec: DomainSpec, gauge: Optional[GaugeSpec] = None) -> Polygon:
        """
        Build the polygon of a domain description.

        Args:
            spec: Domain description (named or explicit vertices)
            gauge: Gauge whose Wulff shape {F° <= 1} is used for wulff domains

        Returns:
            Validated counter-clockwise polygon
        """
        if spec.kind == DomainKind.DISK:
            angles = 2.0 * np.pi * np.arange(spec.vertex_count) / spec.vertex_count
            vertices = spec.radius * np.column_stack([np.cos(angles), np.sin(angles)])
        elif spec.kind == DomainKind.ELLIPSE:
            angles = 2.0 * np.pi * np.arange(spec.vertex_count) / spec.vertex_count
            a, b = spec.semi_axes
            vertices = np.column_stack([a * np.cos(angles), b * np.sin(angles)])
        elif spec.kind == DomainKind.SQUARE:
            half = spec.side / 2.0
            vertices = np.array([(-half, -half), (half, -half), (half, half), (-half, half)])
        elif spec.kind == DomainKind.LSHAPE:
            vertices = np.array(self.LSHAPE_VERTICES)
        elif spec.kind == DomainKind.WULFF:
            vertices = gauge_calculus.wulff_boundary(gauge or GaugeSpec(), spec.vertex_count)
        else:
            vertices = np.array(spec.vertices, dtype=float)
        return self.make_polygon(vertices + np.asarray(spec.offset, dtype=float))

    def make_polygon(self, vertices) -> Polygon:
        """
        Validate a vertex list and orient it counter-clockwise.

        Raises:
            DegenerateGeometry: If the polygon is self-intersecting, repeats a vertex
                or has zero area
        """
        vertices = np.asarray(vertices, dtype=float)
        if vertices.ndim != 2 or vertices.shape[1] != 2 or len(vertices) < 3:
            raise DegenerateGeometry(f"polygon needs at least 3 planar vertices, got shape {vertices.shape}")
        polygon = Polygon(vertices)
        scale = max(polygon.diameter, 1e-300)
        if polygon.area <= 1e-14 * scale ** 2:
            raise DegenerateGeometry("polygon has zero area")
        if polygon.signed_area < 0:
            logger.warning("Polygon vertices are clockwise; reversing orientation")
            polygon = Polygon(vertices[::-1].copy())
        self._check_simple(polygon)
        return polygon

    def _check_simple(self, polygon: Polygon) -> None:
        v = polygon.vertices
        k = len(v)
        if len(np.unique(np.round(v / polygon.diameter, 14), axis=0)) < k:
            raise DegenerateGeometry("polygon repeats a vertex")
        a, b = v, np.roll(v, -1, axis=0)
        # Pairwise proper-or-touching intersection of non-adjacent edges
        d1 = _cross(b[:, None] - a[:, None], a[None, :] - a[:, None])
        d2 = _cross(b[:, None] - a[:, None], b[None, :] - a[:, None])
        d3 = _cross(b[None, :] - a[None, :], a[:, None] - a[None, :])
        d4 = _cross(b[None, :] - a[None, :], b[:, None] - a[None, :])
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        boxes_overlap = np.all(
            (lo[:, None] <= hi[None, :]) & (lo[None, :] <= hi[:, None]), axis=-1
        )
        intersects = (d1 * d2 <= 0) & (d3 * d4 <= 0) & boxes_overlap
        idx = np.arange(k)
        adjacent = (
            (idx[:, None] == idx[None, :])
            | ((idx[:, None] + 1) % k == idx[None, :])
            | ((idx[None, :] + 1) % k == idx[:, None])
        )
        if np.any(intersects & ~adjacent):
            i, j = np.argwhere(intersects & ~adjacent)[0]
            raise DegenerateGeometry(f"polygon is not simple: edges {i} and {j} intersect")

    def star_shape_margin(self, polygon: Polygon) -> float:
        """min over edges of <x_mid, nu>; nonnegative for domains star-shaped about the origin."""
        edges = polygon.edges
        lengths = np.linalg.norm(edges, axis=1)
        normals = np.column_stack([edges[:, 1], -edges[:, 0]]) / lengths[:, None]
        midpoints = polygon.vertices + 0.5 * edges
        return float(np.min(np.sum(midpoints * normals, axis=1)))

    # === Triangulation ===

    def triangulate(self, polygon: Polygon, target_h: float, method: str = "lattice") -> TriMesh:
        """
        Conforming triangulation with h_max <= 1.5 * target_h.

        Args:
            polygon: Simple counter-clockwise polygon
            target_h: Requested mesh size
            method: "lattice" (Delaunay of boundary samples and a hexagonal lattice) or
                "ear_clipping" (ear clipping followed by uniform bisection)

        Returns:
            TriMesh with positively oriented triangles
        """
        if target_h >= polygon.diameter:
            raise DegenerateGeometry(
                f"target_h={target_h:g} must be below the polygon diameter {polygon.diameter:g}"
            )
        mesh = None
        if method == "lattice":
            mesh = self._lattice_mesh(polygon, target_h)
            if mesh is None:
                logger.warning("Lattice mesh did not recover the polygon boundary; using ear clipping")
        if mesh is None:
            mesh = self._ear_clipping_mesh(polygon)
        while mesh.h_max > 1.5 * target_h:
            mesh = self.refine(mesh)
        logger.info(
            f"Mesh: {mesh.node_count} vertices, {mesh.triangle_count} triangles, h_max={mesh.h_max:.4g}"
        )
        return mesh

    def _lattice_mesh(self, polygon: Polygon, target_h: float) -> Optional[TriMesh]:
        v = polygon.vertices
        samples = []
        for a, b in zip(v, np.roll(v, -1, axis=0)):
            pieces = max(1, math.ceil(np.linalg.norm(b - a) / (self.BOUNDARY_SPACING * target_h)))
            t = np.arange(pieces)[:, None] / pieces
            samples.append(a + t * (b - a))
        boundary_points = np.vstack(samples)

        s = self.LATTICE_SPACING * target_h
        lo, hi = v.min(axis=0), v.max(axis=0)
        rows = np.arange(lo[1], hi[1] + s, s * math.sqrt(3) / 2)
        lattice = []
        for j, y in enumerate(rows):
            xs = np.arange(lo[0] + (j % 2) * s / 2, hi[0] + s, s)
            lattice.append(np.column_stack([xs, np.full_like(xs, y)]))
        lattice = np.vstack(lattice)
        keep = points_in_polygon(lattice, v)
        lattice = lattice[keep]
        lattice = lattice[distance_to_boundary(lattice, v) >= self.LATTICE_CLEARANCE * target_h]

        points = np.vstack([boundary_points, lattice])
        triangles = Delaunay(points).simplices
        centroids = points[triangles].mean(axis=1)
        triangles = triangles[points_in_polygon(centroids, v)]
        areas = 0.5 * _cross(points[triangles[:, 1]] - points[triangles[:, 0]], points[triangles[:, 2]] - points[triangles[:, 0]])
        triangles[areas < 0] = triangles[areas < 0][:, [0, 2, 1]]
        triangles = triangles[np.abs(areas) > 1e-10 * target_h ** 2]

        used, triangles = np.unique(triangles, return_inverse=True)
        mesh = self.assemble(points[used], triangles.reshape(-1, 3), polygon)
        if abs(mesh.area - polygon.area) > 1e-10 * polygon.area:
            return None
        on_boundary = distance_to_boundary(mesh.boundary.midpoints, v) <= 1e-9 * polygon.diameter
        if not np.all(on_boundary):
            return None
        return mesh

    def _ear_clipping_mesh(self, polygon: Polygon) -> TriMesh:
        v = polygon.vertices
        remaining = list(range(len(v)))
        triangles = []
        while len(remaining) > 3:
            k = len(remaining)
            for pos in range(k):
                i, j, l = remaining[pos - 1], remaining[pos], remaining[(pos + 1) % k]
                if _cross(v[j] - v[i], v[l] - v[i]) <= 0:
                    continue
                others = [m for m in remaining if m not in (i, j, l)]
                if others and np.any(self._in_triangle(v[others], v[i], v[j], v[l])):
                    continue
                triangles.append((i, j, l))
                remaining.pop(pos)
                break
            else:
                raise DegenerateGeometry("ear clipping found no ear; polygon is not simple")
        triangles.append(tuple(remaining))
        return self.assemble(v.copy(), np.array(triangles), polygon)

    @staticmethod
    def _in_triangle(points: np.ndarray, a, b, c) -> np.ndarray:
        d1 = _cross(b - a, points - a)
        d2 = _cross(c - b, points - b)
        d3 = _cross(a - c, points - c)
        return (d1 >= 0) & (d2 >= 0) & (d3 >= 0)

    def refine(self, mesh: TriMesh, times: int = 1) -> TriMesh:
        """Uniform refinement: every triangle is split into four by its edge midpoints."""
        for _ in range(times):
            tri = mesh.triangles
            edges = np.sort(np.stack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]], axis=1).reshape(-1, 2), axis=1)
            unique_edges, inverse = np.unique(edges, axis=0, return_inverse=True)
            inverse = inverse.reshape(-1)
            midpoints = 0.5 * (mesh.vertices[unique_edges[:, 0]] + mesh.vertices[unique_edges[:, 1]])
            mid = (mesh.node_count + inverse).reshape(-1, 3)
            m01, m12, m20 = mid[:, 0], mid[:, 1], mid[:, 2]
            v0, v1, v2 = tri[:, 0], tri[:, 1], tri[:, 2]
            children = np.concatenate([
                np.column_stack([v0, m01, m20]),
                np.column_stack([v1, m12, m01]),
                np.column_stack([v2, m20, m12]),
                np.column_stack([m01, m12, m20]),
            ])
            mesh = self.assemble(np.vstack([mesh.vertices, midpoints]), children, mesh.polygon)
        return mesh

    def assemble(self, vertices: np.ndarray, triangles: np.ndarray, polygon: Optional[Polygon] = None) -> TriMesh:
        """Build a TriMesh (boundary edges, normals, h_max) from raw arrays."""
        triangles = np.asarray(triangles, dtype=np.int64)
        oriented = np.stack([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]], axis=1).reshape(-1, 2)
        owner = np.repeat(np.arange(len(triangles)), 3)
        keys = np.sort(oriented, axis=1)
        unique_edges, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
        inverse = inverse.reshape(-1)
        on_boundary = counts[inverse] == 1

        b_nodes = oriented[on_boundary]
        tangents = vertices[b_nodes[:, 1]] - vertices[b_nodes[:, 0]]
        lengths = np.linalg.norm(tangents, axis=1)
        normals = np.column_stack([tangents[:, 1], -tangents[:, 0]]) / lengths[:, None]
        boundary = BoundaryEdges(
            nodes=b_nodes,
            normals=normals,
            lengths=lengths,
            midpoints=0.5 * (vertices[b_nodes[:, 0]] + vertices[b_nodes[:, 1]]),
            triangles=owner[on_boundary],
        )
        edge_vectors = vertices[unique_edges[:, 1]] - vertices[unique_edges[:, 0]]
        h_max = float(np.linalg.norm(edge_vectors, axis=1).max())
        return TriMesh(vertices=vertices, triangles=triangles, boundary=boundary, h_max=h_max, polygon=polygon)

    def build_mesh(self, spec: DomainSpec, target_h: float, gauge: Optional[GaugeSpec] = None) -> TriMesh:
        """Polygon of a domain description, triangulated at target_h."""
        return self.triangulate(self.build_polygon(spec, gauge), target_h)

    # === Boundary quadrature ===

    def boundary_integral(self, mesh: TriMesh, density: EdgeDensity) -> float:
        """
        Midpoint-rule boundary integral.

        Args:
            mesh: Triangulation
            density: Constant, or callable mapping the BoundaryEdges to one value per edge

        Returns:
            sum over boundary edges of density * length
        """
        edges = mesh.boundary
        values = density(edges) if callable(density) else np.full(len(edges), float(density))
        return float(np.dot(np.asarray(values, dtype=float), edges.lengths))

    @staticmethod
    def position_flux(edges: BoundaryEdges) -> np.ndarray:
        """<x, nu> at the edge midpoints."""
        return np.sum(edges.midpoints * edges.normals, axis=1)

    @staticmethod
    def mesh_stats(mesh: TriMesh) -> MeshStats:
        return MeshStats(
            vertices=mesh.node_count,
            triangles=mesh.triangle_count,
            boundary_edges=len(mesh.boundary),
            h_max=mesh.h_max,
            area=mesh.area,
        )


# Singleton instance
domain_mesher = DomainMesher()

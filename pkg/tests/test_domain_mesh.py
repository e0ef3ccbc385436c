"""Tests for polygons, triangulation and boundary quadrature."""
import math

import numpy as np
import pytest
from pydantic import ValidationError

from anisolab.exceptions import DegenerateGeometry
from anisolab.models.schemas import DomainKind, DomainSpec
from anisolab.services.domain_mesh import distance_to_boundary, domain_mesher, points_in_polygon
from anisolab.services.gauge import gauge_calculus

DISK_64_AREA = 32 * math.sin(math.pi / 32)


# =============================================================================
# DOMAIN NAMES
# =============================================================================

def test_named_domains_parse():
    assert DomainSpec.model_validate("unit_disk_64").kind == DomainKind.DISK
    assert DomainSpec.model_validate("square(2)").side == 2.0
    assert DomainSpec.model_validate("Lshape").kind == DomainKind.LSHAPE
    wulff = DomainSpec.model_validate("wulff_32")
    assert wulff.kind == DomainKind.WULFF
    assert wulff.vertex_count == 32
    assert wulff.label == "wulff_32"


def test_unknown_domain_name_is_rejected():
    with pytest.raises(ValidationError):
        DomainSpec.model_validate("triangle_3")


# =============================================================================
# POLYGONS
# =============================================================================

def test_disk_polygon_area_and_margin():
    polygon = domain_mesher.build_polygon(DomainSpec.model_validate("unit_disk_64"))
    assert polygon.area == pytest.approx(DISK_64_AREA, rel=1e-12)
    assert domain_mesher.star_shape_margin(polygon) == pytest.approx(math.cos(math.pi / 64), rel=1e-12)


def test_lshape_margin_is_zero_at_the_notch():
    polygon = domain_mesher.build_polygon(DomainSpec.model_validate("Lshape"))
    assert polygon.area == pytest.approx(3.0)
    assert domain_mesher.star_shape_margin(polygon) == pytest.approx(0.0, abs=1e-15)


def test_shifted_lshape_is_not_star_shaped(shifted_lshape):
    polygon = domain_mesher.build_polygon(shifted_lshape)
    assert domain_mesher.star_shape_margin(polygon) == pytest.approx(-0.5)


def test_clockwise_vertices_are_reoriented():
    polygon = domain_mesher.make_polygon([(0, 0), (0, 1), (1, 1), (1, 0)])
    assert polygon.signed_area == pytest.approx(1.0)


@pytest.mark.parametrize(
    "vertices",
    [
        [(0, 0), (1, 1), (1, 0), (0, 1)],     # bow tie
        [(0, 0), (1, 0), (2, 0)],             # collinear
        [(0, 0), (1, 0), (1, 1), (1, 0)],     # repeated vertex
    ],
)
def test_degenerate_polygons_are_rejected(vertices):
    with pytest.raises(DegenerateGeometry):
        domain_mesher.make_polygon(vertices)


def test_wulff_domain_follows_the_gauge(ellipse):
    polygon = domain_mesher.build_polygon(DomainSpec.model_validate("wulff_64"), ellipse)
    assert polygon.area == pytest.approx(gauge_calculus.wulff_volume(ellipse).kappa_n, rel=1e-2)
    np.testing.assert_allclose(gauge_calculus.eval_polar(ellipse, polygon.vertices), 1.0, rtol=1e-12)


def test_ellipse_domain_ignores_the_gauge(euclidean, ellipse):
    spec = DomainSpec.model_validate("ellipse(2,1,64)")
    assert spec.kind == DomainKind.ELLIPSE
    assert spec.label == "ellipse(2,1,64)"
    round_gauge = domain_mesher.build_polygon(spec, euclidean)
    elliptic_gauge = domain_mesher.build_polygon(spec, ellipse)
    np.testing.assert_array_equal(round_gauge.vertices, elliptic_gauge.vertices)
    # k/2 a b sin(2 pi / k)
    assert round_gauge.area == pytest.approx(2 * DISK_64_AREA, rel=1e-12)
    assert round_gauge.diameter == pytest.approx(4.0)
    disk = domain_mesher.build_polygon(DomainSpec.model_validate("wulff_64"), euclidean)
    assert disk.area == pytest.approx(DISK_64_AREA, rel=1e-3)


def test_points_in_polygon_and_distance():
    square = np.array([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])
    points = np.array([(0.5, 0.5), (1.5, 0.5), (0.1, 0.9), (-0.2, -0.2)])
    np.testing.assert_array_equal(points_in_polygon(points, square), [True, False, True, False])
    np.testing.assert_allclose(distance_to_boundary(points[:1], square), [0.5])


# =============================================================================
# TRIANGULATION
# =============================================================================

def test_disk_mesh_covers_the_polygon(disk_mesh):
    assert disk_mesh.area == pytest.approx(DISK_64_AREA, rel=1e-10)
    assert disk_mesh.h_max <= 1.5 * 0.05
    assert np.all(disk_mesh.areas > 0)


def test_boundary_edges_lie_on_the_polygon(disk_mesh):
    polygon = disk_mesh.polygon
    d = distance_to_boundary(disk_mesh.boundary.midpoints, polygon.vertices)
    assert d.max() <= 1e-9
    perimeter = 64 * 2 * math.sin(math.pi / 64)
    assert disk_mesh.boundary.lengths.sum() == pytest.approx(perimeter, rel=1e-12)


def test_boundary_normals_close_up(square_mesh):
    edges = square_mesh.boundary
    total = (edges.normals * edges.lengths[:, None]).sum(axis=0)
    np.testing.assert_allclose(total, [0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(edges.normals, axis=1), 1.0)


def test_position_flux_is_twice_the_area(disk_mesh):
    flux = domain_mesher.boundary_integral(disk_mesh, domain_mesher.position_flux)
    assert flux == pytest.approx(2 * disk_mesh.area, rel=1e-12)


def test_constant_density_gives_the_perimeter(square_mesh):
    assert domain_mesher.boundary_integral(square_mesh, 1.0) == pytest.approx(8.0)


def test_lshape_lattice_and_ear_clipping_agree():
    polygon = domain_mesher.build_polygon(DomainSpec.model_validate("Lshape"))
    lattice = domain_mesher.triangulate(polygon, 0.1)
    clipped = domain_mesher.triangulate(polygon, 0.1, method="ear_clipping")
    for mesh in (lattice, clipped):
        assert mesh.area == pytest.approx(3.0, rel=1e-10)
        assert mesh.h_max <= 0.15
        assert np.all(mesh.areas > 0)
        assert mesh.boundary.lengths.sum() == pytest.approx(8.0, rel=1e-12)


def test_target_h_must_be_below_the_diameter():
    polygon = domain_mesher.build_polygon(DomainSpec.model_validate("square(2)"))
    with pytest.raises(DegenerateGeometry):
        domain_mesher.triangulate(polygon, 3.0)


def test_uniform_refinement(coarse_disk_mesh):
    fine = domain_mesher.refine(coarse_disk_mesh)
    assert fine.triangle_count == 4 * coarse_disk_mesh.triangle_count
    assert fine.area == pytest.approx(coarse_disk_mesh.area, rel=1e-12)
    assert fine.h_max == pytest.approx(coarse_disk_mesh.h_max / 2, rel=1e-12)
    assert len(fine.boundary) == 2 * len(coarse_disk_mesh.boundary)


def test_mesh_stats(unit_square_mesh):
    stats = domain_mesher.mesh_stats(unit_square_mesh)
    assert stats.vertices == unit_square_mesh.node_count
    assert stats.triangles == unit_square_mesh.triangle_count
    assert stats.area == pytest.approx(1.0)
    assert stats.h_max <= 0.15

"""
Analysis of piecewise-linear fields: quadrature, distribution function,
anisotropic perimeter of superlevel sets and the Wulff isoperimetric check.
"""
import logging
import math
from typing import Callable, List, Optional

import numpy as np
from scipy.integrate import trapezoid

from anisolab.config import settings
from anisolab.exceptions import WeightTooSingular
from anisolab.models.fields import LevelProfile, ScalarField, TriMesh
from anisolab.models.schemas import BoundReport, GaugeSpec
from anisolab.services.gauge import gauge_calculus

logger = logging.getLogger(__name__)

WULFF_THEOREM = "anisotropic isoperimetric inequality P_F(E) >= n kappa_n^(1/n) |E|^(1-1/n)"


class FieldAnalyzer:
    """Quadrature and level-set geometry of P1 fields."""

    # Perimeters are evaluated at s + PERIMETER_SHIFT * (sup - inf), the right limit in s
    PERIMETER_SHIFT = 1e-10

    def radial_weight(self, mesh: TriMesh, exponent: float) -> np.ndarray:
        """
        |x|^{-c} at triangle centroids with |x| clamped below at h_max / 10.

        Raises:
            WeightTooSingular: If c >= 2 (not integrable in the plane)
        """
        if exponent >= 2:
            raise WeightTooSingular(f"weight |x|^-{exponent:g} is not integrable in two dimensions")
        if exponent == 0:
            return np.ones(mesh.triangle_count)
        radius = np.linalg.norm(mesh.centroids, axis=1)
        radius = np.maximum(radius, settings.weight_clamp_ratio * mesh.h_max)
        return radius ** (-exponent)

    def integrate(
        self,
        f: ScalarField,
        transform: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        weight_exp: Optional[float] = None,
    ) -> float:
        """
        Centroid-rule integral of transform(f) |x|^{-c}.

        Args:
            f: Field
            transform: Pointwise map applied to centroid values (identity by default)
            weight_exp: Exponent c of the optional weight |x|^{-c}

        Returns:
            sum over triangles of area * transform(f(centroid)) * weight(centroid)
        """
        values = f.centroid_values
        if transform is not None:
            values = transform(values)
        if weight_exp is not None:
            values = values * self.radial_weight(f.mesh, weight_exp)
        return float(np.dot(f.mesh.areas, values))

    def gradient_field(self, f: ScalarField) -> np.ndarray:
        return f.gradients

    def anisotropic_variation(self, f: ScalarField, g: GaugeSpec) -> float:
        """Exact integral of F(grad f) for a P1 field."""
        return float(np.dot(f.mesh.areas, gauge_calculus.eval_F(g, f.gradients)))

    # === Superlevel sets ===

    def default_levels(self, f: ScalarField, count: Optional[int] = None) -> np.ndarray:
        return np.linspace(0.0, max(f.sup, 0.0), count or settings.level_count)

    def superlevel_area(self, f: ScalarField, s: float) -> float:
        """Exact area of {f > s} for the linear interpolant."""
        v = np.sort(f.values[f.mesh.triangles], axis=1)
        v0, v1, v2 = v[:, 0], v[:, 1], v[:, 2]
        d10 = np.where(v1 > v0, v1 - v0, 1.0)
        d20 = np.where(v2 > v0, v2 - v0, 1.0)
        d21 = np.where(v2 > v1, v2 - v1, 1.0)
        fraction = np.where(
            s >= v2,
            0.0,
            np.where(
                s <= v0,
                1.0,
                np.where(
                    s < v1,
                    1.0 - (s - v0) ** 2 / (d10 * d20),
                    (v2 - s) ** 2 / (d20 * d21),
                ),
            ),
        )
        return float(np.dot(f.mesh.areas, fraction))

    def superlevel_perimeter(self, f: ScalarField, s: float, g: GaugeSpec) -> float:
        """
        Anisotropic perimeter P_F({f > s}).

        Interior level segments contribute length * F(grad f) / |grad f|; boundary
        edges contribute the length of their part where f > s times F(nu).
        """
        mesh = f.mesh
        order = np.argsort(f.values[mesh.triangles], axis=1)
        tri_sorted = np.take_along_axis(mesh.triangles, order, axis=1)
        P = mesh.vertices[tri_sorted]
        v = f.values[tri_sorted]
        v0, v1, v2 = v[:, 0], v[:, 1], v[:, 2]

        crossing = (v0 < s) & (s < v2)
        total = 0.0
        if np.any(crossing):
            P, v0, v1, v2 = P[crossing], v0[crossing], v1[crossing], v2[crossing]
            grads = f.gradients[crossing]
            t02 = (s - v0) / (v2 - v0)
            a = P[:, 0] + t02[:, None] * (P[:, 2] - P[:, 0])
            lower = s < v1
            t01 = (s - v0) / np.where(lower, v1 - v0, 1.0)
            t12 = (s - v1) / np.where(lower, 1.0, v2 - v1)
            b = np.where(
                lower[:, None],
                P[:, 0] + t01[:, None] * (P[:, 1] - P[:, 0]),
                P[:, 1] + t12[:, None] * (P[:, 2] - P[:, 1]),
            )
            lengths = np.linalg.norm(a - b, axis=1)
            ratio = gauge_calculus.eval_F(g, grads) / np.linalg.norm(grads, axis=1)
            total += float(np.dot(lengths, ratio))

        edges = mesh.boundary
        ends = f.values[edges.nodes]
        hi, lo = ends.max(axis=1), ends.min(axis=1)
        span = np.where(hi > lo, hi - lo, 1.0)
        fraction = np.where(lo > s, 1.0, np.where(hi > s, (hi - s) / span, 0.0))
        total += float(np.dot(fraction * edges.lengths, gauge_calculus.eval_F(g, edges.normals)))
        return total

    def distribution_function(
        self,
        f: ScalarField,
        g: GaugeSpec,
        levels: Optional[np.ndarray] = None,
    ) -> LevelProfile:
        """
        Distribution function mu(s) = |{f > s}| and P_F({f > s}) on a level grid.

        Args:
            f: Field
            g: Gauge used for the anisotropic perimeter
            levels: Increasing levels in [0, sup f]; 200 uniform levels by default

        Returns:
            LevelProfile
        """
        levels = self.default_levels(f) if levels is None else np.asarray(levels, dtype=float)
        shift = self.PERIMETER_SHIFT * max(f.sup - float(f.values.min()), 1e-300)
        mu = np.array([self.superlevel_area(f, s) for s in levels])
        perim = np.array([self.superlevel_perimeter(f, s + shift, g) for s in levels])
        return LevelProfile(levels=levels, mu=mu, perim_F=perim)

    def layer_cake_integral(self, profile: LevelProfile) -> float:
        """Integral of mu(s) ds over the level grid."""
        return float(trapezoid(profile.mu, profile.levels))

    def coarea_integral(self, profile: LevelProfile) -> float:
        """Integral of P_F({f > s}) ds over the level grid."""
        return float(trapezoid(profile.perim_F, profile.levels))

    # === Wulff inequality ===

    def wulff_check(
        self,
        profile: LevelProfile,
        g: GaugeSpec,
        h_max: float,
        strict: bool = False,
        kappa_n: Optional[float] = None,
    ) -> List[BoundReport]:
        """
        Check P_F >= 2 kappa_2^{1/2} mu^{1/2} at every level.

        Args:
            profile: Level profile of a field
            g: Gauge of the perimeter
            h_max: Mesh size entering the tolerance C * h_max
            strict: Use zero tolerance
            kappa_n: Area of the Wulff shape (computed when omitted)

        Returns:
            One BoundReport per level, orientation perim_F >= rhs
        """
        kappa = kappa_n if kappa_n is not None else gauge_calculus.wulff_volume(g).kappa_n
        tolerance = 0.0 if strict else settings.wulff_tolerance_c * h_max
        reports = []
        for s, mu, perim in zip(profile.levels, profile.mu, profile.perim_F):
            rhs = 2.0 * math.sqrt(kappa) * math.sqrt(max(mu, 0.0))
            reports.append(
                BoundReport.build(WULFF_THEOREM, float(perim), rhs, "ge", tolerance, {"level": float(s), "mu": float(mu)})
            )
        violated = sum(not r.satisfied for r in reports)
        if violated:
            logger.warning(f"Wulff inequality violated at {violated} of {len(reports)} levels")
        return reports

    def with_wulff_slack(self, profile: LevelProfile, reports: List[BoundReport]) -> LevelProfile:
        return LevelProfile(
            levels=profile.levels,
            mu=profile.mu,
            perim_F=profile.perim_F,
            wulff_slack=np.array([r.slack for r in reports]),
        )


# Singleton instance
field_analyzer = FieldAnalyzer()

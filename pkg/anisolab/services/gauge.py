"""
Anisotropic gauge calculus.
Evaluates F, its polar F°, derivatives of F^p and the measures of the Wulff sets.
"""
import logging
import math
from typing import Optional

import numpy as np
from scipy.special import gamma

from anisolab.config import settings
from anisolab.exceptions import DegenerateAtZero, WrongRegime
from anisolab.models.schemas import GaugeFamily, GaugeHypotheses, GaugeSpec, WulffInfo

logger = logging.getLogger(__name__)


def unit_directions(count: int, offset: float = 0.0) -> np.ndarray:
    """Equally spaced unit vectors in the plane, shape (count, 2)."""
    angles = 2.0 * np.pi * (np.arange(count) + offset) / count
    return np.column_stack([np.cos(angles), np.sin(angles)])


def shoelace_area(points: np.ndarray) -> float:
    x, y = points[:, 0], points[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y)))


class GaugeCalculus:
    """
    Closed-form calculus for the supported gauge families.

    Every method accepts a single vector of shape (n,) or a stack of shape (..., n)
    and broadcasts over the leading axes.
    """

    # Dilations used when sampling degree-1 homogeneity
    HOMOGENEITY_FACTORS = (-10.0, -2.5, -1.0, -0.3, 0.25, 2.0, 7.5)

    # Directions used by the hypotheses report
    HYPOTHESIS_DIRECTIONS = 360

    def _metric(self, g: GaugeSpec) -> np.ndarray:
        return np.array([g.a ** 2, g.b ** 2])

    def eval_F(self, g: GaugeSpec, xi) -> np.ndarray:
        """F(xi); F(0) = 0."""
        xi = np.asarray(xi, dtype=float)
        if g.family == GaugeFamily.EUCLIDEAN:
            return np.linalg.norm(xi, axis=-1)
        if g.family == GaugeFamily.ELLIPSE:
            return np.sqrt(np.sum(self._metric(g) * xi ** 2, axis=-1))
        return np.sum(np.abs(xi) ** g.q, axis=-1) ** (1.0 / g.q)

    def eval_polar(self, g: GaugeSpec, x, method: str = "closed", directions: Optional[int] = None) -> np.ndarray:
        """
        Polar gauge F°(x) = sup <x, xi> / F(xi).

        Args:
            g: Gauge
            x: Point(s)
            method: "closed" for the family's dual norm, "grid" to maximize over a
                direction grid (planar gauges only)
            directions: Grid resolution for method="grid"

        Returns:
            F°(x), zero at the origin
        """
        x = np.asarray(x, dtype=float)
        if method == "grid":
            return self._grid_sup(x, lambda d: self.eval_F(g, d), directions)
        if g.family == GaugeFamily.EUCLIDEAN:
            return np.linalg.norm(x, axis=-1)
        if g.family == GaugeFamily.ELLIPSE:
            return np.sqrt(np.sum(x ** 2 / self._metric(g), axis=-1))
        q_dual = g.q / (g.q - 1.0)
        return np.sum(np.abs(x) ** q_dual, axis=-1) ** (1.0 / q_dual)

    def _grid_sup(self, x: np.ndarray, denominator, directions: Optional[int]) -> np.ndarray:
        if x.shape[-1] != 2:
            raise WrongRegime("grid maximization is implemented for planar gauges only")
        dirs = unit_directions(directions or settings.polar_grid_directions)
        ratios = (x @ dirs.T) / denominator(dirs)
        return np.maximum(ratios.max(axis=-1), 0.0)

    def bipolar_residual(self, g: GaugeSpec, x, directions: Optional[int] = None) -> float:
        """Largest relative gap between F(x) and sup <x, xi> / F°(xi) over a direction grid."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        bipolar = self._grid_sup(x, lambda d: self.eval_polar(g, d), directions)
        direct = self.eval_F(g, x)
        return float(np.max(np.abs(bipolar - direct) / np.maximum(direct, 1e-300)))

    def grad_F(self, g: GaugeSpec, xi) -> np.ndarray:
        """Gradient of F away from the origin (zero vector at the origin)."""
        xi = np.asarray(xi, dtype=float)
        F = self.eval_F(g, xi)[..., None]
        safe = np.where(F > 0, F, 1.0)
        if g.family == GaugeFamily.EUCLIDEAN:
            grad = xi / safe
        elif g.family == GaugeFamily.ELLIPSE:
            grad = self._metric(g) * xi / safe
        else:
            grad = np.sign(xi) * np.abs(xi) ** (g.q - 1.0) * safe ** (1.0 - g.q)
        return np.where(F > 0, grad, 0.0)

    def grad_Fp(self, g: GaugeSpec, p: float, xi) -> np.ndarray:
        """Gradient of F^p, extended by zero at the origin."""
        xi = np.asarray(xi, dtype=float)
        F = self.eval_F(g, xi)[..., None]
        return p * np.where(F > 0, F, 0.0) ** (p - 1.0) * self.grad_F(g, xi)

    def hess_Fp(self, g: GaugeSpec, p: float, xi) -> np.ndarray:
        """
        Hessian [F^p]_{xi xi}, shape (..., n, n).

        Raises:
            DegenerateAtZero: If any xi is the zero vector, or an l^q gauge with q < 2
                is evaluated on a coordinate hyperplane
        """
        xi = np.asarray(xi, dtype=float)
        F = self.eval_F(g, xi)
        if np.any(F == 0):
            raise DegenerateAtZero("Hessian of F^p is undefined at xi = 0")
        hess = self._hessian(g, p, xi, F)
        if not np.all(np.isfinite(hess)):
            raise DegenerateAtZero(f"Hessian of {g.label}^p is unbounded on the coordinate axes")
        return hess

    def hess_Fp_extended(self, g: GaugeSpec, p: float, xi: np.ndarray) -> np.ndarray:
        """
        Hessian stack with the continuous extension at xi = 0.

        Quadratic gauges at p = 2 have a constant Hessian; otherwise zero is used,
        which is the limit for p > 2. Entries may be infinite for l^q gauges with q < 2.
        """
        xi = np.asarray(xi, dtype=float)
        F = self.eval_F(g, xi)
        n = xi.shape[-1]
        hess = np.zeros(xi.shape + (n,))
        nonzero = F > 0
        if np.any(nonzero):
            with np.errstate(divide="ignore", invalid="ignore"):
                hess[nonzero] = self._hessian(g, p, xi[nonzero], F[nonzero])
        if p == 2 and g.family != GaugeFamily.LP_NORM and np.any(~nonzero):
            metric = np.eye(n) if g.family == GaugeFamily.EUCLIDEAN else np.diag(self._metric(g))
            hess[~nonzero] = 2.0 * metric
        return hess

    def _hessian(self, g: GaugeSpec, p: float, xi: np.ndarray, F: np.ndarray) -> np.ndarray:
        Fe = F[..., None, None]
        n = xi.shape[-1]
        if g.family == GaugeFamily.EUCLIDEAN:
            outer = np.einsum("...i,...j->...ij", xi, xi)
            return p * Fe ** (p - 2) * (np.eye(n) + (p - 2) * outer / Fe ** 2)
        if g.family == GaugeFamily.ELLIPSE:
            Axi = self._metric(g) * xi
            outer = np.einsum("...i,...j->...ij", Axi, Axi)
            return p * Fe ** (p - 2) * np.diag(self._metric(g)) + p * (p - 2) * Fe ** (p - 4) * outer
        q = g.q
        s = np.sign(xi) * np.abs(xi) ** (q - 1.0)
        outer = np.einsum("...i,...j->...ij", s, s)
        with np.errstate(divide="ignore"):
            diag = np.abs(xi) ** (q - 2.0)
        diag_matrix = np.einsum("...i,ij->...ij", diag, np.eye(n))
        return p * (p - q) * Fe ** (p - 2 * q) * outer + p * (q - 1) * Fe ** (p - q) * diag_matrix

    def wulff_volume(self, g: GaugeSpec, directions: Optional[int] = None) -> WulffInfo:
        """
        Areas of K° = {F° <= 1} (kappa_n) and K = {F <= 1} (omega_K).

        Both are shoelace areas of the star polygons with vertices dir / F°(dir) and
        dir / F(dir).
        """
        if g.dimension != 2:
            raise WrongRegime(f"Wulff volumes are computed in dimension 2, got n={g.dimension}")
        count = directions or settings.wulff_directions
        dirs = unit_directions(count)
        kappa_n = shoelace_area(dirs / self.eval_polar(g, dirs)[:, None])
        omega_K = shoelace_area(dirs / self.eval_F(g, dirs)[:, None])
        logger.debug(f"Wulff volumes of {g.label}: kappa_n={kappa_n:.9f}, omega_K={omega_K:.9f}")
        return WulffInfo(kappa_n=kappa_n, omega_K=omega_K, directions=count)

    def wulff_boundary(self, g: GaugeSpec, count: int) -> np.ndarray:
        """Counter-clockwise vertices on the boundary of K° = {F° <= 1}."""
        dirs = unit_directions(count)
        return dirs / self.eval_polar(g, dirs)[:, None]

    @staticmethod
    def unit_ball_volume(n: int) -> float:
        """omega_n, the measure of the Euclidean unit ball in R^n."""
        return float(math.pi ** (n / 2) / gamma(n / 2 + 1))

    @staticmethod
    def unit_sphere_area(n: int) -> float:
        """Measure of the unit sphere S^{n-1} in R^n."""
        return float(2 * math.pi ** (n / 2) / gamma(n / 2))

    def hypotheses(self, g: GaugeSpec, p: float = 2.0, directions: Optional[int] = None) -> GaugeHypotheses:
        """Sample the gauge axioms and positive-definiteness of [F^p]_{xi xi} on unit directions."""
        count = directions or self.HYPOTHESIS_DIRECTIONS
        dirs = unit_directions(count)
        if g.dimension > 2:
            rng = np.random.default_rng(0)
            dirs = rng.normal(size=(count, g.dimension))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)

        F = self.eval_F(g, dirs)
        homogeneity = max(
            float(np.max(np.abs(self.eval_F(g, t * dirs) - abs(t) * F) / (1.0 + abs(t) * F)))
            for t in self.HOMOGENEITY_FACTORS
        )
        evenness = float(np.max(np.abs(self.eval_F(g, -dirs) - F)))

        with np.errstate(divide="ignore", invalid="ignore"):
            hess = self._hessian(g, p, dirs, F)
        finite = np.all(np.isfinite(hess), axis=(-2, -1))
        eigenvalues = np.linalg.eigvalsh(hess[finite]) if np.any(finite) else np.zeros((1, 1))
        min_eigenvalue = float(eigenvalues.min())
        positive_definite = bool(np.all(finite) and min_eigenvalue > 0)
        if not positive_definite:
            logger.warning(f"[F^p]_xixi of {g.label} is not positive definite on sampled directions")

        return GaugeHypotheses(
            alpha=float(F.min()),
            beta=float(F.max()),
            homogeneity_residual=homogeneity,
            evenness_residual=evenness,
            min_hessian_eigenvalue=min_eigenvalue,
            hessian_positive_definite=positive_definite,
        )


# Singleton instance
gauge_calculus = GaugeCalculus()

"""
Torsion function on geodesic balls of the simply connected space forms.

Everything reduces to radial quadrature: with sn = sin, identity or sinh for
curvature +1, 0, -1 and ct = sn'/sn, the torsion function solves
    u'' + (n-1) ct(r) u' = -1,  u'(0) = 0,  u(theta) = 0.
"""
import logging
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.integrate import cumulative_simpson, simpson

from anisolab.config import settings
from anisolab.exceptions import HypothesisViolated, InvalidRadius
from anisolab.models.fields import RadialProfile, RadialSolution, SpaceformBall
from anisolab.models.schemas import BoundReport, SampledPredicate, SourceSpec, SpaceformRow, SpaceformSpec, SpaceformSweep
from anisolab.services.gauge import gauge_calculus
from anisolab.services.solver import SourceTerms

logger = logging.getLogger(__name__)

BOUNDARY_HESSIAN_THEOREM = "boundary Hessian bound u''(theta) <= -1/n - (n-1) kappa T / V"
BOUNDARY_HESSIAN_INTEGRAL_THEOREM = (
    "integrated boundary Hessian bound A u''(theta) <= (n-1) (V/n - kappa T)^(1/2) (A H)^(1/2) - A"
)
BOUNDARY_GRADIENT_THEOREM = "boundary gradient bound max |grad u|^2 >= (n+2) T / (n V) + 2(n-1) kappa / V int u |grad u|^2"
CONSTANT_SOURCE_THEOREM = "constant source bound int g (2(n-1) u g / n - 3 G - (n-1) kappa u^2) >= int (du/dnu)^3"
CLOSED_MANIFOLD_THEOREM = "closed manifold constant solution"
REILLY_THEOREM = "Reilly formula residual (radial)"


class SpaceformAnalyzer:
    """Radial reduction of the Riemannian torsion estimates."""

    # === Model space geometry ===

    @staticmethod
    def sn(kappa: int, r: np.ndarray) -> np.ndarray:
        if kappa == 1:
            return np.sin(r)
        if kappa == -1:
            return np.sinh(r)
        return np.asarray(r, dtype=float)

    @staticmethod
    def sn_prime(kappa: int, r: np.ndarray) -> np.ndarray:
        if kappa == 1:
            return np.cos(r)
        if kappa == -1:
            return np.cosh(r)
        return np.ones_like(np.asarray(r, dtype=float))

    def ct(self, kappa: int, r: np.ndarray) -> np.ndarray:
        """sn'/sn; infinite at r = 0."""
        with np.errstate(divide="ignore"):
            return self.sn_prime(kappa, r) / self.sn(kappa, r)

    def make_ball(self, spec: SpaceformSpec) -> SpaceformBall:
        """
        Raises:
            InvalidRadius: If theta >= pi on the sphere
        """
        if spec.kappa == 1 and spec.theta >= np.pi:
            raise InvalidRadius(f"geodesic radius {spec.theta:g} must be below pi on the unit sphere")
        return SpaceformBall(n=spec.n, kappa=spec.kappa, theta=spec.theta, grid_points=spec.grid_points)

    def volume_element(self, ball: SpaceformBall) -> np.ndarray:
        """sigma_{n-1} sn(r)^{n-1} on the grid."""
        return gauge_calculus.unit_sphere_area(ball.n) * self.sn(ball.kappa, ball.grid) ** (ball.n - 1)

    def integrate(self, ball: SpaceformBall, values: np.ndarray) -> float:
        """int_B f dV for a radial function sampled on the grid."""
        return float(simpson(values * self.volume_element(ball), x=ball.grid))

    # === Torsion function ===

    def solve_radial_torsion(self, ball: SpaceformBall) -> RadialSolution:
        """
        Radial torsion function of a geodesic ball.

        u'(r) = -(1/sn^{n-1}) int_0^r sn^{n-1}, u(r) = -int_r^theta u', and
        u'' = -1 - (n-1) ct u' from the equation itself.
        """
        if ball.kappa == 1 and ball.theta >= np.pi:
            raise InvalidRadius(f"geodesic radius {ball.theta:g} must be below pi on the unit sphere")
        n, kappa, r = ball.n, ball.kappa, ball.grid
        weight = self.sn(kappa, r) ** (n - 1)
        inner = cumulative_simpson(weight, x=r, initial=0.0)

        u_prime = np.zeros_like(r)
        u_prime[1:] = -inner[1:] / weight[1:]
        primitive = cumulative_simpson(u_prime, x=r, initial=0.0)
        u = primitive - primitive[-1]

        u_double_prime = np.empty_like(r)
        u_double_prime[0] = -1.0 / n
        u_double_prime[1:] = -1.0 - (n - 1) * self.ct(kappa, r[1:]) * u_prime[1:]

        sigma = gauge_calculus.unit_sphere_area(n)
        V = float(sigma * simpson(weight, x=r))
        T = float(sigma * simpson(u * weight, x=r))
        A = float(sigma * weight[-1])
        H = float(self.ct(kappa, np.array([ball.theta]))[0])
        logger.debug(f"Radial torsion n={n}, kappa={kappa}, theta={ball.theta:g}: u(0)={u[0]:.12g}, T={T:.12g}")
        return RadialSolution(
            ball=ball, u=u, u_prime=u_prime, u_double_prime=u_double_prime, T=T, V=V, A=A, H_boundary=H
        )

    def _tolerance(self, *values: float) -> float:
        return settings.radial_tolerance * max(1.0, *(abs(v) for v in values))

    # === Checks ===

    def check_boundary_hessian(
        self, sol: RadialSolution, ball: Optional[SpaceformBall] = None
    ) -> Tuple[BoundReport, BoundReport]:
        """
        Pointwise and integrated bounds on the normal second derivative at the boundary.

        Returns:
            (pointwise report, integrated report), both with orientation lhs <= rhs

        Raises:
            HypothesisViolated: If the boundary mean curvature is negative
        """
        return self.boundary_hessian_pointwise(sol, ball), self.boundary_hessian_integrated(sol, ball)

    def boundary_hessian_pointwise(self, sol: RadialSolution, ball: Optional[SpaceformBall] = None) -> BoundReport:
        """u''(theta) <= -1/n - (n-1) kappa T / V; u'' is constant on the boundary sphere."""
        ball = ball or sol.ball
        n, kappa = ball.n, ball.kappa
        u2 = float(sol.u_double_prime[-1])
        rhs = -1.0 / n - (n - 1) * kappa * sol.T / sol.V
        return BoundReport.build(
            BOUNDARY_HESSIAN_THEOREM, u2, rhs, "le", self._tolerance(u2, rhs), {"T": sol.T, "V": sol.V}
        )

    def boundary_hessian_integrated(self, sol: RadialSolution, ball: Optional[SpaceformBall] = None) -> BoundReport:
        """A u''(theta) <= (n-1) (V/n - kappa T)^(1/2) (A H)^(1/2) - A; needs H >= 0."""
        ball = ball or sol.ball
        n, kappa = ball.n, ball.kappa
        if sol.H_boundary < 0:
            raise HypothesisViolated(
                f"boundary mean curvature {sol.H_boundary:.6g} is negative (theta={ball.theta:g} > pi/2)"
            )
        lhs = sol.A * float(sol.u_double_prime[-1])
        rhs = float((n - 1) * np.sqrt(max(sol.V / n - kappa * sol.T, 0.0)) * np.sqrt(sol.A * sol.H_boundary) - sol.A)
        return BoundReport.build(
            BOUNDARY_HESSIAN_INTEGRAL_THEOREM, lhs, rhs, "le", self._tolerance(lhs, rhs), {"A": sol.A, "H": sol.H_boundary}
        )

    def check_boundary_gradient(self, sol: RadialSolution, ball: Optional[SpaceformBall] = None) -> BoundReport:
        """u'(theta)^2 >= (n+2) T / (n V) + 2(n-1) kappa / V int u |grad u|^2 dV."""
        ball = ball or sol.ball
        n, kappa = ball.n, ball.kappa
        lhs = sol.max_boundary_grad_sq
        energy = self.integrate(ball, sol.u * sol.u_prime ** 2)
        rhs = (n + 2) * sol.T / (n * sol.V) + 2 * (n - 1) * kappa / sol.V * energy
        return BoundReport.build(
            BOUNDARY_GRADIENT_THEOREM, lhs, rhs, "ge", self._tolerance(lhs, rhs), {"int_u_grad_sq": energy}
        )

    def check_constant_source(self, ball: SpaceformBall, g_const: float, sol: Optional[RadialSolution] = None) -> BoundReport:
        """
        int g(u)(2(n-1) u g(u)/n - 3 G(u) - (n-1) kappa u^2) >= int_{boundary} (du/dnu)^3 for g = g_const.

        The solution is g_const times the radial torsion function.
        """
        sol = sol or self.solve_radial_torsion(ball)
        n, kappa, c = ball.n, ball.kappa, g_const
        u = c * sol.u
        integrand = c * (2 * (n - 1) * c * u / n - 3 * c * u - (n - 1) * kappa * u ** 2)
        lhs = self.integrate(ball, integrand)
        rhs = sol.A * (c * float(sol.u_prime[-1])) ** 3
        return BoundReport.build(
            CONSTANT_SOURCE_THEOREM, lhs, rhs, "ge", self._tolerance(lhs, rhs), {"g_const": c}
        )

    # === Reilly formula ===

    def torsion_profile(self, sol: RadialSolution) -> RadialProfile:
        return RadialProfile(f=sol.u, f_prime=sol.u_prime, f_double_prime=sol.u_double_prime)

    def profile_from_functions(
        self,
        ball: SpaceformBall,
        f: Callable[[np.ndarray], np.ndarray],
        f_prime: Callable[[np.ndarray], np.ndarray],
        f_double_prime: Callable[[np.ndarray], np.ndarray],
    ) -> RadialProfile:
        r = ball.grid
        return RadialProfile(
            f=np.broadcast_to(f(r), r.shape).astype(float),
            f_prime=np.broadcast_to(f_prime(r), r.shape).astype(float),
            f_double_prime=np.broadcast_to(f_double_prime(r), r.shape).astype(float),
        )

    def reilly_residual_radial(self, ball: SpaceformBall, profile: RadialProfile) -> float:
        """
        Relative gap between the two sides of Reilly's formula for a radial function.

        L = int ((Delta f)^2 - |Hess f|^2 - (n-1) kappa f'^2) dV with
        (Delta f)^2 - |Hess f|^2 = 2(n-1) ct f' f'' + (n-1)(n-2) (ct f')^2, and
        R = (n-1) H A f'(theta)^2.
        """
        n, kappa = ball.n, ball.kappa
        f1, f2 = profile.f_prime, profile.f_double_prime
        ct_f1 = np.empty_like(f1)
        ct_f1[0] = f2[0]
        ct_f1[1:] = self.ct(kappa, ball.grid[1:]) * f1[1:]
        integrand = 2 * (n - 1) * ct_f1 * f2 + (n - 1) * (n - 2) * ct_f1 ** 2 - (n - 1) * kappa * f1 ** 2
        L = self.integrate(ball, integrand)
        A = gauge_calculus.unit_sphere_area(n) * float(self.sn(kappa, np.array([ball.theta]))[0]) ** (n - 1)
        H = float(self.ct(kappa, np.array([ball.theta]))[0])
        R = (n - 1) * H * A * float(f1[-1]) ** 2
        return abs(L - R) / (abs(L) + abs(R) + 1e-300)

    # === Closed manifolds ===

    def closed_manifold_predicate(
        self, n: int, kappa: int, src: SourceSpec, t_max: float = 10.0, samples: int = 4001
    ) -> SampledPredicate:
        """
        g(t) (2(n-1) t g(t)/n - 3 G(t) - (n-1) kappa t^2) < 0 for sampled t > 0 off a discrete set.

        When it holds, every nonnegative solution of Delta u + g(u) = 0 on a closed manifold
        with Ric >= (n-1) kappa is constant. Isolated nonnegative samples are allowed.
        """
        t = np.linspace(0.0, t_max, samples)[1:]
        terms = SourceTerms(src)
        g = terms.g(t) * np.ones_like(t)
        values = g * (2 * (n - 1) * t * g / n - 3 * terms.G(t) - (n - 1) * kappa * t ** 2)
        nonnegative = values >= 0
        return SampledPredicate(
            name="closed manifold: nonnegative solutions are constant",
            max_value=float(values.max()),
            samples=len(t),
            satisfied=not bool(np.any(nonnegative[1:] & nonnegative[:-1])),
        )

    def constant_solution_check(self, n: int, kappa: int, value: float, src: SourceSpec) -> BoundReport:
        """
        A constant u = value with g(value) = 0 makes both sides of the constant-source
        inequality vanish (no boundary, zero integrand).
        """
        terms = SourceTerms(src)
        g = float(np.atleast_1d(terms.g(np.array([value])))[0])
        if abs(g) > 1e-12:
            raise HypothesisViolated(f"g({value:g}) = {g:.6g} is not zero; constants do not solve the problem")
        G = float(np.atleast_1d(terms.G(np.array([value])))[0])
        lhs = g * (2 * (n - 1) * value * g / n - 3 * G - (n - 1) * kappa * value ** 2)
        return BoundReport.build(CLOSED_MANIFOLD_THEOREM, lhs, 0.0, "ge", 0.0, {"value": value})

    # === Sweeps ===

    def report_rows(self, ball: SpaceformBall, g_const: float = 1.0) -> List[SpaceformRow]:
        """All radial checks on one ball as table rows."""
        sol = self.solve_radial_torsion(ball)
        reports = [self.boundary_hessian_pointwise(sol, ball)]
        try:
            reports.append(self.boundary_hessian_integrated(sol, ball))
        except HypothesisViolated as e:
            logger.info(f"Skipping integrated boundary Hessian bound: {e.detail}")
        reports.append(self.check_boundary_gradient(sol, ball))
        reports.append(self.check_constant_source(ball, g_const, sol))

        rows = [
            SpaceformRow(
                n=ball.n, kappa=ball.kappa, theta=ball.theta, theorem=r.theorem,
                lhs=r.lhs, rhs=r.rhs, slack=r.slack, satisfied=r.satisfied,
            )
            for r in reports
        ]
        residual = self.reilly_residual_radial(ball, self.torsion_profile(sol))
        rows.append(
            SpaceformRow(
                n=ball.n, kappa=ball.kappa, theta=ball.theta, theorem=REILLY_THEOREM,
                lhs=residual, rhs=0.0, slack=-residual, satisfied=residual <= settings.reilly_tolerance,
            )
        )
        return rows

    def sweep(self, sweep: SpaceformSweep, g_const: float = 1.0) -> List[SpaceformRow]:
        """Rows for every admissible (n, kappa, theta) of the sweep; theta >= pi on the sphere is skipped."""
        rows: List[SpaceformRow] = []
        for n in sweep.n_values:
            for kappa in sweep.kappa_values:
                for theta in sweep.theta_values:
                    if kappa == 1 and theta >= np.pi:
                        logger.info(f"Skipping theta={theta:g} on the sphere")
                        continue
                    ball = SpaceformBall(n=n, kappa=kappa, theta=theta, grid_points=sweep.grid_points)
                    rows.extend(self.report_rows(ball, g_const))
        logger.info(f"Space-form sweep produced {len(rows)} rows")
        return rows


# Singleton instance
spaceform_analyzer = SpaceformAnalyzer()
